#include "paco/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "paco/mlp.hpp"

namespace paco {

namespace {

constexpr int kMaxPositions = 8;

// parameter order: We, be, Wh, bh, Wo, bo, pos0..pos{max-1}, tok0..tok{vocab-1}
constexpr std::size_t kIdxWe = 0, kIdxBe = 1, kIdxWh = 2, kIdxBh = 3,
                      kIdxWo = 4, kIdxBo = 5, kIdxPos = 6;
constexpr std::size_t kIdxTok = kIdxPos + kMaxPositions;

}  // namespace

int rationale_symbol_to_token(int symbol) {
  if (symbol < 0 || symbol >= kRationaleVocab)
    throw DataError("rationale symbol out of range");
  if (symbol == kRationaleEnd) return kTokEnd;
  return 2 + symbol;
}

PairScorer init_scorer(RngStream& stream, const ScorerConfig& cfg) {
  std::size_t feats = 4 * static_cast<std::size_t>(cfg.toy.k_id) + 2;
  std::size_t h = static_cast<std::size_t>(cfg.hidden);
  auto gauss = [&stream](std::vector<std::size_t> shape, double s) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (auto& v : t.values) v = s * stream.gaussian();
    return t;
  };
  PairScorer scorer;
  scorer.cfg = cfg;
  ParamSet& p = scorer.params;
  p.add("We", gauss({feats, h}, 1.0 / std::sqrt(static_cast<double>(feats))));
  p.add("be", Tensor::zeros({h}));
  p.add("Wh", gauss({h, h}, 1.0 / std::sqrt(static_cast<double>(h))));
  p.add("bh", Tensor::zeros({h}));
  p.add("Wo", gauss({h, kScorerVocab}, 1.0 / std::sqrt(static_cast<double>(h))));
  p.add("bo", Tensor::zeros({kScorerVocab}));
  for (int i = 0; i < kMaxPositions; ++i)
    p.add("pos" + std::to_string(i), gauss({h}, 0.1));
  for (int i = 0; i < kScorerVocab; ++i)
    p.add("tok" + std::to_string(i), gauss({h}, 0.1));
  return scorer;
}

Tensor pair_features(const Signal& ref, const Signal& cand,
                     const ToyConfig& toy) {
  auto a = extract_identity(ref, toy);
  auto b = extract_identity(cand, toy);
  std::vector<double> f;
  f.insert(f.end(), a.begin(), a.end());
  f.insert(f.end(), b.begin(), b.end());
  double dist2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    f.push_back(d);
    dist2 += d * d;
  }
  // quadratic features make the decision boundary near-linear
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    f.push_back(d * d);
  }
  f.push_back(dist2);
  f.push_back(std::exp(-dist2 / toy.tau_c));
  std::size_t n = f.size();
  return Tensor({1, n}, std::move(f));
}

double paco_loss(std::span<const double> target_logp, double alpha) {
  if (target_logp.empty()) throw DataError("paco_loss: empty target");
  if (alpha < 0.0 || alpha > 1.0) throw DataError("paco_loss: alpha outside [0,1]");
  if (target_logp.size() == 1) return -target_logp[0];
  double rest = 0.0;
  for (std::size_t i = 1; i < target_logp.size(); ++i) rest += target_logp[i];
  rest /= static_cast<double>(target_logp.size() - 1);
  return -(alpha * target_logp[0] + (1.0 - alpha) * rest);
}

std::vector<int> pair_target_tokens(const LabeledPair& pair, bool fast) {
  std::vector<int> tokens;
  tokens.push_back(pair.label == PairLabel::Consistent ? kTokYes : kTokNo);
  if (!fast) {
    if (pair.rationale.empty())
      throw DataError("pair_target_tokens: pair has no rationale");
    for (int sym : pair.rationale)
      tokens.push_back(rationale_symbol_to_token(sym));
  }
  return tokens;
}

namespace {

std::vector<double> hidden_state(const PairScorer& scorer,
                                 const Tensor& features, int position,
                                 int prev_token) {
  const ParamSet& p = scorer.params;
  Tensor enc = mlp_forward_plain(MlpSpec{{features.shape[1],
                                          static_cast<std::size_t>(
                                              scorer.cfg.hidden)}},
                                 p, features, kIdxWe);
  for (auto& v : enc.values) v = std::tanh(v);
  const Tensor& wh = p[kIdxWh];
  const Tensor& bh = p[kIdxBh];
  std::size_t h = bh.size();
  std::vector<double> z(h, 0.0);
  for (std::size_t i = 0; i < h; ++i) {
    double s = bh.values[i] + p[kIdxPos + position].values[i];
    if (prev_token >= 0) s += p[kIdxTok + prev_token].values[i];
    for (std::size_t k = 0; k < h; ++k)
      s += enc.values[k] * wh.values[k * h + i];
    z[i] = std::tanh(s);
  }
  return z;
}

}  // namespace

std::vector<double> scorer_logits(const PairScorer& scorer,
                                  const Tensor& features, int position,
                                  int prev_token) {
  if (position < 0 || position >= kMaxPositions)
    throw DataError("scorer_logits: position out of range");
  const ParamSet& p = scorer.params;
  auto z = hidden_state(scorer, features, position, prev_token);
  const Tensor& wo = p[kIdxWo];
  const Tensor& bo = p[kIdxBo];
  std::vector<double> logits(kScorerVocab);
  for (int j = 0; j < kScorerVocab; ++j) {
    double s = bo.values[j];
    for (std::size_t k = 0; k < z.size(); ++k)
      s += z[k] * wo.values[k * kScorerVocab + j];
    logits[j] = s;
  }
  return logits;
}

double score(const PairScorer& scorer, const Signal& ref, const Signal& cand) {
  auto logits = scorer_logits(scorer, pair_features(ref, cand, scorer.cfg.toy),
                              0, -1);
  double zmax = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  for (double v : logits) denom += std::exp(v - zmax);
  return std::exp(logits[kTokYes] - zmax) / denom;
}

std::vector<int> rank_candidates(const PairScorer& scorer,
                                 const RankingInstance& instance) {
  if (instance.cand_signals.size() != 4)
    throw DataError("rank_candidates: expected 4 candidates");
  std::vector<double> scores;
  for (const auto& cand : instance.cand_signals)
    scores.push_back(score(scorer, instance.ref_signal, cand));
  std::vector<int> order{0, 1, 2, 3};
  std::stable_sort(order.begin(), order.end(),
                   [&scores](int a, int b) { return scores[a] > scores[b]; });
  return order;
}

namespace {

// Tape forward mirroring hidden_state/scorer_logits; returns the log-prob
// node of the target token at one position.
Tape::Id position_logprob(Tape& tape, const PairScorer& scorer,
                          const std::vector<Tape::Id>& ids, Tape::Id features,
                          int position, int prev_token, int target) {
  Tape::Id enc = tape.tanh_(tape.add_rowwise(
      tape.matmul(features, ids[kIdxWe]), ids[kIdxBe]));
  Tape::Id pre = tape.add_rowwise(tape.matmul(enc, ids[kIdxWh]), ids[kIdxBh]);
  pre = tape.add_rowwise(pre, ids[kIdxPos + position]);
  if (prev_token >= 0) pre = tape.add_rowwise(pre, ids[kIdxTok + prev_token]);
  Tape::Id z = tape.tanh_(pre);
  Tape::Id logits2d =
      tape.add_rowwise(tape.matmul(z, ids[kIdxWo]), ids[kIdxBo]);
  Tape::Id logits = tape.concat({logits2d});  // [1,V] -> [V]
  return tape.log_softmax_pick(logits, static_cast<std::size_t>(target));
}

}  // namespace

// Fraction of instances whose consistent extreme outscores the inconsistent
// one; pairs lacking a same-instance counterpart are skipped.
double decision_accuracy(const PairScorer& scorer,
                         std::span<const LabeledPair> pairs) {
  std::map<int, std::pair<const LabeledPair*, const LabeledPair*>> by_instance;
  for (const auto& pr : pairs) {
    auto& slot = by_instance[pr.instance_id];
    (pr.label == PairLabel::Consistent ? slot.first : slot.second) = &pr;
  }
  std::size_t hits = 0, total = 0;
  for (const auto& [id, duo] : by_instance) {
    if (!duo.first || !duo.second) continue;
    double s_yes = score(scorer, duo.first->ref_signal, duo.first->cand_signal);
    double s_no =
        score(scorer, duo.second->ref_signal, duo.second->cand_signal);
    if (s_yes > s_no) ++hits;
    ++total;
  }
  return total == 0 ? 0.0 : static_cast<double>(hits) / total;
}

TrainScorerResult train_scorer(std::span<const LabeledPair> pairs,
                               const ScorerConfig& cfg, RngStream stream) {
  if (pairs.empty()) throw DataError("train_scorer: no pairs");
  ScorerConfig effective = cfg;
  if (cfg.fast) effective.alpha = 1.0;
  RngStream init_stream = stream.split(1);
  TrainScorerResult result{init_scorer(init_stream, effective), {}};
  PairScorer& scorer = result.scorer;
  AdamState adam = AdamState::init(scorer.params);
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  RngStream shuffle_stream = stream.split(2);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1],
                order[shuffle_stream.next_u64() % static_cast<std::uint64_t>(i)]);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch)) {
      std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
      Tape tape;
      auto ids = register_params(tape, scorer.params);
      Tape::Id total = tape.constant(Tensor::scalar(0.0));
      for (std::size_t bi = start; bi < end; ++bi) {
        const LabeledPair& pr = pairs[order[bi]];
        auto tokens = pair_target_tokens(pr, cfg.fast);
        Tape::Id feats = tape.constant(
            pair_features(pr.ref_signal, pr.cand_signal, cfg.toy));
        std::size_t n = tokens.size();
        Tape::Id lp0 =
            position_logprob(tape, scorer, ids, feats, 0, -1, tokens[0]);
        Tape::Id item = tape.scale(lp0, -effective.alpha);
        if (n >= 2) {
          Tape::Id rest = tape.constant(Tensor::scalar(0.0));
          for (std::size_t p = 1; p < n; ++p)
            rest = tape.add(rest,
                            position_logprob(tape, scorer, ids, feats,
                                             static_cast<int>(p),
                                             tokens[p - 1], tokens[p]));
          item = tape.add(item, tape.scale(rest, -(1.0 - effective.alpha) /
                                                     static_cast<double>(n - 1)));
        }
        total = tape.add(total, item);
      }
      Tape::Id loss =
          tape.scale(total, 1.0 / static_cast<double>(end - start));
      double loss_val = tape.value(loss).values[0];
      if (!std::isfinite(loss_val))
        throw DataError("train_scorer: diverged (non-finite loss) at epoch " +
                        std::to_string(epoch));
      tape.backward(loss);
      adam_step(scorer.params, collect_grads(tape, ids, scorer.params), adam,
                cfg.lr);
      loss_sum += loss_val;
      ++batches;
    }
    ScorerEpochLog log;
    log.epoch = epoch;
    log.mean_loss = loss_sum / static_cast<double>(batches);
    log.decision_accuracy = decision_accuracy(scorer, pairs);
    result.log.push_back(log);
  }
  return result;
}

}  // namespace paco
