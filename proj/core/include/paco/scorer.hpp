#pragma once

#include <span>
#include <string>
#include <vector>

#include "paco/dataset.hpp"
#include "paco/optim.hpp"
#include "paco/rng.hpp"
#include "paco/tape.hpp"
#include "paco/toyworld.hpp"

namespace paco {

// Token layout of the generative head: position 0 emits the decision,
// later positions emit rationale symbols, closing with END.
inline constexpr int kTokYes = 0;
inline constexpr int kTokNo = 1;
inline constexpr int kTokEnd = 18;
inline constexpr int kScorerVocab = 19;

int rationale_symbol_to_token(int symbol);

struct ScorerConfig {
  int hidden = 32;
  double alpha = 0.1;
  double lr = 2e-4;
  int epochs = 20;
  int batch = 16;
  // Fast variant: decision-only supervision (alpha = 1, no rationale).
  bool fast = false;
  ToyConfig toy;
};

struct PairScorer {
  ScorerConfig cfg;
  ParamSet params;
};

PairScorer init_scorer(RngStream& stream, const ScorerConfig& cfg = {});

// [1, 4*k_id + 2]: identity band of reference, of candidate, elementwise
// diff, squared diff, squared distance, and its Gaussian kernel.
Tensor pair_features(const Signal& ref, const Signal& cand,
                     const ToyConfig& toy = {});

// Weighted likelihood over per-position target log-probs:
//   L = -[alpha*logp[0] + (1-alpha)*mean(logp[1..])]   (n >= 2)
//   L = -logp[0]                                        (n == 1)
double paco_loss(std::span<const double> target_logp, double alpha);

// Full-sequence target token ids for a labeled pair.
std::vector<int> pair_target_tokens(const LabeledPair& pair, bool fast);

// Logits for one position given the encoded pair and previous token
// (prev_token < 0 at position 0).
std::vector<double> scorer_logits(const PairScorer& scorer,
                                  const Tensor& features, int position,
                                  int prev_token);

// P(first token = YES); deterministic, single forward position.
double score(const PairScorer& scorer, const Signal& ref, const Signal& cand);

// argsort of score descending, ties by candidate index ascending
std::vector<int> rank_candidates(const PairScorer& scorer,
                                 const RankingInstance& instance);

// Per-instance pairwise decision: the annotated-consistent extreme must
// outscore the annotated-inconsistent one.
double decision_accuracy(const PairScorer& scorer,
                         std::span<const LabeledPair> pairs);

struct ScorerEpochLog {
  int epoch = 0;
  double mean_loss = 0;
  double decision_accuracy = 0;
};

struct TrainScorerResult {
  PairScorer scorer;
  std::vector<ScorerEpochLog> log;
};

TrainScorerResult train_scorer(std::span<const LabeledPair> pairs,
                               const ScorerConfig& cfg, RngStream stream);

}  // namespace paco
