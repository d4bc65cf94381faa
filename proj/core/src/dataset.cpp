#include "paco/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace paco {

using nlohmann::json;

int rationale_bin_token(double diff) {
  double mag = std::fabs(diff);
  int bin;
  if (mag < 0.05)
    bin = 0;
  else if (mag < 0.2)
    bin = 1;
  else if (mag < 0.5)
    bin = 2;
  else
    bin = 3;
  if (bin == 0) return 0;
  return 2 * (bin - 1) + (diff > 0 ? 1 : 2);
}

std::vector<Grid> build_grids(std::span<const PromptSpec> prompts,
                              const DatasetParams& params, RngStream& stream,
                              const ToyConfig& cfg) {
  if (params.grids_per_prompt < 2)
    throw DataError("build_grids: need at least 2 grids per prompt");
  if (params.rows * params.cols < 2)
    throw DataError("build_grids: need at least 2 subfigures per grid");
  std::vector<Grid> grids;
  int cells = params.rows * params.cols;
  for (int pid = 0; pid < static_cast<int>(prompts.size()); ++pid) {
    const PromptSpec& base = prompts[pid];
    if (static_cast<int>(base.contents.size()) < cells)
      throw DataError("build_grids: prompt " + std::to_string(pid) +
                      " has fewer contents than grid cells");
    for (int g = 0; g < params.grids_per_prompt; ++g) {
      RngStream grid_stream = stream.split(
          (static_cast<std::uint64_t>(pid) << 20) | static_cast<std::uint64_t>(g));
      Grid grid;
      grid.prompt_id = pid;
      grid.grid_id = static_cast<int>(grids.size());
      grid.seed = grid_stream.stream_id;
      grid.rows = params.rows;
      grid.cols = params.cols;
      grid.prompt = base;
      for (auto& v : grid.prompt.identity) {
        v += params.identity_jitter * grid_stream.gaussian();
        v = std::clamp(v, -1.0, 1.0);
      }
      for (int c = 0; c < cells; ++c) {
        RngStream cell_stream = grid_stream.split(100 + c);
        // render-time jitter: each subfigure drifts a little off the grid
        // identity, so cross-grid rankings carry learnable signal
        PromptSpec cell_prompt = grid.prompt;
        for (auto& v : cell_prompt.identity) {
          v += params.identity_jitter * cell_stream.gaussian();
          v = std::clamp(v, -1.0, 1.0);
        }
        grid.subfigures.push_back(render(cell_prompt, c, params.noise_scale,
                                         cell_stream, params.resolution, cfg));
      }
      grids.push_back(std::move(grid));
    }
  }
  return grids;
}

std::vector<RankingInstance> subfigure_pairing(std::span<const Grid> grids) {
  std::vector<RankingInstance> instances;
  // group grid indices by prompt, preserving order
  std::vector<int> prompt_ids;
  for (const auto& g : grids)
    if (prompt_ids.empty() || prompt_ids.back() != g.prompt_id)
      prompt_ids.push_back(g.prompt_id);
  for (int pid : prompt_ids) {
    std::vector<const Grid*> mine;
    for (const auto& g : grids)
      if (g.prompt_id == pid) mine.push_back(&g);
    for (const Grid* rg : mine) {
      int cells = rg->rows * rg->cols;
      for (int rc = 0; rc < cells; ++rc) {
        for (const Grid* og : mine) {
          if (og == rg) continue;
          if (og->rows * og->cols != 4)
            throw DataError("subfigure_pairing: instance arity is fixed at 4, "
                            "grid has " + std::to_string(og->rows * og->cols) +
                            " cells");
          RankingInstance inst;
          inst.id = static_cast<int>(instances.size());
          inst.prompt_id = pid;
          inst.ref = SignalRef{pid, rg->grid_id, rc};
          inst.ref_signal = rg->subfigures[rc];
          for (int c = 0; c < 4; ++c) {
            inst.cand_refs.push_back(SignalRef{pid, og->grid_id, c});
            inst.cand_signals.push_back(og->subfigures[c]);
          }
          instances.push_back(std::move(inst));
        }
      }
    }
  }
  return instances;
}

void oracle_annotate(RankingInstance& instance, const ToyConfig& cfg) {
  std::vector<double> scores;
  for (const auto& cand : instance.cand_signals)
    scores.push_back(true_consistency(instance.ref_signal, cand, cfg));
  std::vector<int> order{0, 1, 2, 3};
  std::stable_sort(order.begin(), order.end(),
                   [&scores](int a, int b) { return scores[a] > scores[b]; });
  instance.annotation = order;
}

std::vector<int> synth_rationale(const Signal& ref, const Signal& cand,
                                 const ToyConfig& cfg) {
  auto a = extract_identity(ref, cfg);
  auto b = extract_identity(cand, cfg);
  std::vector<int> tokens;
  for (std::size_t i = 0; i < a.size(); ++i)
    tokens.push_back(rationale_bin_token(a[i] - b[i]));
  tokens.push_back(kRationaleEnd);
  return tokens;
}

std::vector<LabeledPair> ranking_to_pairs(const RankingInstance& instance,
                                          const std::string& policy,
                                          const ToyConfig& cfg) {
  if (!instance.annotation)
    throw DataError("ranking_to_pairs: instance not annotated");
  if (policy != "extremes" && policy != "all")
    throw DataError("ranking_to_pairs: unknown policy '" + policy + "'");
  const auto& ranks = *instance.annotation;
  auto make = [&](int rank_pos, PairLabel label) {
    int c = ranks[rank_pos];
    LabeledPair pair;
    pair.instance_id = instance.id;
    pair.prompt_id = instance.prompt_id;
    pair.ref = instance.ref;
    pair.cand = instance.cand_refs[c];
    pair.ref_signal = instance.ref_signal;
    pair.cand_signal = instance.cand_signals[c];
    pair.label = label;
    pair.rationale = synth_rationale(pair.ref_signal, pair.cand_signal, cfg);
    pair.source = PairSource::RankingDerived;
    return pair;
  };
  std::vector<LabeledPair> pairs;
  pairs.push_back(make(0, PairLabel::Consistent));
  pairs.push_back(make(3, PairLabel::Inconsistent));
  if (policy == "all") {
    pairs.push_back(make(1, PairLabel::Consistent));
    pairs.push_back(make(2, PairLabel::Inconsistent));
  }
  return pairs;
}

SplitResult split_benchmark(std::span<const RankingInstance> instances,
                            int holdout_count, RngStream& stream) {
  if (holdout_count >= static_cast<int>(instances.size()))
    throw DataError("split_benchmark: holdout >= instance count");
  std::vector<int> ids;
  for (const auto& inst : instances) ids.push_back(inst.id);
  // Fisher-Yates with the counter-based stream
  for (std::size_t i = ids.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(stream.next_u64() % i);
    std::swap(ids[i - 1], ids[j]);
  }
  SplitResult split;
  split.benchmark_ids.assign(ids.begin(), ids.begin() + holdout_count);
  split.train_ids.assign(ids.begin() + holdout_count, ids.end());
  std::sort(split.benchmark_ids.begin(), split.benchmark_ids.end());
  std::sort(split.train_ids.begin(), split.train_ids.end());
  return split;
}

// --- JSONL persistence ---

namespace {

json ref_to_json(const SignalRef& r) {
  return json{{"prompt", r.prompt_id}, {"grid", r.grid_id}, {"cell", r.cell}};
}

SignalRef ref_from_json(const json& j) {
  return SignalRef{j.at("prompt").get<int>(), j.at("grid").get<int>(),
                   j.at("cell").get<int>()};
}

json parse_line(const std::string& line, const std::string& path, int lineno) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded())
    throw DataError(path + ": malformed JSONL record at line " +
                    std::to_string(lineno));
  return j;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open " + path + " for writing");
  return os;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path);
  return is;
}

}  // namespace

const Signal& resolve_ref(std::span<const Grid> grids, const SignalRef& ref) {
  for (const auto& g : grids)
    if (g.grid_id == ref.grid_id) {
      if (g.prompt_id != ref.prompt_id ||
          ref.cell >= static_cast<int>(g.subfigures.size()))
        throw DataError("resolve_ref: provenance mismatch for grid " +
                        std::to_string(ref.grid_id));
      return g.subfigures[ref.cell];
    }
  throw DataError("resolve_ref: grid " + std::to_string(ref.grid_id) +
                  " not found");
}

void write_prompts_jsonl(const std::string& path,
                         std::span<const PromptSpec> prompts) {
  auto os = open_out(path);
  for (const auto& p : prompts) {
    json j{{"identity", p.identity},
           {"style", p.style},
           {"contents", p.contents},
           {"category_label", p.category_label}};
    os << j.dump() << "\n";
  }
}

std::vector<PromptSpec> read_prompts_jsonl(const std::string& path) {
  auto is = open_in(path);
  std::vector<PromptSpec> prompts;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = parse_line(line, path, lineno);
    PromptSpec p;
    p.identity = j.at("identity").get<std::vector<double>>();
    p.style = j.at("style").get<std::vector<double>>();
    p.contents = j.at("contents").get<std::vector<std::vector<double>>>();
    p.category_label = j.value("category_label", "");
    prompts.push_back(std::move(p));
  }
  return prompts;
}

void write_grids_jsonl(const std::string& path, std::span<const Grid> grids) {
  auto os = open_out(path);
  for (const auto& g : grids) {
    json subs = json::array();
    for (const auto& s : g.subfigures) subs.push_back(s.samples);
    json j{{"prompt_id", g.prompt_id},
           {"grid_id", g.grid_id},
           {"seed", g.seed},
           {"rows", g.rows},
           {"cols", g.cols},
           {"resolution", g.subfigures.empty() ? 0 : g.subfigures[0].resolution},
           {"identity", g.prompt.identity},
           {"style", g.prompt.style},
           {"contents", g.prompt.contents},
           {"category_label", g.prompt.category_label},
           {"subfigures", subs}};
    os << j.dump() << "\n";
  }
}

std::vector<Grid> read_grids_jsonl(const std::string& path) {
  auto is = open_in(path);
  std::vector<Grid> grids;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = parse_line(line, path, lineno);
    Grid g;
    g.prompt_id = j.at("prompt_id").get<int>();
    g.grid_id = j.at("grid_id").get<int>();
    g.seed = j.at("seed").get<std::uint64_t>();
    g.rows = j.at("rows").get<int>();
    g.cols = j.at("cols").get<int>();
    g.prompt.identity = j.at("identity").get<std::vector<double>>();
    g.prompt.style = j.at("style").get<std::vector<double>>();
    g.prompt.contents = j.at("contents").get<std::vector<std::vector<double>>>();
    g.prompt.category_label = j.value("category_label", "");
    int d = j.at("resolution").get<int>();
    for (const auto& s : j.at("subfigures"))
      g.subfigures.emplace_back(d, s.get<std::vector<double>>());
    grids.push_back(std::move(g));
  }
  return grids;
}

void write_instances_jsonl(const std::string& path,
                           std::span<const RankingInstance> instances) {
  auto os = open_out(path);
  for (const auto& inst : instances) {
    json cands = json::array();
    for (const auto& c : inst.cand_refs) cands.push_back(ref_to_json(c));
    json j{{"id", inst.id},
           {"prompt_id", inst.prompt_id},
           {"ref", ref_to_json(inst.ref)},
           {"candidates", cands}};
    if (inst.annotation)
      j["annotation"] = *inst.annotation;
    else
      j["annotation"] = nullptr;
    os << j.dump() << "\n";
  }
}

std::vector<RankingInstance> read_instances_jsonl(const std::string& path,
                                                  std::span<const Grid> grids) {
  auto is = open_in(path);
  std::vector<RankingInstance> instances;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = parse_line(line, path, lineno);
    RankingInstance inst;
    inst.id = j.at("id").get<int>();
    inst.prompt_id = j.at("prompt_id").get<int>();
    inst.ref = ref_from_json(j.at("ref"));
    inst.ref_signal = resolve_ref(grids, inst.ref);
    for (const auto& c : j.at("candidates")) {
      inst.cand_refs.push_back(ref_from_json(c));
      inst.cand_signals.push_back(resolve_ref(grids, inst.cand_refs.back()));
    }
    if (!j.at("annotation").is_null())
      inst.annotation = j.at("annotation").get<std::vector<int>>();
    instances.push_back(std::move(inst));
  }
  return instances;
}

void write_pairs_jsonl(const std::string& path,
                       std::span<const LabeledPair> pairs) {
  auto os = open_out(path);
  for (const auto& p : pairs) {
    json j{{"instance_id", p.instance_id},
           {"prompt_id", p.prompt_id},
           {"ref", ref_to_json(p.ref)},
           {"cand", ref_to_json(p.cand)},
           {"label", p.label == PairLabel::Consistent ? "consistent"
                                                      : "inconsistent"},
           {"rationale", p.rationale},
           {"source", p.source == PairSource::RankingDerived ? "ranking-derived"
                                                             : "injected"}};
    os << j.dump() << "\n";
  }
}

std::vector<LabeledPair> read_pairs_jsonl(const std::string& path,
                                          std::span<const Grid> grids) {
  auto is = open_in(path);
  std::vector<LabeledPair> pairs;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = parse_line(line, path, lineno);
    LabeledPair p;
    try {
      p.instance_id = j.at("instance_id").get<int>();
      p.prompt_id = j.at("prompt_id").get<int>();
      p.ref = ref_from_json(j.at("ref"));
      p.cand = ref_from_json(j.at("cand"));
      std::string label = j.at("label").get<std::string>();
      if (label != "consistent" && label != "inconsistent")
        throw DataError("bad label");
      p.label = label == "consistent" ? PairLabel::Consistent
                                      : PairLabel::Inconsistent;
      p.rationale = j.at("rationale").get<std::vector<int>>();
      std::string source = j.value("source", "ranking-derived");
      p.source = source == "injected" ? PairSource::Injected
                                      : PairSource::RankingDerived;
    } catch (const json::exception&) {
      throw DataError(path + ": malformed JSONL record at line " +
                      std::to_string(lineno));
    }
    p.ref_signal = resolve_ref(grids, p.ref);
    p.cand_signal = resolve_ref(grids, p.cand);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

void write_split_json(const std::string& path, const SplitResult& split) {
  auto os = open_out(path);
  json j{{"train_ids", split.train_ids}, {"benchmark_ids", split.benchmark_ids}};
  os << j.dump() << "\n";
}

SplitResult read_split_json(const std::string& path) {
  auto is = open_in(path);
  json j;
  is >> j;
  SplitResult split;
  split.train_ids = j.at("train_ids").get<std::vector<int>>();
  split.benchmark_ids = j.at("benchmark_ids").get<std::vector<int>>();
  return split;
}

}  // namespace paco
