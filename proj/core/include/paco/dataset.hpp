#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "paco/rng.hpp"
#include "paco/toyworld.hpp"

namespace paco {

struct SignalRef {
  int prompt_id = -1;
  int grid_id = -1;  // global grid index
  int cell = -1;

  bool operator==(const SignalRef&) const = default;
};

// One rendered m x n grid; all cells share the grid's (jittered) identity.
struct Grid {
  int prompt_id = -1;
  int grid_id = -1;
  std::uint64_t seed = 0;
  int rows = 0, cols = 0;
  PromptSpec prompt;  // identity already jittered for this grid
  std::vector<Signal> subfigures;  // rows*cols, cell-major
};

// Reference plus exactly four candidates from one other grid.
struct RankingInstance {
  int id = -1;
  int prompt_id = -1;
  SignalRef ref;
  Signal ref_signal;
  std::vector<SignalRef> cand_refs;  // exactly 4
  std::vector<Signal> cand_signals;
  std::optional<std::vector<int>> annotation;  // best-to-worst permutation
};

enum class PairLabel { Consistent, Inconsistent };
enum class PairSource { RankingDerived, Injected };

struct LabeledPair {
  int instance_id = -1;
  int prompt_id = -1;
  SignalRef ref;
  SignalRef cand;
  Signal ref_signal;
  Signal cand_signal;
  PairLabel label = PairLabel::Consistent;
  std::vector<int> rationale;  // 16-symbol vocabulary, END-terminated
  PairSource source = PairSource::RankingDerived;
};

struct DatasetParams {
  int prompts = 708;
  int grids_per_prompt = 4;
  int rows = 2, cols = 2;
  double noise_scale = 0.01;
  double identity_jitter = 0.1;
  int holdout = 3136;
  int resolution = 64;
  std::string pair_policy = "extremes";
};

// Rationale vocabulary: symbol 0 = negligible difference, symbols 1..6
// encode (magnitude bin 1..3, sign), symbol 7 = END; 8..15 reserved.
inline constexpr int kRationaleVocab = 16;
inline constexpr int kRationaleEnd = 7;
// Bin edges on |identity difference|: 0.05, 0.2, 0.5.
int rationale_bin_token(double diff);

std::vector<Grid> build_grids(std::span<const PromptSpec> prompts,
                              const DatasetParams& params, RngStream& stream,
                              const ToyConfig& cfg = {});

// For each subfigure as reference and each other grid of the same prompt,
// one instance over that grid's cells. Requires rows*cols == 4.
std::vector<RankingInstance> subfigure_pairing(std::span<const Grid> grids);

void oracle_annotate(RankingInstance& instance, const ToyConfig& cfg = {});

std::vector<LabeledPair> ranking_to_pairs(const RankingInstance& instance,
                                          const std::string& policy,
                                          const ToyConfig& cfg = {});

std::vector<int> synth_rationale(const Signal& ref, const Signal& cand,
                                 const ToyConfig& cfg = {});

struct SplitResult {
  std::vector<int> train_ids;
  std::vector<int> benchmark_ids;
};

SplitResult split_benchmark(std::span<const RankingInstance> instances,
                            int holdout_count, RngStream& stream);

// --- JSONL persistence (schemas documented in the README) ---

void write_prompts_jsonl(const std::string& path,
                         std::span<const PromptSpec> prompts);
std::vector<PromptSpec> read_prompts_jsonl(const std::string& path);

void write_grids_jsonl(const std::string& path, std::span<const Grid> grids);
std::vector<Grid> read_grids_jsonl(const std::string& path);

void write_instances_jsonl(const std::string& path,
                           std::span<const RankingInstance> instances);
// Signals are resolved from grids via provenance refs.
std::vector<RankingInstance> read_instances_jsonl(
    const std::string& path, std::span<const Grid> grids);

void write_pairs_jsonl(const std::string& path,
                       std::span<const LabeledPair> pairs);
std::vector<LabeledPair> read_pairs_jsonl(const std::string& path,
                                          std::span<const Grid> grids);

void write_split_json(const std::string& path, const SplitResult& split);
SplitResult read_split_json(const std::string& path);

const Signal& resolve_ref(std::span<const Grid> grids, const SignalRef& ref);

}  // namespace paco
