#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "paco/dataset.hpp"
#include "paco/flow.hpp"
#include "paco/grpo.hpp"
#include "paco/rankmetrics.hpp"
#include "paco/scorer.hpp"

namespace paco {

// Reward shaping: the raw channel value is raised to `gamma` and multiplied
// by `scale`; the skewed ablation config uses both to inflate one channel's
// magnitude and dispersion.
struct ChannelSpec {
  std::string name;
  double weight = 1.0;
  double gamma = 1.0;
  double scale = 1.0;
};

struct ExperimentConfig {
  int version = 1;
  std::uint64_t seed = 42;
  std::string out_dir = "out";
  ToyConfig toy;
  DatasetParams dataset;
  ScorerConfig scorer;
  GrpoConfig grpo;
  std::vector<ChannelSpec> channels{{"consistency", 1.0, 1.0},
                                    {"alignment", 1.0, 1.0}};
  int eval_prompts = 6;
  int fm_pretrain_steps = 20;
  int fm_pretrain_batch = 8;
  double fm_pretrain_lr = 3e-3;
  bool timing = false;  // wall-clock columns stay zero unless enabled
};

ExperimentConfig config_from_json_file(const std::string& path);
void config_to_json_file(const ExperimentConfig& cfg, const std::string& path);
std::string config_to_json_string(const ExperimentConfig& cfg);
ExperimentConfig config_from_json_string(const std::string& text);

// ---- dataset pipeline ----

struct BuiltDataset {
  std::vector<PromptSpec> prompts;
  std::vector<Grid> grids;
  std::vector<RankingInstance> instances;  // annotated
  SplitResult split;
  std::vector<LabeledPair> train_pairs;
};

BuiltDataset build_dataset(const ExperimentConfig& cfg);
void write_dataset(const BuiltDataset& data, const std::string& dir);
BuiltDataset load_dataset(const std::string& dir);

std::vector<const RankingInstance*> select_instances(
    const BuiltDataset& data, std::span<const int> ids);

// ---- reward-model evaluation ----

using ScoreFn = std::function<double(const Signal&, const Signal&)>;

std::vector<int> rank_by_score(const RankingInstance& instance,
                               const ScoreFn& fn);

MetricRow evaluate_scorer(const std::string& method,
                          std::span<const RankingInstance* const> benchmark,
                          const ScoreFn& fn);

// Built-in baselines: analytic oracle, hash-based random, raw-sample cosine.
ScoreFn oracle_score_fn(const ToyConfig& toy);
ScoreFn random_score_fn(std::uint64_t seed);
ScoreFn cosine_score_fn();

// P(YES) > P(NO) agreement with labels over extremes-derived pairs
double scorer_decision_accuracy(const PairScorer& scorer,
                                std::span<const LabeledPair> pairs);

// ---- policy / RL ----

std::vector<Condition> make_conditions(std::span<const PromptSpec> prompts,
                                       int contents_per_prompt);

FlowModel pretrain_policy(const ExperimentConfig& cfg, RngStream stream);

std::vector<RewardChannel> make_channels(const ExperimentConfig& cfg,
                                         const PairScorer* scorer);

struct EvalResult {
  double set_consistency = 0;
  double alignment = 0;
  double aggregated = 0;
};

// Deterministic ODE sampling at d_eval over a fixed prompt panel.
EvalResult evaluate_policy(const FlowModel& model,
                           std::span<const PromptSpec> prompts,
                           const ExperimentConfig& cfg);

struct GrpoRunResult {
  std::vector<EpochReport> epochs;
  EvalResult pre_eval;
  EvalResult post_eval;
};

GrpoRunResult run_grpo(FlowModel& model, const ExperimentConfig& cfg,
                       const PairScorer* scorer, RngStream stream);

// ---- ablations ----

struct CurvePoint {
  int epoch = 0;
  std::string series;
  double value = 0;
  long long cost_points = 0;
};

struct LogTameAblation {
  std::vector<CurvePoint> curve;  // dominance per epoch, naive vs tamed
  double final_naive = 0;
  double final_tamed = 0;
};

LogTameAblation run_logtame_ablation(const ExperimentConfig& cfg,
                                     std::uint64_t seed);

struct ResolutionRun {
  int d_train = 0;
  bool precondition_failed = false;
  std::string failure;
  std::vector<CurvePoint> curve;  // eval aggregated reward per epoch
  double final_reward = 0;
  long long points_per_epoch = 0;
};

struct ResolutionAblation {
  std::vector<ResolutionRun> runs;
};

ResolutionAblation run_resolution_ablation(const ExperimentConfig& cfg,
                                           std::span<const int> resolutions);

// ---- reports / serialization ----

std::string epoch_csv_header(std::span<const std::string> channel_names);
std::string epoch_csv_row(const EpochReport& report, bool timing);
void write_epoch_csv(const std::string& path,
                     std::span<const EpochReport> epochs, bool timing);

void write_curve_csv(const std::string& path,
                     std::span<const CurvePoint> points);

void dump_trajectory_jsonl(const std::string& path, const FlowModel& model,
                           const Trajectory& traj);

}  // namespace paco
