#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "paco/flow.hpp"
#include "paco/optim.hpp"
#include "paco/rng.hpp"

namespace paco {

struct RewardChannel {
  std::string name;
  double weight = 1.0;
  std::function<double(const Signal&, const Condition&)> fn;
};

struct GrpoConfig {
  int group_size = 16;          // G
  int conditions_per_epoch = 8; // N
  double clip_eps = 1e-4;
  double kl_beta = 0.0;
  double noise_a = 0.7;
  std::vector<int> sde_indices{1};
  int timesteps = 10;  // T
  int d_train = 32;
  int d_eval = 64;
  std::string delta_mode = "fixed";  // "fixed" | "dynamic-mean"
  double delta = 0.2;
  bool taming_enabled = true;
  double lr = 3e-3;
  int epochs = 60;
};

// Per-epoch reward bookkeeping; raw/tamed are channel-major, each of
// length N*G in (condition, member) order.
struct RewardPanel {
  std::vector<std::string> channel_names;
  std::vector<double> weights;
  std::vector<std::vector<double>> raw;
  std::vector<std::vector<double>> tamed;
  std::vector<double> cv;          // h^k
  std::vector<bool> tamed_flags;
  std::vector<double> cv_shift;    // zero-mean guard shift applied before CV
  std::vector<double> aggregated;  // r-hat, length N*G
  std::vector<double> advantages;  // length N*G
  int n_conditions = 0;
  int group_size = 0;
  double delta_used = 0;
};

// population std / mean; throws on zero mean, pointing at the shift guard
double coefficient_of_variation(std::span<const double> rewards);

// Shift-guarded CV: values whose mean falls below 0.5 are affinely shifted
// to mean 0.5 first; returns {h, shift}.
std::pair<double, double> guarded_cv(std::span<const double> rewards);

// log(1+R) when h > delta, identity otherwise; bit-identical passthrough.
std::vector<double> log_tame(std::span<const double> rewards, double h,
                             double delta);

std::vector<double> aggregate(const std::vector<std::vector<double>>& tamed,
                              std::span<const double> weights);

// Group-relative standardization with population std; groups with std
// below 1e-8 get all-zero advantages.
std::vector<double> group_advantages(std::span<const double> rhat,
                                     int n_conditions, int group_size);

RewardPanel build_panel(std::vector<std::vector<double>> raw,
                        std::span<const RewardChannel> channels,
                        int n_conditions, int group_size,
                        const GrpoConfig& cfg);

// mean over elements of min(r*A, clip(r, 1-eps, 1+eps)*A), r = exp(new-old)
double clipped_objective(std::span<const double> new_logp,
                         std::span<const double> old_logp,
                         std::span<const double> advantages, double eps);

// mean of exp(ref-new) - (ref-new) - 1; nonnegative
double kl_penalty(std::span<const double> new_logp,
                  std::span<const double> ref_logp);

struct EpochReport {
  int epoch = 0;
  std::vector<std::string> channel_names;
  std::vector<double> channel_mean;
  std::vector<double> channel_std;
  std::vector<double> cv;
  std::vector<bool> tamed_flags;
  double rhat_mean = 0;
  double jclip = 0;
  double kl = 0;
  double dominance = 0;
  long long points_processed = 0;
  double seconds = 0;
};

// Improvement-since-start ratio of the first designated channel over the
// second, denominator guarded at 1e-3. Requires exactly two channels.
double dominance_ratio(const EpochReport& now, const EpochReport& start);

// One epoch: sample N groups of G trajectories at d_train, evaluate all
// channels, CV -> log-tame -> aggregate -> advantages, one clipped-surrogate
// optimizer step. ref_params back the KL monitor.
EpochReport grpo_epoch(FlowModel& policy, AdamState& adam,
                       std::span<const Condition> conditions,
                       std::span<const RewardChannel> channels,
                       const GrpoConfig& cfg, const ParamSet& ref_params,
                       RngStream stream, int epoch_index);

}  // namespace paco
