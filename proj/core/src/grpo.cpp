#include "paco/grpo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "paco/mlp.hpp"
#include "paco/tape.hpp"

namespace paco {

namespace {

std::pair<double, double> mean_std(std::span<const double> xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= static_cast<double>(xs.size());  // population
  return {mean, std::sqrt(var)};
}

}  // namespace

double coefficient_of_variation(std::span<const double> rewards) {
  if (rewards.empty()) throw DataError("coefficient_of_variation: empty channel");
  auto [mean, sd] = mean_std(rewards);
  if (mean == 0.0)
    throw DataError(
        "coefficient_of_variation: zero mean; apply the shift guard "
        "(guarded_cv) first");
  return sd / mean;
}

std::pair<double, double> guarded_cv(std::span<const double> rewards) {
  if (rewards.empty()) throw DataError("guarded_cv: empty channel");
  auto [mean, sd] = mean_std(rewards);
  double shift = 0.0;
  if (mean < 0.5) {
    shift = 0.5 - mean;
    mean = 0.5;
  }
  return {sd / mean, shift};
}

std::vector<double> log_tame(std::span<const double> rewards, double h,
                             double delta) {
  std::vector<double> out(rewards.begin(), rewards.end());
  if (h <= delta) return out;
  for (auto& r : out) {
    if (r <= -1.0)
      throw DataError("log_tame: reward " + std::to_string(r) +
                      " outside log(1+R) domain");
    r = std::log1p(r);
  }
  return out;
}

std::vector<double> aggregate(const std::vector<std::vector<double>>& tamed,
                              std::span<const double> weights) {
  if (tamed.size() != weights.size())
    throw DataError("aggregate: weight count != channel count");
  std::vector<double> rhat(tamed.empty() ? 0 : tamed[0].size(), 0.0);
  for (std::size_t k = 0; k < tamed.size(); ++k) {
    if (tamed[k].size() != rhat.size())
      throw DataError("aggregate: ragged channel sizes");
    for (std::size_t i = 0; i < rhat.size(); ++i)
      rhat[i] += weights[k] * tamed[k][i];
  }
  return rhat;
}

std::vector<double> group_advantages(std::span<const double> rhat,
                                     int n_conditions, int group_size) {
  if (group_size < 2) throw DataError("group_advantages: need G >= 2");
  if (static_cast<int>(rhat.size()) != n_conditions * group_size)
    throw DataError("group_advantages: size mismatch");
  std::vector<double> adv(rhat.size(), 0.0);
  for (int i = 0; i < n_conditions; ++i) {
    auto group = rhat.subspan(static_cast<std::size_t>(i) * group_size,
                              static_cast<std::size_t>(group_size));
    auto [mean, sd] = mean_std(group);
    if (sd < 1e-8) continue;  // degenerate group: all-zero advantages
    for (int j = 0; j < group_size; ++j)
      adv[static_cast<std::size_t>(i) * group_size + j] =
          (group[j] - mean) / sd;
  }
  return adv;
}

RewardPanel build_panel(std::vector<std::vector<double>> raw,
                        std::span<const RewardChannel> channels,
                        int n_conditions, int group_size,
                        const GrpoConfig& cfg) {
  RewardPanel panel;
  panel.n_conditions = n_conditions;
  panel.group_size = group_size;
  panel.raw = std::move(raw);
  for (const auto& ch : channels) {
    panel.channel_names.push_back(ch.name);
    panel.weights.push_back(ch.weight);
  }
  for (const auto& channel : panel.raw) {
    auto [h, shift] = guarded_cv(channel);
    panel.cv.push_back(h);
    panel.cv_shift.push_back(shift);
  }
  double delta = cfg.delta;
  if (cfg.delta_mode == "dynamic-mean") {
    delta = 0.0;
    for (double h : panel.cv) delta += h;
    delta /= static_cast<double>(panel.cv.size());
  } else if (cfg.delta_mode != "fixed") {
    throw DataError("build_panel: unknown delta mode '" + cfg.delta_mode + "'");
  }
  panel.delta_used = delta;
  for (std::size_t k = 0; k < panel.raw.size(); ++k) {
    bool tame = cfg.taming_enabled && panel.cv[k] > delta;
    panel.tamed_flags.push_back(tame);
    panel.tamed.push_back(cfg.taming_enabled
                              ? log_tame(panel.raw[k], panel.cv[k], delta)
                              : panel.raw[k]);
  }
  panel.aggregated = aggregate(panel.tamed, panel.weights);
  panel.advantages = group_advantages(panel.aggregated, n_conditions, group_size);
  return panel;
}

double clipped_objective(std::span<const double> new_logp,
                         std::span<const double> old_logp,
                         std::span<const double> advantages, double eps) {
  if (new_logp.size() != old_logp.size() ||
      new_logp.size() != advantages.size())
    throw DataError("clipped_objective: size mismatch");
  if (new_logp.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < new_logp.size(); ++i) {
    double r = std::exp(new_logp[i] - old_logp[i]);
    if (!std::isfinite(r))
      throw DataError("clipped_objective: non-finite ratio at element " +
                      std::to_string(i));
    double rc = std::clamp(r, 1.0 - eps, 1.0 + eps);
    total += std::min(r * advantages[i], rc * advantages[i]);
  }
  return total / static_cast<double>(new_logp.size());
}

double kl_penalty(std::span<const double> new_logp,
                  std::span<const double> ref_logp) {
  if (new_logp.size() != ref_logp.size())
    throw DataError("kl_penalty: size mismatch");
  if (new_logp.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < new_logp.size(); ++i) {
    double d = ref_logp[i] - new_logp[i];
    total += std::exp(d) - d - 1.0;
  }
  return total / static_cast<double>(new_logp.size());
}

double dominance_ratio(const EpochReport& now, const EpochReport& start) {
  if (now.channel_mean.size() != 2 || start.channel_mean.size() != 2)
    throw DataError("dominance_ratio: exactly 2 designated channels required");
  constexpr double kGuard = 1e-3;
  double num = now.channel_mean[0] - start.channel_mean[0];
  double den = std::max(now.channel_mean[1] - start.channel_mean[1], kGuard);
  return num / den;
}

EpochReport grpo_epoch(FlowModel& policy, AdamState& adam,
                       std::span<const Condition> conditions,
                       std::span<const RewardChannel> channels,
                       const GrpoConfig& cfg, const ParamSet& ref_params,
                       RngStream stream, int epoch_index) {
  auto t_start = std::chrono::steady_clock::now();
  int N = static_cast<int>(conditions.size());
  int G = cfg.group_size;
  if (N == 0 || channels.empty())
    throw DataError("grpo_epoch: need conditions and channels");

  // sample groups; member order is fixed by stream id, so any fan-out
  // merges deterministically
  std::vector<Trajectory> trajs;
  trajs.reserve(static_cast<std::size_t>(N) * G);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < G; ++j)
      trajs.push_back(sample_trajectory(
          policy, conditions[i], cfg.d_train, cfg.timesteps, cfg.sde_indices,
          cfg.noise_a,
          stream.split(static_cast<std::uint64_t>(i) * 10000 + j)));

  // reward panel
  std::vector<std::vector<double>> raw(channels.size());
  for (std::size_t k = 0; k < channels.size(); ++k) {
    raw[k].reserve(trajs.size());
    for (std::size_t s = 0; s < trajs.size(); ++s) {
      double r;
      try {
        r = channels[k].fn(trajs[s].latents.back(), trajs[s].condition);
      } catch (const std::exception& e) {
        throw DataError("grpo_epoch: reward channel '" + channels[k].name +
                        "' failed: " + e.what());
      }
      raw[k].push_back(r);
    }
  }
  RewardPanel panel = build_panel(std::move(raw), channels, N, G, cfg);

  // policy objective on tape; clipped branches outside the trust interval
  // contribute constants (zero gradient)
  Tape tape;
  auto param_ids = register_params(tape, policy.params);
  Tape::Id obj = tape.constant(Tensor::scalar(0.0));
  double const_part = 0.0;
  std::size_t n_terms = 0;
  std::vector<double> new_flat, old_flat, ref_flat;
  FlowModel ref_model{policy.cfg, policy.spec, ref_params};
  std::vector<Tape::Id> kl_terms;
  for (std::size_t s = 0; s < trajs.size(); ++s)
    n_terms += trajs[s].sde_steps.size();
  for (std::size_t s = 0; s < trajs.size(); ++s) {
    const Trajectory& traj = trajs[s];
    if (traj.sde_steps.empty()) continue;
    double advantage = panel.advantages[s];
    auto lp_nodes = logprob_nodes(tape, policy, param_ids, traj);
    auto ref_lp = logprob_under(ref_model, traj);
    for (std::size_t q = 0; q < lp_nodes.size(); ++q) {
      double new_lp = tape.value(lp_nodes[q]).values[0];
      double old_lp = traj.logprobs[q];
      new_flat.push_back(new_lp);
      old_flat.push_back(old_lp);
      ref_flat.push_back(ref_lp[q]);
      double r = std::exp(new_lp - old_lp);
      if (!std::isfinite(r))
        throw DataError("grpo_epoch: non-finite ratio at trajectory " +
                        std::to_string(s) + " step " + std::to_string(q));
      double rc = std::clamp(r, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
      bool clipped_selected = rc * advantage < r * advantage;
      bool saturated = r < 1.0 - cfg.clip_eps || r > 1.0 + cfg.clip_eps;
      if (clipped_selected && saturated) {
        const_part += rc * advantage / static_cast<double>(n_terms);
      } else {
        Tape::Id ratio = tape.exp_(tape.add_scalar(lp_nodes[q], -old_lp));
        obj = tape.add(
            obj, tape.scale(ratio, advantage / static_cast<double>(n_terms)));
      }
      if (cfg.kl_beta != 0.0) {
        // exp(ref-new) - (ref-new) - 1 on tape
        Tape::Id diff = tape.add_scalar(tape.scale(lp_nodes[q], -1.0), ref_lp[q]);
        Tape::Id term =
            tape.add_scalar(tape.add(tape.exp_(diff), tape.scale(diff, -1.0)),
                            -1.0);
        kl_terms.push_back(term);
      }
    }
  }

  double kl_value = kl_penalty(new_flat, ref_flat);
  double jclip_value =
      clipped_objective(new_flat, old_flat,
                        [&] {
                          std::vector<double> adv_flat;
                          for (std::size_t s = 0; s < trajs.size(); ++s)
                            for (std::size_t q = 0;
                                 q < trajs[s].sde_steps.size(); ++q)
                              adv_flat.push_back(panel.advantages[s]);
                          return adv_flat;
                        }(),
                        cfg.clip_eps);

  if (n_terms > 0) {
    Tape::Id loss = tape.scale(tape.add_scalar(obj, const_part), -1.0);
    if (cfg.kl_beta != 0.0 && !kl_terms.empty()) {
      Tape::Id kl_sum = tape.constant(Tensor::scalar(0.0));
      for (Tape::Id t : kl_terms) kl_sum = tape.add(kl_sum, t);
      loss = tape.add(loss,
                      tape.scale(kl_sum, cfg.kl_beta /
                                             static_cast<double>(kl_terms.size())));
    }
    tape.backward(loss);
    adam_step(policy.params, collect_grads(tape, param_ids, policy.params),
              adam, cfg.lr);
  }

  EpochReport report;
  report.epoch = epoch_index;
  report.channel_names = panel.channel_names;
  for (const auto& channel : panel.raw) {
    auto [mean, sd] = mean_std(channel);
    report.channel_mean.push_back(mean);
    report.channel_std.push_back(sd);
  }
  report.cv = panel.cv;
  report.tamed_flags = panel.tamed_flags;
  double rhat_mean = 0.0;
  for (double r : panel.aggregated) rhat_mean += r;
  report.rhat_mean = rhat_mean / static_cast<double>(panel.aggregated.size());
  report.jclip = jclip_value;
  report.kl = kl_value;
  report.points_processed = static_cast<long long>(N) * G * cfg.timesteps *
                            cfg.d_train;
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return report;
}

}  // namespace paco
