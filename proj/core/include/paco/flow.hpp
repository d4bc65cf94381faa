#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "paco/mlp.hpp"
#include "paco/optim.hpp"
#include "paco/rng.hpp"
#include "paco/tape.hpp"
#include "paco/toyworld.hpp"

namespace paco {

struct Condition {
  PromptSpec prompt;
  int content_index = 0;
};

// Time convention: t=0 is data, t=1 is noise. Sampling integrates from
// t_max down to t_min with a negative step, staying clear of the sigma_t
// singularity at t=1 and the 1/t drift singularity at t=0.
struct FlowConfig {
  int hidden = 32;
  int noise_modes = 16;
  double t_max = 0.96;
  double t_min = 0.04;
  ToyConfig toy;
};

// Per-point coordinate network; the same parameters serve any resolution.
struct FlowModel {
  FlowConfig cfg;
  MlpSpec spec;
  ParamSet params;
};

inline constexpr int kFlowFeatureCount = 28;

FlowModel init_flow_model(RngStream& stream, const FlowConfig& cfg = {});

// [d, kFlowFeatureCount] feature matrix: coordinate Fourier features,
// current value, time embedding, condition embedding (including the
// noise-free conditioning profile), and mean-pooled context of all points.
Tensor flow_features(const FlowConfig& cfg, const Signal& x, double t,
                     const Condition& cond);

Signal velocity(const FlowModel& model, const Signal& x, double t,
                const Condition& cond);

// Noise drawn as 2*modes Gaussian coefficients of a band-limited Fourier
// field and synthesized at resolution d; per-point marginals are exactly
// standard normal and the underlying function is resolution-independent.
Signal band_noise(RngStream& stream, int d, int modes = 16);

// sigma_t = a sqrt(t / (1-t))
double noise_scale(double t, double a);

struct SdeStepResult {
  Signal x_next;
  double logprob = 0;
};

// x_{t+dt} = x_t + [v + (sigma^2/2t)(x_t + (1-t)v)] dt + sigma sqrt(|dt|) eps.
// logprob is the Gaussian log-density of x_next under mean = x_t + drift*dt
// and per-coordinate std sigma*sqrt(|dt|).
SdeStepResult sde_step(const Signal& x, const Signal& v, double t, double dt,
                       double sigma_t, const Tensor& eps,
                       bool want_logprob = true);

struct Trajectory {
  std::vector<double> times;    // T+1 grid times in (0,1), descending
  std::vector<Signal> latents;  // T+1
  std::vector<int> sde_steps;   // step indices where noise was injected
  std::vector<double> logprobs; // one per sde step, sampling-time policy
  Condition condition;
  double noise_a = 0;
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
};

std::vector<double> trajectory_times(const FlowConfig& cfg, int T);

Trajectory sample_trajectory(const FlowModel& model, const Condition& cond,
                             int d, int T, const std::vector<int>& sde_indices,
                             double a, RngStream stream);

// Per-step log-density of each stored transition under the given (possibly
// updated) parameters; aligned with Trajectory::logprobs.
std::vector<double> logprob_under(const FlowModel& model,
                                  const Trajectory& traj);

// Tape-tracked variant for policy-gradient updates.
std::vector<Tape::Id> logprob_nodes(Tape& tape, const FlowModel& model,
                                    const std::vector<Tape::Id>& param_ids,
                                    const Trajectory& traj);

// One flow-matching regression step: x_t = (1-t) x_data + t x_noise,
// target velocity x_noise - x_data, squared error, one adam step.
double fm_train_step(FlowModel& model, AdamState& state,
                     std::span<const std::pair<Signal, Condition>> batch,
                     double lr, RngStream& stream);

}  // namespace paco
