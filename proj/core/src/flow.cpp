#include "paco/flow.hpp"

#include <algorithm>
#include <cmath>

namespace paco {

namespace {

// Noise-free conditioning profile at coordinate u: the cosine series the
// condition describes, evaluable at any resolution.
double condition_value(const ToyConfig& toy, const PromptSpec& prompt,
                       int content_index, double u) {
  const auto& ct = prompt.contents[content_index];
  double s = 0.0;
  for (int p = 0; p < toy.k_id; ++p)
    s += prompt.identity[p] * std::cos(2.0 * M_PI * (p + 1) * u);
  for (int q = 0; q < toy.k_ct; ++q)
    s += ct[q] * std::cos(2.0 * M_PI * (toy.k_id + q + 1) * u);
  double amp = 1.0 + 0.25 * (prompt.style.empty() ? 0.0 : prompt.style[0]);
  double phase = M_PI * (prompt.style.size() > 1 ? prompt.style[1] : 0.0);
  s += 0.25 * amp * std::cos(2.0 * M_PI * toy.style_mode() * u + phase);
  return s;
}

constexpr double kTimeFloor = 0.02;

}  // namespace

FlowModel init_flow_model(RngStream& stream, const FlowConfig& cfg) {
  FlowModel model;
  model.cfg = cfg;
  model.spec = MlpSpec{{kFlowFeatureCount, static_cast<std::size_t>(cfg.hidden),
                        static_cast<std::size_t>(cfg.hidden), 1}};
  model.params = mlp_init(model.spec, stream);
  return model;
}

Tensor flow_features(const FlowConfig& cfg, const Signal& x, double t,
                     const Condition& cond) {
  int d = x.resolution;
  if (d < 8) throw DataError("flow_features: resolution below 8");
  if (cond.content_index < 0 ||
      cond.content_index >= static_cast<int>(cond.prompt.contents.size()))
    throw DataError("flow_features: content index out of range");
  double mean_x = 0, mean_x2 = 0;
  for (double v : x.samples) {
    mean_x += v;
    mean_x2 += v * v;
  }
  mean_x /= d;
  mean_x2 /= d;
  double tt = std::max(t, kTimeFloor);
  Tensor feats = Tensor::zeros({static_cast<std::size_t>(d), kFlowFeatureCount});
  for (int j = 0; j < d; ++j) {
    double u = static_cast<double>(j) / d;
    double* f = &feats.values[static_cast<std::size_t>(j) * kFlowFeatureCount];
    int k = 0;
    for (int m = 1; m <= 8; ++m) f[k++] = std::cos(2.0 * M_PI * m * u);
    f[k++] = std::cos(2.0 * M_PI * cfg.toy.style_mode() * u);
    f[k++] = std::sin(2.0 * M_PI * cfg.toy.style_mode() * u);
    double xv = x.samples[j];
    f[k++] = xv;
    f[k++] = t;
    f[k++] = 1.0 - t;
    for (int p = 0; p < cfg.toy.k_id; ++p) f[k++] = cond.prompt.identity[p];
    for (int p = 0; p < cfg.toy.k_st; ++p)
      f[k++] = p < static_cast<int>(cond.prompt.style.size())
                   ? cond.prompt.style[p]
                   : 0.0;
    const auto& ct = cond.prompt.contents[cond.content_index];
    for (int p = 0; p < cfg.toy.k_ct; ++p) f[k++] = ct[p];
    double rv = condition_value(cfg.toy, cond.prompt, cond.content_index, u);
    f[k++] = rv;
    f[k++] = xv / tt;
    f[k++] = rv / tt;
    f[k++] = mean_x;
    f[k++] = mean_x2;
    if (k != kFlowFeatureCount)
      throw ShapeError("flow_features: feature count drift");
  }
  return feats;
}

Signal velocity(const FlowModel& model, const Signal& x, double t,
                const Condition& cond) {
  Tensor out = mlp_forward_plain(model.spec, model.params,
                                 flow_features(model.cfg, x, t, cond));
  return Signal(x.resolution, std::move(out.values));
}

Signal band_noise(RngStream& stream, int d, int modes) {
  std::vector<double> a(modes), b(modes);
  for (int m = 0; m < modes; ++m) {
    a[m] = stream.gaussian();
    b[m] = stream.gaussian();
  }
  double norm = 1.0 / std::sqrt(static_cast<double>(modes));
  Signal out = Signal::zeros(d);
  for (int j = 0; j < d; ++j) {
    double u = static_cast<double>(j) / d;
    double s = 0.0;
    for (int m = 0; m < modes; ++m) {
      double w = 2.0 * M_PI * (m + 1) * u;
      s += a[m] * std::cos(w) + b[m] * std::sin(w);
    }
    out.samples[j] = norm * s;
  }
  return out;
}

double noise_scale(double t, double a) {
  if (t <= 0.0 || t >= 1.0)
    throw DataError("noise_scale: t must lie strictly inside (0,1)");
  return a * std::sqrt(t / (1.0 - t));
}

SdeStepResult sde_step(const Signal& x, const Signal& v, double t, double dt,
                       double sigma_t, const Tensor& eps, bool want_logprob) {
  if (t <= 0.0 || t >= 1.0)
    throw DataError("sde_step: t must lie strictly inside (0,1)");
  if (dt == 0.0) throw DataError("sde_step: dt must be nonzero");
  if (x.resolution != v.resolution ||
      eps.size() != static_cast<std::size_t>(x.resolution))
    throw ShapeError("sde_step: x/v/eps size mismatch");
  int d = x.resolution;
  double std_dev = sigma_t * std::sqrt(std::fabs(dt));
  if (want_logprob && std_dev == 0.0)
    throw DataError("sde_step: degenerate transition density (std = 0)");
  double s2 = sigma_t * sigma_t;
  SdeStepResult res;
  res.x_next = Signal::zeros(d);
  double logprob = 0.0;
  double lognorm = std::log(std_dev * std::sqrt(2.0 * M_PI));
  for (int j = 0; j < d; ++j) {
    double drift =
        v.samples[j] + s2 / (2.0 * t) * (x.samples[j] + (1.0 - t) * v.samples[j]);
    double mean = x.samples[j] + drift * dt;
    double xn = mean + std_dev * eps.values[j];
    res.x_next.samples[j] = xn;
    if (want_logprob) {
      double z = (xn - mean) / std_dev;
      logprob += -0.5 * z * z - lognorm;
    }
  }
  res.logprob = logprob;
  return res;
}

std::vector<double> trajectory_times(const FlowConfig& cfg, int T) {
  if (T < 2) throw DataError("trajectory_times: need T >= 2");
  std::vector<double> times(T + 1);
  for (int k = 0; k <= T; ++k)
    times[k] = cfg.t_max + (cfg.t_min - cfg.t_max) * k / T;
  return times;
}

Trajectory sample_trajectory(const FlowModel& model, const Condition& cond,
                             int d, int T, const std::vector<int>& sde_indices,
                             double a, RngStream stream) {
  for (int idx : sde_indices)
    if (idx < 0 || idx >= T)
      throw DataError("sample_trajectory: sde index " + std::to_string(idx) +
                      " out of range for T=" + std::to_string(T));
  Trajectory traj;
  traj.times = trajectory_times(model.cfg, T);
  traj.condition = cond;
  traj.noise_a = a;
  traj.seed = stream.seed;
  traj.stream_id = stream.stream_id;
  RngStream init_stream = stream.split(0);
  Signal x = band_noise(init_stream, d, model.cfg.noise_modes);
  traj.latents.push_back(x);
  for (int k = 0; k < T; ++k) {
    double t = traj.times[k];
    double dt = traj.times[k + 1] - traj.times[k];
    Signal v = velocity(model, x, t, cond);
    bool stochastic =
        a != 0.0 &&
        std::find(sde_indices.begin(), sde_indices.end(), k) != sde_indices.end();
    if (stochastic) {
      double sigma = noise_scale(t, a);
      RngStream step_stream = stream.split(1000 + static_cast<std::uint64_t>(k));
      Signal eps = band_noise(step_stream, d, model.cfg.noise_modes);
      SdeStepResult res = sde_step(
          x, v, t, dt, sigma, Tensor::vec(std::move(eps.samples)), true);
      x = std::move(res.x_next);
      traj.sde_steps.push_back(k);
      traj.logprobs.push_back(res.logprob);
    } else {
      for (int j = 0; j < d; ++j) x.samples[j] += v.samples[j] * dt;
    }
    traj.latents.push_back(x);
  }
  return traj;
}

namespace {

struct StepCoeffs {
  double A;    // multiplier on x_t in the transition mean
  double B;    // multiplier on v in the transition mean
  double std;  // per-coordinate std
};

StepCoeffs step_coeffs(const Trajectory& traj, int k) {
  double t = traj.times[k];
  double dt = traj.times[k + 1] - traj.times[k];
  double sigma = noise_scale(t, traj.noise_a);
  double s2 = sigma * sigma;
  StepCoeffs c;
  c.A = 1.0 + s2 * dt / (2.0 * t);
  c.B = dt * (1.0 + s2 * (1.0 - t) / (2.0 * t));
  c.std = sigma * std::sqrt(std::fabs(dt));
  if (c.std == 0.0)
    throw DataError("logprob_under: degenerate transition std at step " +
                    std::to_string(k));
  return c;
}

}  // namespace

std::vector<double> logprob_under(const FlowModel& model,
                                  const Trajectory& traj) {
  std::vector<double> out;
  for (int k : traj.sde_steps) {
    double t = traj.times[k];
    double dt = traj.times[k + 1] - t;
    double sigma = noise_scale(t, traj.noise_a);
    double s2 = sigma * sigma;
    double std_dev = sigma * std::sqrt(std::fabs(dt));
    if (std_dev == 0.0)
      throw DataError("logprob_under: degenerate transition std at step " +
                      std::to_string(k));
    const Signal& x = traj.latents[k];
    const Signal& xn = traj.latents[k + 1];
    Signal v = velocity(model, x, t, traj.condition);
    double lp = 0.0;
    double lognorm = std::log(std_dev * std::sqrt(2.0 * M_PI));
    // mean arithmetic kept identical to sde_step so that re-evaluating the
    // sampling-time parameters reproduces the stored logprob bit for bit
    for (int j = 0; j < x.resolution; ++j) {
      double drift = v.samples[j] +
                     s2 / (2.0 * t) * (x.samples[j] + (1.0 - t) * v.samples[j]);
      double mean = x.samples[j] + drift * dt;
      double z = (xn.samples[j] - mean) / std_dev;
      lp += -0.5 * z * z - lognorm;
    }
    out.push_back(lp);
  }
  return out;
}

std::vector<Tape::Id> logprob_nodes(Tape& tape, const FlowModel& model,
                                    const std::vector<Tape::Id>& param_ids,
                                    const Trajectory& traj) {
  std::vector<Tape::Id> out;
  for (int k : traj.sde_steps) {
    StepCoeffs c = step_coeffs(traj, k);
    const Signal& x = traj.latents[k];
    const Signal& xn = traj.latents[k + 1];
    int d = x.resolution;
    Tape::Id feats = tape.constant(
        flow_features(model.cfg, x, traj.times[k], traj.condition));
    Tape::Id v = mlp_forward(tape, model.spec, param_ids, feats);  // [d,1]
    // residual = (A x - x_next) + B v, scaled by 1/std
    Tensor offset = Tensor::zeros({static_cast<std::size_t>(d), 1});
    for (int j = 0; j < d; ++j)
      offset.values[j] = c.A * x.samples[j] - xn.samples[j];
    Tape::Id resid = tape.add(tape.scale(v, c.B), tape.constant(offset));
    Tape::Id z2 = tape.sum(tape.square(tape.scale(resid, 1.0 / c.std)));
    double lognorm = std::log(c.std * std::sqrt(2.0 * M_PI));
    Tape::Id lp = tape.add_scalar(tape.scale(z2, -0.5), -d * lognorm);
    out.push_back(lp);
  }
  return out;
}

double fm_train_step(FlowModel& model, AdamState& state,
                     std::span<const std::pair<Signal, Condition>> batch,
                     double lr, RngStream& stream) {
  if (batch.empty()) throw DataError("fm_train_step: empty batch");
  Tape tape;
  std::vector<Tape::Id> param_ids = register_params(tape, model.params);
  Tape::Id total = tape.constant(Tensor::scalar(0.0));
  for (const auto& [data, cond] : batch) {
    double t = kTimeFloor + (0.98 - kTimeFloor) * stream.uniform();
    Signal noise = band_noise(stream, data.resolution, model.cfg.noise_modes);
    int d = data.resolution;
    Signal x_t = Signal::zeros(d);
    Tensor target = Tensor::zeros({static_cast<std::size_t>(d), 1});
    for (int j = 0; j < d; ++j) {
      x_t.samples[j] = (1.0 - t) * data.samples[j] + t * noise.samples[j];
      target.values[j] = -(noise.samples[j] - data.samples[j]);
    }
    Tape::Id feats = tape.constant(flow_features(model.cfg, x_t, t, cond));
    Tape::Id pred = mlp_forward(tape, model.spec, param_ids, feats);
    Tape::Id err = tape.add(pred, tape.constant(target));  // pred - v_target
    total = tape.add(total, tape.mean(tape.square(err)));
  }
  Tape::Id loss = tape.scale(total, 1.0 / static_cast<double>(batch.size()));
  double loss_val = tape.value(loss).values[0];
  if (!std::isfinite(loss_val))
    throw DataError("fm_train_step: non-finite loss over batch of " +
                    std::to_string(batch.size()));
  tape.backward(loss);
  adam_step(model.params, collect_grads(tape, param_ids, model.params), state,
            lr);
  return loss_val;
}

}  // namespace paco
