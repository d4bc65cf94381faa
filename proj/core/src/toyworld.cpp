#include "paco/toyworld.hpp"

#include <cmath>

namespace paco {

PromptSpec random_prompt(RngStream& stream, int n_contents,
                         const ToyConfig& cfg) {
  auto draw = [&stream](int n) {
    std::vector<double> v(n);
    for (auto& x : v) x = 2.0 * stream.uniform() - 1.0;
    return v;
  };
  PromptSpec p;
  p.identity = draw(cfg.k_id);
  p.style = draw(cfg.k_st);
  for (int i = 0; i < n_contents; ++i) p.contents.push_back(draw(cfg.k_ct));
  p.category_label = "synthetic";
  return p;
}

Signal render(const PromptSpec& prompt, int content_index, double noise_scale,
              RngStream& stream, int d, const ToyConfig& cfg) {
  if (content_index < 0 ||
      content_index >= static_cast<int>(prompt.contents.size()))
    throw DataError("render: content index " + std::to_string(content_index) +
                    " out of range");
  if (d < cfg.min_resolution())
    throw DataError("render: resolution " + std::to_string(d) +
                    " cannot resolve mode " + std::to_string(cfg.k_id + cfg.k_ct) +
                    " (need d >= " + std::to_string(cfg.min_resolution()) + ")");
  const auto& ct = prompt.contents[content_index];
  double style_amp = 1.0 + 0.25 * (prompt.style.empty() ? 0.0 : prompt.style[0]);
  double style_phase = M_PI * (prompt.style.size() > 1 ? prompt.style[1] : 0.0);
  Signal out = Signal::zeros(d);
  for (int j = 0; j < d; ++j) {
    double u = static_cast<double>(j) / d;
    double s = 0.0;
    for (int p = 0; p < cfg.k_id; ++p)
      s += prompt.identity[p] * std::cos(2.0 * M_PI * (p + 1) * u);
    for (int q = 0; q < cfg.k_ct; ++q)
      s += ct[q] * std::cos(2.0 * M_PI * (cfg.k_id + q + 1) * u);
    s += 0.25 * style_amp *
         std::cos(2.0 * M_PI * cfg.style_mode() * u + style_phase);
    if (noise_scale != 0.0) s += noise_scale * stream.gaussian();
    out.samples[j] = s;
  }
  return out;
}

namespace {
std::vector<double> band_coeffs(const Signal& x, int first_mode, int count) {
  int d = x.resolution;
  std::vector<double> c(count, 0.0);
  for (int m = 0; m < count; ++m) {
    int mode = first_mode + m;
    double s = 0.0;
    for (int j = 0; j < d; ++j)
      s += x.samples[j] * std::cos(2.0 * M_PI * mode * j / d);
    c[m] = 2.0 * s / d;
  }
  return c;
}

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double diff = a[i] - b[i];
    s += diff * diff;
  }
  return s;
}
}  // namespace

std::vector<double> extract_identity(const Signal& x, const ToyConfig& cfg) {
  if (x.resolution < 4 * cfg.k_id)
    throw DataError("extract_identity: resolution " +
                    std::to_string(x.resolution) + " below 4*k_id");
  return band_coeffs(x, 1, cfg.k_id);
}

std::vector<double> extract_content(const Signal& x, const ToyConfig& cfg) {
  if (x.resolution < cfg.min_resolution())
    throw DataError("extract_content: resolution " +
                    std::to_string(x.resolution) + " below 4*(k_id+k_ct)");
  return band_coeffs(x, cfg.k_id + 1, cfg.k_ct);
}

double true_consistency(const Signal& a, const Signal& b, const ToyConfig& cfg) {
  return std::exp(-sq_dist(extract_identity(a, cfg), extract_identity(b, cfg)) /
                  cfg.tau_c);
}

double alignment_reward(const Signal& x, const PromptSpec& prompt,
                        int content_index, const ToyConfig& cfg) {
  if (content_index < 0 ||
      content_index >= static_cast<int>(prompt.contents.size()))
    throw DataError("alignment_reward: content index out of range");
  return std::exp(
      -sq_dist(extract_content(x, cfg), prompt.contents[content_index]) /
      cfg.tau_a);
}

double consistency_reward_set(std::span<const Signal> xs,
                              const PairScoreFn& pair_score) {
  if (xs.size() < 2)
    throw DataError("consistency_reward_set: need at least 2 signals");
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = i + 1; j < xs.size(); ++j) {
      sum += pair_score(xs[i], xs[j]);
      ++pairs;
    }
  return sum / static_cast<double>(pairs);
}

double consistency_reward_set(std::span<const Signal> xs, const ToyConfig& cfg) {
  return consistency_reward_set(xs, [&cfg](const Signal& a, const Signal& b) {
    return true_consistency(a, b, cfg);
  });
}

}  // namespace paco
