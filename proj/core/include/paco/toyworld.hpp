#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "paco/rng.hpp"
#include "paco/tensor.hpp"

namespace paco {

// Fixed dimensions of the synthetic universe. Identity lives in cosine
// modes 1..k_id, content in modes k_id+1..k_id+k_ct, and style in a single
// higher mode outside both bands, so band projections recover each part
// independently.
struct ToyConfig {
  int k_id = 4;
  int k_st = 2;
  int k_ct = 4;
  double tau_c = 0.5;
  double tau_a = 0.5;

  int style_mode() const { return k_id + k_ct + 2; }
  int min_resolution() const { return 4 * (k_id + k_ct); }
};

struct PromptSpec {
  std::vector<double> identity;               // length k_id, in [-1,1]
  std::vector<double> style;                  // length k_st, in [-1,1]
  std::vector<std::vector<double>> contents;  // M vectors of length k_ct
  std::string category_label;
};

// Real-valued function sampled on the uniform grid u_j = j/d over [0,1).
struct Signal {
  int resolution = 0;
  std::vector<double> samples;

  Signal() = default;
  Signal(int d, std::vector<double> s) : resolution(d), samples(std::move(s)) {
    if (static_cast<int>(samples.size()) != d)
      throw ShapeError("signal: sample count != resolution");
  }
  static Signal zeros(int d) { return Signal(d, std::vector<double>(d, 0.0)); }
};

PromptSpec random_prompt(RngStream& stream, int n_contents,
                         const ToyConfig& cfg = {});

Signal render(const PromptSpec& prompt, int content_index, double noise_scale,
              RngStream& stream, int d, const ToyConfig& cfg = {});

// Normalized cosine-band coefficients: coeff_p = (2/d) sum_j s_j cos(2 pi p u_j).
std::vector<double> extract_identity(const Signal& x, const ToyConfig& cfg = {});
std::vector<double> extract_content(const Signal& x, const ToyConfig& cfg = {});

// exp(-||id(a)-id(b)||^2 / tau_c); symmetric, in (0,1].
double true_consistency(const Signal& a, const Signal& b,
                        const ToyConfig& cfg = {});

// exp(-||content(x)-contents[i]||^2 / tau_a)
double alignment_reward(const Signal& x, const PromptSpec& prompt,
                        int content_index, const ToyConfig& cfg = {});

using PairScoreFn = std::function<double(const Signal&, const Signal&)>;

// Mean pairwise score over all unordered pairs; the scoring backend is
// either the analytic oracle or a trained scorer.
double consistency_reward_set(std::span<const Signal> xs,
                              const PairScoreFn& pair_score);
double consistency_reward_set(std::span<const Signal> xs,
                              const ToyConfig& cfg = {});

}  // namespace paco
