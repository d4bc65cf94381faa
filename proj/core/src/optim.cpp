#include "paco/optim.hpp"

#include <cmath>

namespace paco {

void adam_step(ParamSet& params, const std::vector<Tensor>& grads,
               AdamState& state, double lr, double beta1, double beta2,
               double eps) {
  if (grads.size() != params.size())
    throw ShapeError("adam_step: gradient count mismatch");
  state.step += 1;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = params[k];
    const Tensor& g = grads[k];
    if (!p.same_shape(g))
      throw ShapeError("adam_step: shape mismatch for " + params.names[k]);
    Tensor& m = state.m[k];
    Tensor& v = state.v[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      double gi = g.values[i];
      if (!std::isfinite(gi))
        throw DataError("adam_step: non-finite gradient in " + params.names[k]);
      m.values[i] = beta1 * m.values[i] + (1.0 - beta1) * gi;
      v.values[i] = beta2 * v.values[i] + (1.0 - beta2) * gi * gi;
      double mhat = m.values[i] / bc1;
      double vhat = v.values[i] / bc2;
      p.values[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

}  // namespace paco
