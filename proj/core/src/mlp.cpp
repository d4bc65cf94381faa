#include "paco/mlp.hpp"

#include <cmath>

namespace paco {

ParamSet mlp_init(const MlpSpec& spec, RngStream& stream,
                  const std::string& prefix) {
  ParamSet p;
  for (std::size_t l = 0; l < spec.layers(); ++l) {
    std::size_t in = spec.sizes[l], out = spec.sizes[l + 1];
    double s = 1.0 / std::sqrt(static_cast<double>(in));
    Tensor w = Tensor::zeros({in, out});
    for (auto& v : w.values) v = s * stream.gaussian();
    p.add(prefix + "W" + std::to_string(l), std::move(w));
    p.add(prefix + "b" + std::to_string(l), Tensor::zeros({out}));
  }
  return p;
}

Tape::Id mlp_forward(Tape& tape, const MlpSpec& spec,
                     const std::vector<Tape::Id>& params, Tape::Id input) {
  if (params.size() < 2 * spec.layers())
    throw ShapeError("mlp_forward: expected " +
                     std::to_string(2 * spec.layers()) + " parameter tensors");
  Tape::Id h = input;
  for (std::size_t l = 0; l < spec.layers(); ++l) {
    const Tensor& x = tape.value(h);
    const Tensor& w = tape.value(params[2 * l]);
    if (x.shape.size() != 2 || x.shape[1] != w.shape[0])
      throw ShapeError("mlp_forward: layer " + std::to_string(l) +
                       " expects input cols " + std::to_string(w.shape[0]) +
                       ", got " + x.shape_str());
    h = tape.add_rowwise(tape.matmul(h, params[2 * l]), params[2 * l + 1]);
    if (l + 1 < spec.layers()) h = tape.tanh_(h);
  }
  return h;
}

Tensor mlp_forward_plain(const MlpSpec& spec, const ParamSet& params,
                         const Tensor& input, std::size_t param_offset) {
  Tensor h = input;
  for (std::size_t l = 0; l < spec.layers(); ++l) {
    const Tensor& w = params[param_offset + 2 * l];
    const Tensor& b = params[param_offset + 2 * l + 1];
    if (h.shape.size() != 2 || h.shape[1] != w.shape[0])
      throw ShapeError("mlp_forward: layer " + std::to_string(l) +
                       " expects input cols " + std::to_string(w.shape[0]) +
                       ", got " + h.shape_str());
    std::size_t m = h.shape[0], k = w.shape[0], n = w.shape[1];
    Tensor out = Tensor::zeros({m, n});
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        double hv = h.values[i * k + p];
        if (hv == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j)
          out.values[i * n + j] += hv * w.values[p * n + j];
      }
      for (std::size_t j = 0; j < n; ++j) out.values[i * n + j] += b.values[j];
    }
    if (l + 1 < spec.layers())
      for (auto& v : out.values) v = std::tanh(v);
    h = std::move(out);
  }
  return h;
}

std::vector<Tape::Id> register_params(Tape& tape, const ParamSet& params) {
  std::vector<Tape::Id> ids;
  ids.reserve(params.size());
  for (const auto& t : params.tensors) ids.push_back(tape.leaf(t, true));
  return ids;
}

std::vector<Tensor> collect_grads(const Tape& tape,
                                  const std::vector<Tape::Id>& ids,
                                  const ParamSet& params) {
  std::vector<Tensor> grads;
  grads.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const Tensor& g = tape.grad(ids[i]);
    grads.push_back(g.values.empty() ? Tensor::zeros(params[i].shape) : g);
  }
  return grads;
}

}  // namespace paco
