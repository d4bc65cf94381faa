#pragma once

#include <string>
#include <vector>

#include "paco/tensor.hpp"

namespace paco {

// Named parameter collection; declaration order is the checkpoint order.
struct ParamSet {
  std::vector<std::string> names;
  std::vector<Tensor> tensors;

  void add(std::string name, Tensor t) {
    names.push_back(std::move(name));
    tensors.push_back(std::move(t));
  }
  std::size_t size() const { return tensors.size(); }
  Tensor& operator[](std::size_t i) { return tensors[i]; }
  const Tensor& operator[](std::size_t i) const { return tensors[i]; }

  const Tensor& find(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return tensors[i];
    throw DataError("paramset: no tensor named " + name);
  }
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  long step = 0;

  static AdamState init(const ParamSet& params) {
    AdamState s;
    for (const auto& t : params.tensors) {
      s.m.push_back(Tensor::zeros(t.shape));
      s.v.push_back(Tensor::zeros(t.shape));
    }
    return s;
  }
};

// Standard Adam with bias correction. Throws on non-finite gradients,
// naming the offending parameter.
void adam_step(ParamSet& params, const std::vector<Tensor>& grads,
               AdamState& state, double lr, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8);

}  // namespace paco
