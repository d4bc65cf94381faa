#pragma once

#include <string>
#include <vector>

#include "paco/optim.hpp"
#include "paco/rng.hpp"
#include "paco/tape.hpp"
#include "paco/tensor.hpp"

namespace paco {

// Fixed architecture: affine -> tanh for each hidden layer, final affine.
// Parameters are named W0,b0,W1,b1,... with Wi of shape [in,out], bi [out].
struct MlpSpec {
  std::vector<std::size_t> sizes;  // {in, hidden..., out}

  std::size_t layers() const { return sizes.size() - 1; }
};

ParamSet mlp_init(const MlpSpec& spec, RngStream& stream,
                  const std::string& prefix = "");

// Tape forward; `params` are leaf ids in W0,b0,W1,b1,... order.
Tape::Id mlp_forward(Tape& tape, const MlpSpec& spec,
                     const std::vector<Tape::Id>& params, Tape::Id input);

// Fast tape-free forward for sampling paths.
Tensor mlp_forward_plain(const MlpSpec& spec, const ParamSet& params,
                         const Tensor& input, std::size_t param_offset = 0);

// Registers every tensor of a ParamSet as a gradient-tracked leaf.
std::vector<Tape::Id> register_params(Tape& tape, const ParamSet& params);

// Collects grads of registered leaves back into ParamSet order.
std::vector<Tensor> collect_grads(const Tape& tape,
                                  const std::vector<Tape::Id>& ids,
                                  const ParamSet& params);

}  // namespace paco
