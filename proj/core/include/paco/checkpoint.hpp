#pragma once

#include <string>

#include "paco/optim.hpp"

namespace paco {

// Checkpoint layout: one UTF-8 JSON line
//   {"format":"paco-ckpt","version":1,
//    "tensors":[{"name":"W0","shape":[3,4]},...]}\n
// followed immediately by the raw values of every tensor in declaration
// order, each value a little-endian IEEE-754 binary64.
void save_checkpoint(const std::string& path, const ParamSet& params);
ParamSet load_checkpoint(const std::string& path);

}  // namespace paco
