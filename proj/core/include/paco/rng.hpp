#pragma once

#include <cmath>
#include <cstdint>

#include "paco/tensor.hpp"

namespace paco {

// Counter-based stream: draw i is a pure function of (seed, stream_id, i),
// so streams with distinct ids are independent and workers need no shared
// state. Splitting derives a child id by mixing; nothing is consumed from
// the parent.
struct RngStream {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
  std::uint64_t counter = 0;

  RngStream() = default;
  RngStream(std::uint64_t seed_, std::uint64_t stream_id_)
      : seed(seed_), stream_id(stream_id_) {}

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next_u64() {
    std::uint64_t base = mix(seed ^ mix(stream_id));
    return mix(base + (counter++) * 0x9e3779b97f4a7c15ULL);
  }

  // uniform in (0,1)
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // one Box-Muller draw per call (two u64s); the sine partner is discarded
  // so the draw count stays a simple function of the call count
  double gaussian() {
    double u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  Tensor gaussian_tensor(std::vector<std::size_t> shape) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (auto& v : t.values) v = gaussian();
    return t;
  }

  RngStream split(std::uint64_t child) const {
    return RngStream(seed, mix(stream_id ^ mix(child ^ 0x5851f42d4c957f2dULL)));
  }
};

}  // namespace paco
