#pragma once

#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace paco {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeError : Error {
  using Error::Error;
};

struct DataError : Error {
  using Error::Error;
};

// Dense row-major tensor of doubles. 1-D and 2-D shapes cover everything
// this project needs; gradients live on the tape, not here.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  Tensor() = default;
  Tensor(std::vector<std::size_t> s, std::vector<double> v)
      : shape(std::move(s)), values(std::move(v)) {
    if (count(shape) != values.size())
      throw ShapeError("tensor: shape/value count mismatch");
  }

  static std::size_t count(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
  }

  static Tensor zeros(std::vector<std::size_t> s) {
    std::size_t n = count(s);
    return Tensor(std::move(s), std::vector<double>(n, 0.0));
  }

  static Tensor full(std::vector<std::size_t> s, double v) {
    std::size_t n = count(s);
    return Tensor(std::move(s), std::vector<double>(n, v));
  }

  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  static Tensor vec(std::vector<double> v) {
    std::size_t n = v.size();
    return Tensor({n}, std::move(v));
  }

  std::size_t size() const { return values.size(); }

  std::size_t rows() const { return shape.empty() ? 1 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  double& at(std::size_t i, std::size_t j) { return values[i * cols() + j]; }
  double at(std::size_t i, std::size_t j) const { return values[i * cols() + j]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  std::string shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape[i]);
    }
    return s + "]";
  }
};

}  // namespace paco
