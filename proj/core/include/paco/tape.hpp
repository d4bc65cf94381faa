#pragma once

#include <functional>
#include <vector>

#include "paco/tensor.hpp"

namespace paco {

// Reverse-mode tape over a closed op set. Nodes own their forward values;
// gradients are materialized per node during backward(). Anything fancier
// (min, clip, stop-gradient) is composed at call sites from these ops plus
// constant masks.
class Tape {
 public:
  using Id = int;

  Id leaf(Tensor value, bool requires_grad = false) {
    return push(std::move(value), {}, nullptr, requires_grad);
  }

  Id constant(Tensor value) { return leaf(std::move(value), false); }

  // [m,k] x [k,n] -> [m,n]
  Id matmul(Id a, Id b);
  // elementwise, same shape
  Id add(Id a, Id b);
  // [m,n] + [n] broadcast over rows
  Id add_rowwise(Id a, Id bias);
  Id scale(Id a, double c);
  Id add_scalar(Id a, double c);
  // elementwise product with a constant tensor (masking)
  Id cmul(Id a, const Tensor& c);
  Id tanh_(Id a);
  Id exp_(Id a);
  Id square(Id a);
  Id sum(Id a);   // -> scalar
  Id mean(Id a);  // -> scalar
  // flat 1-D concatenation
  Id concat(const std::vector<Id>& parts);
  // log softmax likelihood of one target class over a 1-D logits vector;
  // returns scalar log p(target)
  Id log_softmax_pick(Id logits, std::size_t target);

  const Tensor& value(Id id) const { return nodes_[id].value; }
  const Tensor& grad(Id id) const { return nodes_[id].grad; }

  void backward(Id loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // allocated lazily in backward
    std::vector<Id> parents;
    std::function<void(Tape&, Id)> back;
    bool requires_grad = false;
  };

  Id push(Tensor value, std::vector<Id> parents,
          std::function<void(Tape&, Id)> back, bool requires_grad) {
    nodes_.push_back(Node{std::move(value), Tensor{}, std::move(parents),
                          std::move(back), requires_grad});
    return static_cast<Id>(nodes_.size() - 1);
  }

  Tensor& grad_ref(Id id) {
    Node& n = nodes_[id];
    if (n.grad.values.empty()) n.grad = Tensor::zeros(n.value.shape);
    return n.grad;
  }

  std::vector<Node> nodes_;
};

}  // namespace paco
