#include "paco/tape.hpp"

#include <cmath>

namespace paco {

Tape::Id Tape::matmul(Id a, Id b) {
  const Tensor& A = nodes_[a].value;
  const Tensor& B = nodes_[b].value;
  if (A.shape.size() != 2 || B.shape.size() != 2 || A.shape[1] != B.shape[0])
    throw ShapeError("matmul: incompatible shapes " + A.shape_str() + " x " +
                     B.shape_str());
  std::size_t m = A.shape[0], k = A.shape[1], n = B.shape[1];
  Tensor out = Tensor::zeros({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      double av = A.values[i * k + p];
      if (av == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j)
        out.values[i * n + j] += av * B.values[p * n + j];
    }
  bool rg = nodes_[a].requires_grad || nodes_[b].requires_grad;
  return push(std::move(out), {a, b},
              [m, k, n](Tape& t, Id self) {
                auto& node = t.nodes_[self];
                const Tensor& g = node.grad;
                Id a = node.parents[0], b = node.parents[1];
                const Tensor& A = t.nodes_[a].value;
                const Tensor& B = t.nodes_[b].value;
                if (t.nodes_[a].requires_grad) {
                  Tensor& ga = t.grad_ref(a);
                  for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                      double s = 0;
                      for (std::size_t j = 0; j < n; ++j)
                        s += g.values[i * n + j] * B.values[p * n + j];
                      ga.values[i * k + p] += s;
                    }
                }
                if (t.nodes_[b].requires_grad) {
                  Tensor& gb = t.grad_ref(b);
                  for (std::size_t p = 0; p < k; ++p)
                    for (std::size_t i = 0; i < m; ++i) {
                      double av = A.values[i * k + p];
                      if (av == 0.0) continue;
                      for (std::size_t j = 0; j < n; ++j)
                        gb.values[p * n + j] += av * g.values[i * n + j];
                    }
                }
              },
              rg);
}

Tape::Id Tape::add(Id a, Id b) {
  const Tensor& A = nodes_[a].value;
  const Tensor& B = nodes_[b].value;
  if (!A.same_shape(B))
    throw ShapeError("add: shape mismatch " + A.shape_str() + " vs " +
                     B.shape_str());
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] += B.values[i];
  bool rg = nodes_[a].requires_grad || nodes_[b].requires_grad;
  return push(std::move(out), {a, b},
              [](Tape& t, Id self) {
                auto& node = t.nodes_[self];
                for (Id p : node.parents)
                  if (t.nodes_[p].requires_grad) {
                    Tensor& gp = t.grad_ref(p);
                    for (std::size_t i = 0; i < gp.size(); ++i)
                      gp.values[i] += node.grad.values[i];
                  }
              },
              rg);
}

Tape::Id Tape::add_rowwise(Id a, Id bias) {
  const Tensor& A = nodes_[a].value;
  const Tensor& B = nodes_[bias].value;
  if (A.shape.size() != 2 || B.shape.size() != 1 || A.shape[1] != B.shape[0])
    throw ShapeError("add_rowwise: shape mismatch " + A.shape_str() + " + " +
                     B.shape_str());
  std::size_t m = A.shape[0], n = A.shape[1];
  Tensor out = A;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.values[i * n + j] += B.values[j];
  bool rg = nodes_[a].requires_grad || nodes_[bias].requires_grad;
  return push(std::move(out), {a, bias},
              [m, n](Tape& t, Id self) {
                auto& node = t.nodes_[self];
                Id a = node.parents[0], b = node.parents[1];
                if (t.nodes_[a].requires_grad) {
                  Tensor& ga = t.grad_ref(a);
                  for (std::size_t i = 0; i < ga.size(); ++i)
                    ga.values[i] += node.grad.values[i];
                }
                if (t.nodes_[b].requires_grad) {
                  Tensor& gb = t.grad_ref(b);
                  for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j)
                      gb.values[j] += node.grad.values[i * n + j];
                }
              },
              rg);
}

Tape::Id Tape::scale(Id a, double c) {
  Tensor out = nodes_[a].value;
  for (auto& v : out.values) v *= c;
  return push(std::move(out), {a},
              [c](Tape& t, Id self) {
                auto& node = t.nodes_[self];
                Id a = node.parents[0];
                if (!t.nodes_[a].requires_grad) return;
                Tensor& ga = t.grad_ref(a);
                for (std::size_t i = 0; i < ga.size(); ++i)
                  ga.values[i] += c * node.grad.values[i];
              },
              nodes_[a].requires_grad);
}

Tape::Id Tape::add_scalar(Id a, double c) {
  Tensor out = nodes_[a].value;
  for (auto& v : out.values) v += c;
  return push(std::move(out), {a},
              [](Tape& t, Id self) {
                auto& node = t.nodes_[self];
                Id a = node.parents[0];
                if (!t.nodes_[a].requires_grad) return;
                Tensor& ga = t.grad_ref(a);
                for (std::size_t i = 0; i < ga.size(); ++i)
                  ga.values[i] += node.grad.values[i];
              },
              nodes_[a].requires_grad);
}

Tape::Id Tape::cmul(Id a, const Tensor& c) {
  const Tensor& A = nodes_[a].value;
  if (!A.same_shape(c))
    throw ShapeError("cmul: shape mismatch " + A.shape_str() + " vs " +
                     c.shape_str());
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] *= c.values[i];
  Tensor mask = c;
  return push(std::move(out), {a},
              [mask](Tape& t, Id self) {
                auto& node = t.nodes_[self];
                Id a = node.parents[0];
                if (!t.nodes_[a].requires_grad) return;
                Tensor& ga = t.grad_ref(a);
                for (std::size_t i = 0; i < ga.size(); ++i)
                  ga.values[i] += mask.values[i] * node.grad.values[i];
              },
              nodes_[a].requires_grad);
}

Tape::Id Tape::tanh_(Id a) {
  Tensor out = nodes_[a].value;
  for (auto& v : out.values) v = std::tanh(v);
  return push(std::move(out), {a},
              [](Tape& t, Id self) {
                auto& node = t.nodes_[self];
                Id a = node.parents[0];
                if (!t.nodes_[a].requires_grad) return;
                Tensor& ga = t.grad_ref(a);
                for (std::size_t i = 0; i < ga.size(); ++i) {
                  double y = node.value.values[i];
                  ga.values[i] += (1.0 - y * y) * node.grad.values[i];
                }
              },
              nodes_[a].requires_grad);
}

Tape::Id Tape::exp_(Id a) {
  Tensor out = nodes_[a].value;
  for (auto& v : out.values) v = std::exp(v);
  return push(std::move(out), {a},
              [](Tape& t, Id self) {
                auto& node = t.nodes_[self];
                Id a = node.parents[0];
                if (!t.nodes_[a].requires_grad) return;
                Tensor& ga = t.grad_ref(a);
                for (std::size_t i = 0; i < ga.size(); ++i)
                  ga.values[i] += node.value.values[i] * node.grad.values[i];
              },
              nodes_[a].requires_grad);
}

Tape::Id Tape::square(Id a) {
  Tensor out = nodes_[a].value;
  for (auto& v : out.values) v *= v;
  return push(std::move(out), {a},
              [](Tape& t, Id self) {
                auto& node = t.nodes_[self];
                Id a = node.parents[0];
                if (!t.nodes_[a].requires_grad) return;
                Tensor& ga = t.grad_ref(a);
                const Tensor& x = t.nodes_[a].value;
                for (std::size_t i = 0; i < ga.size(); ++i)
                  ga.values[i] += 2.0 * x.values[i] * node.grad.values[i];
              },
              nodes_[a].requires_grad);
}

Tape::Id Tape::sum(Id a) {
  double s = 0;
  for (double v : nodes_[a].value.values) s += v;
  return push(Tensor::scalar(s), {a},
              [](Tape& t, Id self) {
                auto& node = t.nodes_[self];
                Id a = node.parents[0];
                if (!t.nodes_[a].requires_grad) return;
                Tensor& ga = t.grad_ref(a);
                for (auto& v : ga.values) v += node.grad.values[0];
              },
              nodes_[a].requires_grad);
}

Tape::Id Tape::mean(Id a) {
  std::size_t n = nodes_[a].value.size();
  if (n == 0) throw ShapeError("mean: empty tensor");
  double s = 0;
  for (double v : nodes_[a].value.values) s += v;
  double inv = 1.0 / static_cast<double>(n);
  return push(Tensor::scalar(s * inv), {a},
              [inv](Tape& t, Id self) {
                auto& node = t.nodes_[self];
                Id a = node.parents[0];
                if (!t.nodes_[a].requires_grad) return;
                Tensor& ga = t.grad_ref(a);
                for (auto& v : ga.values) v += inv * node.grad.values[0];
              },
              nodes_[a].requires_grad);
}

Tape::Id Tape::concat(const std::vector<Id>& parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  std::vector<double> vals;
  std::vector<std::size_t> offsets;
  bool rg = false;
  for (Id p : parts) {
    offsets.push_back(vals.size());
    const Tensor& v = nodes_[p].value;
    vals.insert(vals.end(), v.values.begin(), v.values.end());
    rg = rg || nodes_[p].requires_grad;
  }
  Tensor out = Tensor::vec(std::move(vals));
  return push(std::move(out), parts,
              [offsets](Tape& t, Id self) {
                auto& node = t.nodes_[self];
                for (std::size_t k = 0; k < node.parents.size(); ++k) {
                  Id p = node.parents[k];
                  if (!t.nodes_[p].requires_grad) continue;
                  Tensor& gp = t.grad_ref(p);
                  for (std::size_t i = 0; i < gp.size(); ++i)
                    gp.values[i] += node.grad.values[offsets[k] + i];
                }
              },
              rg);
}

Tape::Id Tape::log_softmax_pick(Id logits, std::size_t target) {
  const Tensor& z = nodes_[logits].value;
  if (z.shape.size() != 1)
    throw ShapeError("log_softmax_pick: logits must be 1-D, got " +
                     z.shape_str());
  if (target >= z.size())
    throw ShapeError("log_softmax_pick: target out of range");
  double zmax = z.values[0];
  for (double v : z.values) zmax = std::max(zmax, v);
  double lse = 0;
  for (double v : z.values) lse += std::exp(v - zmax);
  lse = zmax + std::log(lse);
  double lp = z.values[target] - lse;
  return push(Tensor::scalar(lp), {logits},
              [target, lse](Tape& t, Id self) {
                auto& node = t.nodes_[self];
                Id a = node.parents[0];
                if (!t.nodes_[a].requires_grad) return;
                Tensor& ga = t.grad_ref(a);
                const Tensor& z = t.nodes_[a].value;
                double g = node.grad.values[0];
                for (std::size_t i = 0; i < ga.size(); ++i) {
                  double p = std::exp(z.values[i] - lse);
                  ga.values[i] += g * ((i == target ? 1.0 : 0.0) - p);
                }
              },
              nodes_[logits].requires_grad);
}

void Tape::backward(Id loss) {
  if (nodes_[loss].value.size() != 1)
    throw ShapeError("backward: loss must be scalar, got " +
                     nodes_[loss].value.shape_str());
  grad_ref(loss).values[0] = 1.0;
  for (Id id = loss; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.values.empty() || !n.back) continue;
    n.back(*this, id);
  }
}

}  // namespace paco
