#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "agcn/matrix.hpp"

namespace agcn {

// Learnable matrix plus its gradient accumulator.
struct Parameter {
  Matrix value;
  Matrix grad;
  bool requires_grad = true;

  Parameter() = default;
  explicit Parameter(Matrix v) : value(std::move(v)), grad(value.rows(), value.cols()) {}

  void zero_grad() { grad.fill(0.0); }
};

class Tape;

// Handle to a node on a tape. Cheap to copy; valid for the tape's lifetime.
struct Var {
  Tape* tape = nullptr;
  std::size_t idx = 0;
};

// Define-by-run reverse-mode tape over dense double matrices. A tape is
// built fresh for every loss evaluation and discarded after backward();
// replaying the recorded nodes in reverse creation order visits each one
// exactly once, so repeated runs on the same inputs produce bitwise
// identical gradients.
class Tape {
 public:
  // Receives the tape and the node's own index; reads grad_at(self) and
  // accumulates into the grads of its recorded inputs.
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  Var constant(Matrix value) { return push(std::move(value), nullptr, nullptr); }

  // Leaf bound to a parameter; backward() accumulates into p.grad.
  Var leaf(Parameter& p) { return push(p.value, nullptr, &p); }

  Var matmul(Var a, Var b) {
    const Matrix& av = value(a);
    const Matrix& bv = value(b);
    Matrix out = agcn::matmul(av, bv);  // shape check lives there
    const std::size_t ia = a.idx, ib = b.idx;
    return push(std::move(out), [ia, ib](Tape& t, std::size_t self) {
      const Matrix& g = t.grad_at(self);
      t.grad_at(ia) += agcn::matmul(g, agcn::transpose(t.value_at(ib)));  // dL/da = g b^T
      t.grad_at(ib) += agcn::matmul(agcn::transpose(t.value_at(ia)), g);  // dL/db = a^T g
    });
  }

  Var add(Var a, Var b) {
    Matrix out = agcn::add(value(a), value(b));
    const std::size_t ia = a.idx, ib = b.idx;
    return push(std::move(out), [ia, ib](Tape& t, std::size_t self) {
      t.grad_at(ia) += t.grad_at(self);
      t.grad_at(ib) += t.grad_at(self);
    });
  }

  Var sub(Var a, Var b) {
    Matrix out = agcn::sub(value(a), value(b));
    const std::size_t ia = a.idx, ib = b.idx;
    return push(std::move(out), [ia, ib](Tape& t, std::size_t self) {
      const Matrix& g = t.grad_at(self);
      t.grad_at(ia) += g;
      Matrix& gb = t.grad_at(ib);
      for (std::size_t i = 0; i < gb.size(); ++i) gb.raw()[i] -= g.raw()[i];
    });
  }

  // Elementwise product.
  Var mul(Var a, Var b) {
    Matrix out = hadamard(value(a), value(b));
    const std::size_t ia = a.idx, ib = b.idx;
    return push(std::move(out), [ia, ib](Tape& t, std::size_t self) {
      const Matrix& g = t.grad_at(self);
      t.grad_at(ia) += hadamard(g, t.value_at(ib));
      t.grad_at(ib) += hadamard(g, t.value_at(ia));
    });
  }

  Var scale(Var a, double c) {
    Matrix out = scaled(value(a), c);
    const std::size_t ia = a.idx;
    return push(std::move(out), [ia, c](Tape& t, std::size_t self) {
      t.grad_at(ia) += scaled(t.grad_at(self), c);
    });
  }

  Var transpose(Var a) {
    Matrix out = agcn::transpose(value(a));
    const std::size_t ia = a.idx;
    return push(std::move(out), [ia](Tape& t, std::size_t self) {
      t.grad_at(ia) += agcn::transpose(t.grad_at(self));
    });
  }

  // Sum of all entries; 1x1 output, backward broadcasts the scalar.
  Var reduce_sum(Var a) {
    Matrix out(1, 1);
    out(0, 0) = sum(value(a));
    const std::size_t ia = a.idx;
    return push(std::move(out), [ia](Tape& t, std::size_t self) {
      const double g = t.grad_at(self)(0, 0);
      Matrix& ga = t.grad_at(ia);
      for (double& v : ga.raw()) v += g;
    });
  }

  Var leaky_relu(Var a, double slope) {
    if (!(slope > 0.0 && slope < 1.0))
      throw std::invalid_argument("leaky_relu: slope must be in (0,1), got " +
                                  std::to_string(slope));
    Matrix out = value(a);
    for (double& v : out.raw())
      if (v < 0.0) v *= slope;
    const std::size_t ia = a.idx;
    return push(std::move(out), [ia, slope](Tape& t, std::size_t self) {
      const Matrix& g = t.grad_at(self);
      const Matrix& x = t.value_at(ia);
      Matrix& ga = t.grad_at(ia);
      for (std::size_t i = 0; i < ga.size(); ++i)
        ga.raw()[i] += g.raw()[i] * (x.raw()[i] > 0.0 ? 1.0 : slope);
    });
  }

  // Gradient passes only where the input is strictly positive.
  Var relu(Var a) {
    Matrix out = value(a);
    for (double& v : out.raw())
      if (v < 0.0) v = 0.0;
    const std::size_t ia = a.idx;
    return push(std::move(out), [ia](Tape& t, std::size_t self) {
      const Matrix& g = t.grad_at(self);
      const Matrix& x = t.value_at(ia);
      Matrix& ga = t.grad_at(ia);
      for (std::size_t i = 0; i < ga.size(); ++i)
        if (x.raw()[i] > 0.0) ga.raw()[i] += g.raw()[i];
    });
  }

  Var sigmoid(Var a) {
    Matrix out = value(a);
    for (double& v : out.raw()) v = stable_sigmoid(v);
    const std::size_t ia = a.idx;
    // d sigma = sigma (1 - sigma), from the stored output.
    return push(std::move(out), [ia](Tape& t, std::size_t self) {
      const Matrix& g = t.grad_at(self);
      const Matrix& y = t.value_at(self);
      Matrix& ga = t.grad_at(ia);
      for (std::size_t i = 0; i < ga.size(); ++i) {
        const double s = y.raw()[i];
        ga.raw()[i] += g.raw()[i] * s * (1.0 - s);
      }
    });
  }

  // Subgradient sign(0) = 0.
  Var abs(Var a) {
    Matrix out = value(a);
    for (double& v : out.raw()) v = std::abs(v);
    const std::size_t ia = a.idx;
    return push(std::move(out), [ia](Tape& t, std::size_t self) {
      const Matrix& g = t.grad_at(self);
      const Matrix& x = t.value_at(ia);
      Matrix& ga = t.grad_at(ia);
      for (std::size_t i = 0; i < ga.size(); ++i) {
        const double xv = x.raw()[i];
        if (xv > 0.0)
          ga.raw()[i] += g.raw()[i];
        else if (xv < 0.0)
          ga.raw()[i] -= g.raw()[i];
      }
    });
  }

  // max(x, floor); gradient passes where x > floor.
  Var clamp_min(Var a, double floor) {
    Matrix out = value(a);
    for (double& v : out.raw())
      if (v < floor) v = floor;
    const std::size_t ia = a.idx;
    return push(std::move(out), [ia, floor](Tape& t, std::size_t self) {
      const Matrix& g = t.grad_at(self);
      const Matrix& x = t.value_at(ia);
      Matrix& ga = t.grad_at(ia);
      for (std::size_t i = 0; i < ga.size(); ++i)
        if (x.raw()[i] > floor) ga.raw()[i] += g.raw()[i];
    });
  }

  // x^(-1/2); rejects non-positive reals. NaN/inf pass through so an exploded
  // optimization state reaches the loss, where the step loop can flag it.
  Var rsqrt(Var a) {
    Matrix out = value(a);
    for (double& v : out.raw()) {
      if (v <= 0.0)
        throw std::invalid_argument("rsqrt: non-positive input " + std::to_string(v));
      v = 1.0 / std::sqrt(v);
    }
    const std::size_t ia = a.idx;
    return push(std::move(out), [ia](Tape& t, std::size_t self) {
      const Matrix& g = t.grad_at(self);
      const Matrix& y = t.value_at(self);
      Matrix& ga = t.grad_at(ia);
      for (std::size_t i = 0; i < ga.size(); ++i) {
        const double yv = y.raw()[i];
        ga.raw()[i] += g.raw()[i] * (-0.5 * yv * yv * yv);
      }
    });
  }

  // Elementwise binary cross entropy from logits against fixed 0/1 targets:
  //   loss = max(p,0) - p*y + log1p(exp(-|p|))
  // which never evaluates log(0) and stays finite for |p| well beyond 1e3.
  // Backward: dL/dp = sigma(p) - y.
  Var bce_with_logits(Var logits, Matrix targets) {
    const Matrix& p = value(logits);
    if (!p.same_shape(targets))
      throw std::invalid_argument("bce_with_logits: shape mismatch " + p.shape_str() +
                                  " vs " + targets.shape_str());
    Matrix out = p;
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double pv = p.raw()[i];
      const double yv = targets.raw()[i];
      out.raw()[i] = std::max(pv, 0.0) - pv * yv + std::log1p(std::exp(-std::abs(pv)));
    }
    const std::size_t ip = logits.idx;
    return push(std::move(out), [ip, y = std::move(targets)](Tape& t, std::size_t self) {
      const Matrix& g = t.grad_at(self);
      const Matrix& p = t.value_at(ip);
      Matrix& gp = t.grad_at(ip);
      for (std::size_t i = 0; i < gp.size(); ++i)
        gp.raw()[i] += g.raw()[i] * (stable_sigmoid(p.raw()[i]) - y.raw()[i]);
    });
  }

  // Extension point: record a node with an arbitrary value and backward rule.
  Var custom(Matrix value, BackwardFn backward) {
    return push(std::move(value), std::move(backward), nullptr);
  }

  const Matrix& value(Var v) const { return nodes_[v.idx].value; }
  const Matrix& grad(Var v) const { return nodes_[v.idx].grad; }
  std::size_t size() const { return nodes_.size(); }

  Matrix& grad_at(std::size_t idx) { return nodes_[idx].grad; }
  const Matrix& value_at(std::size_t idx) const { return nodes_[idx].value; }

  // Reverse sweep from a 1x1 output seeded with 1. Each node's rule runs
  // exactly once, in reverse creation order; leaf gradients are then
  // accumulated into their bound Parameters.
  void backward(Var out) {
    const Matrix& ov = value(out);
    if (ov.rows() != 1 || ov.cols() != 1)
      throw std::invalid_argument("backward: output must be 1x1, got " + ov.shape_str());
    for (auto& n : nodes_) n.grad.fill(0.0);
    nodes_[out.idx].grad(0, 0) = 1.0;
    for (std::size_t i = out.idx + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.backward) n.backward(*this, i);
      if (n.param && n.param->requires_grad) n.param->grad += n.grad;
    }
  }

  static double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    BackwardFn backward;
    Parameter* param = nullptr;
  };

  Var push(Matrix value, BackwardFn fn, Parameter* param = nullptr) {
    Node n;
    n.grad = Matrix(value.rows(), value.cols());
    n.value = std::move(value);
    n.backward = std::move(fn);
    n.param = param;
    nodes_.push_back(std::move(n));
    return Var{this, nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
};

}  // namespace agcn
