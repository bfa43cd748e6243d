#pragma once

// Reverse-mode differentiation on an append-only tape.
//
// Every operation appends a node; node ids are therefore a topological order.
// Backward rules are themselves written with tape operations, so gradients can
// be differentiated again (`create_graph = true`), which the physics losses use
// to train through input gradients.

#include <cstddef>
#include <deque>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "pdemts/tensor.hpp"

namespace pdemts {

class Tape;

class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const { return id_; }
  Tape& tape() const { return *tape_; }
  bool requires_grad() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Gradient of the loss w.r.t. parent `which`, given the node output and the
// incoming gradient. Returning an invalid Var means "no contribution".
using BackwardFn =
    std::function<Var(const Var& out, const Var& grad_out, std::size_t which)>;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var variable(Tensor value);
  Var record(Tensor value, std::vector<Var> parents, BackwardFn backward);

  // Gradients of scalar `output` w.r.t. each of `wrt`. With create_graph the
  // returned gradients are differentiable tape nodes.
  std::vector<Var> grad(const Var& output, std::span<const Var> wrt,
                        bool create_graph = false);
  std::vector<Tensor> grad_values(const Var& output, std::span<const Var> wrt);

  std::size_t size() const { return nodes_.size(); }
  bool recording() const { return recording_; }

 private:
  friend class Var;
  struct Node {
    Tensor value;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    bool requires_grad = false;
  };

  std::deque<Node> nodes_;
  bool recording_ = true;
};

namespace ad {

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var neg(const Var& a);
Var scale(const Var& a, double c);
Var add_scalar(const Var& a, double c);
Var square(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var recip(const Var& a);
Var tanh(const Var& a);
Var sin(const Var& a);
Var cos(const Var& a);
Var relu(const Var& a);
Var abs(const Var& a);
Var powi(const Var& a, int k);
// a * (1/b) where |b| >= guard, `fallback` elsewhere.
Var protected_div(const Var& a, const Var& b, double guard = 1e-9, double fallback = 1.0);

Var sum(const Var& a);
Var mean(const Var& a);
// Broadcast a single-element tensor to `shape`.
Var expand(const Var& s, const Shape& shape);

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var reshape(const Var& a, Shape shape);
Var slice(const Var& a, std::size_t axis, std::size_t start, std::size_t len);
Var pad(const Var& a, std::size_t axis, std::size_t before, std::size_t after);

// x(..., F) + b(F)
Var add_bias(const Var& x, const Var& b);
// (..., F) -> (F)
Var sum_leading(const Var& x);
// (F) -> shape with trailing dim F
Var tile_leading(const Var& b, const Shape& shape);

Var gather(const Var& x, std::shared_ptr<const std::vector<std::size_t>> index, Shape shape);
Var scatter(const Var& g, std::shared_ptr<const std::vector<std::size_t>> index, Shape shape);

// Non-overlapping max pooling over axis 1 of (B, T, C); the last partial window is kept.
Var maxpool_time(const Var& x, std::size_t width);

// Column `c` of a rank-2 (N, C) node, as shape (N).
Var column(const Var& x, std::size_t c);
// Element `flat` of x, as a scalar node.
Var element(const Var& x, std::size_t flat);

}  // namespace ad
}  // namespace pdemts
