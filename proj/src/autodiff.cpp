#include "pdemts/autodiff.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace pdemts {

const Tensor& Var::value() const {
  if (!tape_) throw std::logic_error("value() of an empty Var");
  return tape_->nodes_[id_].value;
}

bool Var::requires_grad() const { return tape_ && tape_->nodes_[id_].requires_grad; }

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, true});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::vector<Var> parents, BackwardFn backward) {
  bool needs = false;
  if (recording_) {
    for (const auto& p : parents) {
      if (&p.tape() != this) throw std::logic_error("operands recorded on different tapes");
      needs = needs || p.requires_grad();
    }
  }
  Node node;
  node.value = std::move(value);
  if (needs) {
    node.parents.reserve(parents.size());
    for (const auto& p : parents) node.parents.push_back(p.id());
    node.backward = std::move(backward);
    node.requires_grad = true;
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

namespace {

class RecordingGuard {
 public:
  RecordingGuard(bool& flag, bool value) : flag_(flag), saved_(flag) { flag_ = value; }
  ~RecordingGuard() { flag_ = saved_; }
  RecordingGuard(const RecordingGuard&) = delete;
  RecordingGuard& operator=(const RecordingGuard&) = delete;

 private:
  bool& flag_;
  bool saved_;
};

}  // namespace

std::vector<Var> Tape::grad(const Var& output, std::span<const Var> wrt, bool create_graph) {
  if (output.value().size() != 1) {
    throw std::invalid_argument("backward requires a scalar output, got shape " +
                                shape_string(output.shape()));
  }
  const std::size_t out_id = output.id();

  // Restrict propagation to nodes that lie on a path from some wrt node.
  std::vector<char> reach(out_id + 1, 0);
  for (const auto& w : wrt) {
    if (w.id() <= out_id && nodes_[w.id()].requires_grad) reach[w.id()] = 1;
  }
  for (std::size_t id = 0; id <= out_id; ++id) {
    if (reach[id]) continue;
    for (auto p : nodes_[id].parents) {
      if (reach[p]) {
        reach[id] = 1;
        break;
      }
    }
  }

  std::vector<Var> grads(out_id + 1);
  RecordingGuard guard(recording_, create_graph);
  if (reach[out_id]) grads[out_id] = constant(Tensor(output.shape(), 1.0));

  for (std::size_t id = out_id + 1; id-- > 0;) {
    if (!grads[id].valid()) continue;
    // Copy what we need: backward rules append nodes, but deque references stay valid.
    const Node& node = nodes_[id];
    if (!node.backward) continue;
    const Var out(this, id);
    for (std::size_t k = 0; k < node.parents.size(); ++k) {
      const std::size_t pid = node.parents[k];
      if (!reach[pid]) continue;
      Var g = node.backward(out, grads[id], k);
      if (!g.valid()) continue;
      grads[pid] = grads[pid].valid() ? ad::add(grads[pid], g) : g;
    }
  }

  std::vector<Var> result;
  result.reserve(wrt.size());
  for (const auto& w : wrt) {
    if (w.id() <= out_id && grads[w.id()].valid()) {
      result.push_back(grads[w.id()]);
    } else {
      result.push_back(constant(Tensor(w.shape(), 0.0)));
    }
  }
  return result;
}

std::vector<Tensor> Tape::grad_values(const Var& output, std::span<const Var> wrt) {
  auto vars = grad(output, wrt, false);
  std::vector<Tensor> out;
  out.reserve(vars.size());
  for (const auto& v : vars) out.push_back(v.value());
  return out;
}

namespace ad {
namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                                " vs " + shape_string(b.shape()));
  }
}

template <typename F>
Tensor map_unary(const Tensor& a, F f) {
  Tensor out(a.shape());
  auto src = a.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
  return out;
}

template <typename F>
Tensor map_binary(const Tensor& a, const Tensor& b, F f) {
  Tensor out(a.shape());
  auto x = a.data();
  auto y = b.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) dst[i] = f(x[i], y[i]);
  return out;
}

Tape& tape_of(const Var& a) { return a.tape(); }

// Strides for treating `shape` as (outer, dim(axis), inner).
struct AxisView {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisView axis_view(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) throw std::invalid_argument("axis out of range");
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
  v.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
  return v;
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  return tape_of(a).record(map_binary(a.value(), b.value(), [](double x, double y) { return x + y; }),
                           {a, b}, [](const Var&, const Var& g, std::size_t) { return g; });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  return tape_of(a).record(map_binary(a.value(), b.value(), [](double x, double y) { return x - y; }),
                           {a, b}, [](const Var&, const Var& g, std::size_t k) {
                             return k == 0 ? g : neg(g);
                           });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  return tape_of(a).record(map_binary(a.value(), b.value(), [](double x, double y) { return x * y; }),
                           {a, b}, [a, b](const Var&, const Var& g, std::size_t k) {
                             return k == 0 ? mul(g, b) : mul(g, a);
                           });
}

Var neg(const Var& a) {
  return tape_of(a).record(map_unary(a.value(), [](double x) { return -x; }), {a},
                           [](const Var&, const Var& g, std::size_t) { return neg(g); });
}

Var scale(const Var& a, double c) {
  return tape_of(a).record(map_unary(a.value(), [c](double x) { return c * x; }), {a},
                           [c](const Var&, const Var& g, std::size_t) { return scale(g, c); });
}

Var add_scalar(const Var& a, double c) {
  return tape_of(a).record(map_unary(a.value(), [c](double x) { return x + c; }), {a},
                           [](const Var&, const Var& g, std::size_t) { return g; });
}

Var square(const Var& a) {
  return tape_of(a).record(map_unary(a.value(), [](double x) { return x * x; }), {a},
                           [a](const Var&, const Var& g, std::size_t) {
                             return mul(g, scale(a, 2.0));
                           });
}

Var exp(const Var& a) {
  return tape_of(a).record(map_unary(a.value(), [](double x) { return std::exp(x); }), {a},
                           [](const Var& out, const Var& g, std::size_t) { return mul(g, out); });
}

Var log(const Var& a) {
  return tape_of(a).record(map_unary(a.value(), [](double x) { return std::log(x); }), {a},
                           [a](const Var&, const Var& g, std::size_t) { return mul(g, recip(a)); });
}

Var recip(const Var& a) {
  return tape_of(a).record(map_unary(a.value(), [](double x) { return 1.0 / x; }), {a},
                           [](const Var& out, const Var& g, std::size_t) {
                             return neg(mul(g, square(out)));
                           });
}

Var tanh(const Var& a) {
  return tape_of(a).record(map_unary(a.value(), [](double x) { return std::tanh(x); }), {a},
                           [](const Var& out, const Var& g, std::size_t) {
                             return mul(g, add_scalar(neg(square(out)), 1.0));
                           });
}

Var sin(const Var& a) {
  return tape_of(a).record(map_unary(a.value(), [](double x) { return std::sin(x); }), {a},
                           [a](const Var&, const Var& g, std::size_t) { return mul(g, cos(a)); });
}

Var cos(const Var& a) {
  return tape_of(a).record(map_unary(a.value(), [](double x) { return std::cos(x); }), {a},
                           [a](const Var&, const Var& g, std::size_t) {
                             return neg(mul(g, sin(a)));
                           });
}

Var relu(const Var& a) {
  return tape_of(a).record(map_unary(a.value(), [](double x) { return x > 0.0 ? x : 0.0; }), {a},
                           [a](const Var&, const Var& g, std::size_t) {
                             auto step = map_unary(a.value(), [](double x) { return x > 0.0 ? 1.0 : 0.0; });
                             return mul(g, g.tape().constant(std::move(step)));
                           });
}

Var abs(const Var& a) {
  return tape_of(a).record(map_unary(a.value(), [](double x) { return std::fabs(x); }), {a},
                           [a](const Var&, const Var& g, std::size_t) {
                             auto sign = map_unary(a.value(), [](double x) {
                               return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
                             });
                             return mul(g, g.tape().constant(std::move(sign)));
                           });
}

Var powi(const Var& a, int k) {
  if (k < 0) throw std::invalid_argument("powi: negative exponent");
  auto f = [k](double x) {
    double r = 1.0;
    for (int i = 0; i < k; ++i) r *= x;
    return r;
  };
  return tape_of(a).record(map_unary(a.value(), f), {a},
                           [a, k](const Var&, const Var& g, std::size_t) -> Var {
                             if (k == 0) return {};
                             return mul(g, scale(powi(a, k - 1), static_cast<double>(k)));
                           });
}

namespace {

// 1/b where |b| >= guard, 0 elsewhere.
Var safe_recip(const Var& b, double guard) {
  return tape_of(b).record(
      map_unary(b.value(), [guard](double x) { return std::fabs(x) < guard ? 0.0 : 1.0 / x; }), {b},
      [](const Var& out, const Var& g, std::size_t) { return neg(mul(g, square(out))); });
}

}  // namespace

Var protected_div(const Var& a, const Var& b, double guard, double fallback) {
  require_same_shape(a, b, "protected_div");
  auto fill = map_unary(b.value(), [guard, fallback](double x) {
    return std::fabs(x) < guard ? fallback : 0.0;
  });
  auto q = mul(a, safe_recip(b, guard));
  return add(q, a.tape().constant(std::move(fill)));
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double x : a.value().data()) s += x;
  const Shape shape = a.shape();
  return tape_of(a).record(Tensor::scalar(s), {a},
                           [shape](const Var&, const Var& g, std::size_t) { return expand(g, shape); });
}

Var mean(const Var& a) {
  const auto n = a.value().size();
  if (n == 0) throw std::invalid_argument("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var expand(const Var& s, const Shape& shape) {
  if (s.value().size() != 1) throw std::invalid_argument("expand: source must have one element");
  return tape_of(s).record(Tensor(shape, s.value()[0]), {s},
                           [](const Var&, const Var& g, std::size_t) { return sum(g); });
}

Var matmul(const Var& a, const Var& b) {
  const auto& A = a.value();
  const auto& B = b.value();
  if (A.rank() != 2 || B.rank() != 2 || A.dim(1) != B.dim(0)) {
    throw std::invalid_argument("matmul: incompatible shapes " + shape_string(A.shape()) + " x " +
                                shape_string(B.shape()));
  }
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const auto n = static_cast<Eigen::Index>(A.dim(0));
  const auto k = static_cast<Eigen::Index>(A.dim(1));
  const auto m = static_cast<Eigen::Index>(B.dim(1));
  Tensor out(Shape{A.dim(0), B.dim(1)});
  Eigen::Map<const RowMat> ma(A.data().data(), n, k);
  Eigen::Map<const RowMat> mb(B.data().data(), k, m);
  Eigen::Map<RowMat> mo(out.data().data(), n, m);
  mo.noalias() = ma * mb;
  return tape_of(a).record(std::move(out), {a, b}, [a, b](const Var&, const Var& g, std::size_t k2) {
    return k2 == 0 ? matmul(g, transpose(b)) : matmul(transpose(a), g);
  });
}

Var transpose(const Var& a) {
  const auto& A = a.value();
  if (A.rank() != 2) throw std::invalid_argument("transpose: rank-2 input required");
  const auto r = A.dim(0), c = A.dim(1);
  Tensor out(Shape{c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = A[i * c + j];
  return tape_of(a).record(std::move(out), {a},
                           [](const Var&, const Var& g, std::size_t) { return transpose(g); });
}

Var reshape(const Var& a, Shape shape) {
  const Shape original = a.shape();
  return tape_of(a).record(a.value().reshaped(std::move(shape)), {a},
                           [original](const Var&, const Var& g, std::size_t) {
                             return reshape(g, original);
                           });
}

Var slice(const Var& a, std::size_t axis, std::size_t start, std::size_t len) {
  const auto v = axis_view(a.shape(), axis);
  if (start + len > v.extent) throw std::invalid_argument("slice out of range");
  Shape shape = a.shape();
  shape[axis] = len;
  Tensor out(shape);
  const auto& src = a.value();
  for (std::size_t o = 0; o < v.outer; ++o) {
    const double* s = src.data().data() + (o * v.extent + start) * v.inner;
    double* d = out.data().data() + o * len * v.inner;
    std::copy(s, s + len * v.inner, d);
  }
  const std::size_t after = v.extent - start - len;
  return tape_of(a).record(std::move(out), {a}, [axis, start, after](const Var&, const Var& g, std::size_t) {
    return pad(g, axis, start, after);
  });
}

Var pad(const Var& a, std::size_t axis, std::size_t before, std::size_t after) {
  const auto v = axis_view(a.shape(), axis);
  Shape shape = a.shape();
  const std::size_t extent = v.extent + before + after;
  shape[axis] = extent;
  Tensor out(shape, 0.0);
  const auto& src = a.value();
  for (std::size_t o = 0; o < v.outer; ++o) {
    const double* s = src.data().data() + o * v.extent * v.inner;
    double* d = out.data().data() + (o * extent + before) * v.inner;
    std::copy(s, s + v.extent * v.inner, d);
  }
  const std::size_t len = v.extent;
  return tape_of(a).record(std::move(out), {a}, [axis, before, len](const Var&, const Var& g, std::size_t) {
    return slice(g, axis, before, len);
  });
}

Var add_bias(const Var& x, const Var& b) {
  const auto& X = x.value();
  const auto& B = b.value();
  if (B.rank() != 1 || X.rank() == 0 || X.shape().back() != B.dim(0)) {
    throw std::invalid_argument("add_bias: shape mismatch " + shape_string(X.shape()) + " + " +
                                shape_string(B.shape()));
  }
  Tensor out = X;
  const std::size_t f = B.dim(0);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += B[i % f];
  return tape_of(x).record(std::move(out), {x, b}, [](const Var&, const Var& g, std::size_t k) {
    return k == 0 ? g : sum_leading(g);
  });
}

Var sum_leading(const Var& x) {
  const auto& X = x.value();
  if (X.rank() == 0) throw std::invalid_argument("sum_leading of a scalar");
  const std::size_t f = X.shape().back();
  Tensor out(Shape{f}, 0.0);
  for (std::size_t i = 0; i < X.size(); ++i) out[i % f] += X[i];
  const Shape shape = X.shape();
  return tape_of(x).record(std::move(out), {x}, [shape](const Var&, const Var& g, std::size_t) {
    return tile_leading(g, shape);
  });
}

Var tile_leading(const Var& b, const Shape& shape) {
  const auto& B = b.value();
  if (B.rank() != 1 || shape.empty() || shape.back() != B.dim(0)) {
    throw std::invalid_argument("tile_leading: shape mismatch");
  }
  Tensor out(shape);
  const std::size_t f = B.dim(0);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = B[i % f];
  return tape_of(b).record(std::move(out), {b},
                           [](const Var&, const Var& g, std::size_t) { return sum_leading(g); });
}

Var gather(const Var& x, std::shared_ptr<const std::vector<std::size_t>> index, Shape shape) {
  if (shape_numel(shape) != index->size()) throw std::invalid_argument("gather: index/shape mismatch");
  Tensor out(shape);
  const auto& X = x.value();
  for (std::size_t i = 0; i < index->size(); ++i) out[i] = X[(*index)[i]];
  const Shape src = X.shape();
  return tape_of(x).record(std::move(out), {x}, [index, src](const Var&, const Var& g, std::size_t) {
    return scatter(g, index, src);
  });
}

Var scatter(const Var& g, std::shared_ptr<const std::vector<std::size_t>> index, Shape shape) {
  if (g.value().size() != index->size()) throw std::invalid_argument("scatter: index/shape mismatch");
  Tensor out(shape, 0.0);
  const auto& G = g.value();
  for (std::size_t i = 0; i < index->size(); ++i) out[(*index)[i]] += G[i];
  const Shape src = g.shape();
  return tape_of(g).record(std::move(out), {g}, [index, src](const Var&, const Var& gg, std::size_t) {
    return gather(gg, index, src);
  });
}

Var maxpool_time(const Var& x, std::size_t width) {
  const auto& X = x.value();
  if (X.rank() != 3) throw std::invalid_argument("maxpool_time expects (batch, time, channels)");
  if (width == 0) throw std::invalid_argument("maxpool width must be >= 1");
  const std::size_t b = X.dim(0), t = X.dim(1), c = X.dim(2);
  const std::size_t tout = (t + width - 1) / width;
  auto index = std::make_shared<std::vector<std::size_t>>(b * tout * c);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t w = 0; w < tout; ++w) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        std::size_t best = (i * t + w * width) * c + ch;
        for (std::size_t s = w * width + 1; s < std::min(t, (w + 1) * width); ++s) {
          const std::size_t idx = (i * t + s) * c + ch;
          if (X[idx] > X[best]) best = idx;
        }
        (*index)[(i * tout + w) * c + ch] = best;
      }
    }
  }
  return gather(x, index, Shape{b, tout, c});
}

Var column(const Var& x, std::size_t c) {
  if (x.value().rank() != 2) throw std::invalid_argument("column expects a rank-2 node");
  const std::size_t n = x.value().dim(0);
  return reshape(slice(x, 1, c, 1), Shape{n});
}

Var element(const Var& x, std::size_t flat) {
  if (flat >= x.value().size()) throw std::invalid_argument("element index out of range");
  auto index = std::make_shared<std::vector<std::size_t>>(1, flat);
  return gather(x, index, Shape{});
}

}  // namespace ad
}  // namespace pdemts
