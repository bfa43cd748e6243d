#include "pdemts/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace pdemts {

// ---------------------------------------------------------------- specs

LayerSpec LayerSpec::dense(std::size_t units, Activation act) {
  LayerSpec l;
  l.kind = Kind::Dense;
  l.units = units;
  l.activation = act;
  return l;
}

LayerSpec LayerSpec::conv(std::size_t filters, std::size_t kernel, Activation act) {
  LayerSpec l;
  l.kind = Kind::Conv1D;
  l.units = filters;
  l.kernel = kernel;
  l.activation = act;
  return l;
}

LayerSpec LayerSpec::causal(std::size_t filters, std::size_t kernel, std::size_t dilation,
                            Activation act) {
  LayerSpec l = conv(filters, kernel, act);
  l.kind = Kind::CausalConv1D;
  l.dilation = dilation;
  return l;
}

LayerSpec LayerSpec::maxpool(std::size_t width) {
  LayerSpec l;
  l.kind = Kind::MaxPool1D;
  l.width = width;
  return l;
}

LayerSpec LayerSpec::dropout(double rate) {
  LayerSpec l;
  l.kind = Kind::Dropout;
  l.rate = rate;
  return l;
}

LayerSpec LayerSpec::flatten() {
  LayerSpec l;
  l.kind = Kind::Flatten;
  return l;
}

LayerSpec LayerSpec::last_step() {
  LayerSpec l;
  l.kind = Kind::LastStep;
  return l;
}

LayerSpec LayerSpec::residual(std::vector<LayerSpec> body) {
  LayerSpec l;
  l.kind = Kind::Residual;
  l.block = std::move(body);
  return l;
}

namespace {

using Kind = LayerSpec::Kind;

NetworkSpec tcn_extraction(const std::string& name, std::size_t lag, std::size_t d, std::size_t p,
                           const std::vector<std::size_t>& dilations) {
  NetworkSpec s{name, lag, d, p, {}};
  const std::vector<std::size_t> filters = {64, 128, 128};
  for (std::size_t b = 0; b < filters.size(); ++b) {
    s.layers.push_back(LayerSpec::residual(
        {LayerSpec::causal(filters[b], 3, dilations[b]), LayerSpec::dropout(0.1)}));
  }
  s.layers.push_back(LayerSpec::last_step());
  s.layers.push_back(LayerSpec::dense(p));
  return s;
}

}  // namespace

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"cnn", "tcn1", "tcn2", "tcn_pred", "dense"};
  return names;
}

NetworkSpec make_preset(const std::string& name, std::size_t lag, std::size_t d, std::size_t p) {
  if (name == "cnn") {
    NetworkSpec s{name, lag, d, p, {}};
    for (std::size_t f : {64, 128, 128}) {
      s.layers.push_back(LayerSpec::conv(f, 3));
      s.layers.push_back(LayerSpec::maxpool(2));
      s.layers.push_back(LayerSpec::dropout(0.1));
    }
    s.layers.push_back(LayerSpec::flatten());
    s.layers.push_back(LayerSpec::dense(p));
    return s;
  }
  if (name == "tcn1") return tcn_extraction(name, lag, d, p, {1, 1, 1});
  if (name == "tcn2") return tcn_extraction(name, lag, d, p, {1, 2, 4});
  if (name == "tcn_pred") {
    NetworkSpec s{name, lag, d, p, {}};
    for (std::size_t r : {1, 2, 4, 8}) s.layers.push_back(LayerSpec::residual({LayerSpec::causal(64, 2, r)}));
    s.layers.push_back(LayerSpec::last_step());
    s.layers.push_back(LayerSpec::dense(p));
    return s;
  }
  if (name == "dense") {
    NetworkSpec s{name, lag, d, p, {}};
    s.layers = {LayerSpec::flatten(), LayerSpec::dense(10, Activation::Tanh),
                LayerSpec::dense(10, Activation::Tanh), LayerSpec::dense(p)};
    return s;
  }
  std::string valid;
  for (const auto& n : preset_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw std::invalid_argument("unknown network preset '" + name + "' (valid: " + valid + ")");
}

namespace {

std::size_t causal_span(const std::vector<LayerSpec>& layers) {
  std::size_t span = 0;
  for (const auto& l : layers) {
    if (l.kind == Kind::CausalConv1D || l.kind == Kind::Conv1D) span += (l.kernel - 1) * l.dilation;
    if (l.kind == Kind::Residual) span += causal_span(l.block);
  }
  return span;
}

}  // namespace

std::size_t receptive_field(const NetworkSpec& spec) { return 1 + causal_span(spec.layers); }

// ---------------------------------------------------------------- parameters

namespace {

struct Geometry {
  bool seq = true;  // (T, C) when true, (F) otherwise
  std::size_t t = 0;
  std::size_t c = 0;
};

std::string geometry_string(const Geometry& g) {
  return g.seq ? "(T=" + std::to_string(g.t) + ", C=" + std::to_string(g.c) + ")"
               : "(F=" + std::to_string(g.c) + ")";
}

struct ParamSink {
  std::vector<Tensor>* params;
  std::vector<std::string>* names;
  std::mt19937_64* rng;

  void add(const std::string& name, Shape shape, double bound) {
    Tensor t(std::move(shape), 0.0);
    if (bound > 0) {
      std::uniform_real_distribution<double> u(-bound, bound);
      for (std::size_t i = 0; i < t.size(); ++i) t[i] = u(*rng);
    }
    params->push_back(std::move(t));
    names->push_back(name);
  }
};

double init_bound(Activation act, std::size_t fan_in, std::size_t fan_out) {
  if (act == Activation::ReLU) return std::sqrt(6.0 / static_cast<double>(fan_in));
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

Geometry build_layers(const std::vector<LayerSpec>& layers, Geometry g, ParamSink& sink,
                      const std::string& prefix) {
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const auto& l = layers[li];
    const std::string name = prefix + std::to_string(li);
    switch (l.kind) {
      case Kind::Dense: {
        if (l.units == 0) throw std::invalid_argument("dense layer needs units > 0");
        sink.add(name + ".W", {g.c, l.units}, init_bound(l.activation, g.c, l.units));
        sink.add(name + ".b", {l.units}, 0.0);
        g.c = l.units;
        break;
      }
      case Kind::Conv1D:
      case Kind::CausalConv1D: {
        if (!g.seq) throw std::invalid_argument("convolution after flattening at layer " + name);
        if (l.kernel == 0 || l.dilation == 0 || l.units == 0) {
          throw std::invalid_argument("convolution needs kernel, dilation, filters >= 1");
        }
        const std::size_t reach = (l.kernel - 1) * l.dilation;
        if (l.kind == Kind::Conv1D) {
          if (g.t <= reach) throw std::invalid_argument("valid convolution longer than its input at " + name);
          g.t -= reach;
        }
        sink.add(name + ".W", {l.kernel * g.c, l.units},
                 init_bound(l.activation, l.kernel * g.c, l.units));
        sink.add(name + ".b", {l.units}, 0.0);
        g.c = l.units;
        break;
      }
      case Kind::MaxPool1D:
        if (!g.seq) throw std::invalid_argument("max-pool after flattening at layer " + name);
        if (l.width == 0) throw std::invalid_argument("max-pool width must be >= 1");
        g.t = (g.t + l.width - 1) / l.width;
        break;
      case Kind::Dropout:
        if (l.rate < 0 || l.rate >= 1) throw std::invalid_argument("dropout rate must be in [0, 1)");
        break;
      case Kind::Flatten:
        if (g.seq) g = Geometry{false, 0, g.t * g.c};
        break;
      case Kind::LastStep:
        if (!g.seq) throw std::invalid_argument("last-step after flattening at layer " + name);
        g = Geometry{false, 0, g.c};
        break;
      case Kind::Residual: {
        if (!g.seq) throw std::invalid_argument("residual block needs a sequence input");
        const Geometry in = g;
        const Geometry out = build_layers(l.block, g, sink, name + ".");
        if (!out.seq || out.t != in.t) {
          throw std::invalid_argument("residual body at " + name + " maps " + geometry_string(in) +
                                      " to " + geometry_string(out) + "; time length must be kept");
        }
        sink.add(name + ".Wres", {in.c, out.c}, init_bound(Activation::Linear, in.c, out.c));
        g = out;
        break;
      }
    }
  }
  return g;
}

}  // namespace

Network::Network(NetworkSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  std::mt19937_64 rng(seed);
  ParamSink sink{&params_, &names_, &rng};
  const Geometry out = build_layers(spec_.layers, Geometry{true, spec_.lag, spec_.inputs}, sink, "");
  if (out.seq || out.c != spec_.outputs) {
    throw std::invalid_argument("network '" + spec_.name + "' ends in " + geometry_string(out) +
                                ", expected (F=" + std::to_string(spec_.outputs) + ")");
  }
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.size();
  return n;
}

// ---------------------------------------------------------------- forward

namespace {

Var activate(const Var& x, Activation act) {
  switch (act) {
    case Activation::ReLU:
      return ad::relu(x);
    case Activation::Tanh:
      return ad::tanh(x);
    default:
      return x;
  }
}

// Applies a (C_in, C_out) matrix to the last axis of a rank-2 or rank-3 node.
Var apply_last_axis(const Var& x, const Var& w) {
  const Shape& s = x.shape();
  if (s.size() == 2) return ad::matmul(x, w);
  const std::size_t b = s[0], t = s[1], c = s[2];
  auto y = ad::matmul(ad::reshape(x, Shape{b * t, c}), w);
  return ad::reshape(y, Shape{b, t, w.shape()[1]});
}

// Valid dilated convolution of (B, T, C) via an im2col gather and one matmul.
Var conv_valid(const Var& x, const Var& w, const Var& bias, std::size_t kernel, std::size_t dilation) {
  const std::size_t b = x.shape()[0], t = x.shape()[1], c = x.shape()[2];
  const std::size_t len = t - (kernel - 1) * dilation;
  auto index = std::make_shared<std::vector<std::size_t>>(b * len * kernel * c);
  std::size_t k = 0;
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t s = 0; s < len; ++s)
      for (std::size_t j = 0; j < kernel; ++j)
        for (std::size_t ch = 0; ch < c; ++ch) (*index)[k++] = (i * t + s + j * dilation) * c + ch;
  auto cols = ad::gather(x, index, Shape{b * len, kernel * c});
  auto y = ad::add_bias(ad::matmul(cols, w), bias);
  return ad::reshape(y, Shape{b, len, w.shape()[1]});
}

struct ForwardCtx {
  const std::vector<Var>* params;
  std::size_t next = 0;
  Mode mode;
  std::mt19937_64* rng;

  const Var& take() { return (*params)[next++]; }
};

Var run_layers(const std::vector<LayerSpec>& layers, Var h, ForwardCtx& ctx) {
  Tape& tape = h.tape();
  for (const auto& l : layers) {
    switch (l.kind) {
      case Kind::Dense: {
        const Var& w = ctx.take();
        const Var& b = ctx.take();
        h = activate(ad::add_bias(apply_last_axis(h, w), b), l.activation);
        break;
      }
      case Kind::Conv1D:
      case Kind::CausalConv1D: {
        const Var& w = ctx.take();
        const Var& b = ctx.take();
        if (l.kind == Kind::CausalConv1D && l.kernel > 1) h = ad::pad(h, 1, (l.kernel - 1) * l.dilation, 0);
        h = activate(conv_valid(h, w, b, l.kernel, l.dilation), l.activation);
        break;
      }
      case Kind::MaxPool1D:
        h = ad::maxpool_time(h, l.width);
        break;
      case Kind::Dropout: {
        if (ctx.mode != Mode::Train || l.rate == 0.0) break;
        if (!ctx.rng) throw std::logic_error("dropout in training mode needs an RNG");
        std::bernoulli_distribution keep(1.0 - l.rate);
        Tensor mask(h.shape());
        const double scale = 1.0 / (1.0 - l.rate);
        for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = keep(*ctx.rng) ? scale : 0.0;
        h = ad::mul(h, tape.constant(std::move(mask)));
        break;
      }
      case Kind::Flatten:
        if (h.shape().size() == 3) h = ad::reshape(h, Shape{h.shape()[0], h.shape()[1] * h.shape()[2]});
        break;
      case Kind::LastStep: {
        const std::size_t b = h.shape()[0], t = h.shape()[1], c = h.shape()[2];
        h = ad::reshape(ad::slice(h, 1, t - 1, 1), Shape{b, c});
        break;
      }
      case Kind::Residual: {
        Var body = run_layers(l.block, h, ctx);
        const Var& wres = ctx.take();
        h = ad::add(body, apply_last_axis(h, wres));
        break;
      }
    }
  }
  return h;
}

}  // namespace

Var Network::forward(Tape& tape, const Var& x, const std::vector<Var>& params, Mode mode,
                     std::mt19937_64* rng) const {
  (void)tape;
  const Shape& s = x.shape();
  if (s.size() != 3 || s[1] != spec_.lag || s[2] != spec_.inputs) {
    throw std::invalid_argument("network '" + spec_.name + "' expects (batch, " +
                                std::to_string(spec_.lag) + ", " + std::to_string(spec_.inputs) +
                                "), got " + shape_string(s));
  }
  if (params.size() != params_.size()) throw std::invalid_argument("wrong number of parameter nodes");
  ForwardCtx ctx{&params, 0, mode, rng};
  return run_layers(spec_.layers, x, ctx);
}

Tensor Network::predict(const Tensor& x, std::size_t batch) const {
  const std::size_t n = x.dim(0);
  const std::size_t row = x.size() / std::max<std::size_t>(n, 1);
  Tensor out({n, spec_.outputs});
  for (std::size_t b0 = 0; b0 < n; b0 += batch) {
    const std::size_t nb = std::min(batch, n - b0);
    Tape tape;
    std::vector<Var> p;
    for (const auto& t : params_) p.push_back(tape.constant(t));
    Tensor xb({nb, x.dim(1), x.dim(2)});
    std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>(b0 * row), nb * row, xb.data().begin());
    auto y = forward(tape, tape.constant(std::move(xb)), p, Mode::Eval);
    std::copy(y.value().data().begin(), y.value().data().end(),
              out.data().begin() + static_cast<std::ptrdiff_t>(b0 * spec_.outputs));
  }
  return out;
}

Tensor Network::predict(const LagWindowSet& windows, std::size_t batch) const {
  Tensor out({windows.size(), spec_.outputs});
  for (std::size_t b0 = 0; b0 < windows.size(); b0 += batch) {
    const std::size_t nb = std::min(batch, windows.size() - b0);
    auto y = predict(windows.batch_x(b0, nb), nb);
    std::copy(y.data().begin(), y.data().end(),
              out.data().begin() + static_cast<std::ptrdiff_t>(b0 * spec_.outputs));
  }
  return out;
}

// ---------------------------------------------------------------- checkpoints

void Network::save(std::ostream& out) const {
  out << "pdemts-checkpoint 1\n";
  out << "network " << spec_.name << ' ' << spec_.lag << ' ' << spec_.inputs << ' ' << spec_.outputs << '\n';
  out << "tensors " << params_.size() << '\n';
  char buf[40];
  for (std::size_t k = 0; k < params_.size(); ++k) {
    const auto& t = params_[k];
    out << names_[k] << ' ' << t.rank();
    for (auto d : t.shape()) out << ' ' << d;
    out << '\n';
    for (std::size_t i = 0; i < t.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", t[i]);
      out << buf << (i + 1 == t.size() ? '\n' : ' ');
    }
    if (t.size() == 0) out << '\n';
  }
}

void Network::load(std::istream& in) {
  std::string magic, word, name;
  int version = 0;
  in >> magic >> version;
  if (magic != "pdemts-checkpoint" || version != 1) throw std::runtime_error("not a checkpoint file");
  std::size_t lag = 0, d = 0, p = 0, count = 0;
  in >> word >> name >> lag >> d >> p;
  if (name != spec_.name || lag != spec_.lag || d != spec_.inputs || p != spec_.outputs) {
    throw std::runtime_error("checkpoint is for network " + name + ", not " + spec_.name);
  }
  in >> word >> count;
  if (count != params_.size()) throw std::runtime_error("checkpoint tensor count mismatch");
  for (std::size_t k = 0; k < count; ++k) {
    std::size_t rank = 0;
    in >> name >> rank;
    Shape shape(rank);
    for (auto& s : shape) in >> s;
    if (name != names_[k] || shape != params_[k].shape()) {
      throw std::runtime_error("checkpoint tensor " + name + " does not match " + names_[k]);
    }
    for (std::size_t i = 0; i < params_[k].size(); ++i) in >> params_[k][i];
  }
  if (!in) throw std::runtime_error("truncated checkpoint");
}

// ---------------------------------------------------------------- input gradients

namespace {

Tensor input_grads(const Network& net, const Tensor& x, bool last_only) {
  const auto& s = net.spec();
  Tape tape;
  std::vector<Var> p;
  for (const auto& t : net.params()) p.push_back(tape.constant(t));
  auto xv = tape.variable(x);
  auto y = net.forward(tape, xv, p, Mode::Eval);
  const std::size_t n = x.dim(0), T = s.lag, d = s.inputs, P = s.outputs;
  Tensor out = last_only ? Tensor({n, P * d}) : Tensor({n, T, P * d});
  for (std::size_t j = 0; j < P; ++j) {
    auto g = tape.grad(ad::sum(ad::column(y, j)), std::vector<Var>{xv})[0].value();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t t = last_only ? T - 1 : 0; t < T; ++t) {
        for (std::size_t k = 0; k < d; ++k) {
          const double v = g[(i * T + t) * d + k];
          if (last_only) {
            out[i * P * d + j * d + k] = v;
          } else {
            out[(i * T + t) * P * d + j * d + k] = v;
          }
        }
      }
    }
  }
  return out;
}

}  // namespace

Tensor grad_input(const Network& net, const Tensor& x) { return input_grads(net, x, false); }

Tensor grad_input_last(const Network& net, const Tensor& x, std::size_t batch) {
  const std::size_t n = x.dim(0);
  const std::size_t width = net.spec().outputs * net.spec().inputs;
  const std::size_t row = x.size() / std::max<std::size_t>(n, 1);
  Tensor out({n, width});
  for (std::size_t b0 = 0; b0 < n; b0 += batch) {
    const std::size_t nb = std::min(batch, n - b0);
    Tensor xb({nb, x.dim(1), x.dim(2)});
    std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>(b0 * row), nb * row, xb.data().begin());
    auto g = input_grads(net, xb, true);
    std::copy(g.data().begin(), g.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(b0 * width));
  }
  return out;
}

// ---------------------------------------------------------------- Adam

void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state,
               const AdamConfig& h) {
  if (grads.size() != params.size()) throw std::invalid_argument("adam: gradient count mismatch");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.shape(), 0.0);
      state.v.emplace_back(p.shape(), 0.0);
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    auto& m = state.m[k];
    auto& v = state.v[k];
    const auto& g = grads[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
      v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] -= h.lr * mhat / (std::sqrt(vhat) + h.eps);
    }
  }
}

// ---------------------------------------------------------------- training

LossFn mse_loss() {
  return [](Tape& tape, const Network& net, const std::vector<Var>& params, const Tensor& x,
            const Tensor& y, Mode mode, std::mt19937_64& rng) {
    auto pred = net.forward(tape, tape.constant(x), params, mode, &rng);
    auto loss = ad::mean(ad::square(ad::sub(pred, tape.constant(y))));
    const double v = loss.value().item();
    return BatchLoss{loss, v, {}};
  };
}

void TrainedNet::write_history(std::ostream& out) const {
  out << "epoch,train_loss,val_loss\n";
  char buf[96];
  for (const auto& e : history) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", e.epoch, e.train_loss, e.val_loss);
    out << buf;
  }
}

namespace {

struct EpochStats {
  double loss = 0.0;
  std::vector<double> components;
};

EpochStats evaluate_set(const Network& net, const LagWindowSet& set, std::size_t batch,
                        const LossFn& loss, std::mt19937_64& rng) {
  EpochStats st;
  if (set.size() == 0) return st;
  for (std::size_t b0 = 0; b0 < set.size(); b0 += batch) {
    const std::size_t nb = std::min(batch, set.size() - b0);
    Tape tape;
    std::vector<Var> p;
    for (const auto& t : net.params()) p.push_back(tape.constant(t));
    auto bl = loss(tape, net, p, set.batch_x(b0, nb), set.batch_y(b0, nb), Mode::Eval, rng);
    st.loss += bl.per_sample * static_cast<double>(nb);
  }
  st.loss /= static_cast<double>(set.size());
  return st;
}

}  // namespace

TrainedNet train(Network net, const LagWindowSet& train_set, const LagWindowSet& val_set,
                 const TrainConfig& cfg, const LossFn& loss) {
  if (cfg.adam.lr <= 0) throw std::invalid_argument("learning rate must be positive");
  if (cfg.patience < 1) throw std::invalid_argument("patience must be >= 1");
  if (cfg.batch_size == 0) throw std::invalid_argument("batch size must be positive");
  TrainedNet result;
  const int epochs = cfg.early_stopping ? cfg.max_epochs : cfg.epochs;
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  AdamState state;
  std::vector<Tensor> best = net.params();
  double best_val = std::numeric_limits<double>::infinity();
  int waited = 0;

  for (int epoch = 1; epoch <= epochs; ++epoch) {
    if (cfg.shuffle) std::shuffle(order.begin(), order.end(), rng);
    EpochRecord rec;
    rec.epoch = epoch;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
      const std::size_t nb = std::min(cfg.batch_size, order.size() - b0);
      std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(b0),
                                   order.begin() + static_cast<std::ptrdiff_t>(b0 + nb));
      Tape tape;
      std::vector<Var> p;
      for (const auto& t : net.params()) p.push_back(tape.variable(t));
      auto bl = loss(tape, net, p, train_set.gather_x(idx), train_set.gather_y(idx), Mode::Train, rng);
      if (!std::isfinite(bl.total.value().item())) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(b0 / cfg.batch_size));
      }
      auto grads = tape.grad_values(bl.total, p);
      adam_step(net.params(), grads, state, cfg.adam);
      rec.train_loss += bl.per_sample * static_cast<double>(nb);
      if (rec.components.size() < bl.components.size()) rec.components.resize(bl.components.size(), 0.0);
      for (std::size_t c = 0; c < bl.components.size(); ++c) {
        rec.components[c] += bl.components[c] * static_cast<double>(nb);
      }
    }
    if (!order.empty()) {
      rec.train_loss /= static_cast<double>(order.size());
      for (auto& c : rec.components) c /= static_cast<double>(order.size());
    }
    rec.val_loss = evaluate_set(net, val_set, std::max<std::size_t>(cfg.batch_size, 256), loss, rng).loss;
    result.history.push_back(rec);

    if (cfg.early_stopping && val_set.size() > 0) {
      if (rec.val_loss < best_val) {
        best_val = rec.val_loss;
        best = net.params();
        result.best_epoch = epoch;
        waited = 0;
      } else if (++waited >= cfg.patience) {
        result.stopped_early = true;
        break;
      }
    } else {
      result.best_epoch = epoch;
    }
  }
  if (cfg.early_stopping && result.best_epoch > 0) net.params() = best;
  result.net = std::move(net);
  return result;
}

}  // namespace pdemts
