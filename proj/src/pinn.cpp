#include "pdemts/pinn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>

namespace pdemts {

namespace {

std::vector<PdeSpec> active(const std::vector<PdeSpec>& pdes) {
  std::vector<PdeSpec> out;
  for (const auto& p : pdes)
    if (p.mask) out.push_back(p);
  return out;
}

}  // namespace

Var physics_loss(Tape& tape, const Var& x, const Var& pred, const std::vector<PdeSpec>& pdes, bool create_graph) {
  const auto& xs = x.value().shape();
  if (xs.size() != 3) throw std::invalid_argument("physics loss expects (n, T, d) inputs");
  const std::size_t n = xs[0], T = xs[1], d = xs[2];
  const std::size_t p = pred.value().dim(1);
  const auto used = active(pdes);
  if (used.empty()) return tape.constant(Tensor::scalar(0.0));

  auto check = [&](const Symbol& s) {
    const bool ok = s.kind == SymbolKind::State        ? s.input >= 1 && static_cast<std::size_t>(s.input) <= d
                    : s.kind == SymbolKind::Target     ? s.target >= 1 && static_cast<std::size_t>(s.target) <= p
                                                       : s.target >= 1 && static_cast<std::size_t>(s.target) <= p &&
                                                         s.input >= 1 && static_cast<std::size_t>(s.input) <= d;
    if (!ok) throw BindingError(s);
  };
  for (const auto& pde : used) {
    if (pde.lhs.kind != SymbolKind::Derivative) throw std::invalid_argument("PDE lhs must be a derivative symbol");
    check(pde.lhs);
    for (const auto& s : collect_symbols(pde.rhs)) check(s);
  }

  const Var x_flat = ad::reshape(x, Shape{n, T * d});
  const std::size_t last = (T - 1) * d;
  std::map<int, Var> grads;
  auto derivative = [&](int j, int k) {
    auto it = grads.find(j);
    if (it == grads.end()) {
      const Var out = ad::sum(ad::column(pred, static_cast<std::size_t>(j - 1)));
      const std::vector<Var> wrt{x};
      const Var g = tape.grad(out, wrt, create_graph)[0];
      it = grads.emplace(j, ad::reshape(g, Shape{n, T * d})).first;
    }
    return ad::column(it->second, last + static_cast<std::size_t>(k - 1));
  };

  Var total;
  for (const auto& pde : used) {
    std::map<Symbol, Var> bindings;
    for (const auto& s : collect_symbols(pde.rhs)) {
      switch (s.kind) {
        case SymbolKind::State:
          bindings.emplace(s, tape.constant(ad::column(x_flat, last + static_cast<std::size_t>(s.input - 1)).value()));
          break;
        case SymbolKind::Target:
          bindings.emplace(s, ad::column(pred, static_cast<std::size_t>(s.target - 1)));
          break;
        case SymbolKind::Derivative:
          bindings.emplace(s, derivative(s.target, s.input));
          break;
      }
    }
    const Var f = evaluate_on_tape(pde.rhs, bindings, tape, Shape{n});
    const Var r = ad::sum(ad::square(ad::sub(derivative(pde.lhs.target, pde.lhs.input), f)));
    total = total.valid() ? ad::add(total, r) : r;
  }
  return total;
}

PinnLoss total_loss(Tape& tape, const Network& net, const std::vector<Var>& params, const Tensor& x, const Tensor& y,
                    const std::vector<PdeSpec>& pdes, Mode mode, std::mt19937_64* rng, double physics_weight) {
  const bool physics = !active(pdes).empty();
  const Var xv = physics ? tape.variable(x) : tape.constant(x);
  const Var pred = net.forward(tape, xv, params, mode, rng);
  const Var data = ad::mean(ad::square(ad::sub(pred, tape.constant(y))));
  if (!physics) return {data, data, tape.constant(Tensor::scalar(0.0))};
  const Var phys = physics_loss(tape, xv, pred, pdes, true);
  return {ad::add(data, ad::scale(phys, physics_weight)), data, phys};
}

LossFn pinn_loss(std::vector<PdeSpec> pdes, double physics_weight) {
  return [pdes = std::move(pdes), physics_weight](Tape& tape, const Network& net, const std::vector<Var>& params,
                                                  const Tensor& x, const Tensor& y, Mode mode, std::mt19937_64& rng) {
    auto l = total_loss(tape, net, params, x, y, pdes, mode, &rng, physics_weight);
    const double n = static_cast<double>(x.dim(0));
    const double ld = l.data.value().item();
    const double lp = l.physics.value().item() / n;
    return BatchLoss{l.total, ld + physics_weight * lp, {ld, lp}};
  };
}

void PinnResult::write_history(std::ostream& out) const {
  out << "epoch,L_D,L_P,val_L_T\n";
  char buf[128];
  for (const auto& e : trained.history) {
    const double ld = e.components.size() > 0 ? e.components[0] : e.train_loss;
    const double lp = e.components.size() > 1 ? e.components[1] : 0.0;
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", e.epoch, ld, lp, e.val_loss);
    out << buf;
  }
}

PinnResult train_pinn(const PinnConfig& config, const LagWindowSet& train_set, const LagWindowSet& val_set) {
  if (!std::isfinite(config.physics_weight) || config.physics_weight < 0) {
    throw std::invalid_argument("physics weight must be finite and >= 0");
  }
  Network net(config.net, config.train.seed);
  return {train(std::move(net), train_set, val_set, config.train, pinn_loss(config.pdes, config.physics_weight))};
}

LossSummary evaluate_losses(const Network& net, const LagWindowSet& set, const std::vector<PdeSpec>& pdes,
                            std::size_t batch) {
  LossSummary s;
  if (set.size() == 0) return s;
  const bool physics = !active(pdes).empty();
  for (std::size_t b0 = 0; b0 < set.size(); b0 += batch) {
    const std::size_t nb = std::min(batch, set.size() - b0);
    Tape tape;
    std::vector<Var> p;
    for (const auto& t : net.params()) p.push_back(tape.constant(t));
    const Var x = tape.variable(set.batch_x(b0, nb));
    const Var pred = net.forward(tape, x, p, Mode::Eval);
    s.data += ad::sum(ad::square(ad::sub(pred, tape.constant(set.batch_y(b0, nb))))).value().item();
    if (physics) s.physics += physics_loss(tape, x, pred, pdes, false).value().item();
  }
  s.data /= static_cast<double>(set.size() * set.p());
  s.physics /= static_cast<double>(set.size());
  return s;
}

}  // namespace pdemts
