#include "pdemts/symreg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <random>
#include <set>
#include <stdexcept>

namespace pdemts {

void GpConfig::validate() const {
  for (double p : {p_crossover, p_subtree, p_hoist, p_point, point_rate}) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("GP probabilities must lie in [0, 1]");
  }
  if (p_crossover + p_subtree + p_hoist + p_point > 1.0 + 1e-12) {
    throw std::invalid_argument("crossover and mutation probabilities sum above 1");
  }
  if (max_depth < 1 || max_depth > 10) throw std::invalid_argument("max depth must lie in [1, 10]");
  if (init_min_depth < 1 || init_min_depth > init_max_depth || init_max_depth > max_depth) {
    throw std::invalid_argument("initial depth range must satisfy 1 <= min <= max <= max depth");
  }
  if (population < 2) throw std::invalid_argument("population must hold at least 2 individuals");
  if (tournament < 1) throw std::invalid_argument("tournament size must be >= 1");
  if (generations < 0) throw std::invalid_argument("generations must be >= 0");
  if (primitives.empty()) throw std::invalid_argument("primitive set is empty");
  for (auto op : primitives) {
    if (!is_unary(op) && !is_binary(op)) throw std::invalid_argument("primitive set may hold only functions");
    if (op == ExprOp::Pow) throw std::invalid_argument("pow is not a GP primitive");
  }
  if (!(const_low <= const_high)) throw std::invalid_argument("constant range is empty");
}

namespace {

using Rng = std::mt19937_64;

Expr rebuild(const Expr& e, std::vector<Expr> kids) {
  if (is_unary(e.op())) return Expr::unary(e.op(), std::move(kids[0]));
  if (e.op() == ExprOp::Pow) return Expr::pow(std::move(kids[0]), e.exponent());
  return Expr::binary(e.op(), std::move(kids[0]), std::move(kids[1]));
}

// Pre-order node access.
const Expr& node_at(const Expr& e, std::size_t idx) {
  if (idx == 0) return e;
  --idx;
  for (std::size_t c = 0; c < e.arity(); ++c) {
    const auto& kid = e.child(c);
    if (idx < kid.size()) return node_at(kid, idx);
    idx -= kid.size();
  }
  throw std::out_of_range("node index");
}

Expr replace_at(const Expr& e, std::size_t idx, const Expr& sub) {
  if (idx == 0) return sub;
  --idx;
  std::vector<Expr> kids;
  for (std::size_t c = 0; c < e.arity(); ++c) kids.push_back(e.child(c));
  for (auto& kid : kids) {
    if (idx < kid.size()) {
      kid = replace_at(kid, idx, sub);
      return rebuild(e, std::move(kids));
    }
    idx -= kid.size();
  }
  throw std::out_of_range("node index");
}

class Engine {
 public:
  Engine(const ColumnTable& data, const std::vector<Symbol>& terminals, std::span<const double> target,
         const GpConfig& cfg)
      : data_(data), terminals_(terminals), target_(target), cfg_(cfg), rng_(cfg.seed) {}

  Individual score(Expr e) const {
    Individual ind;
    ind.size = e.size();
    const auto pred = evaluate_batch(e, data_);
    double sse = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double r = target_[i] - pred[i];
      sse += r * r;
    }
    ind.mse = sse / static_cast<double>(pred.size());
    if (!std::isfinite(ind.mse)) ind.mse = std::numeric_limits<double>::max() / 4;
    ind.fitness = ind.mse + cfg_.parsimony * static_cast<double>(ind.size);
    ind.expr = std::move(e);
    return ind;
  }

  Expr terminal() {
    std::uniform_int_distribution<std::size_t> pick(0, terminals_.size());
    const std::size_t k = pick(rng_);
    if (k == terminals_.size()) {
      std::uniform_real_distribution<double> u(cfg_.const_low, cfg_.const_high);
      return Expr::constant(u(rng_));
    }
    return Expr::variable(terminals_[k]);
  }

  ExprOp primitive() {
    std::uniform_int_distribution<std::size_t> pick(0, cfg_.primitives.size() - 1);
    return cfg_.primitives[pick(rng_)];
  }

  // Full trees put functions at every level above `depth`; grow trees stop early at random.
  Expr random_tree(std::size_t depth, bool full) {
    if (depth <= 1) return terminal();
    if (!full) {
      const double share = static_cast<double>(terminals_.size() + 1) /
                           static_cast<double>(terminals_.size() + 1 + cfg_.primitives.size());
      if (std::uniform_real_distribution<double>(0, 1)(rng_) < share) return terminal();
    }
    const ExprOp op = primitive();
    if (is_unary(op)) return Expr::unary(op, random_tree(depth - 1, full));
    auto left = random_tree(depth - 1, full);
    return Expr::binary(op, std::move(left), random_tree(depth - 1, full));
  }

  std::vector<Individual> initial_population() {
    std::vector<Individual> pop;
    const std::size_t span = cfg_.init_max_depth - cfg_.init_min_depth + 1;
    for (std::size_t i = 0; i < cfg_.population; ++i) {
      const std::size_t depth = cfg_.init_min_depth + i % span;
      pop.push_back(score(random_tree(depth, (i / span) % 2 == 0)));
    }
    return pop;
  }

  const Individual& tournament(const std::vector<Individual>& pop) {
    std::uniform_int_distribution<std::size_t> pick(0, pop.size() - 1);
    const Individual* best = &pop[pick(rng_)];
    for (std::size_t k = 1; k < cfg_.tournament; ++k) {
      const Individual& c = pop[pick(rng_)];
      if (c.fitness < best->fitness) best = &c;
    }
    return *best;
  }

  std::size_t random_node(const Expr& e) {
    return std::uniform_int_distribution<std::size_t>(0, e.size() - 1)(rng_);
  }

  Expr crossover(const Expr& parent, const Expr& donor) {
    return replace_at(parent, random_node(parent), node_at(donor, random_node(donor)));
  }

  Expr hoist(const Expr& parent) {
    const std::size_t at = random_node(parent);
    const Expr& sub = node_at(parent, at);
    return replace_at(parent, at, node_at(sub, random_node(sub)));
  }

  Expr point(const Expr& e) {
    std::vector<Expr> kids;
    for (std::size_t c = 0; c < e.arity(); ++c) kids.push_back(point(e.child(c)));
    const bool hit = std::uniform_real_distribution<double>(0, 1)(rng_) < cfg_.point_rate;
    if (e.arity() == 0) return hit ? terminal() : e;
    ExprOp op = e.op();
    if (hit && op != ExprOp::Pow) {
      std::vector<ExprOp> same;
      for (auto p : cfg_.primitives)
        if (is_unary(p) == is_unary(op)) same.push_back(p);
      op = same[std::uniform_int_distribution<std::size_t>(0, same.size() - 1)(rng_)];
    }
    if (is_unary(op)) return Expr::unary(op, std::move(kids[0]));
    if (op == ExprOp::Pow) return Expr::pow(std::move(kids[0]), e.exponent());
    return Expr::binary(op, std::move(kids[0]), std::move(kids[1]));
  }

  Individual offspring(const std::vector<Individual>& pop) {
    const Individual& parent = tournament(pop);
    const double u = std::uniform_real_distribution<double>(0, 1)(rng_);
    Expr child = parent.expr;
    double edge = cfg_.p_crossover;
    if (u < edge) {
      child = crossover(parent.expr, tournament(pop).expr);
    } else if (u < (edge += cfg_.p_subtree)) {
      child = crossover(parent.expr, random_tree(cfg_.init_max_depth, false));
    } else if (u < (edge += cfg_.p_hoist)) {
      child = hoist(parent.expr);
    } else if (u < (edge += cfg_.p_point)) {
      child = point(parent.expr);
    } else {
      return parent;
    }
    if (child.depth() > cfg_.max_depth) return parent;
    return score(std::move(child));
  }

  Rng& rng() { return rng_; }

 private:
  const ColumnTable& data_;
  const std::vector<Symbol>& terminals_;
  std::span<const double> target_;
  const GpConfig& cfg_;
  Rng rng_;
};

const Individual& fittest(const std::vector<Individual>& pop) {
  return *std::min_element(pop.begin(), pop.end(),
                           [](const Individual& a, const Individual& b) { return a.fitness < b.fitness; });
}

void offer(std::vector<Individual>& hof, std::vector<std::string>& texts, const Individual& ind, std::size_t cap) {
  if (cap == 0) return;
  const std::string text = to_text(ind.expr);
  if (std::find(texts.begin(), texts.end(), text) != texts.end()) return;
  if (hof.size() == cap && !(ind.fitness < hof.back().fitness)) return;
  auto it = std::upper_bound(hof.begin(), hof.end(), ind.fitness,
                             [](double f, const Individual& x) { return f < x.fitness; });
  const auto pos = it - hof.begin();
  hof.insert(it, ind);
  texts.insert(texts.begin() + pos, text);
  if (hof.size() > cap) {
    hof.pop_back();
    texts.pop_back();
  }
}

}  // namespace

GpResult evolve(const ColumnTable& data, const std::vector<Symbol>& terminals, std::span<const double> target,
                const GpConfig& cfg) {
  cfg.validate();
  if (terminals.empty()) throw std::invalid_argument("symbolic regression needs at least one feature");
  if (data.rows() < 10) throw std::invalid_argument("symbolic regression needs at least 10 rows");
  if (target.size() != data.rows()) throw std::invalid_argument("target length differs from the feature rows");
  for (const auto& s : terminals) {
    if (!data.contains(s)) throw std::invalid_argument("feature " + s.text() + " missing from the data");
  }
  Engine engine(data, terminals, target, cfg);
  GpResult result;
  std::vector<std::string> texts;
  auto pop = engine.initial_population();
  result.best = fittest(pop);
  result.best_fitness.push_back(result.best.fitness);
  for (const auto& ind : pop) offer(result.hall_of_fame, texts, ind, cfg.hall_of_fame);
  result.initial_only = cfg.generations == 0;

  for (int g = 0; g < cfg.generations; ++g) {
    std::vector<Individual> next;
    next.reserve(pop.size());
    next.push_back(fittest(pop));
    while (next.size() < pop.size()) next.push_back(engine.offspring(pop));
    pop = std::move(next);
    const auto& gen_best = fittest(pop);
    if (gen_best.fitness < result.best.fitness) result.best = gen_best;
    result.best_fitness.push_back(result.best.fitness);
    for (const auto& ind : pop) offer(result.hall_of_fame, texts, ind, cfg.hall_of_fame);
  }
  return result;
}

void GpResult::write_hall_of_fame(std::ostream& out) const {
  char buf[128];
  for (std::size_t r = 0; r < hall_of_fame.size(); ++r) {
    const auto& ind = hall_of_fame[r];
    std::snprintf(buf, sizeof(buf), " # rank=%zu fitness=%.17g mse=%.17g size=%zu", r + 1, ind.fitness, ind.mse,
                  ind.size);
    out << to_text(ind.expr) << buf << '\n';
  }
}

namespace {

bool is_const(const Expr& e, double v) { return e.op() == ExprOp::Constant && e.value() == v; }

}  // namespace

Expr simplify_neutral(const Expr& e) {
  if (e.arity() == 0) return e;
  std::vector<Expr> kids;
  for (std::size_t c = 0; c < e.arity(); ++c) kids.push_back(simplify_neutral(e.child(c)));
  switch (e.op()) {
    case ExprOp::Add:
      if (is_const(kids[1], 0.0)) return kids[0];
      if (is_const(kids[0], 0.0)) return kids[1];
      break;
    case ExprOp::Sub:
      if (is_const(kids[1], 0.0)) return kids[0];
      break;
    case ExprOp::Mul:
      if (is_const(kids[1], 1.0)) return kids[0];
      if (is_const(kids[0], 1.0)) return kids[1];
      break;
    case ExprOp::Div:
      if (is_const(kids[1], 1.0)) return kids[0];
      break;
    case ExprOp::Pow:
      if (e.exponent() == 1) return kids[0];
      break;
    default:
      break;
  }
  return rebuild(e, std::move(kids));
}

Individual simplify_size(const Individual& ind, double parsimony) {
  Individual out = ind;
  out.expr = simplify_neutral(ind.expr);
  out.size = out.expr.size();
  out.fitness = out.mse + parsimony * static_cast<double>(out.size);
  return out;
}

}  // namespace pdemts
