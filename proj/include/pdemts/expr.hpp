#pragma once

// Expression trees for discovered right-hand sides, and the PDE file format.
//
// Text grammar (precedence pow > mul/div > add/sub, left associative):
//   expr    := term (('+' | '-') term)*
//   term    := factor (('*' | '/') factor)*
//   factor  := unary ('^' INTEGER)?
//   unary   := '-' unary | primary
//   primary := NUMBER | SYMBOL | ('sin' | 'cos' | 'tanh') '(' expr ')' | '(' expr ')'
// Symbols are `Xk` (input k), `Yj` (target j) and `dYj_dXk`. '/' is protected
// division. A minus directly before a number is part of the constant; before
// anything else it becomes multiplication by -1.

#include <compare>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pdemts/autodiff.hpp"

namespace pdemts {

enum class SymbolKind { State, Target, Derivative };

// Indices are 1-based, matching the text form.
struct Symbol {
  SymbolKind kind = SymbolKind::State;
  int target = 0;
  int input = 0;

  static Symbol state(int k) { return {SymbolKind::State, 0, k}; }
  static Symbol output(int j) { return {SymbolKind::Target, j, 0}; }
  static Symbol derivative(int j, int k) { return {SymbolKind::Derivative, j, k}; }

  std::string text() const;
  // Throws std::invalid_argument when `s` is not a valid symbol name.
  static Symbol parse(std::string_view s);

  auto operator<=>(const Symbol&) const = default;
};

class BindingError : public std::runtime_error {
 public:
  explicit BindingError(const Symbol& s)
      : std::runtime_error("unbound symbol " + s.text()), symbol(s) {}
  Symbol symbol;
};

class ExprSyntaxError : public std::runtime_error {
 public:
  ExprSyntaxError(const std::string& msg, std::size_t at)
      : std::runtime_error(msg + " at offset " + std::to_string(at)), offset(at) {}
  std::size_t offset;
};

enum class ExprOp { Constant, Variable, Sin, Cos, Tanh, Add, Sub, Mul, Div, Pow };

inline constexpr int kMaxPowExponent = 6;
inline constexpr double kDivGuard = 1e-9;
inline constexpr double kDivFallback = 1.0;

class Expr {
 public:
  static Expr constant(double value);
  static Expr variable(Symbol symbol);
  static Expr unary(ExprOp op, Expr child);
  static Expr binary(ExprOp op, Expr left, Expr right);
  static Expr pow(Expr base, int exponent);

  ExprOp op() const { return node_->op; }
  double value() const { return node_->value; }
  const Symbol& symbol() const { return node_->symbol; }
  int exponent() const;
  std::size_t arity() const { return node_->children.size(); }
  const Expr& child(std::size_t i) const { return node_->children.at(i); }

  std::size_t size() const { return node_->size; }
  std::size_t depth() const { return node_->depth; }

  bool operator==(const Expr& other) const;

 private:
  struct Node {
    ExprOp op = ExprOp::Constant;
    double value = 0.0;
    Symbol symbol;
    std::vector<Expr> children;
    std::size_t size = 1;
    std::size_t depth = 1;
  };
  explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  static Expr make(Node node);

  std::shared_ptr<const Node> node_;
};

bool is_unary(ExprOp op);
bool is_binary(ExprOp op);

Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);

std::set<Symbol> collect_symbols(const Expr& e);

// Column-oriented data keyed by symbol; all columns share one row count.
class ColumnTable {
 public:
  ColumnTable() = default;
  explicit ColumnTable(std::size_t rows) : rows_(rows) {}

  void add(const Symbol& s, std::vector<double> values);
  bool contains(const Symbol& s) const { return data_.count(s) > 0; }
  std::span<const double> column(const Symbol& s) const;
  std::size_t rows() const { return rows_; }
  std::vector<Symbol> symbols() const;
  ColumnTable slice(std::size_t begin, std::size_t count) const;

 private:
  std::size_t rows_ = 0;
  std::map<Symbol, std::vector<double>> data_;
};

using Bindings = std::map<Symbol, double>;

double evaluate(const Expr& e, const Bindings& bindings);
std::vector<double> evaluate_batch(const Expr& e, const ColumnTable& data);
// `shape` is the common shape of the bound nodes; constants are broadcast to it.
Var evaluate_on_tape(const Expr& e, const std::map<Symbol, Var>& bindings, Tape& tape,
                     const Shape& shape);

std::string to_text(const Expr& e);
Expr parse_text(std::string_view text);

struct FitMetrics {
  double mse = 0.0;
  double mae = 0.0;
  double r2 = 0.0;
};

// lhs = d Y_j / d X_i, rhs = f(...). `mask` marks participation in physics losses.
struct PdeSpec {
  Symbol lhs;
  Expr rhs = Expr::constant(0.0);
  bool mask = true;
  std::optional<FitMetrics> metrics;
  bool trivial = false;
};

// Validates lhs kind and that lhs does not appear in rhs.
PdeSpec make_pde(Symbol lhs, Expr rhs, bool mask = true);

std::string format_pde_line(const PdeSpec& pde);
PdeSpec parse_pde_line(std::string_view line);
void write_pde_file(std::ostream& os, std::span<const PdeSpec> pdes);
std::vector<PdeSpec> read_pde_file(std::istream& is);

}  // namespace pdemts
