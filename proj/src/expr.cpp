#include "pdemts/expr.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace pdemts {

// ---------------------------------------------------------------- symbols

std::string Symbol::text() const {
  switch (kind) {
    case SymbolKind::State:
      return "X" + std::to_string(input);
    case SymbolKind::Target:
      return "Y" + std::to_string(target);
    case SymbolKind::Derivative:
      return "dY" + std::to_string(target) + "_dX" + std::to_string(input);
  }
  return "?";
}

namespace {

// Parses a positive decimal index; returns chars consumed (0 on failure).
std::size_t parse_index(std::string_view s, int& out) {
  std::size_t i = 0;
  while (i < s.size() && s[i] >= '0' && s[i] <= '9') ++i;
  if (i == 0 || s[0] == '0') return 0;
  auto res = std::from_chars(s.data(), s.data() + i, out);
  if (res.ec != std::errc() || out <= 0) return 0;
  return i;
}

// Longest symbol prefix of `s`; returns chars consumed (0 if none).
std::size_t match_symbol(std::string_view s, Symbol& out) {
  int a = 0, b = 0;
  if (s.size() >= 2 && s[0] == 'd' && s[1] == 'Y') {
    std::size_t n = parse_index(s.substr(2), a);
    if (n == 0) return 0;
    std::size_t pos = 2 + n;
    if (s.substr(pos, 3) != "_dX") return 0;
    std::size_t m = parse_index(s.substr(pos + 3), b);
    if (m == 0) return 0;
    out = Symbol::derivative(a, b);
    return pos + 3 + m;
  }
  if (!s.empty() && (s[0] == 'X' || s[0] == 'Y')) {
    std::size_t n = parse_index(s.substr(1), a);
    if (n == 0) return 0;
    out = s[0] == 'X' ? Symbol::state(a) : Symbol::output(a);
    return 1 + n;
  }
  return 0;
}

bool ident_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

}  // namespace

Symbol Symbol::parse(std::string_view s) {
  Symbol sym;
  if (match_symbol(s, sym) != s.size() || s.empty()) {
    throw std::invalid_argument("invalid symbol '" + std::string(s) + "'");
  }
  return sym;
}

// ---------------------------------------------------------------- nodes

bool is_unary(ExprOp op) { return op == ExprOp::Sin || op == ExprOp::Cos || op == ExprOp::Tanh; }

bool is_binary(ExprOp op) {
  return op == ExprOp::Add || op == ExprOp::Sub || op == ExprOp::Mul || op == ExprOp::Div ||
         op == ExprOp::Pow;
}

Expr Expr::make(Node node) {
  std::size_t size = 1, depth = 0;
  for (const auto& c : node.children) {
    size += c.size();
    depth = std::max(depth, c.depth());
  }
  node.size = size;
  node.depth = depth + 1;
  return Expr(std::make_shared<const Node>(std::move(node)));
}

Expr Expr::constant(double value) {
  if (!std::isfinite(value)) throw std::invalid_argument("non-finite expression constant");
  Node n;
  n.op = ExprOp::Constant;
  n.value = value;
  return make(std::move(n));
}

Expr Expr::variable(Symbol symbol) {
  Node n;
  n.op = ExprOp::Variable;
  n.symbol = symbol;
  return make(std::move(n));
}

Expr Expr::unary(ExprOp op, Expr child) {
  if (!is_unary(op)) throw std::invalid_argument("not a unary operator");
  Node n;
  n.op = op;
  n.children.push_back(std::move(child));
  return make(std::move(n));
}

Expr Expr::binary(ExprOp op, Expr left, Expr right) {
  if (!is_binary(op)) throw std::invalid_argument("not a binary operator");
  if (op == ExprOp::Pow) {
    if (right.op() != ExprOp::Constant) throw std::invalid_argument("pow exponent must be a constant");
    const double k = right.value();
    if (k != std::floor(k) || k < 0 || k > kMaxPowExponent) {
      throw std::invalid_argument("pow exponent must be an integer in [0, 6]");
    }
  }
  Node n;
  n.op = op;
  n.children.push_back(std::move(left));
  n.children.push_back(std::move(right));
  return make(std::move(n));
}

Expr Expr::pow(Expr base, int exponent) {
  return binary(ExprOp::Pow, std::move(base), constant(static_cast<double>(exponent)));
}

int Expr::exponent() const {
  if (op() != ExprOp::Pow) throw std::logic_error("exponent() on a non-pow node");
  return static_cast<int>(child(1).value());
}

bool Expr::operator==(const Expr& other) const {
  if (node_ == other.node_) return true;
  if (op() != other.op() || arity() != other.arity()) return false;
  if (op() == ExprOp::Constant) return value() == other.value();
  if (op() == ExprOp::Variable) return symbol() == other.symbol();
  for (std::size_t i = 0; i < arity(); ++i)
    if (!(child(i) == other.child(i))) return false;
  return true;
}

Expr operator+(const Expr& a, const Expr& b) { return Expr::binary(ExprOp::Add, a, b); }
Expr operator-(const Expr& a, const Expr& b) { return Expr::binary(ExprOp::Sub, a, b); }
Expr operator*(const Expr& a, const Expr& b) { return Expr::binary(ExprOp::Mul, a, b); }
Expr operator/(const Expr& a, const Expr& b) { return Expr::binary(ExprOp::Div, a, b); }

namespace {

void collect(const Expr& e, std::set<Symbol>& out) {
  if (e.op() == ExprOp::Variable) out.insert(e.symbol());
  for (std::size_t i = 0; i < e.arity(); ++i) collect(e.child(i), out);
}

}  // namespace

std::set<Symbol> collect_symbols(const Expr& e) {
  std::set<Symbol> out;
  collect(e, out);
  return out;
}

// ---------------------------------------------------------------- columns

void ColumnTable::add(const Symbol& s, std::vector<double> values) {
  if (data_.empty() && rows_ == 0) rows_ = values.size();
  if (values.size() != rows_) {
    throw std::invalid_argument("column " + s.text() + " has " + std::to_string(values.size()) +
                                " rows, expected " + std::to_string(rows_));
  }
  data_[s] = std::move(values);
}

std::span<const double> ColumnTable::column(const Symbol& s) const {
  auto it = data_.find(s);
  if (it == data_.end()) throw BindingError(s);
  return it->second;
}

std::vector<Symbol> ColumnTable::symbols() const {
  std::vector<Symbol> out;
  for (const auto& [k, v] : data_) out.push_back(k);
  return out;
}

ColumnTable ColumnTable::slice(std::size_t begin, std::size_t count) const {
  if (begin + count > rows_) throw std::out_of_range("ColumnTable::slice out of range");
  ColumnTable out(count);
  for (const auto& [k, v] : data_) {
    out.data_[k] = std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(begin),
                                       v.begin() + static_cast<std::ptrdiff_t>(begin + count));
  }
  return out;
}

// ---------------------------------------------------------------- evaluation

namespace {

double apply_unary(ExprOp op, double x) {
  switch (op) {
    case ExprOp::Sin:
      return std::sin(x);
    case ExprOp::Cos:
      return std::cos(x);
    case ExprOp::Tanh:
      return std::tanh(x);
    default:
      throw std::logic_error("bad unary op");
  }
}

double ipow(double x, int k) {
  double r = 1.0;
  for (int i = 0; i < k; ++i) r *= x;
  return r;
}

double apply_binary(ExprOp op, double a, double b) {
  switch (op) {
    case ExprOp::Add:
      return a + b;
    case ExprOp::Sub:
      return a - b;
    case ExprOp::Mul:
      return a * b;
    case ExprOp::Div:
      return std::fabs(b) < kDivGuard ? kDivFallback : a * (1.0 / b);
    case ExprOp::Pow:
      return ipow(a, static_cast<int>(b));
    default:
      throw std::logic_error("bad binary op");
  }
}

}  // namespace

double evaluate(const Expr& e, const Bindings& bindings) {
  switch (e.op()) {
    case ExprOp::Constant:
      return e.value();
    case ExprOp::Variable: {
      auto it = bindings.find(e.symbol());
      if (it == bindings.end()) throw BindingError(e.symbol());
      return it->second;
    }
    default:
      break;
  }
  if (is_unary(e.op())) return apply_unary(e.op(), evaluate(e.child(0), bindings));
  return apply_binary(e.op(), evaluate(e.child(0), bindings), evaluate(e.child(1), bindings));
}

std::vector<double> evaluate_batch(const Expr& e, const ColumnTable& data) {
  const std::size_t n = data.rows();
  switch (e.op()) {
    case ExprOp::Constant:
      return std::vector<double>(n, e.value());
    case ExprOp::Variable: {
      auto col = data.column(e.symbol());
      return {col.begin(), col.end()};
    }
    default:
      break;
  }
  if (is_unary(e.op())) {
    auto v = evaluate_batch(e.child(0), data);
    for (auto& x : v) x = apply_unary(e.op(), x);
    return v;
  }
  auto a = evaluate_batch(e.child(0), data);
  if (e.op() == ExprOp::Pow) {
    const int k = e.exponent();
    for (auto& x : a) x = ipow(x, k);
    return a;
  }
  auto b = evaluate_batch(e.child(1), data);
  for (std::size_t i = 0; i < n; ++i) a[i] = apply_binary(e.op(), a[i], b[i]);
  return a;
}

Var evaluate_on_tape(const Expr& e, const std::map<Symbol, Var>& bindings, Tape& tape,
                     const Shape& shape) {
  switch (e.op()) {
    case ExprOp::Constant:
      return tape.constant(Tensor(shape, e.value()));
    case ExprOp::Variable: {
      auto it = bindings.find(e.symbol());
      if (it == bindings.end()) throw BindingError(e.symbol());
      if (it->second.shape() != shape) {
        throw std::invalid_argument("binding for " + e.symbol().text() + " has shape " +
                                    shape_string(it->second.shape()) + ", expected " +
                                    shape_string(shape));
      }
      return it->second;
    }
    case ExprOp::Sin:
      return ad::sin(evaluate_on_tape(e.child(0), bindings, tape, shape));
    case ExprOp::Cos:
      return ad::cos(evaluate_on_tape(e.child(0), bindings, tape, shape));
    case ExprOp::Tanh:
      return ad::tanh(evaluate_on_tape(e.child(0), bindings, tape, shape));
    case ExprOp::Pow:
      return ad::powi(evaluate_on_tape(e.child(0), bindings, tape, shape), e.exponent());
    default:
      break;
  }
  auto a = evaluate_on_tape(e.child(0), bindings, tape, shape);
  auto b = evaluate_on_tape(e.child(1), bindings, tape, shape);
  switch (e.op()) {
    case ExprOp::Add:
      return ad::add(a, b);
    case ExprOp::Sub:
      return ad::sub(a, b);
    case ExprOp::Mul:
      return ad::mul(a, b);
    case ExprOp::Div:
      return ad::protected_div(a, b, kDivGuard, kDivFallback);
    default:
      throw std::logic_error("bad binary op");
  }
}

// ---------------------------------------------------------------- text

namespace {

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

int precedence(const Expr& e) {
  switch (e.op()) {
    case ExprOp::Add:
    case ExprOp::Sub:
      return 1;
    case ExprOp::Mul:
    case ExprOp::Div:
      return 2;
    case ExprOp::Pow:
      return 3;
    default:
      return 4;
  }
}

const char* op_text(ExprOp op) {
  switch (op) {
    case ExprOp::Add:
      return " + ";
    case ExprOp::Sub:
      return " - ";
    case ExprOp::Mul:
      return "*";
    case ExprOp::Div:
      return "/";
    case ExprOp::Pow:
      return "^";
    case ExprOp::Sin:
      return "sin";
    case ExprOp::Cos:
      return "cos";
    case ExprOp::Tanh:
      return "tanh";
    default:
      return "?";
  }
}

void write_text(const Expr& e, std::string& out);

void write_child(const Expr& child, bool parens, std::string& out) {
  if (parens) out += '(';
  write_text(child, out);
  if (parens) out += ')';
}

void write_text(const Expr& e, std::string& out) {
  switch (e.op()) {
    case ExprOp::Constant:
      out += format_number(e.value());
      return;
    case ExprOp::Variable:
      out += e.symbol().text();
      return;
    case ExprOp::Sin:
    case ExprOp::Cos:
    case ExprOp::Tanh:
      out += op_text(e.op());
      out += '(';
      write_text(e.child(0), out);
      out += ')';
      return;
    case ExprOp::Pow: {
      const Expr& base = e.child(0);
      const bool atom = precedence(base) == 4 &&
                        !(base.op() == ExprOp::Constant && std::signbit(base.value()));
      write_child(base, !atom, out);
      out += '^';
      out += std::to_string(e.exponent());
      return;
    }
    default:
      break;
  }
  const int p = precedence(e);
  write_child(e.child(0), precedence(e.child(0)) < p, out);
  out += op_text(e.op());
  write_child(e.child(1), precedence(e.child(1)) <= p, out);
}

class Parser {
 public:
  explicit Parser(std::string_view s) : s_(s) {}

  Expr parse_all() {
    Expr e = parse_expr();
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected character '" + std::string(1, s_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ExprSyntaxError(msg, pos_); }

  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expr parse_expr() {
    Expr left = parse_term();
    while (true) {
      if (accept('+')) {
        left = left + parse_term();
      } else if (accept('-')) {
        left = left - parse_term();
      } else {
        return left;
      }
    }
  }

  Expr parse_term() {
    Expr left = parse_factor();
    while (true) {
      if (accept('*')) {
        left = left * parse_factor();
      } else if (accept('/')) {
        left = left / parse_factor();
      } else {
        return left;
      }
    }
  }

  Expr parse_factor() {
    Expr base = parse_unary();
    if (accept('^')) {
      skip_ws();
      std::size_t start = pos_;
      while (pos_ < s_.size() && s_[pos_] >= '0' && s_[pos_] <= '9') ++pos_;
      if (start == pos_) fail("expected integer exponent");
      int k = 0;
      std::from_chars(s_.data() + start, s_.data() + pos_, k);
      if (k > kMaxPowExponent) {
        pos_ = start;
        fail("exponent exceeds " + std::to_string(kMaxPowExponent));
      }
      return Expr::pow(std::move(base), k);
    }
    return base;
  }

  bool at_number() const {
    return pos_ < s_.size() && ((s_[pos_] >= '0' && s_[pos_] <= '9') || s_[pos_] == '.');
  }

  Expr parse_unary() {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == '-') {
      ++pos_;
      skip_ws();
      if (at_number()) return Expr::constant(-parse_number());
      return Expr::constant(-1.0) * parse_unary();
    }
    return parse_primary();
  }

  double parse_number() {
    double v = 0.0;
    auto res = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), v);
    if (res.ec != std::errc()) fail("malformed number");
    pos_ = static_cast<std::size_t>(res.ptr - s_.data());
    return v;
  }

  Expr parse_primary() {
    skip_ws();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    if (at_number()) return Expr::constant(parse_number());
    if (s_[pos_] == '(') {
      ++pos_;
      Expr e = parse_expr();
      if (!accept(')')) fail("expected ')'");
      return e;
    }
    std::size_t end = pos_;
    while (end < s_.size() && ident_char(s_[end])) ++end;
    const std::string_view word = s_.substr(pos_, end - pos_);
    if (word.empty()) fail("unexpected character '" + std::string(1, s_[pos_]) + "'");
    for (ExprOp op : {ExprOp::Sin, ExprOp::Cos, ExprOp::Tanh}) {
      if (word == op_text(op)) {
        pos_ = end;
        if (!accept('(')) fail("expected '(' after function name");
        Expr arg = parse_expr();
        if (!accept(')')) fail("expected ')'");
        return Expr::unary(op, std::move(arg));
      }
    }
    Symbol sym;
    if (match_symbol(word, sym) != word.size()) fail("unknown symbol '" + std::string(word) + "'");
    pos_ = end;
    return Expr::variable(sym);
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string to_text(const Expr& e) {
  std::string out;
  write_text(e, out);
  return out;
}

Expr parse_text(std::string_view text) { return Parser(text).parse_all(); }

// ---------------------------------------------------------------- PDE files

PdeSpec make_pde(Symbol lhs, Expr rhs, bool mask) {
  if (lhs.kind != SymbolKind::Derivative) {
    throw std::invalid_argument("PDE lhs must be a derivative symbol, got " + lhs.text());
  }
  if (collect_symbols(rhs).count(lhs)) {
    throw std::invalid_argument("PDE lhs " + lhs.text() + " appears in its own rhs");
  }
  PdeSpec p;
  p.lhs = lhs;
  p.rhs = std::move(rhs);
  p.mask = mask;
  return p;
}

std::string format_pde_line(const PdeSpec& pde) {
  std::string line = pde.lhs.text() + " = " + to_text(pde.rhs) + " # r2=";
  line += pde.metrics ? format_number(pde.metrics->r2) : "nan";
  line += " mask=";
  line += pde.mask ? '1' : '0';
  return line;
}

PdeSpec parse_pde_line(std::string_view line) {
  const auto hash = line.find('#');
  const std::string_view body = line.substr(0, hash);
  const auto eq = body.find('=');
  if (eq == std::string_view::npos) throw ExprSyntaxError("expected '=' in PDE line", body.size());

  auto trim = [](std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
  };
  PdeSpec pde = make_pde(Symbol::parse(trim(body.substr(0, eq))), parse_text(trim(body.substr(eq + 1))));

  if (hash != std::string_view::npos) {
    std::istringstream meta{std::string(line.substr(hash + 1))};
    std::string tok;
    while (meta >> tok) {
      if (tok.rfind("r2=", 0) == 0) {
        const std::string v = tok.substr(3);
        if (v != "nan") {
          FitMetrics m;
          m.r2 = std::stod(v);
          pde.metrics = m;
        }
      } else if (tok.rfind("mask=", 0) == 0) {
        const std::string v = tok.substr(5);
        if (v != "0" && v != "1") throw std::invalid_argument("mask must be 0 or 1, got " + v);
        pde.mask = v == "1";
      }
    }
  }
  return pde;
}

void write_pde_file(std::ostream& os, std::span<const PdeSpec> pdes) {
  for (const auto& p : pdes) os << format_pde_line(p) << '\n';
}

std::vector<PdeSpec> read_pde_file(std::istream& is) {
  std::vector<PdeSpec> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    try {
      out.push_back(parse_pde_line(line));
    } catch (const std::exception& e) {
      throw std::runtime_error("PDE file line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace pdemts
