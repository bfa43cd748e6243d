#include "pdemts/diff.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace pdemts {

std::vector<double> forward_difference(std::span<const double> y, std::span<const double> x,
                                       ZeroIncrement policy) {
  if (y.size() != x.size()) throw std::invalid_argument("forward_difference: length mismatch");
  if (y.size() < 2) throw std::invalid_argument("forward_difference needs at least 2 points");
  const std::size_t n = y.size();
  std::vector<double> out(n);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double dx = x[k + 1] - x[k];
    if (dx == 0.0) {
      if (policy == ZeroIncrement::Error) throw ZeroIncrementError(k);
      out[k] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    out[k] = (y[k + 1] - y[k]) / dx;
  }
  out[n - 1] = out[n - 2];
  return out;
}

const std::vector<double>& DerivativeMatrix::column(const Symbol& s) const {
  auto it = std::find(labels.begin(), labels.end(), s);
  if (it == labels.end()) throw BindingError(s);
  return columns[static_cast<std::size_t>(it - labels.begin())];
}

ColumnTable DerivativeMatrix::to_table() const {
  ColumnTable t(rows());
  for (std::size_t k = 0; k < cols(); ++k) t.add(labels[k], columns[k]);
  return t;
}

void DerivativeMatrix::write_csv(std::ostream& out) const {
  out << "row";
  for (const auto& l : labels) out << ',' << l.text();
  out << '\n';
  char buf[40];
  for (std::size_t i = 0; i < rows(); ++i) {
    out << rows_kept[i];
    for (const auto& c : columns) {
      std::snprintf(buf, sizeof(buf), "%.17g", c[i]);
      out << ',' << buf;
    }
    out << '\n';
  }
}

DerivativeMatrix derivative_matrix(const TimeSeriesFrame& frame,
                                   const std::vector<IndexedColumn>& targets,
                                   const std::vector<IndexedColumn>& inputs,
                                   ZeroIncrement policy) {
  if (targets.empty()) throw std::invalid_argument("derivative_matrix: no targets");
  if (inputs.empty()) throw std::invalid_argument("derivative_matrix: no dynamic inputs");
  DerivativeMatrix dm;
  for (const auto& t : targets) {
    for (const auto& in : inputs) {
      dm.labels.push_back(Symbol::derivative(t.index, in.index));
      dm.columns.push_back(forward_difference(frame.column(t.name), frame.column(in.name), policy));
    }
  }
  const std::size_t n = frame.rows();
  for (std::size_t i = 0; i < n; ++i) {
    bool ok = true;
    for (const auto& c : dm.columns) ok = ok && !std::isnan(c[i]);
    if (ok) dm.rows_kept.push_back(i);
  }
  if (dm.rows_kept.size() != n) {
    for (auto& c : dm.columns) {
      std::vector<double> kept;
      kept.reserve(dm.rows_kept.size());
      for (auto i : dm.rows_kept) kept.push_back(c[i]);
      c = std::move(kept);
    }
  }
  return dm;
}

}  // namespace pdemts
