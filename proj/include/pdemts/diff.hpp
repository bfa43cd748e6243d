#pragma once

// Forward-difference derivatives of output series with respect to inputs.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pdemts/expr.hpp"
#include "pdemts/ingest.hpp"

namespace pdemts {

class ZeroIncrementError : public std::runtime_error {
 public:
  explicit ZeroIncrementError(std::size_t at)
      : std::runtime_error("zero increment in x at index " + std::to_string(at)), index(at) {}
  std::size_t index;
};

enum class ZeroIncrement { Error, Drop };

// out[k] = (y[k+1] - y[k]) / (x[k+1] - x[k]); the last entry repeats out[n-2].
// With ZeroIncrement::Drop the affected entries are NaN instead of an error.
std::vector<double> forward_difference(std::span<const double> y, std::span<const double> x,
                                       ZeroIncrement policy = ZeroIncrement::Error);

// A frame column together with its 1-based X or Y index.
struct IndexedColumn {
  std::string name;
  int index = 0;
};

struct DerivativeMatrix {
  std::vector<Symbol> labels;               // column k is d Y_j / d X_i
  std::vector<std::vector<double>> columns;
  std::vector<std::size_t> rows_kept;       // source rows, after any dropping

  std::size_t rows() const { return rows_kept.size(); }
  std::size_t cols() const { return labels.size(); }
  const std::vector<double>& column(const Symbol& s) const;
  ColumnTable to_table() const;
  void write_csv(std::ostream& out) const;
};

// One column per (target, input) pair, ordered target-major. Rows where any
// increment is zero are dropped under ZeroIncrement::Drop.
DerivativeMatrix derivative_matrix(const TimeSeriesFrame& frame,
                                   const std::vector<IndexedColumn>& targets,
                                   const std::vector<IndexedColumn>& inputs,
                                   ZeroIncrement policy = ZeroIncrement::Error);

}  // namespace pdemts
