#pragma once

// PDE extraction from a trained surrogate: input-gradient harvest,
// correlation filtering and polynomial PDE fits.

#include <limits>
#include <string>
#include <vector>

#include "pdemts/expr.hpp"
#include "pdemts/net.hpp"

namespace pdemts {

enum class LagReduction { Last, Mean };

struct HarvestedDerivatives {
  std::vector<Symbol> labels;  // dY_j/dX_k, j-major
  std::vector<Symbol> states;  // X_k at the most recent step
  ColumnTable table;           // labels and states

  std::size_t rows() const { return table.rows(); }
};

HarvestedDerivatives harvest(const Network& net, const LagWindowSet& windows,
                             LagReduction reduction = LagReduction::Last, std::size_t batch = 256);

struct CorrelationEntry {
  Symbol target;
  Symbol column;
  double r = 0.0;
  bool selected = false;
};

struct FilterResult {
  std::vector<Symbol> selected;  // by decreasing |r|
  std::vector<CorrelationEntry> entries;
  std::vector<std::string> warnings;
};

// |r| > threshold against `target`, over every other column of `data`.
FilterResult correlation_filter(const ColumnTable& data, const Symbol& target, double threshold = 0.5);

struct PdeFit {
  PdeSpec pde;
  std::vector<Expr> terms;
  std::vector<double> coefficients;
  bool ridge = false;
  // Linear coefficient of the first selected column.
  double leading = std::numeric_limits<double>::quiet_NaN();
};

// Least squares of `target` on degree-`degree` monomials of `selected` over
// `fit_rows`; metrics come from `val_rows`.
PdeFit fit_pde(const ColumnTable& fit_rows, const ColumnTable& val_rows,
               const std::vector<Symbol>& selected, const Symbol& target, int degree = 3);

struct DiscoveryConfig {
  std::size_t dynamic_input = 1;
  double correlation_threshold = 0.5;
  int degree = 3;
  double selection_r2 = 0.8;
  double gate_r2 = 0.5;
  LagReduction reduction = LagReduction::Last;
  std::size_t max_fit_rows = 0;  // 0 keeps the whole training split
};

struct DiscoveryCandidate {
  std::size_t target = 0;  // j, 1-based
  bool gated = true;       // surrogate passed the validation gate
  bool selected = false;
  FilterResult filter;
  PdeFit fit;
};

struct DiscoveryReport {
  std::vector<FitMetrics> surrogate;  // per target, test split
  std::vector<DiscoveryCandidate> candidates;
  std::vector<std::string> warnings;

  // Every fitted candidate, with mask set for the selected ones.
  std::vector<PdeSpec> pdes() const;
  void write(const std::string& dir) const;  // pdes.txt, correlations.csv, discovery.csv
};

class SurrogateGateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

DiscoveryReport run_discovery(const Network& net, const SplitWindows& data,
                              const DiscoveryConfig& config = {});

}  // namespace pdemts
