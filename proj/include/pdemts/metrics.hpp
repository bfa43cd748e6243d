#pragma once

#include <span>

#include "pdemts/expr.hpp"

namespace pdemts {

// MSE, MAE and R^2 = 1 - SSR/SST with SST about the truth's own mean. When SST
// is zero R^2 is reported as 0 and `degenerate` (if given) is set.
FitMetrics regression_metrics(std::span<const double> truth, std::span<const double> pred,
                              bool* degenerate = nullptr);

}  // namespace pdemts
