#include "pdemts/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace pdemts {

FitMetrics regression_metrics(std::span<const double> truth, std::span<const double> pred,
                              bool* degenerate) {
  if (truth.size() != pred.size()) throw std::invalid_argument("metrics: length mismatch");
  if (truth.empty()) throw std::invalid_argument("metrics: no rows");
  const double n = static_cast<double>(truth.size());
  double mean = 0.0;
  for (double t : truth) mean += t;
  mean /= n;
  double ssr = 0.0, sae = 0.0, sst = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double e = truth[i] - pred[i];
    ssr += e * e;
    sae += std::fabs(e);
    sst += (truth[i] - mean) * (truth[i] - mean);
  }
  FitMetrics m;
  m.mse = ssr / n;
  m.mae = sae / n;
  // A constant column can leave a rounding-sized SST behind the mean.
  bool constant = true;
  for (double t : truth) constant = constant && t == truth[0];
  const bool degen = constant || sst == 0.0;
  m.r2 = degen ? 0.0 : 1.0 - ssr / sst;
  if (degenerate) *degenerate = degen;
  return m;
}

}  // namespace pdemts
