#pragma once

// Physics-informed training: L_T = L_D + w * L_P, where L_P sums squared PDE
// residuals of network input derivatives over the batch. With no active PDEs
// this is plain MSE training.

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "pdemts/expr.hpp"
#include "pdemts/net.hpp"

namespace pdemts {

struct PinnConfig {
  NetworkSpec net;
  TrainConfig train;
  std::vector<PdeSpec> pdes;  // mask bit = a_j
  double physics_weight = 1.0;
};

// Derivatives are taken at the last lag step. dYj_dXk binds to dY_j/dx[:, T-1, k],
// Xk to x[:, T-1, k] and Yj to the prediction. PDEs with mask 0 are skipped.
// `x` must be a tape variable of shape (n, T, d) and `pred` the network output
// built from it. With `create_graph` the result can be differentiated w.r.t.
// the network parameters.
Var physics_loss(Tape& tape, const Var& x, const Var& pred, const std::vector<PdeSpec>& pdes, bool create_graph);

struct PinnLoss {
  Var total, data, physics;
};

PinnLoss total_loss(Tape& tape, const Network& net, const std::vector<Var>& params, const Tensor& x,
                    const Tensor& y, const std::vector<PdeSpec>& pdes, Mode mode, std::mt19937_64* rng = nullptr,
                    double physics_weight = 1.0);

// Logged values are per sample: per_sample = L_D + w * L_P / n and
// components = {L_D, L_P / n}.
LossFn pinn_loss(std::vector<PdeSpec> pdes, double physics_weight = 1.0);

struct PinnResult {
  TrainedNet trained;

  // epoch,L_D,L_P,val_L_T
  void write_history(std::ostream& out) const;
};

PinnResult train_pinn(const PinnConfig& config, const LagWindowSet& train_set, const LagWindowSet& val_set);

struct LossSummary {
  double data = 0.0;     // mean squared error
  double physics = 0.0;  // L_P per sample
};

// Eval-mode losses of a trained network over a whole set.
LossSummary evaluate_losses(const Network& net, const LagWindowSet& set, const std::vector<PdeSpec>& pdes,
                            std::size_t batch = 256);

}  // namespace pdemts
