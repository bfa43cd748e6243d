#pragma once

// Layer zoo, network presets, Adam training with early stopping, and input
// gradients. Inputs are (batch, T, d) windows; outputs are (batch, p).

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "pdemts/autodiff.hpp"
#include "pdemts/ingest.hpp"

namespace pdemts {

enum class Activation { Linear, ReLU, Tanh };

struct LayerSpec {
  enum class Kind { Dense, Conv1D, CausalConv1D, MaxPool1D, Dropout, Flatten, LastStep, Residual };

  Kind kind = Kind::Dense;
  std::size_t units = 0;  // dense units or conv filters
  std::size_t kernel = 1;
  std::size_t dilation = 1;
  std::size_t width = 1;  // max-pool
  double rate = 0.0;      // dropout
  Activation activation = Activation::Linear;
  std::vector<LayerSpec> block;  // residual body

  static LayerSpec dense(std::size_t units, Activation act = Activation::Linear);
  static LayerSpec conv(std::size_t filters, std::size_t kernel, Activation act = Activation::ReLU);
  static LayerSpec causal(std::size_t filters, std::size_t kernel, std::size_t dilation,
                          Activation act = Activation::ReLU);
  static LayerSpec maxpool(std::size_t width);
  static LayerSpec dropout(double rate);
  static LayerSpec flatten();
  static LayerSpec last_step();
  // body(x) + W_res x, where W_res is a learned 1x1 convolution.
  static LayerSpec residual(std::vector<LayerSpec> body);
};

struct NetworkSpec {
  std::string name;
  std::size_t lag = 0;  // T
  std::size_t inputs = 0;  // d
  std::size_t outputs = 0;  // p
  std::vector<LayerSpec> layers;
};

// Named presets: "cnn", "tcn1", "tcn2", "tcn_pred", "dense".
NetworkSpec make_preset(const std::string& name, std::size_t lag, std::size_t d, std::size_t p);
const std::vector<std::string>& preset_names();

// 1 + sum (m - 1) r over causal layers along the main path.
std::size_t receptive_field(const NetworkSpec& spec);

enum class Mode { Train, Eval };

class Network {
 public:
  Network() = default;
  Network(NetworkSpec spec, std::uint64_t seed);

  const NetworkSpec& spec() const { return spec_; }
  std::vector<Tensor>& params() { return params_; }
  const std::vector<Tensor>& params() const { return params_; }
  const std::vector<std::string>& param_names() const { return names_; }
  std::size_t parameter_count() const;

  // Builds the forward graph with `params` as the parameter nodes. `rng` is
  // only consulted by dropout in Mode::Train.
  Var forward(Tape& tape, const Var& x, const std::vector<Var>& params, Mode mode,
              std::mt19937_64* rng = nullptr) const;
  // Eval-mode prediction in batches; x is (n, T, d).
  Tensor predict(const Tensor& x, std::size_t batch = 256) const;
  Tensor predict(const LagWindowSet& windows, std::size_t batch = 256) const;

  void save(std::ostream& out) const;
  void load(std::istream& in);

 private:
  NetworkSpec spec_;
  std::vector<Tensor> params_;
  std::vector<std::string> names_;
};

// D[i, t, j*d + k] = dY[i, j] / dX[i, t, k]; one backward pass per output.
Tensor grad_input(const Network& net, const Tensor& x);
// Only the most recent step t = T - 1: (n, p*d).
Tensor grad_input_last(const Network& net, const Tensor& x, std::size_t batch = 256);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Tensor> m, v;
  long step = 0;
};

void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state,
               const AdamConfig& hyper);

struct TrainConfig {
  AdamConfig adam;
  int epochs = 50;
  std::size_t batch_size = 64;
  bool early_stopping = false;
  int patience = 5;
  int max_epochs = 200;
  std::uint64_t seed = 0;
  bool shuffle = true;
};

struct BatchLoss {
  Var total;                       // differentiated
  double per_sample = 0.0;         // logged value, already divided by batch size
  std::vector<double> components;  // logged, per sample
};

using LossFn = std::function<BatchLoss(Tape& tape, const Network& net, const std::vector<Var>& params,
                                       const Tensor& x, const Tensor& y, Mode mode,
                                       std::mt19937_64& rng)>;

// Mean of squared errors over all batch elements.
LossFn mse_loss();

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  std::vector<double> components;  // train-set averages
};

struct TrainedNet {
  Network net;
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  bool stopped_early = false;

  void write_history(std::ostream& out) const;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

TrainedNet train(Network net, const LagWindowSet& train_set, const LagWindowSet& val_set,
                 const TrainConfig& config, const LossFn& loss = mse_loss());

}  // namespace pdemts
