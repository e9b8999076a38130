#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sprknet/integrator.hpp"
#include "sprknet/network.hpp"

namespace sprknet {

enum class LossKind { BinaryClassification, TrajectoryL2 };

struct LossSpec {
  LossKind kind = LossKind::BinaryClassification;
  double lambda = 0.0;  // regularizer weight
};

enum class OptKind { Sgd, Adam };

OptKind optimizer_from_name(const std::string& name);
std::string optimizer_name(OptKind k);

struct OptimizerState {
  OptKind kind = OptKind::Sgd;
  double learning_rate = 1e-2;
  double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;
  long step_count = 0;
  std::vector<double> m, v;  // flat first/second moments, sized on first use
};

struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Binary cross entropy on a sigmoid of the scalar network output.
/// Returns (loss, d loss / d output).
std::pair<double, double> loss_classification(double output, int label);

struct TrajectoryLoss {
  double value = 0.0;
  std::vector<PhaseState> gradients;  // d loss / d predicted state, per point
};

/// Mean squared Euclidean deviation over the grid points.
TrajectoryLoss loss_trajectory(const Trajectory& predicted, const Trajectory& observed);

/// lambda * sum of squared norms of every stage-control array. Gradients
/// (2 lambda u) are accumulated into grads when it is non-null.
double regularizer(const NetParams& params, double lambda, NetGrads* grads);

/// One descent update. SGD: u -= lr * g. Adam: bias-corrected moments with
/// the fixed decay rates. Throws DivergenceError on non-finite gradients.
void optimizer_step(OptimizerState& opt, NetParams& params, NetGrads& grads);

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double test_metric = 0.0;
  double min_layer_norm = 0.0;
  double seconds = 0.0;
};

struct Metrics {
  std::vector<EpochRecord> epochs;
};

/// CSV with header epoch,loss,test_metric,min_layer_norm,seconds.
void write_metrics_csv(std::ostream& out, const Metrics& metrics);

/// A training problem presented to the mini-batch driver: per-batch gradient
/// accumulation plus the per-epoch test metric and the audit point.
class Problem {
 public:
  virtual ~Problem() = default;
  virtual std::size_t train_size() const = 0;
  /// Accumulate parameter gradients of the summed per-sample loss over the
  /// batch into grads; return that summed loss.
  virtual double batch_loss_and_grads(const NetParams& params,
                                      std::span<const std::size_t> batch,
                                      NetGrads& grads) = 0;
  /// Mean training loss of the current parameters, evaluated in a fixed
  /// order (independent of the epoch shuffle).
  virtual double train_loss(const NetParams& params) = 0;
  virtual double test_metric(const NetParams& params) = 0;
  virtual Vec audit_input() const = 0;
};

struct TrainOptions {
  int epochs = 1;
  int batch_size = 32;
  std::uint64_t seed = 0;
};

/// Mini-batch loop with per-epoch shuffling keyed by the seed. Records one
/// EpochRecord per epoch and aborts with DivergenceError when the loss
/// exceeds 1e6 times its initial value.
Metrics train(NetParams& params, Problem& problem, const LossSpec& loss, OptimizerState& opt,
              const TrainOptions& options);

}  // namespace sprknet
