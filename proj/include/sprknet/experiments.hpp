#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sprknet/training.hpp"

namespace sprknet {

struct ClassificationDataset {
  std::vector<std::array<double, 2>> features;
  std::vector<int> labels;
  std::vector<std::size_t> train_idx, test_idx;
  std::uint64_t seed = 0;
};

/// Two concentric noisy circles (radii 1 and 2, Gaussian radial noise 0.1);
/// 400 train / 200 test points, classes balanced within one sample.
ClassificationDataset gen_classification(std::uint64_t seed);

struct KeplerDataset {
  std::vector<Trajectory> trajectories;  // 27 records, 2000 points in total
  Trajectory test_trajectory;            // first initial condition, doubled interval
  std::uint64_t seed = 0;
};

/// Perturbed circular orbits of the Kepler-type force, integrated by the
/// fine-step reference integrator and subsampled onto the training grids.
KeplerDataset gen_kepler(std::uint64_t seed);

/// Classification task: augmented features, scalar output, binary cross
/// entropy.
class ClassificationProblem : public Problem {
 public:
  explicit ClassificationProblem(const ClassificationDataset& data) : data_(data) {}
  std::size_t train_size() const override { return data_.train_idx.size(); }
  double batch_loss_and_grads(const NetParams& params, std::span<const std::size_t> batch,
                              NetGrads& grads) override;
  double train_loss(const NetParams& params) override;
  double test_metric(const NetParams& params) override;  // accuracy in percent
  Vec audit_input() const override;
  double accuracy(const NetParams& params, const std::vector<std::size_t>& idx) const;

 private:
  const ClassificationDataset& data_;
};

/// The two-step system identification model: the network approximates the
/// unknown force dp/dt = f(q) and trajectories are produced by integrating
/// dq/dt = p, dp/dt = net(q) with the network's own tableau, one step per
/// grid interval.
struct KeplerRolloutTapes {
  std::vector<std::vector<ForwardTape>> steps;  // [interval][stage], kick stages only
};

Trajectory kepler_rollout(const NetParams& net, const PhaseState& z0,
                          const std::vector<double>& times, KeplerRolloutTapes* tapes);

/// Reverse sweep over the rollout, chaining trajectory-step Jacobians with
/// network-layer Jacobians. Accumulates parameter gradients of
/// loss_trajectory(predicted, observed) into grads and returns the loss.
double kepler_loss_and_grads(const NetParams& net, const Trajectory& observed,
                             NetGrads& grads);

class KeplerProblem : public Problem {
 public:
  explicit KeplerProblem(const KeplerDataset& data) : data_(data) {}
  std::size_t train_size() const override { return data_.trajectories.size(); }
  double batch_loss_and_grads(const NetParams& params, std::span<const std::size_t> batch,
                              NetGrads& grads) override;
  double train_loss(const NetParams& params) override;
  double test_metric(const NetParams& params) override;  // mean squared deviation
  Vec audit_input() const override;

 private:
  const KeplerDataset& data_;
};

/// Run configuration; the JSON file uses exactly these keys.
struct RunConfig {
  std::string tableau = "sprk4";
  int layers = 12;
  double step_size = 0.25;
  std::string activation = "tanh";
  bool share_stages = true;
  std::string optimizer = "adam";
  double learning_rate = 1e-2;
  int epochs = 100;
  int batch_size = 32;
  double lambda = 0.0;
  std::uint64_t seed = 1;
};

RunConfig default_classification_config();
RunConfig default_kepler_config();
RunConfig parse_config(const nlohmann::json& doc, RunConfig base);
RunConfig load_config_file(const std::string& path, RunConfig base);

struct RunReport {
  std::string tableau;
  double test_metric = 0.0;
  double min_layer_norm = 0.0;
  Metrics metrics;
  NetParams model;
};

nlohmann::ordered_json report_to_json(const RunReport& report);

RunReport run_classification(const RunConfig& config);
RunReport run_kepler(const RunConfig& config);

struct ConvergenceRow {
  std::string tableau;
  int nominal_order = 0;
  double slope = 0.0;
  bool saturated = false;
};

/// Convergence slopes of all four built-in tableaux on the non-autonomous
/// test Hamiltonian.
std::vector<ConvergenceRow> run_convergence();
void write_convergence_csv(std::ostream& out, const std::vector<ConvergenceRow>& rows);

struct VerifyReport {
  std::string name;
  ConditionReport symplectic;
  ConditionReport order;
  bool has_slope = false;
  double slope = 0.0;
  bool pass = false;  // exact symplectic + node + consistency conditions
};

VerifyReport run_verify(const PrkTableau& tableau);
void print_verify_report(std::ostream& out, const VerifyReport& report);

}  // namespace sprknet
