#include "sprknet/experiments.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "sprknet/rng.hpp"

namespace sprknet {

namespace {

const double kPi = 3.14159265358979323846;

// Distinct deterministic sub-streams per purpose, so e.g. the dataset does
// not change when the network width does.
constexpr std::uint64_t kDataStream = 0xDA7A5E7;
constexpr std::uint64_t kNetStream = 0x11717;

long steps_between(double t0, double t1, double h) {
  return std::lround((t1 - t0) / h);
}

}  // namespace

ClassificationDataset gen_classification(std::uint64_t seed) {
  ClassificationDataset ds;
  ds.seed = seed;
  Rng rng(splitmix64(seed ^ kDataStream));
  const std::size_t total = 600;  // 400 train + 200 test
  ds.features.reserve(total);
  ds.labels.reserve(total);
  for (std::size_t k = 0; k < total; ++k) {
    const int label = static_cast<int>(k % 2);  // alternation keeps splits balanced
    const double base = label == 1 ? 1.0 : 2.0;
    const double r = base + rng.normal(0.0, 0.1);
    const double th = rng.uniform(0.0, 2.0 * kPi);
    ds.features.push_back({r * std::cos(th), r * std::sin(th)});
    ds.labels.push_back(label);
  }
  for (std::size_t k = 0; k < 400; ++k) ds.train_idx.push_back(k);
  for (std::size_t k = 400; k < total; ++k) ds.test_idx.push_back(k);
  return ds;
}

KeplerDataset gen_kepler(std::uint64_t seed) {
  KeplerDataset ds;
  ds.seed = seed;
  Rng rng(splitmix64(seed ^ kDataStream));
  const SeparableHamiltonian sys = kepler_field();
  const PrkTableau ref_tab = builtin_tableau(TableauKind::Sprk4);
  const double h_ref = 1e-4;
  const long m_train = steps_between(0.0, 2.0, h_ref);

  const int n_traj = 27;
  const int total_points = 2000;
  const int base_count = total_points / n_traj;
  const int remainder = total_points - base_count * n_traj;

  PhaseState first_ic;
  for (int j = 0; j < n_traj; ++j) {
    const int count = base_count + (j < remainder ? 1 : 0);
    Trajectory fine;
    PhaseState ic;
    for (;;) {
      const double r = rng.uniform(0.8, 1.2);
      const double th = rng.uniform(0.0, 2.0 * kPi);
      const double v = std::sqrt(0.25 * kPi * std::sqrt(r)) * rng.uniform(0.9, 1.1);
      ic.q = {r * std::cos(th), r * std::sin(th)};
      ic.p = {-v * std::sin(th), v * std::cos(th)};
      try {
        fine = integrate(sys, ic, 0.0, h_ref, m_train, ref_tab);
        break;
      } catch (const IntegrationError&) {
        continue;  // resample this initial condition
      }
    }
    if (j == 0) first_ic = ic;
    Trajectory sub;
    for (int i = 0; i < count; ++i) {
      const long idx = std::lround(static_cast<double>(i) * static_cast<double>(m_train) /
                                   static_cast<double>(count - 1));
      sub.times.push_back(fine.times[idx]);
      sub.states.push_back(fine.states[idx]);
    }
    ds.trajectories.push_back(std::move(sub));
  }

  // Test trajectory: same initial condition, doubled interval, same spacing.
  const long m_test = steps_between(0.0, 4.0, h_ref);
  const int count_test = 2 * (base_count + (0 < remainder ? 1 : 0)) - 1;
  const Trajectory fine = integrate(sys, first_ic, 0.0, h_ref, m_test, ref_tab);
  for (int i = 0; i < count_test; ++i) {
    const long idx = std::lround(static_cast<double>(i) * static_cast<double>(m_test) /
                                 static_cast<double>(count_test - 1));
    ds.test_trajectory.times.push_back(fine.times[idx]);
    ds.test_trajectory.states.push_back(fine.states[idx]);
  }
  return ds;
}

double ClassificationProblem::batch_loss_and_grads(const NetParams& params,
                                                   std::span<const std::size_t> batch,
                                                   NetGrads& grads) {
  double sum = 0.0;
  auto grad_arrays = parameter_arrays(grads);
  for (std::size_t idx : batch) {
    const std::size_t k = data_.train_idx[idx];
    const Vec x{data_.features[k][0], data_.features[k][1]};
    const ForwardResult res = forward(params, x);
    const auto [loss, dloss] = loss_classification(res.output[0], data_.labels[k]);
    sum += loss;
    BackwardResult bw = backward(params, res.tape, Vec{dloss});
    auto sample_arrays = parameter_arrays(bw.grads);
    for (std::size_t a = 0; a < grad_arrays.size(); ++a)
      for (std::size_t i = 0; i < grad_arrays[a]->size(); ++i)
        (*grad_arrays[a])[i] += (*sample_arrays[a])[i];
  }
  return sum;
}

double ClassificationProblem::accuracy(const NetParams& params,
                                       const std::vector<std::size_t>& idx) const {
  std::size_t correct = 0;
  for (std::size_t k : idx) {
    const Vec x{data_.features[k][0], data_.features[k][1]};
    const ForwardResult res = forward(params, x);
    const int predicted = res.output[0] > 0.0 ? 1 : 0;
    if (predicted == data_.labels[k]) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(idx.size());
}

double ClassificationProblem::train_loss(const NetParams& params) {
  double sum = 0.0;
  for (std::size_t k : data_.train_idx) {
    const Vec x{data_.features[k][0], data_.features[k][1]};
    const ForwardResult res = forward(params, x);
    sum += loss_classification(res.output[0], data_.labels[k]).first;
  }
  return sum / static_cast<double>(data_.train_idx.size());
}

double ClassificationProblem::test_metric(const NetParams& params) {
  return accuracy(params, data_.test_idx);
}

Vec ClassificationProblem::audit_input() const {
  const std::size_t k = data_.train_idx.front();
  return Vec{data_.features[k][0], data_.features[k][1]};
}

Trajectory kepler_rollout(const NetParams& net, const PhaseState& z0,
                          const std::vector<double>& times, KeplerRolloutTapes* tapes) {
  if (times.size() < 1) throw std::invalid_argument("rollout needs a non-empty grid");
  const PrkTableau& tab = net.tableau;
  Trajectory traj;
  traj.times = times;
  traj.states.reserve(times.size());
  traj.states.push_back(z0);
  if (tapes) {
    tapes->steps.clear();
    tapes->steps.resize(times.size() - 1);
  }

  PhaseState z = z0;
  for (std::size_t k = 0; k + 1 < times.size(); ++k) {
    const double dt = times[k + 1] - times[k];
    if (tapes) tapes->steps[k].resize(tab.stages);
    sprk_substeps(
        z.q, z.p, times[k], dt, tab,
        [&](int, const Vec& p, double) { return p; },  // dq/dt = p is known
        [&](int i, const Vec& q, double) {
          ForwardResult res = forward(net, q);
          if (tapes) tapes->steps[k][i] = std::move(res.tape);
          return res.output;
        });
    for (double v : z.q)
      if (!std::isfinite(v))
        throw DivergenceError("trajectory integration blew up; reduce the grid step or the learning rate");
    traj.states.push_back(z);
  }
  return traj;
}

double kepler_loss_and_grads(const NetParams& net, const Trajectory& observed,
                             NetGrads& grads) {
  KeplerRolloutTapes tapes;
  const Trajectory predicted =
      kepler_rollout(net, observed.states.front(), observed.times, &tapes);
  const TrajectoryLoss loss = loss_trajectory(predicted, observed);

  const std::size_t n = net.dim;
  const PrkTableau& tab = net.tableau;
  auto grad_arrays = parameter_arrays(grads);
  Vec lam_q(n, 0.0), lam_p(n, 0.0);
  for (std::size_t k = observed.times.size() - 1; k >= 1; --k) {
    // Adjoint of the state at grid point k.
    for (std::size_t i = 0; i < n; ++i) {
      lam_q[i] += loss.gradients[k].q[i];
      lam_p[i] += loss.gradients[k].p[i];
    }
    const double dt = observed.times[k] - observed.times[k - 1];
    for (int i = tab.stages - 1; i >= 0; --i) {
      const double wp = dt * tab.B_d[i];
      if (wp != 0.0) {
        // P += wp * net(Q): scale the cotangent through the network.
        Vec w_lam(n);
        for (std::size_t c = 0; c < n; ++c) w_lam[c] = wp * lam_p[c];
        BackwardResult bw = backward(net, tapes.steps[k - 1][i], w_lam);
        auto sample_arrays = parameter_arrays(bw.grads);
        for (std::size_t a = 0; a < grad_arrays.size(); ++a)
          for (std::size_t e = 0; e < grad_arrays[a]->size(); ++e)
            (*grad_arrays[a])[e] += (*sample_arrays[a])[e];
        for (std::size_t c = 0; c < n; ++c) lam_q[c] += bw.input_grad[c];
      }
      const double wq = dt * tab.b_d[i];
      if (wq != 0.0)
        for (std::size_t c = 0; c < n; ++c) lam_p[c] += wq * lam_q[c];
    }
  }
  return loss.value;
}

double KeplerProblem::batch_loss_and_grads(const NetParams& params,
                                           std::span<const std::size_t> batch,
                                           NetGrads& grads) {
  double sum = 0.0;
  for (std::size_t j : batch) sum += kepler_loss_and_grads(params, data_.trajectories[j], grads);
  return sum;
}

double KeplerProblem::train_loss(const NetParams& params) {
  double sum = 0.0;
  for (const Trajectory& traj : data_.trajectories) {
    const Trajectory predicted =
        kepler_rollout(params, traj.states.front(), traj.times, nullptr);
    sum += loss_trajectory(predicted, traj).value;
  }
  return sum / static_cast<double>(data_.trajectories.size());
}

double KeplerProblem::test_metric(const NetParams& params) {
  const Trajectory predicted = kepler_rollout(params, data_.test_trajectory.states.front(),
                                              data_.test_trajectory.times, nullptr);
  return loss_trajectory(predicted, data_.test_trajectory).value;
}

Vec KeplerProblem::audit_input() const {
  return data_.trajectories.front().states.front().q;
}

RunConfig default_classification_config() {
  RunConfig cfg;
  cfg.tableau = "sprk4";
  cfg.layers = 12;
  cfg.step_size = 0.25;
  cfg.activation = "tanh";
  cfg.share_stages = true;
  cfg.optimizer = "adam";
  cfg.learning_rate = 1e-2;
  cfg.epochs = 100;
  cfg.batch_size = 32;
  cfg.lambda = 0.0;
  cfg.seed = 1;
  return cfg;
}

RunConfig default_kepler_config() {
  RunConfig cfg;
  cfg.tableau = "sprk4";
  cfg.layers = 6;
  cfg.step_size = 0.1;
  cfg.activation = "tanh";
  cfg.share_stages = true;
  cfg.optimizer = "sgd";
  cfg.learning_rate = 1e-2;
  cfg.epochs = 270;
  cfg.batch_size = 1;  // full batch per trajectory
  cfg.lambda = 1e-4;
  cfg.seed = 1;
  return cfg;
}

RunConfig parse_config(const nlohmann::json& doc, RunConfig base) {
  if (!doc.is_object()) throw std::invalid_argument("config must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (key == "tableau")
      base.tableau = value.get<std::string>();
    else if (key == "layers")
      base.layers = value.get<int>();
    else if (key == "step_size")
      base.step_size = value.get<double>();
    else if (key == "activation")
      base.activation = value.get<std::string>();
    else if (key == "share_stages")
      base.share_stages = value.get<bool>();
    else if (key == "optimizer")
      base.optimizer = value.get<std::string>();
    else if (key == "learning_rate")
      base.learning_rate = value.get<double>();
    else if (key == "epochs")
      base.epochs = value.get<int>();
    else if (key == "batch_size")
      base.batch_size = value.get<int>();
    else if (key == "lambda")
      base.lambda = value.get<double>();
    else if (key == "seed")
      base.seed = value.get<std::uint64_t>();
    else
      throw std::invalid_argument("unknown config key '" + key + "'");
  }
  return base;
}

RunConfig load_config_file(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config file '" + path + "': " + e.what());
  }
  return parse_config(doc, std::move(base));
}

nlohmann::ordered_json report_to_json(const RunReport& report) {
  nlohmann::ordered_json doc;
  doc["tableau"] = report.tableau;
  doc["test_metric"] = report.test_metric;
  doc["min_layer_norm"] = report.min_layer_norm;
  return doc;
}

namespace {

RunReport finish_report(const RunConfig& config, NetParams model, Metrics metrics) {
  RunReport report;
  report.tableau = config.tableau;
  report.test_metric = metrics.epochs.back().test_metric;
  report.min_layer_norm = metrics.epochs.front().min_layer_norm;
  for (const EpochRecord& r : metrics.epochs)
    report.min_layer_norm = std::min(report.min_layer_norm, r.min_layer_norm);
  report.metrics = std::move(metrics);
  report.model = std::move(model);
  return report;
}

}  // namespace

RunReport run_classification(const RunConfig& config) {
  const ClassificationDataset data = gen_classification(config.seed);
  const PrkTableau tableau = builtin_tableau(config.tableau);
  NetParams net = init_network(2, config.layers, 1, tableau, config.step_size,
                               activation_from_name(config.activation), config.share_stages,
                               splitmix64(config.seed ^ kNetStream));
  ClassificationProblem problem(data);
  OptimizerState opt;
  opt.kind = optimizer_from_name(config.optimizer);
  opt.learning_rate = config.learning_rate;
  LossSpec loss{LossKind::BinaryClassification, config.lambda};
  Metrics metrics =
      train(net, problem, loss, opt, {config.epochs, config.batch_size, config.seed});
  return finish_report(config, std::move(net), std::move(metrics));
}

RunReport run_kepler(const RunConfig& config) {
  const KeplerDataset data = gen_kepler(config.seed);
  const PrkTableau tableau = builtin_tableau(config.tableau);
  NetParams net = init_network(2, config.layers, 2, tableau, config.step_size,
                               activation_from_name(config.activation), config.share_stages,
                               splitmix64(config.seed ^ kNetStream));
  KeplerProblem problem(data);
  OptimizerState opt;
  opt.kind = optimizer_from_name(config.optimizer);
  opt.learning_rate = config.learning_rate;
  LossSpec loss{LossKind::TrajectoryL2, config.lambda};
  Metrics metrics =
      train(net, problem, loss, opt, {config.epochs, config.batch_size, config.seed});
  return finish_report(config, std::move(net), std::move(metrics));
}

std::vector<ConvergenceRow> run_convergence() {
  const SeparableHamiltonian sys = test_field_nonautonomous();
  const PhaseState z0{{0.8}, {0.6}};
  const std::vector<double> steps{0.1, 0.05, 0.025, 0.0125};
  const std::pair<std::string, int> methods[] = {
      {"euler1", 1}, {"sprk2", 2}, {"sprk3", 3}, {"sprk4", 4}};
  std::vector<ConvergenceRow> rows;
  for (const auto& [name, order] : methods) {
    ConvergenceRow row;
    row.tableau = name;
    row.nominal_order = order;
    try {
      row.slope = estimate_order(sys, z0, 0.0, 1.0, builtin_tableau(name), steps).slope;
    } catch (const SaturationError&) {
      row.saturated = true;
    }
    rows.push_back(row);
  }
  return rows;
}

void write_convergence_csv(std::ostream& out, const std::vector<ConvergenceRow>& rows) {
  out << "tableau,nominal_order,measured_slope,status\n";
  char buf[64];
  for (const ConvergenceRow& row : rows) {
    std::snprintf(buf, sizeof buf, "%.17g", row.slope);
    out << row.tableau << "," << row.nominal_order << "," << (row.saturated ? "" : buf) << ","
        << (row.saturated ? "saturated" : "ok") << "\n";
  }
}

VerifyReport run_verify(const PrkTableau& tableau) {
  VerifyReport report;
  report.name = tableau.name;
  report.symplectic = check_symplectic(tableau);
  report.order = check_order_conditions(tableau, 3);

  bool consistent = true;
  for (const OrderCondition& cond : report.order.order_residuals)
    if (cond.order == 1 && cond.residual != 0) consistent = false;
  report.pass = report.symplectic.symplectic && report.order.nodes_ok && consistent;

  if (tableau.explicit_form && tableau.symplectic) {
    try {
      report.slope = estimate_order(test_field_nonautonomous(), {{0.8}, {0.6}}, 0.0, 1.0,
                                    tableau, {0.1, 0.05, 0.025, 0.0125})
                         .slope;
      report.has_slope = true;
    } catch (const SaturationError&) {
      report.has_slope = false;
    }
  }
  return report;
}

void print_verify_report(std::ostream& out, const VerifyReport& report) {
  out << "tableau: " << report.name << "\n";
  out << "symplectic residuals (b_i A_ij + B_j a_ji - b_i B_j):\n";
  for (const auto& row : report.symplectic.symplectic_residuals) {
    out << " ";
    for (const auto& r : row) out << " " << format_rational(r);
    out << "\n";
  }
  out << "symplectic: " << (report.symplectic.symplectic ? "yes" : "NO") << "\n";

  out << "node residuals c - rowsum(A):";
  for (const auto& r : report.order.node_residual_c) out << " " << format_rational(r);
  out << "\nnode residuals C - rowsum(a):";
  for (const auto& r : report.order.node_residual_C) out << " " << format_rational(r);
  out << "\nnode conditions: " << (report.order.nodes_ok ? "ok" : "VIOLATED") << "\n";

  out << "order conditions:\n";
  for (const OrderCondition& cond : report.order.order_residuals)
    out << "  p=" << cond.order << " " << cond.label << " = " << format_rational(cond.computed)
        << " (target " << format_rational(cond.target) << ", residual "
        << format_rational(cond.residual) << ")\n";
  out << "max verified algebraic order: " << report.order.max_verified_order << "\n";
  if (report.has_slope) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", report.slope);
    out << "empirical convergence slope: " << buf << "\n";
  } else {
    out << "empirical convergence slope: n/a\n";
  }
  out << "verdict: " << (report.pass ? "PASS" : "FAIL") << "\n";
}

}  // namespace sprknet
