#include "sprknet/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "sprknet/rng.hpp"

namespace sprknet {

OptKind optimizer_from_name(const std::string& name) {
  if (name == "sgd") return OptKind::Sgd;
  if (name == "adam") return OptKind::Adam;
  throw std::invalid_argument("unknown optimizer '" + name + "' (expected sgd or adam)");
}

std::string optimizer_name(OptKind k) { return k == OptKind::Sgd ? "sgd" : "adam"; }

std::pair<double, double> loss_classification(double output, int label) {
  if (!std::isfinite(output))
    throw std::invalid_argument("classification loss on a non-finite output");
  if (label != 0 && label != 1) throw std::invalid_argument("label must be 0 or 1");
  const double y = static_cast<double>(label);
  // Stable binary cross entropy of sigmoid(output).
  const double loss = std::max(output, 0.0) - output * y + std::log1p(std::exp(-std::abs(output)));
  const double sig = output >= 0.0 ? 1.0 / (1.0 + std::exp(-output))
                                   : std::exp(output) / (1.0 + std::exp(output));
  return {loss, sig - y};
}

TrajectoryLoss loss_trajectory(const Trajectory& predicted, const Trajectory& observed) {
  if (predicted.times.size() != observed.times.size())
    throw std::invalid_argument("trajectory loss: grids have different lengths");
  for (std::size_t k = 0; k < predicted.times.size(); ++k)
    if (std::abs(predicted.times[k] - observed.times[k]) >
        1e-9 * std::max(1.0, std::abs(observed.times[k])))
      throw std::invalid_argument("trajectory loss: grids do not match");

  TrajectoryLoss out;
  const double inv_n = 1.0 / static_cast<double>(predicted.states.size());
  out.gradients.resize(predicted.states.size());
  for (std::size_t k = 0; k < predicted.states.size(); ++k) {
    const PhaseState& a = predicted.states[k];
    const PhaseState& b = observed.states[k];
    PhaseState& g = out.gradients[k];
    g.q.resize(a.q.size());
    g.p.resize(a.p.size());
    for (std::size_t i = 0; i < a.q.size(); ++i) {
      const double dq = a.q[i] - b.q[i];
      const double dp = a.p[i] - b.p[i];
      out.value += (dq * dq + dp * dp) * inv_n;
      g.q[i] = 2.0 * inv_n * dq;
      g.p[i] = 2.0 * inv_n * dp;
    }
  }
  return out;
}

double regularizer(const NetParams& params, double lambda, NetGrads* grads) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw std::invalid_argument("regularizer weight must be finite and non-negative");
  double sum = 0.0;
  for (std::size_t li = 0; li < params.layers.size(); ++li) {
    const LayerParams& layer = params.layers[li];
    for (std::size_t si = 0; si < layer.stages.size(); ++si) {
      const StageControls& u = layer.stages[si];
      StageControls* gu = grads ? &grads->layers[li].stages[si] : nullptr;
      auto account = [&](const std::vector<double>& arr, std::vector<double>* garr) {
        for (std::size_t k = 0; k < arr.size(); ++k) {
          sum += arr[k] * arr[k];
          if (garr) (*garr)[k] += 2.0 * lambda * arr[k];
        }
      };
      account(u.w1.data, gu ? &gu->w1.data : nullptr);
      account(u.w2.data, gu ? &gu->w2.data : nullptr);
      account(u.beta1, gu ? &gu->beta1 : nullptr);
      account(u.beta2, gu ? &gu->beta2 : nullptr);
      account(u.eta1, gu ? &gu->eta1 : nullptr);
      account(u.eta2, gu ? &gu->eta2 : nullptr);
    }
  }
  return lambda * sum;
}

void optimizer_step(OptimizerState& opt, NetParams& params, NetGrads& grads) {
  auto p_arrays = parameter_arrays(params);
  auto g_arrays = parameter_arrays(grads);
  if (p_arrays.size() != g_arrays.size())
    throw std::invalid_argument("optimizer: parameter/gradient layout mismatch");

  std::size_t total = 0;
  for (std::size_t a = 0; a < p_arrays.size(); ++a) {
    if (p_arrays[a]->size() != g_arrays[a]->size())
      throw std::invalid_argument("optimizer: parameter/gradient shape mismatch");
    total += p_arrays[a]->size();
    for (double g : *g_arrays[a])
      if (!std::isfinite(g))
        throw DivergenceError("non-finite gradient encountered; aborting the epoch");
  }

  if (opt.kind == OptKind::Sgd) {
    for (std::size_t a = 0; a < p_arrays.size(); ++a)
      for (std::size_t k = 0; k < p_arrays[a]->size(); ++k)
        (*p_arrays[a])[k] -= opt.learning_rate * (*g_arrays[a])[k];
    ++opt.step_count;
    return;
  }

  if (opt.m.empty()) {
    opt.m.assign(total, 0.0);
    opt.v.assign(total, 0.0);
  }
  if (opt.m.size() != total)
    throw std::invalid_argument("optimizer: accumulator size does not match the parameters");

  ++opt.step_count;
  const double t = static_cast<double>(opt.step_count);
  const double bc1 = 1.0 - std::pow(opt.beta1, t);
  const double bc2 = 1.0 - std::pow(opt.beta2, t);
  std::size_t idx = 0;
  for (std::size_t a = 0; a < p_arrays.size(); ++a)
    for (std::size_t k = 0; k < p_arrays[a]->size(); ++k, ++idx) {
      const double g = (*g_arrays[a])[k];
      opt.m[idx] = opt.beta1 * opt.m[idx] + (1.0 - opt.beta1) * g;
      opt.v[idx] = opt.beta2 * opt.v[idx] + (1.0 - opt.beta2) * g * g;
      const double mhat = opt.m[idx] / bc1;
      const double vhat = opt.v[idx] / bc2;
      (*p_arrays[a])[k] -= opt.learning_rate * mhat / (std::sqrt(vhat) + opt.epsilon);
    }
}

void write_metrics_csv(std::ostream& out, const Metrics& metrics) {
  out << "epoch,loss,test_metric,min_layer_norm,seconds\n";
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
  };
  for (const EpochRecord& r : metrics.epochs) {
    out << r.epoch << ",";
    put(r.loss);
    out << ",";
    put(r.test_metric);
    out << ",";
    put(r.min_layer_norm);
    out << ",";
    put(r.seconds);
    out << "\n";
  }
}

Metrics train(NetParams& params, Problem& problem, const LossSpec& loss, OptimizerState& opt,
              const TrainOptions& options) {
  if (options.epochs < 1) throw std::invalid_argument("epochs must be at least 1");
  if (options.batch_size < 1) throw std::invalid_argument("batch size must be at least 1");
  const std::size_t n = problem.train_size();
  if (n == 0) throw std::invalid_argument("empty training set");

  Metrics metrics;
  double initial_loss = -1.0;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(splitmix64(options.seed + 0x9E37UL * static_cast<std::uint64_t>(epoch)));
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);

    for (std::size_t begin = 0; begin < n; begin += options.batch_size) {
      const std::size_t end = std::min(n, begin + options.batch_size);
      NetGrads grads = zero_grads(params);
      const std::span<const std::size_t> batch(order.data() + begin, end - begin);
      problem.batch_loss_and_grads(params, batch, grads);
      const double inv = 1.0 / static_cast<double>(batch.size());
      for (auto* arr : parameter_arrays(grads))
        for (double& gv : *arr) gv *= inv;
      regularizer(params, loss.lambda, &grads);
      optimizer_step(opt, params, grads);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = problem.train_loss(params) + regularizer(params, loss.lambda, nullptr);
    if (epoch == 1) initial_loss = std::max(std::abs(rec.loss), 1e-12);
    if (!std::isfinite(rec.loss) || std::abs(rec.loss) > 1e6 * initial_loss)
      throw DivergenceError("training diverged: loss " + std::to_string(rec.loss) +
                            " exceeds 1e6 x initial loss");
    rec.test_metric = problem.test_metric(params);
    rec.min_layer_norm = gradient_norm_audit(params, problem.audit_input()).min_layer_norm;
    rec.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    metrics.epochs.push_back(rec);
  }
  return metrics;
}

}  // namespace sprknet
