#include "sprknet/integrator.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace sprknet {

namespace {

void require_step_inputs(const SeparableHamiltonian& h_sys, const PhaseState& state, double h,
                         const PrkTableau& tab) {
  if (!tab.explicit_form)
    throw std::invalid_argument("tableau '" + tab.name + "' is not in explicit form");
  if (!tab.symplectic)
    throw std::invalid_argument("tableau '" + tab.name + "' is not symplectic");
  if (!(h >= 0.0)) throw std::invalid_argument("step size must be non-negative");
  if (state.q.size() != state.p.size())
    throw std::invalid_argument("phase state has mismatched q/p lengths");
  if (state.q.size() != h_sys.dim)
    throw std::invalid_argument("phase state dimension does not match the system");
}

}  // namespace

PhaseState sprk_step(const SeparableHamiltonian& h_sys, const PhaseState& state, double t,
                     double h, const PrkTableau& tab) {
  require_step_inputs(h_sys, state, h, tab);
  PhaseState z = state;
  sprk_substeps(
      z.q, z.p, t, h, tab,
      [&](int, const Vec& p, double ts) { return h_sys.f(p, ts); },
      [&](int, const Vec& q, double ts) { return h_sys.g(q, ts); });
  return z;
}

Trajectory integrate(const SeparableHamiltonian& h_sys, const PhaseState& state0, double t0,
                     double h, long n_steps, const PrkTableau& tab) {
  if (n_steps < 0) throw std::invalid_argument("n_steps must be non-negative");
  Trajectory traj;
  traj.times.reserve(n_steps + 1);
  traj.states.reserve(n_steps + 1);
  traj.times.push_back(t0);
  traj.states.push_back(state0);
  PhaseState z = state0;
  for (long k = 0; k < n_steps; ++k) {
    const double t = t0 + static_cast<double>(k) * h;
    try {
      z = sprk_step(h_sys, z, t, h, tab);
    } catch (const std::exception& e) {
      throw IntegrationError(k, e.what());
    }
    traj.times.push_back(t0 + static_cast<double>(k + 1) * h);
    traj.states.push_back(z);
  }
  return traj;
}

Mat step_jacobian(const SeparableHamiltonian& h_sys, const PhaseState& state, double t,
                  double h, const PrkTableau& tab) {
  require_step_inputs(h_sys, state, h, tab);
  if (!h_sys.df_dp || !h_sys.dg_dq)
    throw std::invalid_argument("system does not provide field Jacobians");

  const std::size_t n = h_sys.dim;
  Mat d = Mat::identity(2 * n);
  Vec q = state.q, p = state.p;
  for (int i = 0; i < tab.stages; ++i) {
    const double wq = h * tab.b_d[i];
    if (wq != 0.0) {
      const double ts = t + tab.c_d[i] * h;
      const Mat jf = h_sys.df_dp(p, ts);
      accumulate_rows(d, jf, wq, 0, n);
      axpy(q, wq, h_sys.f(p, ts));
    }
    const double wp = h * tab.B_d[i];
    if (wp != 0.0) {
      const double ts = t + tab.C_d[i] * h;
      const Mat jg = h_sys.dg_dq(q, ts);
      accumulate_rows(d, jg, wp, n, 0);
      axpy(p, wp, h_sys.g(q, ts));
    }
  }
  return d;
}

double symplectic_residual(const Mat& d) {
  if (d.rows != d.cols || d.rows % 2 != 0)
    throw std::invalid_argument("symplectic residual needs a square even-dimensional matrix");
  const Mat j = symplectic_j(d.rows / 2);
  Mat r = matmul(transpose(d), matmul(j, d));
  for (std::size_t i = 0; i < r.data.size(); ++i) r.data[i] -= j.data[i];
  return max_abs(r);
}

OrderEstimate estimate_order(const SeparableHamiltonian& h_sys, const PhaseState& state0,
                             double t0, double total_time, const PrkTableau& tab,
                             const std::vector<double>& step_set) {
  if (step_set.size() < 2) throw std::invalid_argument("estimate_order needs at least two steps");

  auto steps_for = [&](double h) {
    const double ratio = total_time / h;
    const long n = std::lround(ratio);
    if (n < 1 || std::abs(ratio - static_cast<double>(n)) > 1e-9 * ratio)
      throw std::invalid_argument("step size does not divide the time interval");
    return n;
  };

  double h_min = step_set.front(), h_max = step_set.front();
  for (double h : step_set) {
    h_min = std::min(h_min, h);
    h_max = std::max(h_max, h);
  }
  const double h_ref = h_min / 64.0;
  const PrkTableau ref_tab = builtin_tableau(TableauKind::Sprk4);
  const Trajectory ref = integrate(h_sys, state0, t0, h_ref, steps_for(h_ref), ref_tab);
  const PhaseState& z_ref = ref.states.back();

  OrderEstimate est;
  for (double h : step_set) {
    const Trajectory traj = integrate(h_sys, state0, t0, h, steps_for(h), tab);
    const PhaseState& z = traj.states.back();
    double err2 = 0.0;
    for (std::size_t i = 0; i < z.q.size(); ++i) {
      err2 += (z.q[i] - z_ref.q[i]) * (z.q[i] - z_ref.q[i]);
      err2 += (z.p[i] - z_ref.p[i]) * (z.p[i] - z_ref.p[i]);
    }
    est.steps.push_back(h);
    est.errors.push_back(std::sqrt(err2));
  }

  double err_at_hmax = 0.0;
  for (std::size_t i = 0; i < est.steps.size(); ++i)
    if (est.steps[i] == h_max) err_at_hmax = est.errors[i];
  if (err_at_hmax < 1e-13)
    throw SaturationError("endpoint error is at rounding level; shrink the interval or grow h");

  // Least-squares slope of log(error) against log(h).
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double m = static_cast<double>(est.steps.size());
  for (std::size_t i = 0; i < est.steps.size(); ++i) {
    const double x = std::log(est.steps[i]);
    const double y = std::log(std::max(est.errors[i], 1e-300));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  est.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  return est;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  const std::size_t n = traj.states.empty() ? 0 : traj.states.front().q.size();
  out << "t";
  for (std::size_t i = 1; i <= n; ++i) out << ",q" << i;
  for (std::size_t i = 1; i <= n; ++i) out << ",p" << i;
  out << "\n";
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
  };
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    put(traj.times[k]);
    for (double v : traj.states[k].q) {
      out << ",";
      put(v);
    }
    for (double v : traj.states[k].p) {
      out << ",";
      put(v);
    }
    out << "\n";
  }
}

Trajectory read_trajectory_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty trajectory file");
  std::size_t cols = 1;
  for (char ch : line)
    if (ch == ',') ++cols;
  if (cols < 3 || cols % 2 == 0)
    throw std::invalid_argument("trajectory header must be t,q1..qn,p1..pn");
  const std::size_t n = (cols - 1) / 2;

  Trajectory traj;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(row, cell, ',')) vals.push_back(std::stod(cell));
    if (vals.size() != cols) throw std::invalid_argument("trajectory row has wrong arity");
    PhaseState z;
    z.q.assign(vals.begin() + 1, vals.begin() + 1 + n);
    z.p.assign(vals.begin() + 1 + n, vals.end());
    traj.times.push_back(vals[0]);
    traj.states.push_back(std::move(z));
  }
  return traj;
}

}  // namespace sprknet
