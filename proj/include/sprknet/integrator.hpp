#pragma once

#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sprknet/hamiltonian.hpp"
#include "sprknet/linalg.hpp"
#include "sprknet/tableau.hpp"

namespace sprknet {

struct PhaseState {
  Vec q, p;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<PhaseState> states;
};

struct IntegrationError : std::runtime_error {
  IntegrationError(long step, const std::string& what)
      : std::runtime_error("integration failed at step " + std::to_string(step) + ": " + what),
        step_index(step) {}
  long step_index;
};

struct SaturationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Core stage recursion of the explicit SPRK step, shared verbatim by the
/// generic integrator and the network forward pass. For each stage i the
/// position substep runs before the momentum substep, so the momentum slope
/// at stage i sees the freshly drifted positions while the position slope at
/// stage i sees only momentum kicks of stages j < i:
///   Q += h b_i f(P, t + c_i h)
///   P += h B_i g(Q, t + C_i h)
/// Zero-weight substeps skip their field evaluation.
template <class FEval, class GEval>
inline void sprk_substeps(Vec& q, Vec& p, double t, double h, const PrkTableau& tab,
                          FEval&& f_eval, GEval&& g_eval) {
  for (int i = 0; i < tab.stages; ++i) {
    const double wq = h * tab.b_d[i];
    if (wq != 0.0) {
      const Vec fi = f_eval(i, p, t + tab.c_d[i] * h);
      axpy(q, wq, fi);
    }
    const double wp = h * tab.B_d[i];
    if (wp != 0.0) {
      const Vec gi = g_eval(i, q, t + tab.C_d[i] * h);
      axpy(p, wp, gi);
    }
  }
}

/// One explicit SPRK step of size h from (q, p) at time t. The tableau must
/// be in explicit form; field evaluation errors propagate.
PhaseState sprk_step(const SeparableHamiltonian& h_sys, const PhaseState& state, double t,
                     double h, const PrkTableau& tab);

/// n_steps repetitions of sprk_step on the uniform grid t0, t0+h, ...
Trajectory integrate(const SeparableHamiltonian& h_sys, const PhaseState& state0, double t0,
                     double h, long n_steps, const PrkTableau& tab);

/// Analytic derivative of the step map with respect to the input state,
/// obtained by chaining the affine stage updates with the field Jacobians.
Mat step_jacobian(const SeparableHamiltonian& h_sys, const PhaseState& state, double t,
                  double h, const PrkTableau& tab);

/// max |D^T J D - J|; zero exactly when D preserves the symplectic form.
double symplectic_residual(const Mat& d);

struct OrderEstimate {
  double slope = 0.0;
  std::vector<double> steps;
  std::vector<double> errors;
};

/// Empirical convergence order: endpoint errors against a fine sprk4
/// reference (step = min(step_set)/64), least-squares slope in log-log.
/// Throws SaturationError when the largest step already sits at rounding
/// level (< 1e-13).
OrderEstimate estimate_order(const SeparableHamiltonian& h_sys, const PhaseState& state0,
                             double t0, double total_time, const PrkTableau& tab,
                             const std::vector<double>& step_set);

/// CSV with header t,q1..qn,p1..pn and 17 significant digits per value.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);
Trajectory read_trajectory_csv(std::istream& in);

}  // namespace sprknet
