#pragma once

#include <functional>
#include <optional>
#include <string>

#include "sprknet/linalg.hpp"

namespace sprknet {

enum class Activation { Tanh, Sigmoid };

Activation activation_from_name(const std::string& name);
std::string activation_name(Activation a);

double activate(Activation a, double x);
double activate_deriv(Activation a, double x);
// Antiderivative with sigma_tilde' = sigma: log cosh for tanh, softplus for
// sigmoid. Evaluated in overflow-safe form.
double activate_antideriv(Activation a, double x);

/// A separable Hamiltonian H(q,p,t) = H1(q,t) + H2(p,t) presented through its
/// vector fields: f(p,t) = dH/dp drives dq/dt and g(q,t) = -dH/dq drives
/// dp/dt. Jacobians are carried for analytic step Jacobians; energy is
/// optional.
struct SeparableHamiltonian {
  std::size_t dim = 0;
  std::function<Vec(const Vec& p, double t)> f;
  std::function<Vec(const Vec& q, double t)> g;
  std::function<Mat(const Vec& p, double t)> df_dp;  // may be empty
  std::function<Mat(const Vec& q, double t)> dg_dq;  // may be empty
  std::function<double(const Vec& q, const Vec& p, double t)> energy;  // may be empty
};

/// One set of the network's stage controls u = (W1, W2, beta1, beta2,
/// eta1, eta2). The same layout serves as the parameter block of a single
/// network stage and as the coefficients of the field below.
struct StageControls {
  Mat w1, w2;
  Vec beta1, beta2, eta1, eta2;
};

StageControls zero_controls(std::size_t n);

struct NetworkFieldParams {
  StageControls controls;
  Activation activation = Activation::Tanh;
};

// Shared evaluation kernels; the network forward pass calls these directly so
// that it is bit-identical with generic integration of the field.
Vec network_f_eval(const StageControls& u, Activation act, const Vec& p);
Vec network_g_eval(const StageControls& u, Activation act, const Vec& q);
Mat network_f_jacobian(const StageControls& u, Activation act, const Vec& p);
Mat network_g_jacobian(const StageControls& u, Activation act, const Vec& q);

/// The network Hamiltonian field:
///   dq/dt = W2^T sigma(W2 p + beta2) + eta2
///   dp/dt = -W1^T sigma(W1 q + beta1) + eta1
/// with energy 1.sigma~(W1 q + beta1) + 1.sigma~(W2 p + beta2)
///             - eta1.q + eta2.p.
SeparableHamiltonian network_field(const NetworkFieldParams& params);

/// Kepler-type central force in the plane: dq/dt = p,
/// dp/dt = -pi/(4 |q|^{3/2}) q, energy |p|^2/2 + (pi/2) |q|^{1/2}.
/// Evaluation below |q| = 1e-8 raises a singularity error.
SeparableHamiltonian kepler_field();

constexpr double kKeplerSingularRadius = 1e-8;

/// One-degree-of-freedom fixture with time dependence in both parts:
/// H(q,p,t) = (1 + sin t) p^2 / 2 + (1 + cos(t)/2) q^2 / 2.
SeparableHamiltonian test_field_nonautonomous();

/// H = (p^2 + q^2)/2 in one degree of freedom.
SeparableHamiltonian harmonic_oscillator();

}  // namespace sprknet
