#include "sprknet/hamiltonian.hpp"

#include <cmath>
#include <stdexcept>

namespace sprknet {

namespace {

const double kPi = 3.14159265358979323846;

void require_shapes(const StageControls& u) {
  const std::size_t n = u.beta1.size();
  if (u.w1.rows != n || u.w1.cols != n || u.w2.rows != n || u.w2.cols != n ||
      u.beta2.size() != n || u.eta1.size() != n || u.eta2.size() != n)
    throw std::invalid_argument("network field parameters are not shape-consistent");
}

}  // namespace

Activation activation_from_name(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "sigmoid") return Activation::Sigmoid;
  throw std::invalid_argument("unknown activation '" + name + "' (expected tanh or sigmoid)");
}

std::string activation_name(Activation a) {
  return a == Activation::Tanh ? "tanh" : "sigmoid";
}

double activate(Activation a, double x) {
  if (a == Activation::Tanh) return std::tanh(x);
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

double activate_deriv(Activation a, double x) {
  if (a == Activation::Tanh) {
    const double t = std::tanh(x);
    return 1.0 - t * t;
  }
  const double s = activate(a, x);
  return s * (1.0 - s);
}

double activate_antideriv(Activation a, double x) {
  if (a == Activation::Tanh)  // log cosh
    return std::abs(x) + std::log1p(std::exp(-2.0 * std::abs(x))) - std::log(2.0);
  // softplus
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

StageControls zero_controls(std::size_t n) {
  StageControls u;
  u.w1 = Mat(n, n);
  u.w2 = Mat(n, n);
  u.beta1.assign(n, 0.0);
  u.beta2.assign(n, 0.0);
  u.eta1.assign(n, 0.0);
  u.eta2.assign(n, 0.0);
  return u;
}

Vec network_f_eval(const StageControls& u, Activation act, const Vec& p) {
  Vec z = matvec(u.w2, p);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = activate(act, z[i] + u.beta2[i]);
  Vec out = tmatvec(u.w2, z);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += u.eta2[i];
  return out;
}

Vec network_g_eval(const StageControls& u, Activation act, const Vec& q) {
  Vec z = matvec(u.w1, q);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = activate(act, z[i] + u.beta1[i]);
  Vec out = tmatvec(u.w1, z);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = u.eta1[i] - out[i];
  return out;
}

namespace {

// W^T diag(sigma'(W x + beta)) W, the symmetric Jacobian of both field halves.
Mat gauss_newton_jacobian(const Mat& w, const Vec& beta, Activation act, const Vec& x) {
  const std::size_t n = w.rows;
  Vec u = matvec(w, x);
  for (std::size_t i = 0; i < n; ++i) u[i] = activate_deriv(act, u[i] + beta[i]);
  Mat out(n, n);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t r = 0; r < n; ++r) {
      const double wkr = w(k, r) * u[k];
      if (wkr == 0.0) continue;
      for (std::size_t c = 0; c < n; ++c) out(r, c) += wkr * w(k, c);
    }
  return out;
}

}  // namespace

Mat network_f_jacobian(const StageControls& u, Activation act, const Vec& p) {
  return gauss_newton_jacobian(u.w2, u.beta2, act, p);
}

Mat network_g_jacobian(const StageControls& u, Activation act, const Vec& q) {
  Mat m = gauss_newton_jacobian(u.w1, u.beta1, act, q);
  for (double& x : m.data) x = -x;
  return m;
}

SeparableHamiltonian network_field(const NetworkFieldParams& params) {
  require_shapes(params.controls);
  const StageControls u = params.controls;
  const Activation act = params.activation;

  SeparableHamiltonian h;
  h.dim = u.beta1.size();
  h.f = [u, act](const Vec& p, double) { return network_f_eval(u, act, p); };
  h.g = [u, act](const Vec& q, double) { return network_g_eval(u, act, q); };
  h.df_dp = [u, act](const Vec& p, double) { return network_f_jacobian(u, act, p); };
  h.dg_dq = [u, act](const Vec& q, double) { return network_g_jacobian(u, act, q); };
  h.energy = [u, act](const Vec& q, const Vec& p, double) {
    double e = 0.0;
    const Vec uq = matvec(u.w1, q);
    const Vec up = matvec(u.w2, p);
    for (std::size_t i = 0; i < q.size(); ++i) {
      e += activate_antideriv(act, uq[i] + u.beta1[i]);
      e += activate_antideriv(act, up[i] + u.beta2[i]);
      e += -u.eta1[i] * q[i] + u.eta2[i] * p[i];
    }
    return e;
  };
  return h;
}

SeparableHamiltonian kepler_field() {
  auto radius = [](const Vec& q) {
    const double r = std::sqrt(q[0] * q[0] + q[1] * q[1]);
    if (r < kKeplerSingularRadius)
      throw std::domain_error("kepler field evaluated at |q| < 1e-8 (collision singularity)");
    return r;
  };

  SeparableHamiltonian h;
  h.dim = 2;
  h.f = [](const Vec& p, double) { return p; };
  h.g = [radius](const Vec& q, double) {
    const double r = radius(q);
    const double scale = -kPi / (4.0 * r * std::sqrt(r));  // -pi / (4 r^{3/2})
    return Vec{scale * q[0], scale * q[1]};
  };
  h.df_dp = [](const Vec&, double) { return Mat::identity(2); };
  h.dg_dq = [radius](const Vec& q, double) {
    const double r = radius(q);
    const double r32 = r * std::sqrt(r);
    const double s = -kPi / (4.0 * r32);
    const double o = kPi * 3.0 / (8.0 * r32 * r * r);  // (pi 3/8) r^{-7/2}
    Mat m(2, 2);
    m(0, 0) = s + o * q[0] * q[0];
    m(0, 1) = o * q[0] * q[1];
    m(1, 0) = o * q[1] * q[0];
    m(1, 1) = s + o * q[1] * q[1];
    return m;
  };
  h.energy = [radius](const Vec& q, const Vec& p, double) {
    const double r = radius(q);
    return 0.5 * (p[0] * p[0] + p[1] * p[1]) + 0.5 * kPi * std::sqrt(r);
  };
  return h;
}

SeparableHamiltonian test_field_nonautonomous() {
  SeparableHamiltonian h;
  h.dim = 1;
  h.f = [](const Vec& p, double t) { return Vec{(1.0 + std::sin(t)) * p[0]}; };
  h.g = [](const Vec& q, double t) { return Vec{-(1.0 + 0.5 * std::cos(t)) * q[0]}; };
  h.df_dp = [](const Vec&, double t) {
    Mat m(1, 1);
    m(0, 0) = 1.0 + std::sin(t);
    return m;
  };
  h.dg_dq = [](const Vec&, double t) {
    Mat m(1, 1);
    m(0, 0) = -(1.0 + 0.5 * std::cos(t));
    return m;
  };
  h.energy = [](const Vec& q, const Vec& p, double t) {
    return 0.5 * (1.0 + std::sin(t)) * p[0] * p[0] + 0.5 * (1.0 + 0.5 * std::cos(t)) * q[0] * q[0];
  };
  return h;
}

SeparableHamiltonian harmonic_oscillator() {
  SeparableHamiltonian h;
  h.dim = 1;
  h.f = [](const Vec& p, double) { return p; };
  h.g = [](const Vec& q, double) { return Vec{-q[0]}; };
  h.df_dp = [](const Vec&, double) { return Mat::identity(1); };
  h.dg_dq = [](const Vec&, double) {
    Mat m(1, 1);
    m(0, 0) = -1.0;
    return m;
  };
  h.energy = [](const Vec& q, const Vec& p, double) {
    return 0.5 * (p[0] * p[0] + q[0] * q[0]);
  };
  return h;
}

}  // namespace sprknet
