#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "sprknet/hamiltonian.hpp"
#include "sprknet/rng.hpp"

using namespace sprknet;

namespace {

// Central-difference oracle for (dH/dp, -dH/dq) against (f, g).
void check_energy_gradients(const SeparableHamiltonian& h, const Vec& q, const Vec& p,
                            double t, double rel_tol) {
  const double eps = 1e-6;
  const Vec fq = h.f(p, t);
  const Vec gq = h.g(q, t);
  for (std::size_t i = 0; i < q.size(); ++i) {
    Vec qp = q, qm = q;
    qp[i] += eps;
    qm[i] -= eps;
    const double dh_dq = (h.energy(qp, p, t) - h.energy(qm, p, t)) / (2 * eps);
    CHECK(std::abs(-dh_dq - gq[i]) <= rel_tol * std::max({1.0, std::abs(gq[i])}));

    Vec pp = p, pm = p;
    pp[i] += eps;
    pm[i] -= eps;
    const double dh_dp = (h.energy(q, pp, t) - h.energy(q, pm, t)) / (2 * eps);
    CHECK(std::abs(dh_dp - fq[i]) <= rel_tol * std::max({1.0, std::abs(fq[i])}));
  }
}

StageControls random_controls(std::size_t n, Rng& rng) {
  StageControls u = zero_controls(n);
  for (double& x : u.w1.data) x = rng.uniform(-1.0, 1.0);
  for (double& x : u.w2.data) x = rng.uniform(-1.0, 1.0);
  for (double& x : u.beta1) x = rng.uniform(-0.5, 0.5);
  for (double& x : u.beta2) x = rng.uniform(-0.5, 0.5);
  for (double& x : u.eta1) x = rng.uniform(-0.5, 0.5);
  for (double& x : u.eta2) x = rng.uniform(-0.5, 0.5);
  return u;
}

}  // namespace

TEST_CASE("zero weights with a unit eta2 give a uniform drift in q") {
  StageControls u = zero_controls(2);
  u.eta2[0] = 1.0;
  const SeparableHamiltonian h = network_field({u, Activation::Tanh});
  const Vec f = h.f({0.3, -0.7}, 0.0);
  CHECK(f[0] == 1.0);
  CHECK(f[1] == 0.0);
  const Vec g = h.g({2.0, -1.0}, 0.0);
  CHECK(g[0] == 0.0);
  CHECK(g[1] == 0.0);
}

TEST_CASE("scalar tanh field vanishes at p = 0") {
  StageControls u = zero_controls(1);
  u.w2(0, 0) = 1.0;
  const SeparableHamiltonian h = network_field({u, Activation::Tanh});
  CHECK(h.f({0.0}, 0.0)[0] == 0.0);
  CHECK(h.f({1.0}, 0.0)[0] == doctest::Approx(std::tanh(1.0)).epsilon(1e-15));
}

TEST_CASE("network field energy is consistent with both fields") {
  Rng rng(0xF1E2D3);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 1 + trial % 3;
    const Activation act = trial % 2 == 0 ? Activation::Tanh : Activation::Sigmoid;
    const SeparableHamiltonian h = network_field({random_controls(n, rng), act});
    Vec q(n), p(n);
    for (auto& x : q) x = rng.uniform(-1.5, 1.5);
    for (auto& x : p) x = rng.uniform(-1.5, 1.5);
    check_energy_gradients(h, q, p, 0.0, 1e-6);
  }
}

TEST_CASE("network field jacobians match central differences") {
  Rng rng(0xB00C);
  const std::size_t n = 3;
  const SeparableHamiltonian h = network_field({random_controls(n, rng), Activation::Tanh});
  Vec p(n), q(n);
  for (auto& x : p) x = rng.uniform(-1.0, 1.0);
  for (auto& x : q) x = rng.uniform(-1.0, 1.0);
  const Mat jf = h.df_dp(p, 0.0);
  const Mat jg = h.dg_dq(q, 0.0);
  const double eps = 1e-6;
  for (std::size_t j = 0; j < n; ++j) {
    Vec pp = p, pm = p;
    pp[j] += eps;
    pm[j] -= eps;
    const Vec fp = h.f(pp, 0.0), fm = h.f(pm, 0.0);
    Vec qp = q, qm = q;
    qp[j] += eps;
    qm[j] -= eps;
    const Vec gp = h.g(qp, 0.0), gm = h.g(qm, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(jf(i, j) == doctest::Approx((fp[i] - fm[i]) / (2 * eps)).epsilon(1e-6));
      CHECK(jg(i, j) == doctest::Approx((gp[i] - gm[i]) / (2 * eps)).epsilon(1e-6));
    }
  }
}

TEST_CASE("shape mismatches are rejected") {
  StageControls u = zero_controls(2);
  u.beta1.resize(3);
  CHECK_THROWS_AS(network_field({u, Activation::Tanh}), std::invalid_argument);
}

TEST_CASE("kepler force at reference points") {
  const SeparableHamiltonian h = kepler_field();
  const double pi = 3.14159265358979323846;
  const Vec g1 = h.g({1.0, 0.0}, 0.0);
  CHECK(g1[0] == doctest::Approx(-pi / 4.0).epsilon(1e-15));
  CHECK(g1[1] == 0.0);
  // |q| = 4: prefactor -pi/(4 * 8) = -pi/32, times q = (4, 0).
  const Vec g4 = h.g({4.0, 0.0}, 0.0);
  CHECK(g4[0] == doctest::Approx(-pi / 8.0).epsilon(1e-15));
  CHECK(g4[1] == 0.0);
  const Vec f = h.f({0.25, -2.0}, 0.0);
  CHECK(f[0] == 0.25);
  CHECK(f[1] == -2.0);
}

TEST_CASE("kepler energy gradient reproduces the force to 1e-8") {
  const SeparableHamiltonian h = kepler_field();
  Rng rng(0x5EED);
  for (int trial = 0; trial < 20; ++trial) {
    const double r = rng.uniform(0.5, 2.0);
    const double th = rng.uniform(0.0, 6.28);
    const Vec q{r * std::cos(th), r * std::sin(th)};
    const Vec p{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    const Vec g = h.g(q, 0.0);
    const double eps = 1e-5;
    for (int i = 0; i < 2; ++i) {
      Vec qp = q, qm = q;
      qp[i] += eps;
      qm[i] -= eps;
      const double dh = (h.energy(qp, p, 0.0) - h.energy(qm, p, 0.0)) / (2 * eps);
      CHECK(std::abs(-dh - g[i]) <= 1e-8 * std::max(1.0, std::abs(g[i])));
    }
  }
}

TEST_CASE("kepler singularity guard rejects |q| below the cutoff") {
  const SeparableHamiltonian h = kepler_field();
  CHECK_THROWS_AS(h.g({0.0, 0.0}, 0.0), std::domain_error);
  CHECK_THROWS_AS(h.g({5e-9, 0.0}, 0.0), std::domain_error);
  CHECK_THROWS_AS(h.energy({0.0, 0.0}, {1.0, 0.0}, 0.0), std::domain_error);
  CHECK_NOTHROW(h.g({2e-8, 0.0}, 0.0));
}

TEST_CASE("kepler jacobian matches central differences") {
  const SeparableHamiltonian h = kepler_field();
  const Vec q{0.8, -0.45};
  const Mat jg = h.dg_dq(q, 0.0);
  const double eps = 1e-6;
  for (int j = 0; j < 2; ++j) {
    Vec qp = q, qm = q;
    qp[j] += eps;
    qm[j] -= eps;
    const Vec gp = h.g(qp, 0.0), gm = h.g(qm, 0.0);
    for (int i = 0; i < 2; ++i)
      CHECK(jg(i, j) == doctest::Approx((gp[i] - gm[i]) / (2 * eps)).epsilon(1e-7));
  }
}

TEST_CASE("non-autonomous test field reference values") {
  const SeparableHamiltonian h = test_field_nonautonomous();
  CHECK(h.f({1.0}, 0.0)[0] == 1.0);
  CHECK(h.g({1.0}, 0.0)[0] == -1.5);
  CHECK(h.energy({0.0}, {0.0}, 123.0) == 0.0);
  check_energy_gradients(h, {0.4}, {-0.9}, 0.7, 1e-6);
}

TEST_CASE("separability: f ignores q, g ignores p by construction of draws") {
  Rng rng(0xABCD);
  const SeparableHamiltonian h = network_field({random_controls(2, rng), Activation::Sigmoid});
  const Vec p{0.2, -0.4};
  const Vec q1{1.0, 2.0};
  // f and g take only their own variable; the randomized check drives both
  // through many points and pins the outputs as functions of (own var, t).
  const Vec f_ref = h.f(p, 0.3);
  const Vec g_ref = h.g(q1, 0.3);
  for (int trial = 0; trial < 5; ++trial) {
    CHECK(h.f(p, 0.3) == f_ref);
    CHECK(h.g(q1, 0.3) == g_ref);
  }
}
