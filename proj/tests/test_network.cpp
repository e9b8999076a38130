#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>

#include "sprknet/network.hpp"

using namespace sprknet;

namespace {

NetParams small_net(std::size_t n, int depth, const std::string& tableau, bool share,
                    std::uint64_t seed, std::size_t out_dim = 1) {
  return init_network(n, depth, out_dim, builtin_tableau(tableau), 0.1, Activation::Tanh,
                      share, seed);
}

void randomize(NetParams& params, std::uint64_t seed, double scale = 0.6) {
  Rng rng(seed);
  for (auto* arr : parameter_arrays(params))
    for (double& v : *arr) v = rng.uniform(-scale, scale);
}

NetParams zero_net(std::size_t n, int depth, const std::string& tableau, bool share,
                   std::size_t out_dim = 1) {
  NetParams params = small_net(n, depth, tableau, share, 1, out_dim);
  for (auto* arr : parameter_arrays(params))
    for (double& v : *arr) v = 0.0;
  return params;
}

}  // namespace

TEST_CASE("augment embeds features as (0, x)") {
  const PhaseState z = augment({1.0, 2.0});
  CHECK(z.q == Vec{0.0, 0.0});
  CHECK(z.p == Vec{1.0, 2.0});
  const PhaseState origin = augment({0.0, 0.0, 0.0});
  CHECK(origin.q == Vec{0.0, 0.0, 0.0});
  CHECK(origin.p == Vec{0.0, 0.0, 0.0});
  CHECK(augment(Vec(5, 1.0)).q.size() + augment(Vec(5, 1.0)).p.size() == 10);
}

TEST_CASE("zero parameters propagate the state unchanged at any depth") {
  for (const char* tableau : {"euler1", "sprk3"}) {
    NetParams params = zero_net(2, 7, tableau, false);
    const ForwardResult res = forward(params, {0.3, -1.2});
    CHECK(res.tape.final_state.q == Vec{0.0, 0.0});
    CHECK(res.tape.final_state.p == Vec{0.3, -1.2});
    CHECK(res.output == Vec{0.0});
  }
}

TEST_CASE("single euler1 layer with unit weights reproduces the hand values") {
  NetParams params = zero_net(1, 1, "euler1", false);
  params.layers[0].stages[0].w1(0, 0) = 1.0;
  params.layers[0].stages[0].w2(0, 0) = 1.0;
  const ForwardResult res = forward(params, {1.0});
  // Position substep first: q1 = 0 + 0.1 tanh(p0) = 0.1 tanh(1),
  // then p1 = 1 - 0.1 tanh(q1).
  const double q1 = 0.1 * std::tanh(1.0);
  const double p1 = 1.0 - 0.1 * std::tanh(q1);
  CHECK(res.tape.final_state.q[0] == doctest::Approx(q1).epsilon(1e-15));
  CHECK(res.tape.final_state.q[0] == doctest::Approx(0.07615941559).epsilon(1e-9));
  CHECK(res.tape.final_state.p[0] == doctest::Approx(p1).epsilon(1e-15));
}

TEST_CASE("forward equals stepwise integration of the per-layer fields, bit for bit") {
  NetParams params = small_net(2, 5, "sprk3", true, 77);
  randomize(params, 999);
  const Vec x{0.4, -0.9};
  const ForwardResult res = forward(params, x);

  PhaseState z = augment(x);
  for (const LayerParams& layer : params.layers) {
    const SeparableHamiltonian field = network_field({layer.stages[0], params.activation});
    z = sprk_step(field, z, 0.0, params.h, params.tableau);
  }
  CHECK(z.q == res.tape.final_state.q);
  CHECK(z.p == res.tape.final_state.p);
}

TEST_CASE("zero output gradient yields zero gradients everywhere") {
  NetParams params = small_net(2, 3, "sprk2", false, 5);
  randomize(params, 6);
  const ForwardResult res = forward(params, {0.2, 0.8});
  BackwardResult bw = backward(params, res.tape, {0.0});
  for (auto* arr : parameter_arrays(bw.grads))
    for (double v : *arr) CHECK(v == 0.0);
  CHECK(bw.input_grad == Vec{0.0, 0.0});
}

TEST_CASE("identity configuration: input gradient is the p-block of W0^T g") {
  NetParams params = zero_net(2, 4, "sprk2", false, 3);
  Rng rng(42);
  for (double& v : params.w_out.data) v = rng.uniform(-1.0, 1.0);
  const ForwardResult res = forward(params, {0.5, -0.25});
  const Vec g{1.7, -0.3, 0.9};
  const BackwardResult bw = backward(params, res.tape, g);
  for (std::size_t c = 0; c < 2; ++c) {
    double expect = 0.0;
    for (std::size_t r = 0; r < 3; ++r) expect += params.w_out(r, 2 + c) * g[r];
    CHECK(bw.input_grad[c] == doctest::Approx(expect).epsilon(1e-14));
  }
}

TEST_CASE("backward matches central finite differences on a small sprk3 net") {
  NetParams params = small_net(2, 3, "sprk3", false, 11);
  randomize(params, 12);
  REQUIRE(parameter_count(params) <= 200);

  const Vec x{0.7, -0.2};
  Rng rng(13);
  Vec probe(params.out_dim());
  for (double& v : probe) v = rng.uniform(-1.0, 1.0);

  const ForwardResult res = forward(params, x);
  const BackwardResult bw = backward(params, res.tape, probe);

  auto loss_at = [&](NetParams& mutated) {
    const ForwardResult r = forward(mutated, x);
    double s = 0.0;
    for (std::size_t i = 0; i < probe.size(); ++i) s += probe[i] * r.output[i];
    return s;
  };

  auto p_arrays = parameter_arrays(params);
  NetGrads grads_copy = bw.grads;
  auto g_arrays = parameter_arrays(grads_copy);
  const double eps = 1e-6;
  for (std::size_t a = 0; a < p_arrays.size(); ++a)
    for (std::size_t k = 0; k < p_arrays[a]->size(); ++k) {
      double& slot = (*p_arrays[a])[k];
      const double saved = slot;
      slot = saved + eps;
      const double up = loss_at(params);
      slot = saved - eps;
      const double down = loss_at(params);
      slot = saved;
      const double fd = (up - down) / (2 * eps);
      const double an = (*g_arrays[a])[k];
      CHECK(std::abs(an - fd) <= 1e-5 * std::max({std::abs(an), std::abs(fd), 1.0}));
    }

  // Input gradient against finite differences as well.
  for (std::size_t c = 0; c < x.size(); ++c) {
    Vec xp = x, xm = x;
    xp[c] += eps;
    xm[c] -= eps;
    const ForwardResult rp = forward(params, xp);
    const ForwardResult rm = forward(params, xm);
    double up = 0.0, down = 0.0;
    for (std::size_t i = 0; i < probe.size(); ++i) {
      up += probe[i] * rp.output[i];
      down += probe[i] * rm.output[i];
    }
    const double fd = (up - down) / (2 * eps);
    CHECK(std::abs(bw.input_grad[c] - fd) <=
          1e-5 * std::max({std::abs(bw.input_grad[c]), std::abs(fd), 1.0}));
  }
}

TEST_CASE("share_stages sums stage gradients into the shared slot") {
  NetParams shared = small_net(2, 2, "sprk3", true, 21);
  randomize(shared, 22);

  // Unshared twin whose stage slots all equal the shared parameters.
  NetParams unshared = small_net(2, 2, "sprk3", false, 21);
  for (std::size_t l = 0; l < shared.layers.size(); ++l)
    for (auto& slot : unshared.layers[l].stages) slot = shared.layers[l].stages[0];
  unshared.w_out = shared.w_out;
  unshared.b_out = shared.b_out;

  const Vec x{-0.3, 0.55};
  const ForwardResult rs = forward(shared, x);
  const ForwardResult ru = forward(unshared, x);
  CHECK(rs.output == ru.output);

  const BackwardResult bs = backward(shared, rs.tape, {1.0});
  const BackwardResult bu = backward(unshared, ru.tape, {1.0});
  for (std::size_t l = 0; l < shared.layers.size(); ++l) {
    const StageControls& gshared = bs.grads.layers[l].stages[0];
    StageControls sum = zero_controls(2);
    for (const StageControls& gu : bu.grads.layers[l].stages) {
      for (std::size_t k = 0; k < sum.w1.data.size(); ++k) {
        sum.w1.data[k] += gu.w1.data[k];
        sum.w2.data[k] += gu.w2.data[k];
      }
      for (std::size_t k = 0; k < 2; ++k) {
        sum.beta1[k] += gu.beta1[k];
        sum.beta2[k] += gu.beta2[k];
        sum.eta1[k] += gu.eta1[k];
        sum.eta2[k] += gu.eta2[k];
      }
    }
    for (std::size_t k = 0; k < sum.w1.data.size(); ++k) {
      CHECK(gshared.w1.data[k] == doctest::Approx(sum.w1.data[k]).epsilon(1e-12));
      CHECK(gshared.w2.data[k] == doctest::Approx(sum.w2.data[k]).epsilon(1e-12));
    }
  }
}

TEST_CASE("stale tapes are rejected") {
  NetParams params = small_net(2, 3, "sprk2", false, 31);
  const ForwardResult res = forward(params, {0.1, 0.1});
  NetParams other = small_net(2, 4, "sprk2", false, 31);
  CHECK_THROWS_AS(backward(other, res.tape, {1.0}), std::invalid_argument);
  NetParams retabled = small_net(2, 3, "sprk3", false, 31);
  CHECK_THROWS_AS(backward(retabled, res.tape, {1.0}), std::invalid_argument);
}

TEST_CASE("layer jacobian norms never fall below one") {
  for (const auto& name : builtin_tableau_names()) {
    NetParams params = small_net(2, 6, name, false, 41);
    randomize(params, 1000 + name.size());
    const GradientAudit audit = gradient_norm_audit(params, {0.35, -0.6});
    REQUIRE(audit.layer_norms.size() == 6);
    for (double v : audit.layer_norms) CHECK(v >= 1.0 - 1e-10);
    for (double v : audit.suffix_norms) CHECK(v >= 1.0 - 1e-10);
    CHECK(audit.min_layer_norm >= 1.0 - 1e-10);
  }
}

TEST_CASE("suffix products stay above one at depth 100") {
  NetParams params = small_net(2, 100, "sprk2", true, 51);
  randomize(params, 52, 0.3);
  const GradientAudit audit = gradient_norm_audit(params, {0.8, 0.1});
  REQUIRE(audit.suffix_norms.size() == 100);
  for (double v : audit.suffix_norms) CHECK(v >= 1.0 - 1e-10);
}

TEST_CASE("identity configuration has unit norms exactly") {
  NetParams params = zero_net(2, 5, "sprk4", false);
  const GradientAudit audit = gradient_norm_audit(params, {0.2, 0.4});
  for (double v : audit.layer_norms) CHECK(v == 1.0);
  for (double v : audit.suffix_norms) CHECK(v == 1.0);
}

TEST_CASE("layer symplecticity holds for every tableau") {
  for (const auto& name : builtin_tableau_names()) {
    NetParams params = small_net(2, 3, name, false, 61);
    randomize(params, 62);
    const ForwardResult res = forward(params, {0.1, -0.7});
    for (int k = 0; k < params.depth(); ++k) {
      const Mat d = layer_state_jacobian(params, res.tape.layers[k], k);
      CHECK(symplectic_residual(d) <= 1e-10);
    }
  }
}

namespace {

NetParams restricted_net(const std::string& tableau, int depth, bool share,
                         std::uint64_t seed) {
  NetParams params = small_net(2, depth, tableau, share, seed, 2);
  randomize(params, seed + 1);
  for (LayerParams& layer : params.layers)
    for (StageControls& u : layer.stages) {
      for (double& v : u.w1.data) v = 0.0;
      for (double& v : u.beta1) v = 0.0;
      for (double& v : u.eta2) v = 0.0;
    }
  return params;
}

}  // namespace

TEST_CASE("closed form agrees with the layered forward under the restriction") {
  int draw = 0;
  for (const auto& name : builtin_tableau_names())
    for (bool share : {false, true}) {
      NetParams params = restricted_net(name, 3, share, 100 + draw++);
      const Vec x{0.45, -0.15};
      const Vec closed = uap_closed_form(params, x);
      const ForwardResult res = forward(params, x);
      for (std::size_t i = 0; i < closed.size(); ++i)
        CHECK(std::abs(closed[i] - res.tape.final_state.q[i]) <= 1e-12);
    }
}

TEST_CASE("closed form with all weights zero is identically zero") {
  NetParams params = restricted_net("sprk3", 3, false, 200);
  for (LayerParams& layer : params.layers)
    for (StageControls& u : layer.stages)
      for (double& v : u.w2.data) v = 0.0;
  const Vec out = uap_closed_form(params, {1.0, 1.0});
  CHECK(out == Vec{0.0, 0.0});
}

TEST_CASE("closed form with zero etas reduces to the static sum") {
  NetParams params = restricted_net("sprk2", 2, false, 300);
  for (LayerParams& layer : params.layers)
    for (StageControls& u : layer.stages)
      for (double& v : u.eta1) v = 0.0;
  const Vec x{0.3, 0.6};
  const Vec closed = uap_closed_form(params, x);

  // With no kicks the momentum never moves: q_N = h sum b_i W2^T s(W2 p0 + b2).
  Vec by_hand(2, 0.0);
  for (const LayerParams& layer : params.layers)
    for (int i = 0; i < params.tableau.stages; ++i) {
      const StageControls& u = layer.stage(i);
      Vec arg = matvec(u.w2, x);
      for (std::size_t k = 0; k < arg.size(); ++k) arg[k] = std::tanh(arg[k] + u.beta2[k]);
      const Vec term = tmatvec(u.w2, arg);
      axpy(by_hand, params.h * params.tableau.b_d[i], term);
    }
  for (std::size_t i = 0; i < 2; ++i)
    CHECK(closed[i] == doctest::Approx(by_hand[i]).epsilon(1e-13));

  const ForwardResult res = forward(params, x);
  CHECK(res.tape.final_state.p == x);  // momentum untouched
  for (std::size_t i = 0; i < 2; ++i)
    CHECK(std::abs(closed[i] - res.tape.final_state.q[i]) <= 1e-12);
}

TEST_CASE("closed form rejects unrestricted parameters") {
  NetParams params = restricted_net("sprk2", 2, false, 400);
  params.layers[0].stages[0].w1(0, 1) = 0.3;
  CHECK_THROWS_AS(uap_closed_form(params, {0.1, 0.1}), std::invalid_argument);
}

TEST_CASE("hex float round trip is bit exact") {
  for (double v : {0.1, -3.141592653589793, 1e-308, 0.0, 123456.789e10}) {
    const double back = hex_to_double(double_to_hex(v));
    CHECK(std::memcmp(&back, &v, sizeof v) == 0);
  }
  CHECK_THROWS_AS(hex_to_double("zz"), std::invalid_argument);
}

TEST_CASE("model serialization round trip is bit exact") {
  NetParams params = small_net(2, 3, "sprk3", true, 71, 2);
  randomize(params, 72);
  const nlohmann::ordered_json doc = net_to_json(params);
  NetParams back = net_from_json(doc);

  auto a = parameter_arrays(params);
  auto b = parameter_arrays(back);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i]->size() == b[i]->size());
    for (std::size_t k = 0; k < a[i]->size(); ++k) {
      const double va = (*a[i])[k], vb = (*b[i])[k];
      CHECK(std::memcmp(&va, &vb, sizeof va) == 0);
    }
  }
  CHECK(back.h == params.h);
  CHECK(back.tableau.name == params.tableau.name);
  CHECK(back.activation == params.activation);
  CHECK(net_to_json(back).dump() == doc.dump());

  // The round-tripped model computes identically.
  const Vec x{0.9, -0.4};
  CHECK(forward(back, x).output == forward(params, x).output);
}
