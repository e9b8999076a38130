#include "sprknet/network.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace sprknet {

namespace {

void require_consistent(const NetParams& params) {
  const std::size_t n = params.dim;
  if (n == 0) throw std::invalid_argument("network dimension must be positive");
  if (!(params.h > 0.0)) throw std::invalid_argument("network step size must be positive");
  if (!params.tableau.explicit_form || !params.tableau.symplectic)
    throw std::invalid_argument("network tableau must be explicit and symplectic");
  const std::size_t slots_expected = 1;
  for (const LayerParams& layer : params.layers) {
    const std::size_t want =
        layer.share_stages ? slots_expected : static_cast<std::size_t>(params.tableau.stages);
    if (layer.stages.size() != want)
      throw std::invalid_argument("layer has wrong stage-parameter count");
    for (const StageControls& u : layer.stages) {
      if (u.w1.rows != n || u.w1.cols != n || u.w2.rows != n || u.w2.cols != n ||
          u.beta1.size() != n || u.beta2.size() != n || u.eta1.size() != n ||
          u.eta2.size() != n)
        throw std::invalid_argument("stage controls are not shape-consistent");
    }
  }
  if (params.w_out.rows != params.b_out.size() || params.w_out.cols != 2 * n)
    throw std::invalid_argument("output layer has wrong shape");
}

double sigma_deriv_from_value(Activation act, double s) {
  // tanh' = 1 - tanh^2, sigmoid' = s (1 - s); both expressible through the
  // stored activation value.
  return act == Activation::Tanh ? 1.0 - s * s : s * (1.0 - s);
}

void check_tape(const NetParams& params, const ForwardTape& tape) {
  if (tape.dim != params.dim || tape.out_dim != params.out_dim() ||
      tape.layer_count != params.depth() || tape.stage_count != params.tableau.stages ||
      tape.tableau_name != params.tableau.name || tape.h != params.h ||
      tape.activation != params.activation ||
      (params.depth() > 0 && tape.share_stages != params.layers.front().share_stages))
    throw std::invalid_argument("stale tape: network configuration does not match");
}

}  // namespace

NetGrads zero_grads(const NetParams& params) {
  NetGrads g;
  g.layers.reserve(params.layers.size());
  for (const LayerParams& layer : params.layers) {
    LayerParams gl;
    gl.share_stages = layer.share_stages;
    gl.stages.assign(layer.stages.size(), zero_controls(params.dim));
    g.layers.push_back(std::move(gl));
  }
  g.w_out = Mat(params.w_out.rows, params.w_out.cols);
  g.b_out.assign(params.b_out.size(), 0.0);
  return g;
}

namespace {

template <class Net>
std::vector<std::vector<double>*> collect_arrays(Net& net) {
  std::vector<std::vector<double>*> out;
  for (auto& layer : net.layers)
    for (auto& u : layer.stages) {
      out.push_back(&u.w1.data);
      out.push_back(&u.w2.data);
      out.push_back(&u.beta1);
      out.push_back(&u.beta2);
      out.push_back(&u.eta1);
      out.push_back(&u.eta2);
    }
  out.push_back(&net.w_out.data);
  out.push_back(&net.b_out);
  return out;
}

}  // namespace

std::vector<std::vector<double>*> parameter_arrays(NetParams& params) {
  return collect_arrays(params);
}

std::vector<std::vector<double>*> parameter_arrays(NetGrads& grads) {
  return collect_arrays(grads);
}

std::size_t parameter_count(const NetParams& params) {
  std::size_t count = 0;
  auto arrays = parameter_arrays(const_cast<NetParams&>(params));
  for (const auto* arr : arrays) count += arr->size();
  return count;
}

PhaseState augment(const Vec& x) {
  PhaseState z;
  z.q.assign(x.size(), 0.0);
  z.p = x;
  return z;
}

ForwardResult forward(const NetParams& params, const Vec& x) {
  require_consistent(params);
  if (x.size() != params.dim)
    throw std::invalid_argument("input dimension does not match the network");

  ForwardResult res;
  ForwardTape& tape = res.tape;
  tape.dim = params.dim;
  tape.out_dim = params.out_dim();
  tape.layer_count = params.depth();
  tape.stage_count = params.tableau.stages;
  tape.share_stages = params.layers.empty() ? false : params.layers.front().share_stages;
  tape.tableau_name = params.tableau.name;
  tape.h = params.h;
  tape.activation = params.activation;
  tape.input = x;

  PhaseState z = augment(x);
  const Activation act = params.activation;
  tape.layers.reserve(params.layers.size());
  for (const LayerParams& layer : params.layers) {
    LayerTape lt;
    lt.input = z;
    lt.stages.resize(params.tableau.stages);
    sprk_substeps(
        z.q, z.p, 0.0, params.h, params.tableau,
        [&](int i, const Vec& p, double) {
          const StageControls& u = layer.stage(i);
          StageTape& st = lt.stages[i];
          st.drift = true;
          st.p_eval = p;
          st.u2 = matvec(u.w2, p);
          for (std::size_t k = 0; k < st.u2.size(); ++k) st.u2[k] += u.beta2[k];
          st.s2.resize(st.u2.size());
          for (std::size_t k = 0; k < st.u2.size(); ++k) st.s2[k] = activate(act, st.u2[k]);
          Vec out = tmatvec(u.w2, st.s2);
          for (std::size_t k = 0; k < out.size(); ++k) out[k] += u.eta2[k];
          return out;
        },
        [&](int i, const Vec& q, double) {
          const StageControls& u = layer.stage(i);
          StageTape& st = lt.stages[i];
          st.kick = true;
          st.q_eval = q;
          st.u1 = matvec(u.w1, q);
          for (std::size_t k = 0; k < st.u1.size(); ++k) st.u1[k] += u.beta1[k];
          st.s1.resize(st.u1.size());
          for (std::size_t k = 0; k < st.u1.size(); ++k) st.s1[k] = activate(act, st.u1[k]);
          Vec out = tmatvec(u.w1, st.s1);
          for (std::size_t k = 0; k < out.size(); ++k) out[k] = u.eta1[k] - out[k];
          return out;
        });
    tape.layers.push_back(std::move(lt));
  }

  tape.final_state = z;
  Vec full(2 * params.dim);
  std::copy(z.q.begin(), z.q.end(), full.begin());
  std::copy(z.p.begin(), z.p.end(), full.begin() + params.dim);
  res.output = matvec(params.w_out, full);
  for (std::size_t i = 0; i < res.output.size(); ++i) res.output[i] += params.b_out[i];
  tape.output = res.output;
  return res;
}

BackwardResult backward(const NetParams& params, const ForwardTape& tape,
                        const Vec& grad_output) {
  require_consistent(params);
  check_tape(params, tape);
  if (grad_output.size() != params.out_dim())
    throw std::invalid_argument("grad_output dimension does not match the output layer");

  const std::size_t n = params.dim;
  BackwardResult res;
  res.grads = zero_grads(params);

  // Output layer: o = W0 z + b0.
  const PhaseState& zf = tape.final_state;
  for (std::size_t r = 0; r < params.w_out.rows; ++r) {
    res.grads.b_out[r] += grad_output[r];
    for (std::size_t cidx = 0; cidx < n; ++cidx) {
      res.grads.w_out(r, cidx) += grad_output[r] * zf.q[cidx];
      res.grads.w_out(r, n + cidx) += grad_output[r] * zf.p[cidx];
    }
  }
  Vec lam_q(n, 0.0), lam_p(n, 0.0);
  for (std::size_t r = 0; r < params.w_out.rows; ++r)
    for (std::size_t cidx = 0; cidx < n; ++cidx) {
      lam_q[cidx] += params.w_out(r, cidx) * grad_output[r];
      lam_p[cidx] += params.w_out(r, n + cidx) * grad_output[r];
    }

  const Activation act = params.activation;
  const PrkTableau& tab = params.tableau;
  for (int layer = params.depth() - 1; layer >= 0; --layer) {
    const LayerTape& lt = tape.layers[layer];
    for (int i = tab.stages - 1; i >= 0; --i) {
      const StageTape& st = lt.stages[i];
      const StageControls& u = params.layers[layer].stage(i);
      StageControls& gu = res.grads.layers[layer].stage(i);

      // Reverse of P += wp (-W1^T s(u1) + eta1), evaluated at q_eval.
      const double wp = params.h * tab.B_d[i];
      if (wp != 0.0) {
        Vec w1lam = matvec(u.w1, lam_p);  // diag(sigma'(u1)) W1 lam_p
        for (std::size_t k = 0; k < n; ++k)
          w1lam[k] *= sigma_deriv_from_value(act, st.s1[k]);
        // parameter gradients
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t cdx = 0; cdx < n; ++cdx)
            gu.w1(r, cdx) -= wp * (st.s1[r] * lam_p[cdx] + w1lam[r] * st.q_eval[cdx]);
        for (std::size_t k = 0; k < n; ++k) {
          gu.beta1[k] -= wp * w1lam[k];
          gu.eta1[k] += wp * lam_p[k];
        }
        // state adjoint: lam_q += wp * (dg/dq)^T lam_p = -wp W1^T diag W1 lam_p
        const Vec back = tmatvec(u.w1, w1lam);
        for (std::size_t k = 0; k < n; ++k) lam_q[k] -= wp * back[k];
      }

      // Reverse of Q += wq (W2^T s(u2) + eta2), evaluated at p_eval.
      const double wq = params.h * tab.b_d[i];
      if (wq != 0.0) {
        Vec w2lam = matvec(u.w2, lam_q);  // diag(sigma'(u2)) W2 lam_q
        for (std::size_t k = 0; k < n; ++k)
          w2lam[k] *= sigma_deriv_from_value(act, st.s2[k]);
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t cdx = 0; cdx < n; ++cdx)
            gu.w2(r, cdx) += wq * (st.s2[r] * lam_q[cdx] + w2lam[r] * st.p_eval[cdx]);
        for (std::size_t k = 0; k < n; ++k) {
          gu.beta2[k] += wq * w2lam[k];
          gu.eta2[k] += wq * lam_q[k];
        }
        const Vec back = tmatvec(u.w2, w2lam);
        for (std::size_t k = 0; k < n; ++k) lam_p[k] += wq * back[k];
      }
    }
  }

  res.input_grad = lam_p;  // q0 is identically zero, x enters as p0
  return res;
}

Mat layer_state_jacobian(const NetParams& params, const LayerTape& layer_tape, int layer) {
  const std::size_t n = params.dim;
  const PrkTableau& tab = params.tableau;
  const Activation act = params.activation;
  Mat d = Mat::identity(2 * n);
  for (int i = 0; i < tab.stages; ++i) {
    const StageTape& st = layer_tape.stages[i];
    const StageControls& u = params.layers[layer].stage(i);
    const double wq = params.h * tab.b_d[i];
    if (wq != 0.0) {
      Mat jf(n, n);
      for (std::size_t k = 0; k < n; ++k) {
        const double sk = sigma_deriv_from_value(act, st.s2[k]);
        for (std::size_t r = 0; r < n; ++r) {
          const double wkr = u.w2(k, r) * sk;
          if (wkr == 0.0) continue;
          for (std::size_t cdx = 0; cdx < n; ++cdx) jf(r, cdx) += wkr * u.w2(k, cdx);
        }
      }
      accumulate_rows(d, jf, wq, 0, n);
    }
    const double wp = params.h * tab.B_d[i];
    if (wp != 0.0) {
      Mat jg(n, n);
      for (std::size_t k = 0; k < n; ++k) {
        const double sk = sigma_deriv_from_value(act, st.s1[k]);
        for (std::size_t r = 0; r < n; ++r) {
          const double wkr = u.w1(k, r) * sk;
          if (wkr == 0.0) continue;
          for (std::size_t cdx = 0; cdx < n; ++cdx) jg(r, cdx) -= wkr * u.w1(k, cdx);
        }
      }
      accumulate_rows(d, jg, wp, n, 0);
    }
  }
  return d;
}

GradientAudit gradient_norm_audit(const NetParams& params, const Vec& x) {
  const ForwardResult res = forward(params, x);
  GradientAudit audit;
  const int depth = params.depth();
  std::vector<Mat> jacobians(depth);
  audit.layer_norms.resize(depth);
  for (int k = 0; k < depth; ++k) {
    jacobians[k] = layer_state_jacobian(params, res.tape.layers[k], k);
    audit.layer_norms[k] = spectral_norm(jacobians[k]);
  }
  audit.suffix_norms.resize(depth);
  Mat suffix = Mat::identity(2 * params.dim);
  for (int k = depth - 1; k >= 0; --k) {
    suffix = matmul(suffix, jacobians[k]);
    audit.suffix_norms[k] = spectral_norm(suffix);
  }
  // An empty network is the identity map, norm exactly one.
  audit.min_layer_norm = depth == 0 ? 1.0 : audit.layer_norms.front();
  for (double v : audit.layer_norms) audit.min_layer_norm = std::min(audit.min_layer_norm, v);
  return audit;
}

Vec uap_closed_form(const NetParams& params, const Vec& x) {
  require_consistent(params);
  if (x.size() != params.dim)
    throw std::invalid_argument("input dimension does not match the network");
  const std::size_t n = params.dim;
  for (const LayerParams& layer : params.layers)
    for (const StageControls& u : layer.stages) {
      for (double v : u.w1.data)
        if (v != 0.0) throw std::invalid_argument("restricted form requires W1 = 0");
      for (double v : u.beta1)
        if (v != 0.0) throw std::invalid_argument("restricted form requires beta1 = 0");
      for (double v : u.eta2)
        if (v != 0.0) throw std::invalid_argument("restricted form requires eta2 = 0");
    }

  // Under the restriction the momentum only accumulates eta kicks, so the
  // whole network collapses to one wide layer: q_N = sum_j K_j sigma(V_j p0
  // + d_j) with d_j collecting the kicks seen by term j.
  struct Term {
    const Mat* v;  // V_j = W2 of the emitting stage
    Vec d;         // d_j
    double weight; // h b_i
  };
  std::vector<Term> terms;
  const PrkTableau& tab = params.tableau;
  Vec shift(n, 0.0);  // p - p0 accumulated from kicks
  for (int layer = 0; layer < params.depth(); ++layer) {
    for (int i = 0; i < tab.stages; ++i) {
      const StageControls& u = params.layers[layer].stage(i);
      const double wq = params.h * tab.b_d[i];
      if (wq != 0.0) {
        Term t;
        t.v = &u.w2;
        t.d = matvec(u.w2, shift);
        for (std::size_t k = 0; k < n; ++k) t.d[k] += u.beta2[k];
        t.weight = wq;
        terms.push_back(std::move(t));
      }
      const double wp = params.h * tab.B_d[i];
      if (wp != 0.0) axpy(shift, wp, u.eta1);
    }
  }

  Vec q_n(n, 0.0);
  for (const Term& t : terms) {
    Vec arg = matvec(*t.v, x);
    for (std::size_t k = 0; k < n; ++k) arg[k] = activate(params.activation, arg[k] + t.d[k]);
    const Vec contrib = tmatvec(*t.v, arg);
    axpy(q_n, t.weight, contrib);
  }
  return q_n;
}

NetParams init_network(std::size_t dim, int layers, std::size_t out_dim,
                       const PrkTableau& tableau, double h, Activation activation,
                       bool share_stages, std::uint64_t seed) {
  NetParams params;
  params.dim = dim;
  params.h = h;
  params.tableau = tableau;
  params.activation = activation;

  Rng rng(seed);
  const double limit_w = std::sqrt(6.0 / static_cast<double>(2 * dim));
  const int slots = share_stages ? 1 : tableau.stages;
  params.layers.resize(layers);
  for (LayerParams& layer : params.layers) {
    layer.share_stages = share_stages;
    layer.stages.assign(slots, zero_controls(dim));
    for (StageControls& u : layer.stages) {
      for (double& v : u.w1.data) v = rng.uniform(-limit_w, limit_w);
      for (double& v : u.w2.data) v = rng.uniform(-limit_w, limit_w);
    }
  }
  const double limit_out = std::sqrt(6.0 / static_cast<double>(out_dim + 2 * dim));
  params.w_out = Mat(out_dim, 2 * dim);
  for (double& v : params.w_out.data) v = rng.uniform(-limit_out, limit_out);
  params.b_out.assign(out_dim, 0.0);
  require_consistent(params);
  return params;
}

std::string double_to_hex(double v) {
  char buf[48];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::hex);
  return std::string(buf, res.ptr);
}

double hex_to_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v, std::chars_format::hex);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::invalid_argument("invalid hex-float literal '" + s + "'");
  return v;
}

namespace {

nlohmann::ordered_json vec_to_json(const Vec& v) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (double x : v) arr.push_back(double_to_hex(x));
  return arr;
}

Vec vec_from_json(const nlohmann::json& arr) {
  Vec v;
  for (const auto& x : arr) v.push_back(hex_to_double(x.get<std::string>()));
  return v;
}

}  // namespace

nlohmann::ordered_json net_to_json(const NetParams& params) {
  nlohmann::ordered_json doc;
  if (params.tableau.name == "euler1" || params.tableau.name == "sprk2" ||
      params.tableau.name == "sprk3" || params.tableau.name == "sprk4")
    doc["tableau"] = params.tableau.name;
  else
    doc["tableau"] = tableau_to_json(params.tableau);
  doc["h"] = double_to_hex(params.h);
  doc["n"] = params.dim;
  doc["m"] = params.out_dim();
  doc["layers"] = params.depth();
  doc["activation"] = activation_name(params.activation);
  doc["share_stages"] = params.layers.empty() ? false : params.layers.front().share_stages;
  nlohmann::ordered_json layer_arr = nlohmann::ordered_json::array();
  for (const LayerParams& layer : params.layers) {
    nlohmann::ordered_json stage_arr = nlohmann::ordered_json::array();
    for (const StageControls& u : layer.stages) {
      nlohmann::ordered_json su;
      su["w1"] = vec_to_json(u.w1.data);
      su["w2"] = vec_to_json(u.w2.data);
      su["beta1"] = vec_to_json(u.beta1);
      su["beta2"] = vec_to_json(u.beta2);
      su["eta1"] = vec_to_json(u.eta1);
      su["eta2"] = vec_to_json(u.eta2);
      stage_arr.push_back(std::move(su));
    }
    layer_arr.push_back(std::move(stage_arr));
  }
  doc["params"] = std::move(layer_arr);
  doc["w_out"] = vec_to_json(params.w_out.data);
  doc["b_out"] = vec_to_json(params.b_out);
  return doc;
}

NetParams net_from_json(const nlohmann::json& doc) {
  NetParams params;
  if (doc.at("tableau").is_string())
    params.tableau = builtin_tableau(doc.at("tableau").get<std::string>());
  else
    params.tableau = tableau_from_json(doc.at("tableau"));
  params.h = hex_to_double(doc.at("h").get<std::string>());
  params.dim = doc.at("n").get<std::size_t>();
  const std::size_t m = doc.at("m").get<std::size_t>();
  const int depth = doc.at("layers").get<int>();
  params.activation = activation_from_name(doc.at("activation").get<std::string>());
  const bool share = doc.at("share_stages").get<bool>();

  const std::size_t n = params.dim;
  const auto& layer_arr = doc.at("params");
  if (static_cast<int>(layer_arr.size()) != depth)
    throw std::invalid_argument("model document: layer count mismatch");
  for (const auto& stage_arr : layer_arr) {
    LayerParams layer;
    layer.share_stages = share;
    for (const auto& su : stage_arr) {
      StageControls u = zero_controls(n);
      u.w1.data = vec_from_json(su.at("w1"));
      u.w2.data = vec_from_json(su.at("w2"));
      u.beta1 = vec_from_json(su.at("beta1"));
      u.beta2 = vec_from_json(su.at("beta2"));
      u.eta1 = vec_from_json(su.at("eta1"));
      u.eta2 = vec_from_json(su.at("eta2"));
      if (u.w1.data.size() != n * n || u.w2.data.size() != n * n)
        throw std::invalid_argument("model document: weight array size mismatch");
      layer.stages.push_back(std::move(u));
    }
    params.layers.push_back(std::move(layer));
  }
  params.w_out = Mat(m, 2 * n);
  params.w_out.data = vec_from_json(doc.at("w_out"));
  if (params.w_out.data.size() != m * 2 * n)
    throw std::invalid_argument("model document: output weight size mismatch");
  params.b_out = vec_from_json(doc.at("b_out"));
  require_consistent(params);
  return params;
}

void save_net(const NetParams& params, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file '" + path + "'");
  out << net_to_json(params).dump(1) << "\n";
}

NetParams load_net(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open model file '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("model file '" + path + "': " + e.what());
  }
  return net_from_json(doc);
}

}  // namespace sprknet
