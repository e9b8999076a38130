#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "sprknet/hamiltonian.hpp"
#include "sprknet/integrator.hpp"
#include "sprknet/rng.hpp"
#include "sprknet/tableau.hpp"

namespace sprknet {

/// Stage controls of one layer. With share_stages a single parameter set is
/// used at every stage of the layer, which keeps the optimization parameter
/// count independent of the tableau's stage count.
struct LayerParams {
  std::vector<StageControls> stages;
  bool share_stages = false;

  const StageControls& stage(int i) const { return stages[share_stages ? 0 : i]; }
  StageControls& stage(int i) { return stages[share_stages ? 0 : i]; }
};

struct NetParams {
  std::size_t dim = 0;  // n: half phase dimension
  std::vector<LayerParams> layers;
  double h = 0.0;
  PrkTableau tableau;
  Activation activation = Activation::Tanh;
  Mat w_out;  // m x 2n
  Vec b_out;  // m

  std::size_t out_dim() const { return b_out.size(); }
  int depth() const { return static_cast<int>(layers.size()); }
};

/// Gradients (or any other parameter-shaped accumulator) in the same layout
/// as NetParams.
struct NetGrads {
  std::vector<LayerParams> layers;
  Mat w_out;
  Vec b_out;
};

NetGrads zero_grads(const NetParams& params);

/// Pointers to every parameter array, in a fixed order shared between
/// NetParams and NetGrads so optimizers can walk them pairwise.
std::vector<std::vector<double>*> parameter_arrays(NetParams& params);
std::vector<std::vector<double>*> parameter_arrays(NetGrads& grads);
std::size_t parameter_count(const NetParams& params);

struct StageTape {
  bool drift = false, kick = false;
  Vec p_eval, u2, s2;  // position substep: f evaluated at p_eval
  Vec q_eval, u1, s1;  // momentum substep: g evaluated at q_eval
};

struct LayerTape {
  PhaseState input;
  std::vector<StageTape> stages;
};

/// Everything the reverse pass needs to run without re-evaluating fields.
struct ForwardTape {
  std::size_t dim = 0, out_dim = 0;
  int layer_count = 0, stage_count = 0;
  bool share_stages = false;
  std::string tableau_name;
  double h = 0.0;
  Activation activation = Activation::Tanh;
  Vec input;
  std::vector<LayerTape> layers;
  PhaseState final_state;
  Vec output;
};

struct ForwardResult {
  Vec output;
  ForwardTape tape;
};

struct BackwardResult {
  NetGrads grads;
  Vec input_grad;  // with respect to the augmented input x = p0
};

/// Feature augmentation: x -> (q, p) = (0, x).
PhaseState augment(const Vec& x);

/// Layered forward pass. Each layer runs the same stage recursion as the
/// generic integrator on the network field with that layer's stage controls;
/// the output layer is W0 (q_N, p_N)^T + b0.
ForwardResult forward(const NetParams& params, const Vec& x);

/// Reverse accumulation through the taped stages. Stage gradients of a
/// share_stages layer are summed into its single parameter set.
BackwardResult backward(const NetParams& params, const ForwardTape& tape,
                        const Vec& grad_output);

struct GradientAudit {
  std::vector<double> layer_norms;   // spectral norm of each layer Jacobian
  std::vector<double> suffix_norms;  // norm of D_{N-1} ... D_k for each k
  double min_layer_norm = 0.0;
};

/// Spectral norms of the per-layer state Jacobians and of every suffix
/// product, evaluated on the forward pass from x.
GradientAudit gradient_norm_audit(const NetParams& params, const Vec& x);

/// The state Jacobian of a single layer, assembled from a forward tape.
Mat layer_state_jacobian(const NetParams& params, const LayerTape& layer_tape, int layer);

/// Closed-form output q_N = sum_j K_j sigma(V_j p0 + d_j) available under the
/// restricted parameter form (W1 = 0, beta1 = 0, eta2 = 0). Throws when the
/// restriction is violated. The sum is assembled independently of the layered
/// recursion and must agree with forward's q_N.
Vec uap_closed_form(const NetParams& params, const Vec& x);

/// Fresh network with uniform Glorot weights, zero biases and zero etas.
NetParams init_network(std::size_t dim, int layers, std::size_t out_dim,
                       const PrkTableau& tableau, double h, Activation activation,
                       bool share_stages, std::uint64_t seed);

/// Model (de)serialization. Doubles are stored as hex-float strings so the
/// round trip is bit-exact.
nlohmann::ordered_json net_to_json(const NetParams& params);
NetParams net_from_json(const nlohmann::json& doc);
void save_net(const NetParams& params, const std::string& path);
NetParams load_net(const std::string& path);

std::string double_to_hex(double v);
double hex_to_double(const std::string& s);

}  // namespace sprknet
