#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "sprknet/rational.hpp"

namespace sprknet {

Rational parse_rational(std::string_view text);
std::string format_rational(const Rational& r);

/// Partitioned Runge-Kutta tableau. The (a, b, c) table drives the q-stages
/// (slopes k_i = dH/dp) and the (A, B, C) table drives the p-stages
/// (slopes l_i = -dH/dq). Nodes are always derived from the cross-coupled
/// row sums c_i = sum_j A_ij and C_i = sum_j a_ij, never stored externally.
struct PrkTableau {
  std::string name;
  int stages = 0;
  std::vector<Rational> b, B;
  std::vector<std::vector<Rational>> a, A;
  std::vector<Rational> c, C;

  // Explicit lower-triangular structure: a_ij = b_j for j <= i,
  // A_ij = B_j for j < i, zero elsewhere.
  bool explicit_form = false;
  bool symplectic = false;

  // Double-precision copies used by the time stepper.
  std::vector<double> b_d, B_d, c_d, C_d;
};

enum class TableauKind { Euler1, Sprk2, Sprk3, Sprk4 };

/// The four built-in schemes: the 1-stage symplectic Euler tableau and the
/// explicit symplectic PRK methods of orders 2, 3 and 4.
PrkTableau builtin_tableau(TableauKind kind);
PrkTableau builtin_tableau(const std::string& name);
const std::vector<std::string>& builtin_tableau_names();

/// Builds a validated tableau from full coefficient arrays. Nodes are
/// computed; structural flags are derived. Rejects dimension mismatches and
/// stage counts outside [1, 16].
PrkTableau make_tableau(std::string name, std::vector<Rational> b,
                        std::vector<Rational> B,
                        std::vector<std::vector<Rational>> a,
                        std::vector<std::vector<Rational>> A);

/// Builds the explicit lower-triangular tableau determined by the weight
/// vectors alone.
PrkTableau make_explicit_tableau(std::string name, std::vector<Rational> b,
                                 std::vector<Rational> B);

struct OrderCondition {
  int order = 0;
  std::string label;
  Rational target;
  Rational computed;
  Rational residual;  // computed - target, exact
};

struct ConditionReport {
  // b_i A_ij + B_j a_ji - b_i B_j, evaluated exactly for every (i, j).
  std::vector<std::vector<Rational>> symplectic_residuals;
  bool symplectic = false;

  // c_i - sum_j A_ij and C_i - sum_j a_ij.
  std::vector<Rational> node_residual_c, node_residual_C;
  bool nodes_ok = false;

  std::vector<OrderCondition> order_residuals;
  int max_verified_order = 0;
};

/// Evaluates the symplecticity condition for separable Hamiltonians in exact
/// rational arithmetic. The method is symplectic iff every residual is zero.
ConditionReport check_symplectic(const PrkTableau& t);

/// Evaluates the algebraic order conditions up to p_max (capped at 3) in
/// exact rational arithmetic. If the node conditions are violated, only the
/// order-1 consistency conditions are evaluated.
ConditionReport check_order_conditions(const PrkTableau& t, int p_max = 3);

/// JSON document form: {"s": int, "b": ["7/24", ...], "B": [...],
/// "a": [[...]], "A": [[...]]}. Nodes are recomputed on load.
PrkTableau tableau_from_json(const nlohmann::json& doc, std::string name = "custom");
nlohmann::ordered_json tableau_to_json(const PrkTableau& t);
PrkTableau load_tableau_file(const std::string& path);

}  // namespace sprknet
