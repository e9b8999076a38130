#include "sprknet/tableau.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sprknet {

namespace {

constexpr int kMaxStages = 16;

Rational rat(long long num, long long den = 1) { return Rational(num, den); }

bool all_zero(const std::vector<std::vector<Rational>>& m) {
  for (const auto& row : m)
    for (const auto& x : row)
      if (x != 0) return false;
  return true;
}

}  // namespace

Rational parse_rational(std::string_view text) {
  std::string s(text);
  // trim
  const auto first = s.find_first_not_of(" \t");
  const auto last = s.find_last_not_of(" \t");
  if (first == std::string::npos) throw std::invalid_argument("empty rational literal");
  s = s.substr(first, last - first + 1);

  const auto slash = s.find('/');
  try {
    if (slash == std::string::npos) {
      std::size_t used = 0;
      const long long num = std::stoll(s, &used);
      if (used != s.size()) throw std::invalid_argument("");
      return rat(num);
    }
    std::size_t used = 0;
    const long long num = std::stoll(s.substr(0, slash), &used);
    if (used != slash) throw std::invalid_argument("");
    const std::string den_s = s.substr(slash + 1);
    const long long den = std::stoll(den_s, &used);
    if (used != den_s.size()) throw std::invalid_argument("");
    if (den == 0) throw std::invalid_argument("");
    return rat(num, den);
  } catch (const std::exception&) {
    throw std::invalid_argument("invalid rational literal '" + s + "' (expected e.g. \"7/24\" or \"-1\")");
  }
}

std::string format_rational(const Rational& r) {
  std::ostringstream out;
  out << r;  // boost prints "7/24" and "3" (no denominator when it is 1)
  return out.str();
}

PrkTableau make_tableau(std::string name, std::vector<Rational> b,
                        std::vector<Rational> B,
                        std::vector<std::vector<Rational>> a,
                        std::vector<std::vector<Rational>> A) {
  const int s = static_cast<int>(b.size());
  if (s < 1 || s > kMaxStages)
    throw std::invalid_argument("tableau stage count must be in [1, 16], got " + std::to_string(s));
  auto check_square = [&](const std::vector<std::vector<Rational>>& m, const char* which) {
    if (static_cast<int>(m.size()) != s)
      throw std::invalid_argument(std::string("tableau matrix ") + which + " has wrong row count");
    for (const auto& row : m)
      if (static_cast<int>(row.size()) != s)
        throw std::invalid_argument(std::string("tableau matrix ") + which + " is not square");
  };
  if (static_cast<int>(B.size()) != s)
    throw std::invalid_argument("tableau weight vectors b and B differ in length");
  check_square(a, "a");
  check_square(A, "A");

  PrkTableau t;
  t.name = std::move(name);
  t.stages = s;
  t.b = std::move(b);
  t.B = std::move(B);
  t.a = std::move(a);
  t.A = std::move(A);

  t.c.assign(s, rat(0));
  t.C.assign(s, rat(0));
  for (int i = 0; i < s; ++i)
    for (int j = 0; j < s; ++j) {
      t.c[i] += t.A[i][j];
      t.C[i] += t.a[i][j];
    }

  t.explicit_form = true;
  for (int i = 0; i < s && t.explicit_form; ++i)
    for (int j = 0; j < s; ++j) {
      const Rational want_a = (j <= i) ? t.b[j] : rat(0);
      const Rational want_A = (j < i) ? t.B[j] : rat(0);
      if (t.a[i][j] != want_a || t.A[i][j] != want_A) {
        t.explicit_form = false;
        break;
      }
    }

  t.symplectic = all_zero(check_symplectic(t).symplectic_residuals);

  t.b_d.resize(s);
  t.B_d.resize(s);
  t.c_d.resize(s);
  t.C_d.resize(s);
  for (int i = 0; i < s; ++i) {
    t.b_d[i] = t.b[i].to_double();
    t.B_d[i] = t.B[i].to_double();
    t.c_d[i] = t.c[i].to_double();
    t.C_d[i] = t.C[i].to_double();
  }
  return t;
}

PrkTableau make_explicit_tableau(std::string name, std::vector<Rational> b,
                                 std::vector<Rational> B) {
  const int s = static_cast<int>(b.size());
  if (static_cast<int>(B.size()) != s)
    throw std::invalid_argument("tableau weight vectors b and B differ in length");
  std::vector<std::vector<Rational>> a(s, std::vector<Rational>(s, rat(0)));
  std::vector<std::vector<Rational>> A(s, std::vector<Rational>(s, rat(0)));
  for (int i = 0; i < s; ++i)
    for (int j = 0; j < s; ++j) {
      if (j <= i) a[i][j] = b[j];
      if (j < i) A[i][j] = B[j];
    }
  return make_tableau(std::move(name), std::move(b), std::move(B), std::move(a), std::move(A));
}

PrkTableau builtin_tableau(TableauKind kind) {
  switch (kind) {
    case TableauKind::Euler1:
      return make_explicit_tableau("euler1", {rat(1)}, {rat(1)});
    case TableauKind::Sprk2:
      return make_explicit_tableau("sprk2", {rat(0), rat(1)}, {rat(1, 2), rat(1, 2)});
    case TableauKind::Sprk3:
      return make_explicit_tableau("sprk3", {rat(7, 24), rat(3, 4), rat(-1, 24)},
                                   {rat(2, 3), rat(-2, 3), rat(1)});
    case TableauKind::Sprk4:
      return make_explicit_tableau(
          "sprk4",
          {rat(7, 48), rat(3, 8), rat(-1, 48), rat(-1, 48), rat(3, 8), rat(7, 48)},
          {rat(1, 3), rat(-1, 3), rat(1), rat(-1, 3), rat(1, 3), rat(0)});
  }
  throw std::invalid_argument("unknown tableau kind");
}

const std::vector<std::string>& builtin_tableau_names() {
  static const std::vector<std::string> names = {"euler1", "sprk2", "sprk3", "sprk4"};
  return names;
}

PrkTableau builtin_tableau(const std::string& name) {
  if (name == "euler1") return builtin_tableau(TableauKind::Euler1);
  if (name == "sprk2") return builtin_tableau(TableauKind::Sprk2);
  if (name == "sprk3") return builtin_tableau(TableauKind::Sprk3);
  if (name == "sprk4") return builtin_tableau(TableauKind::Sprk4);
  throw std::invalid_argument("unknown tableau '" + name +
                              "' (built-ins: euler1, sprk2, sprk3, sprk4)");
}

ConditionReport check_symplectic(const PrkTableau& t) {
  const int s = t.stages;
  ConditionReport rep;
  rep.symplectic_residuals.assign(s, std::vector<Rational>(s, rat(0)));
  bool ok = true;
  // The condition for separable Hamiltonians pairs A with the q-weights and
  // the transpose of a with the p-weights: b_i A_ij + B_j a_ji = b_i B_j.
  for (int i = 0; i < s; ++i)
    for (int j = 0; j < s; ++j) {
      const Rational r = t.b[i] * t.A[i][j] + t.B[j] * t.a[j][i] - t.b[i] * t.B[j];
      rep.symplectic_residuals[i][j] = r;
      if (r != 0) ok = false;
    }
  rep.symplectic = ok;
  return rep;
}

ConditionReport check_order_conditions(const PrkTableau& t, int p_max) {
  const int s = t.stages;
  if (p_max > 3) p_max = 3;
  ConditionReport rep;

  rep.node_residual_c.assign(s, rat(0));
  rep.node_residual_C.assign(s, rat(0));
  rep.nodes_ok = true;
  for (int i = 0; i < s; ++i) {
    Rational sa = rat(0), sA = rat(0);
    for (int j = 0; j < s; ++j) {
      sA += t.A[i][j];
      sa += t.a[i][j];
    }
    rep.node_residual_c[i] = t.c[i] - sA;
    rep.node_residual_C[i] = t.C[i] - sa;
    if (rep.node_residual_c[i] != 0 || rep.node_residual_C[i] != 0) rep.nodes_ok = false;
  }

  auto add = [&](int order, std::string label, Rational target, Rational value) {
    rep.order_residuals.push_back({order, std::move(label), target, value, value - target});
  };

  if (p_max >= 1) {
    Rational sb = rat(0), sB = rat(0);
    for (int i = 0; i < s; ++i) {
      sb += t.b[i];
      sB += t.B[i];
    }
    add(1, "sum(b)", rat(1), sb);
    add(1, "sum(B)", rat(1), sB);
  }

  // Higher conditions presuppose the node coupling of the non-autonomous
  // order theorem; skip them when it fails.
  if (rep.nodes_ok && p_max >= 2) {
    Rational sbc = rat(0), sBC = rat(0);
    for (int i = 0; i < s; ++i) {
      sbc += t.b[i] * t.c[i];
      sBC += t.B[i] * t.C[i];
    }
    add(2, "sum(b*c)", rat(1, 2), sbc);
    add(2, "sum(B*C)", rat(1, 2), sBC);
  }

  if (rep.nodes_ok && p_max >= 3) {
    Rational sbcc = rat(0), sBCC = rat(0), sbAC = rat(0), sBac = rat(0);
    for (int i = 0; i < s; ++i) {
      sbcc += t.b[i] * t.c[i] * t.c[i];
      sBCC += t.B[i] * t.C[i] * t.C[i];
      for (int j = 0; j < s; ++j) {
        sbAC += t.b[i] * t.A[i][j] * t.C[j];
        sBac += t.B[i] * t.a[i][j] * t.c[j];
      }
    }
    add(3, "sum(b*c^2)", rat(1, 3), sbcc);
    add(3, "sum(b*A*C)", rat(1, 6), sbAC);
    add(3, "sum(B*C^2)", rat(1, 3), sBCC);
    add(3, "sum(B*a*c)", rat(1, 6), sBac);
  }

  rep.max_verified_order = 0;
  for (int p = 1; p <= p_max; ++p) {
    bool have = false, pass = true;
    for (const auto& cond : rep.order_residuals)
      if (cond.order == p) {
        have = true;
        if (cond.residual != 0) pass = false;
      }
    if (!have || !pass) break;
    rep.max_verified_order = p;
  }
  return rep;
}

PrkTableau tableau_from_json(const nlohmann::json& doc, std::string name) {
  if (!doc.is_object()) throw std::invalid_argument("tableau document must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    (void)value;
    if (key != "s" && key != "b" && key != "B" && key != "a" && key != "A")
      throw std::invalid_argument("unexpected key '" + key +
                                  "' in tableau document (nodes are computed, never read)");
  }
  for (const char* key : {"s", "b", "B", "a", "A"})
    if (!doc.contains(key))
      throw std::invalid_argument(std::string("tableau document missing key '") + key + "'");

  const int s = doc.at("s").get<int>();
  auto parse_vec = [&](const nlohmann::json& arr) {
    std::vector<Rational> out;
    for (const auto& x : arr) out.push_back(parse_rational(x.get<std::string>()));
    return out;
  };
  auto parse_mat = [&](const nlohmann::json& arr) {
    std::vector<std::vector<Rational>> out;
    for (const auto& row : arr) out.push_back(parse_vec(row));
    return out;
  };
  PrkTableau t = make_tableau(std::move(name), parse_vec(doc.at("b")), parse_vec(doc.at("B")),
                              parse_mat(doc.at("a")), parse_mat(doc.at("A")));
  if (t.stages != s)
    throw std::invalid_argument("tableau document: \"s\" does not match array sizes");
  return t;
}

nlohmann::ordered_json tableau_to_json(const PrkTableau& t) {
  nlohmann::ordered_json doc;
  doc["s"] = t.stages;
  auto vec = [](const std::vector<Rational>& v) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& x : v) arr.push_back(format_rational(x));
    return arr;
  };
  doc["b"] = vec(t.b);
  doc["B"] = vec(t.B);
  nlohmann::ordered_json a = nlohmann::ordered_json::array(), A = nlohmann::ordered_json::array();
  for (const auto& row : t.a) a.push_back(vec(row));
  for (const auto& row : t.A) A.push_back(vec(row));
  doc["a"] = a;
  doc["A"] = A;
  return doc;
}

PrkTableau load_tableau_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open tableau file '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("tableau file '" + path + "': " + e.what());
  }
  return tableau_from_json(doc, path);
}

}  // namespace sprknet
