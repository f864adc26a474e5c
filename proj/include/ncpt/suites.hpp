#pragma once

// Named validation suites: each check reports a measured value against a
// threshold. Used by the CLI (--suite) and by the acceptance runner.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "ncpt/algebra.hpp"
#include "ncpt/oracles.hpp"
#include "ncpt/scenario.hpp"
#include "ncpt/series.hpp"

namespace ncpt {

struct CheckResult {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double threshold = 0.0;
  std::string relation;  // how measured is compared with threshold
  nlohmann::json detail = nlohmann::json::object();
};

inline CheckResult below(std::string name, double measured, double threshold) {
  return {std::move(name), measured < threshold, measured, threshold, "<", nlohmann::json::object()};
}

inline CheckResult above(std::string name, double measured, double threshold) {
  return {std::move(name), measured > threshold, measured, threshold, ">", nlohmann::json::object()};
}

struct SuiteReport {
  std::string suite;
  std::uint64_t seed = 0;
  std::vector<CheckResult> checks;

  bool passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return !checks.empty();
  }

  nlohmann::json to_json() const {
    nlohmann::json j{{"suite", suite}, {"seed", seed}, {"passed", passed()}};
    auto arr = nlohmann::json::array();
    for (const auto& c : checks) {
      nlohmann::json e{{"name", c.name},
                       {"passed", c.passed},
                       {"measured", c.measured},
                       {"threshold", c.threshold},
                       {"relation", c.relation}};
      if (!c.detail.empty()) e["detail"] = c.detail;
      arr.push_back(std::move(e));
    }
    j["checks"] = arr;
    return j;
  }
};

namespace suites {

/// Two classical current distributions driving one field mode.
struct TwoSources {
  Scenario c, ext, both;
};

inline TwoSources two_sources() {
  ScenarioConfig base;
  base.kind = ScenarioKind::stimulated_emission;
  base.mode_dims = {20};
  base.horizon = 2.0;
  const DriveConfig jc{0, Envelope::sinusoid(cplx(0.008, 0.006), 1.3, 0.4), 0};
  const DriveConfig jext{0, Envelope::gaussian_pulse(cplx(-0.3, 0.4), 1.0, 0.35), 1};
  TwoSources s{};
  auto cfg = base;
  cfg.drives = {jc};
  s.c = build_scenario(cfg);
  cfg.drives = {jext};
  s.ext = build_scenario(cfg);
  cfg.drives = {jc, jext};
  s.both = build_scenario(cfg);
  return s;
}

/// Superposition of the fields of two sources and the absence of any
/// stimulated enhancement from the stronger one.
inline std::vector<CheckResult> superposition_checks() {
  const auto s = two_sources();
  const double t = 2.0;
  const SlicePolicy pol{16, 1 << 14, 1e-13};
  const double xc = exact_expectation(s.c.spec, s.c.observable, s.c.initial, t, pol).value;
  const double xe = exact_expectation(s.ext.spec, s.ext.observable, s.ext.initial, t, pol).value;
  const double xb = exact_expectation(s.both.spec, s.both.observable, s.both.initial, t, pol).value;
  auto rel = below("superposition relative residual", std::abs(xb - (xc + xe)) / std::abs(xb), 1e-10);
  rel.detail = {{"x_c", xc}, {"x_ext", xe}, {"x_combined", xb}, {"strength_ratio", 50.0}};
  auto attrib = below("source-attributable change under 50x external drive",
                      std::abs((xb - xe) - xc), 1e-9);
  attrib.detail = {{"x_c_alone", xc}, {"x_c_attributable", xb - xe}};
  return {rel, attrib};
}

inline ScenarioConfig three_mode_network() {
  ScenarioConfig c;
  c.kind = ScenarioKind::mode_network;
  c.mode_dims = {4, 4, 4};
  c.couplings = {{0, 1, Envelope::sinusoid(0.7, 1.1)},
                 {1, 2, Envelope::gaussian_pulse(cplx(0.5, 0.2), 0.8, 0.4)},
                 {0, 2, Envelope::constant(cplx(0.2, -0.1))}};
  c.frequencies = {{0, Envelope::sinusoid(0.4, 2.0)}, {2, Envelope::constant(0.3)}};
  c.horizon = 1.5;
  return c;
}

/// Output photon number as a function of the Fock input n1 in {0, 1, 2}.
inline std::vector<CheckResult> fock_linearity_checks() {
  auto c = three_mode_network();
  const double t = c.horizon;
  double ex[3], sub[3];
  for (int n1 = 0; n1 < 3; ++n1) {
    c.initial = {{1.0, {n1, 1, 0}}};
    const auto sc = build_scenario(c);
    ex[n1] = exact_expectation(sc.spec, sc.observable, sc.initial, t).value;
    sub[n1] = subspace_expectation(sc.observable, sc.spec, sc.closure_basis, sc.initial, t, 200);
  }
  auto a = below("second difference of <n2> over n1 (exact)", std::abs(ex[2] - 2 * ex[1] + ex[0]), 1e-8);
  a.detail = {{"outputs", {ex[0], ex[1], ex[2]}}};
  auto b = below("second difference of <n2> over n1 (subspace)", std::abs(sub[2] - 2 * sub[1] + sub[0]), 1e-8);
  b.detail = {{"outputs", {sub[0], sub[1], sub[2]}}};
  return {a, b};
}

inline Scenario two_mode_drive() {
  ScenarioConfig c;
  c.kind = ScenarioKind::stimulated_emission;
  c.mode_dims = {8, 8};
  c.drives = {{0, Envelope::sinusoid(cplx(0.3, 0.1), 1.7, 0.2), 0},
              {1, Envelope::gaussian_pulse(cplx(-0.2, 0.5), 0.6, 0.3), 1}};
  c.probe = {{0, cplx(1.0, 0.0)}, {1, cplx(0.0, 0.7)}};
  c.horizon = 1.0;
  return build_scenario(c);
}

/// The first commutator of the field with the linear Hamiltonian is a
/// c-number and the second vanishes, on the safe subspace.
inline std::vector<CheckResult> c_number_checks() {
  const auto sc = two_mode_drive();
  const std::vector<double> times{0.0, 0.25, 0.5, 0.75, 1.0};
  double worst = 0.0, direct = 0.0;
  for (double tp : times) {
    worst = std::max(worst, c_number_test(commutator(sc.observable, evaluate_hamiltonian(sc.spec, tp)), 1).residual);
    for (double tq : times) {
      const Matrix second = commutator(commutator(sc.observable.matrix(), evaluate_hamiltonian(sc.spec, tp).matrix()),
                                       evaluate_hamiltonian(sc.spec, tq).matrix());
      direct = std::max(direct, max_entry(restrict_to(second, safe_indices(*sc.spec.space(), 2))));
    }
  }
  const auto rep = closure_check(sc.observable, sc.spec, sc.closure_basis, times, 2);
  auto d = below("depth-2 closure residual on the linear basis", rep.max_residual, 1e-10);
  d.detail = {{"second_commutator_max_entry", direct}};
  return {below("c-number residual of [X, H(t')]", worst, 1e-10), d,
          below("second commutator on the safe subspace", direct, 1e-10)};
}

/// Bilinear closure of a three-mode network and closed-subspace propagation.
inline std::vector<CheckResult> bilinear_closure_checks() {
  auto c = three_mode_network();
  c.initial = {{std::sqrt(0.5), {1, 1, 0}}, {cplx(0.0, std::sqrt(0.5)), {0, 2, 0}}};
  const auto sc = build_scenario(c);
  const double t = c.horizon;
  std::vector<double> times;
  for (int i = 0; i <= 5; ++i) times.push_back(t * i / 5.0);
  const auto rep = closure_check(sc.observable, sc.spec, sc.closure_basis, times, 4);
  const double ex = exact_expectation(sc.spec, sc.observable, sc.initial, t).value;
  const double sub = subspace_expectation(sc.observable, sc.spec, sc.closure_basis, sc.initial, t, 200);
  auto cl = below("depth-4 bilinear closure residual", rep.max_residual, 1e-9);
  cl.detail = {{"basis", rep.basis_label}, {"closed", rep.closed}};
  auto sp = below("subspace vs exact <n2>", std::abs(sub - ex), 1e-7);
  sp.detail = {{"subspace", sub}, {"exact", ex}};
  return {cl, sp};
}

/// exact - partial_sum_m ratios as the coupling halves.
inline std::vector<CheckResult> order_scaling_checks() {
  ScenarioConfig c;
  c.kind = ScenarioKind::mode_network;
  c.mode_dims = {3, 3};
  c.initial = {{std::sqrt(0.75), {1, 0}}, {cplx(0.0, 0.5), {0, 1}}};
  c.horizon = 1.0;
  auto family = [c](double lambda) mutable {
    c.couplings = {{0, 1, Envelope::sinusoid(lambda, 1.0)}};
    return build_scenario(c).spec;
  };
  const auto sc = build_scenario(c);
  const std::vector<int> orders{1, 2, 3};
  const std::vector<double> lambdas{0.4, 0.2, 0.1};
  const auto tab = order_scaling_probe(family, sc.observable, sc.initial, 1.0, orders, lambdas);
  std::vector<CheckResult> out;
  for (std::size_t i = 0; i < orders.size(); ++i) {
    const double ideal = std::pow(2.0, orders[i] + 1);
    double worst = 0.0;
    auto ratios = nlohmann::json::array();
    for (const auto& r : tab.ratios[i]) {
      const double dev = r ? std::abs(*r / ideal - 1.0) : std::numeric_limits<double>::infinity();
      worst = std::max(worst, dev);
      ratios.push_back(r ? nlohmann::json(*r) : nlohmann::json(nullptr));
    }
    auto chk = below("order " + std::to_string(orders[i]) + " residual ratio deviation from 2^(m+1)", worst, 0.25);
    chk.detail = {{"ideal", ideal}, {"ratios", ratios}, {"lambdas", lambdas}, {"residuals", tab.residuals[i]}};
    out.push_back(std::move(chk));
  }
  return out;
}

/// Order terms at a fixed grid are homogeneous of degree m in the coupling.
inline CheckResult homogeneity_check() {
  ScenarioConfig c;
  c.kind = ScenarioKind::mode_network;
  c.mode_dims = {3, 3};
  c.couplings = {{0, 1, Envelope::sinusoid(1.0, 1.0)}};
  c.frequencies = {{1, Envelope::constant(0.2)}};
  c.initial = {{std::sqrt(0.75), {1, 0}}, {cplx(0.0, 0.5), {0, 1}}};
  const auto sc = build_scenario(c);
  const auto r1 = nested_series_expectation(sc.spec, sc.observable, sc.initial, 1.0, 5, 64);
  double worst = 0.0;
  for (double lambda : {0.5, 0.25}) {
    const auto r = nested_series_expectation(sc.spec.scaled(lambda), sc.observable, sc.initial, 1.0, 5, 64);
    for (int m = 1; m <= 5; ++m) {
      const auto i = static_cast<std::size_t>(m);
      const cplx want = std::pow(lambda, m) * r1.order_terms[i];
      if (std::abs(want) > 0.0) worst = std::max(worst, std::abs(r.order_terms[i] - want) / std::abs(want));
    }
  }
  return below("order-m terms scale as lambda^m (relative)", worst, 1e-10);
}

inline std::string joined(const std::vector<SignedWord>& words) {
  std::string s;
  for (const auto& w : words) s += (s.empty() ? "" : " ") + w.str();
  return s;
}

/// Left- versus right-nested commutator orderings: the expanded words, their
/// disjointness, a numeric difference and agreement of both summed series.
inline std::vector<CheckResult> distinctness_checks(std::uint64_t seed) {
  std::vector<CheckResult> out;
  auto sorted = [](std::vector<SignedWord> w) {
    std::sort(w.begin(), w.end());
    return w;
  };
  auto parse = [](std::initializer_list<const char*> list) {
    std::vector<SignedWord> ws;
    for (const char* p : list) {
      SignedWord w{p[0] == '-' ? -1 : 1, {}};
      for (const char* q = p + 1; *q; ++q) w.symbols.emplace_back(1, *q);
      ws.push_back(w);
    }
    return ws;
  };
  const auto left = expand_nested_commutator(NestPattern::left_nested, {"O", "A", "B", "C"});
  const auto right = expand_nested_commutator(NestPattern::right_nested, {"A", "B", "C", "O"});
  const auto want_left = sorted(parse({"+OABC", "-AOBC", "-BOAC", "+BAOC", "-COAB", "+CAOB", "+CBOA", "-CBAO"}));
  const auto want_right = sorted(parse({"+ABCO", "-ABOC", "-ACOB", "+AOCB", "-BCOA", "+BOCA", "+COBA", "-OCBA"}));
  auto l = above("left-nested expansion equals the expected 8 words", left == want_left ? 1.0 : 0.0, 0.5);
  l.detail = {{"words", joined(left)}};
  auto r = above("right-nested expansion equals the expected 8 words", right == want_right ? 1.0 : 0.0, 0.5);
  r.detail = {{"words", joined(right)}};
  out.push_back(l);
  out.push_back(r);
  out.push_back(above("left and right word sets disjoint", word_sets_disjoint(left, right) ? 1.0 : 0.0, 0.5));

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::map<std::string, Matrix> values;
  for (const char* s : {"O", "A", "B", "C"}) {
    Matrix m(4, 4);
    for (Eigen::Index i = 0; i < 4; ++i)
      for (Eigen::Index j = 0; j < 4; ++j) m(i, j) = cplx(g(rng), g(rng));
    values[s] = m;
  }
  const Matrix lm = nested_commutator(NestPattern::left_nested, {"O", "A", "B", "C"}, values);
  const Matrix rm = nested_commutator(NestPattern::right_nested, {"A", "B", "C", "O"}, values);
  out.push_back(above("norm of left-nested minus right-nested (random 4x4)", (lm - rm).norm(), 1e-4));

  ScenarioConfig c;
  c.kind = ScenarioKind::mode_network;
  c.mode_dims = {4, 4};
  c.couplings = {{0, 1, Envelope::sinusoid(0.3, 1.0)}};
  c.frequencies = {{1, Envelope::constant(0.1)}};
  c.horizon = 1.0;
  const auto sc = build_scenario(c);
  const SlicePolicy pol{64, 1 << 13, 1e-10};
  const auto exact = exact_heisenberg_operator(sc.spec, sc.observable, 1.0);
  const auto nested = converge_heisenberg_expansion(sc.spec, sc.observable, 1.0, 8, pol);
  const auto iter = converge_heisenberg_iteration(sc.spec, sc.observable, 1.0, 8, pol);
  const int buffer = 2;
  out.push_back(below("summed nested expansion vs U^dag n2 U (order 8)",
                      safe_operator_norm_distance(nested.summed(sc.observable), exact.value, buffer), 1e-6));
  out.push_back(below("summed iteration series vs U^dag n2 U (order 8)",
                      safe_operator_norm_distance(iter.summed(sc.observable), exact.value, buffer), 1e-6));
  out.push_back(above("order-2 term difference between the two series",
                      max_entry(nested.terms[1].matrix() - iter.terms[1].matrix()), 1e-4));
  return out;
}

}  // namespace suites

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> n{"linearity", "scaling", "closure", "distinctness"};
  return n;
}

inline SuiteReport run_suite(const std::string& name, std::uint64_t seed = 0) {
  SuiteReport rep;
  rep.suite = name;
  rep.seed = seed;
  auto add = [&](std::vector<CheckResult> v) {
    rep.checks.insert(rep.checks.end(), v.begin(), v.end());
  };
  if (name == "linearity") {
    add(suites::superposition_checks());
    add(suites::fock_linearity_checks());
  } else if (name == "scaling") {
    add(suites::order_scaling_checks());
    rep.checks.push_back(suites::homogeneity_check());
  } else if (name == "closure") {
    add(suites::c_number_checks());
    add(suites::bilinear_closure_checks());
  } else if (name == "distinctness") {
    add(suites::distinctness_checks(seed));
  } else {
    throw InvalidArgument("unknown suite '" + name + "' (expected linearity, scaling, closure or distinctness)");
  }
  return rep;
}

}  // namespace ncpt
