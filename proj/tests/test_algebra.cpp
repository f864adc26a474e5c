#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "ncpt/algebra.hpp"
#include "ncpt/oracles.hpp"
#include "ncpt/scenario.hpp"

using namespace ncpt;

namespace {

Scenario stimulated(int dim) {
  ScenarioConfig c;
  c.kind = ScenarioKind::stimulated_emission;
  c.mode_dims = {dim};
  c.drives = {{0, Envelope::sinusoid(cplx(0.3, 0.4), 2.0, 0.2), 0}};
  c.horizon = 2.0;
  return build_scenario(c);
}

Scenario network(Envelope eps, std::vector<int> dims = {4, 4}) {
  ScenarioConfig c;
  c.kind = ScenarioKind::mode_network;
  c.mode_dims = std::move(dims);
  c.couplings = {{0, 1, std::move(eps)}};
  c.initial = {{1.0, {1, 0}}};
  c.horizon = 2.0;
  return build_scenario(c);
}

std::vector<SignedWord> words(std::initializer_list<std::pair<int, const char*>> list) {
  std::vector<SignedWord> out;
  for (const auto& [sign, w] : list) {
    SignedWord sw{sign, {}};
    for (const char* p = w; *p; ++p) sw.symbols.emplace_back(1, *p);
    out.push_back(sw);
  }
  std::sort(out.begin(), out.end());
  return out;
}

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = cplx(g(rng), g(rng));
  return m;
}

}  // namespace

TEST_CASE("closure_check examples", "[algebra]") {
  const auto st = stimulated(8);
  const std::vector<double> times{0.0, 0.4, 0.9, 1.7};
  const auto lin = closure_check(st.observable, st.spec, st.closure_basis, times, 2);
  CHECK(lin.closed);
  CHECK(lin.max_residual < 1e-10);
  CHECK(lin.residuals.size() == 4);
  const HsProjector proj(st.closure_basis, 1);
  const Matrix first = commutator(st.observable.matrix(), evaluate_hamiltonian(st.spec, 0.4).matrix());
  const auto p = proj.project(first);
  CHECK(std::abs(p.coefficients(1)) < 1e-12);
  CHECK(std::abs(p.coefficients(2)) < 1e-12);
  CHECK(std::abs(p.coefficients(0)) > 0.1);
  const Matrix second = commutator(reconstruct(st.closure_basis, p.coefficients).matrix(),
                                   evaluate_hamiltonian(st.spec, 1.1).matrix());
  CHECK(max_entry(second) < 1e-12);

  const auto net = network(Envelope::sinusoid(0.6, 1.0));
  const auto bil = closure_check(net.observable, net.spec, net.closure_basis, times, 4);
  CHECK(bil.closed);

  const OperatorBasis poor("identity", {OperatorMatrix::identity(net.spec.space())});
  const auto bad = closure_check(net.observable, net.spec, poor, {0.5, 1.0}, 1);
  CHECK_FALSE(bad.closed);
  CHECK(bad.max_residual > 0.1);
  CHECK_THROWS_AS(closure_check(net.observable, net.spec, poor, {0.5}, 0), InvalidArgument);
}

TEST_CASE("structure_matrix examples", "[algebra]") {
  const auto net = network(Envelope::constant(0.7), {3, 3});
  const auto zero = structure_matrix(net.closure_basis, HamiltonianSpec::zero(net.spec.space(), 1.0), 0.3);
  CHECK(max_entry(zero.entries) < 1e-14);

  const auto m = structure_matrix(net.closure_basis, net.spec, 0.3);
  REQUIRE(m.entries.rows() == 5);
  const double eps = 0.7;
  Vector col0(5);
  col0 << 0.0, cplx(0.0, -eps), cplx(0.0, eps), 0.0, 0.0;
  CHECK(max_entry(m.entries.col(0) - col0) < 1e-12);
  // every column reconstructs its bracket on the safe subspace
  const Matrix h = evaluate_hamiltonian(net.spec, 0.3).matrix();
  for (std::size_t a = 0; a < 5; ++a) {
    const Matrix bracket = cplx(0.0, -1.0) * commutator(net.closure_basis[a].matrix(), h);
    const auto rec = reconstruct(net.closure_basis, m.entries.col(static_cast<Eigen::Index>(a)));
    CHECK(safe_distance(OperatorMatrix(net.spec.space(), bracket), rec, 1) < 1e-12);
  }

  const OperatorBasis id("identity", {OperatorMatrix::identity(net.spec.space())});
  CHECK(max_entry(structure_matrix(id, net.spec, 0.5).entries) < 1e-14);
  const OperatorBasis n1("n1", {number(net.spec.space(), 0)});
  CHECK_THROWS_AS(structure_matrix(n1, net.spec, 0.5), ClosureViolation);
}

TEST_CASE("subspace_expectation examples", "[algebra]") {
  const auto net = network(Envelope::constant(0.5));
  const double t = std::numbers::pi / 2;
  const auto sp = net.spec.space();
  CHECK(std::abs(subspace_expectation(OperatorMatrix::identity(sp), net.spec, net.closure_basis, net.initial, t, 20) - 1.0) < 1e-14);
  CHECK(std::abs(subspace_expectation(net.observable, net.spec, net.closure_basis, net.initial, t, 200) - 0.5) < 1e-10);

  const auto tdep = network(Envelope::sinusoid(0.8, 1.3));
  const double sub = subspace_expectation(tdep.observable, tdep.spec, tdep.closure_basis, tdep.initial, 1.5, 200);
  const double ex = exact_expectation(tdep.spec, tdep.observable, tdep.initial, 1.5).value;
  CHECK(std::abs(sub - ex) < 1e-7);

  ScenarioConfig c;
  c.kind = ScenarioKind::mode_network;
  c.mode_dims = {4, 4};
  c.couplings = {{0, 1, Envelope::gaussian_pulse(1.2, 0.8, 0.4)}};
  c.frequencies = {{0, Envelope::sinusoid(0.5, 2.0)}};
  c.horizon = 2.0;
  double out[3];
  for (int n1 = 0; n1 < 3; ++n1) {
    c.initial = {{1.0, {n1, 1}}};
    const auto sc = build_scenario(c);
    out[n1] = subspace_expectation(sc.observable, sc.spec, sc.closure_basis, sc.initial, 1.6, 200);
  }
  CHECK(std::abs(out[2] - 2.0 * out[1] + out[0]) < 1e-8);

  const OperatorBasis poor("identity", {OperatorMatrix::identity(sp)});
  CHECK_THROWS_AS(subspace_expectation(net.observable, net.spec, poor, net.initial, 1.0, 10), ClosureViolation);
  const OperatorBasis n2("n2", {OperatorMatrix::identity(sp), number(sp, 1)});
  CHECK_THROWS_AS(subspace_expectation(net.observable, net.spec, n2, net.initial, 1.0, 10), ClosureViolation);
}

TEST_CASE("c_number_test examples", "[algebra]") {
  auto s = build_space({4, 3});
  const auto c = c_number_test(3.7 * OperatorMatrix::identity(s));
  CHECK(std::abs(c.scalar - 3.7) < 1e-15);
  CHECK(c.residual < 1e-15);
  CHECK(c_number_test(number(s, 0)).residual > 0.5);

  const auto st = stimulated(10);
  for (double tp : {0.2, 1.1}) {
    const auto br = commutator(st.observable, evaluate_hamiltonian(st.spec, tp));
    CHECK(c_number_test(br).residual < 1e-10);
  }
}

TEST_CASE("expand_nested_commutator reproduces the printed expansions", "[algebra]") {
  const auto d1 = expand_nested_commutator(NestPattern::left_nested, {"O", "A"});
  CHECK(d1 == words({{1, "OA"}, {-1, "AO"}}));

  const auto left = expand_nested_commutator(NestPattern::left_nested, {"O", "A", "B", "C"});
  CHECK(left == words({{1, "OABC"}, {-1, "AOBC"}, {-1, "BOAC"}, {1, "BAOC"},
                       {-1, "COAB"}, {1, "CAOB"}, {1, "CBOA"}, {-1, "CBAO"}}));
  const auto right = expand_nested_commutator(NestPattern::right_nested, {"A", "B", "C", "O"});
  CHECK(right == words({{1, "ABCO"}, {-1, "ABOC"}, {-1, "ACOB"}, {1, "AOCB"},
                        {-1, "BCOA"}, {1, "BOCA"}, {1, "COBA"}, {-1, "OCBA"}}));
  CHECK(std::is_sorted(left.begin(), left.end()));

  CHECK(word_sets_disjoint(left, right));
  CHECK_FALSE(word_sets_disjoint(left, left));
  CHECK(word_sets_disjoint({}, left));
  CHECK_THROWS_AS(expand_nested_commutator(NestPattern::left_nested, {"O"}), InvalidArgument);
  CHECK(left.front().str() == "-AOBC");
}

TEST_CASE("signed words match direct nested commutators", "[algebra][property]") {
  std::mt19937_64 rng(2024);
  const std::vector<std::string> names{"O", "A", "B", "C", "D", "E"};
  for (std::size_t depth = 1; depth <= 5; ++depth) {
    std::vector<std::string> syms(names.begin(), names.begin() + static_cast<long>(depth) + 1);
    std::map<std::string, Matrix> values;
    for (const auto& s : syms) values[s] = random_matrix(rng, 4);
    for (auto pattern : {NestPattern::left_nested, NestPattern::right_nested}) {
      auto order = syms;
      if (pattern == NestPattern::right_nested) std::rotate(order.begin(), order.begin() + 1, order.end());
      const auto w = expand_nested_commutator(pattern, order);
      CHECK(w.size() == (std::size_t{1} << depth));
      const Matrix direct = nested_commutator(pattern, order, values);
      CHECK(max_entry(evaluate_words(w, values) - direct) < 1e-10 * (1.0 + max_entry(direct)));
    }
  }
}

TEST_CASE("left and right nesting differ numerically", "[algebra]") {
  std::mt19937_64 rng(11);
  std::map<std::string, Matrix> v;
  for (const char* s : {"O", "A", "B", "C"}) v[s] = random_matrix(rng, 4);
  const Matrix l = nested_commutator(NestPattern::left_nested, {"O", "A", "B", "C"}, v);
  const Matrix r = nested_commutator(NestPattern::right_nested, {"A", "B", "C", "O"}, v);
  CHECK((l - r).norm() > 1e-4);
}
