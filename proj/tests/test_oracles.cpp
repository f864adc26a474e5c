#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "ncpt/oracles.hpp"
#include "ncpt/scenario.hpp"

using namespace ncpt;

namespace {

HamiltonianSpec rabi_spec() {
  auto s = build_space({2});
  return HamiltonianSpec(s, {{Envelope::constant(1.0), lower(s, 0), true, 0}}, 2.0, "rabi");
}

Scenario stimulated(double g0, int dim) {
  ScenarioConfig c;
  c.kind = ScenarioKind::stimulated_emission;
  c.mode_dims = {dim};
  c.drives = {{0, Envelope::constant(cplx(0.0, g0)), 0}};
  c.horizon = 2.0;
  return build_scenario(c);
}

Scenario sin_network(double lambda, std::vector<int> dims = {3, 3}) {
  ScenarioConfig c;
  c.kind = ScenarioKind::mode_network;
  c.mode_dims = std::move(dims);
  c.couplings = {{0, 1, Envelope::sinusoid(lambda, 1.0)}};
  c.frequencies = {{1, Envelope::constant(0.1)}};
  c.initial = {{1.0, {1, 0}}};
  c.horizon = 2.0;
  return build_scenario(c);
}

}  // namespace

TEST_CASE("exact_propagator examples", "[oracles]") {
  auto s = build_space({3, 3});
  const auto id = exact_propagator(HamiltonianSpec::zero(s, 1.0), 1.0, 7);
  CHECK(max_entry(id.U.matrix() - Matrix::Identity(9, 9)) == 0.0);

  const auto sp = rabi_spec();
  const auto u1 = exact_propagator(sp, 0.5, 1);
  const auto u64 = exact_propagator(sp, 0.5, 64);
  CHECK(max_entry(u1.U.matrix() - u64.U.matrix()) < 1e-13);
  CHECK(u64.unitarity_defect < 1e-10);

  const auto vac = fock_state(sp.space(), {0});
  const Vector psi = u64.U.matrix() * vac.amplitudes();
  CHECK(std::abs(expectation(psi, number(sp.space(), 0).matrix()).real() - 0.229848847065930) < 1e-12);
  CHECK(std::abs(psi.norm() - 1.0) < 1e-10);
}

TEST_CASE("exact_expectation examples", "[oracles]") {
  const auto net = sin_network(0.7);
  const auto one = exact_expectation(net.spec, OperatorMatrix::identity(net.spec.space()), net.initial, 1.3);
  CHECK(std::abs(one.value - 1.0) < 1e-12);

  const auto st = stimulated(0.2, 12);
  const auto x = exact_expectation(st.spec, st.observable, st.initial, 1.0);
  CHECK(x.stabilized);
  CHECK(std::abs(x.value - (-0.4)) < 1e-10);

  ScenarioConfig c;
  c.kind = ScenarioKind::mode_network;
  c.mode_dims = {2, 2};
  c.couplings = {{0, 1, Envelope::constant(0.5)}};
  c.initial = {{1.0, {1, 0}}};
  c.horizon = 2.0;
  const auto bs = build_scenario(c);
  const auto half = exact_expectation(bs.spec, bs.observable, bs.initial, std::numbers::pi / 2);
  CHECK(std::abs(half.value - 0.5) < 1e-12);

  const auto sin_case = exact_expectation(net.spec, net.observable, net.initial, 1.5);
  CHECK(sin_case.stabilized);
  CHECK(sin_case.error_estimate < 1e-10);
  CHECK(sin_case.unitarity_defect < 1e-10);
  const auto p = exact_propagator(net.spec, 1.5, 1 << 13);
  const Vector psi = p.U.matrix() * net.initial.amplitudes();
  CHECK(std::abs(expectation(psi, net.observable.matrix()).real() - sin_case.value) < 1e-8);
}

TEST_CASE("dyson series examples", "[oracles]") {
  auto s = build_space({3, 3});
  const auto psi = fock_state(s, {1, 0});
  const auto zero = dyson_series_expectation(HamiltonianSpec::zero(s, 1.0), number(s, 1), psi, 1.0, 3, 8);
  for (std::size_t p = 1; p <= 3; ++p) {
    CHECK(zero.state_corrections[p].norm() == 0.0);
    CHECK(zero.grouped_expectation_terms[p] == cplx(0.0));
  }

  const auto net = sin_network(0.6);
  const auto d = dyson_series_expectation(net.spec, net.observable, net.initial, 1.0, 3, 32);
  const cplx first = net.initial.amplitudes().dot(net.observable.matrix() * d.state_corrections[1]);
  CHECK(std::abs(d.grouped_expectation_terms[1] - 2.0 * first.real()) < 1e-15);
  CHECK_THROWS_AS(dyson_series_expectation(net.spec, net.observable, net.initial, 1.0, 5, 8), InvalidArgument);

  for (const auto* sc : {&net}) {
    const SlicePolicy pol{64, 1 << 14, 1e-11};
    const auto dy = converge_dyson(sc->spec, sc->observable, sc->initial, 1.0, 3, pol);
    const auto ne = converge_series(sc->spec, sc->observable, sc->initial, 1.0, 3, pol);
    CHECK(dy.converged);
    for (std::size_t m = 1; m <= 3; ++m) CHECK(std::abs(dy.order_terms[m] - ne.order_terms[m]) < 1e-8);
  }
}

TEST_CASE("heisenberg_hamiltonian examples", "[oracles]") {
  auto s = build_space({3});
  const auto h0 = (number(s, 0) + 0.3 * (lower(s, 0) + raise(s, 0))).as_hermitian();
  const auto hh = heisenberg_hamiltonian(HamiltonianSpec::constant(h0, 2.0), 1.7, 16);
  CHECK(max_entry(hh.matrix() - h0.matrix()) < 1e-13);
  CHECK(max_entry(heisenberg_hamiltonian(HamiltonianSpec::zero(s, 1.0), 0.5, 4).matrix()) == 0.0);

  ScenarioConfig c;
  c.kind = ScenarioKind::mode_network;
  c.mode_dims = {3, 3};
  c.couplings = {{0, 1, Envelope::sinusoid(0.3, 1.0)}};
  c.frequencies = {{1, Envelope::constant(0.5)}};
  c.horizon = 2.0;
  const auto sc = build_scenario(c);
  const double gap = max_entry(heisenberg_hamiltonian(sc.spec, 1.0, 64).matrix() -
                               evaluate_hamiltonian(sc.spec, 1.0).matrix());
  CHECK(gap > 1e-3);
}

TEST_CASE("heisenberg iteration series", "[oracles]") {
  auto s = build_space({3});
  const auto h0 = (number(s, 0) + 0.3 * (lower(s, 0) + raise(s, 0))).as_hermitian();
  const auto spec = HamiltonianSpec::constant(h0, 2.0);
  const auto obs = (lower(s, 0) + raise(s, 0)).as_hermitian();
  const auto it = heisenberg_iteration_series(spec, obs, 1.0, 4, 32);
  const auto ne = heisenberg_expansion(spec, obs, 1.0, 4, 32);
  for (std::size_t m = 0; m < 4; ++m) CHECK(max_entry(it[m].matrix() - ne[m].matrix()) < 1e-11);

  for (const auto& op : heisenberg_iteration_series(HamiltonianSpec::zero(s, 1.0), obs, 1.0, 3, 8))
    CHECK(max_entry(op.matrix()) == 0.0);

  const auto net = sin_network(0.3, {4, 4});
  const SlicePolicy pol{64, 1 << 12, 1e-9};
  const auto exact = exact_heisenberg_operator(net.spec, net.observable, 1.0);
  const auto a = converge_heisenberg_expansion(net.spec, net.observable, 1.0, 8, pol);
  const auto b = converge_heisenberg_iteration(net.spec, net.observable, 1.0, 8, pol);
  CHECK(safe_operator_norm_distance(a.summed(net.observable), exact.value, 2) < 1e-6);
  CHECK(safe_operator_norm_distance(b.summed(net.observable), exact.value, 2) < 1e-6);
  CHECK(max_entry(a.terms[1].matrix() - b.terms[1].matrix()) > 1e-4);

  const auto ie = converge_heisenberg_iteration_expectation(net.spec, net.observable, net.initial, 1.0, 3, pol);
  CHECK(ie.method == "heisenberg_iteration");
  CHECK(std::abs(ie.partial_sums[3].real() - exact_expectation(net.spec, net.observable, net.initial, 1.0).value) < 1e-3);
}

TEST_CASE("heisenberg equation of motion", "[oracles]") {
  auto s = build_space({3, 3});
  CHECK(heisenberg_eom_check(HamiltonianSpec::zero(s, 2.0), number(s, 1), 1.0, 16, 1e-3) < 1e-12);

  const auto h0 = ((raise(s, 0) * lower(s, 1)) + (raise(s, 1) * lower(s, 0)) + 0.2 * number(s, 0)).as_hermitian();
  const auto cst = HamiltonianSpec::constant(h0, 2.0);
  CHECK(heisenberg_eom_check(cst, number(s, 1), 1.0, 16, 1e-3) < 1e-5);

  const auto net = sin_network(0.3);
  const double r1 = heisenberg_eom_check(net.spec, net.observable, 1.0, 64, 1e-2);
  const double r2 = heisenberg_eom_check(net.spec, net.observable, 1.0, 64, 5e-3);
  CHECK(r1 / r2 == Catch::Approx(4.0).epsilon(0.2));
  CHECK_THROWS_AS(heisenberg_eom_check(net.spec, net.observable, 0.001, 16, 1e-2), InvalidArgument);
}

TEST_CASE("order_scaling_probe", "[oracles]") {
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
  const auto tab = order_scaling_probe(family, sc.observable, sc.initial, 1.0, {1, 2}, {0.4, 0.2});
  REQUIRE(tab.ratios[0][0].has_value());
  CHECK(*tab.ratios[0][0] > 3.0);
  CHECK(*tab.ratios[0][0] < 5.0);
  REQUIRE(tab.ratios[1][0].has_value());
  CHECK(*tab.ratios[1][0] > 6.0);
  CHECK(*tab.ratios[1][0] < 10.0);

  const auto flat = order_scaling_probe(family, sc.observable, sc.initial, 1.0, {1, 2}, {0.0, 0.0});
  CHECK(flat.residuals[0][0] == 0.0);
  CHECK_FALSE(flat.ratios[0][0].has_value());
}

TEST_CASE("square sum splits into the two ordered triangles exactly", "[oracles][property]") {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> expo(-20.0, 20.0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(trial) * 7;
    std::vector<double> f(n), g(n);
    for (std::size_t i = 0; i < n; ++i) {
      f[i] = gauss(rng) * std::exp2(expo(rng));
      g[i] = gauss(rng) * std::exp2(expo(rng));
    }
    const auto r = ordered_split_sums(f, g);
    CHECK(r.identity_exact);
  }
  ExactSum e;
  e.add(1e100);
  e.add(1.0);
  e.add(-1e100);
  CHECK(e.value() == 1.0);
  std::vector<double> a{1.0}, b{1.0, 2.0};
  CHECK_THROWS_AS(ordered_split_sums(a, b), InvalidArgument);
}
