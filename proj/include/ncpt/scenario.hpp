#pragma once

// Builders for the two quantum-optics scenarios:
//  * stimulated_emission: classical currents driving field modes linearly,
//    H(t) = sum_k g_k(t) a_k + conj(g_k(t)) a_k^dagger, observed through a
//    field quadrature sum_k c_k a_k + conj(c_k) a_k^dagger.
//  * mode_network: coupled oscillators (beam splitters),
//    H(t) = sum_i w_i(t) n_i + sum_{i<j} e_ij(t) a_i^dagger a_j + h.c.,
//    observed through the number operator of one output mode.

#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ncpt/hamiltonian.hpp"

namespace ncpt {

enum class ScenarioKind { stimulated_emission, mode_network };

inline std::string to_string(ScenarioKind k) {
  return k == ScenarioKind::stimulated_emission ? "stimulated_emission" : "mode_network";
}

/// Drive amplitude g_k(t) on one mode. group 0 is the source under study
/// (j_c), other groups are additional currents (j_ext).
struct DriveConfig {
  int mode = 0;
  Envelope envelope;
  int group = 0;
};

struct FrequencyConfig {
  int mode = 0;
  Envelope envelope;
};

struct CouplingConfig {
  int mode_i = 0;
  int mode_j = 1;
  Envelope envelope;
};

struct ProbeWeight {
  int mode = 0;
  cplx weight{1.0, 0.0};
};

struct StateComponent {
  cplx amplitude{1.0, 0.0};
  std::vector<int> occupations;
};

enum class ObservableKind { scenario_default, number, quadrature, identity };

struct ObservableSelector {
  ObservableKind kind = ObservableKind::scenario_default;
  int mode = 1;
};

struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::mode_network;
  std::vector<int> mode_dims;
  std::vector<DriveConfig> drives;
  std::vector<FrequencyConfig> frequencies;
  std::vector<CouplingConfig> couplings;
  std::vector<ProbeWeight> probe;
  /// Empty means vacuum. One component with amplitude 1 is a Fock state.
  std::vector<StateComponent> initial;
  ObservableSelector observable;
  double horizon = 1.0;
};

struct Scenario {
  HamiltonianSpec spec;
  StateVector initial;
  OperatorMatrix observable;
  OperatorBasis closure_basis;
};

namespace detail {

inline void check_mode(const ScenarioConfig& c, int mode, const char* what) {
  if (mode < 0 || mode >= static_cast<int>(c.mode_dims.size()))
    throw InvalidArgument(std::string(what) + " references nonexistent mode " +
                          std::to_string(mode));
}

}  // namespace detail

inline void validate(const ScenarioConfig& c) {
  if (c.mode_dims.empty()) throw InvalidArgument("scenario needs at least one mode");
  if (!(c.horizon >= 0.0)) throw InvalidArgument("horizon must be >= 0");
  for (const auto& d : c.drives) detail::check_mode(c, d.mode, "drive");
  for (const auto& f : c.frequencies) detail::check_mode(c, f.mode, "frequency");
  for (const auto& p : c.probe) detail::check_mode(c, p.mode, "probe");
  std::set<std::pair<int, int>> pairs;
  for (const auto& k : c.couplings) {
    detail::check_mode(c, k.mode_i, "coupling");
    detail::check_mode(c, k.mode_j, "coupling");
    if (k.mode_i == k.mode_j) throw InvalidArgument("coupling must join two distinct modes");
    const auto key = std::minmax(k.mode_i, k.mode_j);
    if (!pairs.insert(key).second)
      throw InvalidArgument("coupling between modes " + std::to_string(key.first) +
                            " and " + std::to_string(key.second) +
                            " listed twice (the coupling matrix is symmetric)");
  }
  for (const auto& s : c.initial)
    if (s.occupations.size() != c.mode_dims.size())
      throw InvalidArgument("initial-state occupations must list every mode");
  if (c.observable.kind == ObservableKind::number)
    detail::check_mode(c, c.observable.mode, "observable");
  if (c.kind == ScenarioKind::stimulated_emission &&
      (!c.frequencies.empty() || !c.couplings.empty()))
    throw InvalidArgument("stimulated_emission takes drives only");
  if (c.kind == ScenarioKind::mode_network && !c.drives.empty())
    throw InvalidArgument("mode_network takes frequencies and couplings only");
  if (c.kind == ScenarioKind::mode_network &&
      c.observable.kind == ObservableKind::scenario_default && c.mode_dims.size() < 2)
    throw InvalidArgument("mode_network default observable n_2 needs two modes");
}

/// sum_k c_k a_k + conj(c_k) a_k^dagger
inline OperatorMatrix quadrature(const SpacePtr& space, const std::vector<ProbeWeight>& probe) {
  Matrix x = Matrix::Zero(space->dim(), space->dim());
  for (const auto& p : probe) {
    const Matrix a = lower(space, static_cast<std::size_t>(p.mode)).matrix();
    x += p.weight * a + std::conj(p.weight) * a.adjoint();
  }
  return {space, std::move(x), true};
}

inline StateVector initial_state(const SpacePtr& space, const ScenarioConfig& c) {
  if (c.initial.empty())
    return fock_state(space, std::vector<int>(space->num_modes(), 0));
  Vector v = Vector::Zero(space->dim());
  for (const auto& comp : c.initial)
    v(static_cast<Eigen::Index>(space->flat_index(comp.occupations))) += comp.amplitude;
  return StateVector::normalized(space, std::move(v));
}

inline Scenario build_scenario(const ScenarioConfig& c) {
  validate(c);
  auto space = build_space(c.mode_dims);
  const auto modes = space->num_modes();
  std::vector<HamiltonianTerm> terms;
  std::vector<OperatorMatrix> basis;
  OperatorMatrix obs;

  if (c.kind == ScenarioKind::stimulated_emission) {
    for (const auto& d : c.drives)
      terms.push_back({d.envelope, lower(space, static_cast<std::size_t>(d.mode)), true, d.group});
    basis.push_back(OperatorMatrix::identity(space));
    for (std::size_t k = 0; k < modes; ++k) {
      basis.push_back(lower(space, k));
      basis.push_back(raise(space, k));
    }
    auto probe = c.probe.empty() ? std::vector<ProbeWeight>{ProbeWeight{}} : c.probe;
    obs = quadrature(space, probe);
  } else {
    for (const auto& f : c.frequencies)
      terms.push_back({f.envelope, number(space, static_cast<std::size_t>(f.mode)), false, 0});
    for (const auto& k : c.couplings) {
      auto hop = raise(space, static_cast<std::size_t>(k.mode_i)) *
                 lower(space, static_cast<std::size_t>(k.mode_j));
      terms.push_back({k.envelope, std::move(hop), true, 0});
    }
    for (std::size_t i = 0; i < modes; ++i)
      for (std::size_t j = 0; j < modes; ++j)
        basis.push_back(i == j ? number(space, i) : raise(space, i) * lower(space, j));
    basis.push_back(OperatorMatrix::identity(space));
    obs = number(space, 1);
  }

  switch (c.observable.kind) {
    case ObservableKind::scenario_default:
      break;
    case ObservableKind::number:
      obs = number(space, static_cast<std::size_t>(c.observable.mode));
      break;
    case ObservableKind::quadrature:
      obs = quadrature(space, c.probe.empty() ? std::vector<ProbeWeight>{ProbeWeight{}} : c.probe);
      break;
    case ObservableKind::identity:
      obs = OperatorMatrix::identity(space);
      break;
  }

  const bool stim = c.kind == ScenarioKind::stimulated_emission;
  HamiltonianSpec spec(space, std::move(terms), c.horizon, to_string(c.kind));
  return {std::move(spec), initial_state(space, c), std::move(obs),
          OperatorBasis(stim ? "linear {I, a_k, a_k^dagger}"
                             : "bilinear {a_i^dagger a_j} + {I}",
                        std::move(basis))};
}

}  // namespace ncpt
