#pragma once

// Nested-commutator perturbation series for expectation values.
//
// For a constant Hamiltonian the expectation value expands as
//   <O>(t) = sum_m (i t)^m / m! <psi0| [H, [H, ... [H, O]]] |psi0>.
// For a time-dependent Hamiltonian the m-th order term is the ordered
// integral
//   (1/i)^m int_{t > t1 > ... > tm > 0} <psi0| [[[O, H(t1)], H(t2)], ... H(tm)] |psi0>,
// with the first commutator taken at the most recent time. It is computed
// here by the time-slicing recursion: sweeping slices from the latest to the
// earliest, each slice contributes one commutator with H(t_k) dt / i to every
// order at once.

#include <cmath>
#include <complex>
#include <string>
#include <utility>
#include <vector>

#include "ncpt/hamiltonian.hpp"
#include "ncpt/slicing.hpp"

namespace ncpt {

struct SeriesResult {
  std::vector<cplx> order_terms;   // index m = 0..max_order
  std::vector<cplx> partial_sums;  // partial_sums[m] = sum_{j<=m} order_terms[j]
  int n_slices = 0;                // 0 for slice-free methods
  double leakage = 0.0;
  bool converged = true;
  std::string method;
  /// |raw(N) - raw(N/2)| per order for grid-converged results, empty otherwise.
  std::vector<double> discretization_delta;

  int max_order() const { return static_cast<int>(order_terms.size()) - 1; }
  cplx total() const { return partial_sums.empty() ? cplx{} : partial_sums.back(); }
};

inline std::vector<cplx> cumulative(const std::vector<cplx>& terms) {
  std::vector<cplx> out;
  out.reserve(terms.size());
  cplx acc{};
  for (const auto& t : terms) out.push_back(acc += t);
  return out;
}

namespace detail {

inline void check_order(int max_order, int min_order = 0) {
  if (max_order < min_order)
    throw InvalidArgument("max_order must be >= " + std::to_string(min_order));
}

inline void check_real_terms(const std::vector<cplx>& terms, const OperatorMatrix& op,
                             const char* method) {
  if (!op.hermitian()) return;
  for (std::size_t m = 0; m < terms.size(); ++m)
    if (std::abs(terms[m].imag()) > 1e-10 * (1.0 + std::abs(terms[m])))
      throw NumericalError(std::string(method) + ": order " + std::to_string(m) +
                           " term of a Hermitian observable has imaginary part " +
                           std::to_string(terms[m].imag()));
}

/// Largest norm of S_m |psi0> (m >= 1) on basis states with some mode at its
/// top Fock level.
inline double edge_leakage(const HilbertSpace& space, const std::vector<Matrix>& ops,
                           const Vector& psi) {
  std::vector<Eigen::Index> edge;
  for (std::size_t i = 0; i < space.total_dim(); ++i)
    for (std::size_t m = 0; m < space.num_modes(); ++m)
      if (space.occupation(i, m) == space.mode_dims()[m] - 1) {
        edge.push_back(static_cast<Eigen::Index>(i));
        break;
      }
  double worst = 0.0;
  for (std::size_t m = 1; m < ops.size(); ++m) {
    const Vector v = ops[m] * psi;
    worst = std::max(worst, v(edge).norm());
  }
  return worst;
}

inline std::vector<cplx> expectations(const std::vector<Matrix>& ops, const Vector& psi) {
  std::vector<cplx> out;
  out.reserve(ops.size());
  for (const auto& s : ops) out.push_back(expectation(psi, s));
  return out;
}

}  // namespace detail

/// One slice of the recursion: for m = max..1, S_m += [S_{m-1}, generator],
/// where generator = H(t_k) dt / i. Descending m keeps S_{m-1} at its value
/// from the previously visited slices, so commutators never repeat a slice.
inline void accumulate_slice(std::vector<Matrix>& s, const Matrix& generator) {
  for (std::size_t m = s.size() - 1; m >= 1; --m) {
    s[m].noalias() += s[m - 1] * generator;
    s[m].noalias() -= generator * s[m - 1];
  }
}

/// Operators S_0 = O, S_1..S_max_order of the nested series at a fixed slice count.
inline std::vector<Matrix> nested_operator_terms(const HamiltonianSpec& spec,
                                                 const OperatorMatrix& op, double t,
                                                 int max_order, int n_slices) {
  require_same_space(spec.space(), op.space(), "nested series");
  detail::check_order(max_order, 1);
  const SliceGrid grid(t, n_slices);
  const Eigen::Index n = op.dim();
  std::vector<Matrix> s(static_cast<std::size_t>(max_order) + 1, Matrix::Zero(n, n));
  s[0] = op.matrix();
  const cplx scale = cplx(0.0, -grid.dt());  // dt / i
  for (int k = grid.size(); k >= 1; --k) {
    const Matrix gen = scale * evaluate_hamiltonian(spec, grid.sample_time(k)).matrix();
    accumulate_slice(s, gen);
  }
  return s;
}

/// Constant-Hamiltonian series: order m is (i t)^m / m! <[H, ... [H, O]]>.
inline SeriesResult bch_series(const OperatorMatrix& h, const OperatorMatrix& op,
                               const StateVector& state, double t, int max_order) {
  require_same_space(h.space(), op.space(), "bch_series");
  require_same_space(h.space(), state.space(), "bch_series");
  if (!h.hermitian()) throw InvalidArgument("bch_series needs a Hermitian Hamiltonian");
  detail::check_order(max_order);
  SeriesResult r;
  r.method = "bch";
  Matrix c = op.matrix();
  cplx coeff = 1.0;
  std::vector<Matrix> nested{c};
  for (int m = 0; m <= max_order; ++m) {
    if (m > 0) {
      c = commutator(h.matrix(), c);
      coeff *= cplx(0.0, t) / double(m);
      nested.push_back(c);
    }
    r.order_terms.push_back(coeff * expectation(state.amplitudes(), c));
  }
  detail::check_real_terms(r.order_terms, op, "bch_series");
  r.partial_sums = cumulative(r.order_terms);
  r.leakage = detail::edge_leakage(*h.space(), nested, state.amplitudes());
  return r;
}

/// Time-dependent nested series at a fixed number of slices.
/// Discretization error is O(dt) per order; see converge_series.
inline SeriesResult nested_series_expectation(const HamiltonianSpec& spec,
                                              const OperatorMatrix& op,
                                              const StateVector& state, double t,
                                              int max_order, int n_slices) {
  require_same_space(spec.space(), state.space(), "nested_series_expectation");
  const auto s = nested_operator_terms(spec, op, t, max_order, n_slices);
  SeriesResult r;
  r.method = "nested";
  r.n_slices = n_slices;
  r.order_terms = detail::expectations(s, state.amplitudes());
  detail::check_real_terms(r.order_terms, op, "nested_series_expectation");
  r.partial_sums = cumulative(r.order_terms);
  r.leakage = detail::edge_leakage(*spec.space(), s, state.amplitudes());
  return r;
}

/// Operator-valued nested series (the Heisenberg operator without taking
/// expectation values). Returns S_1..S_max_order.
inline std::vector<OperatorMatrix> heisenberg_expansion(const HamiltonianSpec& spec,
                                                        const OperatorMatrix& op,
                                                        double t, int max_order,
                                                        int n_slices) {
  auto s = nested_operator_terms(spec, op, t, max_order, n_slices);
  std::vector<OperatorMatrix> out;
  for (std::size_t m = 1; m < s.size(); ++m) out.emplace_back(spec.space(), std::move(s[m]));
  return out;
}

/// Doubles the slice count from policy.initial_slices until every
/// Richardson-extrapolated order term moves by less than tolerance between
/// successive grids, or max_slices is reached (converged = false).
inline SeriesResult converge_series(const HamiltonianSpec& spec, const OperatorMatrix& op,
                                    const StateVector& state, double t, int max_order,
                                    const SlicePolicy& policy) {
  if (!(policy.tolerance > 0.0)) throw InvalidArgument("tolerance must be > 0");
  OrderwiseExtrapolation<cplx> extrap(static_cast<std::size_t>(max_order) + 1, 1);
  SeriesResult last;
  bool converged = false;
  int n = std::max(1, policy.initial_slices);
  for (; n <= policy.max_slices; n *= 2) {
    last = nested_series_expectation(spec, op, state, t, max_order, n);
    if (extrap.add(last.order_terms) < policy.tolerance) {
      converged = true;
      break;
    }
  }
  if (!converged) n /= 2;
  SeriesResult r;
  r.method = "nested";
  r.n_slices = n;
  r.order_terms = extrap.best();
  r.order_terms[0] = last.order_terms[0];
  r.partial_sums = cumulative(r.order_terms);
  r.leakage = last.leakage;
  r.converged = converged;
  r.discretization_delta = extrap.raw_deltas();
  return r;
}

inline SeriesResult converge_series(const HamiltonianSpec& spec, const OperatorMatrix& op,
                                    const StateVector& state, double t, int max_order,
                                    double tolerance, int max_slices) {
  return converge_series(spec, op, state, t, max_order,
                         SlicePolicy{64, max_slices, tolerance});
}

struct OperatorSeries {
  std::vector<OperatorMatrix> terms;  // orders 1..max_order
  int n_slices = 0;
  bool converged = false;

  /// O + sum of all terms.
  OperatorMatrix summed(const OperatorMatrix& op) const {
    OperatorMatrix acc = op;
    for (const auto& s : terms) acc += s;
    return acc;
  }
};

/// Grid-converged version of heisenberg_expansion (max-entry tolerance).
inline OperatorSeries converge_heisenberg_expansion(const HamiltonianSpec& spec,
                                                    const OperatorMatrix& op, double t,
                                                    int max_order, const SlicePolicy& policy) {
  OrderwiseExtrapolation<Matrix> extrap(static_cast<std::size_t>(max_order), 1);
  OperatorSeries out;
  int n = std::max(1, policy.initial_slices);
  for (; n <= policy.max_slices; n *= 2) {
    auto s = nested_operator_terms(spec, op, t, max_order, n);
    s.erase(s.begin());
    if (extrap.add(s) < policy.tolerance) {
      out.converged = true;
      break;
    }
  }
  out.n_slices = out.converged ? n : n / 2;
  for (auto& m : extrap.best()) out.terms.emplace_back(spec.space(), std::move(m));
  return out;
}

}  // namespace ncpt
