#pragma once

// Independent reference computations used to validate the nested series:
// exact sliced propagation, the Dyson state-vector series, the
// Heisenberg-picture Hamiltonian and the Heisenberg-iteration series, the
// operator equation-of-motion check, and order-scaling probes.

#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "ncpt/hamiltonian.hpp"
#include "ncpt/series.hpp"
#include "ncpt/slicing.hpp"

namespace ncpt {

inline constexpr double kUnitarityTolerance = 1e-10;

/// exp(-i H dt) for Hermitian H via eigendecomposition, so the result is
/// unitary to round-off.
inline Matrix unitary_step(const Matrix& h, double dt) {
  const Eigen::Index n = h.rows();
  if (h.isZero(0.0) || dt == 0.0) return Matrix::Identity(n, n);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(h);
  if (eig.info() != Eigen::Success)
    throw NumericalError("eigendecomposition of slice Hamiltonian failed");
  const Vector phases =
      (eig.eigenvalues().cast<cplx>() * cplx(0.0, -dt)).array().exp().matrix();
  return eig.eigenvectors() * phases.asDiagonal() * eig.eigenvectors().adjoint();
}

inline double unitarity_defect(const Matrix& u) {
  return max_entry(u.adjoint() * u - Matrix::Identity(u.rows(), u.cols()));
}

/// U(t1, t0) from n midpoint-sampled slices, earliest slice applied first.
inline Matrix propagate(const HamiltonianSpec& spec, double t0, double t1, int n_slices) {
  if (n_slices < 1) throw InvalidArgument("propagation needs at least one slice");
  const double dt = (t1 - t0) / n_slices;
  Matrix u = Matrix::Identity(spec.space()->dim(), spec.space()->dim());
  for (int k = 1; k <= n_slices; ++k) {
    const Matrix h = evaluate_hamiltonian(spec, t0 + (k - 0.5) * dt).matrix();
    u = unitary_step(h, dt) * u;
  }
  return u;
}

struct PropagatorResult {
  OperatorMatrix U;
  int n_slices = 0;
  double unitarity_defect = 0.0;
};

inline PropagatorResult exact_propagator(const HamiltonianSpec& spec, double t, int n_slices) {
  PropagatorResult r;
  Matrix u = propagate(spec, 0.0, t, n_slices);
  r.unitarity_defect = unitarity_defect(u);
  if (!(r.unitarity_defect < kUnitarityTolerance))
    throw NumericalError("propagator unitarity defect " + std::to_string(r.unitarity_defect));
  r.U = OperatorMatrix(spec.space(), std::move(u));
  r.n_slices = n_slices;
  return r;
}

inline Matrix heisenberg_conjugate(const Matrix& u, const Matrix& op) {
  return u.adjoint() * op * u;
}

struct ExactValue {
  double value = 0.0;
  double error_estimate = std::numeric_limits<double>::infinity();
  int n_slices = 0;
  bool stabilized = false;
  double unitarity_defect = 0.0;  // worst over every propagator built
};

/// <psi0| U^dagger O U |psi0> on doubling slice counts, Richardson-extrapolated
/// in even powers of dt (the midpoint product formula is symmetric), until the
/// estimate moves by less than policy.tolerance.
inline ExactValue exact_expectation(const HamiltonianSpec& spec, const OperatorMatrix& op,
                                    const StateVector& state, double t,
                                    const SlicePolicy& policy = {8, 1 << 14, 1e-10}) {
  require_same_space(spec.space(), op.space(), "exact_expectation");
  require_same_space(spec.space(), state.space(), "exact_expectation");
  RichardsonTable<double> table(2);
  ExactValue r;
  double prev = std::numeric_limits<double>::quiet_NaN();
  for (int n = std::max(1, policy.initial_slices); n <= policy.max_slices; n *= 2) {
    const auto p = exact_propagator(spec, t, n);
    r.unitarity_defect = std::max(r.unitarity_defect, p.unitarity_defect);
    const Vector psi = p.U.matrix() * state.amplitudes();
    const double v = expectation(psi, op.matrix()).real();
    const double best = table.add(v);
    r.n_slices = n;
    r.value = best;
    if (table.grids() > 1) {
      r.error_estimate = std::abs(best - prev);
      if (r.error_estimate < policy.tolerance) {
        r.stabilized = true;
        break;
      }
    }
    prev = best;
  }
  return r;
}

struct ExactOperator {
  OperatorMatrix value;
  double error_estimate = std::numeric_limits<double>::infinity();
  int n_slices = 0;
  bool stabilized = false;
};

/// U^dagger O U, Richardson-extrapolated over doubling slice counts.
inline ExactOperator exact_heisenberg_operator(const HamiltonianSpec& spec,
                                               const OperatorMatrix& op, double t,
                                               const SlicePolicy& policy = {8, 1 << 14, 1e-11}) {
  RichardsonTable<Matrix> table(2);
  ExactOperator r;
  Matrix prev;
  for (int n = std::max(1, policy.initial_slices); n <= policy.max_slices; n *= 2) {
    const auto p = exact_propagator(spec, t, n);
    const Matrix best = table.add(heisenberg_conjugate(p.U.matrix(), op.matrix()));
    r.n_slices = n;
    if (table.grids() > 1) {
      r.error_estimate = max_entry(best - prev);
      if (r.error_estimate < policy.tolerance) {
        r.stabilized = true;
        prev = best;
        break;
      }
    }
    prev = best;
  }
  r.value = OperatorMatrix(spec.space(), prev);
  return r;
}

// ---------------------------------------------------------------------------
// Dyson state-vector series.

inline constexpr int kDysonMaxOrder = 4;

struct DysonResult {
  std::vector<Vector> state_corrections;       // |psi^(p)>, p = 0..max_order
  std::vector<cplx> grouped_expectation_terms;  // sum_{p+q=m} <psi^(p)|O|psi^(q)>
  int n_slices = 0;
};

/// State corrections accumulate H(t_k) dt / i applied to the next-lower
/// order, sweeping slices earliest first, so later times stand to the left.
inline DysonResult dyson_series_expectation(const HamiltonianSpec& spec,
                                            const OperatorMatrix& op,
                                            const StateVector& state, double t,
                                            int max_order, int n_slices) {
  require_same_space(spec.space(), op.space(), "dyson_series_expectation");
  require_same_space(spec.space(), state.space(), "dyson_series_expectation");
  if (max_order > kDysonMaxOrder)
    throw InvalidArgument("Dyson series is capped at order " + std::to_string(kDysonMaxOrder));
  if (max_order < 0) throw InvalidArgument("max_order must be >= 0");
  const SliceGrid grid(t, n_slices);
  const auto orders = static_cast<std::size_t>(max_order) + 1;
  DysonResult r;
  r.n_slices = n_slices;
  r.state_corrections.assign(orders, Vector::Zero(state.space()->dim()));
  r.state_corrections[0] = state.amplitudes();
  const cplx scale = cplx(0.0, -grid.dt());
  for (int k = 1; k <= grid.size(); ++k) {
    const Matrix gen = scale * evaluate_hamiltonian(spec, grid.sample_time(k)).matrix();
    for (std::size_t p = orders - 1; p >= 1; --p)
      r.state_corrections[p].noalias() += gen * r.state_corrections[p - 1];
  }
  std::vector<Vector> o_ket;
  for (const auto& v : r.state_corrections) o_ket.push_back(op.matrix() * v);
  for (std::size_t m = 0; m < orders; ++m) {
    cplx sum{};
    for (std::size_t p = 0; p <= m; ++p)
      sum += r.state_corrections[p].dot(o_ket[m - p]);
    r.grouped_expectation_terms.push_back(sum);
  }
  return r;
}

/// Grouped Dyson terms, Richardson-extrapolated across doubling grids.
inline SeriesResult converge_dyson(const HamiltonianSpec& spec, const OperatorMatrix& op,
                                   const StateVector& state, double t, int max_order,
                                   const SlicePolicy& policy) {
  OrderwiseExtrapolation<cplx> extrap(static_cast<std::size_t>(max_order) + 1, 1);
  SeriesResult r;
  r.method = "dyson";
  r.converged = false;
  int n = std::max(1, policy.initial_slices);
  for (; n <= policy.max_slices; n *= 2) {
    const auto d = dyson_series_expectation(spec, op, state, t, max_order, n);
    if (extrap.add(d.grouped_expectation_terms) < policy.tolerance) {
      r.converged = true;
      break;
    }
  }
  r.n_slices = r.converged ? n : n / 2;
  r.order_terms = extrap.best();
  r.partial_sums = cumulative(r.order_terms);
  r.discretization_delta = extrap.raw_deltas();
  return r;
}

// ---------------------------------------------------------------------------
// Heisenberg picture.

/// U^dagger(t) H(t) U(t).
inline OperatorMatrix heisenberg_hamiltonian(const HamiltonianSpec& spec, double t_eval,
                                             int n_slices) {
  const auto p = exact_propagator(spec, t_eval, n_slices);
  const Matrix h = evaluate_hamiltonian(spec, t_eval).matrix();
  Matrix hh = heisenberg_conjugate(p.U.matrix(), h);
  hh = 0.5 * (hh + hh.adjoint()).eval();
  return {spec.space(), std::move(hh), true};
}

/// S_0 = O, S_1..S_max of the iteration series in the Heisenberg-picture
/// Hamiltonian: the first commutator is taken at the EARLIEST time, so the
/// slices are swept earliest first. H_H at each slice midpoint comes from
/// the propagator advanced incrementally midpoint to midpoint.
inline std::vector<Matrix> heisenberg_iteration_terms(const HamiltonianSpec& spec,
                                                      const OperatorMatrix& op, double t,
                                                      int max_order, int n_slices) {
  require_same_space(spec.space(), op.space(), "heisenberg_iteration_series");
  detail::check_order(max_order, 1);
  const SliceGrid grid(t, n_slices);
  const Eigen::Index n = op.dim();
  std::vector<Matrix> s(static_cast<std::size_t>(max_order) + 1, Matrix::Zero(n, n));
  s[0] = op.matrix();
  const cplx scale = cplx(0.0, -grid.dt());
  Matrix u = Matrix::Identity(n, n);
  double at = 0.0;
  for (int k = 1; k <= grid.size(); ++k) {
    const double tk = grid.sample_time(k);
    u = propagate(spec, at, tk, 1) * u;
    at = tk;
    const Matrix hh = heisenberg_conjugate(u, evaluate_hamiltonian(spec, tk).matrix());
    accumulate_slice(s, scale * hh);
  }
  return s;
}

inline std::vector<OperatorMatrix> heisenberg_iteration_series(const HamiltonianSpec& spec,
                                                               const OperatorMatrix& op,
                                                               double t, int max_order,
                                                               int n_slices) {
  auto s = heisenberg_iteration_terms(spec, op, t, max_order, n_slices);
  std::vector<OperatorMatrix> out;
  for (std::size_t m = 1; m < s.size(); ++m) out.emplace_back(spec.space(), std::move(s[m]));
  return out;
}

inline OperatorSeries converge_heisenberg_iteration(const HamiltonianSpec& spec,
                                                    const OperatorMatrix& op, double t,
                                                    int max_order, const SlicePolicy& policy) {
  OrderwiseExtrapolation<Matrix> extrap(static_cast<std::size_t>(max_order), 1);
  OperatorSeries out;
  int n = std::max(1, policy.initial_slices);
  for (; n <= policy.max_slices; n *= 2) {
    auto s = heisenberg_iteration_terms(spec, op, t, max_order, n);
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

/// Expectation values of the iteration-series terms in the initial state.
inline SeriesResult converge_heisenberg_iteration_expectation(
    const HamiltonianSpec& spec, const OperatorMatrix& op, const StateVector& state,
    double t, int max_order, const SlicePolicy& policy) {
  OrderwiseExtrapolation<cplx> extrap(static_cast<std::size_t>(max_order) + 1, 1);
  SeriesResult r;
  r.method = "heisenberg_iteration";
  r.converged = false;
  int n = std::max(1, policy.initial_slices);
  for (; n <= policy.max_slices; n *= 2) {
    const auto s = heisenberg_iteration_terms(spec, op, t, max_order, n);
    if (extrap.add(detail::expectations(s, state.amplitudes())) < policy.tolerance) {
      r.converged = true;
      break;
    }
  }
  r.n_slices = r.converged ? n : n / 2;
  r.order_terms = extrap.best();
  r.partial_sums = cumulative(r.order_terms);
  r.discretization_delta = extrap.raw_deltas();
  return r;
}

/// Max-entry residual of the Heisenberg equation of motion,
///   (O_H(t+h) - O_H(t-h)) / 2h  versus  [O_H(t), H_H(t)] / i.
/// The propagator to t-h is shared by all three times, so its slicing error
/// cancels; the remaining residual is the O(h^2) finite-difference error.
inline double heisenberg_eom_check(const HamiltonianSpec& spec, const OperatorMatrix& op,
                                   double t, int n_slices, double dt_fd,
                                   int fine_slices = 16) {
  require_same_space(spec.space(), op.space(), "heisenberg_eom_check");
  if (!(dt_fd > 0.0) || t - dt_fd < 0.0)
    throw InvalidArgument("finite-difference step must be positive and fit inside [0, t]");
  const Matrix u_minus = exact_propagator(spec, t - dt_fd, n_slices).U.matrix();
  const Matrix u_mid = propagate(spec, t - dt_fd, t, fine_slices) * u_minus;
  const Matrix u_plus = propagate(spec, t, t + dt_fd, fine_slices) * u_mid;
  const Matrix o_minus = heisenberg_conjugate(u_minus, op.matrix());
  const Matrix o_mid = heisenberg_conjugate(u_mid, op.matrix());
  const Matrix o_plus = heisenberg_conjugate(u_plus, op.matrix());
  const Matrix h_mid = heisenberg_conjugate(u_mid, evaluate_hamiltonian(spec, t).matrix());
  const Matrix fd = (o_plus - o_minus) / (2.0 * dt_fd);
  const Matrix rhs = cplx(0.0, -1.0) * commutator(o_mid, h_mid);
  return max_entry(fd - rhs);
}

// ---------------------------------------------------------------------------
// Order scaling.

struct ScalingTable {
  std::vector<double> lambdas;
  std::vector<int> orders;
  std::vector<double> exact;                      // per lambda
  std::vector<std::vector<double>> residuals;     // [order][lambda]
  std::vector<std::vector<std::optional<double>>> ratios;  // [order][adjacent pair]
};

/// |exact - partial_sum_m| for each coupling lambda and order m, and the
/// ratios between adjacent lambdas (expected ~ (l1/l2)^(m+1)). Residuals
/// below residual_floor make the ratio indeterminate.
inline ScalingTable order_scaling_probe(
    const std::function<HamiltonianSpec(double)>& family, const OperatorMatrix& op,
    const StateVector& state, double t, const std::vector<int>& orders,
    const std::vector<double>& lambdas, const SlicePolicy& policy = {64, 1 << 15, 1e-13},
    double residual_floor = 1e-12) {
  ScalingTable tab;
  tab.lambdas = lambdas;
  tab.orders = orders;
  int max_order = 1;
  for (int m : orders) max_order = std::max(max_order, m);
  tab.residuals.assign(orders.size(), std::vector<double>(lambdas.size(), 0.0));
  for (std::size_t l = 0; l < lambdas.size(); ++l) {
    const auto spec = family(lambdas[l]);
    const double exact = exact_expectation(spec, op, state, t, {8, 1 << 14, 1e-13}).value;
    const auto series = converge_series(spec, op, state, t, max_order, policy);
    tab.exact.push_back(exact);
    for (std::size_t i = 0; i < orders.size(); ++i)
      tab.residuals[i][l] =
          std::abs(exact - series.partial_sums[static_cast<std::size_t>(orders[i])].real());
  }
  for (std::size_t i = 0; i < orders.size(); ++i) {
    std::vector<std::optional<double>> row;
    for (std::size_t l = 0; l + 1 < lambdas.size(); ++l) {
      const double a = tab.residuals[i][l];
      const double b = tab.residuals[i][l + 1];
      if (a < residual_floor || b < residual_floor)
        row.push_back(std::nullopt);
      else
        row.push_back(a / b);
    }
    tab.ratios.push_back(std::move(row));
  }
  return tab;
}

// ---------------------------------------------------------------------------
// Exact summation and the square/triangle split of sampled double sums.

/// Shewchuk-style nonoverlapping expansion of a running sum; the represented
/// value is exact.
class ExactSum {
 public:
  void add(double x) {
    std::size_t i = 0;
    for (double y : partials_) {
      if (std::abs(x) < std::abs(y)) std::swap(x, y);
      const double hi = x + y;
      const double lo = y - (hi - x);
      if (lo != 0.0) partials_[i++] = lo;
      x = hi;
    }
    partials_.resize(i);
    partials_.push_back(x);
  }

  /// True iff the exact value is zero.
  bool is_zero() const {
    for (double p : partials_)
      if (p != 0.0) return false;
    return true;
  }

  double value() const {
    double s = 0.0;
    for (double p : partials_) s += p;
    return s;
  }

 private:
  std::vector<double> partials_;
};

struct SplitSums {
  double square = 0.0;    // sum_{i,j} f_i g_j
  double lower_fg = 0.0;  // sum_{i >= j} f_i g_j  (f at the later sample)
  double lower_gf = 0.0;  // sum_{j > i} g_j f_i  (g at the later sample)
  bool identity_exact = false;  // square - lower_fg - lower_gf == 0 exactly
};

/// The full-square double sum of slice-sampled envelopes f, g equals the
/// lower triangle with f later plus the lower triangle with g later. The
/// three sums are formed from the same floating-point products and compared
/// in exact arithmetic.
inline SplitSums ordered_split_sums(std::span<const double> f, std::span<const double> g) {
  if (f.size() != g.size()) throw InvalidArgument("envelope samples differ in length");
  ExactSum square, fg, gf, diff;
  const std::size_t n = f.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double p = f[i] * g[j];
      square.add(p);
      diff.add(p);
      if (j <= i) {
        fg.add(p);
      }
    }
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < j; ++i) gf.add(g[j] * f[i]);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) diff.add(-(f[i] * g[j]));
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < j; ++i) diff.add(-(g[j] * f[i]));
  return {square.value(), fg.value(), gf.value(), diff.is_zero()};
}

}  // namespace ncpt
