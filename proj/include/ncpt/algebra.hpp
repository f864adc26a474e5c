#pragma once

// Commutator-closure analysis: c-number detection, closure of an operator
// subspace under bracketing with H(t), the induced structure matrix and
// coefficient propagation inside a closed subspace, plus symbolic expansion of
// left- and right-nested commutators into signed words.

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ncpt/hamiltonian.hpp"

namespace ncpt {

struct ClosureOptions {
  double tolerance = 1e-9;  // on the Hilbert-Schmidt residual, safe subspace only
  int safe_buffer = 1;
};

struct ClosureReport {
  bool closed = false;
  double max_residual = 0.0;
  std::vector<double> sample_times;
  std::vector<double> per_time_residuals;      // max over depths at each time
  std::vector<std::vector<double>> residuals;  // [time][depth-1]
  std::string basis_label;
  int depth = 0;
};

/// Starting from O, commutes repeatedly with H(t) at each sample time and
/// projects every bracket onto the basis (restricted to the safe subspace).
/// The next bracket is taken from the in-span representative, so residuals
/// measure closure of the span rather than accumulated truncation-edge error.
inline ClosureReport closure_check(const OperatorMatrix& op, const HamiltonianSpec& spec,
                                   const OperatorBasis& basis,
                                   const std::vector<double>& sample_times, int depth,
                                   const ClosureOptions& opts = {}) {
  require_same_space(op.space(), spec.space(), "closure_check");
  require_same_space(op.space(), basis.space(), "closure_check");
  if (depth < 1) throw InvalidArgument("closure depth must be >= 1");
  const HsProjector proj(basis, opts.safe_buffer);
  ClosureReport r;
  r.basis_label = basis.label();
  r.depth = depth;
  r.sample_times = sample_times;
  for (double t : sample_times) {
    const Matrix h = evaluate_hamiltonian(spec, t).matrix();
    Matrix x = op.matrix();
    std::vector<double> row;
    for (int d = 1; d <= depth; ++d) {
      const Matrix c = commutator(x, h);
      const auto p = proj.project(c);
      row.push_back(p.residual_norm);
      x = reconstruct(basis, p.coefficients).matrix();
    }
    const double worst = *std::max_element(row.begin(), row.end());
    r.per_time_residuals.push_back(worst);
    r.max_residual = std::max(r.max_residual, worst);
    r.residuals.push_back(std::move(row));
  }
  r.closed = r.max_residual < opts.tolerance;
  return r;
}

struct StructureMatrix {
  Matrix entries;  // column a: coefficients of [B_a, H(t)] / i
  double time = 0.0;
  std::string basis_label;
  double max_residual = 0.0;
};

namespace detail {

inline StructureMatrix structure_matrix_with(const HsProjector& proj,
                                             const OperatorBasis& basis,
                                             const HamiltonianSpec& spec, double t,
                                             double tolerance) {
  const Matrix h = evaluate_hamiltonian(spec, t).matrix();
  const auto k = static_cast<Eigen::Index>(basis.size());
  StructureMatrix s;
  s.entries.resize(k, k);
  s.time = t;
  s.basis_label = basis.label();
  for (Eigen::Index a = 0; a < k; ++a) {
    const Matrix c = cplx(0.0, -1.0) * commutator(basis[static_cast<std::size_t>(a)].matrix(), h);
    const auto p = proj.project(c);
    s.max_residual = std::max(s.max_residual, p.residual_norm);
    if (!(p.residual_norm < tolerance))
      throw ClosureViolation("basis '" + basis.label() + "' not closed at t=" +
                             std::to_string(t) + " (residual " +
                             std::to_string(p.residual_norm) + ")");
    s.entries.col(a) = p.coefficients;
  }
  return s;
}

}  // namespace detail

/// M(t) with [B_a, H(t)] / i = sum_b M_ba(t) B_b on the safe subspace.
inline StructureMatrix structure_matrix(const OperatorBasis& basis, const HamiltonianSpec& spec,
                                        double t, const ClosureOptions& opts = {}) {
  require_same_space(basis.space(), spec.space(), "structure_matrix");
  const HsProjector proj(basis, opts.safe_buffer);
  return detail::structure_matrix_with(proj, basis, spec, t, opts.tolerance);
}

namespace detail {

/// M(t) assembled from per-term structure matrices: H(t) is linear in the
/// envelopes, so M(t) = sum_k e_k(t) M_k (+ conj(e_k(t)) M_k^adj for
/// hermitized terms). Usable only when every term closes on its own.
class TermwiseStructure {
 public:
  TermwiseStructure(const HsProjector& proj, const OperatorBasis& basis,
                    const HamiltonianSpec& spec, double tolerance)
      : spec_(&spec) {
    const auto k = static_cast<Eigen::Index>(basis.size());
    auto bracket_matrix = [&](const Matrix& a) {
      Matrix m(k, k);
      for (Eigen::Index b = 0; b < k; ++b) {
        const auto p = proj.project(
            Matrix(cplx(0.0, -1.0) * commutator(basis[static_cast<std::size_t>(b)].matrix(), a)));
        ok_ = ok_ && p.residual_norm < tolerance;
        m.col(b) = p.coefficients;
      }
      return m;
    };
    for (const auto& term : spec.terms()) {
      parts_.push_back(bracket_matrix(term.op.matrix()));
      adjoint_parts_.push_back(term.hermitize ? bracket_matrix(term.op.matrix().adjoint()) : Matrix{});
      if (!ok_) return;
    }
    zero_ = Matrix::Zero(k, k);
  }

  bool usable() const noexcept { return ok_; }

  Matrix at(double t) const {
    spec_->check_time(t);
    Matrix m = zero_;
    const auto& terms = spec_->terms();
    for (std::size_t i = 0; i < terms.size(); ++i) {
      const cplx e = terms[i].envelope(t);
      m += e * parts_[i];
      if (terms[i].hermitize) m += std::conj(e) * adjoint_parts_[i];
    }
    return m;
  }

 private:
  const HamiltonianSpec* spec_;
  bool ok_ = true;
  std::vector<Matrix> parts_, adjoint_parts_;
  Matrix zero_;
};

}  // namespace detail

/// <O>(t) from coefficient propagation inside a closed subspace.
///
/// If O = sum_a c_a B_a, the Heisenberg operator is O_H(t) = sum_a beta_a B_a
/// with beta = w(0), where w(s) solves dw/ds = -M(s) w backwards from
/// w(t) = c (later brackets act first). Integrated with classical RK4 in
/// tau = t - s using n_steps steps.
inline double subspace_expectation(const OperatorMatrix& op, const HamiltonianSpec& spec,
                                   const OperatorBasis& basis, const StateVector& state,
                                   double t, int n_steps, const ClosureOptions& opts = {}) {
  require_same_space(op.space(), spec.space(), "subspace_expectation");
  require_same_space(op.space(), basis.space(), "subspace_expectation");
  require_same_space(op.space(), state.space(), "subspace_expectation");
  if (n_steps < 1) throw InvalidArgument("subspace_expectation needs n_steps >= 1");
  const HsProjector proj(basis, opts.safe_buffer);
  const auto start = proj.project(op);
  if (!(start.residual_norm < opts.tolerance))
    throw ClosureViolation("observable lies outside the span of basis '" + basis.label() + "'");

  evaluate_hamiltonian(spec, 0.0);
  evaluate_hamiltonian(spec, t);
  const detail::TermwiseStructure termwise(proj, basis, spec, opts.tolerance);
  const double h = t / n_steps;
  auto m_at = [&](double tau) -> Matrix {
    if (termwise.usable()) return termwise.at(t - tau);
    return detail::structure_matrix_with(proj, basis, spec, t - tau, opts.tolerance).entries;
  };
  Vector w = start.coefficients;
  Matrix m0 = m_at(0.0);
  for (int step = 0; step < n_steps; ++step) {
    const double tau = step * h;
    const Matrix mh = m_at(tau + 0.5 * h);
    const Matrix m1 = m_at(tau + h);
    const Vector k1 = m0 * w;
    const Vector k2 = mh * (w + 0.5 * h * k1);
    const Vector k3 = mh * (w + 0.5 * h * k2);
    const Vector k4 = m1 * (w + h * k3);
    w += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    m0 = m1;
  }
  cplx value{};
  for (std::size_t a = 0; a < basis.size(); ++a)
    value += w(static_cast<Eigen::Index>(a)) *
             expectation(state.amplitudes(), basis[a].matrix());
  return value.real();
}

struct CNumber {
  cplx scalar;
  double residual = 0.0;
};

/// Tests whether O acts as a scalar on the safe subspace.
inline CNumber c_number_test(const OperatorMatrix& op, int safe_buffer = 1) {
  const auto idx = safe_indices(*op.space(), safe_buffer);
  if (idx.empty()) throw InvalidArgument("safe subspace is empty for this buffer");
  const Matrix r = restrict_to(op.matrix(), idx);
  CNumber c;
  c.scalar = r.trace() / double(r.rows());
  c.residual = max_entry(r - c.scalar * Matrix::Identity(r.rows(), r.cols()));
  return c;
}

// ---------------------------------------------------------------------------
// Signed words.

struct SignedWord {
  int sign = 1;
  std::vector<std::string> symbols;

  bool operator==(const SignedWord&) const = default;
  auto operator<=>(const SignedWord& o) const {
    if (auto c = symbols <=> o.symbols; c != 0) return c;
    return sign <=> o.sign;
  }

  std::string str() const {
    std::string s = sign > 0 ? "+" : "-";
    for (const auto& x : symbols) s += x;
    return s;
  }
};

enum class NestPattern { left_nested, right_nested };

/// left_nested over (O, A, B, C): [[[O, A], B], C].
/// right_nested over (A, B, C, O): [A, [B, [C, O]]].
/// Returns all 2^depth signed words (like terms are not merged), sorted
/// lexicographically by symbol sequence.
inline std::vector<SignedWord> expand_nested_commutator(NestPattern pattern,
                                                        const std::vector<std::string>& symbols) {
  if (symbols.size() < 2) throw InvalidArgument("a commutator needs at least two symbols");
  std::vector<SignedWord> words;
  auto bracket = [&](const std::string& x, bool x_on_right) {
    std::vector<SignedWord> next;
    for (const auto& w : words) {
      SignedWord wx = w;
      wx.symbols.push_back(x);
      SignedWord xw{w.sign, {x}};
      xw.symbols.insert(xw.symbols.end(), w.symbols.begin(), w.symbols.end());
      if (x_on_right) {  // [w, x] = w x - x w
        xw.sign = -xw.sign;
      } else {  // [x, w] = x w - w x
        wx.sign = -wx.sign;
      }
      next.push_back(std::move(wx));
      next.push_back(std::move(xw));
    }
    words = std::move(next);
  };
  if (pattern == NestPattern::left_nested) {
    words.push_back({1, {symbols.front()}});
    for (std::size_t i = 1; i < symbols.size(); ++i) bracket(symbols[i], true);
  } else {
    words.push_back({1, {symbols.back()}});
    for (std::size_t i = symbols.size() - 1; i-- > 0;) bracket(symbols[i], false);
  }
  std::stable_sort(words.begin(), words.end(),
                   [](const SignedWord& a, const SignedWord& b) { return a.symbols < b.symbols; });
  return words;
}

/// True iff no symbol sequence (sign ignored) occurs in both lists.
inline bool word_sets_disjoint(const std::vector<SignedWord>& left,
                               const std::vector<SignedWord>& right) {
  std::set<std::vector<std::string>> seen;
  for (const auto& w : left) seen.insert(w.symbols);
  for (const auto& w : right)
    if (seen.contains(w.symbols)) return false;
  return true;
}

/// Sum of sign * product of the substituted matrices.
inline Matrix evaluate_words(const std::vector<SignedWord>& words,
                             const std::map<std::string, Matrix>& values) {
  if (words.empty()) return {};
  const Eigen::Index n = values.begin()->second.rows();
  Matrix total = Matrix::Zero(n, n);
  for (const auto& w : words) {
    Matrix p = Matrix::Identity(n, n);
    for (const auto& s : w.symbols) p = p * values.at(s);
    total += double(w.sign) * p;
  }
  return total;
}

/// Direct matrix evaluation of the nested commutator the words expand.
inline Matrix nested_commutator(NestPattern pattern, const std::vector<std::string>& symbols,
                                const std::map<std::string, Matrix>& values) {
  if (symbols.size() < 2) throw InvalidArgument("a commutator needs at least two symbols");
  if (pattern == NestPattern::left_nested) {
    Matrix acc = values.at(symbols.front());
    for (std::size_t i = 1; i < symbols.size(); ++i) acc = commutator(acc, values.at(symbols[i]));
    return acc;
  }
  Matrix acc = values.at(symbols.back());
  for (std::size_t i = symbols.size() - 1; i-- > 0;) acc = commutator(values.at(symbols[i]), acc);
  return acc;
}

}  // namespace ncpt
