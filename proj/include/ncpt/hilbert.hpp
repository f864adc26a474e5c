#pragma once

// Finite multi-mode bosonic Hilbert spaces with dense complex operators.
//
// Every mode is a truncated Fock space of local dimension d >= 2. The raising
// operator maps the top level |d-1> to zero, so canonical commutation
// relations hold everywhere except at the truncation edge. The "safe
// subspace" helpers below cut that edge away when comparing operators.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ncpt/error.hpp"

namespace ncpt {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr double kHermitianTolerance = 1e-12;
inline constexpr double kNormTolerance = 1e-12;

/// Ordered list of truncated modes. Mode 0 is the slowest-varying tensor
/// factor in the flattened basis index (Kronecker ordering).
class HilbertSpace {
 public:
  static constexpr std::size_t kDefaultDimCap = 4096;

  explicit HilbertSpace(std::vector<int> mode_dims,
                        std::size_t dim_cap = kDefaultDimCap)
      : mode_dims_(std::move(mode_dims)) {
    if (mode_dims_.empty()) throw InvalidArgument("mode_dims must be nonempty");
    total_dim_ = 1;
    for (int d : mode_dims_) {
      if (d < 2) throw InvalidArgument("every mode dimension must be >= 2");
      total_dim_ *= static_cast<std::size_t>(d);
      if (total_dim_ > dim_cap)
        throw InvalidArgument("total dimension exceeds cap " +
                              std::to_string(dim_cap));
    }
    strides_.assign(mode_dims_.size(), 1);
    for (std::size_t m = mode_dims_.size() - 1; m-- > 0;)
      strides_[m] = strides_[m + 1] * static_cast<std::size_t>(mode_dims_[m + 1]);
  }

  const std::vector<int>& mode_dims() const noexcept { return mode_dims_; }
  std::size_t num_modes() const noexcept { return mode_dims_.size(); }
  std::size_t total_dim() const noexcept { return total_dim_; }
  Eigen::Index dim() const noexcept { return static_cast<Eigen::Index>(total_dim_); }
  std::size_t stride(std::size_t mode) const { return strides_.at(mode); }

  std::size_t flat_index(std::span<const int> occupations) const {
    if (occupations.size() != mode_dims_.size())
      throw InvalidArgument("occupation list length does not match mode count");
    std::size_t idx = 0;
    for (std::size_t m = 0; m < occupations.size(); ++m) {
      if (occupations[m] < 0 || occupations[m] >= mode_dims_[m])
        throw InvalidArgument("occupation " + std::to_string(occupations[m]) +
                              " outside truncation of mode " + std::to_string(m));
      idx += static_cast<std::size_t>(occupations[m]) * strides_[m];
    }
    return idx;
  }

  int occupation(std::size_t index, std::size_t mode) const {
    return static_cast<int>((index / strides_[mode]) %
                            static_cast<std::size_t>(mode_dims_[mode]));
  }

  std::vector<int> occupations(std::size_t index) const {
    std::vector<int> occ(mode_dims_.size());
    for (std::size_t m = 0; m < occ.size(); ++m) occ[m] = occupation(index, m);
    return occ;
  }

  bool operator==(const HilbertSpace& other) const {
    return mode_dims_ == other.mode_dims_;
  }

 private:
  std::vector<int> mode_dims_;
  std::vector<std::size_t> strides_;
  std::size_t total_dim_ = 0;
};

using SpacePtr = std::shared_ptr<const HilbertSpace>;

inline SpacePtr build_space(std::vector<int> mode_dims,
                            std::size_t dim_cap = HilbertSpace::kDefaultDimCap) {
  return std::make_shared<const HilbertSpace>(std::move(mode_dims), dim_cap);
}

inline bool same_space(const SpacePtr& a, const SpacePtr& b) {
  return a == b || (a && b && *a == *b);
}

inline void require_same_space(const SpacePtr& a, const SpacePtr& b,
                               const char* what) {
  if (!same_space(a, b)) throw SpaceMismatch(what);
}

inline double max_entry(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline double hermiticity_defect(const Matrix& m) {
  return max_entry(m - m.adjoint());
}

/// Dense operator on a HilbertSpace. The Hermitian flag is a validated
/// contract: constructing a flagged operator that is not Hermitian throws.
class OperatorMatrix {
 public:
  OperatorMatrix() = default;

  OperatorMatrix(SpacePtr space, Matrix entries, bool hermitian = false)
      : space_(std::move(space)), m_(std::move(entries)), hermitian_(hermitian) {
    if (!space_) throw InvalidArgument("operator needs a space");
    if (m_.rows() != space_->dim() || m_.cols() != space_->dim())
      throw InvalidArgument("operator shape does not match space dimension");
    if (hermitian_) {
      const double defect = hermiticity_defect(m_);
      if (defect >= kHermitianTolerance)
        throw NumericalError("operator flagged Hermitian has defect " +
                             std::to_string(defect));
    }
  }

  static OperatorMatrix zero(const SpacePtr& space) {
    return {space, Matrix::Zero(space->dim(), space->dim()), true};
  }
  static OperatorMatrix identity(const SpacePtr& space) {
    return {space, Matrix::Identity(space->dim(), space->dim()), true};
  }

  const SpacePtr& space() const noexcept { return space_; }
  const Matrix& matrix() const noexcept { return m_; }
  bool hermitian() const noexcept { return hermitian_; }
  Eigen::Index dim() const noexcept { return m_.rows(); }

  OperatorMatrix adjoint() const { return {space_, m_.adjoint(), hermitian_}; }

  /// Re-validates and sets the Hermitian flag.
  OperatorMatrix as_hermitian() const { return {space_, m_, true}; }

  OperatorMatrix& operator+=(const OperatorMatrix& o) {
    require_same_space(space_, o.space_, "operator addition");
    m_ += o.m_;
    hermitian_ = hermitian_ && o.hermitian_;
    return *this;
  }
  OperatorMatrix& operator-=(const OperatorMatrix& o) {
    require_same_space(space_, o.space_, "operator subtraction");
    m_ -= o.m_;
    hermitian_ = hermitian_ && o.hermitian_;
    return *this;
  }

  friend OperatorMatrix operator+(OperatorMatrix a, const OperatorMatrix& b) {
    return a += b;
  }
  friend OperatorMatrix operator-(OperatorMatrix a, const OperatorMatrix& b) {
    return a -= b;
  }
  friend OperatorMatrix operator*(const OperatorMatrix& a, const OperatorMatrix& b) {
    require_same_space(a.space_, b.space_, "operator product");
    return {a.space_, a.m_ * b.m_};
  }
  friend OperatorMatrix operator*(double s, const OperatorMatrix& a) {
    return {a.space_, s * a.m_, a.hermitian_};
  }
  friend OperatorMatrix operator*(cplx s, const OperatorMatrix& a) {
    return {a.space_, s * a.m_, a.hermitian_ && s.imag() == 0.0};
  }

 private:
  SpacePtr space_;
  Matrix m_;
  bool hermitian_ = false;
};

/// Normalized state vector.
class StateVector {
 public:
  StateVector() = default;

  StateVector(SpacePtr space, Vector amplitudes)
      : space_(std::move(space)), v_(std::move(amplitudes)) {
    if (!space_) throw InvalidArgument("state needs a space");
    if (v_.size() != space_->dim())
      throw InvalidArgument("state length does not match space dimension");
    if (std::abs(v_.norm() - 1.0) >= kNormTolerance)
      throw InvalidArgument("state is not normalized");
  }

  static StateVector normalized(SpacePtr space, Vector amplitudes) {
    const double n = amplitudes.norm();
    if (!(n > 0.0)) throw InvalidArgument("cannot normalize a zero vector");
    return {std::move(space), amplitudes / n};
  }

  const SpacePtr& space() const noexcept { return space_; }
  const Vector& amplitudes() const noexcept { return v_; }

 private:
  SpacePtr space_;
  Vector v_;
};

enum class LadderKind { lower, raise, number };

/// Ladder operator on one tensor factor, identity elsewhere.
inline OperatorMatrix ladder_operator(const SpacePtr& space, std::size_t mode,
                                      LadderKind kind) {
  if (mode >= space->num_modes())
    throw InvalidArgument("mode index " + std::to_string(mode) + " out of range");
  const Eigen::Index n = space->dim();
  const std::size_t stride = space->stride(mode);
  const int d = space->mode_dims()[mode];
  Matrix m = Matrix::Zero(n, n);
  for (std::size_t col = 0; col < space->total_dim(); ++col) {
    const int occ = space->occupation(col, mode);
    const auto c = static_cast<Eigen::Index>(col);
    switch (kind) {
      case LadderKind::lower:
        if (occ > 0)
          m(static_cast<Eigen::Index>(col - stride), c) = std::sqrt(double(occ));
        break;
      case LadderKind::raise:
        if (occ < d - 1)
          m(static_cast<Eigen::Index>(col + stride), c) = std::sqrt(double(occ + 1));
        break;
      case LadderKind::number:
        m(c, c) = double(occ);
        break;
    }
  }
  return {space, std::move(m), kind == LadderKind::number};
}

inline OperatorMatrix lower(const SpacePtr& s, std::size_t mode) {
  return ladder_operator(s, mode, LadderKind::lower);
}
inline OperatorMatrix raise(const SpacePtr& s, std::size_t mode) {
  return ladder_operator(s, mode, LadderKind::raise);
}
inline OperatorMatrix number(const SpacePtr& s, std::size_t mode) {
  return ladder_operator(s, mode, LadderKind::number);
}

/// AB - BA.
inline OperatorMatrix commutator(const OperatorMatrix& a, const OperatorMatrix& b) {
  require_same_space(a.space(), b.space(), "commutator");
  Matrix c = a.matrix() * b.matrix();
  c.noalias() -= b.matrix() * a.matrix();
  return {a.space(), std::move(c)};
}

inline Matrix commutator(const Matrix& a, const Matrix& b) {
  Matrix c = a * b;
  c.noalias() -= b * a;
  return c;
}

inline StateVector fock_state(const SpacePtr& space, std::span<const int> occupations) {
  Vector v = Vector::Zero(space->dim());
  v(static_cast<Eigen::Index>(space->flat_index(occupations))) = 1.0;
  return {space, std::move(v)};
}

inline StateVector fock_state(const SpacePtr& space, std::initializer_list<int> occ) {
  const std::vector<int> o(occ);
  return fock_state(space, std::span<const int>(o));
}

/// <psi|O|psi>. For a Hermitian-flagged O the imaginary part is checked.
inline cplx expectation(const StateVector& state, const OperatorMatrix& op) {
  require_same_space(state.space(), op.space(), "expectation");
  const cplx value = state.amplitudes().dot(op.matrix() * state.amplitudes());
  if (op.hermitian() &&
      std::abs(value.imag()) >= 1e-12 * std::max(1.0, op.matrix().norm()))
    throw NumericalError("Hermitian expectation has imaginary part " +
                         std::to_string(value.imag()));
  return value;
}

inline cplx expectation(const Vector& psi, const Matrix& op) {
  return psi.dot(op * psi);
}

inline double hs_norm(const Matrix& m) { return m.norm(); }

// ---------------------------------------------------------------------------
// Safe subspace: basis states whose every occupation is <= dim - 1 - buffer.

inline std::vector<Eigen::Index> safe_indices(const HilbertSpace& space, int buffer) {
  std::vector<Eigen::Index> idx;
  for (std::size_t i = 0; i < space.total_dim(); ++i) {
    bool ok = true;
    for (std::size_t m = 0; m < space.num_modes() && ok; ++m)
      ok = space.occupation(i, m) <= space.mode_dims()[m] - 1 - buffer;
    if (ok) idx.push_back(static_cast<Eigen::Index>(i));
  }
  return idx;
}

/// P M P expressed on the safe subspace (a smaller dense matrix).
inline Matrix restrict_to(const Matrix& m, const std::vector<Eigen::Index>& idx) {
  return m(idx, idx);
}

/// Orthogonal projector onto the safe subspace, in the full space.
inline OperatorMatrix safe_projector(const SpacePtr& space, int buffer) {
  Matrix p = Matrix::Zero(space->dim(), space->dim());
  for (auto i : safe_indices(*space, buffer)) p(i, i) = 1.0;
  return {space, std::move(p), true};
}

/// Max-entry distance between two operators on the safe subspace.
inline double safe_distance(const OperatorMatrix& a, const OperatorMatrix& b, int buffer) {
  require_same_space(a.space(), b.space(), "safe_distance");
  const auto idx = safe_indices(*a.space(), buffer);
  if (idx.empty()) throw InvalidArgument("safe subspace is empty for this buffer");
  return max_entry(restrict_to(a.matrix() - b.matrix(), idx));
}

/// Spectral (operator 2-) norm of the safe-subspace restriction of a - b.
inline double safe_operator_norm_distance(const OperatorMatrix& a,
                                          const OperatorMatrix& b, int buffer) {
  require_same_space(a.space(), b.space(), "safe_operator_norm_distance");
  const auto idx = safe_indices(*a.space(), buffer);
  if (idx.empty()) throw InvalidArgument("safe subspace is empty for this buffer");
  const Matrix d = restrict_to(a.matrix() - b.matrix(), idx);
  Eigen::JacobiSVD<Matrix> svd(d);
  return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

// ---------------------------------------------------------------------------
// Operator bases and Hilbert-Schmidt projection.

class OperatorBasis {
 public:
  OperatorBasis() = default;
  OperatorBasis(std::string label, std::vector<OperatorMatrix> elements)
      : label_(std::move(label)), elements_(std::move(elements)) {
    if (elements_.empty()) throw InvalidArgument("operator basis is empty");
    for (const auto& e : elements_)
      require_same_space(elements_.front().space(), e.space(), "operator basis");
  }

  const std::string& label() const noexcept { return label_; }
  const std::vector<OperatorMatrix>& elements() const noexcept { return elements_; }
  std::size_t size() const noexcept { return elements_.size(); }
  const SpacePtr& space() const { return elements_.front().space(); }
  const OperatorMatrix& operator[](std::size_t i) const { return elements_[i]; }

 private:
  std::string label_;
  std::vector<OperatorMatrix> elements_;
};

struct Projection {
  Vector coefficients;
  double residual_norm = 0.0;
};

/// Least-squares projection onto a basis under the Hilbert-Schmidt inner
/// product, optionally after restricting everything to a safe subspace.
/// The Gram matrix is factored once, so one projector serves many operators.
class HsProjector {
 public:
  static constexpr double kDefaultConditionBound = 1e12;

  explicit HsProjector(const OperatorBasis& basis,
                       std::optional<int> safe_buffer = std::nullopt,
                       double condition_bound = kDefaultConditionBound)
      : space_(basis.space()) {
    if (safe_buffer) {
      idx_ = safe_indices(*space_, *safe_buffer);
      if (idx_.empty()) throw InvalidArgument("safe subspace is empty for this buffer");
    }
    const auto k = static_cast<Eigen::Index>(basis.size());
    const Eigen::Index n = rows();
    flat_.resize(n * n, k);
    for (Eigen::Index a = 0; a < k; ++a) {
      const Matrix r = reduce(basis[static_cast<std::size_t>(a)].matrix());
      flat_.col(a) = Eigen::Map<const Vector>(r.data(), r.size());
    }
    const Matrix gram = flat_.adjoint() * flat_;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    condition_ = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    if (!(condition_ < condition_bound))
      throw IllConditioned("basis '" + basis.label() +
                           "' Gram matrix condition number " +
                           std::to_string(condition_));
    gram_ = gram.ldlt();
  }

  double condition_number() const noexcept { return condition_; }
  bool restricted() const noexcept { return !idx_.empty(); }

  Projection project(const Matrix& op) const {
    const Matrix r = reduce(op);
    const Eigen::Map<const Vector> v(r.data(), r.size());
    Projection p;
    p.coefficients = gram_.solve(flat_.adjoint() * v);
    p.residual_norm = (v - flat_ * p.coefficients).norm();
    return p;
  }

  Projection project(const OperatorMatrix& op) const {
    require_same_space(space_, op.space(), "hs_project");
    return project(op.matrix());
  }

 private:
  Eigen::Index rows() const {
    return idx_.empty() ? space_->dim() : static_cast<Eigen::Index>(idx_.size());
  }
  Matrix reduce(const Matrix& m) const { return idx_.empty() ? m : restrict_to(m, idx_); }

  SpacePtr space_;
  std::vector<Eigen::Index> idx_;
  Matrix flat_;
  Eigen::LDLT<Matrix> gram_;
  double condition_ = 0.0;
};

inline Projection hs_project(const OperatorMatrix& op, const OperatorBasis& basis,
                             double condition_bound = HsProjector::kDefaultConditionBound) {
  return HsProjector(basis, std::nullopt, condition_bound).project(op);
}

/// Sum_a c_a B_a.
inline OperatorMatrix reconstruct(const OperatorBasis& basis, const Vector& coeffs) {
  Matrix m = Matrix::Zero(basis.space()->dim(), basis.space()->dim());
  for (std::size_t a = 0; a < basis.size(); ++a)
    m += coeffs(static_cast<Eigen::Index>(a)) * basis[a].matrix();
  return {basis.space(), std::move(m)};
}

}  // namespace ncpt
