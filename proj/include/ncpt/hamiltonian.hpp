#pragma once

// Time-dependent Hamiltonians as sums of envelope-weighted constant operators.

#include <cmath>
#include <complex>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "ncpt/hilbert.hpp"

namespace ncpt {

struct ConstantEnvelope {
  cplx amplitude{1.0, 0.0};
};

/// amplitude * sin(omega t + phase)
struct SinusoidEnvelope {
  cplx amplitude{1.0, 0.0};
  double omega = 1.0;
  double phase = 0.0;
};

/// amplitude * exp(-(t - center)^2 / (2 width^2))
struct GaussianPulseEnvelope {
  cplx amplitude{1.0, 0.0};
  double center = 0.0;
  double width = 1.0;
};

/// values[0] before breakpoints[0], values[i] on [breakpoints[i-1], breakpoints[i]),
/// values.back() from the last breakpoint on.
struct PiecewiseConstantEnvelope {
  std::vector<double> breakpoints;
  std::vector<cplx> values;
};

class Envelope {
 public:
  using Shape = std::variant<ConstantEnvelope, SinusoidEnvelope,
                             GaussianPulseEnvelope, PiecewiseConstantEnvelope>;

  Envelope() = default;
  Envelope(Shape shape) : shape_(std::move(shape)) { validate(); }  // NOLINT

  static Envelope constant(cplx a) { return Envelope(Shape(ConstantEnvelope{a})); }
  static Envelope sinusoid(cplx a, double omega, double phase = 0.0) {
    return Envelope(Shape(SinusoidEnvelope{a, omega, phase}));
  }
  static Envelope gaussian_pulse(cplx a, double center, double width) {
    return Envelope(Shape(GaussianPulseEnvelope{a, center, width}));
  }
  static Envelope piecewise_constant(std::vector<double> breakpoints,
                                     std::vector<cplx> values) {
    return Envelope(Shape(PiecewiseConstantEnvelope{std::move(breakpoints), std::move(values)}));
  }

  const Shape& shape() const noexcept { return shape_; }

  cplx operator()(double t) const {
    return std::visit(
        [t](const auto& s) -> cplx {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, ConstantEnvelope>) {
            return s.amplitude;
          } else if constexpr (std::is_same_v<S, SinusoidEnvelope>) {
            return s.amplitude * std::sin(s.omega * t + s.phase);
          } else if constexpr (std::is_same_v<S, GaussianPulseEnvelope>) {
            const double z = (t - s.center) / s.width;
            return s.amplitude * std::exp(-0.5 * z * z);
          } else {
            std::size_t i = 0;
            while (i < s.breakpoints.size() && t >= s.breakpoints[i]) ++i;
            return s.values[i];
          }
        },
        shape_);
  }

  /// Same envelope with every amplitude multiplied by factor.
  Envelope scaled(cplx factor) const {
    Shape s = shape_;
    std::visit(
        [factor](auto& e) {
          using S = std::decay_t<decltype(e)>;
          if constexpr (std::is_same_v<S, PiecewiseConstantEnvelope>) {
            for (auto& v : e.values) v *= factor;
          } else {
            e.amplitude *= factor;
          }
        },
        s);
    return Envelope(std::move(s));
  }

  bool is_constant() const {
    if (std::holds_alternative<ConstantEnvelope>(shape_)) return true;
    if (const auto* p = std::get_if<PiecewiseConstantEnvelope>(&shape_))
      return p->breakpoints.empty();
    if (const auto* s = std::get_if<SinusoidEnvelope>(&shape_))
      return s->amplitude == cplx{} || s->omega == 0.0;
    if (const auto* g = std::get_if<GaussianPulseEnvelope>(&shape_))
      return g->amplitude == cplx{};
    return false;
  }

 private:
  void validate() const {
    if (const auto* g = std::get_if<GaussianPulseEnvelope>(&shape_)) {
      if (!(g->width > 0.0)) throw InvalidArgument("gaussian pulse width must be > 0");
    } else if (const auto* p = std::get_if<PiecewiseConstantEnvelope>(&shape_)) {
      if (p->values.size() != p->breakpoints.size() + 1)
        throw InvalidArgument("piecewise envelope needs one more value than breakpoints");
      for (std::size_t i = 1; i < p->breakpoints.size(); ++i)
        if (!(p->breakpoints[i] > p->breakpoints[i - 1]))
          throw InvalidArgument("piecewise breakpoints must be strictly increasing");
    }
  }

  Shape shape_ = ConstantEnvelope{};
};

/// envelope(t) * op, or envelope(t) * op + conj(envelope(t)) * op^dagger when
/// hermitize is set. Terms sharing a group index are summed together first;
/// group sums are then added in order of first appearance.
struct HamiltonianTerm {
  Envelope envelope;
  OperatorMatrix op;
  bool hermitize = false;
  int group = 0;
};

class HamiltonianSpec {
 public:
  HamiltonianSpec() = default;
  HamiltonianSpec(SpacePtr space, std::vector<HamiltonianTerm> terms,
                  double horizon, std::string label = {})
      : space_(std::move(space)), terms_(std::move(terms)),
        horizon_(horizon), label_(std::move(label)) {
    if (!space_) throw InvalidArgument("Hamiltonian spec needs a space");
    if (!(horizon_ >= 0.0)) throw InvalidArgument("horizon must be >= 0");
    for (const auto& t : terms_)
      require_same_space(space_, t.op.space(), "Hamiltonian term");
  }

  /// H(t) = 0 on the given space.
  static HamiltonianSpec zero(SpacePtr space, double horizon) {
    return {std::move(space), {}, horizon, "zero"};
  }

  /// Time-independent H.
  static HamiltonianSpec constant(const OperatorMatrix& h, double horizon,
                                  std::string label = "constant") {
    if (!h.hermitian()) throw InvalidArgument("constant Hamiltonian must be Hermitian");
    return {h.space(), {{Envelope::constant(1.0), h, false, 0}}, horizon,
            std::move(label)};
  }

  const SpacePtr& space() const noexcept { return space_; }
  const std::vector<HamiltonianTerm>& terms() const noexcept { return terms_; }
  double horizon() const noexcept { return horizon_; }
  const std::string& label() const noexcept { return label_; }

  bool is_time_independent() const {
    for (const auto& t : terms_)
      if (!t.envelope.is_constant()) return false;
    return true;
  }

  /// Every envelope multiplied by lambda.
  HamiltonianSpec scaled(double lambda) const {
    HamiltonianSpec out = *this;
    for (auto& t : out.terms_) t.envelope = t.envelope.scaled(lambda);
    return out;
  }

  /// Evaluates H(t) as a raw matrix; see evaluate_hamiltonian for the checked form.
  Matrix evaluate_matrix(double t) const {
    check_time(t);
    const Eigen::Index n = space_->dim();
    Matrix total = Matrix::Zero(n, n);
    std::vector<int> seen;
    for (const auto& term : terms_) {
      bool done = false;
      for (int g : seen) done = done || g == term.group;
      if (done) continue;
      seen.push_back(term.group);
      Matrix part = Matrix::Zero(n, n);
      for (const auto& u : terms_) {
        if (u.group != term.group) continue;
        const cplx e = u.envelope(t);
        if (u.hermitize)
          part += e * u.op.matrix() + std::conj(e) * u.op.matrix().adjoint();
        else
          part += e * u.op.matrix();
      }
      total += part;
    }
    return total;
  }

  /// The sub-spec made of the terms of one group.
  HamiltonianSpec group_only(int group) const {
    std::vector<HamiltonianTerm> kept;
    for (const auto& t : terms_)
      if (t.group == group) kept.push_back(t);
    return {space_, std::move(kept), horizon_, label_ + "[group " + std::to_string(group) + "]"};
  }

  void check_time(double t) const {
    const double slack = 1e-12 * std::max(1.0, horizon_);
    if (!(t >= -slack && t <= horizon_ + slack))
      throw OutOfHorizon("time " + std::to_string(t) + " outside [0, " +
                         std::to_string(horizon_) + "] of spec '" + label_ + "'");
  }

 private:
  SpacePtr space_;
  std::vector<HamiltonianTerm> terms_;
  double horizon_ = 0.0;
  std::string label_;
};

/// Concatenates two specs on one space; b's groups are shifted past a's.
inline HamiltonianSpec combine(const HamiltonianSpec& a, const HamiltonianSpec& b,
                               std::string label = {}) {
  require_same_space(a.space(), b.space(), "combine");
  int offset = 0;
  for (const auto& t : a.terms()) offset = std::max(offset, t.group + 1);
  std::vector<HamiltonianTerm> terms = a.terms();
  for (auto t : b.terms()) {
    t.group += offset;
    terms.push_back(std::move(t));
  }
  return {a.space(), std::move(terms), std::min(a.horizon(), b.horizon()),
          label.empty() ? a.label() + "+" + b.label() : std::move(label)};
}

/// H(t), validated Hermitian to 1e-12.
inline OperatorMatrix evaluate_hamiltonian(const HamiltonianSpec& spec, double t) {
  Matrix h = spec.evaluate_matrix(t);
  const double defect = hermiticity_defect(h);
  if (defect >= kHermitianTolerance)
    throw NumericalError("Hamiltonian '" + spec.label() + "' is not Hermitian at t=" +
                         std::to_string(t) + " (defect " + std::to_string(defect) + ")");
  return {spec.space(), std::move(h), true};
}

}  // namespace ncpt
