#pragma once

// Uniform slice grids on [0, t] and Richardson extrapolation across grid
// doublings.

#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <vector>

#include "ncpt/hilbert.hpp"

namespace ncpt {

/// Slice k (1-based) covers [(k-1) dt, k dt] and is sampled at its midpoint.
class SliceGrid {
 public:
  SliceGrid(double horizon, int n_slices) : horizon_(horizon), n_(n_slices) {
    if (n_slices < 1) throw InvalidArgument("slice grid needs at least one slice");
    if (!(horizon >= 0.0)) throw InvalidArgument("slice grid horizon must be >= 0");
  }

  double horizon() const noexcept { return horizon_; }
  int size() const noexcept { return n_; }
  double dt() const noexcept { return horizon_ / n_; }
  double sample_time(int k) const noexcept { return (k - 0.5) * dt(); }
  double slice_begin(int k) const noexcept { return (k - 1) * dt(); }
  double slice_end(int k) const noexcept { return k * dt(); }

 private:
  double horizon_;
  int n_;
};

inline double magnitude(const cplx& z) { return std::abs(z); }
inline double magnitude(double x) { return std::abs(x); }
inline double magnitude(const Matrix& m) { return max_entry(m); }

/// Richardson table for a quantity sampled on grids N0, 2 N0, 4 N0, ...
/// whose discretization error expands in powers h^(step), h^(2 step), ...
/// (step 1 for first-order slicing, step 2 for symmetric schemes).
template <class T>
class RichardsonTable {
 public:
  explicit RichardsonTable(int power_step = 1, int max_levels = 8)
      : step_(power_step), max_levels_(max_levels) {}

  /// Adds the value from the next (doubled) grid; returns the new best estimate.
  const T& add(T value) {
    std::vector<T> row;
    row.push_back(std::move(value));
    if (!rows_.empty()) {
      const auto& prev = rows_.back();
      const std::size_t levels = std::min<std::size_t>(prev.size(), max_levels_);
      for (std::size_t l = 1; l <= levels; ++l) {
        const double f = std::pow(2.0, double(step_ * static_cast<int>(l))) - 1.0;
        T next = row[l - 1] + (row[l - 1] - prev[l - 1]) * (1.0 / f);
        row.push_back(std::move(next));
      }
    }
    rows_.push_back(std::move(row));
    return rows_.back().back();
  }

  std::size_t grids() const noexcept { return rows_.size(); }
  const T& best() const { return rows_.back().back(); }
  const T& raw() const { return rows_.back().front(); }
  const T& previous_best() const { return rows_[rows_.size() - 2].back(); }
  const T& previous_raw() const { return rows_[rows_.size() - 2].front(); }

 private:
  int step_;
  std::size_t max_levels_;
  std::vector<std::vector<T>> rows_;
};

/// Per-order Richardson tables advanced together.
template <class T>
class OrderwiseExtrapolation {
 public:
  OrderwiseExtrapolation(std::size_t orders, int power_step)
      : tables_(orders, RichardsonTable<T>(power_step)) {}

  /// Adds one grid's per-order values; returns the largest change in the
  /// extrapolated estimate (infinity on the first grid).
  double add(const std::vector<T>& values) {
    double delta = tables_.empty() || tables_.front().grids() == 0
                       ? std::numeric_limits<double>::infinity()
                       : 0.0;
    for (std::size_t m = 0; m < tables_.size(); ++m) {
      tables_[m].add(values[m]);
      if (tables_[m].grids() > 1)
        delta = std::max(delta, magnitude(tables_[m].best() - tables_[m].previous_best()));
    }
    if (tables_.empty()) delta = 0.0;
    return delta;
  }

  std::vector<T> best() const {
    std::vector<T> out;
    for (const auto& t : tables_) out.push_back(t.best());
    return out;
  }

  /// Per-order |raw(N) - raw(N/2)|: the size of the first-order slicing error.
  std::vector<double> raw_deltas() const {
    std::vector<double> out;
    for (const auto& t : tables_)
      out.push_back(t.grids() > 1 ? magnitude(t.raw() - t.previous_raw())
                                  : std::numeric_limits<double>::quiet_NaN());
    return out;
  }

 private:
  std::vector<RichardsonTable<T>> tables_;
};

/// Controls for grid-doubling convergence loops.
struct SlicePolicy {
  int initial_slices = 64;
  int max_slices = 1 << 16;
  double tolerance = 1e-10;
};

}  // namespace ncpt
