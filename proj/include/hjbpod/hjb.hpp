#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "hjbpod/rom.hpp"
#include "hjbpod/types.hpp"

namespace hjbpod {

/// Axis-aligned box [lower_j, upper_j] in reduced coordinates.
struct Hypercube {
  std::vector<double> lower;
  std::vector<double> upper;

  int dim() const { return static_cast<int>(lower.size()); }
  bool contains(const Vector& point, double slack = 0.0) const;
};

/// Componentwise min/max of the columns of `points` (one reduced state per
/// column), each axis inflated by margin * width / 2 on both ends. Axes of
/// zero width are inflated by `degenerate_floor` instead.
Hypercube bounding_box(const Matrix& points, double margin,
                       double degenerate_floor = 1e-3);

/// Finite ascending set of admissible control values.
class ControlSet {
 public:
  ControlSet() = default;
  explicit ControlSet(std::vector<double> values);
  /// `count` equidistant values from lo to hi inclusive.
  static ControlSet uniform(double lo, double hi, std::size_t count);

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  const std::vector<double>& values() const { return values_; }
  double min() const { return values_.front(); }
  double max() const { return values_.back(); }
  bool within(double lo, double hi) const { return min() >= lo && max() <= hi; }

 private:
  std::vector<double> values_;
};

enum class Interpolation { kSimplex, kMultilinear };

inline constexpr int kMaxGridDim = 10;

/// Uniform tensor grid over a hypercube holding a piecewise-affine value
/// function (node values) and the minimizing control index at every node.
/// Nodes are stored with axis 0 varying fastest.
class ValueGrid {
 public:
  ValueGrid() = default;
  ValueGrid(Hypercube box, double mesh_size, double h, double lambda,
            std::vector<std::uint32_t> counts,
            Interpolation interp = Interpolation::kSimplex);

  int dim() const { return box_.dim(); }
  std::size_t size() const { return values_.size(); }
  const Hypercube& box() const { return box_; }
  double mesh_size() const { return mesh_size_; }
  double h() const { return h_; }
  double lambda() const { return lambda_; }
  double contraction() const { return 1.0 - lambda_ * h_; }
  const std::vector<std::uint32_t>& counts() const { return counts_; }
  double spacing(int axis) const { return spacing_[static_cast<std::size_t>(axis)]; }
  Interpolation interpolation() const { return interp_; }

  Vector node(std::size_t index) const;

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<std::uint32_t>& policy() { return policy_; }
  const std::vector<std::uint32_t>& policy() const { return policy_; }

  /// Solver bookkeeping.
  bool converged = false;
  std::size_t iterations = 0;
  double residual = 0.0;
  std::vector<double> residual_history;
  /// Number of Bellman targets that fell outside the box and were clamped.
  std::size_t out_of_box_targets = 0;
  /// sup of the running cost over nodes x controls, filled by the solver.
  double cost_bound = 0.0;

  /// Calls f(node_index, weight) for the interpolation stencil of `point`.
  /// Points outside the box are clamped componentwise first; returns true
  /// when clamping happened. Weights are nonnegative and sum to one.
  template <typename F>
  bool visit_stencil(const double* point, F&& f) const;

  /// Stencil size: dim + 1 for simplices, 2^dim for multilinear cells.
  std::size_t stencil_size() const;

  /// Interpolated value; increments *clamp_count for out-of-box points.
  double interpolate(const Vector& point, std::size_t* clamp_count = nullptr) const;
  /// Interpolates arbitrary per-node data with the same weights.
  double interpolate_data(std::span<const double> data, const Vector& point) const;

 private:
  Hypercube box_;
  double mesh_size_ = 0.0;
  double h_ = 0.0;
  double lambda_ = 0.0;
  Interpolation interp_ = Interpolation::kSimplex;
  std::vector<std::uint32_t> counts_;
  std::vector<double> spacing_;
  std::vector<std::size_t> strides_;
  std::vector<double> values_;
  std::vector<std::uint32_t> policy_;
};

/// Per-axis node count ceil(width * sqrt(dim) / K) + 1, so every cell
/// diagonal is at most K. Values start at 0, policy at index 0. Throws
/// GridTooLargeError when the node count exceeds `max_nodes`.
ValueGrid build_grid(const Hypercube& box, double mesh_size, double h,
                     double lambda, std::size_t max_nodes = 20'000'000,
                     Interpolation interp = Interpolation::kSimplex);

struct SweepResult {
  std::vector<double> values;
  std::vector<std::uint32_t> policy;
  double residual = 0.0;
};

/// One Jacobi application of the discrete Bellman operator
///   v(z_i) <- min_u (1 - lambda h) v(z_i + h f(z_i, u)) + h g(z_i, u).
/// Ties go to the smallest control.
SweepResult bellman_sweep(const ValueGrid& grid, const ReducedModel& model,
                          const ControlSet& controls, int workers = 1);

struct ValueIterationOptions {
  /// Absolute sup-norm stopping threshold; 0 selects 1e-8 * M_g / lambda.
  double tol = 0.0;
  /// 0 selects 10 * ceil(log(relative tol) / log(1 - lambda h)).
  std::size_t max_iter = 0;
  int workers = 1;
  /// Precomputed (node, control) stencils are kept when they fit.
  std::size_t cache_budget_bytes = std::size_t{768} << 20;
};

/// Value iteration from the grid's current values (zero after build_grid)
/// until the sweep residual drops below tol. A run that hits max_iter is
/// returned with converged = false.
ValueGrid solve_value_iteration(ValueGrid grid, const ReducedModel& model,
                                const ControlSet& controls,
                                const ValueIterationOptions& options = {});

struct ArgminResult {
  double control = 0.0;
  std::size_t index = 0;
  double value = 0.0;
};

/// Minimizer of the Bellman right-hand side at an arbitrary reduced point.
ArgminResult argmin_control(const ValueGrid& grid, const ReducedModel& model,
                            const ControlSet& controls, const Vector& point,
                            std::size_t* clamp_count = nullptr);

// ---------------------------------------------------------------------------

template <typename F>
bool ValueGrid::visit_stencil(const double* point, F&& f) const {
  const int d = dim();
  std::array<double, kMaxGridDim> frac{};
  std::array<int, kMaxGridDim> order{};
  std::size_t base = 0;
  bool clamped = false;
  for (int j = 0; j < d; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    double s = (point[j] - box_.lower[ju]) / spacing_[ju];
    const double top = static_cast<double>(counts_[ju] - 1);
    if (!(s >= 0.0)) {
      clamped = clamped || point[j] < box_.lower[ju];
      s = 0.0;
    } else if (s > top) {
      clamped = true;
      s = top;
    }
    auto cell = static_cast<std::uint32_t>(s);
    if (cell >= counts_[ju] - 1) cell = counts_[ju] - 2;
    frac[ju] = std::clamp(s - cell, 0.0, 1.0);
    base += cell * strides_[ju];
    order[ju] = j;
  }

  if (interp_ == Interpolation::kSimplex) {
    // Kuhn simplex containing the point: walk from the base corner along the
    // axes in order of decreasing fractional coordinate.
    std::sort(order.begin(), order.begin() + d,
              [&](int l, int r) { return frac[l] > frac[r] || (frac[l] == frac[r] && l < r); });
    std::size_t index = base;
    f(index, 1.0 - frac[order[0]]);
    for (int k = 0; k < d; ++k) {
      index += strides_[static_cast<std::size_t>(order[k])];
      const double next = k + 1 < d ? frac[order[k + 1]] : 0.0;
      f(index, frac[order[k]] - next);
    }
  } else {
    const std::size_t corners = std::size_t{1} << d;
    for (std::size_t c = 0; c < corners; ++c) {
      double w = 1.0;
      std::size_t index = base;
      for (int j = 0; j < d; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        if (c >> ju & 1U) {
          w *= frac[ju];
          index += strides_[ju];
        } else {
          w *= 1.0 - frac[ju];
        }
      }
      f(index, w);
    }
  }
  return clamped;
}

}  // namespace hjbpod
