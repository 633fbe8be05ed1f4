#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace hjbpod {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Strictly increasing time instants starting at 0.
class TimeGrid {
 public:
  TimeGrid() = default;
  explicit TimeGrid(std::vector<double> nodes);

  /// Equidistant grid 0, dt, ..., t_end. t_end must be (close to) a multiple
  /// of dt; the last node is snapped to t_end.
  static TimeGrid uniform(double t_end, double dt);

  std::size_t size() const { return nodes_.size(); }
  double operator[](std::size_t j) const { return nodes_[j]; }
  const std::vector<double>& nodes() const { return nodes_; }
  double step(std::size_t j) const { return nodes_[j + 1] - nodes_[j]; }
  bool is_uniform() const { return uniform_; }
  double dt() const { return dt_; }
  double final_time() const { return nodes_.back(); }

 private:
  std::vector<double> nodes_{0.0};
  bool uniform_ = true;
  double dt_ = 0.0;
};

/// States at every grid node (one column each) and the control held on each
/// interval [t_j, t_{j+1}).
struct Trajectory {
  TimeGrid grid;
  Matrix states;
  std::vector<double> controls;

  std::size_t steps() const { return controls.size(); }
  Vector state(std::size_t j) const { return states.col(static_cast<Eigen::Index>(j)); }
  Vector final_state() const { return states.col(states.cols() - 1); }
};

}  // namespace hjbpod
