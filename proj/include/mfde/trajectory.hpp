#pragma once

#include "mfde/core.hpp"
#include "mfde/phase_space.hpp"

#include <memory>
#include <vector>

namespace mfde {

/// Solution of a measure equation on a mesh [t0, t_end]. values[i] is the
/// (left-continuous) value x(t_i); posts[i] is x(t_i+). Between nodes the
/// solution is interpolated by cubic Lagrange polynomials on smooth pieces,
/// which are delimited by the nodes flagged in `split`.
class Trajectory {
 public:
  Trajectory(std::shared_ptr<const History> initial, std::vector<double> mesh,
             std::vector<Vec> values, std::vector<Vec> posts,
             std::vector<char> split);

  double t0() const { return mesh_.front(); }
  double t_end() const { return mesh_.back(); }
  int dim() const { return static_cast<int>(values_.front().size()); }

  const std::vector<double>& mesh() const { return mesh_; }
  const std::vector<Vec>& values() const { return values_; }
  const std::vector<Vec>& posts() const { return posts_; }
  const std::vector<char>& split() const { return split_; }
  const History& initial() const { return *initial_; }
  std::shared_ptr<const History> initial_ptr() const { return initial_; }

  /// True when every node is a split, so the solution is piecewise linear.
  bool piecewise_linear() const;

  double component(double t, int i, Side side = Side::value) const;
  Vec operator()(double t, Side side = Side::value) const;

  /// Piecewise-linear reading through (t_i, x(t_i+)) and (t_{i+1}, x(t_{i+1})).
  Vec linear_at(double t) const;

  /// Mesh nodes where x(t+) differs from x(t).
  std::vector<double> jump_times() const;

 private:
  std::size_t locate(double t) const;  // index i with mesh[i] <= t < mesh[i+1]

  std::shared_ptr<const History> initial_;
  std::vector<double> mesh_;
  std::vector<Vec> values_;
  std::vector<Vec> posts_;
  std::vector<char> split_;
  std::vector<std::size_t> piece_start_;  // per node: split node opening its piece
  std::vector<std::size_t> piece_end_;    // per node: split node closing its piece
};

}  // namespace mfde
