#include "mfde/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mfde {

Trajectory::Trajectory(std::shared_ptr<const History> initial,
                       std::vector<double> mesh, std::vector<Vec> values,
                       std::vector<Vec> posts, std::vector<char> split)
    : initial_(std::move(initial)),
      mesh_(std::move(mesh)),
      values_(std::move(values)),
      posts_(std::move(posts)),
      split_(std::move(split)) {
  const std::size_t n = mesh_.size();
  if (!initial_) throw std::invalid_argument("trajectory needs an initial history");
  if (n < 2 || values_.size() != n || posts_.size() != n || split_.size() != n) {
    throw std::invalid_argument("trajectory arrays must have equal length >= 2");
  }
  for (std::size_t i = 1; i < n; ++i) {
    if (!(mesh_[i] > mesh_[i - 1])) {
      throw std::invalid_argument("trajectory mesh must be strictly increasing");
    }
  }
  split_.front() = 1;
  split_.back() = 1;

  piece_start_.assign(n, 0);
  piece_end_.assign(n, n - 1);
  std::size_t start = 0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (split_[i]) start = i;
    piece_start_[i] = start;
  }
  std::size_t end = n - 1;
  for (std::size_t i = n - 1; i-- > 0;) {
    if (split_[i + 1]) end = i + 1;
    piece_end_[i] = end;
  }
}

bool Trajectory::piecewise_linear() const {
  return std::all_of(split_.begin(), split_.end(), [](char c) { return c != 0; });
}

std::size_t Trajectory::locate(double t) const {
  auto it = std::upper_bound(mesh_.begin(), mesh_.end(), t);
  std::size_t i = static_cast<std::size_t>(it - mesh_.begin());
  return i == 0 ? 0 : std::min(i - 1, mesh_.size() - 2);
}

double Trajectory::component(double t, int c, Side side) const {
  const double t0 = mesh_.front();
  if (t < t0) return initial_->component(t - t0, c, side);
  if (t == t0) {
    if (side == Side::left) return initial_->component(0.0, c, Side::left);
    return side == Side::right ? posts_.front()[c] : values_.front()[c];
  }
  const double tend = mesh_.back();
  if (t > tend) {
    if (t - tend > 1e-12 * std::max(1.0, std::abs(tend))) {
      throw RangeError("trajectory evaluated at t=" + std::to_string(t) +
                       " beyond computed range " + std::to_string(tend));
    }
    return values_.back()[c];
  }

  const std::size_t i = locate(t);
  if (mesh_[i] == t) return side == Side::right ? posts_[i][c] : values_[i][c];
  if (t == mesh_.back()) return side == Side::right ? posts_.back()[c] : values_.back()[c];

  const std::size_t ps = piece_start_[i];
  const std::size_t pe = piece_end_[i];
  auto data = [&](std::size_t j) { return j == ps ? posts_[j][c] : values_[j][c]; };

  // Causal stencil: nodes up to t_{i+1} only, except near the piece start.
  const std::size_t hi = std::min(pe, std::max(i + 1, ps + 3));
  const std::size_t lo = hi >= ps + 3 ? hi - 3 : ps;
  double result = 0.0;
  for (std::size_t j = lo; j <= hi; ++j) {
    double w = 1.0;
    for (std::size_t m = lo; m <= hi; ++m) {
      if (m != j) w *= (t - mesh_[m]) / (mesh_[j] - mesh_[m]);
    }
    result += w * data(j);
  }
  return result;
}

Vec Trajectory::operator()(double t, Side side) const {
  Vec out(dim());
  for (int c = 0; c < dim(); ++c) out[c] = component(t, c, side);
  return out;
}

Vec Trajectory::linear_at(double t) const {
  if (t <= mesh_.front()) return (*this)(t);
  if (t >= mesh_.back()) return (*this)(t);
  const std::size_t i = locate(t);
  if (mesh_[i] == t) return values_[i];
  const double w = (t - mesh_[i]) / (mesh_[i + 1] - mesh_[i]);
  return (1.0 - w) * posts_[i] + w * values_[i + 1];
}

std::vector<double> Trajectory::jump_times() const {
  std::vector<double> out;
  for (std::size_t i = 0; i < mesh_.size(); ++i) {
    if (posts_[i] != values_[i]) out.push_back(mesh_[i]);
  }
  return out;
}

}  // namespace mfde
