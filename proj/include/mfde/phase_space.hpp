#pragma once

// Regulated histories on (-inf, 0], the weighted sup norm of BG_rho, the shift
// operator S(t), and sampled checks of the phase-space axioms (A2), (A3).

#include "mfde/core.hpp"

#include <functional>
#include <iosfwd>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace mfde {

/// A regulated function on (-inf, 0]: a finite active window [-R, 0] and a
/// constant tail below it. `component` reads one coordinate; `side` selects
/// the value, left limit or right limit at a point.
class History {
 public:
  virtual ~History() = default;

  virtual int dim() const = 0;
  virtual double window_start() const = 0;  // -R
  virtual Vec tail() const = 0;
  virtual double component(double theta, int i, Side side = Side::value) const = 0;

  /// Sorted points of [-R, 0] where the representation may change form,
  /// always containing -R and 0.
  virtual std::vector<double> knots() const = 0;

  /// True when the function is affine between consecutive knots (lateral
  /// limits taken at the knots themselves).
  virtual bool linear_between_knots() const { return false; }

  /// Points of [-R, 0] where lateral limits may differ or the derivative may
  /// jump. Defaults to the window ends.
  virtual std::vector<double> breaks() const { return {window_start(), 0.0}; }

  Vec operator()(double theta, Side side = Side::value) const;
};

struct Piece {
  std::vector<double> theta;  // strictly increasing, spans one breakpoint interval
  std::vector<Vec> value;     // front(): right limit at left end; back(): left limit at right end
};

class RegulatedFn final : public History {
 public:
  /// `breakpoints` runs from -R to 0; `point_values[j]` is the value at
  /// breakpoints[j] (entry 0 is ignored, the tail is used at -R).
  RegulatedFn(std::vector<double> breakpoints, std::vector<Piece> pieces,
              std::vector<Vec> point_values, Vec tail);

  static RegulatedFn constant(const Vec& c, double R, const Vec& tail);
  static RegulatedFn constant(const Vec& c, double R);  // tail = c

  /// Polyline through `samples_per_piece` uniform samples of f on each piece
  /// of [-R, 0] split at `interior_breaks`. Point values are f at the breaks.
  static RegulatedFn sampled(const std::function<Vec(double)>& f, double R,
                             int samples_per_piece, const Vec& tail,
                             std::vector<double> interior_breaks = {});
  static RegulatedFn sampled_scalar(const std::function<double(double)>& f,
                                    double R, int samples_per_piece,
                                    double tail,
                                    std::vector<double> interior_breaks = {});

  /// Exact copy of a history that is affine between its knots; otherwise
  /// every knot interval is subdivided to width at most `max_gap`.
  static RegulatedFn from_history(const History& h, double max_gap = 1e-3);

  int dim() const override { return static_cast<int>(tail_.size()); }
  double window_start() const override { return breakpoints_.front(); }
  Vec tail() const override { return tail_; }
  double component(double theta, int i, Side side = Side::value) const override;
  std::vector<double> knots() const override;
  bool linear_between_knots() const override { return true; }
  std::vector<double> breaks() const override { return breakpoints_; }

  const std::vector<double>& breakpoints() const { return breakpoints_; }
  const std::vector<Piece>& pieces() const { return pieces_; }
  const std::vector<Vec>& point_values() const { return point_values_; }

 private:
  std::vector<double> breakpoints_;
  std::vector<Piece> pieces_;
  std::vector<Vec> point_values_;
  Vec tail_;
};

/// a*x + b*y, exact for histories affine between knots.
RegulatedFn linear_combination(double a, const History& x, double b,
                               const History& y);

struct WeightFn {
  enum class Kind { exp_pos, constant_one };
  Kind kind = Kind::exp_pos;

  static WeightFn exp_pos() { return {Kind::exp_pos}; }
  static WeightFn constant_one() { return {Kind::constant_one}; }

  double operator()(double theta) const;
  double rate() const { return kind == Kind::exp_pos ? 1.0 : 0.0; }  // rho = e^{rate*theta}
  double p(double t) const;  // sup_{theta <= -t} rho(t+theta)/rho(theta)
  std::string name() const;
};

struct AxiomConstants {
  std::function<double(double)> k1, k2, k3, k;
};

/// Candidate constants: for e^theta, k1 = 1, k2 = k3 = e^t, k = e^t - 1;
/// for the constant weight, k1 = k2 = k3 = 1, k = 0.
AxiomConstants candidate_constants(const WeightFn& rho);

/// sup over the window of |phi(theta)| / rho(theta), including lateral limits
/// at knots. Exact for histories affine between knots, sampled at spacing
/// `grid` otherwise. A nonzero tail under e^theta has infinite norm.
double phase_norm(const History& phi, const WeightFn& rho, double grid = 1e-3);

/// S(t)phi: phi(0) at 0, phi(0-) on [-t, 0), phi(t + theta) below -t.
class ShiftedView final : public History {
 public:
  ShiftedView(std::shared_ptr<const History> base, double t);

  int dim() const override { return base_->dim(); }
  double window_start() const override { return base_->window_start() - t_; }
  Vec tail() const override { return base_->tail(); }
  double component(double theta, int i, Side side = Side::value) const override;
  std::vector<double> knots() const override;
  bool linear_between_knots() const override { return base_->linear_between_knots(); }

 private:
  std::shared_ptr<const History> base_;
  double t_;
};

RegulatedFn shift(const RegulatedFn& phi, double t);

class Trajectory;

/// x_t(theta) = x(t + theta), spliced with the initial history below t0.
/// With `right_top` the view represents x_{t+}: its value at 0 is x(t+).
class SegmentView final : public History {
 public:
  SegmentView(const Trajectory& x, double t, bool right_top = false);

  int dim() const override;
  double window_start() const override;
  Vec tail() const override;
  double component(double theta, int i, Side side = Side::value) const override;
  std::vector<double> knots() const override;
  bool linear_between_knots() const override;

 private:
  const Trajectory* x_;
  double t_;
  bool right_top_;
};

RegulatedFn segment(const Trajectory& x, double t);

struct A2Report {
  double worst_slack_b = 0.0;  // min over grid of k1*|y_t| - |y(t)|
  double worst_slack_c = 0.0;  // min over grid of rhs(c) - |y_t|
  bool passed_b = true;
  bool passed_c = true;
  int points = 0;
  bool passed() const { return passed_b && passed_c; }
};

/// (b) |y(t)| <= k1(t-t0) |y_t| and (c) |y_t| <= k2(t-t0)|y_t0| +
/// k3(t-t0) sup_[t0,t] |y| on the trajectory mesh in [t0, t0+sigma].
A2Report check_A2(const Trajectory& y, double t0, double sigma,
                  const AxiomConstants& consts, const WeightFn& rho,
                  double tol = 1e-12);

struct A3Report {
  double lhs = 0.0;  // |S(t)phi|
  double rhs = 0.0;  // (1 + k(t)) |phi|
  double slack = 0.0;
  bool passed = true;
};

A3Report check_A3(const History& phi, double t,
                  const std::function<double(double)>& k, const WeightFn& rho,
                  double tol = 1e-12);

struct Certification {
  bool certified = false;
  double scale = 1.0;  // 2^doublings
  int doublings = 0;
};

/// Runs check(scale) for scale = 1, 2, 4, ... up to 2^max_doublings and
/// returns the first passing scale.
Certification certify_by_doubling(const std::function<bool(double)>& check,
                                  int max_doublings = 10);

/// Random piecewise-linear history with jumps on [-R, 0].
RegulatedFn random_history(std::mt19937_64& rng, double R, int pieces, int dim,
                           bool zero_tail);

/// Random piecewise-linear trajectory with jumps on [t0, t0+sigma], continuing
/// the given initial history from its value at 0.
Trajectory random_trajectory(std::mt19937_64& rng,
                             std::shared_ptr<const History> initial, double t0,
                             double sigma, int nodes);

void write_history_csv(std::ostream& os, const History& h);

}  // namespace mfde
