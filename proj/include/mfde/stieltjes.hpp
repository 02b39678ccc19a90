#pragma once

// Kurzweil/Perron-Stieltjes integration against nondecreasing, left-continuous
// integrators g = anchor + (absolutely continuous part) + (jumps).
//
// Jump ownership: the integral over [a,b] picks up f(tau) * (g(tau+) - g(tau))
// for every jump time a <= tau < b. The jump at b belongs to the next interval.

#include "mfde/core.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mfde {

struct Jump {
  double time;
  double magnitude;
};

class Integrator {
 public:
  using Density = std::function<double(double)>;

  /// `density` may be empty, meaning the absolutely continuous part is zero.
  /// `primitive`, when given, is an antiderivative of `density` and is used
  /// instead of quadrature for the continuous part.
  Integrator(double anchor_time, double anchor_value, Density density,
             std::vector<Jump> jumps, Density primitive = {});

  static Integrator identity();
  static Integrator with_jumps(std::vector<Jump> jumps);  // density 1
  static Integrator pure_jumps(std::vector<Jump> jumps);  // density 0

  double operator()(double t) const;

  /// g(v) - g(u) for u <= v: density integral over [u,v] plus jumps in [u,v).
  double increment(double u, double v) const;

  /// Integral of the density alone over [u,v].
  double density_integral(double u, double v) const;

  double density(double t) const;
  bool has_density() const { return static_cast<bool>(density_); }

  /// g(t+) - g(t); zero away from jump times.
  double jump_at(double t) const;

  const std::vector<Jump>& jumps() const { return jumps_; }
  std::vector<Jump> jumps_in(double a, double b) const;  // a <= tau < b

  double anchor_time() const { return anchor_time_; }
  double anchor_value() const { return anchor_value_; }

 private:
  double anchor_time_;
  double anchor_value_;
  Density density_;
  Density primitive_;
  std::vector<Jump> jumps_;
};

double eval_g(const Integrator& g, double t);

struct QuadConfig {
  double base_mesh = 1e-2;     // max subinterval width before refinement
  int refinement_levels = 4;   // max panel doublings per jump-free piece
  double abs_tol = 1e-10;

  void validate() const;
};

/// Regulated vector integrand. The one-sided limits are used at the ends of
/// jump-free pieces; when absent, `value` is used there too.
struct Integrand {
  std::function<Vec(double)> value;
  std::function<Vec(double)> right_limit;
  std::function<Vec(double)> left_limit;
  std::vector<double> breakpoints;

  Integrand() = default;
  Integrand(std::function<Vec(double)> f) : value(std::move(f)) {}  // NOLINT
};

Integrand scalar_integrand(std::function<double(double)> f);

/// Continuous part only: integral of f * density over [a,b], composite Simpson
/// on pieces split at jump times and declared breakpoints.
Vec integrate_density(const Integrand& f, const Integrator& g, double a,
                      double b, const QuadConfig& cfg);

/// Atomic part only: sum of f(tau) * jump(tau) over a <= tau < b.
Vec integrate_jumps(const Integrand& f, const Integrator& g, double a, double b);

/// Full integral of f dg over [a,b]. For a > b the result is -integral over [b,a].
Vec integrate(const Integrand& f, const Integrator& g, double a, double b,
              const QuadConfig& cfg);

double integrate_scalar(const std::function<double(double)>& f,
                        const Integrator& g, double a, double b,
                        const QuadConfig& cfg);

/// Left-tagged Riemann-Stieltjes sums on dyadic divisions of [a,b] with every
/// jump time inserted as a division point. Level k uses 2^k uniform cells
/// (before jump insertion). Returns one approximation per level 1..levels.
std::vector<Vec> refine_oracle(const Integrand& f, const Integrator& g,
                               double a, double b, int levels);

double gronwall_bound(double k, double l, const Integrator& g, double a,
                      double xi);

struct GronwallPoint {
  double xi;
  double psi;
  double hypothesis_rhs;  // k + l * int_a^xi psi dg
  double bound;           // k * exp(l * (g(xi) - g(a)))
  bool hypothesis_ok;
  bool bound_ok;
};

struct GronwallReport {
  enum class Status { passed, failed, hypothesis_not_satisfied };
  Status status;
  std::vector<GronwallPoint> points;
  double max_bound_gap;  // max over grid of |psi - bound|
  std::string status_name() const;
};

/// Check the Perron-Stieltjes Gronwall inequality on a sampled psi.
/// psi is linearly interpolated between samples when integrated;
/// `tol` absorbs quadrature error in both comparisons.
GronwallReport check_gronwall(std::span<const double> times,
                              std::span<const double> psi, double k, double l,
                              const Integrator& g, const QuadConfig& cfg,
                              double tol = 1e-8);

}  // namespace mfde
