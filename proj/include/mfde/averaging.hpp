#pragma once

// Periodic averaging for slowly forced measure FDEs:
//   x = x(0) + eps int f(s, x_rho) dh + eps^2 int g(s, x_rho, eps) dh
//   y = y(0) + eps int f0(y_rho) ds,   f0(psi) = (1/T) int_0^T f(s, psi) dh(s)
// compared on [0, L/eps] against the error bound J * eps.

#include "mfde/core.hpp"
#include "mfde/mfde.hpp"
#include "mfde/phase_space.hpp"
#include "mfde/stieltjes.hpp"
#include "mfde/trajectory.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace mfde {

struct AvgConstants {
  double C = 1.0;   // Lipschitz constant of f in the history
  double C2 = 1.0;  // Lipschitz constant of f along shifts of a solution
  double C3 = 1.0;  // shift Lipschitz constant of the delay (times eps)
  double C4 = 1.0;  // history Lipschitz constant of the delay
  double M = 1.0;   // bound on |f| and |g|
  double Kp = 1.0;  // bound on k3 over [0, L/eps0]
  bool estimated = false;
};

struct AvgProblem {
  using Rhs = std::function<Vec(double, const History&)>;
  using Pert = std::function<Vec(double, const History&, double)>;
  using DelayMap = std::function<double(double, const History&, double)>;

  Rhs f;
  Pert g_pert;                    // empty means zero
  Integrator h = Integrator::identity();
  std::optional<Integrator> h2;   // integrator of the eps^2 term; defaults to h
  DelayMap rho_delay;             // empty means rho(t, psi, eps) = t
  std::shared_ptr<const History> phi0;
  WeightFn weight = WeightFn::constant_one();
  double T = 1.0;
  double alpha = 1.0;
  double L = 1.0;
  double eps0 = 1.0;
  AvgConstants consts;

  double step = 0.05;  // solver mesh step in t
  double tol = 1e-11;
  int max_iters = 300;
  QuadConfig quad{0.05, 6, 1e-12};
  QuadConfig mean_quad{0.1, 8, 1e-13};  // quadrature of f over one period
};

/// f0(psi) = (1/T) int_0^T f(s, psi) dh(s).
Vec averaged_rhs(const AvgProblem& p, const History& psi);

Trajectory solve_original(const AvgProblem& p, double eps);
Trajectory solve_averaged(const AvgProblem& p, double eps);

/// J = exp(K'' (L/T + eps0) alpha) (Kbar + M (L/T + eps0) alpha) with
/// Kbar = 2 alpha (M + C2 C3 L) and K'' = (C + C2 C4) Kp.
double theoretical_J(const AvgProblem& p);

/// sup over [0, L/eps] of |x - y| on the union of both meshes; x is read at
/// its nodes (value and post-jump value) and y linearly between its nodes.
double sup_error(const Trajectory& x, const Trajectory& y);

struct AvgCase {
  double eps = 0.0;
  double sup_error = 0.0;
  double j_times_eps = 0.0;
  bool pass = false;
  bool solved = false;
  std::string failure;
};

struct AvgReport {
  std::vector<AvgCase> cases;
  double theoretical_J = 0.0;
  double slope = 0.0;
  bool slope_valid = false;  // false when fewer than two usable errors
  bool estimate_based = false;

  bool all_within_bound() const;
};

/// Least-squares slope of log(error) against log(eps) over points with
/// error > floor; nullopt with fewer than two such points.
std::optional<double> loglog_slope(const std::vector<double>& eps,
                                   const std::vector<double>& err,
                                   double floor = 1e-12);

/// Worker count for eps sweeps: MFDE_THREADS if set and positive, else 1.
int sweep_threads();

AvgReport compare(const AvgProblem& p, const std::vector<double>& eps_list,
                  int threads = sweep_threads());

struct PeriodicityReport {
  double worst_f_gap = 0.0;      // max |f(t+T, psi) - f(t, psi)|
  double worst_alpha_gap = 0.0;  // max |h(t+T) - h(t) - alpha|
  double worst_delay_excess = 0.0;  // max rho(t, psi, eps) - t
  bool passed(double f_tol = 1e-10, double alpha_tol = 1e-10) const;
};

PeriodicityReport check_periodicity(const AvgProblem& p, int n_samples,
                                    std::uint64_t seed);

/// Scalar f(s, psi) = (a0 + b0 cos s) psi(0), rho = t, h = identity,
/// T = alpha = 2 pi, constant history phi0 on a unit window, constant weight.
/// Constants are honest bounds for this family (C3, C4 are tiny positive
/// stand-ins for the true value 0).
AvgProblem linear_case(double a0 = -0.5, double b0 = 1.0, double phi0 = 1.0,
                       double L = 1.0, double eps0 = 0.2);

/// f(s, psi) = sin(s) psi(0): zero mean.
AvgProblem sine_case(double phi0 = 1.0, double L = 1.0, double eps0 = 0.2);

/// f(s, psi) = v, independent of time and history.
AvgProblem constant_case(const Vec& v, double L = 1.0, double eps0 = 0.2);

}  // namespace mfde
