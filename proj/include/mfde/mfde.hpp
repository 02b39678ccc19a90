#pragma once

// Measure functional differential equations with state-dependent delay:
//   x(t) = x(t0) + int_{t0}^t f(s, x_{rho(s, x_s)}) dg(s),   x_{t0} = phi.
// An optional second term against another integrator g2 is supported.

#include "mfde/core.hpp"
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

struct HypothesisBounds {
  std::function<double(double)> M;   // |f| <= M
  std::function<double(double)> L;   // Lipschitz in the history
  std::function<double(double)> L2;  // Lipschitz in the shift
  std::function<double(double)> L3;  // Lipschitz of the delay map
};

struct MfdeProblem {
  using Rhs = std::function<Vec(double, const History&)>;
  using DelayMap = std::function<double(double, const History&)>;

  Rhs f;
  DelayMap rho_delay;
  Integrator g = Integrator::identity();
  std::shared_ptr<const History> phi0;
  WeightFn weight = WeightFn::exp_pos();
  double t0 = 0.0;
  double sigma = 1.0;
  double step = 0.01;
  HypothesisBounds bounds;
  double tol = 1e-10;
  int max_iters = 200;
  QuadConfig quad;
  std::vector<double> extra_times;  // additional mesh nodes

  /// Optional second term int f2(s, x_{rho}) dg2(s) with its own integrator.
  Rhs f2;
  std::optional<Integrator> g2;

  /// Optional starting iterate on [t0, t0+sigma]; the default is phi0(0).
  std::function<Vec(double)> initial_guess;
};

struct Mesh {
  std::vector<double> times;
  std::vector<char> split;  // nodes where the solution or its slope may break
};

/// Uniform base step plus jumps of g, extra times and breakpoints of phi0
/// mapped forward (theta_b -> t0 - theta_b).
Mesh build_mesh(const MfdeProblem& p);

/// One application of the fixed-point operator on the mesh of x.
Trajectory gamma_apply(const Trajectory& x, const MfdeProblem& p);

struct SolveResult {
  Trajectory x;
  int iterations = 0;       // total over windows
  double final_delta = 0.0;  // last sup-mesh change of the last window
  int windows = 0;
  std::vector<double> delayed_times;  // rho(t, x_t) on the mesh
  std::vector<Vec> jumps;             // x(t+) - x(t) per node, as computed f * (g(t+) - g(t))
};

/// Picard iteration, windowed so that each window satisfies the contraction
/// estimate K * (g(end) - g(start)) < 1/2.
SolveResult solve_picard(const MfdeProblem& p);

/// sup over mesh values and post-jump values of |x - Gamma x|.
double residual(const Trajectory& x, const MfdeProblem& p);

struct HypothesisReport {
  double b2_ratio = 0.0;  // max |f| / M
  double b3_ratio = 0.0;  // max |f(psi) - f(chi)| / (L |psi - chi|)
  double b4_ratio = 0.0;  // max |f(x_u) - f(x_v)| / (L2 |u - v|)
  double b6_ratio = 0.0;  // max |rho(psi) - rho(chi)| / (L3 |psi - chi|)
  int samples = 0;
  std::string b4_label = "sampled evidence only";
  bool passed(double slack = 1e-9) const;
};

HypothesisReport check_hypotheses(const MfdeProblem& p, int n_samples,
                                  std::uint64_t seed);

/// Kernel T(theta) = exp(-theta^2 + theta) and its example constants.
double tanh_kernel(double theta);
double tanh_cbar();  // int_{-inf}^0 T(theta) e^theta dtheta = e (sqrt(pi)/2) erfc(1)

/// f(t, psi) = cos^2 t * int T tanh(psi), rho(t, psi) = t - int_{-inf}^{-t}
/// T(theta) tanh|psi(theta - t)| dtheta, g = identity, phi0 = cos on [-8, 0]
/// with zero tail, weight e^theta. Kernel integrals are truncated at -6.
MfdeProblem example_tanh(double sigma = 2.0, double step = 0.005,
                         double tol = 1e-10);

/// f(t, psi) = a psi(0) + b, rho(t, psi) = t - delay, g = identity plus the
/// given jumps, constant history phi0, constant weight.
MfdeProblem example_linear(double a, double b, double delay, double phi0,
                           std::vector<Jump> jumps, double sigma, double step = 0.01,
                           double tol = 1e-12);

}  // namespace mfde
