#pragma once

// Extremum seeking for a quadratic map behind a state-dependent output delay
//   y(t) = Q(theta(t - D(theta(t)))),  Q(theta) = y* + (H/2)(theta - theta*)^2
// with sinusoidal dither, gradient/Hessian demodulation and a filtered
// predictor feedback law.

#include "mfde/core.hpp"

#include <functional>
#include <string>
#include <vector>

namespace mfde {

enum class FeasibilityPolicy { abort, monitor };

struct DelayModel {
  std::string id;
  std::function<double(double)> fn;    // D(theta) >= 0
  std::function<double(double)> grad;  // dD/dtheta; empty means central difference
};

/// "zero", "sin5sq" (D = sin^2(5 theta)/2) or "const:<d>".
DelayModel make_delay(const std::string& id);

struct EsParams {
  double k_gain = 0.2;
  double c = 2.0;
  double a = 0.2;
  double omega = 8.0;
  double theta_star = 8.0;
  double y_star = 64.0;
  double hessian = -1.0;
  DelayModel delay = make_delay("sin5sq");
  double theta_hat0 = 0.0;
  double u0 = 0.0;  // filter state at t = 0
  double dt = 1e-3;
  double t_end = 200.0;
  bool predictor_on = true;

  /// High-pass corner (rad/s) applied to y before demodulation; 0 disables.
  double washout = 0.0;
  double denom_floor = 1e-6;
  FeasibilityPolicy feasibility = FeasibilityPolicy::abort;
  double history_depth = 10.0;  // initial theta history is available on [-depth, 0]

  /// Average-model run: no dither, G = H (theta(phi(t)) - theta*), H_hat = H.
  bool average_model = false;

  static EsParams table1();
  void validate() const;
  double delay_grad(double theta) const;
};

struct EsFlags {
  bool delay_rate_warning = false;  // sampled dD/dt >= 1
  double delay_rate_time = 0.0;
  int feasibility_clamps = 0;       // monitor policy only
  double first_violation_time = -1.0;
};

struct EsTrace {
  EsParams params;
  std::vector<double> times, theta, theta_hat, y, G, H_hat, U, Gamma, phi, sigma, feas_margin;
  EsFlags flags;

  std::size_t size() const { return times.size(); }
};

class HistoryUnderflow : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class AssumptionViolation : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class FeasibilityError : public NumericalError {
 public:
  FeasibilityError(const std::string& what, double time, EsTrace partial)
      : NumericalError(what), time_(time), partial_(std::move(partial)) {}
  double time() const { return time_; }
  const EsTrace& partial() const { return partial_; }

 private:
  double time_;
  EsTrace partial_;
};

double static_map(const EsParams& p, double theta);

/// theta at any time covered by the trace or the initial history.
double theta_at(const EsTrace& tr, double s);
double u_at(const EsTrace& tr, double s);

double delayed_output(const EsParams& p, const EsTrace& tr, double t);
double delay_time(const EsParams& p, const EsTrace& tr, double t);
double prediction_time(const EsParams& p, const EsTrace& tr, double t);

struct DitherSignals {
  double S, M, N;
};

/// S = a sin(wt), M = (2/a) sin(w(t - d)), N = -(8/a^2) cos(2w(t - d)) with d = D(theta(t)).
DitherSignals dither_signals(const EsParams& p, double t, double theta_t);

struct Estimates {
  double G, H_hat;
};

Estimates estimates(const DitherSignals& s, double y);

/// H_hat(t) * int_{phi(t)}^t U / (1 - H_hat grad D(G) U) dtau by trapezoid on
/// the stored mesh.
double predictor_gamma(const EsParams& p, const EsTrace& tr, double t);

/// Fixed-step simulator. Each step evaluates the signals at t_n, then advances
/// U' = -cU + cK(G + Gamma), theta_hat' = U by RK4 with the bracket held.
class EsSimulator {
 public:
  explicit EsSimulator(EsParams p);

  bool done() const;
  void step();
  double time() const;
  const EsTrace& trace() const { return tr_; }

  /// Fills phi and sigma and returns the trace.
  EsTrace finish();

 private:
  double delayed_theta(double td, std::size_t i) const;

  EsParams p_;
  EsTrace tr_;
  std::size_t n_steps_;
  std::size_t i_ = 0;
  double u_;
  double theta_hat_;
  double washout_state_ = 0.0;
  std::vector<double> prefix_;  // cumulative trapezoid of U / denominator
  std::vector<double> quotient_;
};

/// Runs the simulator to t_end. On a feasibility violation under the abort
/// policy throws FeasibilityError carrying the partial trace.
EsTrace simulate(const EsParams& p);

/// phi(t) and sigma(t) for every stored sample.
void fill_delay_times(EsTrace& tr);

struct PdeDiag {
  std::vector<double> x_grid;
  std::vector<double> times;
  std::vector<std::vector<double>> alpha;  // alpha[k][j] at times[k], x_grid[j]
  double max_boundary_gap = 0.0;
};

/// alpha(x, t) = theta(phi(t + x (sigma(t) - t))) on n_x points, every
/// `time_stride`-th stored sample.
PdeDiag pde_diag(const EsTrace& tr, int n_x, int time_stride = 1);

struct EsMetrics {
  double theta_err = 0.0;
  double y_err = 0.0;
  double u_abs = 0.0;
  double min_feas_margin = 0.0;
};

EsMetrics metrics(const EsTrace& tr, double tail_start);

struct LyapunovSeries {
  std::vector<double> times;
  std::vector<double> V;
  bool nonincreasing_after_transient = false;
  double worst_excess = 0.0;  // max of V - (running min + band)
};

/// V = theta_av^2/2 + (aV/2) int e^{bV x} w^2 dx + w(1)^2/2 with aV = bV = 1 and
/// w = u - kH (theta_av + (sigma - t) int_0^x u). The trend check allows a
/// ripple of 5% of V at the transient end.
LyapunovSeries lyapunov_diag(const EsTrace& avg_trace, int n_x, double transient,
                             int time_stride = 1);

struct DemodMeans {
  double mean_Ny;
  double mean_My;
};

/// One-period means of N y and M y with theta frozen at theta* + theta_tilde
/// plus dither and D = 0.
DemodMeans demodulation_means(const EsParams& p, double theta_tilde, int samples = 4096);

}  // namespace mfde
