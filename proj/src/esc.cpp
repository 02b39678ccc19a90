#include "mfde/esc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace mfde {

DelayModel make_delay(const std::string& id) {
  if (id == "zero") {
    return {id, [](double) { return 0.0; }, [](double) { return 0.0; }};
  }
  if (id == "sin5sq") {
    return {id,
            [](double th) {
              const double s = std::sin(5.0 * th);
              return 0.5 * s * s;
            },
            [](double th) { return 5.0 * std::sin(5.0 * th) * std::cos(5.0 * th); }};
  }
  const std::string prefix = "const:";
  if (id.rfind(prefix, 0) == 0) {
    const std::string num = id.substr(prefix.size());
    std::size_t used = 0;
    double d = 0.0;
    try {
      d = std::stod(num, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != num.size() || !(d >= 0.0) || !std::isfinite(d)) {
      throw std::invalid_argument("bad constant delay '" + id + "'");
    }
    return {id, [d](double) { return d; }, [](double) { return 0.0; }};
  }
  throw std::invalid_argument("unknown delay '" + id + "' (zero, sin5sq, const:<d>)");
}

EsParams EsParams::table1() {
  EsParams p;
  p.washout = 1.0;
  return p;
}

void EsParams::validate() const {
  if (!(k_gain >= 0.0) || !(c > 0.0) || !(omega > 0.0)) {
    throw std::invalid_argument("k_gain must be >= 0, c and omega positive");
  }
  if (a == 0.0 || !std::isfinite(a)) throw std::invalid_argument("dither amplitude must be nonzero");
  if (!(hessian < 0.0)) throw std::invalid_argument("hessian must be negative");
  if (!(dt > 0.0) || !(t_end > 0.0)) throw std::invalid_argument("dt and t_end must be positive");
  if (omega * dt > 0.05 + 1e-15) {
    throw std::invalid_argument("omega * dt exceeds 0.05; the dither is not resolved");
  }
  if (!delay.fn) throw std::invalid_argument("delay function is missing");
  if (!(washout >= 0.0) || !(denom_floor > 0.0) || !(history_depth > 0.0)) {
    throw std::invalid_argument("washout, denom_floor and history_depth must be valid");
  }
}

double EsParams::delay_grad(double theta) const {
  if (delay.grad) return delay.grad(theta);
  const double h = 1e-6;
  return (delay.fn(theta + h) - delay.fn(theta - h)) / (2.0 * h);
}

double static_map(const EsParams& p, double theta) {
  const double e = theta - p.theta_star;
  return p.y_star + 0.5 * p.hessian * e * e;
}

namespace {

double checked_delay(const EsParams& p, double theta) {
  const double d = p.delay.fn(theta);
  if (!std::isfinite(d) || d < 0.0) {
    throw DomainError("delay must be finite and nonnegative, got " + std::to_string(d));
  }
  return d;
}

double initial_theta(const EsParams& p, double s) {
  if (s < -p.history_depth) {
    throw HistoryUnderflow("time " + std::to_string(s) + " is below the stored theta history");
  }
  return p.average_model ? p.theta_hat0 : p.theta_hat0 + p.a * std::sin(p.omega * s);
}

// Index j with times[j] <= s < times[j+1], for s inside the stored range.
std::size_t bracket(const std::vector<double>& times, double dt, double s) {
  const std::size_t n = times.size();
  auto j = static_cast<std::size_t>(std::max(0.0, std::floor(s / dt)));
  j = std::min(j, n - 2);
  while (j > 0 && times[j] > s) --j;
  while (j + 2 < n && times[j + 1] <= s) ++j;
  return j;
}

double interp(const std::vector<double>& times, const std::vector<double>& v, double dt,
              double s) {
  if (times.size() == 1 || s >= times.back()) return v.back();
  const std::size_t j = bracket(times, dt, s);
  const double w = (s - times[j]) / (times[j + 1] - times[j]);
  return (1.0 - w) * v[j] + w * v[j + 1];
}

double clamp_denominator(const EsParams& p, double den) {
  if (std::abs(den) < p.denom_floor) return den < 0.0 ? -p.denom_floor : p.denom_floor;
  return den;
}

double phi_of(const EsTrace& tr, double s) {
  return s - checked_delay(tr.params, theta_at(tr, s));
}

double sigma_of(const EsTrace& tr, double t, double d_max) {
  double lo = t;
  double hi = t + d_max + 1.0;
  const double flo = phi_of(tr, lo);
  if (flo == t) return lo;
  const double fhi = phi_of(tr, hi);
  if (!(flo <= t && fhi >= t)) {
    throw AssumptionViolation("prediction time bracket failed at t=" + std::to_string(t));
  }
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (phi_of(tr, mid) < t) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double theta_hat_at(const EsTrace& tr, double s) {
  if (s < 0.0) return tr.params.theta_hat0;
  return interp(tr.times, tr.theta_hat, tr.params.dt, s);
}

}  // namespace

double theta_at(const EsTrace& tr, double s) {
  if (s < 0.0 || tr.times.empty()) return initial_theta(tr.params, s);
  return interp(tr.times, tr.theta, tr.params.dt, s);
}

double u_at(const EsTrace& tr, double s) {
  if (s < 0.0 || tr.times.empty()) return 0.0;
  return interp(tr.times, tr.U, tr.params.dt, s);
}

double delayed_output(const EsParams& p, const EsTrace& tr, double t) {
  const double d = checked_delay(p, theta_at(tr, t));
  return static_map(p, theta_at(tr, t - d));
}

double delay_time(const EsParams& p, const EsTrace& tr, double t) {
  return t - checked_delay(p, theta_at(tr, t));
}

double prediction_time(const EsParams& p, const EsTrace& tr, double t) {
  double d_max = 0.0;
  for (double th : tr.theta) d_max = std::max(d_max, checked_delay(p, th));
  return sigma_of(tr, t, d_max);
}

DitherSignals dither_signals(const EsParams& p, double t, double theta_t) {
  const double td = t - checked_delay(p, theta_t);
  return {p.a * std::sin(p.omega * t), 2.0 / p.a * std::sin(p.omega * td),
          -8.0 / (p.a * p.a) * std::cos(2.0 * p.omega * td)};
}

Estimates estimates(const DitherSignals& s, double y) { return {s.M * y, s.N * y}; }

double predictor_gamma(const EsParams& p, const EsTrace& tr, double t) {
  if (tr.times.empty()) return 0.0;
  const double td = delay_time(p, tr, t);
  const double lo = std::max(td, 0.0);
  if (!(t > lo)) return 0.0;
  const double dt = p.dt;

  auto node_q = [&](std::size_t j) {
    const double den = tr.feas_margin[j];
    if (den <= p.denom_floor && p.feasibility == FeasibilityPolicy::abort) {
      throw FeasibilityError("feasibility denominator " + std::to_string(den) + " at t=" +
                                 std::to_string(tr.times[j]),
                             tr.times[j], EsTrace{});
    }
    return tr.U[j] / clamp_denominator(p, den);
  };
  auto q_at = [&](double s) {
    if (s >= tr.times.back()) return node_q(tr.times.size() - 1);
    const std::size_t j = bracket(tr.times, dt, s);
    const double w = (s - tr.times[j]) / (tr.times[j + 1] - tr.times[j]);
    return (1.0 - w) * node_q(j) + w * node_q(j + 1);
  };

  std::vector<double> xs{lo};
  for (std::size_t j = 0; j < tr.times.size(); ++j) {
    if (tr.times[j] > lo && tr.times[j] < t) xs.push_back(tr.times[j]);
  }
  xs.push_back(t);
  double acc = 0.0;
  double prev = q_at(xs.front());
  for (std::size_t k = 1; k < xs.size(); ++k) {
    const double cur = q_at(xs[k]);
    acc += 0.5 * (xs[k] - xs[k - 1]) * (prev + cur);
    prev = cur;
  }
  const double hh = interp(tr.times, tr.H_hat, dt, t);
  return hh * acc;
}

EsSimulator::EsSimulator(EsParams p) : p_(std::move(p)) {
  p_.validate();
  n_steps_ = static_cast<std::size_t>(std::llround(p_.t_end / p_.dt));
  tr_.params = p_;
  const std::size_t cap = n_steps_ + 1;
  for (auto* v : {&tr_.times, &tr_.theta, &tr_.theta_hat, &tr_.y, &tr_.G, &tr_.H_hat, &tr_.U,
                  &tr_.Gamma, &tr_.feas_margin, &prefix_, &quotient_}) {
    v->reserve(cap);
  }
  u_ = p_.u0;
  theta_hat_ = p_.theta_hat0;
}

bool EsSimulator::done() const { return i_ > n_steps_; }

double EsSimulator::time() const { return static_cast<double>(i_) * p_.dt; }

double EsSimulator::delayed_theta(double td, std::size_t i) const {
  if (td < 0.0) return initial_theta(p_, td);
  const double dt = p_.dt;
  auto j = static_cast<std::size_t>(std::floor(td / dt));
  if (j >= i) return tr_.theta[i];
  const double w = (td - tr_.times[j]) / dt;
  return (1.0 - w) * tr_.theta[j] + w * tr_.theta[j + 1];
}

void EsSimulator::step() {
  if (done()) throw std::logic_error("simulation already finished");
  const std::size_t i = i_;
  const double dt = p_.dt;
  const double t = time();

  const double theta = p_.average_model ? theta_hat_ : theta_hat_ + p_.a * std::sin(p_.omega * t);
  const double d = checked_delay(p_, theta);
  const double td = t - d;
  tr_.times.push_back(t);
  tr_.theta.push_back(theta);
  tr_.theta_hat.push_back(theta_hat_);

  if (i > 0 && !tr_.flags.delay_rate_warning) {
    const double rate = (d - checked_delay(p_, tr_.theta[i - 1])) / dt;
    if (rate >= 1.0) {
      tr_.flags.delay_rate_warning = true;
      tr_.flags.delay_rate_time = t;
    }
  }

  const double thd = delayed_theta(td, i);
  const double y = static_map(p_, thd);
  double yv = y;
  if (p_.washout > 0.0) {
    if (i == 0) washout_state_ = y;
    yv = y - washout_state_;
    washout_state_ = y + (washout_state_ - y) * std::exp(-p_.washout * dt);
  }

  double G = 0.0;
  double Hh = 0.0;
  if (p_.average_model) {
    G = p_.hessian * (thd - p_.theta_star);
    Hh = p_.hessian;
  } else {
    const Estimates e = estimates(dither_signals(p_, t, theta), yv);
    G = e.G;
    Hh = e.H_hat;
  }
  const double margin = 1.0 - Hh * p_.delay_grad(G) * u_;

  auto record = [&](double gamma) {
    tr_.y.push_back(y);
    tr_.G.push_back(G);
    tr_.H_hat.push_back(Hh);
    tr_.U.push_back(u_);
    tr_.Gamma.push_back(gamma);
    tr_.feas_margin.push_back(margin);
  };

  if (margin <= p_.denom_floor && tr_.flags.first_violation_time < 0.0) {
    tr_.flags.first_violation_time = t;
  }

  double gamma = 0.0;
  if (p_.predictor_on) {
    if (margin <= p_.denom_floor) {
      if (p_.feasibility == FeasibilityPolicy::abort) {
        record(std::numeric_limits<double>::quiet_NaN());
        ++i_;
        EsTrace partial = tr_;
        fill_delay_times(partial);
        throw FeasibilityError("feasibility condition violated at t=" + std::to_string(t) +
                                   ": 1 - H_hat*gradD(G)*U = " + std::to_string(margin),
                               t, std::move(partial));
      }
      ++tr_.flags.feasibility_clamps;
    }
    const double q = u_ / clamp_denominator(p_, margin);
    quotient_.push_back(q);
    prefix_.push_back(i == 0 ? 0.0 : prefix_.back() + 0.5 * dt * (quotient_[i - 1] + q));

    double p_td = 0.0;
    if (td > 0.0) {
      auto j = static_cast<std::size_t>(std::floor(td / dt));
      if (j >= i) {
        p_td = prefix_[i];
      } else {
        const double h = td - tr_.times[j];
        const double slope = (quotient_[j + 1] - quotient_[j]) / dt;
        p_td = prefix_[j] + h * (quotient_[j] + 0.5 * slope * h);
      }
    }
    gamma = Hh * (prefix_[i] - p_td);
  }
  record(gamma);

  const double c = p_.c;
  const double B = p_.k_gain * (G + gamma);
  const double u = u_;
  const double k1 = -c * u + c * B;
  const double k2 = -c * (u + 0.5 * dt * k1) + c * B;
  const double k3 = -c * (u + 0.5 * dt * k2) + c * B;
  const double k4 = -c * (u + dt * k3) + c * B;
  const double l1 = u;
  const double l2 = u + 0.5 * dt * k1;
  const double l3 = u + 0.5 * dt * k2;
  const double l4 = u + dt * k3;
  theta_hat_ += dt / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
  u_ += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!std::isfinite(u_) || !std::isfinite(theta_hat_)) {
    throw NumericalError("extremum seeking state diverged at t=" + std::to_string(t));
  }
  ++i_;
}

EsTrace EsSimulator::finish() {
  fill_delay_times(tr_);
  return tr_;
}

EsTrace simulate(const EsParams& p) {
  EsSimulator sim(p);
  while (!sim.done()) sim.step();
  return sim.finish();
}

void fill_delay_times(EsTrace& tr) {
  const std::size_t n = tr.times.size();
  tr.phi.assign(n, 0.0);
  tr.sigma.assign(n, 0.0);
  if (n == 0) return;
  double d_max = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = checked_delay(tr.params, tr.theta[i]);
    d_max = std::max(d_max, d);
    tr.phi[i] = tr.times[i] - d;
  }
  for (std::size_t i = 0; i < n; ++i) tr.sigma[i] = sigma_of(tr, tr.times[i], d_max);
}

PdeDiag pde_diag(const EsTrace& tr, int n_x, int time_stride) {
  if (n_x < 2 || time_stride < 1) throw std::invalid_argument("pde_diag needs n_x >= 2");
  if (tr.sigma.size() != tr.times.size()) throw std::invalid_argument("trace lacks sigma");
  PdeDiag out;
  for (int j = 0; j < n_x; ++j) out.x_grid.push_back(static_cast<double>(j) / (n_x - 1));
  for (std::size_t k = 0; k < tr.times.size(); k += static_cast<std::size_t>(time_stride)) {
    const double t = tr.times[k];
    const double span = tr.sigma[k] - t;
    std::vector<double> row;
    row.reserve(out.x_grid.size());
    for (double x : out.x_grid) row.push_back(theta_at(tr, phi_of(tr, t + x * span)));
    const double gap1 = std::abs(row.back() - tr.theta[k]);
    const double gap0 =
        std::abs(row.front() - theta_at(tr, t - checked_delay(tr.params, tr.theta[k])));
    out.max_boundary_gap = std::max({out.max_boundary_gap, gap0, gap1});
    out.times.push_back(t);
    out.alpha.push_back(std::move(row));
  }
  if (out.max_boundary_gap > 1e-6) {
    throw AssumptionViolation("transport boundary identities fail by " +
                              std::to_string(out.max_boundary_gap));
  }
  return out;
}

EsMetrics metrics(const EsTrace& tr, double tail_start) {
  EsMetrics m;
  bool any = false;
  m.min_feas_margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    m.min_feas_margin = std::min(m.min_feas_margin, tr.feas_margin[i]);
    if (tr.times[i] < tail_start) continue;
    any = true;
    m.theta_err = std::max(m.theta_err, std::abs(tr.theta[i] - tr.params.theta_star));
    m.y_err = std::max(m.y_err, std::abs(tr.y[i] - tr.params.y_star));
    m.u_abs = std::max(m.u_abs, std::abs(tr.U[i]));
  }
  if (!any) throw DomainError("metrics tail is empty");
  return m;
}

LyapunovSeries lyapunov_diag(const EsTrace& tr, int n_x, double transient, int time_stride) {
  if (n_x < 2 || time_stride < 1) throw std::invalid_argument("lyapunov_diag needs n_x >= 2");
  if (tr.sigma.size() != tr.times.size()) throw std::invalid_argument("trace lacks sigma");
  const EsParams& p = tr.params;
  const double kh = p.k_gain * p.hessian;
  const double hx = 1.0 / (n_x - 1);
  LyapunovSeries out;
  std::vector<double> u(static_cast<std::size_t>(n_x));
  for (std::size_t k = 0; k < tr.times.size(); k += static_cast<std::size_t>(time_stride)) {
    const double t = tr.times[k];
    const double span = tr.sigma[k] - t;
    const double th = theta_hat_at(tr, tr.phi[k]) - p.theta_star;
    for (int j = 0; j < n_x; ++j) u[j] = u_at(tr, phi_of(tr, t + j * hx * span));
    double integral_u = 0.0;
    double energy = 0.0;
    double prev_w2 = 0.0;
    double w = 0.0;
    for (int j = 0; j < n_x; ++j) {
      if (j > 0) integral_u += 0.5 * hx * (u[j - 1] + u[j]);
      w = u[j] - kh * (th + span * integral_u);
      const double w2 = std::exp(j * hx) * w * w;
      if (j > 0) energy += 0.5 * hx * (prev_w2 + w2);
      prev_w2 = w2;
    }
    out.times.push_back(t);
    out.V.push_back(0.5 * th * th + 0.5 * energy + 0.5 * w * w);
  }

  double running_min = std::numeric_limits<double>::infinity();
  double band = -1.0;
  out.worst_excess = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < out.V.size(); ++k) {
    if (out.times[k] < transient) continue;
    if (band < 0.0) band = 0.05 * out.V[k];
    running_min = std::min(running_min, out.V[k]);
    out.worst_excess = std::max(out.worst_excess, out.V[k] - (running_min + band));
  }
  out.nonincreasing_after_transient = band >= 0.0 && out.worst_excess <= 0.0;
  return out;
}

DemodMeans demodulation_means(const EsParams& p, double theta_tilde, int samples) {
  if (samples < 8) throw std::invalid_argument("need at least 8 samples per period");
  const double period = 2.0 * std::numbers::pi / p.omega;
  double ny = 0.0;
  double my = 0.0;
  for (int k = 0; k < samples; ++k) {
    const double t = period * k / samples;
    const double theta = p.theta_star + theta_tilde + p.a * std::sin(p.omega * t);
    const DitherSignals s{p.a * std::sin(p.omega * t), 2.0 / p.a * std::sin(p.omega * t),
                          -8.0 / (p.a * p.a) * std::cos(2.0 * p.omega * t)};
    const Estimates e = estimates(s, static_map(p, theta));
    ny += e.H_hat;
    my += e.G;
  }
  return {ny / samples, my / samples};
}

}  // namespace mfde
