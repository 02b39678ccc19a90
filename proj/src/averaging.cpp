#include "mfde/averaging.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <random>
#include <stdexcept>
#include <thread>

namespace mfde {

namespace {

void validate_eps(const AvgProblem& p, double eps) {
  if (!p.f || !p.phi0) throw std::invalid_argument("averaging problem needs f and phi0");
  if (!(eps > 0.0) || eps > p.eps0 * (1.0 + 1e-12)) {
    throw std::invalid_argument("eps must lie in (0, eps0]");
  }
}

MfdeProblem base_problem(const AvgProblem& p, double eps) {
  MfdeProblem m;
  m.phi0 = p.phi0;
  m.weight = p.weight;
  m.t0 = 0.0;
  m.sigma = p.L / eps;
  m.step = p.step;
  m.tol = p.tol;
  m.max_iters = p.max_iters;
  m.quad = p.quad;
  if (p.rho_delay) {
    auto rho = p.rho_delay;
    m.rho_delay = [rho, eps](double t, const History& psi) { return rho(t, psi, eps); };
  } else {
    m.rho_delay = [](double t, const History&) { return t; };
  }
  const AvgConstants c = p.consts;
  m.bounds.M = [c, eps](double) { return eps * c.M; };
  m.bounds.L = [c, eps](double) { return eps * c.C; };
  m.bounds.L2 = [c, eps](double) { return eps * c.C2; };
  m.bounds.L3 = [c](double) { return c.C4; };
  return m;
}

}  // namespace

Vec averaged_rhs(const AvgProblem& p, const History& psi) {
  Integrand ig([&p, &psi](double s) { return p.f(s, psi); });
  return integrate(ig, p.h, 0.0, p.T, p.mean_quad) / p.T;
}

Trajectory solve_original(const AvgProblem& p, double eps) {
  validate_eps(p, eps);
  MfdeProblem m = base_problem(p, eps);
  m.g = p.h;
  auto f = p.f;
  auto gp = p.g_pert;
  if (p.h2 && gp) {
    m.f = [f, eps](double s, const History& psi) -> Vec { return eps * f(s, psi); };
    m.f2 = [gp, eps](double s, const History& psi) -> Vec {
      return eps * eps * gp(s, psi, eps);
    };
    m.g2 = p.h2;
  } else if (gp) {
    m.f = [f, gp, eps](double s, const History& psi) -> Vec {
      return eps * f(s, psi) + eps * eps * gp(s, psi, eps);
    };
  } else {
    m.f = [f, eps](double s, const History& psi) -> Vec { return eps * f(s, psi); };
  }
  return solve_picard(m).x;
}

Trajectory solve_averaged(const AvgProblem& p, double eps) {
  validate_eps(p, eps);
  MfdeProblem m = base_problem(p, eps);
  m.g = Integrator::identity();
  m.f = [&p, eps](double, const History& psi) -> Vec { return eps * averaged_rhs(p, psi); };
  return solve_picard(m).x;
}

double theoretical_J(const AvgProblem& p) {
  const AvgConstants& c = p.consts;
  for (double v : {c.C, c.C2, c.C3, c.C4, c.M, c.Kp, p.T, p.alpha, p.L, p.eps0}) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw DomainError("averaging constants must be positive and finite");
    }
  }
  const double span = (p.L / p.T + p.eps0) * p.alpha;
  const double kbar = 2.0 * p.alpha * (c.M + c.C2 * c.C3 * p.L);
  const double kpp = (c.C + c.C2 * c.C4) * c.Kp;
  return std::exp(kpp * span) * (kbar + c.M * span);
}

double sup_error(const Trajectory& x, const Trajectory& y) {
  double worst = 0.0;
  const double t_end = std::min(x.t_end(), y.t_end());
  for (std::size_t i = 0; i < x.mesh().size(); ++i) {
    const double t = x.mesh()[i];
    if (t > t_end) break;
    const Vec yt = y.linear_at(t);
    worst = std::max(worst, (x.values()[i] - yt).norm());
    if (t < t_end) worst = std::max(worst, (x.posts()[i] - yt).norm());
  }
  for (std::size_t j = 0; j < y.mesh().size(); ++j) {
    const double t = y.mesh()[j];
    if (t > t_end) break;
    worst = std::max(worst, (x(t) - y.values()[j]).norm());
  }
  return worst;
}

bool AvgReport::all_within_bound() const {
  return std::all_of(cases.begin(), cases.end(),
                     [](const AvgCase& c) { return c.solved && c.pass; });
}

std::optional<double> loglog_slope(const std::vector<double>& eps,
                                   const std::vector<double>& err, double floor) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t i = 0; i < eps.size() && i < err.size(); ++i) {
    if (err[i] > floor && eps[i] > 0.0) {
      xs.push_back(std::log(eps[i]));
      ys.push_back(std::log(err[i]));
    }
  }
  if (xs.size() < 2) return std::nullopt;
  const double n = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double den = n * sxx - sx * sx;
  if (den == 0.0) return std::nullopt;
  return (n * sxy - sx * sy) / den;
}

int sweep_threads() {
  const char* env = std::getenv("MFDE_THREADS");
  if (!env) return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (end == env || v < 1) return 1;
  return static_cast<int>(std::min<long>(v, 64));
}

AvgReport compare(const AvgProblem& p, const std::vector<double>& eps_list, int threads) {
  AvgReport rep;
  rep.estimate_based = p.consts.estimated;
  rep.theoretical_J = theoretical_J(p);
  rep.cases.resize(eps_list.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < eps_list.size(); k = next++) {
      AvgCase& c = rep.cases[k];
      c.eps = eps_list[k];
      c.j_times_eps = rep.theoretical_J * c.eps;
      try {
        const Trajectory x = solve_original(p, c.eps);
        const Trajectory y = solve_averaged(p, c.eps);
        c.sup_error = sup_error(x, y);
        c.solved = true;
        c.pass = c.sup_error <= c.j_times_eps;
      } catch (const NumericalError& e) {
        c.failure = e.what();
      }
    }
  };
  const int n = std::max(1, std::min<int>(threads, static_cast<int>(eps_list.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::vector<double> es;
  std::vector<double> errs;
  for (const auto& c : rep.cases) {
    if (c.solved) {
      es.push_back(c.eps);
      errs.push_back(c.sup_error);
    }
  }
  if (auto s = loglog_slope(es, errs)) {
    rep.slope = *s;
    rep.slope_valid = true;
  }
  return rep;
}

bool PeriodicityReport::passed(double f_tol, double alpha_tol) const {
  return worst_f_gap <= f_tol && worst_alpha_gap <= alpha_tol && worst_delay_excess <= 0.0;
}

PeriodicityReport check_periodicity(const AvgProblem& p, int n_samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> time(0.0, 10.0 * p.T);
  std::uniform_real_distribution<double> epsd(0.0, p.eps0);
  const double R = std::max(1.0, -p.phi0->window_start());
  const bool zero_tail = p.weight.kind == WeightFn::Kind::exp_pos;
  PeriodicityReport rep;
  for (int k = 0; k < n_samples; ++k) {
    const double t = time(rng);
    const RegulatedFn psi = random_history(rng, R, 4, p.phi0->dim(), zero_tail);
    rep.worst_f_gap = std::max(rep.worst_f_gap, (p.f(t + p.T, psi) - p.f(t, psi)).norm());
    rep.worst_alpha_gap =
        std::max(rep.worst_alpha_gap, std::abs(p.h.increment(t, t + p.T) - p.alpha));
    if (p.rho_delay) {
      const double eps = std::max(1e-6, epsd(rng));
      rep.worst_delay_excess = std::max(rep.worst_delay_excess, p.rho_delay(t, psi, eps) - t);
    }
  }
  return rep;
}

namespace {

std::shared_ptr<const History> constant_history(const Vec& v) {
  return std::make_shared<RegulatedFn>(RegulatedFn::constant(v, 1.0));
}

Vec scalar(double v) {
  Vec out(1);
  out[0] = v;
  return out;
}

}  // namespace

AvgProblem linear_case(double a0, double b0, double phi0, double L, double eps0) {
  AvgProblem p;
  p.f = [a0, b0](double s, const History& psi) {
    return scalar((a0 + b0 * std::cos(s)) * psi.component(0.0, 0));
  };
  p.phi0 = constant_history(scalar(phi0));
  p.T = 2.0 * std::numbers::pi;
  p.alpha = p.T;
  p.L = L;
  p.eps0 = eps0;
  const double C = std::abs(a0) + std::abs(b0);
  const double M = C * std::abs(phi0) * std::exp(std::max(0.0, a0) * L + eps0 * std::abs(b0));
  p.consts = {C, C * eps0 * M, 1e-9, 1e-9, M, 1.0, false};
  return p;
}

AvgProblem sine_case(double phi0, double L, double eps0) {
  AvgProblem p;
  p.f = [](double s, const History& psi) { return scalar(std::sin(s) * psi.component(0.0, 0)); };
  p.phi0 = constant_history(scalar(phi0));
  p.T = 2.0 * std::numbers::pi;
  p.alpha = p.T;
  p.L = L;
  p.eps0 = eps0;
  const double M = std::abs(phi0) * std::exp(2.0 * eps0);
  p.consts = {1.0, eps0 * M, 1e-9, 1e-9, M, 1.0, false};
  return p;
}

AvgProblem constant_case(const Vec& v, double L, double eps0) {
  AvgProblem p;
  p.f = [v](double, const History&) { return v; };
  p.phi0 = constant_history(Vec::Zero(v.size()));
  p.T = 1.0;
  p.alpha = 1.0;
  p.L = L;
  p.eps0 = eps0;
  p.consts = {1e-9, 1e-9, 1e-9, 1e-9, std::max(1e-9, v.norm()), 1.0, false};
  return p;
}

}  // namespace mfde
