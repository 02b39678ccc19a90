#include "mfde/mfde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace mfde {

namespace {

double bound_at(const std::function<double(double)>& fn, double t) {
  return fn ? fn(t) : 0.0;
}

// Evaluates s -> f(s, x_{rho(s, x_s)}) against a fixed iterate x.
class RhsEvaluator {
 public:
  RhsEvaluator(const Trajectory& x, const MfdeProblem& p) : x_(x), p_(p) {}

  double delayed_time(double s, bool right) const {
    const SegmentView xs(x_, s, right);
    double r = p_.rho_delay(s, xs);
    if (!std::isfinite(r)) {
      throw IntegrandError("delay map is not finite at s=" + std::to_string(s));
    }
    if (r > s) {
      if (r - s > 1e-12 * std::max(1.0, std::abs(s))) {
        throw HypothesisViolation("delay map returned " + std::to_string(r) +
                                  " > s=" + std::to_string(s));
      }
      r = s;
    }
    if (r - p_.t0 < p_.phi0->window_start()) {
      throw RangeError("delayed time " + std::to_string(r) +
                       " lies below the initial history window");
    }
    return r;
  }

  Vec operator()(double s, bool right, bool second = false) const {
    const double r = delayed_time(s, right);
    const SegmentView delayed(x_, r, right && r == s);
    Vec v = second ? p_.f2(s, delayed) : p_.f(s, delayed);
    if (!v.allFinite()) {
      throw IntegrandError("right-hand side is not finite at s=" + std::to_string(s));
    }
    return v;
  }

 private:
  const Trajectory& x_;
  const MfdeProblem& p_;
};

struct Increment {
  Vec jump;        // f(t_i) * (g(t_i+) - g(t_i))
  Vec continuous;  // density part over (t_i, t_{i+1})
};

Increment interval_increment(const RhsEvaluator& rhs, const Trajectory& x,
                             const MfdeProblem& p, std::size_t i) {
  const auto& mesh = x.mesh();
  const double a = mesh[i];
  const double b = mesh[i + 1];
  Increment inc;
  const double dg = p.g.jump_at(a);
  if (dg > 0.0) {
    inc.jump = rhs(a, false) * dg;
  } else {
    inc.jump = Vec::Zero(x.dim());
  }
  const bool x_jumps = x.posts()[i] != x.values()[i];
  auto continuous_part = [&](const Integrator& g, bool second) -> Vec {
    if (!g.has_density()) return Vec::Zero(x.dim());
    Integrand ig([&rhs, second](double s) { return rhs(s, false, second); });
    if (x_jumps) ig.right_limit = [&rhs, second](double s) { return rhs(s, true, second); };
    return integrate_density(ig, g, a, b, p.quad);
  };
  inc.continuous = continuous_part(p.g, false);
  if (p.g2 && p.f2) {
    const double dg2 = p.g2->jump_at(a);
    if (dg2 > 0.0) inc.jump += rhs(a, false, true) * dg2;
    inc.continuous += continuous_part(*p.g2, true);
  }
  return inc;
}

void validate(const MfdeProblem& p) {
  if (!p.f || !p.rho_delay || !p.phi0) {
    throw std::invalid_argument("problem needs f, rho_delay and phi0");
  }
  if (!(p.sigma > 0.0) || !(p.step > 0.0) || !(p.tol > 0.0) || p.max_iters < 1) {
    throw std::invalid_argument("sigma, step, tol and max_iters must be positive");
  }
  p.quad.validate();
}

}  // namespace

Mesh build_mesh(const MfdeProblem& p) {
  const double t0 = p.t0;
  const double t1 = p.t0 + p.sigma;
  std::vector<double> special;
  auto add_special = [&](double t) {
    if (t > t0 && t < t1) special.push_back(t);
  };
  for (const auto& j : p.g.jumps()) add_special(j.time);
  if (p.g2) {
    for (const auto& j : p.g2->jumps()) add_special(j.time);
  }
  for (double t : p.extra_times) add_special(t);
  if (p.phi0) {
    for (double b : p.phi0->breaks()) {
      if (b < 0.0) add_special(t0 - b);
    }
  }
  std::sort(special.begin(), special.end());
  special.erase(std::unique(special.begin(), special.end()), special.end());

  const int n = std::max(1, static_cast<int>(std::ceil(p.sigma / p.step - 1e-9)));
  const double guard = 1e-9 * p.step;
  std::vector<std::pair<double, char>> nodes{{t0, 1}, {t1, 1}};
  for (double s : special) nodes.emplace_back(s, 1);
  for (int k = 1; k < n; ++k) {
    const double t = t0 + p.sigma * static_cast<double>(k) / n;
    auto it = std::lower_bound(special.begin(), special.end(), t);
    bool near = false;
    if (it != special.end() && *it - t < guard) near = true;
    if (it != special.begin() && t - *(it - 1) < guard) near = true;
    if (!near) nodes.emplace_back(t, 0);
  }
  std::sort(nodes.begin(), nodes.end());
  Mesh m;
  for (const auto& [t, s] : nodes) {
    m.times.push_back(t);
    m.split.push_back(s);
  }
  return m;
}

Trajectory gamma_apply(const Trajectory& x, const MfdeProblem& p) {
  validate(p);
  const RhsEvaluator rhs(x, p);
  const std::size_t n = x.mesh().size();
  std::vector<Vec> values(n);
  std::vector<Vec> posts(n);
  Vec cum = x.values().front();
  values[0] = cum;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const Increment inc = interval_increment(rhs, x, p, i);
    posts[i] = cum + inc.jump;
    cum = posts[i] + inc.continuous;
    values[i + 1] = cum;
  }
  posts[n - 1] = values[n - 1];
  return Trajectory(x.initial_ptr(), x.mesh(), std::move(values), std::move(posts), x.split());
}

SolveResult solve_picard(const MfdeProblem& p) {
  validate(p);
  const Mesh mesh = build_mesh(p);
  const std::size_t n = mesh.times.size();
  const Vec start = (*p.phi0)(0.0);

  std::vector<Vec> values(n, start);
  std::vector<Vec> posts(n, start);
  std::vector<Vec> jumps(n, Vec::Zero(start.size()));
  if (p.initial_guess) {
    for (std::size_t j = 1; j < n; ++j) {
      values[j] = p.initial_guess(mesh.times[j]);
      posts[j] = values[j];
      if (values[j].size() != start.size()) {
        throw std::invalid_argument("initial guess has the wrong dimension");
      }
    }
  }

  const auto k3 = candidate_constants(p.weight).k3;
  auto lip = [&](double t) {
    return bound_at(p.bounds.L, t) + bound_at(p.bounds.L2, t) * bound_at(p.bounds.L3, t);
  };

  SolveResult result{Trajectory(p.phi0, mesh.times, values, posts, mesh.split), 0, 0.0, 0, {}, {}};
  std::size_t w0 = 0;
  while (w0 + 1 < n) {
    // Greedy window: extend while K * (g(end) - g(start)) < 1/2.
    double sup_lip = std::max(lip(mesh.times[w0]), lip(mesh.times[w0 + 1]));
    std::size_t we = w0 + 1;
    while (we + 1 < n) {
      const double cand = std::max(sup_lip, lip(mesh.times[we + 1]));
      const double K = cand * k3(mesh.times[we + 1] - mesh.times[w0]);
      double dg = p.g.increment(mesh.times[w0], mesh.times[we + 1]);
      if (p.g2) dg += p.g2->increment(mesh.times[w0], mesh.times[we + 1]);
      if (!(K * dg < 0.5)) break;
      sup_lip = cand;
      ++we;
    }
    ++result.windows;

    if (!p.initial_guess) {
      for (std::size_t j = w0 + 1; j <= we; ++j) {
        values[j] = values[w0];
        posts[j] = values[w0];
      }
    }
    posts[w0] = values[w0];

    bool converged = false;
    double delta = 0.0;
    for (int it = 0; it < p.max_iters; ++it) {
      const auto upto = static_cast<std::ptrdiff_t>(we + 1);
      const Trajectory x(p.phi0, {mesh.times.begin(), mesh.times.begin() + upto},
                         {values.begin(), values.begin() + upto},
                         {posts.begin(), posts.begin() + upto},
                         {mesh.split.begin(), mesh.split.begin() + upto});
      const RhsEvaluator rhs(x, p);
      std::vector<Vec> new_posts(we - w0);
      std::vector<Vec> new_values(we - w0);
      Vec cum = values[w0];
      for (std::size_t i = w0; i < we; ++i) {
        const Increment inc = interval_increment(rhs, x, p, i);
        new_posts[i - w0] = cum + inc.jump;
        cum = new_posts[i - w0] + inc.continuous;
        new_values[i - w0] = cum;
        jumps[i] = inc.jump;
      }
      delta = 0.0;
      for (std::size_t i = w0; i < we; ++i) {
        delta = std::max(delta, (new_posts[i - w0] - posts[i]).lpNorm<Eigen::Infinity>());
        delta = std::max(delta,
                         (new_values[i - w0] - values[i + 1]).lpNorm<Eigen::Infinity>());
      }
      for (std::size_t i = w0; i < we; ++i) {
        posts[i] = new_posts[i - w0];
        values[i + 1] = new_values[i - w0];
        posts[i + 1] = values[i + 1];
      }
      ++result.iterations;
      if (!std::isfinite(delta)) break;
      if (delta < p.tol) {
        converged = true;
        break;
      }
    }
    result.final_delta = delta;
    if (!converged) {
      throw ConvergenceError("Picard iteration did not converge on [" +
                                 std::to_string(mesh.times[w0]) + ", " +
                                 std::to_string(mesh.times[we]) + "]",
                             delta);
    }
    w0 = we;
  }
  posts[n - 1] = values[n - 1];
  result.x = Trajectory(p.phi0, mesh.times, std::move(values), std::move(posts), mesh.split);
  result.jumps = std::move(jumps);

  const RhsEvaluator rhs(result.x, p);
  result.delayed_times.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = rhs.delayed_time(mesh.times[i], false);
    if (i > 0 && r < result.delayed_times.back() -
                         1e-12 * std::max(1.0, std::abs(result.delayed_times.back()))) {
      throw HypothesisViolation("delayed time decreases at t=" + std::to_string(mesh.times[i]));
    }
    result.delayed_times.push_back(r);
  }
  return result;
}

double residual(const Trajectory& x, const MfdeProblem& p) {
  const Trajectory gx = gamma_apply(x, p);
  double worst = 0.0;
  for (std::size_t i = 0; i < x.mesh().size(); ++i) {
    worst = std::max(worst, (x.values()[i] - gx.values()[i]).norm());
    worst = std::max(worst, (x.posts()[i] - gx.posts()[i]).norm());
  }
  return worst;
}

bool HypothesisReport::passed(double slack) const {
  return b2_ratio <= 1.0 + slack && b3_ratio <= 1.0 + slack && b4_ratio <= 1.0 + slack &&
         b6_ratio <= 1.0 + slack;
}

namespace {

double ratio(double num, double den) {
  if (num == 0.0) return 0.0;
  if (den <= 0.0) return std::numeric_limits<double>::infinity();
  return num / den;
}

// Random path from phi0(0) whose increments are bounded by M dg.
Trajectory lipschitz_path(std::mt19937_64& rng, const MfdeProblem& p, int nodes) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<double> mesh;
  for (int k = 0; k < nodes; ++k) mesh.push_back(p.t0 + p.sigma * k / (nodes - 1));
  for (const auto& j : p.g.jumps()) {
    if (j.time > p.t0 && j.time < p.t0 + p.sigma) mesh.push_back(j.time);
  }
  std::sort(mesh.begin(), mesh.end());
  mesh.erase(std::unique(mesh.begin(), mesh.end()), mesh.end());
  const int d = p.phi0->dim();
  auto rvec = [&](double scale) {
    Vec v(d);
    for (int i = 0; i < d; ++i) v[i] = unit(rng) * scale / std::sqrt(static_cast<double>(d));
    return v;
  };
  std::vector<Vec> values;
  std::vector<Vec> posts;
  Vec cur = (*p.phi0)(0.0);
  for (std::size_t i = 0; i < mesh.size(); ++i) {
    values.push_back(cur);
    const double m = bound_at(p.bounds.M, mesh[i]);
    if (i + 1 < mesh.size()) {
      cur += rvec(m * p.g.jump_at(mesh[i]));
      posts.push_back(cur);
      cur += rvec(m * p.g.density_integral(mesh[i], mesh[i + 1]));
    } else {
      posts.push_back(cur);
    }
  }
  std::vector<char> split(mesh.size(), 1);
  return Trajectory(p.phi0, std::move(mesh), std::move(values), std::move(posts),
                    std::move(split));
}

}  // namespace

HypothesisReport check_hypotheses(const MfdeProblem& p, int n_samples, std::uint64_t seed) {
  validate(p);
  if (n_samples < 1) throw std::invalid_argument("n_samples must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> time(p.t0, p.t0 + p.sigma);
  const double R = std::max(1.0, -p.phi0->window_start());
  const int d = p.phi0->dim();
  const bool zero_tail = p.weight.kind == WeightFn::Kind::exp_pos;

  HypothesisReport rep;
  for (int k = 0; k < n_samples; ++k) {
    const double s = time(rng);
    const RegulatedFn psi = random_history(rng, R, 6, d, zero_tail);
    RegulatedFn chi = (k % 2 == 0)
                          ? random_history(rng, R, 6, d, zero_tail)
                          : linear_combination(1.0, psi, 0.05,
                                               random_history(rng, 1.0, 3, d, true));
    const double dist = phase_norm(linear_combination(1.0, psi, -1.0, chi), p.weight);

    const Vec fpsi = p.f(s, psi);
    const Vec fchi = p.f(s, chi);
    rep.b2_ratio = std::max(rep.b2_ratio, ratio(fpsi.norm(), bound_at(p.bounds.M, s)));
    rep.b3_ratio = std::max(rep.b3_ratio,
                            ratio((fpsi - fchi).norm(), bound_at(p.bounds.L, s) * dist));
    rep.b6_ratio = std::max(
        rep.b6_ratio, ratio(std::abs(p.rho_delay(s, psi) - p.rho_delay(s, chi)),
                            bound_at(p.bounds.L3, s) * dist));

    const Trajectory path = lipschitz_path(rng, p, 41);
    const double u = time(rng);
    const double v = time(rng);
    const Vec fu = p.f(s, SegmentView(path, u));
    const Vec fv = p.f(s, SegmentView(path, v));
    rep.b4_ratio = std::max(rep.b4_ratio,
                            ratio((fu - fv).norm(), bound_at(p.bounds.L2, s) * std::abs(u - v)));
    ++rep.samples;
  }
  return rep;
}

double tanh_kernel(double theta) { return std::exp(-theta * theta + theta); }

double tanh_cbar() {
  return std::numbers::e * std::sqrt(std::numbers::pi) / 2.0 * std::erfc(1.0);
}

namespace {

constexpr double kKernelCut = -6.0;
constexpr double kKernelPanel = 0.01;

struct SimpsonRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

SimpsonRule simpson_rule(double a, double b, int panels) {
  if (panels % 2 != 0) ++panels;
  SimpsonRule r;
  const double h = (b - a) / panels;
  for (int k = 0; k <= panels; ++k) {
    r.nodes.push_back(k == panels ? b : a + h * k);
    const double w = (k == 0 || k == panels) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
    r.weights.push_back(w * h / 3.0);
  }
  return r;
}

}  // namespace

MfdeProblem example_tanh(double sigma, double step, double tol) {
  auto fixed = std::make_shared<SimpsonRule>(
      simpson_rule(kKernelCut, 0.0, static_cast<int>(std::lround(-kKernelCut / kKernelPanel))));
  for (std::size_t k = 0; k < fixed->nodes.size(); ++k) {
    fixed->weights[k] *= tanh_kernel(fixed->nodes[k]);
  }

  MfdeProblem p;
  p.f = [fixed](double t, const History& psi) {
    double acc = 0.0;
    for (std::size_t k = 0; k < fixed->nodes.size(); ++k) {
      acc += fixed->weights[k] * std::tanh(psi.component(fixed->nodes[k], 0));
    }
    const double c = std::cos(t);
    Vec out(1);
    out[0] = c * c * acc;
    return out;
  };
  p.rho_delay = [](double t, const History& psi) {
    const double upper = -t;
    if (upper <= kKernelCut) return t;
    const int panels = 2 * static_cast<int>(std::ceil((upper - kKernelCut) / (2 * kKernelPanel)));
    const SimpsonRule r = simpson_rule(kKernelCut, upper, std::max(2, panels));
    double acc = 0.0;
    for (std::size_t k = 0; k < r.nodes.size(); ++k) {
      const double th = r.nodes[k];
      acc += r.weights[k] * tanh_kernel(th) * std::tanh(std::abs(psi.component(th - t, 0)));
    }
    return t - acc;
  };
  p.g = Integrator::identity();
  p.phi0 = std::make_shared<RegulatedFn>(RegulatedFn::sampled_scalar(
      [](double th) { return std::cos(th); }, 8.0, 1601, 0.0));
  p.weight = WeightFn::exp_pos();
  p.t0 = 0.0;
  p.sigma = sigma;
  p.step = step;
  p.tol = tol;
  p.max_iters = 200;
  p.quad.base_mesh = step;
  p.quad.refinement_levels = 4;
  p.quad.abs_tol = 1e-12;
  const double cbar = tanh_cbar();
  p.bounds.M = [](double) { return 1.0; };
  p.bounds.L = [cbar](double) { return cbar; };
  p.bounds.L2 = [](double) { return 3.0; };
  p.bounds.L3 = [](double) { return 1.0; };
  return p;
}

MfdeProblem example_linear(double a, double b, double delay, double phi0,
                           std::vector<Jump> jumps, double sigma, double step, double tol) {
  if (!(delay >= 0.0)) throw std::invalid_argument("delay must be nonnegative");
  MfdeProblem p;
  p.f = [a, b](double, const History& psi) {
    Vec out(1);
    out[0] = a * psi.component(0.0, 0) + b;
    return out;
  };
  p.rho_delay = [delay](double t, const History&) { return t - delay; };
  p.g = Integrator::with_jumps(std::move(jumps));
  Vec c(1);
  c[0] = phi0;
  p.phi0 = std::make_shared<RegulatedFn>(RegulatedFn::constant(c, std::max(1.0, delay), c));
  p.weight = WeightFn::constant_one();
  p.sigma = sigma;
  p.step = step;
  p.tol = tol;
  p.quad.base_mesh = step;
  p.quad.abs_tol = 1e-13;
  // |x| grows at most like (|phi0| + |b| / |a|) exp(|a| g-variation); M is a loose cap.
  const double var = p.g.increment(0.0, sigma);
  const double growth = (std::abs(phi0) + (a != 0.0 ? std::abs(b / a) : std::abs(b) * var)) *
                        std::exp(std::abs(a) * var);
  p.bounds.M = [a, b, growth](double) { return std::abs(a) * growth + std::abs(b); };
  p.bounds.L = [a](double) { return std::abs(a); };
  p.bounds.L2 = [](double) { return 0.0; };
  p.bounds.L3 = [](double) { return 0.0; };
  return p;
}

}  // namespace mfde
