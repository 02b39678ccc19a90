#include "mfde/stieltjes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mfde {

namespace {

double checked_density(const Integrator::Density& d, double t) {
  const double v = d(t);
  if (!std::isfinite(v)) {
    throw IntegratorDomainError("integrator density is not finite at t=" +
                                std::to_string(t));
  }
  if (v < 0.0) {
    throw IntegratorDomainError("integrator density is negative at t=" +
                                std::to_string(t));
  }
  return v;
}

double adaptive_simpson(const Integrator::Density& d, double a, double b,
                        double fa, double fm, double fb, double whole,
                        double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = checked_density(d, lm);
  const double frm = checked_density(d, rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return adaptive_simpson(d, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(d, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

// Integral of a nonnegative density over [u,v], u <= v.
double density_quad(const Integrator::Density& d, double u, double v) {
  if (v <= u) return 0.0;
  // Split long ranges so the adaptive rule cannot be fooled by a coarse start.
  const int pieces = std::max(1, static_cast<int>(std::ceil((v - u) / 0.5)));
  const double h = (v - u) / pieces;
  double total = 0.0;
  for (int k = 0; k < pieces; ++k) {
    const double a = u + k * h;
    const double b = (k + 1 == pieces) ? v : a + h;
    const double fa = checked_density(d, a);
    const double fb = checked_density(d, b);
    const double fm = checked_density(d, 0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    total += adaptive_simpson(d, a, b, fa, fm, fb, whole, 1e-15, 40);
  }
  if (!std::isfinite(total)) {
    throw IntegratorDomainError("density integral is not finite");
  }
  return total;
}

Vec checked_sample(const std::function<Vec(double)>& f, double t) {
  Vec v = f(t);
  if (!v.allFinite()) {
    throw IntegrandError("integrand is not finite at t=" + std::to_string(t));
  }
  return v;
}

double checked_density_of(const Integrator& g, double t) {
  const double d = g.density(t);
  if (!std::isfinite(d) || d < 0.0) {
    throw IntegratorDomainError("integrator density invalid at t=" +
                                std::to_string(t));
  }
  return d;
}

// Split points of [a,b]: a, b, jump times and declared breakpoints inside.
std::vector<double> split_points(const Integrand& f, const Integrator& g,
                                 double a, double b) {
  std::vector<double> pts{a, b};
  for (const auto& j : g.jumps()) {
    if (j.time > a && j.time < b) pts.push_back(j.time);
  }
  for (double bp : f.breakpoints) {
    if (bp > a && bp < b) pts.push_back(bp);
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

Vec simpson_from_nodes(const std::vector<Vec>& nodes, double width) {
  // nodes holds 2n+1 equispaced samples of f*density.
  const std::size_t m = nodes.size() - 1;
  Vec acc = nodes.front() + nodes.back();
  for (std::size_t i = 1; i < m; ++i) {
    acc += (i % 2 == 1 ? 4.0 : 2.0) * nodes[i];
  }
  return acc * (width / (3.0 * static_cast<double>(m)));
}

// Composite Simpson with panel doubling on one jump-free piece [u,v].
Vec simpson_piece(const Integrand& f, const Integrator& g, double u, double v,
                  const QuadConfig& cfg, double piece_tol) {
  const double w = v - u;
  const auto& left_end = f.right_limit ? f.right_limit : f.value;
  const auto& right_end = f.left_limit ? f.left_limit : f.value;

  auto sample = [&](std::size_t i, std::size_t m) -> Vec {
    if (i == 0) return checked_sample(left_end, u) * checked_density_of(g, u);
    if (i == m) return checked_sample(right_end, v) * checked_density_of(g, v);
    const double t = u + w * static_cast<double>(i) / static_cast<double>(m);
    return checked_sample(f.value, t) * checked_density_of(g, t);
  };

  std::size_t panels = static_cast<std::size_t>(
      std::max(1.0, std::ceil(w / cfg.base_mesh - 1e-9)));
  std::size_t m = 2 * panels;
  std::vector<Vec> nodes;
  nodes.reserve(m + 1);
  for (std::size_t i = 0; i <= m; ++i) nodes.push_back(sample(i, m));
  Vec s = simpson_from_nodes(nodes, w);

  for (int level = 0; level < cfg.refinement_levels; ++level) {
    const std::size_t m2 = 2 * m;
    std::vector<Vec> refined;
    refined.reserve(m2 + 1);
    for (std::size_t i = 0; i <= m2; ++i) {
      refined.push_back(i % 2 == 0 ? nodes[i / 2] : sample(i, m2));
    }
    Vec s2 = simpson_from_nodes(refined, w);
    const double change = (s2 - s).lpNorm<Eigen::Infinity>();
    nodes = std::move(refined);
    m = m2;
    s = std::move(s2);
    if (change <= piece_tol) break;
  }
  return s;
}

}  // namespace

Integrator::Integrator(double anchor_time, double anchor_value, Density density,
                       std::vector<Jump> jumps, Density primitive)
    : anchor_time_(anchor_time),
      anchor_value_(anchor_value),
      density_(std::move(density)),
      primitive_(std::move(primitive)),
      jumps_(std::move(jumps)) {
  if (!std::isfinite(anchor_time_) || !std::isfinite(anchor_value_)) {
    throw std::invalid_argument("integrator anchor must be finite");
  }
  for (std::size_t i = 0; i < jumps_.size(); ++i) {
    if (!(jumps_[i].magnitude > 0.0) || !std::isfinite(jumps_[i].magnitude)) {
      throw std::invalid_argument("jump magnitudes must be positive and finite");
    }
    if (!std::isfinite(jumps_[i].time)) {
      throw std::invalid_argument("jump times must be finite");
    }
    if (i > 0 && !(jumps_[i].time > jumps_[i - 1].time)) {
      throw std::invalid_argument("jump times must be strictly increasing");
    }
  }
}

Integrator Integrator::identity() {
  return Integrator(0.0, 0.0, [](double) { return 1.0; }, {},
                    [](double t) { return t; });
}

Integrator Integrator::with_jumps(std::vector<Jump> jumps) {
  return Integrator(0.0, 0.0, [](double) { return 1.0; }, std::move(jumps),
                    [](double t) { return t; });
}

Integrator Integrator::pure_jumps(std::vector<Jump> jumps) {
  return Integrator(0.0, 0.0, {}, std::move(jumps));
}

double Integrator::density(double t) const {
  return density_ ? density_(t) : 0.0;
}

double Integrator::density_integral(double u, double v) const {
  if (!density_) return 0.0;
  if (v < u) return -density_integral(v, u);
  if (primitive_) {
    const double r = primitive_(v) - primitive_(u);
    if (!std::isfinite(r)) {
      throw IntegratorDomainError("density primitive is not finite");
    }
    return r;
  }
  return density_quad(density_, u, v);
}

double Integrator::increment(double u, double v) const {
  if (v < u) return -increment(v, u);
  double total = density_integral(u, v);
  for (const auto& j : jumps_) {
    if (j.time >= u && j.time < v) total += j.magnitude;
  }
  return total;
}

double Integrator::operator()(double t) const {
  if (t >= anchor_time_) return anchor_value_ + increment(anchor_time_, t);
  return anchor_value_ - increment(t, anchor_time_);
}

double Integrator::jump_at(double t) const {
  auto it = std::lower_bound(
      jumps_.begin(), jumps_.end(), t,
      [](const Jump& j, double x) { return j.time < x; });
  return (it != jumps_.end() && it->time == t) ? it->magnitude : 0.0;
}

std::vector<Jump> Integrator::jumps_in(double a, double b) const {
  std::vector<Jump> out;
  for (const auto& j : jumps_) {
    if (j.time >= a && j.time < b) out.push_back(j);
  }
  return out;
}

double eval_g(const Integrator& g, double t) { return g(t); }

void QuadConfig::validate() const {
  if (!(base_mesh > 0.0) || !(abs_tol > 0.0) || refinement_levels < 0) {
    throw std::invalid_argument("QuadConfig fields must be positive");
  }
}

Integrand scalar_integrand(std::function<double(double)> f) {
  return Integrand([f = std::move(f)](double t) {
    Vec v(1);
    v[0] = f(t);
    return v;
  });
}

Vec integrate_density(const Integrand& f, const Integrator& g, double a,
                      double b, const QuadConfig& cfg) {
  if (a > b) return -integrate_density(f, g, b, a, cfg);
  if (!g.has_density() || a == b) {
    return Vec::Zero(checked_sample(f.value, a).size());
  }
  cfg.validate();
  const auto pts = split_points(f, g, a, b);
  Vec total;
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    const double u = pts[k];
    const double v = pts[k + 1];
    const double piece_tol = cfg.abs_tol * (v - u) / (b - a);
    Vec s = simpson_piece(f, g, u, v, cfg, piece_tol);
    if (k == 0) {
      total = std::move(s);
    } else {
      total += s;
    }
  }
  return total;
}

Vec integrate_jumps(const Integrand& f, const Integrator& g, double a,
                    double b) {
  if (a > b) return -integrate_jumps(f, g, b, a);
  Vec total;
  bool any = false;
  for (const auto& j : g.jumps()) {
    if (j.time < a || j.time >= b) continue;
    Vec term = checked_sample(f.value, j.time) * j.magnitude;
    if (!any) {
      total = std::move(term);
      any = true;
    } else {
      total += term;
    }
  }
  if (!any) return Vec::Zero(checked_sample(f.value, a).size());
  return total;
}

Vec integrate(const Integrand& f, const Integrator& g, double a, double b,
              const QuadConfig& cfg) {
  if (a > b) return -integrate(f, g, b, a, cfg);
  return integrate_density(f, g, a, b, cfg) + integrate_jumps(f, g, a, b);
}

double integrate_scalar(const std::function<double(double)>& f,
                        const Integrator& g, double a, double b,
                        const QuadConfig& cfg) {
  return integrate(scalar_integrand(f), g, a, b, cfg)[0];
}

std::vector<Vec> refine_oracle(const Integrand& f, const Integrator& g,
                               double a, double b, int levels) {
  if (levels <= 0) throw std::invalid_argument("levels must be positive");
  if (a > b) {
    auto out = refine_oracle(f, g, b, a, levels);
    for (auto& v : out) v = -v;
    return out;
  }
  std::vector<double> jump_times;
  for (const auto& j : g.jumps()) {
    if (j.time > a && j.time < b) jump_times.push_back(j.time);
  }

  std::vector<Vec> ladder;
  ladder.reserve(static_cast<std::size_t>(levels));
  for (int level = 1; level <= levels; ++level) {
    const std::size_t cells = std::size_t{1} << level;
    std::vector<double> pts;
    pts.reserve(cells + 1 + jump_times.size());
    for (std::size_t i = 0; i <= cells; ++i) {
      pts.push_back(i == cells ? b
                               : a + (b - a) * static_cast<double>(i) /
                                         static_cast<double>(cells));
    }
    pts.insert(pts.end(), jump_times.begin(), jump_times.end());
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

    Vec sum = Vec::Zero(checked_sample(f.value, a).size());
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      const double dg = g.increment(pts[i], pts[i + 1]);
      if (dg != 0.0) sum += checked_sample(f.value, pts[i]) * dg;
    }
    ladder.push_back(std::move(sum));
  }
  return ladder;
}

double gronwall_bound(double k, double l, const Integrator& g, double a,
                      double xi) {
  return k * std::exp(l * (g(xi) - g(a)));
}

std::string GronwallReport::status_name() const {
  switch (status) {
    case Status::passed:
      return "passed";
    case Status::failed:
      return "failed";
    case Status::hypothesis_not_satisfied:
      return "hypothesis-not-satisfied";
  }
  return "unknown";
}

GronwallReport check_gronwall(std::span<const double> times,
                              std::span<const double> psi, double k, double l,
                              const Integrator& g, const QuadConfig& cfg,
                              double tol) {
  if (times.size() != psi.size() || times.size() < 2) {
    throw std::invalid_argument("psi needs at least two samples per time");
  }
  if (k < 0.0 || !(l > 0.0)) {
    throw std::invalid_argument("gronwall requires k >= 0 and l > 0");
  }
  for (std::size_t i = 0; i < psi.size(); ++i) {
    if (psi[i] < 0.0) throw std::invalid_argument("psi must be nonnegative");
    if (i > 0 && !(times[i] > times[i - 1])) {
      throw std::invalid_argument("psi sample times must increase");
    }
  }

  const std::vector<double> ts(times.begin(), times.end());
  const std::vector<double> ps(psi.begin(), psi.end());
  auto interp = [&ts, &ps](double t) {
    auto it = std::upper_bound(ts.begin(), ts.end(), t);
    if (it == ts.begin()) return ps.front();
    if (it == ts.end()) return ps.back();
    const std::size_t j = static_cast<std::size_t>(it - ts.begin());
    if (ts[j - 1] == t) return ps[j - 1];
    const double w = (t - ts[j - 1]) / (ts[j] - ts[j - 1]);
    return (1.0 - w) * ps[j - 1] + w * ps[j];
  };

  const double a = ts.front();
  GronwallReport report{GronwallReport::Status::passed, {}, 0.0};
  report.points.reserve(ts.size());
  double cumulative = 0.0;
  bool hypothesis_ok = true;
  bool bound_ok = true;
  for (std::size_t j = 0; j < ts.size(); ++j) {
    if (j > 0) cumulative += integrate_scalar(interp, g, ts[j - 1], ts[j], cfg);
    GronwallPoint p{};
    p.xi = ts[j];
    p.psi = ps[j];
    p.hypothesis_rhs = k + l * cumulative;
    p.bound = gronwall_bound(k, l, g, a, ts[j]);
    p.hypothesis_ok = p.psi <= p.hypothesis_rhs + tol * std::max(1.0, p.hypothesis_rhs);
    p.bound_ok = p.psi <= p.bound + tol * std::max(1.0, p.bound);
    hypothesis_ok = hypothesis_ok && p.hypothesis_ok;
    bound_ok = bound_ok && p.bound_ok;
    report.max_bound_gap = std::max(report.max_bound_gap, std::abs(p.psi - p.bound));
    report.points.push_back(p);
  }
  if (!hypothesis_ok) {
    report.status = GronwallReport::Status::hypothesis_not_satisfied;
  } else if (!bound_ok) {
    report.status = GronwallReport::Status::failed;
  }
  return report;
}

}  // namespace mfde
