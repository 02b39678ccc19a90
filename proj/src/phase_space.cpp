#include "mfde/phase_space.hpp"

#include "mfde/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>
#include <string>

namespace mfde {

Vec History::operator()(double theta, Side side) const {
  Vec out(dim());
  for (int i = 0; i < dim(); ++i) out[i] = component(theta, i, side);
  return out;
}

namespace {

void require_window(const std::vector<double>& bps) {
  if (bps.empty() || bps.back() != 0.0) {
    throw std::invalid_argument("history breakpoints must end at 0");
  }
  for (std::size_t k = 1; k < bps.size(); ++k) {
    if (!(bps[k] > bps[k - 1])) {
      throw std::invalid_argument("history breakpoints must increase strictly");
    }
  }
}

void require_dim(const Vec& v, Eigen::Index dim, const char* what) {
  if (v.size() != dim) throw std::invalid_argument(std::string(what) + ": dimension mismatch");
  if (!v.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite value");
}

double interp_piece(const Piece& p, double theta, int i) {
  auto it = std::upper_bound(p.theta.begin(), p.theta.end(), theta);
  std::size_t j = static_cast<std::size_t>(it - p.theta.begin());
  if (j == 0) return p.value.front()[i];
  if (j >= p.theta.size()) return p.value.back()[i];
  const double w = (theta - p.theta[j - 1]) / (p.theta[j] - p.theta[j - 1]);
  return p.value[j - 1][i] + w * (p.value[j][i] - p.value[j - 1][i]);
}

using SidedEval = std::function<Vec(double, Side)>;

// Polyline through sided evaluations at `knots`, each knot becoming a
// breakpoint. Intervals are subdivided to `max_gap` unless `linear`.
RegulatedFn build_polyline(std::vector<double> knots, const SidedEval& eval,
                           bool linear, double max_gap, const Vec& tail) {
  std::vector<Piece> pieces;
  std::vector<Vec> points;
  points.reserve(knots.size());
  points.push_back(tail);
  for (std::size_t k = 1; k < knots.size(); ++k) points.push_back(eval(knots[k], Side::value));
  for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
    const double u = knots[k];
    const double v = knots[k + 1];
    Piece p;
    int n = 1;
    if (!linear) n = std::max(1, static_cast<int>(std::ceil((v - u) / max_gap)));
    for (int s = 0; s <= n; ++s) {
      const double th = (s == n) ? v : u + (v - u) * s / n;
      p.theta.push_back(th);
      p.value.push_back(s == 0 ? eval(u, Side::right)
                               : (s == n ? eval(v, Side::left) : eval(th, Side::value)));
    }
    pieces.push_back(std::move(p));
  }
  return RegulatedFn(std::move(knots), std::move(pieces), std::move(points), tail);
}

}  // namespace

RegulatedFn::RegulatedFn(std::vector<double> breakpoints, std::vector<Piece> pieces,
                         std::vector<Vec> point_values, Vec tail)
    : breakpoints_(std::move(breakpoints)),
      pieces_(std::move(pieces)),
      point_values_(std::move(point_values)),
      tail_(std::move(tail)) {
  require_window(breakpoints_);
  const Eigen::Index d = tail_.size();
  if (d < 1) throw std::invalid_argument("history dimension must be positive");
  require_dim(tail_, d, "tail");
  if (pieces_.size() + 1 != breakpoints_.size() ||
      point_values_.size() != breakpoints_.size()) {
    throw std::invalid_argument("history pieces do not match breakpoints");
  }
  point_values_.front() = tail_;
  for (std::size_t j = 1; j < point_values_.size(); ++j) {
    require_dim(point_values_[j], d, "point value");
  }
  for (std::size_t k = 0; k < pieces_.size(); ++k) {
    const Piece& p = pieces_[k];
    if (p.theta.size() < 2 || p.theta.size() != p.value.size()) {
      throw std::invalid_argument("history piece needs at least two samples");
    }
    if (p.theta.front() != breakpoints_[k] || p.theta.back() != breakpoints_[k + 1]) {
      throw std::invalid_argument("history piece must span its breakpoint interval");
    }
    for (std::size_t j = 0; j < p.theta.size(); ++j) {
      if (j > 0 && !(p.theta[j] > p.theta[j - 1])) {
        throw std::invalid_argument("history piece samples must increase");
      }
      require_dim(p.value[j], d, "piece sample");
    }
  }
}

RegulatedFn RegulatedFn::constant(const Vec& c, double R, const Vec& tail) {
  if (!(R > 0.0)) throw std::invalid_argument("window length must be positive");
  Piece p{{-R, 0.0}, {c, c}};
  return RegulatedFn({-R, 0.0}, {p}, {tail, c}, tail);
}

RegulatedFn RegulatedFn::constant(const Vec& c, double R) { return constant(c, R, c); }

RegulatedFn RegulatedFn::sampled(const std::function<Vec(double)>& f, double R,
                                 int samples_per_piece, const Vec& tail,
                                 std::vector<double> interior_breaks) {
  if (!(R > 0.0)) throw std::invalid_argument("window length must be positive");
  if (samples_per_piece < 2) throw std::invalid_argument("need at least two samples per piece");
  std::vector<double> bps{-R, 0.0};
  for (double b : interior_breaks) {
    if (b > -R && b < 0.0) bps.push_back(b);
  }
  std::sort(bps.begin(), bps.end());
  bps.erase(std::unique(bps.begin(), bps.end()), bps.end());

  std::vector<Piece> pieces;
  std::vector<Vec> points{tail};
  for (std::size_t k = 0; k + 1 < bps.size(); ++k) {
    Piece p;
    const int n = samples_per_piece - 1;
    for (int s = 0; s <= n; ++s) {
      const double th = (s == n) ? bps[k + 1] : bps[k] + (bps[k + 1] - bps[k]) * s / n;
      p.theta.push_back(th);
      p.value.push_back(f(th));
    }
    pieces.push_back(std::move(p));
    points.push_back(f(bps[k + 1]));
  }
  return RegulatedFn(std::move(bps), std::move(pieces), std::move(points), tail);
}

RegulatedFn RegulatedFn::sampled_scalar(const std::function<double(double)>& f,
                                        double R, int samples_per_piece, double tail,
                                        std::vector<double> interior_breaks) {
  Vec t(1);
  t[0] = tail;
  return sampled(
      [&f](double th) {
        Vec v(1);
        v[0] = f(th);
        return v;
      },
      R, samples_per_piece, t, std::move(interior_breaks));
}

RegulatedFn RegulatedFn::from_history(const History& h, double max_gap) {
  return build_polyline(
      h.knots(), [&h](double th, Side s) { return h(th, s); },
      h.linear_between_knots(), max_gap, h.tail());
}

double RegulatedFn::component(double theta, int i, Side side) const {
  if (theta > 0.0) throw RangeError("history evaluated at positive theta");
  const double r0 = breakpoints_.front();
  if (theta < r0 || (theta == r0 && side != Side::right)) return tail_[i];
  if (pieces_.empty()) return point_values_.back()[i];

  auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), theta);
  const std::size_t j = static_cast<std::size_t>(it - breakpoints_.begin()) - 1;
  if (breakpoints_[j] == theta) {
    const std::size_t m = pieces_.size();
    switch (side) {
      case Side::value:
        return point_values_[j][i];
      case Side::left:
        return pieces_[j - 1].value.back()[i];
      case Side::right:
        return j == m ? point_values_[m][i] : pieces_[j].value.front()[i];
    }
  }
  return interp_piece(pieces_[j], theta, i);
}

std::vector<double> RegulatedFn::knots() const {
  std::vector<double> out;
  out.push_back(breakpoints_.front());
  for (const auto& p : pieces_) out.insert(out.end(), p.theta.begin() + 1, p.theta.end());
  return out;
}

RegulatedFn linear_combination(double a, const History& x, double b, const History& y) {
  if (x.dim() != y.dim()) throw std::invalid_argument("dimension mismatch");
  std::vector<double> ks = x.knots();
  const auto ky = y.knots();
  ks.insert(ks.end(), ky.begin(), ky.end());
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  const bool linear = x.linear_between_knots() && y.linear_between_knots();
  return build_polyline(
      std::move(ks),
      [&](double th, Side s) -> Vec { return a * x(th, s) + b * y(th, s); }, linear,
      1e-3, a * x.tail() + b * y.tail());
}

double WeightFn::operator()(double theta) const {
  return kind == Kind::exp_pos ? std::exp(theta) : 1.0;
}

double WeightFn::p(double t) const { return kind == Kind::exp_pos ? std::exp(t) : 1.0; }

std::string WeightFn::name() const {
  return kind == Kind::exp_pos ? "exp_pos" : "constant_one";
}

AxiomConstants candidate_constants(const WeightFn& rho) {
  if (rho.kind == WeightFn::Kind::exp_pos) {
    return {[](double) { return 1.0; }, [](double t) { return std::exp(t); },
            [](double t) { return std::exp(t); }, [](double t) { return std::expm1(t); }};
  }
  return {[](double) { return 1.0; }, [](double) { return 1.0; },
          [](double) { return 1.0; }, [](double) { return 0.0; }};
}

double phase_norm(const History& phi, const WeightFn& rho, double grid) {
  const double lambda = rho.rate();
  double best = 0.0;
  const Vec tail = phi.tail();
  if (tail.norm() > 0.0) {
    if (rho.kind == WeightFn::Kind::exp_pos) {
      throw InfiniteNormError("nonzero tail has infinite norm under the e^theta weight");
    }
    best = tail.norm();
  }
  auto weighted = [&](const Vec& v, double th) { return v.norm() * std::exp(-lambda * th); };

  const auto ks = phi.knots();
  for (double k : ks) {
    best = std::max(best, weighted(phi(k, Side::value), k));
    best = std::max(best, weighted(phi(k, Side::left), k));
    best = std::max(best, weighted(phi(k, Side::right), k));
  }
  const bool linear = phi.linear_between_knots();
  for (std::size_t j = 0; j + 1 < ks.size(); ++j) {
    const double u = ks[j];
    const double v = ks[j + 1];
    if (linear) {
      const Vec A = phi(u, Side::right);
      const Vec B = phi(v, Side::left) - A;
      if (lambda == 0.0) continue;  // convex norm: endpoints suffice
      const double w = v - u;
      const double aa = A.squaredNorm();
      const double ab = A.dot(B);
      const double bb = B.squaredNorm();
      const double qa = -lambda * w * bb;
      const double qb = bb - 2.0 * lambda * w * ab;
      const double qc = ab - lambda * w * aa;
      std::vector<double> roots;
      if (std::abs(qa) < 1e-300) {
        if (qb != 0.0) roots.push_back(-qc / qb);
      } else {
        const double disc = qb * qb - 4.0 * qa * qc;
        if (disc >= 0.0) {
          const double sq = std::sqrt(disc);
          roots.push_back((-qb + sq) / (2.0 * qa));
          roots.push_back((-qb - sq) / (2.0 * qa));
        }
      }
      for (double s : roots) {
        if (s > 0.0 && s < 1.0) best = std::max(best, weighted(A + s * B, u + s * w));
      }
    } else {
      const int n = std::max(2, static_cast<int>(std::ceil((v - u) / grid)));
      for (int s = 1; s < n; ++s) {
        const double th = u + (v - u) * s / n;
        best = std::max(best, weighted(phi(th), th));
      }
    }
  }
  return best;
}

ShiftedView::ShiftedView(std::shared_ptr<const History> base, double t)
    : base_(std::move(base)), t_(t) {
  if (!(t >= 0.0)) throw std::invalid_argument("shift requires t >= 0");
}

double ShiftedView::component(double theta, int i, Side side) const {
  if (theta > 0.0) throw RangeError("history evaluated at positive theta");
  if (theta == 0.0 && side != Side::left) return base_->component(0.0, i, Side::value);
  if (theta >= -t_) return base_->component(0.0, i, Side::left);
  return base_->component(t_ + theta, i, side);
}

std::vector<double> ShiftedView::knots() const {
  std::vector<double> out{0.0};
  if (t_ > 0.0) out.push_back(-t_);
  for (double k : base_->knots()) {
    if (k < 0.0) out.push_back(k - t_);
  }
  out.push_back(window_start());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// Built from the pieces directly: sampling a view at shifted knots would round
// t + (k - t) off k and land on the wrong side of a jump.
RegulatedFn shift(const RegulatedFn& phi, double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("shift requires t >= 0");
  if (t == 0.0 || phi.pieces().empty()) return phi;
  const auto& bps = phi.breakpoints();
  const auto& pts = phi.point_values();
  const int d = phi.dim();
  Vec left0(d);
  for (int i = 0; i < d; ++i) left0[i] = phi.component(0.0, i, Side::left);

  std::vector<double> breakpoints;
  std::vector<Piece> pieces;
  std::vector<Vec> points;
  for (std::size_t j = 0; j + 1 < bps.size(); ++j) {
    breakpoints.push_back(bps[j] - t);
    points.push_back(pts[j]);
    Piece p = phi.pieces()[j];
    for (double& th : p.theta) th -= t;
    pieces.push_back(std::move(p));
  }
  breakpoints.push_back(-t);
  points.push_back(left0);
  pieces.push_back(Piece{{-t, 0.0}, {left0, left0}});
  breakpoints.push_back(0.0);
  points.push_back(pts.back());
  return RegulatedFn(std::move(breakpoints), std::move(pieces), std::move(points), phi.tail());
}

SegmentView::SegmentView(const Trajectory& x, double t, bool right_top)
    : x_(&x), t_(t), right_top_(right_top) {}

int SegmentView::dim() const { return x_->dim(); }

double SegmentView::window_start() const {
  return x_->initial().window_start() - (t_ - x_->t0());
}

Vec SegmentView::tail() const { return x_->initial().tail(); }

double SegmentView::component(double theta, int i, Side side) const {
  if (theta > 0.0) throw RangeError("history evaluated at positive theta");
  if (theta == 0.0) {
    if (right_top_) return x_->component(t_, i, Side::right);
    return x_->component(t_, i, side == Side::right ? Side::value : side);
  }
  return x_->component(t_ + theta, i, side);
}

std::vector<double> SegmentView::knots() const {
  const double lag = t_ - x_->t0();
  std::vector<double> out{0.0, window_start()};
  for (double k : x_->initial().knots()) out.push_back(k - lag);
  for (double m : x_->mesh()) {
    if (m <= t_) out.push_back(m - t_);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  while (!out.empty() && out.back() > 0.0) out.pop_back();
  return out;
}

bool SegmentView::linear_between_knots() const {
  return x_->piecewise_linear() && x_->initial().linear_between_knots();
}

RegulatedFn segment(const Trajectory& x, double t) {
  if (t < x.t0() || t > x.t_end()) {
    throw RangeError("segment requested at t=" + std::to_string(t) +
                     " outside computed range");
  }
  return RegulatedFn::from_history(SegmentView(x, t));
}

A2Report check_A2(const Trajectory& y, double t0, double sigma,
                  const AxiomConstants& consts, const WeightFn& rho, double tol) {
  A2Report rep;
  const double norm0 = phase_norm(SegmentView(y, t0), rho);
  double running_sup = 0.0;
  bool first = true;
  const auto& mesh = y.mesh();
  for (std::size_t i = 0; i < mesh.size(); ++i) {
    const double t = mesh[i];
    if (t < t0 || t > t0 + sigma) continue;
    const Vec yt = y(t);
    running_sup = std::max(running_sup, yt.norm());
    const double nt = phase_norm(SegmentView(y, t), rho);
    const double s = t - t0;

    const double slack_b = consts.k1(s) * nt - yt.norm();
    const double slack_c = consts.k2(s) * norm0 + consts.k3(s) * running_sup - nt;
    if (first) {
      rep.worst_slack_b = slack_b;
      rep.worst_slack_c = slack_c;
      first = false;
    } else {
      rep.worst_slack_b = std::min(rep.worst_slack_b, slack_b);
      rep.worst_slack_c = std::min(rep.worst_slack_c, slack_c);
    }
    if (slack_b < -tol * std::max(1.0, yt.norm())) rep.passed_b = false;
    if (slack_c < -tol * std::max(1.0, nt)) rep.passed_c = false;
    ++rep.points;
    // x(t+) belongs to later times of the interval.
    running_sup = std::max(running_sup, y.posts()[i].norm());
  }
  return rep;
}

A3Report check_A3(const History& phi, double t, const std::function<double(double)>& k,
                  const WeightFn& rho, double tol) {
  std::shared_ptr<const History> base(&phi, [](const History*) {});
  A3Report rep;
  rep.lhs = phase_norm(ShiftedView(base, t), rho);
  rep.rhs = (1.0 + k(t)) * phase_norm(phi, rho);
  rep.slack = rep.rhs - rep.lhs;
  rep.passed = rep.slack >= -tol * std::max(1.0, rep.rhs);
  return rep;
}

Certification certify_by_doubling(const std::function<bool(double)>& check,
                                  int max_doublings) {
  double scale = 1.0;
  for (int d = 0; d <= max_doublings; ++d) {
    if (check(scale)) return {true, scale, d};
    if (d < max_doublings) scale *= 2.0;
  }
  return {false, scale, max_doublings};
}

RegulatedFn random_history(std::mt19937_64& rng, double R, int pieces, int dim,
                           bool zero_tail) {
  if (!(R > 0.0) || pieces < 1 || dim < 1) {
    throw std::invalid_argument("random_history: bad shape");
  }
  std::uniform_real_distribution<double> unif(-R, 0.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> nsamp(2, 4);
  std::uniform_int_distribution<int> pick(0, 2);
  auto rvec = [&] {
    Vec v(dim);
    for (int i = 0; i < dim; ++i) v[i] = normal(rng);
    return v;
  };

  std::vector<double> bps{-R, 0.0};
  while (static_cast<int>(bps.size()) < pieces + 1) {
    const double b = unif(rng);
    if (b > -R && b < 0.0 && std::find(bps.begin(), bps.end(), b) == bps.end()) bps.push_back(b);
  }
  std::sort(bps.begin(), bps.end());

  std::vector<Piece> ps;
  for (int k = 0; k < pieces; ++k) {
    Piece p;
    const int n = nsamp(rng);
    for (int s = 0; s < n; ++s) {
      p.theta.push_back(s == n - 1 ? bps[k + 1] : bps[k] + (bps[k + 1] - bps[k]) * s / (n - 1));
      p.value.push_back(rvec());
    }
    ps.push_back(std::move(p));
  }
  const Vec tail = zero_tail ? Vec::Zero(dim) : rvec();
  std::vector<Vec> points{tail};
  for (int k = 1; k <= pieces; ++k) {
    const int which = pick(rng);
    if (k == pieces || which == 0) {
      points.push_back(ps[k - 1].value.back());
    } else if (which == 1) {
      points.push_back(ps[k].value.front());
    } else {
      points.push_back(rvec());
    }
  }
  return RegulatedFn(std::move(bps), std::move(ps), std::move(points), tail);
}

Trajectory random_trajectory(std::mt19937_64& rng, std::shared_ptr<const History> initial,
                             double t0, double sigma, int nodes) {
  if (nodes < 2 || !(sigma > 0.0)) throw std::invalid_argument("random_trajectory: bad shape");
  std::uniform_real_distribution<double> unif(t0, t0 + sigma);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution jump(0.2);
  const int dim = initial->dim();

  std::vector<double> mesh{t0, t0 + sigma};
  while (static_cast<int>(mesh.size()) < nodes) {
    const double m = unif(rng);
    if (m > t0 && m < t0 + sigma && std::find(mesh.begin(), mesh.end(), m) == mesh.end()) {
      mesh.push_back(m);
    }
  }
  std::sort(mesh.begin(), mesh.end());

  std::vector<Vec> values;
  std::vector<Vec> posts;
  Vec cur = (*initial)(0.0);
  for (int i = 0; i < nodes; ++i) {
    if (i > 0) {
      for (int c = 0; c < dim; ++c) cur[c] += 0.5 * normal(rng);
    }
    values.push_back(cur);
    if (i + 1 < nodes && jump(rng)) {
      for (int c = 0; c < dim; ++c) cur[c] += normal(rng);
    }
    posts.push_back(cur);
  }
  posts.back() = values.back();
  return Trajectory(std::move(initial), std::move(mesh), std::move(values), std::move(posts),
                    std::vector<char>(static_cast<std::size_t>(nodes), 1));
}

void write_history_csv(std::ostream& os, const History& h) {
  const int d = h.dim();
  auto cols = [&](const char* name) {
    if (d == 1) {
      os << ',' << name;
    } else {
      for (int i = 0; i < d; ++i) os << ',' << name << '_' << i;
    }
  };
  os << "theta";
  cols("value");
  cols("left_limit");
  cols("right_limit");
  os << '\n' << std::setprecision(17);
  for (double k : h.knots()) {
    os << k;
    for (Side s : {Side::value, Side::left, Side::right}) {
      const Vec v = h(k, s);
      for (int i = 0; i < d; ++i) os << ',' << v[i];
    }
    os << '\n';
  }
}

}  // namespace mfde
