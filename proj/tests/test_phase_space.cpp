#include "mfde/phase_space.hpp"
#include "mfde/trajectory.hpp"

#include "doctest.h"
#include "support.hpp"

#include <cmath>
#include <memory>
#include <random>
#include <sstream>

using namespace mfde;
using testing::vec1;

namespace {

// Brute-force oracle for the weighted sup: dense sampling plus lateral limits
// at every knot.
double brute_norm(const History& h, const WeightFn& rho, int n = 200000) {
  const double R = -h.window_start();
  double best = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double th = -R + R * i / n;
    best = std::max(best, h(th).norm() / rho(th));
  }
  for (double b : h.knots()) {
    for (Side s : {Side::left, Side::right, Side::value}) {
      if (b <= -R && s == Side::left) continue;
      if (b >= 0.0 && s == Side::right) continue;
      best = std::max(best, h(b, s).norm() / rho(b));
    }
  }
  return best;
}

Trajectory ramp_trajectory() {
  // x(s) = s on [0, 1], zero initial history
  auto phi = std::make_shared<RegulatedFn>(RegulatedFn::constant(vec1(0.0), 2.0));
  std::vector<double> mesh;
  std::vector<Vec> vals;
  for (int i = 0; i <= 10; ++i) {
    mesh.push_back(i / 10.0);
    vals.push_back(vec1(i / 10.0));
  }
  std::vector<char> split(mesh.size(), 1);
  return Trajectory(phi, mesh, vals, vals, split);
}

}  // namespace

TEST_SUITE("phase_space") {

TEST_CASE("phase norm examples") {
  const WeightFn e = WeightFn::exp_pos();
  CHECK(phase_norm(RegulatedFn::constant(vec1(0.0), 2.0), e) == 0.0);
  const double R = 1.5;
  CHECK(std::abs(phase_norm(RegulatedFn::constant(vec1(-2.0), R, vec1(0.0)), e) -
                 2.0 * std::exp(R)) < 1e-12);
  const RegulatedFn ex =
      RegulatedFn::sampled_scalar([](double th) { return 3.0 * std::exp(2.0 * th); }, 2.0, 4001,
                                  0.0);
  CHECK(std::abs(phase_norm(ex, e) - 3.0) < 1e-6);
  CHECK_THROWS_AS(phase_norm(RegulatedFn::constant(vec1(1.0), 1.0), e), InfiniteNormError);
  CHECK(phase_norm(RegulatedFn::constant(vec1(1.0), 1.0), WeightFn::constant_one()) == 1.0);
}

TEST_CASE("weights") {
  const WeightFn e = WeightFn::exp_pos();
  CHECK(e(0.0) == 1.0);
  CHECK(std::abs(e.p(1.3) - std::exp(1.3)) < 1e-14);
  CHECK(WeightFn::constant_one()(-5.0) == 1.0);
  const AxiomConstants c = candidate_constants(e);
  CHECK(c.k(0.0) == 0.0);
  CHECK(c.k1(2.0) == 1.0);
  CHECK(std::abs(c.k3(1.0) - std::exp(1.0)) < 1e-15);
}

TEST_CASE("exact norm matches a brute-force sweep on random histories") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 25; ++trial) {
    const RegulatedFn h = random_history(rng, 3.0, 4, 2, true);
    const double exact = phase_norm(h, WeightFn::exp_pos());
    const double brute = brute_norm(h, WeightFn::exp_pos());
    CHECK(exact >= brute - 1e-12);
    CHECK(exact <= brute * (1.0 + 1e-6) + 1e-12);
  }
}

TEST_CASE("property: norm axioms on the finite representation") {
  std::mt19937_64 rng(5);
  const WeightFn e = WeightFn::exp_pos();
  for (int trial = 0; trial < 40; ++trial) {
    const RegulatedFn x = random_history(rng, 2.0, 3, 2, true);
    const RegulatedFn y = random_history(rng, 2.0, 3, 2, true);
    const double nx = phase_norm(x, e), ny = phase_norm(y, e);
    CHECK(nx > 0.0);
    const double lam = -2.5 + 0.1 * trial;
    CHECK(std::abs(phase_norm(linear_combination(lam, x, 0.0, y), e) - std::abs(lam) * nx) <=
          1e-12 * std::max(1.0, nx));
    CHECK(phase_norm(linear_combination(1.0, x, 1.0, y), e) <= nx + ny + 1e-12);
    CHECK(phase_norm(linear_combination(1.0, x, -1.0, x), e) == 0.0);
  }
}

TEST_CASE("shift examples") {
  const RegulatedFn lin = RegulatedFn::sampled_scalar([](double th) { return th; }, 4.0, 5, 0.0);
  const RegulatedFn s0 = shift(lin, 0.0);
  for (double th : {-3.5, -1.0, -0.25, 0.0}) CHECK(s0.component(th, 0) == lin.component(th, 0));
  const RegulatedFn s1 = shift(lin, 1.0);
  CHECK(std::abs(s1.component(-2.0, 0) - (-1.0)) < 1e-15);
  CHECK(s1.component(-0.5, 0) == lin.component(0.0, 0, Side::left));
  CHECK(s1.component(0.0, 0) == lin.component(0.0, 0));

  // branch 2 reads phi(0-), which differs from phi(0) for a jump at 0
  std::vector<Piece> pieces{{{-1.0, 0.0}, {vec1(1.0), vec1(1.0)}}};
  const RegulatedFn jump0({-1.0, 0.0}, pieces, {vec1(0.0), vec1(5.0)}, vec1(0.0));
  const RegulatedFn sj = shift(jump0, 0.5);
  CHECK(sj.component(-0.25, 0) == 1.0);
  CHECK(sj.component(0.0, 0) == 5.0);
}

TEST_CASE("property: shift composition") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const RegulatedFn phi = random_history(rng, 3.0, 4, 1, true);
    const double t = 0.1 + 0.05 * trial, s = 0.3;
    const RegulatedFn ts = shift(shift(phi, s), t);
    const RegulatedFn direct = shift(phi, t + s);
    for (int k = 0; k <= 200; ++k) {
      const double th = -6.0 + 6.0 * k / 200.0;
      if (th <= -(t + s)) {
        CHECK(ts.component(th, 0) == doctest::Approx(direct.component(th, 0)).epsilon(1e-13));
      } else if (th < -t) {
        // S(t)S(s)phi reads S(s)phi(t + th) with t + th in [-s, 0): phi(0-)
        CHECK(ts.component(th, 0) == phi.component(0.0, 0, Side::left));
      } else if (th < 0.0) {
        CHECK(ts.component(th, 0) == phi.component(0.0, 0, Side::left));
      } else {
        CHECK(ts.component(th, 0) == phi.component(0.0, 0));
      }
    }
  }
}

TEST_CASE("segment examples") {
  const Trajectory x = ramp_trajectory();
  const RegulatedFn s1 = segment(x, 1.0);
  for (double th : {-1.0, -0.75, -0.3, 0.0}) {
    CHECK(std::abs(s1.component(th, 0) - (1.0 + th)) < 1e-14);
  }
  CHECK(s1.component(-1.5, 0) == 0.0);
  const RegulatedFn s0 = segment(x, 0.0);
  for (double th : {-1.7, -0.5, 0.0}) CHECK(s0.component(th, 0) == x.initial().component(th, 0));
  CHECK_THROWS_AS(segment(x, 1.5), RangeError);

  auto c = std::make_shared<RegulatedFn>(RegulatedFn::constant(vec1(2.0), 1.0));
  const Trajectory flat(c, {0.0, 0.5, 1.0}, {vec1(2.0), vec1(2.0), vec1(2.0)},
                        {vec1(2.0), vec1(2.0), vec1(2.0)}, {1, 1, 1});
  const RegulatedFn sf = segment(flat, 0.7);
  for (double th : {-3.0, -1.2, -0.7, -0.1, 0.0}) CHECK(sf.component(th, 0) == 2.0);
}

TEST_CASE("property: segment consistency on random trajectories") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    auto phi = std::make_shared<RegulatedFn>(random_history(rng, 2.0, 3, 1, true));
    const Trajectory x = random_trajectory(rng, phi, 0.0, 1.0, 12);
    for (double t : {0.0, 0.31, 0.5, 1.0}) {
      const SegmentView v(x, t);
      CHECK(v.component(0.0, 0) == x.component(t, 0));
      for (double d : {0.05, 0.2}) {
        if (t + d > 1.0) continue;
        const SegmentView w(x, t + d);
        for (double th : {-1.5, -0.6, -0.11, 0.0}) {
          CHECK(w.component(th - d, 0) == doctest::Approx(v.component(th, 0)).epsilon(1e-13));
        }
      }
    }
  }
}

TEST_CASE("property: t -> |x_t| has one-sided limits at a jump") {
  auto phi = std::make_shared<RegulatedFn>(RegulatedFn::constant(vec1(1.0), 0.1, vec1(0.0)));
  // x = 1 + s before the jump at 0.5 (size 2), continuous elsewhere
  std::vector<double> mesh{0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<Vec> vals{vec1(1.0), vec1(1.25), vec1(1.5), vec1(3.75), vec1(4.0)};
  std::vector<Vec> posts{vec1(1.0), vec1(1.25), vec1(3.5), vec1(3.75), vec1(4.0)};
  const Trajectory x(phi, mesh, vals, posts, {1, 1, 1, 1, 1});
  const WeightFn e = WeightFn::exp_pos();
  // Cauchy along dyadic approach sequences from either side
  double prev_l = 0.0, prev_r = 0.0;
  for (int k = 4; k <= 24; ++k) {
    const double h = std::ldexp(1.0, -k);
    const double nl = phase_norm(SegmentView(x, 0.5 - h), e);
    const double nr = phase_norm(SegmentView(x, 0.5 + h), e);
    if (k > 4) {
      CHECK(std::abs(nl - prev_l) <= 100.0 * h);
      CHECK(std::abs(nr - prev_r) <= 100.0 * h);
    }
    prev_l = nl;
    prev_r = nr;
  }
  CHECK(std::abs(prev_r - prev_l) > 1.0);  // the jump is visible in the norm
}

TEST_CASE("axiom A2 with the candidate constants") {
  const WeightFn e = WeightFn::exp_pos();
  const AxiomConstants c = candidate_constants(e);
  SUBCASE("zero trajectory") {
    auto phi = std::make_shared<RegulatedFn>(RegulatedFn::constant(vec1(0.0), 1.0));
    const Trajectory z(phi, {0.0, 0.5, 1.0}, {vec1(0.0), vec1(0.0), vec1(0.0)},
                       {vec1(0.0), vec1(0.0), vec1(0.0)}, {1, 1, 1});
    const A2Report r = check_A2(z, 0.0, 1.0, c, e);
    CHECK(r.passed());
    CHECK(r.worst_slack_b == 0.0);
  }
  SUBCASE("random corpus") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 30; ++trial) {
      auto phi = std::make_shared<RegulatedFn>(random_history(rng, 2.0, 3, 2, true));
      const Trajectory y = random_trajectory(rng, phi, 0.0, 1.5, 10);
      const A2Report r = check_A2(y, 0.0, 1.5, c, e);
      CHECK(r.passed());
    }
  }
}

TEST_CASE("axiom A3 with the candidate constants") {
  const WeightFn e = WeightFn::exp_pos();
  const auto k = candidate_constants(e).k;
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 30; ++trial) {
    const RegulatedFn phi = random_history(rng, 2.0, 4, 1, true);
    const A3Report r0 = check_A3(phi, 0.0, k, e);
    CHECK(r0.passed);
    CHECK(std::abs(r0.slack) <= 1e-12 * r0.rhs);
    CHECK(check_A3(phi, 0.05 * trial, k, e).passed);
  }
  CHECK(check_A3(RegulatedFn::constant(vec1(0.0), 1.0), 2.0, k, e).passed);
}

TEST_CASE("doubling search reports the first certified scale") {
  const Certification c = certify_by_doubling([](double s) { return s >= 5.0; });
  CHECK(c.certified);
  CHECK(c.scale == 8.0);
  CHECK(c.doublings == 3);
  const Certification never = certify_by_doubling([](double) { return false; }, 4);
  CHECK_FALSE(never.certified);
}

TEST_CASE("history CSV") {
  std::ostringstream os;
  write_history_csv(os, RegulatedFn::constant(vec1(1.0), 1.0));
  CHECK(os.str().rfind("theta,value,left_limit,right_limit\n", 0) == 0);
}

}  // TEST_SUITE
