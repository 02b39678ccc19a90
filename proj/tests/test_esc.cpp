#include "mfde/esc.hpp"

#include "doctest.h"

#include <cmath>
#include <numbers>

using namespace mfde;

namespace {

EsParams quick(double t_end) {
  EsParams p = EsParams::table1();
  p.t_end = t_end;
  p.feasibility = FeasibilityPolicy::monitor;
  return p;
}

// Hand-built trace with constant signals on a uniform mesh.
EsTrace flat_trace(const EsParams& p, double theta, double u, double hh, int n) {
  EsTrace tr;
  tr.params = p;
  for (int i = 0; i <= n; ++i) {
    tr.times.push_back(i * p.dt);
    tr.theta.push_back(theta);
    tr.theta_hat.push_back(theta);
    tr.y.push_back(static_map(p, theta));
    tr.G.push_back(0.0);
    tr.H_hat.push_back(hh);
    tr.U.push_back(u);
    tr.Gamma.push_back(0.0);
    tr.feas_margin.push_back(1.0 - hh * p.delay_grad(0.0) * u);
  }
  fill_delay_times(tr);
  return tr;
}

}  // namespace

TEST_SUITE("esc") {

TEST_CASE("static map") {
  const EsParams p = EsParams::table1();
  CHECK(static_map(p, 8.0) == 64.0);
  CHECK(static_map(p, 9.0) == 63.5);
  EsParams q = p;
  q.theta_star = -2.0;
  q.y_star = 3.0;
  CHECK(static_map(q, -2.0) == 3.0);
}

TEST_CASE("reference preset parameters") {
  const EsParams p = EsParams::table1();
  CHECK(p.k_gain == 0.2);
  CHECK(p.c == 2.0);
  CHECK(p.a == 0.2);
  CHECK(p.omega == 8.0);
  CHECK(p.theta_star == 8.0);
  CHECK(p.y_star == 64.0);
  CHECK(p.hessian == -1.0);
  CHECK(p.delay.id == "sin5sq");
  CHECK(std::abs(p.delay.fn(0.3) - 0.5 * std::pow(std::sin(1.5), 2)) < 1e-15);
  CHECK(std::abs(p.omega * p.dt - 0.008) < 1e-15);
}

TEST_CASE("delay models") {
  CHECK(make_delay("zero").fn(3.0) == 0.0);
  CHECK(make_delay("const:0.75").fn(-1.0) == 0.75);
  CHECK_THROWS_AS(make_delay("const:-1"), std::invalid_argument);
  CHECK_THROWS_AS(make_delay("const:abc"), std::invalid_argument);
  CHECK_THROWS_AS(make_delay("cubic"), std::invalid_argument);
  // analytic gradient against the central-difference fallback
  EsParams p;
  EsParams fd = p;
  fd.delay.grad = nullptr;
  for (double th : {-1.0, 0.1, 0.7, 8.0}) {
    CHECK(std::abs(p.delay_grad(th) - fd.delay_grad(th)) < 1e-8);
  }
}

TEST_CASE("parameter validation") {
  EsParams p;
  p.hessian = 1.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = EsParams{};
  p.a = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = EsParams{};
  p.dt = 0.01;  // omega dt = 0.08
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("dither signals") {
  const EsParams p = EsParams::table1();
  const DitherSignals s = dither_signals(p, 0.0, 0.0);  // D(0) = 0
  CHECK(s.S == 0.0);
  CHECK(s.M == 0.0);
  CHECK(s.N == -8.0 / (p.a * p.a));
  CHECK(std::abs(std::abs(s.N) - 200.0) < 1e-12);
  const double period = 2.0 * std::numbers::pi / p.omega;
  CHECK(std::abs(period - std::numbers::pi / 4.0) < 1e-15);
  for (double t : {0.1, 0.77, 3.0}) {
    CHECK(std::abs(dither_signals(p, t + period, 8.0).S - dither_signals(p, t, 8.0).S) < 1e-13);
  }
  const Estimates e = estimates(s, 0.0);
  CHECK(e.G == 0.0);
  CHECK(e.H_hat == 0.0);
}

TEST_CASE("demodulation identities") {
  const EsParams p = EsParams::table1();
  for (double tt : {-1.0, -0.3, 0.25, 0.5, 2.0}) {
    const DemodMeans m = demodulation_means(p, tt);
    CHECK(std::abs(m.mean_Ny - p.hessian) <= 0.01 * std::abs(p.hessian));
    CHECK(std::abs(m.mean_My - p.hessian * tt) <= 0.01 * std::abs(p.hessian * tt));
  }
}

TEST_CASE("dither period from the autocorrelation of S") {
  EsParams p = quick(20.0);
  p.delay = make_delay("zero");
  const EsTrace tr = simulate(p);
  std::vector<double> s;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    s.push_back(dither_signals(p, tr.times[i], tr.theta[i]).S);
  }
  // first local maximum of the autocorrelation after lag 0
  auto ac = [&](std::size_t lag) {
    double acc = 0.0;
    for (std::size_t i = 0; i + lag < s.size(); ++i) acc += s[i] * s[i + lag];
    return acc / static_cast<double>(s.size() - lag);
  };
  std::size_t best = 0;
  for (std::size_t lag = 400; lag < 1200; ++lag) {
    if (best == 0 || ac(lag) > ac(best)) best = lag;
  }
  const double expect = 2.0 * std::numbers::pi / p.omega / p.dt;
  CHECK(std::abs(static_cast<double>(best) - expect) <= 1.0);
}

TEST_CASE("delayed output and delay times on hand-built traces") {
  SUBCASE("zero delay") {
    EsParams p;
    p.delay = make_delay("zero");
    const EsTrace tr = flat_trace(p, 7.5, 0.0, -1.0, 100);
    CHECK(delayed_output(p, tr, 0.05) == static_map(p, 7.5));
    CHECK(delay_time(p, tr, 0.05) == 0.05);
    CHECK(prediction_time(p, tr, 0.05) == 0.05);
  }
  SUBCASE("constant delay") {
    EsParams p;
    p.delay = make_delay("const:0.02");
    const EsTrace tr = flat_trace(p, 8.0, 0.0, -1.0, 100);
    CHECK(delayed_output(p, tr, 0.05) == 64.0);
    CHECK(std::abs(prediction_time(p, tr, 0.03) - 0.05) <= 1e-10);
  }
  SUBCASE("frozen theta with the preset delay") {
    EsParams p;
    const EsTrace tr = flat_trace(p, 8.0, 0.0, -1.0, 2000);
    const double d = 0.5 * std::pow(std::sin(40.0), 2);
    CHECK(delayed_output(p, tr, 1.0) == 64.0);
    CHECK(std::abs(delay_time(p, tr, 1.0) - (1.0 - d)) < 1e-15);
    CHECK(std::abs(prediction_time(p, tr, 0.5) - (0.5 + d)) <= 1e-10);
  }
  SUBCASE("history underflow") {
    EsParams p;
    p.delay = make_delay("const:20");
    p.history_depth = 10.0;
    const EsTrace tr = flat_trace(p, 8.0, 0.0, -1.0, 10);
    CHECK_THROWS_AS(delayed_output(p, tr, 0.0), HistoryUnderflow);
  }
}

TEST_CASE("predictor integral") {
  SUBCASE("zero U history") {
    EsParams p;
    const EsTrace tr = flat_trace(p, 8.0, 0.0, -1.0, 500);
    CHECK(predictor_gamma(p, tr, 0.4) == 0.0);
  }
  SUBCASE("constant delay, U and H_hat") {
    EsParams p;
    p.delay = make_delay("const:0.1");
    const double u0 = 0.3, h0 = -2.0;
    const EsTrace tr = flat_trace(p, 8.0, u0, h0, 1000);
    CHECK(std::abs(predictor_gamma(p, tr, 0.5) - h0 * u0 * 0.1) < 1e-12);
  }
  SUBCASE("zero delay gives an empty interval") {
    EsParams p;
    p.delay = make_delay("zero");
    const EsTrace tr = flat_trace(p, 8.0, 0.5, -1.0, 100);
    CHECK(predictor_gamma(p, tr, 0.05) == 0.0);
  }
  SUBCASE("denominator below the floor aborts") {
    EsParams p;
    p.delay = make_delay("const:0.1");
    EsTrace tr = flat_trace(p, 8.0, 0.3, -2.0, 1000);
    tr.feas_margin[450] = 0.0;
    try {
      predictor_gamma(p, tr, 0.5);
      FAIL("expected a feasibility error");
    } catch (const FeasibilityError& e) {
      CHECK(e.time() == tr.times[450]);
    }
  }
}

TEST_CASE("simulator agrees with the standalone predictor integral") {
  EsParams p = quick(3.0);
  const EsTrace tr = simulate(p);
  for (std::size_t i : {std::size_t{500}, std::size_t{1500}, std::size_t{2999}}) {
    CHECK(std::abs(tr.Gamma[i] - predictor_gamma(p, tr, tr.times[i])) <=
          1e-9 * std::max(1.0, std::abs(tr.Gamma[i])));
  }
}

TEST_CASE("step examples") {
  SUBCASE("zero gain: U decays exponentially and theta_hat integrates it") {
    EsParams p = quick(2.0);
    p.k_gain = 0.0;
    p.u0 = 1.0;
    p.theta_hat0 = 3.0;
    const EsTrace tr = simulate(p);
    for (std::size_t i = 0; i < tr.size(); i += 97) {
      const double t = tr.times[i];
      CHECK(std::abs(tr.U[i] - std::exp(-p.c * t)) < 1e-12);
      CHECK(std::abs(tr.theta_hat[i] - (3.0 + (1.0 - std::exp(-p.c * t)) / p.c)) < 1e-12);
    }
  }
  SUBCASE("tiny dither at the optimum stays at the optimum") {
    EsParams p = quick(5.0);
    p.a = 1e-6;
    p.y_star = 0.0;
    p.washout = 0.0;
    p.theta_hat0 = p.theta_star;
    const EsTrace tr = simulate(p);
    for (std::size_t i = 0; i < tr.size(); ++i) {
      CHECK(std::abs(tr.theta[i] - p.theta_star) < 1e-5);
      CHECK(std::abs(tr.y[i] - p.y_star) < 1e-10);
      CHECK(std::abs(tr.G[i]) < 1e-5);
    }
  }
  SUBCASE("first step follows the dither formula") {
    EsParams p = quick(0.01);
    EsSimulator sim(p);
    sim.step();
    sim.step();
    const EsTrace& tr = sim.trace();
    CHECK(tr.theta[0] == p.theta_hat0);
    CHECK(tr.theta[1] == tr.theta_hat[1] + p.a * std::sin(p.omega * p.dt));
  }
}

TEST_CASE("trace invariants on a short preset run") {
  const EsTrace tr = simulate(quick(20.0));
  for (std::size_t i = 0; i < tr.size(); ++i) {
    CHECK(tr.phi[i] <= tr.times[i]);
    CHECK(tr.sigma[i] >= tr.times[i]);
    const double d = tr.params.delay.fn(tr.theta[i]);
    if (d > 0.0) CHECK(tr.sigma[i] > tr.times[i]);
    if (d == 0.0) CHECK(tr.sigma[i] == tr.times[i]);
    // phi(sigma(t)) = t
    const double s = tr.sigma[i];
    const double back = s - tr.params.delay.fn(theta_at(tr, s));
    CHECK(std::abs(back - tr.times[i]) <= 1e-9);
  }
}

TEST_CASE("determinism") {
  const EsTrace a = simulate(quick(10.0));
  const EsTrace b = simulate(quick(10.0));
  CHECK(a.theta == b.theta);
  CHECK(a.U == b.U);
  CHECK(a.Gamma == b.Gamma);
  CHECK(a.sigma == b.sigma);
}

TEST_CASE("transport diagnostic") {
  SUBCASE("zero delay collapses alpha onto theta") {
    EsParams p = quick(3.0);
    p.delay = make_delay("zero");
    const EsTrace tr = simulate(p);
    const PdeDiag d = pde_diag(tr, 11, 50);
    for (std::size_t k = 0; k < d.times.size(); ++k) {
      for (double a : d.alpha[k]) CHECK(a == tr.theta[k * 50]);
    }
  }
  SUBCASE("constant theta gives alpha constant in x") {
    EsParams p;
    p.average_model = true;
    p.theta_hat0 = 8.0;
    const EsTrace tr = flat_trace(p, 8.0, 0.0, -1.0, 3000);
    const PdeDiag d = pde_diag(tr, 9, 100);
    for (const auto& row : d.alpha) {
      for (double a : row) CHECK(a == 8.0);
    }
  }
  SUBCASE("boundary identities on the preset run") {
    const EsTrace tr = simulate(quick(30.0));
    const PdeDiag d = pde_diag(tr, 21, 10);
    CHECK(d.max_boundary_gap <= 1e-6);
  }
}

TEST_CASE("metrics") {
  EsParams p;
  const EsTrace eq = flat_trace(p, p.theta_star, 0.0, -1.0, 200);
  const EsMetrics m = metrics(eq, 0.1);
  CHECK(m.theta_err == 0.0);
  CHECK(m.y_err == 0.0);
  CHECK(m.u_abs == 0.0);
  CHECK_THROWS_AS(metrics(eq, 5.0), DomainError);
}

TEST_CASE("classical baseline: zero delay without predictor converges") {
  EsParams p = quick(200.0);
  p.delay = make_delay("zero");
  p.predictor_on = false;
  const EsMetrics m = metrics(simulate(p), 150.0);
  CHECK(m.theta_err <= p.a + 0.1);

  // dither amplitude scaling of the tail error
  EsParams q = p;
  q.a = 2.0 * p.a;
  const EsMetrics m2 = metrics(simulate(q), 150.0);
  const double ratio = m2.theta_err / m.theta_err;
  CHECK(ratio > 1.5);
  CHECK(ratio < 3.0);
}

TEST_CASE("lyapunov diagnostic") {
  SUBCASE("zero average state") {
    EsParams p;
    p.average_model = true;
    p.theta_star = 0.0;
    p.y_star = 0.0;
    const EsTrace tr = flat_trace(p, 0.0, 0.0, -1.0, 500);
    const LyapunovSeries s = lyapunov_diag(tr, 11, 0.1, 10);
    for (double v : s.V) CHECK(v == 0.0);
  }
  SUBCASE("U = 0 and zero gain reduce V to the quadratic term") {
    EsParams p;
    p.average_model = true;
    p.k_gain = 0.0;
    p.delay = make_delay("zero");
    p.theta_hat0 = 10.0;
    EsTrace tr = flat_trace(p, 8.0, 0.0, -1.0, 2000);
    for (std::size_t i = 0; i < tr.size(); ++i) {
      tr.theta_hat[i] = tr.theta[i] = 8.0 + 2.0 * std::exp(-tr.times[i]);
    }
    fill_delay_times(tr);
    const LyapunovSeries s = lyapunov_diag(tr, 11, 0.0, 20);
    for (std::size_t k = 0; k < s.V.size(); ++k) {
      const double th = theta_at(tr, tr.phi[k * 20]) - 8.0;
      CHECK(std::abs(s.V[k] - 0.5 * th * th) < 1e-12);
      if (k > 0) CHECK(s.V[k] <= s.V[k - 1]);
    }
    CHECK(s.nonincreasing_after_transient);
  }
  SUBCASE("average-model preset run trends down after the transient") {
    EsParams p = quick(200.0);
    p.average_model = true;
    p.washout = 0.0;
    const LyapunovSeries s = lyapunov_diag(simulate(p), 21, 10.0, 100);
    CHECK(s.nonincreasing_after_transient);
    CHECK(s.V.back() < 1e-3 * s.V.front());
  }
}

TEST_CASE("abort policy stops with the partial trace") {
  EsParams p = EsParams::table1();
  p.t_end = 20.0;
  try {
    simulate(p);
    FAIL("the preset run is expected to violate the feasibility condition");
  } catch (const FeasibilityError& e) {
    CHECK(e.partial().size() > 0);
    CHECK(e.partial().times.back() == doctest::Approx(e.time()));
    CHECK(e.partial().feas_margin.back() <= p.denom_floor);
    CHECK(e.partial().sigma.size() == e.partial().size());
  }
}

}  // TEST_SUITE
