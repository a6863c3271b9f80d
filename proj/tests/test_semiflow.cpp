#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "mixlab/semiflow.hpp"

using namespace mixlab;
using namespace mixlab::semiflow;
using mixlab::models::get_model;
using doctest::Approx;

namespace {

double ks_uniform(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  double ks = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    ks = std::max(ks, std::abs((i + 1) / n - x[i]));
    ks = std::max(ks, std::abs(x[i] - i / n));
  }
  return ks;
}

std::vector<double> grid_times(double t_max, double step) {
  std::vector<double> tg;
  for (double t = 0.0; t <= t_max + 1e-9; t += step) tg.push_back(t);
  return tg;
}

// Roof 2 + 0.1 sin(4 pi y) - 0.1 sin(2 pi y): the variable part telescopes
// along the doubling map, so it is a coboundary with constant transfer 2.
models::RoofFunction coboundary_roof() {
  models::RoofFunction r;
  r.constant = 2.0;
  r.trig = {{0, 2, 0.0, 0.1}, {0, 1, 0.0, -0.1}};
  return r;
}

// x2 resampled until the pair fits in the local product chart.
std::pair<LeafPoint, LeafPoint> close_pair(const SuspensionSystem& s, int i) {
  LeafPoint x1 = sample_leaf_point(s, 1000 + i);
  LeafPoint x2 = sample_leaf_point(s, 2000 + i);
  int tries = 0;
  while (dist_inf(x1.y, x2.y, s.base_dim()) > 0.4 && tries < 64)
    x2 = sample_leaf_point(s, 2000 + i + 5000 * (++tries));
  REQUIRE(dist_inf(x1.y, x2.y, s.base_dim()) <= 0.4);
  return {x1, x2};
}

} // namespace

TEST_CASE("constant roof crossings are exact height arithmetic") {
  auto s = SuspensionSystem::over_model(get_model("doubling-constant"));
  CHECK(s.roof_inf() == 2.0);
  CHECK(s.roof_sup() == 2.0);
  CHECK(s.mean_roof() == Approx(2.0).epsilon(1e-12));
  CHECK(s.tail_gamma() == 0.0);
  CHECK(s.admissible_eps() == HUGE_VAL);
  CHECK(!s.has_fiber());

  SuspPoint p;
  p.y = pt1(0.3);
  p.u = 1.5;

  SuspPoint a = flow_step(s, p, 0.25);
  CHECK(a.y[0] == p.y[0]);
  CHECK(a.u == 1.75);

  SuspPoint b = flow_step(s, p, 3.0);
  const Pt y2 = s.base_forward(s.base_forward(pt1(0.3)));
  CHECK(b.y[0] == y2[0]);
  CHECK(b.u == 0.5);

  CHECK_THROWS_AS((void)flow_step(s, p, -1.0), check_error);
}

TEST_CASE("flow satisfies the semigroup property") {
  auto s = SuspensionSystem::over_model(get_model("doubling-quadratic"));
  auto pts = sample_invariant(s, 8, 2);
  const double splits[] = {0.1, 1.3, 2.0, 4.7};
  for (const SuspPoint& p : pts) {
    for (double ta : splits) {
      for (double tb : splits) {
        SuspPoint one = flow_step(s, p, ta + tb);
        SuspPoint two = flow_step(s, flow_step(s, p, ta), tb);
        CHECK(std::abs(one.y[0] - two.y[0]) <= 1e-9);
        CHECK(std::abs(one.u - two.u) <= 1e-9);
      }
    }
  }
}

TEST_CASE("fiber coordinate advances through the skew factor at crossings") {
  auto s = SuspensionSystem::over_model(get_model("solenoid-skew"));
  CHECK(s.has_fiber());
  std::mt19937_64 rng = rng_stream(31, 0);
  SuspPoint p = s.draw(rng);
  const double left = s.roof(p.y) - p.u;
  const auto z_next = s.fiber_step(p.y, p.z);
  SuspPoint q = flow_step(s, p, left + 0.125);
  CHECK(q.z[0] == z_next[0]);
  CHECK(q.z[1] == z_next[1]);
  CHECK(q.u == Approx(0.125).epsilon(1e-12));

  auto a = SuspensionSystem::over_model(get_model("doubling-quadratic"));
  CHECK_THROWS_AS((void)a.fiber_step(pt1(0.5), {0.0, 0.0}), check_error);
}

TEST_CASE("invariant sampling matches the product measure") {
  auto b = SuspensionSystem::over_model(get_model("doubling-constant"));
  auto sb = sample_invariant(b, 100000, 5);
  std::vector<double> us, ys;
  us.reserve(sb.size());
  ys.reserve(sb.size());
  for (const SuspPoint& p : sb) {
    us.push_back(p.u / 2.0);
    ys.push_back(p.y[0]);
  }
  CHECK(ks_uniform(us) < 0.01);
  CHECK(ks_uniform(ys) < 0.01);

  auto a = SuspensionSystem::over_model(get_model("doubling-quadratic"));
  CHECK(a.mean_roof() == Approx(13.0 / 6.0).epsilon(1e-6));
  auto sa = sample_invariant(a, 100000, 5);
  std::vector<double> fracs;
  double mean_r = 0.0;
  for (const SuspPoint& p : sa) {
    fracs.push_back(p.u / a.roof(p.y));
    mean_r += a.roof(p.y);
  }
  mean_r /= static_cast<double>(sa.size());
  CHECK(ks_uniform(fracs) < 0.01);

  // the roof seen from mu^r is length-biased: E r = int r^2 f0 / rbar
  GridFunction r2(1, 1 << 12);
  const auto& m = a.model();
  GridFunction g = GridFunction::sample(1, 1 << 12, [&](const Pt& y) {
    const double r = m.roof.eval(y, 1);
    return cplx{r * r * a.invariant_density(y), 0.0};
  });
  const double expect = g.integral().real() / a.mean_roof();
  CHECK(mean_r == Approx(expect).epsilon(0.002));

  CHECK(sample_invariant(a, 0, 1).empty());
}

TEST_CASE("constant observables have identically zero correlation") {
  auto s = SuspensionSystem::over_model(get_model("doubling-quadratic"));
  auto v = make_observable("constant");
  auto cs = correlation_series(s, v, v, grid_times(3.0, 0.5), 640, 7);
  for (double r : cs.rho) CHECK(r == 0.0);
  for (double e : cs.se) CHECK(e == 0.0);
  auto fit = decay_fit(cs);
  CHECK(fit.points == 0);
  CHECK(fit.verdict == "indeterminate");
}

TEST_CASE("constant roof gives circle recurrence, not decay") {
  auto s = SuspensionSystem::over_model(get_model("doubling-constant"));
  auto v = make_observable("height-wave", 1);
  auto cs = correlation_series(s, v, v, grid_times(30.0, 0.5), 200000, 42);

  // the height phase rotates at unit speed on a circle of circumference 2
  double worst = 0.0, amp_late = 0.0;
  for (std::size_t i = 0; i < cs.t.size(); ++i) {
    worst = std::max(worst, std::abs(cs.rho[i] - 0.5 * std::cos(M_PI * cs.t[i])));
    if (cs.t[i] > 10.0) amp_late = std::max(amp_late, std::abs(cs.rho[i]));
  }
  CHECK(worst < 5e-3);
  CHECK(cs.rho[0] == Approx(0.5).epsilon(0.01));
  CHECK(amp_late > 0.1 * std::abs(cs.rho[0]));

  auto fit = decay_fit(cs);
  CHECK(fit.points >= 10);
  CHECK(fit.verdict == "no-decay-detected");
}

TEST_CASE("quadratic roof decorrelates the base wave exponentially") {
  auto s = SuspensionSystem::over_model(get_model("doubling-quadratic"));
  auto v = make_observable("base-wave", 3);
  auto cs = correlation_series(s, v, v, grid_times(15.0, 0.125), 200000, 42);
  auto fit = decay_fit(cs);
  CHECK(fit.verdict == "exponential");
  CHECK(fit.points >= 12);
  CHECK(fit.c > 1.0);
  CHECK(fit.c < 3.5);
  CHECK(fit.r2 >= 0.9);
}

TEST_CASE("decay fits recover synthetic rates") {
  CorrelationSeries cs;
  for (int i = 0; i <= 40; ++i) {
    const double t = 0.25 * i;
    cs.t.push_back(t);
    cs.rho.push_back(2.0 * std::exp(-0.7 * t));
    cs.se.push_back(1e-12);
  }
  auto fit = decay_fit(cs);
  CHECK(fit.verdict == "exponential");
  CHECK(fit.c == Approx(0.7).epsilon(1e-9));
  CHECK(fit.C == Approx(2.0).epsilon(1e-9));
  CHECK(fit.r2 > 0.999999);

  CorrelationSeries flat;
  for (int i = 0; i <= 40; ++i) {
    flat.t.push_back(0.25 * i);
    flat.rho.push_back((i % 2 ? 1.0 : -1.0) * 1e-5);
    flat.se.push_back(1e-4);
  }
  CHECK(decay_fit(flat).verdict == "indeterminate");

  CorrelationSeries rising;
  for (int i = 0; i <= 40; ++i) {
    const double t = 0.25 * i;
    rising.t.push_back(t);
    rising.rho.push_back(0.01 * std::exp(0.3 * t));
    rising.se.push_back(1e-12);
  }
  CHECK(decay_fit(rising).verdict == "no-decay-detected");
}

TEST_CASE("distortion vanishes for constant and coboundary roofs") {
  auto quad = SuspensionSystem::over_model(get_model("solenoid-skew"));

  models::ModelSystem mc = get_model("solenoid-skew");
  mc.roof = models::RoofFunction{.constant = 2.0};
  auto cons = SuspensionSystem::over_model(mc);

  models::ModelSystem mb = get_model("solenoid-skew");
  mb.roof = coboundary_roof();
  auto cob = SuspensionSystem::over_model(mb);

  for (int i = 0; i < 20; ++i) {
    auto [x1, x2] = close_pair(quad, i);

    LeafPoint c1 = make_leaf_point(cons, x1.y, x1.past);
    LeafPoint c2 = make_leaf_point(cons, x2.y, x2.past);
    CHECK(temporal_distortion(cons, c1, c2).D == 0.0);

    LeafPoint b1 = make_leaf_point(cob, x1.y, x1.past);
    LeafPoint b2 = make_leaf_point(cob, x2.y, x2.past);
    auto d = temporal_distortion(cob, b1, b2);
    CHECK(std::abs(d.D) < 1e-8);

    // truncation forced well short of convergence: the depth-doubled sum
    // must agree within the stated geometric tail bounds
    auto d12 = temporal_distortion(cob, b1, b2, 1e-300, 12);
    auto d24 = temporal_distortion(cob, b1, b2, 1e-300, 24);
    CHECK(d12.depth == 12);
    CHECK(d24.depth == 24);
    CHECK(std::abs(d12.D - d24.D) <= d12.err_bound + d24.err_bound + 1e-15);
  }
}

TEST_CASE("quadratic roof has nonvanishing distortion") {
  auto s = SuspensionSystem::over_model(get_model("solenoid-skew"));
  double max_d = 0.0;
  for (int i = 0; i < 20; ++i) {
    auto [x1, x2] = close_pair(s, i);
    auto d = temporal_distortion(s, x1, x2);
    CHECK(std::abs(d.D) > 0.0);
    CHECK(d.err_bound < 1e-11);
    max_d = std::max(max_d, std::abs(d.D));
  }
  CHECK(max_d > 1e-3);

  // same leaf: the two backward series cancel term by term
  auto [x1, x2] = close_pair(s, 99);
  LeafPoint x2s = make_leaf_point(s, x2.y, x1.past);
  CHECK(temporal_distortion(s, x1, x2s).D == 0.0);

  // coincident points short-circuit before any chain is walked
  auto diag = temporal_distortion(s, x1, x1);
  CHECK(diag.D == 0.0);
  CHECK(diag.depth == 0);
}

TEST_CASE("local products stay on the unstable leaf of the first point") {
  auto s = SuspensionSystem::over_model(get_model("solenoid-skew"));
  auto [x1, x2] = close_pair(s, 3);
  LeafPoint br = local_product(s, x1, x2);
  CHECK(br.y[0] == x2.y[0]);
  const auto z = s.leaf_fiber(br.y, x1.past);
  CHECK(br.z[0] == z[0]);
  CHECK(br.z[1] == z[1]);

  LeafPoint self = local_product(s, x1, x1);
  CHECK(self.y[0] == x1.y[0]);
  CHECK(self.z[0] == x1.z[0]);

  LeafPoint far1 = make_leaf_point(s, pt1(0.05), x1.past);
  LeafPoint far2 = make_leaf_point(s, pt1(0.95), x2.past);
  CHECK_THROWS_AS((void)local_product(s, far1, far2), check_error);
  CHECK_THROWS_AS((void)temporal_distortion(s, far1, far2), check_error);

  auto a = SuspensionSystem::over_model(get_model("doubling-quadratic"));
  CHECK_THROWS_AS((void)sample_leaf_point(a, 1), check_error);
}

TEST_CASE("coboundary fits recover planted transfer functions") {
  auto fit_b = cohomology_probe(get_model("doubling-constant"), 8);
  CHECK(fit_b.residual < 1e-10);
  CHECK(fit_b.l2_residual <= fit_b.residual + 1e-15);
  for (double z : fit_b.zeta) CHECK(z == Approx(2.0).epsilon(1e-8));
  for (double c : fit_b.xi_cos) CHECK(std::abs(c) < 1e-8);
  for (double c : fit_b.xi_sin) CHECK(std::abs(c) < 1e-8);

  models::ModelSystem planted = get_model("doubling-constant");
  planted.roof = coboundary_roof();
  auto fit_p = cohomology_probe(planted, 8);
  CHECK(fit_p.residual < 1e-10);
  for (double z : fit_p.zeta) CHECK(z == Approx(2.0).epsilon(1e-8));
  for (int i = 0; i <= 16; ++i) {
    const double y = i / 16.0;
    CHECK(fit_p.xi_eval(y) == Approx(0.1 * std::sin(2.0 * M_PI * y)).scale(1.0).epsilon(1e-6));
  }
}

TEST_CASE("quadratic roof is not a coboundary at any fitted degree") {
  auto f8 = cohomology_probe(get_model("doubling-quadratic"), 8);
  auto f32 = cohomology_probe(get_model("doubling-quadratic"), 32);
  CHECK(f8.residual > 0.01);
  CHECK(f32.residual > 0.01);
  CHECK(f8.residual < 1.0);
  CHECK(std::abs(f8.residual - f32.residual) < 0.01);
  CHECK(f32.l2_residual <= f32.residual + 1e-15);
}

TEST_CASE("fitted coboundaries telescope along backward chains") {
  models::ModelSystem planted = get_model("doubling-constant");
  planted.roof = coboundary_roof();
  auto fit = cohomology_probe(planted, 8);
  REQUIRE(fit.residual < 1e-10);

  // sum_{j<=J} {r(z_j) - r(z_j')} collapses to the boundary terms of xi
  Pt a = pt1(0.3), b = pt1(0.37);
  const Pt a0 = a, b0 = b;
  double acc = 0.0;
  const int J = 12;
  for (int j = 0; j < J; ++j) {
    const int br = j % 2;
    a = planted.branches.eval(br, a).point;
    b = planted.branches.eval(br, b).point;
    acc += planted.roof.eval(a, 1) - planted.roof.eval(b, 1);
  }
  const double expect = fit.xi_eval(a0[0]) - fit.xi_eval(b0[0]) -
                        fit.xi_eval(a[0]) + fit.xi_eval(b[0]);
  CHECK(acc == Approx(expect).scale(1.0).epsilon(2.0 * J * fit.residual + 1e-9));
}

TEST_CASE("uni bound and coboundary residual tell the same story") {
  std::vector<models::ModelSystem> ms = {get_model("doubling-quadratic"),
                                         get_model("doubling-constant")};
  auto rep = uni_cohomology_consistency(ms, 32, 12, 1);
  REQUIRE(rep.rows.size() == 2);
  CHECK(rep.degree == 32);
  CHECK(rep.pairs == 12);
  CHECK(!rep.any_flagged);

  const auto& a = rep.rows[0];
  CHECK(a.E > 0.4);
  CHECK(a.residual > 0.01);
  CHECK(a.max_abs_D > 1e-3);
  CHECK(!a.flagged);

  const auto& b = rep.rows[1];
  CHECK(b.E < 1e-6);
  CHECK(b.residual < 1e-9);
  CHECK(b.max_abs_D < 1e-9);
  CHECK(!b.flagged);

  auto empty = uni_cohomology_consistency({}, 8, 4, 1);
  CHECK(empty.rows.empty());
  CHECK(!empty.any_flagged);
}

TEST_CASE("suspension over the induced return maps") {
  auto amb = inducing::make_ambient(get_model("doubling-quadratic"));
  auto c = inducing::derive_constants(amb);
  auto res = inducing::build_inducing(amb, c, 10, 12);
  auto s = suspend(res);

  CHECK(s.induced());
  CHECK(s.arity() == 2);
  CHECK(!s.has_fiber());
  CHECK(s.tail_gamma() > 0.0);
  CHECK(s.tail_gamma() < 1.0);
  CHECK(s.admissible_eps() == -std::log(s.tail_gamma()));
  CHECK(s.roof_inf() >= 1.0);
  CHECK(s.roof_sup() <= 10.0);

  double wsum = 0.0;
  std::int64_t nfin = 0;
  const auto& st = res.state;
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(st.ret.size()); ++i) {
    if (st.ret[i] <= 0) continue;
    wsum += st.ret[i];
    ++nfin;
    if (nfin <= 50) CHECK(s.roof(st.center(i)) == static_cast<double>(st.ret[i]));
  }
  CHECK(s.mean_roof() == Approx(wsum / static_cast<double>(nfin)).epsilon(1e-12));

  auto pts = sample_invariant(s, 1000, 3);
  for (const SuspPoint& p : pts) {
    const double r = s.roof(p.y);
    CHECK(p.u >= 0.0);
    CHECK(p.u < r);
    // height translation below the roof is exact and keeps the base fixed
    SuspPoint q = flow_step(s, p, 0.5 * (r - p.u));
    CHECK(q.y[0] == p.y[0]);
    CHECK(q.u == p.u + 0.5 * (r - p.u));
  }

  // a single generation leaves too few resolved rows to certify the tail
  auto res1 = inducing::build_inducing(amb, c, 1, 12);
  CHECK_THROWS_AS((void)SuspensionSystem::over_inducing(res1), check_error);
}

TEST_CASE("construction gates reject unusable systems") {
  CHECK_NOTHROW((void)suspend(get_model("doubling-quadratic")));

  // unbounded roof: the suspension exists but cannot be sampled
  auto g = SuspensionSystem::over_model(get_model("gauss"));
  CHECK(g.roof_sup() == HUGE_VAL);
  CHECK(std::isfinite(g.mean_roof()));
  CHECK_THROWS_AS((void)sample_invariant(g, 10, 1), check_error);

  models::RoofFunction bad;
  bad.constant = -1.0;
  CHECK_THROWS_AS(
      (void)SuspensionSystem::over_model_with_roof(get_model("doubling-constant"), bad),
      check_error);
}

TEST_CASE("observable catalog evaluates and stays bounded") {
  auto s = SuspensionSystem::over_model(get_model("doubling-quadratic"));
  std::mt19937_64 rng = rng_stream(13, 0);

  auto bw = make_observable("base-wave", 1);
  auto hw = make_observable("height-wave", 1);
  auto hi = make_observable("height-indicator", 0.5);
  auto co = make_observable("coordinate", 0);
  for (int i = 0; i < 200; ++i) {
    SuspPoint p = s.draw(rng);
    CHECK(std::abs(bw.eval(s, p)) <= 1.0);
    CHECK(std::abs(hw.eval(s, p)) <= 1.0);
    const double ind = hi.eval(s, p);
    CHECK((ind == 0.0 || ind == 1.0));
    CHECK(co.eval(s, p) == p.y[0]);
  }

  // continuity across the roof identification: the window vanishes at both
  // ends, the height wave returns to its u = 0 value
  SuspPoint top;
  top.y = pt1(0.3);
  top.u = 0.0;
  CHECK(bw.eval(s, top) == 0.0);
  CHECK(hw.eval(s, top) == 1.0);
  top.u = s.roof(top.y) * (1.0 - 1e-12);
  CHECK(std::abs(bw.eval(s, top)) < 1e-9);
  CHECK(hw.eval(s, top) == Approx(1.0).epsilon(1e-9));

  CHECK_THROWS_AS((void)make_observable("no-such-observable"), check_error);

  CHECK(observable_norm(s, make_observable("constant"), 0, 200, 4) ==
        Approx(1.0).epsilon(1e-9));
  const double n0 = observable_norm(s, bw, 0, 400, 4);
  const double n1 = observable_norm(s, bw, 1, 400, 4);
  CHECK(n0 > 1.0);
  CHECK(n0 < 30.0);
  CHECK(n1 > n0);
  CHECK(n1 < 100.0);
}

TEST_CASE("correlation series is deterministic across executors") {
  auto s = SuspensionSystem::over_model(get_model("doubling-quadratic"));
  auto v = make_observable("base-wave", 1);
  auto w = make_observable("height-wave", 1);
  auto tg = grid_times(4.0, 0.5);
  auto c1 = correlation_series(s, v, w, tg, 2000, 9, Exec::Serial);
  auto c2 = correlation_series(s, v, w, tg, 2000, 9, Exec::Parallel);
  CHECK(c1.mean_v == c2.mean_v);
  CHECK(c1.mean_w == c2.mean_w);
  REQUIRE(c1.rho.size() == c2.rho.size());
  for (std::size_t i = 0; i < c1.rho.size(); ++i) {
    CHECK(c1.rho[i] == c2.rho[i]);
    CHECK(c1.se[i] == c2.se[i]);
  }

  auto p1 = sample_invariant(s, 500, 11, Exec::Serial);
  auto p2 = sample_invariant(s, 500, 11, Exec::Parallel);
  for (std::size_t i = 0; i < p1.size(); ++i) {
    CHECK(p1[i].y[0] == p2[i].y[0]);
    CHECK(p1[i].u == p2[i].u);
  }
}

TEST_CASE("degenerate correlation requests are rejected") {
  auto s = SuspensionSystem::over_model(get_model("doubling-quadratic"));
  auto v = make_observable("constant");
  CHECK_THROWS_AS((void)correlation_series(s, v, v, {}, 100, 1), check_error);
  CHECK_THROWS_AS((void)correlation_series(s, v, v, {-1.0, 0.0}, 100, 1), check_error);
  CHECK_THROWS_AS((void)correlation_series(s, v, v, {1.0, 0.5}, 100, 1), check_error);
  CHECK_THROWS_AS((void)correlation_series(s, v, v, {0.0, 1.0}, 8, 1), check_error);
  CHECK_THROWS_AS((void)observable_norm(s, v, 3, 10, 1), check_error);
  CHECK_THROWS_AS((void)observable_norm(s, v, 0, 0, 1), check_error);
}
