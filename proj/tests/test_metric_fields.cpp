#include "eqmollify/metric_fields.hpp"
#include "eqmollify/scenarios.hpp"

#include <catch_amalgamated.hpp>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>

using namespace eqmollify;
using Catch::Approx;

namespace {

double entry_gap(const Mat<2>& a, const Mat<2>& b) { return max_abs(Mat<2>(a - b)); }

// int f_eps(y) phi(|x + R y|^2) dy by nested adaptive quadrature in polar coordinates
double polar_oracle(const Vec<2>& x, double radius, double eps) {
  boost::math::quadrature::gauss_kronrod<double, 31> gk;
  const BumpProfile prof = BumpProfile::for_dimension(2);
  const auto inner = [&](double r) {
    const double ang = gk.integrate([&](double t) {
      const Vec<2> z = x + radius * r * Vec<2>(std::cos(t), std::sin(t));
      return radial_c11_profile::phi(z.squaredNorm())[0];
    }, 0.0, 2.0 * pi, 10, 1e-12);
    return prof.psi(r / eps) / (eps * eps) * r * ang;
  };
  return gk.integrate(inner, 0.0, eps, 10, 1e-12);
}

const AtlasChart<2> chart3 = centered_chart(3.0);

}  // namespace

TEST_CASE("pullback metrics", "[metric]") {
  const auto e = euclidean_metric<2>();
  Mat<2> a;
  a << 1.0, 2.0, 0.5, -1.0;
  const auto pulled = pullback_metric(e, LinearMap<2>{a});
  CHECK(entry_gap(pulled(Vec<2>(0.3, 0.1)), a.transpose() * a) <= 1e-15);
  const auto s = sphere_chart_metric();
  const Vec<2> y(0.2, -0.3), x(0.1, 0.4);
  CHECK(entry_gap(pullback_metric(s, Translation<2>{y})(x), s(Vec<2>(x + y))) == 0.0);
  const Mat<2> r = GroupAction<2>::rotation(0.4);
  CHECK(entry_gap(pullback_metric(s, LinearMap<2>{r})(x), s(x)) <= 1e-15);
  CHECK_THROWS_AS(pullback_metric(poincare_ball_metric(), Translation<2>{Vec<2>(1.0, 0.0)})(Vec<2>(0.5, 0.0)),
                  InputError);
}

TEST_CASE("H-tilde is exact off the shifting region and fixes constants", "[metric]") {
  const MollifierKernel<2> k(0.1);
  const auto s = sphere_chart_metric();
  const auto h = H_tilde_eps(s, k);
  for (const Vec<2>& x : {Vec<2>(0.9, 0.0), Vec<2>(0.0, radial::shift_threshold), Vec<2>(1.5, -2.0)})
    CHECK(entry_gap(h(x), s(x)) == 0.0);
  Mat<2> c;
  c << 2.0, 0.3, 0.3, 1.0;
  const auto hc = H_tilde_eps(constant_metric<2>(c), k);
  for (const Vec<2>& x : {Vec<2>(0.0, 0.0), Vec<2>(0.1, 0.2), Vec<2>(-0.2, 0.05)})
    CHECK(entry_gap(hc(x), c) <= 1e-14);
  // also in the blend region, where the shifts are no longer translations
  CHECK(entry_gap(H_tilde_eps(euclidean_metric<2>(), k)(Vec<2>(0.5, 0.1)), Mat<2>::Identity()) > 0.0);
}

TEST_CASE("chart H-tilde of the C11 metric matches an independent polar quadrature", "[metric]") {
  const auto g = radial_c11_metric();
  for (double eps : {0.05, 0.025}) {
    const MollifierKernel<2> k(eps, 6);
    const auto h = chart_H_tilde(g, chart3, k);
    for (const Vec<2>& x : {Vec<2>(0.45, 0.0), Vec<2>(0.3, 0.3), Vec<2>(0.0, 0.8)}) {
      const double oracle = polar_oracle(x, chart3.radius, eps);
      INFO("eps " << eps << " x " << x.transpose());
      CHECK(entry_gap(h(x), oracle * Mat<2>::Identity()) <= 1e-6 * oracle);
    }
  }
}

TEST_CASE("H_e_i is local to the chart", "[metric]") {
  const MollifierKernel<2> k(0.05);
  const auto g = sphere_chart_metric();
  const auto he = H_e_i(g, chart3, k);
  for (const Vec<2>& x : {Vec<2>(3.0, 0.0), Vec<2>(0.0, -3.5), Vec<2>(4.0, 4.0)}) {
    const Mat<2> a = he(x), b = g(x);
    CHECK(a(0, 0) == b(0, 0));
    CHECK(a(0, 1) == b(0, 1));
    CHECK(a(1, 1) == b(1, 1));
  }
  // inside the inner region it agrees with the chart H-tilde
  CHECK(entry_gap(he(Vec<2>(0.2, 0.3)), chart_H_tilde(g, chart3, k)(Vec<2>(0.2, 0.3))) <= 1e-14);
}

TEST_CASE("Haar averages", "[metric]") {
  const MollifierKernel<2> k(0.05);
  const auto s = sphere_chart_metric();
  const auto trivial = haar_average_metric(s, chart3, k, GroupAction<2>::trivial());
  const Vec<2> x(0.31, -0.42);
  CHECK(entry_gap(trivial(x), H_e_i(s, chart3, k)(x)) == 0.0);

  const auto z8 = GroupAction<2>::cyclic_rotations(8);
  const auto hg = haar_average_metric(s, chart3, k, z8);
  CHECK(isometry_residual(hg, z8, lattice_grid<2>(Vec<2>::Zero(), 1.0, 9).points) <= 1e-10);

  const auto g = radial_c11_metric();
  const auto h64 = haar_average_metric(g, chart3, k, GroupAction<2>::circle(64));
  const auto h128 = haar_average_metric(g, chart3, k, GroupAction<2>::circle(128));
  for (const Vec<2>& p : {Vec<2>(0.45, 0.0), Vec<2>(0.2, 0.6)}) CHECK(entry_gap(h64(p), h128(p)) <= 1e-8);

  Mat<2> aniso;
  aniso << 1.0, 0.0, 0.0, 2.0;
  CHECK_THROWS_AS(haar_average_metric(constant_metric<2>(aniso), chart3, k, GroupAction<2>::cyclic_rotations(4)),
                  InputError);
}

TEST_CASE("composition over an atlas", "[metric]") {
  const MollifierKernel<2> k(0.05);
  const auto s = sphere_chart_metric();
  const auto z8 = GroupAction<2>::cyclic_rotations(8);
  const auto one = compose_HG(s, {MetricStage<2>{chart3, &k, z8}});
  const Vec<2> x(0.1, 0.7);
  CHECK(entry_gap(one(x), haar_average_metric(s, chart3, k, z8)(x)) == 0.0);

  const Scenario strip = make_scenario("strip_two_charts");
  std::vector<MetricStage<2>> stages;
  for (const auto& c : strip.atlas) stages.push_back({c, &k, strip.group});
  const auto comp = compose_HG(strip.metric, stages);
  double worst = 0.0;
  for (const auto& p : strip.grid(9).points) worst = std::max(worst, entry_gap(comp(p), 2.0 * Mat<2>::Identity()));
  CHECK(worst <= 1e-12);
}

TEST_CASE("Sobolev seminorms", "[metric]") {
  const auto grid = lattice_grid<2>(Vec<2>::Zero(), 1.0, 21);
  CHECK(sobolev_seminorm(constant_metric<2>(3.0 * Mat<2>::Identity()), grid).value == 3.0);
  // (1 + x1^2) delta: value reaches 2, first derivative 2, second 2
  const MetricField<2> q([](const Vec<2>& x) -> Mat<2> { return (1.0 + x[0] * x[0]) * Mat<2>::Identity(); });
  CHECK(q.derivative_mode() == DerivativeMode::FiniteDifference);
  CHECK(sobolev_seminorm(q, grid).value == Approx(2.0).margin(1e-6));
  SeminormOptions l2;
  l2.p = 2.0;
  const double v2 = sobolev_seminorm(q, grid, l2).value;
  CHECK(v2 > 0.0);
  CHECK(v2 < 2.0 * std::sqrt(pi * 2.0 * 2.0) * 2.0);

  SeminormOptions stab;
  stab.check_stability = true;
  const auto r = sobolev_seminorm(radial_c11_metric(), grid, stab);
  CHECK(r.refined_value.has_value());
  CHECK(r.stable);
  CHECK(std::abs(*r.refined_value - r.value) <= 0.1 * r.value);

  SeminormOptions holder;
  holder.order = SeminormOrder::C1Alpha;
  CHECK(sobolev_seminorm(constant_metric<2>(Mat<2>::Identity()), grid, holder).value == 1.0);
  holder.p = 2.0;
  CHECK_THROWS_AS(sobolev_seminorm(q, grid, holder), InputError);
  CHECK_THROWS_AS(sobolev_seminorm(q, SampleGrid<2>{}), InputError);
}

TEST_CASE("smallest eigenvalue over the grid", "[metric]") {
  const auto grid = lattice_grid<2>(Vec<2>::Zero(), 1.0, 11);
  CHECK(a_nu(euclidean_metric<2>(), grid) == 1.0);
  CHECK(a_nu(constant_metric<2>(4.0 * Mat<2>::Identity()), grid) == 4.0);
  double rmax = 0.0;
  for (const auto& x : grid.points) rmax = std::max(rmax, x.norm());
  CHECK(a_nu(sphere_chart_metric(), grid) == Approx(4.0 / std::pow(1.0 + rmax * rmax, 2)).epsilon(1e-14));
  Mat<2> bad;
  bad << 1.0, 0.0, 0.0, -1.0;
  CHECK_THROWS_AS(a_nu(constant_metric<2>(bad), grid), InputError);
}

TEST_CASE("epsilon selection", "[metric]") {
  const auto cands = epsilon_candidates(0.001, 0.1, 21);
  REQUIRE(cands.size() == 21);
  CHECK(cands.front() == 0.1);
  CHECK(cands.back() == Approx(0.001).epsilon(1e-14));

  auto linear = [](double e) { return 100.0 * e; };
  const auto sel = select_epsilon_for_k(linear, 1, 1.0, cands);
  CHECK(sel.found);
  CHECK(sel.epsilon <= 0.01 * (1 + 1e-12));
  CHECK(sel.epsilon > 0.01 / std::pow(100.0, 1.0 / 20.0) * (1 - 1e-12));
  const auto none = select_epsilon_for_k(linear, 1000, 1.0, cands);
  CHECK_FALSE(none.found);
  CHECK(none.seminorm == Approx(0.1).epsilon(1e-12));

  const auto grid = lattice_grid<2>(Vec<2>::Zero(), 1.0, 9);
  SmoothingDistance<2> flat(euclidean_metric<2>(), chart3, GroupAction<2>::cyclic_rotations(4), grid);
  const auto c0 = select_epsilon_for_k(flat, 5, 1.0, epsilon_candidates(0.003, 0.05, 6));
  CHECK(c0.found);
  CHECK(c0.epsilon == 0.05);

  const auto s = sphere_chart_metric();
  const double a = a_nu(s, grid);
  SmoothingDistance<2> dist(s, chart3, GroupAction<2>::cyclic_rotations(8), grid);
  const auto sc = epsilon_candidates(0.003, 0.05, 8);
  double prev = std::numeric_limits<double>::infinity();
  for (int kk : {1, 10, 100}) {
    const auto r = select_epsilon_for_k(dist, kk, a, sc);
    CHECK(r.found);
    CHECK(r.seminorm <= a / kk);
    CHECK(r.epsilon <= prev);
    prev = r.epsilon;
  }
  CHECK_THROWS_AS(select_epsilon_for_k(linear, 0, 1.0, cands), InputError);
  CHECK_THROWS_AS(epsilon_candidates(0.1, 0.01, 3), InputError);
}

TEST_CASE("loss of positive definiteness aborts", "[metric]") {
  const MollifierKernel<2> k(0.1);
  Mat<2> bad;
  bad << 1.0, 0.0, 0.0, -1.0;
  const auto h = H_tilde_eps(constant_metric<2>(bad), k);
  CHECK_THROWS_AS(h(Vec<2>(0.1, 0.0)), NumericalAbort);
  CHECK_NOTHROW(H_tilde_eps(constant_metric<2>(bad), k, false)(Vec<2>(0.1, 0.0)));
  CHECK(is_spd<2>(Mat<2>::Identity()));
  Mat<2> asym;
  asym << 1.0, 0.5, 0.0, 1.0;
  CHECK_FALSE(is_spd<2>(asym));
}
