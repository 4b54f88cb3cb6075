#include "eqmollify/currents.hpp"
#include "eqmollify/scenarios.hpp"

#include <catch_amalgamated.hpp>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>

using namespace eqmollify;
using Catch::Approx;

namespace {

using Form = TestForm<2>;

Form zero_form(std::function<double(const Vec<2>&)> f, double radius = 3.0) {
  return Form(0, {std::move(f)}, Vec<2>::Zero(), radius);
}

Form one_form(std::function<double(const Vec<2>&)> a, std::function<double(const Vec<2>&)> b, double radius = 3.0) {
  return Form(1, {std::move(a), std::move(b)}, Vec<2>::Zero(), radius);
}

Frame<2> column(double a, double b) {
  Frame<2> f(2, 1);
  f << a, b;
  return f;
}

const ChartCutoff<2> unit_chart{};

}  // namespace

TEST_CASE("evaluating currents on forms", "[currents]") {
  const Form w0 = zero_form([](const Vec<2>& x) { return 1.0 + x[0] * x[1]; });
  CHECK(evaluate(Current<2>::point_mass(Vec<2>(0.5, 2.0), 3.0), w0) == Approx(6.0).epsilon(1e-15));

  const Form w1 = one_form([](const Vec<2>& x) { return x[1]; }, [](const Vec<2>& x) { return 2.0 * x[0]; });
  CHECK(evaluate(Current<2>::dirac(Vec<2>(1.0, 0.5), column(2.0, 3.0)), w1) == Approx(0.5 * 2 + 2.0 * 3).epsilon(1e-15));

  // segment (0,0) -> (1,1): int_0^1 (t + 2t) dt = 1.5
  const auto seg = Current<2>::polyhedral(1, {{Vec<2>(0, 0), Vec<2>(1, 1)}}, {1.0});
  CHECK(evaluate(seg, w1) == Approx(1.5).epsilon(1e-13));
  // circulation of -x2 dx1 + x1 dx2 around a square of side 2a is 2 * area
  const Form rot = one_form([](const Vec<2>& x) { return -x[1]; }, [](const Vec<2>& x) { return x[0]; });
  CHECK(evaluate(square_loop(0.2), rot) == Approx(2.0 * 0.16).epsilon(1e-13));
  // triangle area
  const Form area(2, {[](const Vec<2>&) { return 1.0; }}, Vec<2>::Zero(), 3.0);
  const auto tri = Current<2>::polyhedral(2, {{Vec<2>(0, 0), Vec<2>(1, 0), Vec<2>(0, 1)}}, {1.0});
  CHECK(evaluate(tri, area) == Approx(0.5).epsilon(1e-13));

  CHECK_THROWS_AS(evaluate(seg, w0), InputError);
  CHECK_THROWS_AS(Current<2>::point_mass(Vec<2>::Zero()) + seg, InputError);
  CHECK_THROWS_AS(Form(1, {[](const Vec<2>&) { return 1.0; }}, Vec<2>::Zero(), 1.0), InputError);
  CHECK_THROWS_AS(Current<2>::polyhedral(1, {{Vec<2>(0, 0), Vec<2>(0, 0)}}, {1.0}), InputError);
  CHECK(Form(0, {[](const Vec<2>&) { return 1.0; }}, Vec<2>::Zero(), 1.0)(Vec<2>(1.0, 0.0)) == 0.0);
}

TEST_CASE("pushforward through maps", "[currents]") {
  const Form w = one_form([](const Vec<2>& x) { return x[0]; }, [](const Vec<2>& x) { return x[0] * x[1]; });
  const auto t = Current<2>::polyhedral(1, {{Vec<2>(0.1, 0.0), Vec<2>(0.3, 0.2)}}, {1.0});
  CHECK(pushforward_pairing(t, IdentityMap<2>{}, w) == evaluate(t, w));
  const Vec<2> y(0.2, -0.1);
  const auto moved = Current<2>::polyhedral(1, {{Vec<2>(0.3, -0.1), Vec<2>(0.5, 0.1)}}, {1.0});
  CHECK(pushforward_pairing(t, Translation<2>{y}, w) == Approx(evaluate(moved, w)).epsilon(1e-13));
  const Mat<2> r = GroupAction<2>::rotation(0.7);
  CHECK(pushforward_pairing(t, LinearMap<2>{r}, w) == Approx(evaluate(t, w.pullback(r))).epsilon(1e-13));
  // the shift map is a translation on the inner ball
  const ShiftMap<2> s(Vec<2>(0.02, 0.01));
  const auto inner = Current<2>::dirac(Vec<2>(0.1, 0.1), column(1.0, -1.0));
  const auto inner_moved = Current<2>::dirac(Vec<2>(0.12, 0.11), column(1.0, -1.0));
  CHECK(pushforward_pairing(inner, s, w) == Approx(evaluate(inner_moved, w)).epsilon(1e-14));
  CHECK_THROWS_AS(pushforward_pairing(Current<2>::point_mass(Vec<2>::Zero()), s, w), InputError);
}

TEST_CASE("translation smoothing of a point mass", "[currents]") {
  const auto delta = Current<2>::point_mass(Vec<2>::Zero());
  for (double eps : {0.2, 0.1, 0.05}) {
    const MollifierKernel<2> k(eps, 5);
    CHECK(smooth_Z(delta, zero_form([](const Vec<2>&) { return 1.0; }), k) == Approx(1.0).margin(1e-6));
    CHECK(std::abs(smooth_Z(delta, zero_form([](const Vec<2>& x) { return x[0]; }), k)) <= 1e-8);
    CHECK(smooth_Z(delta, zero_form([](const Vec<2>& x) { return x.squaredNorm(); }), k) / (eps * eps) ==
          Approx(0.26131120342055864625).epsilon(1e-6));
  }
}

TEST_CASE("shift smoothing is exact away from the ball", "[currents]") {
  const MollifierKernel<2> k(0.1);
  const Form w = zero_form([](const Vec<2>& x) { return std::cos(x[0]) + x[1]; });
  for (const Vec<2>& p : {Vec<2>(0.85, 0.0), Vec<2>(0.0, -1.2), Vec<2>(2.0, 0.5)}) {
    const auto t = Current<2>::point_mass(p);
    CHECK(smooth_Z_tilde(t, w, k) == evaluate(t, w));
  }
  const auto inner = Current<2>::point_mass(Vec<2>(0.1, -0.05));
  CHECK(smooth_Z_tilde(inner, zero_form([](const Vec<2>&) { return 1.0; }), k) == Approx(1.0).margin(1e-6));
  // inside the translation region it coincides with Z
  CHECK(smooth_Z_tilde(inner, w, k) == Approx(smooth_Z(inner, w, k)).epsilon(1e-12));

  // error against the unsmoothed pairing shrinks with eps
  const Form g = zero_form([](const Vec<2>& x) { return std::exp(x[0]) * std::sin(3 * x[1] + 0.2); });
  double prev = std::numeric_limits<double>::infinity();
  for (double eps : {0.2, 0.1, 0.05, 0.025}) {
    const double e = std::abs(smooth_Z_tilde(inner, g, MollifierKernel<2>(eps)) - evaluate(inner, g));
    CHECK(prev / e >= 1.3);
    prev = e;
  }
}

TEST_CASE("localization splits the current", "[currents]") {
  const auto t = Current<2>::polyhedral(1, {{Vec<2>(-1.2, 0.1), Vec<2>(1.3, 0.2)}}, {1.0});
  const auto [near, far] = localize(t, unit_chart);
  const Form w = one_form([](const Vec<2>& x) { return 1.0 + x[1]; }, [](const Vec<2>& x) { return x[0]; });
  CHECK(evaluate(near, w) + evaluate(far, w) == Approx(evaluate(t, w)).margin(1e-8));
  const auto p_in = Current<2>::point_mass(Vec<2>(0.2, 0.1));
  const auto p_out = Current<2>::point_mass(Vec<2>(1.5, 0.0));
  const Form one = zero_form([](const Vec<2>&) { return 1.0; });
  CHECK(evaluate(localize(p_in, unit_chart).first, one) == 1.0);
  CHECK(evaluate(localize(p_in, unit_chart).second, one) == 0.0);
  CHECK(evaluate(localize(p_out, unit_chart).first, one) == 0.0);
  CHECK(evaluate(localize(p_out, unit_chart).second, one) == 1.0);
}

TEST_CASE("equivariant smoothing", "[currents]") {
  const MollifierKernel<2> k(0.1);
  const auto z4 = GroupAction<2>::cyclic_rotations(4);
  const auto t = orbit_dirac0();
  const Form w = zero_form([](const Vec<2>& x) { return std::exp(x[0]) + x[0] * x[1] * x[1]; });

  const auto asym = Current<2>::polyhedral(1, {{Vec<2>(0.1, 0.0), Vec<2>(0.3, 0.25)}}, {1.0});
  const Form w1 = one_form([](const Vec<2>& x) { return std::cos(x[1]); }, [](const Vec<2>& x) { return x[0]; });
  CHECK(equivariant_Z(asym, w1, k, unit_chart, GroupAction<2>::trivial()) ==
        Approx(localized_Z(asym, w1, k, unit_chart)).epsilon(1e-14));

  CHECK(equivariant_Z(t, zero_form([](const Vec<2>&) { return 1.0; }), k, unit_chart, z4) == Approx(4.0).margin(1e-6));
  const double base = equivariant_Z(t, w, k, unit_chart, z4);
  for (const auto& g : z4.elements()) CHECK(std::abs(equivariant_Z(t, w.pullback(g), k, unit_chart, z4) - base) <= 1e-10);

  CHECK_THROWS_AS(equivariant_Z(Current<2>::point_mass(Vec<2>(0.2, 0.1)), w, k, unit_chart, z4), InputError);
}

TEST_CASE("invariance residual", "[currents]") {
  const auto z4 = GroupAction<2>::cyclic_rotations(4);
  const std::vector<Form> forms{zero_form([](const Vec<2>& x) { return x[0] + 2 * x[1] * x[1]; })};
  CHECK(invariance_residual(orbit_dirac0(), z4, forms) <= 1e-12);
  CHECK(invariance_residual(Current<2>::point_mass(Vec<2>(0.3, 0.0)), z4, forms) > 0.1);
  const std::vector<Form> forms1{one_form([](const Vec<2>& x) { return x[1]; }, [](const Vec<2>& x) { return x[0] * x[0]; })};
  CHECK(invariance_residual(orbit_dirac1(), z4, forms1) <= 1e-12);
  CHECK(invariance_residual(square_loop(), z4, forms1) <= 1e-12);
}

TEST_CASE("linearity and support of the smoothed current", "[currents]") {
  const MollifierKernel<2> k(0.1);
  const auto a = Current<2>::polyhedral(1, {{Vec<2>(0.0, 0.1), Vec<2>(0.2, 0.3)}}, {1.0});
  const auto b = Current<2>::dirac(Vec<2>(-0.2, 0.1), column(0.5, 1.0));
  const Form w = one_form([](const Vec<2>& x) { return std::sin(x[0] + 1); }, [](const Vec<2>& x) { return x[1] * x[1]; });
  const double lhs = localized_Z(a * 2.0 + b * -3.0, w, k, unit_chart);
  const double rhs = 2.0 * localized_Z(a, w, k, unit_chart) - 3.0 * localized_Z(b, w, k, unit_chart);
  CHECK(std::abs(lhs - rhs) <= 1e-10);

  // forms supported away from the eps-neighbourhood see nothing
  const auto p = Current<2>::point_mass(Vec<2>(0.1, 0.0));
  const Form far(0, {[](const Vec<2>&) { return 1.0; }}, Vec<2>(0.4, 0.0), 0.18);
  CHECK(smooth_Z_tilde(p, far, k) == 0.0);
  CHECK(localized_Z(p, far, k, unit_chart) == 0.0);
  const Form near(0, {[](const Vec<2>&) { return 1.0; }}, Vec<2>(0.3, 0.0), 0.15);
  CHECK(smooth_Z_tilde(p, near, k) > 0.0);
}

TEST_CASE("smoothed point mass depends smoothly on the probe position", "[currents]") {
  // Z delta_0 paired with a narrow bump centred at c behaves like f_eps(c)
  const MollifierKernel<2> k(0.2, 5);
  const auto delta = Current<2>::point_mass(Vec<2>::Zero());
  const auto probe = [&](double c) {
    const Form w(0, {[c](const Vec<2>& x) { return unnormalized_bump((x - Vec<2>(c, 0.0)).norm() / 0.05); }},
                 Vec<2>(c, 0.0), 0.05);
    return smooth_Z(delta, w, k);
  };
  const double h = 0.01;
  double worst_jump = 0.0;
  for (int i = 1; i < 14; ++i) {
    const double c = i * h;
    const double d2 = probe(c + h) - 2 * probe(c) + probe(c - h);
    worst_jump = std::max(worst_jump, std::abs(d2));
  }
  CHECK(worst_jump <= 0.1 * std::abs(probe(0.0)));
}

TEST_CASE("form bank pairings against an independent quadrature", "[currents]") {
  boost::math::quadrature::gauss_kronrod<double, 31> gk;
  const auto bank = standard_form_bank();
  REQUIRE(bank.size() == 24);
  const auto loop = square_loop(0.2);
  const double a = 0.2;
  for (const auto& [name, w] : bank) {
    if (w.degree() != 1) continue;
    const auto edge = [&](Vec<2> p, Vec<2> q) {
      const Vec<2> d = q - p;
      return gk.integrate([&](double t) { return w.pair(p + t * d, Frame<2>(d)); }, 0.0, 1.0);
    };
    const double oracle = edge(Vec<2>(-a, -a), Vec<2>(a, -a)) + edge(Vec<2>(a, -a), Vec<2>(a, a)) +
                          edge(Vec<2>(a, a), Vec<2>(-a, a)) + edge(Vec<2>(-a, a), Vec<2>(-a, -a));
    INFO(name);
    CHECK(evaluate(loop, w) == Approx(oracle).margin(1e-12));
  }
  const auto p = orbit_dirac0();
  for (const auto& [name, w] : bank) {
    if (w.degree() != 0) continue;
    double s = 0.0;
    for (int kk = 0; kk < 4; ++kk) {
      const Vec<2> q = GroupAction<2>::rotation(0.5 * pi * kk) * Vec<2>(0.2 * std::cos(0.3), 0.2 * std::sin(0.3));
      s += w(q);
    }
    INFO(name);
    CHECK(evaluate(p, w) == Approx(s).epsilon(1e-14));
  }
}
