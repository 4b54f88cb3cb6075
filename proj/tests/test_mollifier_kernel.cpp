#include "eqmollify/mollifier_kernel.hpp"

#include <catch_amalgamated.hpp>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>

using namespace eqmollify;
using Catch::Approx;

namespace {

// pinned with an independent adaptive quadrature (mpmath, 30 digits)
constexpr double lambda1 = 1.2069003224378761753;
constexpr double lambda2 = 1.2681121611275960809;
constexpr double lambda3 = 1.1990039070192139034;
// int f_eps(y) |y|^2 dy / eps^2 in two dimensions
constexpr double second_moment_2d = 0.26131120342055864625;

double boost_lambda(int n) {
  boost::math::quadrature::tanh_sinh<double> ts;
  const double radial = ts.integrate([n](double r) {
    if (r >= 1.0) return 0.0;
    return std::exp(r * r / (r * r - 1.0)) * std::pow(r, n - 1);
  }, 0.0, 1.0);
  return unit_sphere_area(n) * radial;
}

template <int Dim>
double mass_error(double eps, int level) {
  const MollifierKernel<Dim> k(eps, level);
  return std::abs(k.rule().integrate([&](const Vec<Dim>& y) { return k(y); }) - 1.0);
}

}  // namespace

TEST_CASE("normalization constants match the pinned oracle values", "[kernel]") {
  CHECK(normalization_constant(1) == Approx(lambda1).epsilon(1e-13));
  CHECK(normalization_constant(2) == Approx(lambda2).epsilon(1e-13));
  CHECK(normalization_constant(3) == Approx(lambda3).epsilon(1e-13));
  for (int n = 1; n <= 3; ++n) CHECK(normalization_constant(n) == Approx(boost_lambda(n)).epsilon(1e-12));
  CHECK_THROWS_AS(normalization_constant(0), InputError);
  CHECK_THROWS_AS(normalization_constant(2, -1.0), InputError);
}

TEST_CASE("psi values", "[kernel]") {
  const BumpProfile p = BumpProfile::for_dimension(2);
  CHECK(p.psi(0.0) == Approx(1.0 / lambda2).epsilon(1e-14));
  CHECK(p.psi(1.0) == 0.0);
  CHECK(p.psi(-1.0) == 0.0);
  CHECK(p.psi(1.5) == 0.0);
  CHECK(p.psi(0.5) == Approx(std::exp(-1.0 / 3.0) / lambda2).epsilon(1e-14));
  for (int k = 1; k <= 12; ++k) {
    const double t = 1.0 - std::pow(10.0, -k);
    const double v = p.psi(t);
    CHECK(std::isfinite(v));
    CHECK(v >= 0.0);
  }
  CHECK(p.psi(std::nextafter(1.0, 0.0)) == 0.0);
}

TEST_CASE("psi finite differences stay bounded and vanish at the edge", "[kernel]") {
  const auto d = [](int order, double t, double h) {
    const auto f = [](double s) { return unnormalized_bump(s); };
    if (order == 1) return (f(t + h) - f(t - h)) / (2 * h);
    if (order == 2) return (f(t + h) - 2 * f(t) + f(t - h)) / (h * h);
    return (f(t + 2 * h) - 2 * f(t + h) + 2 * f(t - h) - f(t - 2 * h)) / (2 * h * h * h);
  };
  const auto sup = [&](int order, double h) {
    double m = 0.0;
    for (int i = 0; i <= 2000; ++i) m = std::max(m, std::abs(d(order, -0.95 + 1.9 * i / 2000.0, h)));
    return m;
  };
  for (int order = 1; order <= 3; ++order) {
    // bounded: the sup settles as the step shrinks instead of growing like h^-k
    const double a = sup(order, 2e-3), b = sup(order, 1e-3);
    CHECK(std::isfinite(b));
    CHECK(std::abs(a - b) <= 0.05 * b);
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= 6; ++k) {
      const double t = 1.0 - std::pow(10.0, -k);
      const double v = std::abs(d(order, t, 1e-3 * std::pow(10.0, -k)));
      CHECK(v <= prev);
      prev = v;
    }
    CHECK(prev < 1e-10);
  }
}

TEST_CASE("f_eps support, centre value and radial symmetry", "[kernel]") {
  const double eps = 0.1;
  const MollifierKernel<2> k(eps);
  CHECK(k(Vec<2>(eps, 0.0)) == 0.0);
  CHECK(k(Vec<2>(0.0, -eps)) == 0.0);
  CHECK(k(Vec<2>(0.2, 0.3)) == 0.0);
  CHECK(k(Vec<2>::Zero()) == Approx(1.0 / (eps * eps * lambda2)).epsilon(1e-14));
  const Vec<2> x(0.031, -0.047);
  CHECK(k(Vec<2>(-x[1], x[0])) == k(x));
  CHECK(k(Vec<2>(x[0], -x[1])) == k(x));
  CHECK(k(Vec<2>(x[1], x[0])) == k(x));
  const MollifierKernel<3> k3(0.05);
  CHECK(k3(Vec<3>(0.0, 0.05, 0.0)) == 0.0);
  CHECK(k3(Vec<3>::Zero()) == Approx(1.0 / (std::pow(0.05, 3) * lambda3)).epsilon(1e-13));
}

TEST_CASE("kernel mass is one for n = 1, 2, 3", "[kernel]") {
  for (double eps : {0.05, 0.1, 0.2}) {
    CHECK(mass_error<1>(eps, 5) <= 1e-6);
    CHECK(mass_error<2>(eps, 5) <= 1e-6);
    CHECK(mass_error<3>(eps, 5) <= 1e-6);
    CHECK(std::abs(MollifierKernel<2>(eps, 5).mass() - 1.0) <= 1e-6);
  }
}

TEST_CASE("ball quadrature structure", "[kernel]") {
  for (int level = 1; level <= 5; ++level) {
    const auto r1 = ball_quadrature<1>(0.2, level);
    CHECK(r1.size() == (std::size_t{1} << level) + 1);
    CHECK(r1.size() == ball_quadrature_size(1, level));
    CHECK(ball_quadrature<2>(0.2, level).size() == ball_quadrature_size(2, level));
    CHECK(ball_quadrature<3>(0.2, level).size() == ball_quadrature_size(3, level));
  }
  for (double eps : {0.05, 0.2}) {
    const auto r2 = ball_quadrature<2>(eps, 4);
    const auto r3 = ball_quadrature<3>(eps, 3);
    CHECK(r2.integrate([](const Vec<2>&) { return 1.0; }) == Approx(ball_volume(2, eps)).epsilon(1e-10));
    CHECK(r3.integrate([](const Vec<3>&) { return 1.0; }) == Approx(ball_volume(3, eps)).epsilon(1e-10));
    CHECK(ball_quadrature<1>(eps, 4).integrate([](const Vec<1>&) { return 1.0; }) == Approx(2 * eps).epsilon(1e-10));
    for (const auto& y : r2.nodes) CHECK(y.norm() <= eps);
    for (const auto& y : r3.nodes) CHECK(y.norm() <= eps);
    const MollifierKernel<2> k(eps);
    CHECK(std::abs(k.rule().integrate([&](const Vec<2>& y) { return y[0] * k(y); })) <= 1e-10);
    CHECK(std::abs(k.rule().integrate([&](const Vec<2>& y) { return y[1] * k(y); })) <= 1e-10);
  }
  CHECK_THROWS_AS(ball_quadrature<2>(0.1, 0), InputError);
  CHECK_THROWS_AS(ball_quadrature<2>(-0.1, 3), InputError);
  CHECK_THROWS_AS(ball_quadrature_size(4, 3), InputError);
}

TEST_CASE("doubling the level at least halves the mass error", "[kernel]") {
  for (int level = 2; level <= 4; ++level) {
    const double e0 = mass_error<2>(0.1, level), e1 = mass_error<2>(0.1, level + 1);
    if (e0 > 1e-13) CHECK(e1 <= 0.5 * e0);
    const double f0 = mass_error<1>(0.1, level), f1 = mass_error<1>(0.1, level + 1);
    if (f0 > 1e-13) CHECK(f1 <= 0.5 * f0);
  }
}

TEST_CASE("second moment of the planar kernel", "[kernel]") {
  boost::math::quadrature::tanh_sinh<double> ts;
  const double oracle = 2.0 * pi / lambda2 * ts.integrate([](double r) {
    return r >= 1.0 ? 0.0 : std::exp(r * r / (r * r - 1.0)) * r * r * r;
  }, 0.0, 1.0);
  CHECK(oracle == Approx(second_moment_2d).epsilon(1e-12));
  const double eps = 0.1;
  const MollifierKernel<2> k(eps, 5);
  const double m2 = k.rule().integrate([&](const Vec<2>& y) { return y.squaredNorm() * k(y); });
  CHECK(m2 / (eps * eps) == Approx(second_moment_2d).epsilon(1e-6));
}
