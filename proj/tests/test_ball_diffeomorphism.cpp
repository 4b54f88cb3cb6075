#include "eqmollify/ball_diffeomorphism.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace eqmollify;
using Catch::Approx;

namespace {

Mat<2> fd_jacobian(const ShiftMap<2>& s, const Vec<2>& x, double h = 1e-6) {
  Mat<2> j;
  for (int k = 0; k < 2; ++k) {
    Vec<2> e = Vec<2>::Zero();
    e[k] = h;
    j.col(k) = (s(x + e) - s(x - e)) / (2 * h);
  }
  return j;
}

std::vector<Vec<2>> disk_samples(int count, double rmax, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vec<2>> out;
  for (int i = 0; i < count; ++i) {
    const double r = rmax * std::sqrt(u(rng)), a = 2 * pi * u(rng);
    out.emplace_back(r * std::cos(a), r * std::sin(a));
  }
  return out;
}

}  // namespace

TEST_CASE("radial profile values", "[ball]") {
  CHECK(radial_g(0.2) == 0.2);
  CHECK(radial_g(1.0 / 3.0) == 1.0 / 3.0);
  CHECK(radial_g(2.0 / 3.0) == Approx(std::exp(9.0)).epsilon(1e-14));
  // w(1/2) = 1/2 by the symmetry of the step, so the bridge is the midpoint
  CHECK(radial_g(0.5) == Approx(0.25 + 0.5 * std::exp(4.0)).epsilon(1e-14));
  CHECK_THROWS_AS(radial_g(0.0), InputError);
  CHECK_THROWS_AS(radial_g(1.0), InputError);
}

TEST_CASE("radial profile is increasing on a dense grid", "[ball]") {
  double prev = 0.0;
  for (int i = 1; i < 20000; ++i) {
    const double r = 0.9 * i / 20000.0;
    CHECK(radial_g_derivative(r) > 0.0);
    const double v = radial_g(r);
    CHECK(v > prev);
    prev = v;
  }
}

TEST_CASE("radial profile derivatives are continuous at the junctions", "[ball]") {
  const double h = 1e-3, d = 1e-9;
  const auto diff = [h](int order, double r) {
    const auto g = [](double s) { return radial_g(s); };
    if (order == 1) return (g(r + h) - g(r - h)) / (2 * h);
    if (order == 2) return (g(r + h) - 2 * g(r) + g(r - h)) / (h * h);
    return (g(r + 2 * h) - 2 * g(r + h) + 2 * g(r - h) - g(r - 2 * h)) / (2 * h * h * h);
  };
  for (double c : {1.0 / 3.0, 2.0 / 3.0})
    for (int order = 1; order <= 3; ++order) {
      const double left = diff(order, c - d), right = diff(order, c + d);
      CHECK(std::abs(left - right) <= 1e-6 * std::max(1.0, std::abs(left)));
    }
  CHECK(radial_g_derivative(0.3) == 1.0);
  const double r = 0.8;
  CHECK(radial_g_derivative(r) == Approx(2.0 * std::exp(1.0 / ((1 - r) * (1 - r))) / std::pow(1 - r, 3)).epsilon(1e-13));
}

TEST_CASE("g_inverse", "[ball]") {
  CHECK(g_inverse(0.25) == 0.25);
  CHECK(g_inverse(std::exp(9.0)) == Approx(2.0 / 3.0).margin(1e-10));
  for (int i = 0; i < 20; ++i) {
    const double s = 0.01 * std::pow(1e8, i / 19.0);
    const double r = g_inverse(s);
    CHECK(r > 0.0);
    CHECK(r < 1.0);
    CHECK(std::abs(radial_g(r) - s) <= 1e-10 * std::max(1.0, s));
  }
  for (int i = 0; i <= 200; ++i) {
    const double s = 0.36 + (8200.0 - 0.36) * i / 200.0;
    CHECK(std::abs(radial_g(g_inverse(s)) - s) <= 1e-12 * std::max(1.0, s));
  }
  CHECK_THROWS_AS(g_inverse(0.0), InputError);
  CHECK_THROWS_AS(g_inverse(-1.0), InputError);
}

TEST_CASE("h and its inverse", "[ball]") {
  CHECK(h<2>(Vec<2>::Zero()) == Vec<2>::Zero());
  const Vec<2> a(0.18, -0.24);
  CHECK(h<2>(a) == a);
  const Vec<2> dir = Vec<2>(3.0, 4.0).normalized();
  const Vec<2> big = std::exp(9.0) * dir;
  const Vec<2> hb = h<2>(big);
  CHECK(hb.norm() == Approx(2.0 / 3.0).margin(1e-10));
  CHECK((hb.normalized() - dir).norm() < 1e-14);
  for (double r : {0.5, 1.0, 7.0, 100.0, 1e3}) {
    const Vec<2> x = r * Vec<2>(0.6, -0.8);
    const Vec<2> u = h<2>(x);
    CHECK(u.norm() < 1.0);
    CHECK((h_inverse<2>(u) - x).norm() <= 1e-8);
  }
  for (const auto& u : disk_samples(200, 0.9, 3)) CHECK((h<2>(h_inverse<2>(u)) - u).norm() <= 1e-10);
  CHECK(h_inverse<2>(Vec<2>(0.1, 0.2)) == Vec<2>(0.1, 0.2));
  CHECK_THROWS_AS(h_inverse<2>(Vec<2>(1.0, 0.0)), InputError);
  CHECK_THROWS_AS(h_inverse<2>(Vec<2>(1.0 - 1e-4, 0.0)), NumericalAbort);
}

TEST_CASE("shift map exactness", "[ball]") {
  const Vec<2> y(0.05, -0.02);
  for (const Vec<2>& x : {Vec<2>(1.0, 0.0), Vec<2>(0.0, -1.3), Vec<2>(2.0, 2.0)}) {
    CHECK(s_y<2>(x, y) == x);
    CHECK(jacobian_s_y<2>(x, y) == Mat<2>::Identity());
  }
  const double rs = radial::shift_threshold;
  CHECK(rs == Approx(0.8098).margin(1e-4));
  CHECK(radial_g(rs) == Approx(1e12).epsilon(1e-9));
  CHECK(s_y<2>(Vec<2>(0.0, rs), y) == Vec<2>(0.0, rs));
  const Vec<2> x(0.1, 0.15);
  CHECK(s_y<2>(x, Vec<2>::Zero()) == x);
  CHECK((s_y<2>(x, y) - (x + y)).norm() == 0.0);
  CHECK(jacobian_s_y<2>(x, y) == Mat<2>::Identity());
}

TEST_CASE("shift map Jacobian matches finite differences", "[ball]") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int count = 0;
  double worst = 0.0;
  for (const auto& x : disk_samples(200, 0.78, 7)) {
    const Vec<2> y = 0.1 * Vec<2>(u(rng), u(rng));
    const ShiftMap<2> s(y);
    const Mat<2> j = s.jacobian(x);
    const Mat<2> f = fd_jacobian(s, x);
    worst = std::max(worst, (j - f).cwiseAbs().maxCoeff() / std::max(1.0, j.cwiseAbs().maxCoeff()));
    ++count;
  }
  CHECK(count == 200);
  CHECK(worst <= 1e-5);
}

TEST_CASE("shift maps form a group and shrink with the shift", "[ball]") {
  const Vec<2> y(0.04, 0.03), z(-0.02, 0.05);
  for (const auto& x : disk_samples(100, 0.75, 5)) {
    CHECK((s_y<2>(s_y<2>(x, z), y) - s_y<2>(x, Vec<2>(y + z))).norm() <= 1e-8);
    CHECK((s_y<2>(s_y<2>(x, y), Vec<2>(-y)) - x).norm() <= 1e-8);
  }
  std::vector<Vec<2>> grid;
  for (int i = 0; i < 41; ++i)
    for (int j = 0; j < 41; ++j) {
      const Vec<2> x(-1.0 + i / 20.0, -1.0 + j / 20.0);
      if (x.norm() < 1.0) grid.push_back(x);
    }
  double prev_move = std::numeric_limits<double>::infinity(), prev_jac = prev_move;
  double last = 0.0;
  for (int k = 0; k <= 10; ++k) {
    const Vec<2> y = (0.1 / std::pow(2.0, k)) * Vec<2>(0.6, 0.8);
    const ShiftMap<2> s(y);
    double move = 0.0, jac = 0.0;
    for (const auto& x : grid) {
      move = std::max(move, (s(x) - x).norm());
      jac = std::max(jac, (s.jacobian(x) - Mat<2>::Identity()).cwiseAbs().maxCoeff());
    }
    CHECK(move <= 1.05 * prev_move);
    CHECK(jac <= 1.05 * prev_jac);
    prev_move = move;
    prev_jac = jac;
    last = move;
  }
  CHECK(last < 1e-3);
  const ShiftMap<2> tiny(Vec<2>(1e-4, 0.0));
  double move = 0.0;
  for (const auto& x : grid) move = std::max(move, (tiny(x) - x).norm());
  CHECK(move < 1e-3);
}

TEST_CASE("three dimensional shift map", "[ball]") {
  const Vec<3> y(0.02, -0.01, 0.03);
  const ShiftMap<3> s(y);
  const Vec<3> x(0.2, 0.3, -0.35);
  Mat<3> f;
  for (int k = 0; k < 3; ++k) {
    Vec<3> e = Vec<3>::Zero();
    e[k] = 1e-6;
    f.col(k) = (s(x + e) - s(x - e)) / 2e-6;
  }
  CHECK((s.jacobian(x) - f).cwiseAbs().maxCoeff() <= 1e-5);
  CHECK((ShiftMap<3>(Vec<3>(-y))(s(x)) - x).norm() <= 1e-8);
}
