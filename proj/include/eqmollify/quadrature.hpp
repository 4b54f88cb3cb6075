#pragma once

// One-dimensional rules: Gauss-Legendre node generation and an adaptive
// Gauss-Kronrod (7/15) integrator.

#include "eqmollify/core.hpp"

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace eqmollify {

struct GaussRule {
  std::vector<double> nodes;    // on [-1, 1], ascending
  std::vector<double> weights;  // sum to 2
};

/// n-point Gauss-Legendre rule on [-1, 1] by Newton iteration on P_n.
inline GaussRule gauss_legendre(int n) {
  if (n < 1) throw InputError("gauss_legendre: n must be >= 1");
  if (n == 1) return {{0.0}, {2.0}};
  GaussRule rule;
  rule.nodes.assign(n, 0.0);
  rule.weights.assign(n, 0.0);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

struct AdaptiveResult {
  double value = 0.0;
  double error_estimate = 0.0;
  int intervals = 0;
};

/// Adaptive G7/K15 quadrature of f over [a, b]. Bisects the interval with the
/// largest error estimate until the total estimate is below tol.
/// Throws NumericalAbort if the interval budget is exhausted.
inline AdaptiveResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                                         double tol, int max_intervals = 4000) {
  static constexpr std::array<double, 8> xk = {
      0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
      0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
      0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
      0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
  static constexpr std::array<double, 8> wk = {
      0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
      0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
      0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
      0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
  static constexpr std::array<double, 4> wg = {
      0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
      0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

  struct Segment {
    double a, b, value, error;
  };
  auto kronrod = [&](double lo, double hi) {
    const double c = 0.5 * (lo + hi), h = 0.5 * (hi - lo);
    double k15 = wk[7] * f(c), g7 = wg[3] * f(c);
    for (int j = 0; j < 7; ++j) {
      const double fs = f(c - h * xk[j]) + f(c + h * xk[j]);
      k15 += wk[j] * fs;
      if (j % 2 == 1) g7 += wg[j / 2] * fs;
    }
    return Segment{lo, hi, k15 * h, std::abs((k15 - g7) * h)};
  };

  std::vector<Segment> segs{kronrod(a, b)};
  auto totals = [&] {
    double v = 0.0, e = 0.0;
    for (const auto& s : segs) {
      v += s.value;
      e += s.error;
    }
    return std::pair{v, e};
  };
  for (;;) {
    auto [v, e] = totals();
    if (e <= tol) return {v, e, static_cast<int>(segs.size())};
    if (static_cast<int>(segs.size()) >= max_intervals)
      throw NumericalAbort("integrate_adaptive: tolerance " + std::to_string(tol) +
                           " not reached (estimate " + std::to_string(e) + ")");
    auto worst = std::max_element(segs.begin(), segs.end(),
                                  [](const Segment& l, const Segment& r) { return l.error < r.error; });
    const Segment s = *worst;
    const double mid = 0.5 * (s.a + s.b);
    *worst = kronrod(s.a, mid);
    segs.push_back(kronrod(mid, s.b));
  }
}

}  // namespace eqmollify
