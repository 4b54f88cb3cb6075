#pragma once

/**
 * @file ball_diffeomorphism.hpp
 * @brief The radial profile g: (0,1) -> (0,inf), the diffeomorphism
 *        h: R^n -> B^n built from g^{-1}, and the compactly supported shifts
 *        s_y = h o tau_y o h^{-1} (identity outside the unit ball).
 *
 * g(r) = r on (0, 1/3], exp(1/(1-r)^2) on [2/3, 1), and on [1/3, 2/3] the
 * convex blend (1 - w) r + w exp(1/(1-r)^2) where w is a C-infinity step that
 * vanishes below 1/3 + 1/30 and equals one above 2/3 - 1/30.
 */

#include "eqmollify/core.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <string>

namespace eqmollify {

namespace radial {

inline constexpr double identity_end = 1.0 / 3.0;
inline constexpr double exp_start = 2.0 / 3.0;
inline constexpr double blend_margin = 1.0 / 30.0;
inline constexpr double blend_lo = identity_end + blend_margin;  // w = 0 below
inline constexpr double blend_hi = exp_start - blend_margin;     // w = 1 above

/// Radius beyond which s_y is taken to be the identity: g(r) = 1e12 there.
inline const double shift_threshold = 1.0 - 1.0 / std::sqrt(std::log(1e12));

inline double exp_branch(double r) { return std::exp(1.0 / sqr(1.0 - r)); }

struct ValueAndSlope {
  double value;
  double slope;
};

/// g and g' together (shares the exponentials). No domain check.
inline ValueAndSlope eval(double r) {
  if (r <= blend_lo) return {r, 1.0};
  const double e = exp_branch(r);
  const double de = 2.0 * e / (sqr(1.0 - r) * (1.0 - r));
  if (r >= blend_hi) return {e, de};
  const double width = blend_hi - blend_lo;
  const double t = (r - blend_lo) / width;
  const double w = smooth_step(t);
  const double dw = smooth_step_derivative(t) / width;
  return {(1.0 - w) * r + w * e, (1.0 - w) + w * de + dw * (e - r)};
}

}  // namespace radial

/// g(r) for 0 < r < 1.
inline double radial_g(double r) {
  if (!(r > 0.0 && r < 1.0)) throw InputError("radial_g: r must lie in (0, 1), got " + std::to_string(r));
  return radial::eval(r).value;
}

/// g'(r) for 0 < r < 1.
inline double radial_g_derivative(double r) {
  if (!(r > 0.0 && r < 1.0))
    throw InputError("radial_g_derivative: r must lie in (0, 1), got " + std::to_string(r));
  return radial::eval(r).slope;
}

namespace radial {

// g sampled on the blend interval; brackets the Newton iteration.
struct BlendTable {
  static constexpr int size = 257;
  std::array<double, size> r{};
  std::array<double, size> g{};
  BlendTable() {
    for (int i = 0; i < size; ++i) {
      r[i] = blend_lo + (blend_hi - blend_lo) * i / (size - 1);
      g[i] = eval(r[i]).value;
    }
    r[size - 1] = blend_hi;
  }
};

inline const BlendTable& blend_table() {
  static const BlendTable table;
  return table;
}

}  // namespace radial

/// g^{-1}(s) for s > 0, with |g(r) - s| <= tol * max(1, s).
/// Identity below the blend, closed form on the exponential branch,
/// bracketed Newton on the blend. Throws NumericalAbort on non-convergence.
inline double g_inverse(double s, double tol = 1e-12) {
  if (!(s > 0.0)) throw InputError("g_inverse: s must be positive, got " + std::to_string(s));
  using namespace radial;
  if (s <= blend_lo) return s;
  const auto& tab = blend_table();
  if (s >= tab.g.back()) return 1.0 - 1.0 / std::sqrt(std::log(s));

  // bracket: g[k] <= s < g[k+1]
  int lo = 0, hi = BlendTable::size - 1;
  while (hi - lo > 1) {
    const int mid = (lo + hi) / 2;
    (tab.g[mid] <= s ? lo : hi) = mid;
  }
  double a = tab.r[lo], b = tab.r[hi];
  // interpolate in log g, where g is much closer to linear
  const double la = std::log(tab.g[lo]), lb = std::log(tab.g[hi]);
  double r = a + (b - a) * (std::log(s) - la) / (lb - la);
  const double target = tol * std::max(1.0, s);
  for (int iter = 0; iter < 100; ++iter) {
    const ValueAndSlope v = eval(r);
    const double f = v.value - s;
    if (std::abs(f) <= target) {
      // one more step: quadratic convergence takes r to rounding level
      const double polished = r - f / v.slope;
      return (polished > a && polished < b) ? polished : r;
    }
    (f < 0.0 ? a : b) = r;
    double next = r - f / v.slope;
    if (!(next > a && next < b)) next = 0.5 * (a + b);
    if (b - a <= 4.0 * std::numeric_limits<double>::epsilon()) return next;
    r = next;
  }
  throw NumericalAbort("g_inverse: no convergence for s = " + std::to_string(s));
}

/// A point value together with the Jacobian of the map at that point.
template <int Dim>
struct MapSample {
  Vec<Dim> value;
  Mat<Dim> jacobian;
};

namespace detail {

// Jacobian of x -> (phi(|x|)/|x|) x: (phi/r) P_perp + phi'(r) P_par.
template <int Dim>
Mat<Dim> radial_jacobian(const Vec<Dim>& x, double r, double ratio, double slope) {
  const Vec<Dim> e = x / r;
  const Mat<Dim> par = e * e.transpose();
  return ratio * (Mat<Dim>::Identity() - par) + slope * par;
}

}  // namespace detail

/// h: R^n -> B^n, h(x) = g^{-1}(|x|) x / |x|, and its inverse.
template <int Dim>
struct BallMap {
  double inverse_solver_tolerance = 1e-12;

  Vec<Dim> operator()(const Vec<Dim>& x) const {
    const double n = x.norm();
    if (n <= radial::blend_lo) return x;
    return (g_inverse(n, inverse_solver_tolerance) / n) * x;
  }

  MapSample<Dim> sample(const Vec<Dim>& x) const {
    const double n = x.norm();
    if (n <= radial::blend_lo) return {x, Mat<Dim>::Identity()};
    const double rho = g_inverse(n, inverse_solver_tolerance);
    const double ratio = rho / n;
    return {ratio * x, detail::radial_jacobian<Dim>(x, n, ratio, 1.0 / radial::eval(rho).slope)};
  }

  Vec<Dim> inverse(const Vec<Dim>& u) const { return inverse_sample(u).value; }

  /// h^{-1}(u) and D(h^{-1})(u). Requires |u| < 1; throws NumericalAbort when
  /// g(|u|) overflows (|u| within ~0.04 of the boundary).
  MapSample<Dim> inverse_sample(const Vec<Dim>& u) const {
    const double n = u.norm();
    if (!(n < 1.0)) throw InputError("h_inverse: point must lie in the open unit ball");
    if (n <= radial::blend_lo) return {u, Mat<Dim>::Identity()};
    const radial::ValueAndSlope v = radial::eval(n);
    if (!std::isfinite(v.value) || !std::isfinite(v.slope))
      throw NumericalAbort("h_inverse: g(|u|) overflows at |u| = " + std::to_string(n));
    const double ratio = v.value / n;
    return {ratio * u, detail::radial_jacobian<Dim>(u, n, ratio, v.slope)};
  }
};

/// s_y = h o tau_y o h^{-1} on |x| < boundary_threshold, identity elsewhere.
/// s_y^{-1} = s_{-y}.
template <int Dim>
class ShiftMap {
public:
  explicit ShiftMap(const Vec<Dim>& y, double boundary_threshold = radial::shift_threshold)
      : y_(y), threshold_(boundary_threshold) {}

  const Vec<Dim>& shift() const { return y_; }
  double boundary_threshold() const { return threshold_; }

  bool is_identity_at(const Vec<Dim>& x) const { return y_.isZero(0.0) || x.norm() >= threshold_; }

  Vec<Dim> operator()(const Vec<Dim>& x) const {
    if (is_identity_at(x)) return x;
    return ball_(ball_.inverse(x) + y_);
  }

  Mat<Dim> jacobian(const Vec<Dim>& x) const { return sample(x).jacobian; }

  MapSample<Dim> sample(const Vec<Dim>& x) const {
    if (is_identity_at(x)) return {x, Mat<Dim>::Identity()};
    return compose(ball_.inverse_sample(x), y_, ball_);
  }

  /// s_y evaluated from a precomputed preimage sample (h^{-1}(x), Dh^{-1}(x));
  /// lets callers reuse h^{-1} across many shifts of the same point.
  static MapSample<Dim> compose(const MapSample<Dim>& pre, const Vec<Dim>& y, const BallMap<Dim>& ball) {
    const MapSample<Dim> fwd = ball.sample(pre.value + y);
    return {fwd.value, fwd.jacobian * pre.jacobian};
  }

private:
  Vec<Dim> y_;
  double threshold_;
  BallMap<Dim> ball_{};
};

template <int Dim>
Vec<Dim> h(const Vec<Dim>& x) {
  return BallMap<Dim>{}(x);
}

template <int Dim>
Vec<Dim> h_inverse(const Vec<Dim>& u) {
  return BallMap<Dim>{}.inverse(u);
}

template <int Dim>
Vec<Dim> s_y(const Vec<Dim>& x, const Vec<Dim>& y) {
  return ShiftMap<Dim>(y)(x);
}

template <int Dim>
Mat<Dim> jacobian_s_y(const Vec<Dim>& x, const Vec<Dim>& y) {
  return ShiftMap<Dim>(y).jacobian(x);
}

}  // namespace eqmollify
