#pragma once

/**
 * @file mollifier_kernel.hpp
 * @brief Bump profile psi, its normalization, the scaled kernel f_eps and
 *        product/polar quadrature rules over the kernel's support ball.
 *
 * The kernel is normalized in the ambient dimension n:
 *   f_eps(x) = eps^{-n} psi(|x| / eps),  psi(t) = exp(t^2 / (t^2 - 1)) / lambda_n,
 *   lambda_n = |S^{n-1}| * int_0^1 exp(r^2 / (r^2 - 1)) r^{n-1} dr,
 * so that f_eps has unit mass on R^n.
 */

#include "eqmollify/core.hpp"
#include "eqmollify/quadrature.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace eqmollify {

/// |t| beyond this is treated as outside the support; the exponent
/// t^2/(t^2-1) is below -3e7 there and the bump has long underflowed.
inline constexpr double bump_cutoff = 1.0 - 0x1p-26;

/// exp(t^2/(t^2-1)) for |t| < 1, 0 otherwise. Never NaN.
inline double unnormalized_bump(double t) {
  const double a = std::abs(t);
  if (!(a < bump_cutoff)) return 0.0;
  const double t2 = a * a;
  return std::exp(t2 / (t2 - 1.0));
}

/// Area of the unit sphere S^{n-1} in R^n.
inline double unit_sphere_area(int n) {
  if (n < 1) throw InputError("unit_sphere_area: n must be >= 1");
  return 2.0 * std::pow(pi, 0.5 * n) / std::tgamma(0.5 * n);
}

/// Volume of the ball of radius r in R^n.
inline double ball_volume(int n, double r) { return unit_sphere_area(n) * std::pow(r, n) / n; }

/// lambda_n such that the n-dimensional integral of psi(|x|) is one.
inline double normalization_constant(int n, double tolerance = 1e-13) {
  if (n < 1) throw InputError("normalization_constant: dimension must be >= 1");
  if (!(tolerance > 0.0)) throw InputError("normalization_constant: tolerance must be positive");
  const auto radial = [n](double r) { return unnormalized_bump(r) * std::pow(r, n - 1); };
  const double area = unit_sphere_area(n);
  const AdaptiveResult res = integrate_adaptive(radial, 0.0, 1.0, tolerance / area);
  return area * res.value;
}

struct BumpProfile {
  int dimension = 1;
  double lambda = 1.0;

  static BumpProfile for_dimension(int n, double tolerance = 1e-13) {
    return {n, normalization_constant(n, tolerance)};
  }

  double psi(double t) const { return unnormalized_bump(t) / lambda; }
};

template <int Dim>
struct QuadratureRule {
  std::vector<Vec<Dim>> nodes;
  std::vector<double> weights;
  int level = 0;
  double radius = 0.0;

  std::size_t size() const { return nodes.size(); }

  template <class F>
  double integrate(F&& f) const {
    double s = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) s += weights[i] * f(nodes[i]);
    return s;
  }
};

/**
 * Quadrature over the closed ball B(0, eps) in R^Dim.
 *   n = 1: Gauss-Legendre with 2^level + 1 symmetric nodes on [-eps, eps].
 *   n = 2: Gauss-Legendre in r (2^level nodes) x 2^(level+1) + 1 equispaced angles.
 *   n = 3: Gauss-Legendre in r and cos(theta) (2^level each) x 2^(level+1) + 1 azimuths.
 * The weights integrate constants exactly. The odd azimuth count keeps the
 * rule's rotational period from aliasing with power-of-two circle quadratures.
 */
template <int Dim>
QuadratureRule<Dim> ball_quadrature(double epsilon, int level) {
  static_assert(Dim >= 1 && Dim <= 3, "ball_quadrature supports dimensions 1, 2 and 3");
  if (!(epsilon > 0.0)) throw InputError("ball_quadrature: epsilon must be positive");
  if (level < 1) throw InputError("ball_quadrature: level must be >= 1");
  QuadratureRule<Dim> rule;
  rule.level = level;
  rule.radius = epsilon;
  const int m = 1 << level;
  if constexpr (Dim == 1) {
    const GaussRule gl = gauss_legendre(m + 1);
    for (int i = 0; i <= m; ++i) {
      rule.nodes.push_back(Vec<1>(epsilon * gl.nodes[i]));
      rule.weights.push_back(epsilon * gl.weights[i]);
    }
  } else {
    const GaussRule gr = gauss_legendre(m);
    const int n_az = 2 * m + 1;
    const double daz = 2.0 * pi / n_az;
    if constexpr (Dim == 2) {
      for (int i = 0; i < m; ++i) {
        const double r = 0.5 * epsilon * (gr.nodes[i] + 1.0);
        const double wr = 0.5 * epsilon * gr.weights[i] * r * daz;
        for (int k = 0; k < n_az; ++k) {
          const double th = daz * k;
          rule.nodes.push_back(Vec<2>(r * std::cos(th), r * std::sin(th)));
          rule.weights.push_back(wr);
        }
      }
    } else {
      const GaussRule gc = gauss_legendre(m);
      for (int i = 0; i < m; ++i) {
        const double r = 0.5 * epsilon * (gr.nodes[i] + 1.0);
        const double wr = 0.5 * epsilon * gr.weights[i] * r * r;
        for (int j = 0; j < m; ++j) {
          const double c = gc.nodes[j];
          const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
          for (int k = 0; k < n_az; ++k) {
            const double az = daz * k;
            rule.nodes.push_back(Vec<3>(r * s * std::cos(az), r * s * std::sin(az), r * c));
            rule.weights.push_back(wr * gc.weights[j] * daz);
          }
        }
      }
    }
  }
  return rule;
}

/// Runtime-dimension front end; rejects dimensions other than 1, 2, 3.
/// Returns the node count of the rule that ball_quadrature<n> would build.
inline std::size_t ball_quadrature_size(int n, int level) {
  if (n < 1 || n > 3) throw InputError("ball_quadrature: unsupported dimension " + std::to_string(n));
  if (level < 1) throw InputError("ball_quadrature: level must be >= 1");
  const std::size_t m = std::size_t{1} << level;
  if (n == 1) return m + 1;
  if (n == 2) return m * (2 * m + 1);
  return m * m * (2 * m + 1);
}

inline constexpr int default_kernel_level = 4;

/// f_eps with its quadrature rule. Immutable after construction.
template <int Dim>
class MollifierKernel {
public:
  explicit MollifierKernel(double epsilon, int level = default_kernel_level)
      : MollifierKernel(epsilon, level, BumpProfile::for_dimension(Dim)) {}

  MollifierKernel(double epsilon, int level, BumpProfile profile)
      : profile_(profile), epsilon_(epsilon), rule_(ball_quadrature<Dim>(epsilon, level)) {
    if (profile_.dimension != Dim) throw InputError("MollifierKernel: profile dimension mismatch");
    for (std::size_t i = 0; i < rule_.size(); ++i) {
      const double b = rule_.weights[i] * (*this)(rule_.nodes[i]);
      if (b > 0.0) {
        shifts_.push_back(rule_.nodes[i]);
        shift_weights_.push_back(b);
      }
    }
    for (double b : shift_weights_) shift_weight_total_ += b;
  }

  double epsilon() const { return epsilon_; }
  const BumpProfile& profile() const { return profile_; }
  const QuadratureRule<Dim>& rule() const { return rule_; }

  /// f_eps(x); exactly zero for |x| >= eps.
  double operator()(const Vec<Dim>& x) const { return value_at_radius(x.norm()); }

  double value_at_radius(double r) const {
    return profile_.psi(r / epsilon_) / std::pow(epsilon_, Dim);
  }

  /// Quadrature estimate of the kernel mass (should be 1).
  double mass() const { return shift_weight_total_; }

  /// Nodes y_j with f_eps(y_j) > 0 and their weights w_j f_eps(y_j). The
  /// smoothing operators divide by shift_weight_total() so that the discrete
  /// kernel has unit mass exactly.
  const std::vector<Vec<Dim>>& shifts() const { return shifts_; }
  const std::vector<double>& shift_weights() const { return shift_weights_; }
  double shift_weight_total() const { return shift_weight_total_; }

private:
  BumpProfile profile_;
  double epsilon_;
  QuadratureRule<Dim> rule_;
  std::vector<Vec<Dim>> shifts_;
  std::vector<double> shift_weights_;
  double shift_weight_total_ = 0.0;
};

}  // namespace eqmollify
