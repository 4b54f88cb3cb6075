#pragma once

// Christoffel symbols, the Riemann tensor and sectional curvature from a
// metric jet; sampled essential curvature bounds and their comparison.

#include "eqmollify/core.hpp"
#include "eqmollify/metric_fields.hpp"

#include <array>
#include <cstdint>
#include <fstream>
#include <random>
#include <string>
#include <vector>

namespace eqmollify {

/// gamma[k][i][j] = Gamma^k_{ij}.
template <int Dim>
using Christoffel = std::array<std::array<std::array<double, Dim>, Dim>, Dim>;

template <int Dim>
Christoffel<Dim> christoffel(const MetricJet<Dim>& j) {
  Eigen::LDLT<Mat<Dim>> ldlt(j.value);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || std::abs(j.value.determinant()) < 1e-300)
    throw InputError("christoffel: metric matrix is singular");
  const Mat<Dim> inv = j.value.inverse();
  Christoffel<Dim> gam{};
  for (int i = 0; i < Dim; ++i)
    for (int jj = i; jj < Dim; ++jj) {
      // lowered symbol [ij, l] = (d_i g_jl + d_j g_il - d_l g_ij) / 2
      Vec<Dim> low;
      for (int l = 0; l < Dim; ++l) low[l] = 0.5 * (j.d1[i](jj, l) + j.d1[jj](i, l) - j.d1[l](i, jj));
      const Vec<Dim> up = inv * low;
      for (int k = 0; k < Dim; ++k) gam[k][i][jj] = gam[k][jj][i] = up[k];
    }
  return gam;
}

template <int Dim>
Christoffel<Dim> christoffel(const MetricField<Dim>& g, const Vec<Dim>& x) {
  return christoffel<Dim>(g.jet(x));
}

/// R[i][k][l][m] = R_{iklm} (all indices lowered), built from second
/// derivatives of g and the Christoffel symbols:
///   R_iklm = (g_im,kl + g_kl,im - g_il,km - g_km,il) / 2
///          + g_np (Gamma^n_kl Gamma^p_im - Gamma^n_km Gamma^p_il).
/// With this convention K(X, Y) = R(X, Y, X, Y) / |X ^ Y|^2 is +1 on the unit sphere.
template <int Dim>
using Riemann = std::array<std::array<std::array<std::array<double, Dim>, Dim>, Dim>, Dim>;

template <int Dim>
Riemann<Dim> riemann_tensor(const MetricJet<Dim>& jet) {
  const Christoffel<Dim> gam = christoffel<Dim>(jet);
  const auto d2 = [&](int a, int b, int k, int l) { return jet.d2[k][l](a, b); };
  Riemann<Dim> r{};
  for (int i = 0; i < Dim; ++i)
    for (int k = 0; k < Dim; ++k)
      for (int l = 0; l < Dim; ++l)
        for (int m = 0; m < Dim; ++m) {
          double v = 0.5 * (d2(i, m, k, l) + d2(k, l, i, m) - d2(i, l, k, m) - d2(k, m, i, l));
          for (int n = 0; n < Dim; ++n)
            for (int p = 0; p < Dim; ++p)
              v += jet.value(n, p) * (gam[n][k][l] * gam[p][i][m] - gam[n][k][m] * gam[p][i][l]);
          r[i][k][l][m] = v;
        }
  return r;
}

/// A point and two tangent vectors spanning a 2-plane.
template <int Dim>
struct SectionSample {
  Vec<Dim> x;
  Vec<Dim> X;
  Vec<Dim> Y;
  double gram = 0.0;  // Euclidean |X|^2 |Y|^2 - <X, Y>^2

  static SectionSample make(const Vec<Dim>& x, const Vec<Dim>& X, const Vec<Dim>& Y) {
    SectionSample s{x, X, Y, X.squaredNorm() * Y.squaredNorm() - sqr(X.dot(Y))};
    if (!(s.gram > 1e-8)) throw InputError("SectionSample: degenerate section");
    return s;
  }
};

namespace detail {

template <int Dim>
double sectional_from(const Riemann<Dim>& r, const Mat<Dim>& g, const Vec<Dim>& X, const Vec<Dim>& Y) {
  double num = 0.0;
  for (int i = 0; i < Dim; ++i)
    for (int k = 0; k < Dim; ++k)
      for (int l = 0; l < Dim; ++l)
        for (int m = 0; m < Dim; ++m) num += r[i][k][l][m] * X[i] * Y[k] * X[l] * Y[m];
  const double den = X.dot(g * X) * Y.dot(g * Y) - sqr(X.dot(g * Y));
  if (!(den > 0.0)) throw InputError("sectional_curvature: degenerate section");
  return num / den;
}

}  // namespace detail

template <int Dim>
double sectional_curvature(const MetricJet<Dim>& jet, const Vec<Dim>& X, const Vec<Dim>& Y) {
  return detail::sectional_from<Dim>(riemann_tensor<Dim>(jet), jet.value, X, Y);
}

template <int Dim>
double sectional_curvature(const MetricField<Dim>& g, const SectionSample<Dim>& s) {
  if (!(s.gram > 1e-8)) throw InputError("sectional_curvature: degenerate section");
  return sectional_curvature<Dim>(g.jet(s.x), s.X, s.Y);
}

/// Sphere |x - center| = radius on which a scenario metric is not C^2.
template <int Dim>
struct DiscontinuitySphere {
  Vec<Dim> center = Vec<Dim>::Zero();
  double radius = 0.0;
};

struct CurvatureBounds {
  double k_lower = 0.0;
  double k_upper = 0.0;
  std::size_t points = 0;
  std::size_t sections = 0;
  std::size_t excluded = 0;
  double exclusion_radius = 0.0;
};

template <int Dim>
struct CurvatureScanOptions {
  int sections_per_point = 8;
  std::uint64_t seed = 42;
  std::vector<DiscontinuitySphere<Dim>> discontinuities;
  /// width of the excluded band around each discontinuity; negative means 2 * fd step
  double exclusion = -1.0;
};

template <int Dim>
struct PointCurvature {
  Vec<Dim> x;
  double k_min;
  double k_max;
};

/// Fixed-seed orthonormal 2-frames for point index i: QR of a Gaussian pair.
template <int Dim>
std::vector<std::pair<Vec<Dim>, Vec<Dim>>> random_sections(std::uint64_t seed, std::size_t index, int count) {
  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + index);
  std::normal_distribution<double> normal;
  std::vector<std::pair<Vec<Dim>, Vec<Dim>>> out;
  while (static_cast<int>(out.size()) < count) {
    Eigen::Matrix<double, Dim, 2> a;
    for (int c = 0; c < 2; ++c)
      for (int r = 0; r < Dim; ++r) a(r, c) = normal(rng);
    Eigen::HouseholderQR<Eigen::Matrix<double, Dim, 2>> qr(a);
    const Eigen::Matrix<double, Dim, Dim> q = qr.householderQ();
    if (std::abs(qr.matrixQR()(1, 1)) < 1e-6) continue;
    out.emplace_back(q.col(0), q.col(1));
  }
  return out;
}

/// Per-point min/max of the sectional curvature over random sections.
/// Points within the exclusion band of a declared discontinuity are dropped.
template <int Dim>
std::vector<PointCurvature<Dim>> curvature_map(const MetricField<Dim>& g, const std::vector<Vec<Dim>>& points,
                                               const CurvatureScanOptions<Dim>& opt, std::size_t* excluded = nullptr) {
  const double band = opt.exclusion >= 0.0 ? opt.exclusion : 2.0 * g.fd_step();
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < points.size(); ++i) {
    bool near = false;
    for (const auto& d : opt.discontinuities)
      if (std::abs((points[i] - d.center).norm() - d.radius) <= band) near = true;
    if (!near) keep.push_back(i);
  }
  if (excluded) *excluded = points.size() - keep.size();
  return parallel_map(keep.size(), [&](std::size_t n) {
    const std::size_t i = keep[n];
    const Riemann<Dim> r = riemann_tensor<Dim>(g.jet(points[i]));
    const Mat<Dim> gx = g(points[i]);
    PointCurvature<Dim> pc{points[i], std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const auto& [X, Y] : random_sections<Dim>(opt.seed, i, opt.sections_per_point)) {
      const double k = detail::sectional_from<Dim>(r, gx, X, Y);
      pc.k_min = std::min(pc.k_min, k);
      pc.k_max = std::max(pc.k_max, k);
    }
    return pc;
  });
}

/// Sampled essential inf/sup of K over points x random sections.
template <int Dim>
CurvatureBounds curvature_bounds(const MetricField<Dim>& g, const std::vector<Vec<Dim>>& points,
                                 const CurvatureScanOptions<Dim>& opt = {}) {
  if (opt.sections_per_point < 1) throw InputError("curvature_bounds: sections_per_point must be >= 1");
  CurvatureBounds b;
  b.exclusion_radius = opt.exclusion >= 0.0 ? opt.exclusion : 2.0 * g.fd_step();
  const auto map = curvature_map(g, points, opt, &b.excluded);
  if (map.empty()) throw InputError("curvature_bounds: no admissible sample points");
  b.k_lower = std::numeric_limits<double>::infinity();
  b.k_upper = -std::numeric_limits<double>::infinity();
  for (const auto& pc : map) {
    b.k_lower = std::min(b.k_lower, pc.k_min);
    b.k_upper = std::max(b.k_upper, pc.k_max);
  }
  b.points = map.size();
  b.sections = map.size() * opt.sections_per_point;
  return b;
}

struct BoundsComparison {
  double upper_gap = 0.0;
  double lower_gap = 0.0;
  double delta = 0.0;
  bool pass = false;
};

inline BoundsComparison bounds_comparison(const CurvatureBounds& reference, const CurvatureBounds& smoothed, double delta) {
  BoundsComparison c;
  c.upper_gap = std::abs(reference.k_upper - smoothed.k_upper);
  c.lower_gap = std::abs(reference.k_lower - smoothed.k_lower);
  c.delta = delta;
  c.pass = c.upper_gap < delta && c.lower_gap < delta;
  return c;
}

/// Proxy for limsup(upper_k) <= upper_0 and liminf(lower_k) >= lower_0 along
/// an epsilon sweep (ordered by decreasing epsilon): the tail value of the
/// sweep must respect the reference bounds up to delta.
struct SweepLimitReport {
  double tail_upper = 0.0;
  double tail_lower = 0.0;
  bool limsup_ok = false;
  bool liminf_ok = false;
};

inline SweepLimitReport sweep_limits(const CurvatureBounds& reference, const std::vector<CurvatureBounds>& sweep, double delta) {
  if (sweep.empty()) throw InputError("sweep_limits: empty sweep");
  SweepLimitReport r;
  r.tail_upper = sweep.back().k_upper;
  r.tail_lower = sweep.back().k_lower;
  r.limsup_ok = r.tail_upper <= reference.k_upper + delta;
  r.liminf_ok = r.tail_lower >= reference.k_lower - delta;
  return r;
}

/// x_1, ..., x_n, K_min_at_x, K_max_at_x with 17 significant digits.
template <int Dim>
void write_curvature_csv(const std::string& path, const std::vector<PointCurvature<Dim>>& map) {
  std::ofstream out(path);
  if (!out) throw InputError("write_curvature_csv: cannot open " + path);
  out.precision(17);
  for (int d = 0; d < Dim; ++d) out << "x" << d + 1 << ",";
  out << "K_min_at_x,K_max_at_x\n";
  for (const auto& pc : map) {
    for (int d = 0; d < Dim; ++d) out << pc.x[d] << ",";
    out << pc.k_min << "," << pc.k_max << "\n";
  }
}

}  // namespace eqmollify
