#pragma once

/**
 * @file metric_fields.hpp
 * @brief Symmetric tensor fields on chart domains and the metric smoothing
 *        operators: pullback, H-tilde_eps, the chart-localized H_{e,i}, its
 *        Haar average and the finite composition over an atlas; plus the
 *        W^{2,p} / (1,alpha) seminorms and the a_nu constant.
 *
 * Fields are evaluated lazily and pointwise. Derivatives come either from an
 * analytic jet supplied by the scenario or from central differences.
 */

#include "eqmollify/ball_diffeomorphism.hpp"
#include "eqmollify/chart.hpp"
#include "eqmollify/core.hpp"
#include "eqmollify/group_action.hpp"
#include "eqmollify/mollifier_kernel.hpp"

#include <array>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace eqmollify {

enum class Regularity { Smooth, C11, PiecewiseC2 };
enum class DerivativeMode { Analytic, FiniteDifference };

inline std::string to_string(Regularity r) {
  switch (r) {
    case Regularity::Smooth: return "C-infinity";
    case Regularity::C11: return "C^{1,1}";
    case Regularity::PiecewiseC2: return "piecewise-C2";
  }
  return "?";
}

/// Value, first and second partial derivatives of a tensor field at a point.
template <int Dim>
struct MetricJet {
  Mat<Dim> value = Mat<Dim>::Zero();
  std::array<Mat<Dim>, Dim> d1{};                   // d1[k] = d_k g
  std::array<std::array<Mat<Dim>, Dim>, Dim> d2{};  // d2[k][l] = d_k d_l g

  MetricJet operator-(const MetricJet& o) const {
    MetricJet r;
    r.value = value - o.value;
    for (int k = 0; k < Dim; ++k) {
      r.d1[k] = d1[k] - o.d1[k];
      for (int l = 0; l < Dim; ++l) r.d2[k][l] = d2[k][l] - o.d2[k][l];
    }
    return r;
  }
};

/// Where a field may be evaluated.
template <int Dim>
struct FieldDomain {
  enum class Kind { Whole, Ball, Box } kind = Kind::Whole;
  Vec<Dim> center = Vec<Dim>::Zero();  // ball center
  double radius = 0.0;
  Vec<Dim> lo = Vec<Dim>::Zero(), hi = Vec<Dim>::Zero();  // box corners

  static FieldDomain whole() { return {}; }
  static FieldDomain ball(const Vec<Dim>& c, double r) {
    FieldDomain d;
    d.kind = Kind::Ball;
    d.center = c;
    d.radius = r;
    return d;
  }
  static FieldDomain box(const Vec<Dim>& lo, const Vec<Dim>& hi) {
    FieldDomain d;
    d.kind = Kind::Box;
    d.lo = lo;
    d.hi = hi;
    return d;
  }

  bool contains(const Vec<Dim>& x, double slack = 0.0) const {
    switch (kind) {
      case Kind::Whole: return true;
      case Kind::Ball: return (x - center).norm() <= radius + slack;
      case Kind::Box:
        return ((x - lo).array() >= -slack).all() && ((hi - x).array() >= -slack).all();
    }
    return false;
  }
};

inline constexpr double default_fd_step = 1e-3;

/**
 * A symmetric n x n tensor field. Metrics are SPD; differences of metrics
 * use the same type. Cheap to copy (shared callables).
 */
template <int Dim>
class MetricField {
public:
  using ValueFn = std::function<Mat<Dim>(const Vec<Dim>&)>;
  using JetFn = std::function<MetricJet<Dim>(const Vec<Dim>&)>;

  MetricField(ValueFn value, Regularity regularity = Regularity::Smooth,
              FieldDomain<Dim> domain = FieldDomain<Dim>::whole(), double fd_step = default_fd_step)
      : value_(std::move(value)), regularity_(regularity), domain_(domain), fd_step_(fd_step) {
    if (!(fd_step > 0.0)) throw InputError("MetricField: finite-difference step must be positive");
  }

  /// Same field with closed-form derivatives (switches to analytic mode).
  MetricField with_jet(JetFn jet) const {
    MetricField f = *this;
    f.jet_ = std::move(jet);
    return f;
  }

  MetricField with_fd_step(double step) const {
    if (!(step > 0.0)) throw InputError("MetricField: finite-difference step must be positive");
    MetricField f = *this;
    f.fd_step_ = step;
    return f;
  }

  /// Forgets the analytic jet (derivatives by finite differences).
  MetricField finite_difference_only() const {
    MetricField f = *this;
    f.jet_ = nullptr;
    return f;
  }

  MetricField with_domain(FieldDomain<Dim> d) const {
    MetricField f = *this;
    f.domain_ = d;
    return f;
  }

  Mat<Dim> operator()(const Vec<Dim>& x) const { return value_(x); }

  /// Value with a domain check.
  Mat<Dim> at(const Vec<Dim>& x) const {
    if (!domain_.contains(x, 1e-12)) throw InputError("MetricField: point escapes the field domain");
    return value_(x);
  }

  DerivativeMode derivative_mode() const { return jet_ ? DerivativeMode::Analytic : DerivativeMode::FiniteDifference; }
  Regularity regularity() const { return regularity_; }
  const FieldDomain<Dim>& domain() const { return domain_; }
  double fd_step() const { return fd_step_; }
  const ValueFn& value_fn() const { return value_; }

  MetricJet<Dim> jet(const Vec<Dim>& x) const {
    if (jet_) return jet_(x);
    return finite_difference_jet(x);
  }

  /// Second-order central differences with step fd_step().
  MetricJet<Dim> finite_difference_jet(const Vec<Dim>& x) const {
    const double s = fd_step_;
    MetricJet<Dim> j;
    j.value = value_(x);
    std::array<Mat<Dim>, Dim> plus{}, minus{};
    for (int k = 0; k < Dim; ++k) {
      Vec<Dim> e = Vec<Dim>::Zero();
      e[k] = s;
      plus[k] = value_(x + e);
      minus[k] = value_(x - e);
      j.d1[k] = (plus[k] - minus[k]) / (2.0 * s);
      j.d2[k][k] = (plus[k] - 2.0 * j.value + minus[k]) / (s * s);
    }
    for (int k = 0; k < Dim; ++k)
      for (int l = k + 1; l < Dim; ++l) {
        Vec<Dim> ek = Vec<Dim>::Zero(), el = Vec<Dim>::Zero();
        ek[k] = s;
        el[l] = s;
        const Mat<Dim> pp = value_(x + ek + el), pm = value_(x + ek - el);
        const Mat<Dim> mp = value_(x - ek + el), mm = value_(x - ek - el);
        j.d2[k][l] = (pp - pm - mp + mm) / (4.0 * s * s);
        j.d2[l][k] = j.d2[k][l];
      }
    return j;
  }

private:
  ValueFn value_;
  JetFn jet_;
  Regularity regularity_;
  FieldDomain<Dim> domain_;
  double fd_step_;
};

/// Constant field c * identity (analytic jet).
template <int Dim>
MetricField<Dim> constant_metric(const Mat<Dim>& c) {
  MetricField<Dim> f([c](const Vec<Dim>&) { return c; });
  return f.with_jet([c](const Vec<Dim>&) {
    MetricJet<Dim> j;
    j.value = c;
    for (int k = 0; k < Dim; ++k) {
      j.d1[k].setZero();
      for (int l = 0; l < Dim; ++l) j.d2[k][l].setZero();
    }
    return j;
  });
}

template <int Dim>
MetricField<Dim> euclidean_metric() {
  return constant_metric<Dim>(Mat<Dim>::Identity());
}

/// Conformal field phi(|x|^2) * identity with phi, phi', phi'' given.
/// The analytic jet uses d_k phi(s) = 2 x_k phi'(s),
/// d_k d_l phi(s) = 2 delta_kl phi'(s) + 4 x_k x_l phi''(s).
template <int Dim>
MetricField<Dim> conformal_metric(std::function<std::array<double, 3>(double)> phi, Regularity regularity,
                                  FieldDomain<Dim> domain = FieldDomain<Dim>::whole()) {
  MetricField<Dim> f([phi](const Vec<Dim>& x) -> Mat<Dim> { return phi(x.squaredNorm())[0] * Mat<Dim>::Identity(); },
                     regularity, domain);
  return f.with_jet([phi](const Vec<Dim>& x) {
    const auto p = phi(x.squaredNorm());
    MetricJet<Dim> j;
    const Mat<Dim> id = Mat<Dim>::Identity();
    j.value = p[0] * id;
    for (int k = 0; k < Dim; ++k) {
      j.d1[k] = 2.0 * x[k] * p[1] * id;
      for (int l = 0; l < Dim; ++l) j.d2[k][l] = ((k == l ? 2.0 * p[1] : 0.0) + 4.0 * x[k] * x[l] * p[2]) * id;
    }
    return j;
  });
}

/// a - b pointwise, jets subtracted. Used for differences of metrics.
template <int Dim>
MetricField<Dim> difference(const MetricField<Dim>& a, const MetricField<Dim>& b) {
  MetricField<Dim> f([a, b](const Vec<Dim>& x) -> Mat<Dim> { return a(x) - b(x); }, a.regularity(), a.domain(),
                     a.fd_step());
  return f.with_jet([a, b](const Vec<Dim>& x) { return a.jet(x) - b.jet(x); });
}

// --- checks ----------------------------------------------------------------

/// Symmetric within tol and Cholesky-positive.
template <int Dim>
bool is_spd(const Mat<Dim>& m, double symmetry_tol = 1e-12) {
  if (max_abs(m - m.transpose()) > symmetry_tol * std::max(1.0, max_abs(m))) return false;
  Eigen::LLT<Mat<Dim>> llt(m);
  return llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().diagonal().minCoeff() > 0.0;
}

template <int Dim>
std::string format_point(const Vec<Dim>& x) {
  std::ostringstream os;
  os.precision(17);
  os << "(";
  for (int i = 0; i < Dim; ++i) os << (i ? ", " : "") << x[i];
  os << ")";
  return os.str();
}

template <int Dim>
void require_spd(const Mat<Dim>& m, const Vec<Dim>& x, const char* who) {
  if (!is_spd<Dim>(m)) throw NumericalAbort(std::string(who) + ": positive definiteness lost at " + format_point<Dim>(x));
}

// --- operators -------------------------------------------------------------

/// (Phi^* g)(x) = DPhi(x)^T g(Phi(x)) DPhi(x). Throws InputError when Phi(x)
/// leaves g's domain.
template <int Dim, class Map>
MetricField<Dim> pullback_metric(const MetricField<Dim>& g, Map phi) {
  return MetricField<Dim>(
      [g, phi](const Vec<Dim>& x) -> Mat<Dim> {
        const MapSample<Dim> m = phi.sample(x);
        const Mat<Dim> v = g.at(m.value);
        return m.jacobian.transpose() * v * m.jacobian;
      },
      g.regularity(), FieldDomain<Dim>::whole(), g.fd_step());
}

namespace detail {

// sum_j b_j Ds_j(u)^T G(s_j(u)) Ds_j(u) / sum_j b_j, u in the open unit ball.
template <int Dim, class ChartMetric>
Mat<Dim> shifted_pullback_average(const ChartMetric& gchart, const MollifierKernel<Dim>& kernel, const Vec<Dim>& u) {
  const auto& ys = kernel.shifts();
  const auto& bs = kernel.shift_weights();
  Mat<Dim> acc = Mat<Dim>::Zero();
  if (u.norm() + kernel.epsilon() <= radial::blend_lo) {
    // every s_j is a translation here
    for (std::size_t j = 0; j < ys.size(); ++j) acc += bs[j] * gchart(Vec<Dim>(u + ys[j]));
    return acc / kernel.shift_weight_total();
  }
  const BallMap<Dim> ball{};
  const MapSample<Dim> pre = ball.inverse_sample(u);
  for (std::size_t j = 0; j < ys.size(); ++j) {
    const MapSample<Dim> m = ShiftMap<Dim>::compose(pre, ys[j], ball);
    acc += bs[j] * (m.jacobian.transpose() * gchart(m.value) * m.jacobian);
  }
  return acc / kernel.shift_weight_total();
}

}  // namespace detail

/// H-tilde_eps(g)(x) = sum_j b_j (s_{y_j}^* g)(x) / sum_j b_j. Equal to g(x)
/// exactly for |x| >= the shift threshold (in particular off the unit ball).
/// The kernel must outlive the returned field.
template <int Dim>
MetricField<Dim> H_tilde_eps(const MetricField<Dim>& g, const MollifierKernel<Dim>& kernel, bool check_spd = true) {
  const MollifierKernel<Dim>* k = &kernel;
  return MetricField<Dim>(
      [g, k, check_spd](const Vec<Dim>& x) -> Mat<Dim> {
        if (x.norm() >= radial::shift_threshold) return g(x);
        const Mat<Dim> v = detail::shifted_pullback_average<Dim>(g, *k, x);
        if (check_spd) require_spd<Dim>(v, x, "H_tilde_eps");
        return v;
      },
      Regularity::Smooth, FieldDomain<Dim>::whole(), g.fd_step());
}

/// (phi^{-1})^* H-tilde_eps(phi_* g): H-tilde transported through an affine
/// chart, without cutoff. Equal to g(x) exactly where |phi(x)| >= the shift threshold.
template <int Dim>
MetricField<Dim> chart_H_tilde(const MetricField<Dim>& g, const AtlasChart<Dim>& chart,
                               const MollifierKernel<Dim>& kernel) {
  const MollifierKernel<Dim>* k = &kernel;
  return MetricField<Dim>(
      [g, chart, k](const Vec<Dim>& x) -> Mat<Dim> {
        const Vec<Dim> u = chart.to_chart(x);
        if (u.norm() >= radial::shift_threshold) return g(x);
        const auto pulled = [&g, &chart](const Vec<Dim>& v) -> Mat<Dim> { return g(chart.from_chart(v)); };
        const Mat<Dim> v = detail::shifted_pullback_average<Dim>(pulled, *k, u);
        require_spd<Dim>(v, x, "H_tilde_eps");
        return v;
      },
      Regularity::Smooth, g.domain(), g.fd_step());
}

/// H_{e,i}(g0) = (phi^{-1})^* H-tilde_eps(phi_* (h g0)) + (1 - h) g0.
/// Bit-exact g0 wherever the cutoff h vanishes (in particular off V_i).
template <int Dim>
MetricField<Dim> H_e_i(const MetricField<Dim>& g0, const AtlasChart<Dim>& chart, const MollifierKernel<Dim>& kernel) {
  const MollifierKernel<Dim>* k = &kernel;
  return MetricField<Dim>(
      [g0, chart, k](const Vec<Dim>& x) -> Mat<Dim> {
        const double hx = chart.bump(x);
        const Mat<Dim> base = g0(x);
        if (hx == 0.0) return base;
        const Vec<Dim> u = chart.to_chart(x);
        Mat<Dim> smoothed;
        if (u.norm() >= radial::shift_threshold) {
          smoothed = hx * base;
        } else {
          // chart scalings cancel: phi is affine with Dphi = I / radius
          const auto weighted = [&g0, &chart](const Vec<Dim>& v) -> Mat<Dim> {
            const Vec<Dim> z = chart.from_chart(v);
            const double hz = chart.bump(z);
            if (hz == 0.0) return Mat<Dim>::Zero();
            return hz * g0(z);
          };
          smoothed = detail::shifted_pullback_average<Dim>(weighted, *k, u);
        }
        const Mat<Dim> out = smoothed + (1.0 - hx) * base;
        require_spd<Dim>(out, x, "H_e_i");
        return out;
      },
      Regularity::Smooth, g0.domain(), g0.fd_step());
}

/// Points used to probe isometry / invariance when no grid is supplied.
template <int Dim>
std::vector<Vec<Dim>> probe_points(double radius) {
  std::vector<Vec<Dim>> pts{Vec<Dim>::Zero()};
  const double fr[] = {0.17, 0.43, 0.71, 0.93};
  for (int i = 0; i < 4; ++i) {
    Vec<Dim> v;
    for (int d = 0; d < Dim; ++d) v[d] = std::cos(1.3 * (i + 1) + 2.1 * d);
    pts.push_back(radius * fr[i] * v.normalized());
  }
  return pts;
}

/// max over g, x of max-entry |R_g^T G(R_g x) R_g - G(x)|.
template <int Dim>
double isometry_residual(const MetricField<Dim>& g, const GroupAction<Dim>& group, const std::vector<Vec<Dim>>& points) {
  double worst = 0.0;
  for (const auto& r : group.probe_elements())
    for (const auto& x : points) worst = std::max(worst, max_abs(Mat<Dim>(r.transpose() * g(r * x) * r - g(x))));
  return worst;
}

struct HaarOptions {
  double isometry_tolerance = 1e-8;
  double probe_radius = 1.0;
};

/// H^G_i(g0)(x) = sum_g w_g (alpha^g)^* H_{e,i}(g0)(x). Rejects groups that
/// do not act by isometries of g0.
template <int Dim>
MetricField<Dim> haar_average_metric(const MetricField<Dim>& g0, const AtlasChart<Dim>& chart,
                                     const MollifierKernel<Dim>& kernel, const GroupAction<Dim>& group,
                                     const HaarOptions& opt = {}) {
  const double res = isometry_residual(g0, group, probe_points<Dim>(opt.probe_radius));
  if (res > opt.isometry_tolerance)
    throw InputError("haar_average_metric: " + group.name() + " does not act by isometries (residual " +
                     std::to_string(res) + ")");
  const MetricField<Dim> he = H_e_i(g0, chart, kernel);
  if (group.size() == 1 && max_abs(Mat<Dim>(group.elements()[0] - Mat<Dim>::Identity())) == 0.0) return he;
  const auto& els = group.elements();
  const auto& ws = group.haar_weights();
  return MetricField<Dim>(
      [he, els, ws](const Vec<Dim>& x) -> Mat<Dim> {
        Mat<Dim> acc = Mat<Dim>::Zero();
        for (std::size_t i = 0; i < els.size(); ++i) acc += ws[i] * (els[i].transpose() * he(els[i] * x) * els[i]);
        return acc;
      },
      Regularity::Smooth, g0.domain(), g0.fd_step());
}

/// One stage of the composite metric operator.
template <int Dim>
struct MetricStage {
  AtlasChart<Dim> chart;
  const MollifierKernel<Dim>* kernel;
  GroupAction<Dim> group;
};

/// H^G_s o ... o H^G_1 (g0) over a finite atlas (stage 1 applied first).
template <int Dim>
MetricField<Dim> compose_HG(const MetricField<Dim>& g0, const std::vector<MetricStage<Dim>>& stages,
                            const HaarOptions& opt = {}) {
  MetricField<Dim> g = g0;
  for (const auto& s : stages) g = haar_average_metric(g, s.chart, *s.kernel, s.group, opt);
  return g;
}

// --- grids, seminorms ------------------------------------------------------

/// Regular lattice points of spacing h restricted to a ball or box; `weight`
/// is the cell volume used for L^p sums.
template <int Dim>
struct SampleGrid {
  std::vector<Vec<Dim>> points;
  double spacing = 0.0;
  double weight = 0.0;
  int resolution = 0;

  std::size_t size() const { return points.size(); }
};

/// resolution x ... x resolution lattice on [c - r, c + r]^n, keeping the
/// points where keep(x) holds.
template <int Dim>
SampleGrid<Dim> lattice_grid_where(const Vec<Dim>& center, double radius, int resolution,
                                   const std::function<bool(const Vec<Dim>&)>& keep) {
  if (resolution < 2) throw InputError("lattice_grid: resolution must be >= 2");
  if (!(radius > 0.0)) throw InputError("lattice_grid: radius must be positive");
  SampleGrid<Dim> grid;
  grid.resolution = resolution;
  grid.spacing = 2.0 * radius / (resolution - 1);
  grid.weight = std::pow(grid.spacing, Dim);
  std::array<int, Dim> idx{};
  while (true) {
    Vec<Dim> x;
    for (int d = 0; d < Dim; ++d) x[d] = center[d] - radius + grid.spacing * idx[d];
    if (keep(x)) grid.points.push_back(x);
    int d = 0;
    while (d < Dim && ++idx[d] == resolution) idx[d++] = 0;
    if (d == Dim) break;
  }
  return grid;
}

/// Lattice restricted to the closed ball |x - c| <= r (ball = true) or the whole cube.
template <int Dim>
SampleGrid<Dim> lattice_grid(const Vec<Dim>& center, double radius, int resolution, bool ball = true) {
  return lattice_grid_where<Dim>(center, radius, resolution, [&](const Vec<Dim>& x) {
    return !ball || (x - center).norm() <= radius * (1.0 + 1e-12);
  });
}

enum class SeminormOrder { W2p, C1Alpha };

struct SeminormOptions {
  double p = std::numeric_limits<double>::infinity();
  SeminormOrder order = SeminormOrder::W2p;
  bool check_stability = false;  // re-evaluate on the refined grid
};

struct SeminormReport {
  double p = 0.0;
  SeminormOrder order = SeminormOrder::W2p;
  double value = 0.0;
  double alpha = 0.0;  // Holder exponent (C1Alpha only)
  std::size_t samples = 0;
  double spacing = 0.0;
  std::optional<double> refined_value;
  bool stable = true;  // refined value within 10%
};

namespace detail {

template <int Dim>
double seminorm_on(const MetricField<Dim>& g, const SampleGrid<Dim>& grid, const SeminormOptions& opt, double& alpha) {
  const std::vector<MetricJet<Dim>> jets = parallel_map(grid.size(), [&](std::size_t i) { return g.jet(grid.points[i]); });
  const bool inf = std::isinf(opt.p);
  double best = 0.0;
  alpha = 0.0;
  if (opt.order == SeminormOrder::W2p) {
    for (int a = 0; a < Dim; ++a)
      for (int b = a; b < Dim; ++b) {
        // all derivatives of order <= 2 of component (a, b), mixed ones once
        double total = 0.0;
        const auto accumulate = [&](double v) {
          if (inf)
            total = std::max(total, std::abs(v));
          else
            total += std::pow(std::abs(v), opt.p) * grid.weight;
        };
        for (const auto& j : jets) {
          accumulate(j.value(a, b));
          for (int k = 0; k < Dim; ++k) {
            accumulate(j.d1[k](a, b));
            for (int l = k; l < Dim; ++l) accumulate(j.d2[k][l](a, b));
          }
        }
        best = std::max(best, inf ? total : std::pow(total, 1.0 / opt.p));
      }
    return best;
  }
  // (1, alpha): sup |g|, sup |Dg| and Holder quotients of Dg between lattice neighbours
  if (inf) alpha = 1.0;
  else alpha = 1.0 - Dim / opt.p;
  if (!(alpha > 0.0)) throw InputError("sobolev_seminorm: (1,alpha) needs p > n");
  for (const auto& j : jets) {
    best = std::max(best, max_abs(j.value));
    for (int k = 0; k < Dim; ++k) best = std::max(best, max_abs(j.d1[k]));
  }
  const double reach = 1.5 * grid.spacing * std::sqrt(double(Dim));
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (std::size_t m = i + 1; m < grid.size(); ++m) {
      const double dist = (grid.points[i] - grid.points[m]).norm();
      if (dist > reach) continue;
      for (int k = 0; k < Dim; ++k)
        best = std::max(best, max_abs(Mat<Dim>(jets[i].d1[k] - jets[m].d1[k])) / std::pow(dist, alpha));
    }
  return best;
}

}  // namespace detail

/// Discrete seminorm of a tensor field: max over components of the W^{2,p}
/// norm (0th, 1st and 2nd order terms; p = inf takes sup over the grid), or
/// the (1, alpha) Holder-type norm with alpha = 1 - n/p.
template <int Dim>
SeminormReport sobolev_seminorm(const MetricField<Dim>& g, const SampleGrid<Dim>& grid, const SeminormOptions& opt = {}) {
  if (grid.size() == 0) throw InputError("sobolev_seminorm: empty grid");
  SeminormReport r;
  r.p = opt.p;
  r.order = opt.order;
  r.samples = grid.size();
  r.spacing = grid.spacing;
  r.value = detail::seminorm_on(g, grid, opt, r.alpha);
  if (opt.check_stability) {
    // nested refinement of the same box
    Vec<Dim> lo = grid.points.front(), hi = grid.points.front();
    for (const auto& x : grid.points) {
      lo = lo.cwiseMin(x);
      hi = hi.cwiseMax(x);
    }
    const Vec<Dim> c = 0.5 * (lo + hi);
    const double rad = 0.5 * (hi - lo).maxCoeff();
    const SampleGrid<Dim> fine = lattice_grid<Dim>(c, rad, 2 * grid.resolution - 1);
    double a2 = 0.0;
    r.refined_value = detail::seminorm_on(g, fine, opt, a2);
    const double scale = std::max(std::abs(r.value), 1e-300);
    r.stable = std::abs(*r.refined_value - r.value) <= 0.1 * scale || (r.value == 0.0 && *r.refined_value == 0.0);
  }
  return r;
}

/// min over the grid of the smallest eigenvalue of g (Rayleigh quotient
/// infimum against the Euclidean inner product).
template <int Dim>
double a_nu(const MetricField<Dim>& g, const SampleGrid<Dim>& grid) {
  if (grid.size() == 0) throw InputError("a_nu: empty grid");
  const std::vector<double> mins = parallel_map(grid.size(), [&](std::size_t i) {
    Eigen::SelfAdjointEigenSolver<Mat<Dim>> es(g(grid.points[i]), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  });
  const double m = *std::min_element(mins.begin(), mins.end());
  if (!(m > 0.0)) throw InputError("a_nu: field is not positive definite on the grid");
  return m;
}

/// max over g in the probe set and grid points of |(alpha^g)^* G - G|.
template <int Dim>
double invariance_residual(const MetricField<Dim>& g, const GroupAction<Dim>& group, const SampleGrid<Dim>& grid) {
  return isometry_residual(g, group, grid.points);
}

struct EpsilonSelection {
  bool found = false;
  double epsilon = 0.0;
  double seminorm = 0.0;  // at the returned epsilon, or the best achieved when not found
  double bound = 0.0;     // a_nu / k
  std::vector<std::pair<double, double>> evaluated;  // (epsilon, seminorm) in evaluation order
};

/// |H^G_i(g0) - g0| seminorm as a function of epsilon, memoized so that a
/// sweep over k reuses evaluations.
template <int Dim>
class SmoothingDistance {
public:
  SmoothingDistance(MetricField<Dim> g0, AtlasChart<Dim> chart, GroupAction<Dim> group, SampleGrid<Dim> grid,
                    int kernel_level = default_kernel_level, SeminormOptions opt = {})
      : g0_(std::move(g0)), chart_(chart), group_(std::move(group)), grid_(std::move(grid)), level_(kernel_level),
        opt_(opt) {}

  double operator()(double epsilon) {
    if (auto it = cache_.find(epsilon); it != cache_.end()) return it->second;
    const MollifierKernel<Dim> kernel(epsilon, level_);
    const MetricField<Dim> smoothed = haar_average_metric(g0_, chart_, kernel, group_);
    const double v = sobolev_seminorm(difference(smoothed, g0_), grid_, opt_).value;
    cache_[epsilon] = v;
    return v;
  }

private:
  MetricField<Dim> g0_;
  AtlasChart<Dim> chart_;
  GroupAction<Dim> group_;
  SampleGrid<Dim> grid_;
  int level_;
  SeminormOptions opt_;
  std::map<double, double> cache_;
};

/// Log-spaced candidates eps_max, eps_max * q, ..., >= eps_min (descending).
inline std::vector<double> epsilon_candidates(double eps_min, double eps_max, int count) {
  if (!(eps_min > 0.0 && eps_max >= eps_min) || count < 1)
    throw InputError("epsilon_candidates: need 0 < eps_min <= eps_max and count >= 1");
  std::vector<double> out;
  for (int i = 0; i < count; ++i) {
    const double t = count == 1 ? 0.0 : double(i) / (count - 1);
    out.push_back(eps_max * std::pow(eps_min / eps_max, t));
  }
  return out;
}

/// Bisection over the descending candidate list for the largest epsilon with
/// distance(epsilon) <= a_nu / k. Assumes the distance decreases with epsilon.
template <class Distance>
EpsilonSelection select_epsilon_for_k(Distance& distance, int k, double a_nu_value, const std::vector<double>& candidates) {
  if (k < 1) throw InputError("select_epsilon_for_k: k must be >= 1");
  if (!(a_nu_value > 0.0)) throw InputError("select_epsilon_for_k: a_nu must be positive");
  if (candidates.empty()) throw InputError("select_epsilon_for_k: empty candidate list");
  EpsilonSelection sel;
  sel.bound = a_nu_value / k;
  sel.seminorm = std::numeric_limits<double>::infinity();
  const auto eval = [&](std::size_t i) {
    const double v = distance(candidates[i]);
    sel.evaluated.emplace_back(candidates[i], v);
    return v;
  };
  // first passing index in the descending list
  std::size_t lo = 0, hi = candidates.size();  // answer in [lo, hi], hi = none
  const double first = eval(0);
  if (first <= sel.bound) {
    sel.found = true;
    sel.epsilon = candidates[0];
    sel.seminorm = first;
    return sel;
  }
  lo = 1;
  const double last = eval(candidates.size() - 1);
  if (last > sel.bound) {
    for (const auto& [e, v] : sel.evaluated) sel.seminorm = std::min(sel.seminorm, v);
    return sel;
  }
  hi = candidates.size() - 1;
  double at_hi = last;
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    const double v = eval(mid);
    if (v <= sel.bound) {
      hi = mid;
      at_hi = v;
    } else {
      lo = mid + 1;
    }
  }
  sel.found = true;
  sel.epsilon = candidates[hi];
  sel.seminorm = at_hi;
  return sel;
}

}  // namespace eqmollify
