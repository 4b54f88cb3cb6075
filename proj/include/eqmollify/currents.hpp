#pragma once

/**
 * @file currents.hpp
 * @brief Finitely represented m-currents on R^n, compactly supported test
 *        forms, and the smoothing operators built on translations (Z), on the
 *        ball shifts s_y (Z-tilde), on a chart with a cutoff, and the
 *        Haar-averaged equivariant operator.
 *
 * Every operator here is realized weakly: the current is never moved, the
 * test form is pulled back instead. Each smoothing operator therefore comes
 * with an adjoint acting on forms, e.g.
 *   (Z T)(w) = T(Z^t w),   (Z^t w)(x)[xi] = sum_j b_j w(x + y_j)[xi] / sum_j b_j,
 * and compositions of operators become compositions of adjoints in reverse.
 */

#include "eqmollify/ball_diffeomorphism.hpp"
#include "eqmollify/chart.hpp"
#include "eqmollify/core.hpp"
#include "eqmollify/group_action.hpp"
#include "eqmollify/mollifier_kernel.hpp"
#include "eqmollify/quadrature.hpp"

#include <algorithm>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace eqmollify {

/// Columns span an oriented m-plane (m <= Dim); their wedge is the m-vector.
template <int Dim>
using Frame = Eigen::Matrix<double, Dim, Eigen::Dynamic, Eigen::ColMajor, Dim, Dim>;

namespace detail {

inline std::vector<std::vector<int>> increasing_multi_indices(int n, int m) {
  std::vector<std::vector<int>> out;
  std::vector<int> idx(m);
  std::function<void(int, int)> rec = [&](int pos, int start) {
    if (pos == m) {
      out.push_back(idx);
      return;
    }
    for (int i = start; i < n; ++i) {
      idx[pos] = i;
      rec(pos + 1, i + 1);
    }
  };
  rec(0, 0);
  return out;
}

template <int Dim>
double minor_det(const Frame<Dim>& f, const std::vector<int>& rows) {
  const int m = static_cast<int>(rows.size());
  if (m == 0) return 1.0;
  if (m == 1) return f(rows[0], 0);
  if (m == 2) return f(rows[0], 0) * f(rows[1], 1) - f(rows[1], 0) * f(rows[0], 1);
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, Dim, Dim> sub(m, m);
  for (int i = 0; i < m; ++i) sub.row(i) = f.row(rows[i]);
  return sub.determinant();
}

}  // namespace detail

template <int Dim>
class TestForm {
public:
  using Coefficient = std::function<double(const Vec<Dim>&)>;
  using Pairing = std::function<double(const Vec<Dim>&, const Frame<Dim>&)>;

  /// Form sum_I c_I(x) dx^I over increasing multi-indices I (lexicographic
  /// order), vanishing outside the open ball B(center, support_radius).
  TestForm(int degree, std::vector<Coefficient> coefficients, const Vec<Dim>& center, double support_radius)
      : degree_(degree), center_(center), radius_(support_radius) {
    if (degree < 0 || degree > Dim) throw InputError("TestForm: degree out of range");
    const auto indices = detail::increasing_multi_indices(Dim, degree);
    if (coefficients.size() != indices.size())
      throw InputError("TestForm: expected " + std::to_string(indices.size()) + " coefficients");
    pairing_ = [coefficients = std::move(coefficients), indices](const Vec<Dim>& x, const Frame<Dim>& f) {
      double s = 0.0;
      for (std::size_t i = 0; i < indices.size(); ++i) {
        const double d = detail::minor_det<Dim>(f, indices[i]);
        if (d != 0.0) s += coefficients[i](x) * d;
      }
      return s;
    };
  }

  /// A form given directly by its pairing with m-vectors.
  static TestForm from_pairing(int degree, Pairing pairing, const Vec<Dim>& center, double support_radius) {
    TestForm f;
    f.degree_ = degree;
    f.center_ = center;
    f.radius_ = support_radius;
    f.pairing_ = std::move(pairing);
    return f;
  }

  int degree() const { return degree_; }
  const Vec<Dim>& support_center() const { return center_; }
  double support_radius() const { return radius_; }
  bool vanishes_at(const Vec<Dim>& x) const { return !((x - center_).norm() < radius_); }

  /// <w(x), v_1 ^ ... ^ v_m> for the columns of frame. Exactly 0 outside the support.
  double pair(const Vec<Dim>& x, const Frame<Dim>& frame) const {
    if (vanishes_at(x)) return 0.0;
    return pairing_(x, frame);
  }

  /// Value of a 0-form.
  double operator()(const Vec<Dim>& x) const { return pair(x, Frame<Dim>(Dim, 0)); }

  /// (A^* w)(x)[xi] = w(Ax)[A xi] for an orthogonal A.
  TestForm pullback(const Mat<Dim>& a) const {
    auto base = pairing_;
    const Vec<Dim> c = center_;
    const double r = radius_;
    return from_pairing(
        degree_,
        [base, a, c, r](const Vec<Dim>& x, const Frame<Dim>& f) {
          const Vec<Dim> ax = a * x;
          if (!((ax - c).norm() < r)) return 0.0;
          return base(ax, Frame<Dim>(a * f));
        },
        a.transpose() * center_, radius_);
  }

private:
  TestForm() = default;

  int degree_ = 0;
  Vec<Dim> center_ = Vec<Dim>::Zero();
  double radius_ = 0.0;
  Pairing pairing_;
};

/// One weighted evaluation point of a current: T(w) ~ sum weight * <w(point), frame>.
template <int Dim>
struct CurrentSample {
  Vec<Dim> point;
  Frame<Dim> frame;
  double weight;
};

/// Controls how simplices are discretized when a current is sampled.
struct SimplexQuadrature {
  int gauss_order = 8;   // per parameter direction
  int subdivisions = 4;  // per edge (segments and triangles)
};

template <int Dim>
class Current {
public:
  using Density = std::function<double(const Vec<Dim>&)>;

  struct Dirac {
    Vec<Dim> point;
    Frame<Dim> frame;  // basis of the m-plane; the m-vector is their wedge
  };
  struct Simplex {
    std::vector<Vec<Dim>> vertices;  // m + 1 vertices, orientation by order
  };

  /// Weighted Dirac m-current; frame has m columns (m = 0 allowed).
  static Current dirac(const Vec<Dim>& point, const Frame<Dim>& frame, double weight = 1.0) {
    Current c(static_cast<int>(frame.cols()));
    c.pieces_.push_back({Dirac{point, frame}, weight, nullptr});
    return c;
  }

  static Current point_mass(const Vec<Dim>& point, double weight = 1.0) {
    return dirac(point, Frame<Dim>(Dim, 0), weight);
  }

  /// Sum of oriented m-simplices with real multiplicities.
  static Current polyhedral(int degree, const std::vector<std::vector<Vec<Dim>>>& simplices,
                            const std::vector<double>& multiplicities) {
    if (simplices.size() != multiplicities.size())
      throw InputError("Current::polyhedral: one multiplicity per simplex required");
    Current c(degree);
    for (std::size_t i = 0; i < simplices.size(); ++i) {
      const auto& v = simplices[i];
      if (static_cast<int>(v.size()) != degree + 1)
        throw InputError("Current::polyhedral: an m-simplex needs m + 1 vertices");
      if (degree > 0 && simplex_volume(v) <= 1e-14) throw InputError("Current::polyhedral: degenerate simplex");
      c.pieces_.push_back({Simplex{v}, multiplicities[i], nullptr});
    }
    return c;
  }

  /// Closed polygonal 1-current through the given vertices (unit multiplicity).
  static Current polygon(const std::vector<Vec<Dim>>& vertices) {
    std::vector<std::vector<Vec<Dim>>> segs;
    for (std::size_t i = 0; i < vertices.size(); ++i)
      segs.push_back({vertices[i], vertices[(i + 1) % vertices.size()]});
    return polyhedral(1, segs, std::vector<double>(segs.size(), 1.0));
  }

  static Current zero(int degree) { return Current(degree); }

  int degree() const { return degree_; }
  static constexpr int ambient_dimension() { return Dim; }
  bool empty() const { return pieces_.empty(); }

  Current operator+(const Current& o) const {
    if (o.degree_ != degree_) throw InputError("Current: cannot add currents of different degree");
    Current c = *this;
    c.pieces_.insert(c.pieces_.end(), o.pieces_.begin(), o.pieces_.end());
    return c;
  }
  Current operator*(double a) const {
    Current c = *this;
    for (auto& p : c.pieces_) p.weight *= a;
    return c;
  }
  Current operator-(const Current& o) const { return *this + o * -1.0; }

  /// The current x -> density(x) T (multiplies any existing density).
  Current with_density(Density density) const {
    Current c = *this;
    auto shared = std::make_shared<const Density>(std::move(density));
    for (auto& p : c.pieces_) {
      if (p.density) {
        auto prev = p.density;
        p.density = std::make_shared<const Density>(
            [prev, shared](const Vec<Dim>& x) { return (*prev)(x) * (*shared)(x); });
      } else {
        p.density = shared;
      }
    }
    return c;
  }

  /// Splits every 1-simplex at its crossings with the sphere |x - center| = radius.
  Current split_segments(const Vec<Dim>& center, double radius) const {
    Current c(degree_);
    for (const auto& p : pieces_) {
      const auto* s = std::get_if<Simplex>(&p.shape);
      if (!s || degree_ != 1) {
        c.pieces_.push_back(p);
        continue;
      }
      const Vec<Dim> a = s->vertices[0], d = s->vertices[1] - a;
      std::vector<double> cuts{0.0};
      // |a - center + t d|^2 = radius^2
      const double qa = d.squaredNorm(), qb = 2.0 * d.dot(a - center), qc = (a - center).squaredNorm() - radius * radius;
      const double disc = qb * qb - 4.0 * qa * qc;
      if (disc > 0.0) {
        const double sq = std::sqrt(disc);
        for (double t : {(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)})
          if (t > 1e-12 && t < 1.0 - 1e-12) cuts.push_back(t);
      }
      cuts.push_back(1.0);
      std::sort(cuts.begin(), cuts.end());
      for (std::size_t k = 0; k + 1 < cuts.size(); ++k)
        c.pieces_.push_back({Simplex{{a + cuts[k] * d, a + cuts[k + 1] * d}}, p.weight, p.density});
    }
    return c;
  }

  /// Points where the current is concentrated (Dirac points, simplex vertices).
  std::vector<Vec<Dim>> support_points() const {
    std::vector<Vec<Dim>> out;
    for (const auto& p : pieces_) {
      if (const auto* d = std::get_if<Dirac>(&p.shape))
        out.push_back(d->point);
      else
        for (const auto& v : std::get<Simplex>(p.shape).vertices) out.push_back(v);
    }
    return out;
  }

  /// Weighted evaluation points; T(w) = sum weight * <w(point), frame> up to
  /// the simplex quadrature error (exact for Dirac pieces).
  std::vector<CurrentSample<Dim>> samples(const SimplexQuadrature& q = {}) const {
    std::vector<CurrentSample<Dim>> out;
    for (const auto& p : pieces_) {
      if (const auto* d = std::get_if<Dirac>(&p.shape)) {
        const double dens = p.density ? (*p.density)(d->point) : 1.0;
        out.push_back({d->point, d->frame, p.weight * dens});
        continue;
      }
      for (const auto& sub : subdivide(std::get<Simplex>(p.shape).vertices, q.subdivisions)) {
        Frame<Dim> edges(Dim, degree_);
        for (int k = 0; k < degree_; ++k) edges.col(k) = sub[k + 1] - sub[0];
        for (const auto& [bary, w] : simplex_rule(degree_, q.gauss_order)) {
          Vec<Dim> x = sub[0];
          for (int k = 0; k < degree_; ++k) x += bary[k] * edges.col(k);
          const double dens = p.density ? (*p.density)(x) : 1.0;
          out.push_back({x, edges, p.weight * w * dens});
        }
      }
    }
    return out;
  }

private:
  struct Piece {
    std::variant<Dirac, Simplex> shape;
    double weight;
    std::shared_ptr<const Density> density;
  };

  explicit Current(int degree) : degree_(degree) {
    if (degree < 0 || degree > Dim) throw InputError("Current: degree must satisfy 0 <= m <= n");
  }

  static double simplex_volume(const std::vector<Vec<Dim>>& v) {
    const int m = static_cast<int>(v.size()) - 1;
    Eigen::Matrix<double, Dim, Eigen::Dynamic, 0, Dim, Dim> e(Dim, m);
    for (int k = 0; k < m; ++k) e.col(k) = v[k + 1] - v[0];
    return std::sqrt(std::max(0.0, (e.transpose() * e).determinant())) / std::tgamma(m + 1.0);
  }

  // Uniform refinement of segments and triangles; other simplices unchanged.
  static std::vector<std::vector<Vec<Dim>>> subdivide(const std::vector<Vec<Dim>>& v, int k) {
    const int m = static_cast<int>(v.size()) - 1;
    if (k <= 1 || m == 0 || m > 2) return {v};
    std::vector<std::vector<Vec<Dim>>> out;
    if (m == 1) {
      for (int i = 0; i < k; ++i)
        out.push_back({v[0] + (v[1] - v[0]) * (double(i) / k), v[0] + (v[1] - v[0]) * (double(i + 1) / k)});
      return out;
    }
    const Vec<Dim> e1 = (v[1] - v[0]) / k, e2 = (v[2] - v[0]) / k;
    auto at = [&](int i, int j) -> Vec<Dim> { return v[0] + i * e1 + j * e2; };
    for (int i = 0; i < k; ++i)
      for (int j = 0; j + i < k; ++j) {
        out.push_back({at(i, j), at(i + 1, j), at(i, j + 1)});
        if (i + j + 1 < k) out.push_back({at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)});
      }
    return out;
  }

  // Conical product Gauss rule on the standard m-simplex (weights sum to 1/m!).
  static std::vector<std::pair<std::vector<double>, double>> simplex_rule(int m, int order) {
    const GaussRule gl = gauss_legendre(order);
    std::vector<std::pair<std::vector<double>, double>> out{{{}, 1.0}};
    for (int dir = 0; dir < m; ++dir) {
      std::vector<std::pair<std::vector<double>, double>> next;
      for (const auto& [coords, w] : out) {
        double remaining = 1.0;
        for (double c : coords) remaining -= c;
        for (int i = 0; i < order; ++i) {
          const double t = 0.5 * (gl.nodes[i] + 1.0);
          auto c = coords;
          c.push_back(remaining * t);
          next.push_back({c, w * 0.5 * gl.weights[i] * std::pow(1.0 - t, m - dir - 1)});
        }
      }
      out = std::move(next);
    }
    return out;
  }

  int degree_;
  std::vector<Piece> pieces_;
};

// --- pairing -------------------------------------------------------------

template <int Dim>
double evaluate(const Current<Dim>& t, const TestForm<Dim>& w, const SimplexQuadrature& q = {}) {
  if (t.degree() != w.degree())
    throw InputError("evaluate: current has degree " + std::to_string(t.degree()) + ", form has degree " +
                     std::to_string(w.degree()));
  double s = 0.0;
  for (const auto& smp : t.samples(q)) s += smp.weight * w.pair(smp.point, smp.frame);
  return s;
}

/// Maps usable as pushforwards: `sample(x)` returns value and Jacobian.
template <int Dim>
struct IdentityMap {
  MapSample<Dim> sample(const Vec<Dim>& x) const { return {x, Mat<Dim>::Identity()}; }
};

template <int Dim>
struct Translation {
  Vec<Dim> y;
  MapSample<Dim> sample(const Vec<Dim>& x) const { return {x + y, Mat<Dim>::Identity()}; }
};

template <int Dim>
struct LinearMap {
  Mat<Dim> a;
  MapSample<Dim> sample(const Vec<Dim>& x) const { return {a * x, a}; }
};

/// (Phi_* T)(w) = T(Phi^* w), (Phi^* w)(x)[xi] = w(Phi(x))[DPhi(x) xi].
template <int Dim, class Map>
double pushforward_pairing(const Current<Dim>& t, const Map& phi, const TestForm<Dim>& w,
                           const SimplexQuadrature& q = {}) {
  if (t.degree() != w.degree()) throw InputError("pushforward_pairing: degree mismatch");
  double s = 0.0;
  for (const auto& smp : t.samples(q)) {
    const MapSample<Dim> m = phi.sample(smp.point);
    s += smp.weight * w.pair(m.value, Frame<Dim>(m.jacobian * smp.frame));
  }
  return s;
}

// --- adjoints of the smoothing operators ----------------------------------

/// Z^t w: average of translated forms.
template <int Dim>
TestForm<Dim> translation_adjoint(const TestForm<Dim>& w, const MollifierKernel<Dim>& kernel) {
  return TestForm<Dim>::from_pairing(
      w.degree(),
      [w, &kernel](const Vec<Dim>& x, const Frame<Dim>& f) {
        const auto& ys = kernel.shifts();
        const auto& bs = kernel.shift_weights();
        double s = 0.0;
        for (std::size_t j = 0; j < ys.size(); ++j) s += bs[j] * w.pair(x + ys[j], f);
        return s / kernel.shift_weight_total();
      },
      w.support_center(), w.support_radius() + kernel.epsilon());
}

namespace detail {

// sum_j b_j <w(s_j(u)), Ds_j(u) f> / sum_j b_j for u in the unit ball chart.
template <int Dim>
double shifted_average(const TestForm<Dim>& w, const MollifierKernel<Dim>& kernel, const Vec<Dim>& u,
                       const Frame<Dim>& f, const ChartCutoff<Dim>* chart) {
  const BallMap<Dim> ball{};
  const MapSample<Dim> pre = ball.inverse_sample(u);
  const auto& ys = kernel.shifts();
  const auto& bs = kernel.shift_weights();
  double s = 0.0;
  for (std::size_t j = 0; j < ys.size(); ++j) {
    const MapSample<Dim> m = ShiftMap<Dim>::compose(pre, ys[j], ball);
    const Vec<Dim> x = chart ? chart->from_chart(m.value) : m.value;
    s += bs[j] * w.pair(x, Frame<Dim>(m.jacobian * f));
  }
  return s / kernel.shift_weight_total();
}

}  // namespace detail

/// Z-tilde^t w. Exactly w at points with |x| >= the shift threshold, where
/// every s_y is the identity.
template <int Dim>
TestForm<Dim> shift_adjoint(const TestForm<Dim>& w, const MollifierKernel<Dim>& kernel) {
  return TestForm<Dim>::from_pairing(
      w.degree(),
      [w, &kernel](const Vec<Dim>& x, const Frame<Dim>& f) {
        if (x.norm() >= radial::shift_threshold) return w.pair(x, f);
        return detail::shifted_average<Dim>(w, kernel, x, f, nullptr);
      },
      w.support_center(), w.support_radius() + kernel.epsilon());
}

/// Adjoint of the chart-localized operator
///   T -> (phi^{-1})_* Z-tilde (phi)_* (h T) + (1 - h) T,
/// i.e. w -> h * (phi^{-1} o s_y o phi)^* averaged w + (1 - h) w.
template <int Dim>
TestForm<Dim> localized_adjoint(const TestForm<Dim>& w, const MollifierKernel<Dim>& kernel,
                                 const ChartCutoff<Dim>& chart) {
  return TestForm<Dim>::from_pairing(
      w.degree(),
      [w, &kernel, chart](const Vec<Dim>& x, const Frame<Dim>& f) {
        const double hx = chart.bump(x);
        const double plain = w.pair(x, f);
        if (hx == 0.0) return plain;
        const Vec<Dim> u = chart.to_chart(x);
        const double smoothed = u.norm() >= radial::shift_threshold
                                    ? plain
                                    : detail::shifted_average<Dim>(w, kernel, u, f, &chart);
        return hx * smoothed + (1.0 - hx) * plain;
      },
      w.support_center(), w.support_radius() + chart.radius * kernel.epsilon());
}

/// Adjoint of Z^G: sum_g haar(g) L^t((alpha^g)^* w).
template <int Dim>
TestForm<Dim> equivariant_adjoint(const TestForm<Dim>& w, const MollifierKernel<Dim>& kernel,
                                  const ChartCutoff<Dim>& chart, const GroupAction<Dim>& group) {
  std::vector<TestForm<Dim>> parts;
  for (const auto& g : group.elements()) parts.push_back(localized_adjoint(w.pullback(g), kernel, chart));
  const std::vector<double> weights = group.haar_weights();
  double reach = 0.0;
  for (const auto& p : parts) reach = std::max(reach, p.support_center().norm() + p.support_radius());
  return TestForm<Dim>::from_pairing(
      w.degree(),
      [parts = std::move(parts), weights](const Vec<Dim>& x, const Frame<Dim>& f) {
        double s = 0.0;
        for (std::size_t i = 0; i < parts.size(); ++i) s += weights[i] * parts[i].pair(x, f);
        return s;
      },
      Vec<Dim>::Zero(), reach);
}

// --- operators ------------------------------------------------------------

template <int Dim>
double smooth_Z(const Current<Dim>& t, const TestForm<Dim>& w, const MollifierKernel<Dim>& kernel,
                const SimplexQuadrature& q = {}) {
  return evaluate(t, translation_adjoint(w, kernel), q);
}

template <int Dim>
double smooth_Z_tilde(const Current<Dim>& t, const TestForm<Dim>& w, const MollifierKernel<Dim>& kernel,
                      const SimplexQuadrature& q = {}) {
  return evaluate(t, shift_adjoint(w, kernel), q);
}

/// T' = h T and T'' = T - T'. Segments are first split where they cross the
/// spheres bounding the cutoff transition.
template <int Dim>
std::pair<Current<Dim>, Current<Dim>> localize(const Current<Dim>& t, const ChartCutoff<Dim>& chart) {
  const Current<Dim> split =
      t.split_segments(chart.center, chart.inner * chart.radius).split_segments(chart.center, chart.outer * chart.radius);
  return {split.with_density([chart](const Vec<Dim>& x) { return chart.bump(x); }),
          split.with_density([chart](const Vec<Dim>& x) { return 1.0 - chart.bump(x); })};
}

/// Chart-localized, non-averaged operator (the identity-element term of Z^G).
template <int Dim>
double localized_Z(const Current<Dim>& t, const TestForm<Dim>& w, const MollifierKernel<Dim>& kernel,
                   const ChartCutoff<Dim>& chart, const SimplexQuadrature& q = {}) {
  return evaluate(t, localized_adjoint(w, kernel, chart), q);
}

/// max over g, w of |T((alpha^g)^* w) - T(w)|.
template <int Dim>
double invariance_residual(const Current<Dim>& t, const GroupAction<Dim>& group,
                           const std::vector<TestForm<Dim>>& forms, const SimplexQuadrature& q = {}) {
  double worst = 0.0;
  for (const auto& w : forms) {
    const double base = evaluate(t, w, q);
    for (const auto& g : group.probe_elements())
      worst = std::max(worst, std::abs(evaluate(t, w.pullback(g), q) - base));
  }
  return worst;
}

struct EquivariantOptions {
  /// T is accepted when invariance_residual <= tolerance * max(1, |T(w)|).
  double invariance_tolerance = 1e-8;
  SimplexQuadrature quadrature{};
};

/// Z^G T(w) = sum_g haar(g) (alpha^g)_* [ (phi^{-1})_* Z-tilde (phi)_* (h T) + (1-h) T ](w).
/// Rejects currents that are not G-invariant.
template <int Dim>
double equivariant_Z(const Current<Dim>& t, const TestForm<Dim>& w, const MollifierKernel<Dim>& kernel,
                     const ChartCutoff<Dim>& chart, const GroupAction<Dim>& group,
                     const EquivariantOptions& opt = {}) {
  const double residual = invariance_residual(t, group, {w}, opt.quadrature);
  const double scale = std::max(1.0, std::abs(evaluate(t, w, opt.quadrature)));
  if (residual > opt.invariance_tolerance * scale)
    throw InputError("equivariant_Z: current is not invariant under " + group.name() + " (residual " +
                     std::to_string(residual) + ")");
  return evaluate(t, equivariant_adjoint(w, kernel, chart, group), opt.quadrature);
}

/// One stage of the composite operator over a finite atlas.
template <int Dim>
struct CurrentStage {
  const MollifierKernel<Dim>* kernel;
  ChartCutoff<Dim> chart;
  GroupAction<Dim> group;
};

/// (Z^G_s o ... o Z^G_1 T)(w) = T(Z_1^t ... Z_s^t w).
template <int Dim>
double compose_Z(const Current<Dim>& t, const TestForm<Dim>& w, const std::vector<CurrentStage<Dim>>& stages,
                 const SimplexQuadrature& q = {}) {
  TestForm<Dim> form = w;
  for (auto it = stages.rbegin(); it != stages.rend(); ++it)
    form = equivariant_adjoint(form, *it->kernel, it->chart, it->group);
  return evaluate(t, form, q);
}

}  // namespace eqmollify
