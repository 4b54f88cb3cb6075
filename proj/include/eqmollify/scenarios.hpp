#pragma once

/**
 * @file scenarios.hpp
 * @brief Built-in planar scenarios: metric, atlas, group action, declared
 *        curvature facts, and the current / form banks.
 *
 *   euclid_z4           flat R^2, Z_4 rotations, orbit currents
 *   round_sphere_chart  4 delta / (1 + |x|^2)^2 on the unit disk, Z_8, K = 1
 *   radial_c11          phi(|x|^2) delta with phi C^{1,1} (kink at r0 = 0.45), S^1
 *   strip_two_charts    flat strip [-1,1] x [-0.3,0.3], two charts, trivial group
 *   orbit_currents      flat R^2, Z_4, Dirac orbits and a square loop
 *
 * Metric scenarios use charts of radius 3 centred on the disk, so the disk
 * sits inside the region where every shift s_y is a translation once
 * eps <= 11/30 - 1/3.
 */

#include "eqmollify/chart.hpp"
#include "eqmollify/core.hpp"
#include "eqmollify/currents.hpp"
#include "eqmollify/curvature.hpp"
#include "eqmollify/group_action.hpp"
#include "eqmollify/metric_fields.hpp"

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace eqmollify {

struct DeclaredBounds {
  double k_lower;
  double k_upper;
  std::string source;  // how the numbers were obtained
};

struct NamedCurrent {
  std::string name;
  Current<2> current;
};

struct NamedForm {
  std::string name;
  TestForm<2> form;
};

struct Scenario {
  std::string name;
  std::string description;
  MetricField<2> metric;
  std::optional<DeclaredBounds> bounds;
  std::vector<DiscontinuitySphere<2>> discontinuities;
  std::vector<AtlasChart<2>> atlas;
  GroupAction<2> group;
  std::vector<NamedCurrent> currents;
  std::vector<NamedForm> forms;  // degree 0 and degree 1 banks together
  /// sample domain: lattice on [center - radius, center + radius]^2 filtered by `inside`
  Vec<2> domain_center = Vec<2>::Zero();
  double domain_radius = 1.0;
  std::function<bool(const Vec<2>&)> inside;
  /// angular width of a fundamental domain of the group (2 pi for none, 0 for S^1)
  double fundamental_angle = 2.0 * pi;
  /// largest epsilon of the default halving schedule (chart units)
  double default_epsilon_max = 0.2;

  SampleGrid<2> grid(int resolution) const {
    return lattice_grid_where<2>(domain_center, domain_radius, resolution, inside);
  }

  /// Grid points inside the fundamental sector 0 <= arg x <= fundamental_angle
  /// (a single ray for the circle action; the full grid for trivial groups).
  std::vector<Vec<2>> fundamental_points(int resolution) const {
    if (fundamental_angle >= 2.0 * pi - 1e-12) return grid(resolution).points;
    std::vector<Vec<2>> out;
    if (fundamental_angle == 0.0) {
      for (int i = 0; i < resolution; ++i) {
        const Vec<2> x(domain_radius * i / (resolution - 1), 0.0);
        if (inside(x)) out.push_back(x);
      }
      return out;
    }
    for (const auto& x : grid(resolution).points) {
      double a = std::atan2(x[1], x[0]);
      if (a < 0.0) a += 2.0 * pi;
      if (x.norm() == 0.0 || a <= fundamental_angle + 1e-12) out.push_back(x);
    }
    return out;
  }

  std::vector<const NamedForm*> forms_of_degree(int m) const {
    std::vector<const NamedForm*> out;
    for (const auto& f : forms)
      if (f.form.degree() == m) out.push_back(&f);
    return out;
  }
};

struct ScenarioOptions {
  int torus_nodes = 64;
};

// --- metrics ---------------------------------------------------------------

/// 4 delta / (1 + |x|^2)^2, curvature +1.
inline MetricField<2> sphere_chart_metric() {
  return conformal_metric<2>(
      [](double s) {
        const double q = 1.0 + s;
        return std::array<double, 3>{4.0 / (q * q), -8.0 / (q * q * q), 24.0 / (q * q * q * q)};
      },
      Regularity::Smooth);
}

/// 4 delta / (1 - |x|^2)^2 on the open unit disk, curvature -1.
inline MetricField<2> poincare_ball_metric() {
  return conformal_metric<2>(
      [](double s) {
        if (!(s < 1.0)) throw InputError("poincare_ball_metric: point outside the open unit disk");
        const double q = 1.0 - s;
        return std::array<double, 3>{4.0 / (q * q), 8.0 / (q * q * q), 24.0 / (q * q * q * q)};
      },
      Regularity::Smooth, FieldDomain<2>::ball(Vec<2>::Zero(), 1.0));
}

namespace radial_c11_profile {
inline constexpr double slope = 0.5;
inline constexpr double bend = 1.0;
inline constexpr double r0 = 0.45;
inline constexpr double s0 = r0 * r0;

/// phi, phi', phi'' at s = |x|^2; phi'' jumps from 0 to 2 at s0.
inline std::array<double, 3> phi(double s) {
  if (s <= s0) return {1.0 + slope * s, slope, 0.0};
  const double d = s - s0;
  return {1.0 + slope * s + bend * d * d, slope + 2.0 * bend * d, 2.0 * bend};
}

/// K = -e^{-2u} Laplacian(u) with e^{2u} = phi(r^2).
inline double curvature(double r) {
  const double s = r * r;
  const auto p = phi(s);
  const double f1 = p[1] / (2.0 * p[0]);
  const double f2 = (p[2] * p[0] - p[1] * p[1]) / (2.0 * p[0] * p[0]);
  return -(4.0 * f1 + 4.0 * s * f2) / p[0];
}
}  // namespace radial_c11_profile

inline MetricField<2> radial_c11_metric() {
  return conformal_metric<2>(radial_c11_profile::phi, Regularity::C11);
}

/// Curvature bounds of radial_c11 on the closed unit disk from a dense radial
/// scan, skipping radii within `exclusion` of the kink.
inline DeclaredBounds radial_c11_scan_bounds(int samples, double exclusion) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int i = 0; i < samples; ++i) {
    const double r = double(i) / (samples - 1);
    if (std::abs(r - radial_c11_profile::r0) <= exclusion) continue;
    const double k = radial_c11_profile::curvature(r);
    lo = std::min(lo, k);
    hi = std::max(hi, k);
  }
  return {lo, hi, "dense radial scan"};
}

/// Fixture: the scan above with 2001 radii (10x the default ray of 201
/// points) and the default exclusion band 2e-3.
inline DeclaredBounds radial_c11_fixture() {
  return {-1.876435659089468, -0.7505940000544532, "radial scan, 2001 radii, band 2e-3"};
}

// --- forms -----------------------------------------------------------------

/// 1 on |x| <= inner, 0 on |x| >= outer.
inline double form_cutoff(const Vec<2>& x, double inner = 1.5, double outer = 2.5) {
  return 1.0 - smooth_step((x.norm() - inner) / (outer - inner));
}

inline std::vector<NamedForm> standard_form_bank() {
  using C = TestForm<2>::Coefficient;
  const Vec<2> c = Vec<2>::Zero();
  const double R = 2.5;
  const auto cut = [](std::function<double(const Vec<2>&)> f) -> C {
    return [f](const Vec<2>& x) { return form_cutoff(x) * f(x); };
  };
  std::vector<NamedForm> bank;
  const auto add0 = [&](const std::string& n, std::function<double(const Vec<2>&)> f) {
    bank.push_back({n, TestForm<2>(0, {cut(f)}, c, R)});
  };
  const auto add1 = [&](const std::string& n, std::function<double(const Vec<2>&)> a,
                        std::function<double(const Vec<2>&)> b) {
    bank.push_back({n, TestForm<2>(1, {cut(a), cut(b)}, c, R)});
  };
  add0("one", [](const Vec<2>&) { return 1.0; });
  add0("x1", [](const Vec<2>& x) { return x[0]; });
  add0("x2", [](const Vec<2>& x) { return x[1]; });
  add0("x1^2", [](const Vec<2>& x) { return x[0] * x[0]; });
  add0("x1x2", [](const Vec<2>& x) { return x[0] * x[1]; });
  add0("x2^2", [](const Vec<2>& x) { return x[1] * x[1]; });
  add0("|x|^2", [](const Vec<2>& x) { return x.squaredNorm(); });
  add0("x1^2-x2^2", [](const Vec<2>& x) { return x[0] * x[0] - x[1] * x[1]; });
  add0("1+x1-x2", [](const Vec<2>& x) { return 1.0 + x[0] - x[1]; });
  add0("2+x1^2+0.5x2", [](const Vec<2>& x) { return 2.0 + x[0] * x[0] + 0.5 * x[1]; });
  add0("gauss", [](const Vec<2>& x) { return std::exp(-x.squaredNorm()); });
  add0("oscillatory", [](const Vec<2>& x) { return std::cos(3.0 * x[0]) * std::sin(2.0 * x[1] + 0.5); });

  const auto zero = [](const Vec<2>&) { return 0.0; };
  const auto one = [](const Vec<2>&) { return 1.0; };
  add1("dx1", one, zero);
  add1("dx2", zero, one);
  add1("x1 dx1", [](const Vec<2>& x) { return x[0]; }, zero);
  add1("x1 dx2", zero, [](const Vec<2>& x) { return x[0]; });
  add1("x2 dx1", [](const Vec<2>& x) { return x[1]; }, zero);
  add1("x2 dx2", zero, [](const Vec<2>& x) { return x[1]; });
  add1("-x2 dx1 + x1 dx2", [](const Vec<2>& x) { return -x[1]; }, [](const Vec<2>& x) { return x[0]; });
  add1("x1 dx1 + x2 dx2", [](const Vec<2>& x) { return x[0]; }, [](const Vec<2>& x) { return x[1]; });
  add1("x1^2 dx2", zero, [](const Vec<2>& x) { return x[0] * x[0]; });
  add1("x1x2 dx1 + x2^2 dx2", [](const Vec<2>& x) { return x[0] * x[1]; },
       [](const Vec<2>& x) { return x[1] * x[1]; });
  add1("dx1 + x1^2 dx2", one, [](const Vec<2>& x) { return x[0] * x[0]; });
  add1("oscillatory", [](const Vec<2>& x) { return std::cos(3.0 * x[0]); },
       [](const Vec<2>& x) { return std::sin(2.0 * x[1] + 0.5); });
  return bank;
}

// --- currents --------------------------------------------------------------

/// sum_k delta at R^k p (k = 0..3), a Z_4-invariant 0-current.
inline Current<2> orbit_dirac0(double radius = 0.2, double angle = 0.3) {
  const Vec<2> p(radius * std::cos(angle), radius * std::sin(angle));
  Current<2> c = Current<2>::zero(0);
  for (int k = 0; k < 4; ++k) c = c + Current<2>::point_mass(GroupAction<2>::rotation(0.5 * pi * k) * p);
  return c;
}

/// sum_k Dirac 1-currents at R^k p carrying R^k v.
inline Current<2> orbit_dirac1(double radius = 0.2, double angle = 0.3) {
  const Vec<2> p(radius * std::cos(angle), radius * std::sin(angle));
  const Vec<2> v(0.3, 0.8);
  Current<2> c = Current<2>::zero(1);
  for (int k = 0; k < 4; ++k) {
    const Mat<2> r = GroupAction<2>::rotation(0.5 * pi * k);
    Frame<2> f(2, 1);
    f.col(0) = r * v;
    c = c + Current<2>::dirac(r * p, f);
  }
  return c;
}

/// Counter-clockwise boundary of the square [-a, a]^2.
inline Current<2> square_loop(double a = 0.2) {
  return Current<2>::polygon({Vec<2>(-a, -a), Vec<2>(a, -a), Vec<2>(a, a), Vec<2>(-a, a)});
}

inline std::vector<NamedCurrent> orbit_current_bank() {
  return {{"orbit_dirac0", orbit_dirac0()}, {"orbit_dirac1", orbit_dirac1()}, {"square_loop", square_loop()}};
}

// --- registry --------------------------------------------------------------

inline AtlasChart<2> centered_chart(double radius) {
  AtlasChart<2> c;
  c.radius = radius;
  return c;
}

inline std::vector<std::string> scenario_names() {
  return {"euclid_z4", "round_sphere_chart", "radial_c11", "strip_two_charts", "orbit_currents"};
}

inline Scenario make_scenario(const std::string& name, const ScenarioOptions& opt = {}) {
  const auto disk = [](const Vec<2>& x) { return x.norm() <= 1.0 + 1e-12; };
  if (name == "euclid_z4" || name == "orbit_currents") {
    const bool orbit = name == "orbit_currents";
    return Scenario{name,
                    orbit ? "R^2 with Z_4-invariant Dirac orbits and a square loop"
                          : "flat R^2 with Z_4 rotations",
                    euclidean_metric<2>(),
                    DeclaredBounds{0.0, 0.0, "flat metric"},
                    {},
                    {centered_chart(orbit ? 1.0 : 3.0)},
                    GroupAction<2>::cyclic_rotations(4),
                    orbit_current_bank(),
                    standard_form_bank(),
                    Vec<2>::Zero(),
                    orbit ? 0.5 : 1.0,
                    [orbit](const Vec<2>& x) { return x.norm() <= (orbit ? 0.5 : 1.0) + 1e-12; },
                    0.5 * pi,
                    orbit ? 0.2 : 0.05};
  }
  if (name == "round_sphere_chart") {
    return Scenario{name,
                    "stereographic chart of the unit sphere on the unit disk, Z_8 rotations",
                    sphere_chart_metric(),
                    DeclaredBounds{1.0, 1.0, "constant curvature model"},
                    {},
                    {centered_chart(3.0)},
                    GroupAction<2>::cyclic_rotations(8),
                    {},
                    {},
                    Vec<2>::Zero(),
                    1.0,
                    disk,
                    0.25 * pi,
                    0.05};
  }
  if (name == "radial_c11") {
    return Scenario{name,
                    "conformal C^{1,1} metric phi(|x|^2) delta with a kink at r0 = 0.45, circle action",
                    radial_c11_metric(),
                    radial_c11_fixture(),
                    {DiscontinuitySphere<2>{Vec<2>::Zero(), radial_c11_profile::r0}},
                    {centered_chart(3.0)},
                    GroupAction<2>::circle(opt.torus_nodes),
                    {},
                    {},
                    Vec<2>::Zero(),
                    1.0,
                    disk,
                    0.0,
                    0.05};
  }
  if (name == "strip_two_charts") {
    AtlasChart<2> left = centered_chart(5.0), right = centered_chart(5.0);
    left.center = Vec<2>(-0.3, 0.0);
    right.center = Vec<2>(0.3, 0.0);
    return Scenario{name,
                    "flat strip [-1,1] x [-0.3,0.3] covered by two overlapping charts",
                    constant_metric<2>(2.0 * Mat<2>::Identity()),
                    DeclaredBounds{0.0, 0.0, "flat metric"},
                    {},
                    {left, right},
                    GroupAction<2>::trivial(),
                    {},
                    {},
                    Vec<2>::Zero(),
                    1.0,
                    [](const Vec<2>& x) { return std::abs(x[0]) <= 1.0 + 1e-12 && std::abs(x[1]) <= 0.3 + 1e-12; },
                    2.0 * pi,
                    0.05};
  }
  std::string list;
  for (const auto& n : scenario_names()) list += (list.empty() ? "" : ", ") + n;
  throw ConfigError("unknown scenario '" + name + "'; available: " + list);
}

}  // namespace eqmollify
