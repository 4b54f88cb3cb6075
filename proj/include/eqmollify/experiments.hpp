#pragma once

/**
 * @file experiments.hpp
 * @brief Experiment kinds behind the CLI. Each run produces long-format rows
 *        (kind, scenario, epsilon, quantity, value, tolerance, pass), named
 *        checks, and optional extra tables; write_outputs() puts them into
 *        results.csv, summary.json and the per-kind CSV files.
 */

#include "eqmollify/config.hpp"
#include "eqmollify/core.hpp"
#include "eqmollify/currents.hpp"
#include "eqmollify/curvature.hpp"
#include "eqmollify/geometry_distances.hpp"
#include "eqmollify/metric_fields.hpp"
#include "eqmollify/scenarios.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace eqmollify {

enum class ExperimentKind { MollifyCurrent, SmoothMetric, CurvatureReport, LipschitzSweep, InvarianceCheck, SelectEpsilon };

inline const std::vector<std::pair<std::string, ExperimentKind>>& experiment_kinds() {
  static const std::vector<std::pair<std::string, ExperimentKind>> kinds{
      {"mollify-current", ExperimentKind::MollifyCurrent},   {"smooth-metric", ExperimentKind::SmoothMetric},
      {"curvature-report", ExperimentKind::CurvatureReport}, {"lipschitz-sweep", ExperimentKind::LipschitzSweep},
      {"invariance-check", ExperimentKind::InvarianceCheck}, {"select-epsilon", ExperimentKind::SelectEpsilon}};
  return kinds;
}

inline std::string kind_name(ExperimentKind k) {
  for (const auto& [n, v] : experiment_kinds())
    if (v == k) return n;
  return "?";
}

inline ExperimentKind parse_kind(const std::string& s) {
  for (const auto& [n, v] : experiment_kinds())
    if (n == s) return v;
  throw ConfigError("unknown experiment kind '" + s + "'");
}

struct ResultRow {
  std::optional<double> epsilon;
  std::string quantity;
  double value = 0.0;
  std::optional<double> tolerance;
  std::optional<bool> pass;
};

struct Check {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct ExperimentResult {
  std::string kind;
  std::string scenario;
  std::vector<ResultRow> rows;
  std::vector<Check> checks;
  std::map<std::string, std::string> tables;  // file name -> CSV text

  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }

  void row(std::optional<double> eps, std::string q, double v, std::optional<double> tol = std::nullopt,
           std::optional<bool> pass = std::nullopt) {
    rows.push_back({eps, std::move(q), v, tol, pass});
  }
  void check(std::string name, double value, double tol, bool pass) {
    checks.push_back({std::move(name), value, tol, pass});
  }
};

/// %.17g
inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// True when every step decreases strictly or has reached the floor.
inline bool decreasing_with_floor(const std::vector<double>& s, double floor) {
  for (std::size_t i = 1; i < s.size(); ++i)
    if (!(s[i] < s[i - 1] || s[i] <= floor)) return false;
  return true;
}

/// Non-increasing within a relative slack per step (or below the floor).
inline bool nonincreasing_with_slack(const std::vector<double>& s, double slack, double floor) {
  for (std::size_t i = 1; i < s.size(); ++i)
    if (!(s[i] <= s[i - 1] * (1.0 + slack) || s[i] <= floor)) return false;
  return true;
}

/// Absolute level below which a weak-convergence error counts as converged.
inline constexpr double weak_error_floor = 1e-12;

namespace detail {

inline std::vector<MollifierKernel<2>> make_kernels(const ExperimentConfig& cfg) {
  std::vector<MollifierKernel<2>> ks;
  ks.reserve(cfg.epsilons.size());
  for (double e : cfg.epsilons) ks.emplace_back(e, cfg.kernel_level);
  return ks;
}

inline std::vector<MetricStage<2>> atlas_stages(const Scenario& sc, const MollifierKernel<2>& k) {
  std::vector<MetricStage<2>> st;
  for (const auto& ch : sc.atlas) st.push_back({ch, &k, sc.group});
  return st;
}

inline double group_invariance_tolerance(const GroupAction<2>& g) {
  return g.kind() == GroupKind::Torus ? 1e-6 : 1e-10;
}

inline bool supported_in_unit_ball(const Current<2>& c) {
  for (const auto& p : c.support_points())
    if (!(p.norm() < 1.0)) return false;
  return true;
}

// 0-form bump of the given radius, zero outside its ball.
inline TestForm<2> bump_form(int degree, const Vec<2>& center, double radius) {
  std::vector<TestForm<2>::Coefficient> coeffs;
  const int n = degree == 0 ? 1 : 2;
  for (int i = 0; i < n; ++i)
    coeffs.push_back([center, radius, i](const Vec<2>& x) {
      return (1.0 + 0.5 * i) * unnormalized_bump((x - center).norm() / radius);
    });
  return TestForm<2>(degree, coeffs, center, radius);
}

inline std::string label(const std::string& a, const std::string& b) { return a + "|" + b; }

inline void metric_grid_table(ExperimentResult& r, const MetricField<2>& g, const SampleGrid<2>& grid) {
  std::ostringstream os;
  os << "x1,x2,g11,g12,g22,eig_min,eig_max\n";
  const auto vals = parallel_map(grid.size(), [&](std::size_t i) { return g(grid.points[i]); });
  for (std::size_t i = 0; i < grid.size(); ++i) {
    Eigen::SelfAdjointEigenSolver<Mat<2>> es(vals[i], Eigen::EigenvaluesOnly);
    os << format_double(grid.points[i][0]) << "," << format_double(grid.points[i][1]) << ","
       << format_double(vals[i](0, 0)) << "," << format_double(vals[i](0, 1)) << "," << format_double(vals[i](1, 1))
       << "," << format_double(es.eigenvalues()[0]) << "," << format_double(es.eigenvalues()[1]) << "\n";
  }
  r.tables["metric_grid.csv"] = os.str();
}

}  // namespace detail

// --- mollify-current -------------------------------------------------------

inline void run_mollify_current(const Scenario& sc, const ExperimentConfig& cfg, ExperimentResult& r) {
  if (sc.currents.empty())
    throw ConfigError("scenario '" + sc.name + "' has no current bank (use euclid_z4 or orbit_currents)");
  const auto kernels = detail::make_kernels(cfg);
  const AtlasChart<2>& chart = sc.atlas.front();

  double worst_final[3] = {0, 0, 0};
  bool decreasing[3] = {true, true, true};
  const char* names[3] = {"Z", "Ztilde", "ZG"};
  double equiv = 0.0, raw_equiv = 0.0, bound_c = 0.0, bound_slack = 0.0;

  for (const auto& nc : sc.currents) {
    const bool in_ball = detail::supported_in_unit_ball(nc.current);
    for (const NamedForm* nf : sc.forms_of_degree(nc.current.degree())) {
      const std::string lab = detail::label(nc.name, nf->name);
      const double T = evaluate(nc.current, nf->form);
      r.row(std::nullopt, "T[" + lab + "]", T);
      const double scale = std::max(1.0, std::abs(T));
      std::vector<double> errs[3];
      for (std::size_t e = 0; e < kernels.size(); ++e) {
        const double eps = cfg.epsilons[e];
        const double z = smooth_Z(nc.current, nf->form, kernels[e]);
        errs[0].push_back(std::abs(z - T));
        if (in_ball) errs[1].push_back(std::abs(smooth_Z_tilde(nc.current, nf->form, kernels[e]) - T));
        const double zg = equivariant_Z(nc.current, nf->form, kernels[e], chart, sc.group);
        errs[2].push_back(std::abs(zg - T));
        for (int o = 0; o < 3; ++o)
          if (!errs[o].empty() && errs[o].size() == e + 1)
            r.row(eps, std::string(names[o]) + "_error[" + lab + "]", errs[o].back());
        // equivariance of Z^G and the raw Z residual
        for (const auto& g : sc.group.elements()) {
          const double moved = evaluate(nc.current, equivariant_adjoint(nf->form.pullback(g), kernels[e], chart, sc.group));
          equiv = std::max(equiv, std::abs(moved - zg));
          raw_equiv = std::max(raw_equiv, std::abs(smooth_Z(nc.current, nf->form.pullback(g), kernels[e]) - z));
        }
        if (std::abs(T) > 1e-8)
          bound_c = std::max(bound_c, std::abs(zg) / std::abs(T));
        else
          bound_slack = std::max(bound_slack, std::abs(zg));
      }
      for (int o = 0; o < 3; ++o) {
        if (errs[o].empty()) continue;
        decreasing[o] = decreasing[o] && decreasing_with_floor(errs[o], weak_error_floor * scale);
        worst_final[o] = std::max(worst_final[o], errs[o].back() / scale);
      }
    }
  }
  for (int o = 0; o < 3; ++o) {
    r.check(std::string("weak_convergence_") + names[o] + "_decreasing", decreasing[o] ? 1.0 : 0.0, 1.0, decreasing[o]);
    r.check(std::string("weak_convergence_") + names[o] + "_final_relative_error", worst_final[o], cfg.weak_tolerance,
            worst_final[o] <= cfg.weak_tolerance);
  }
  r.check("equivariance_residual_ZG", equiv, 1e-10, equiv <= 1e-10);
  r.row(std::nullopt, "raw_Z_invariance_residual", raw_equiv);
  r.row(std::nullopt, "boundedness_constant_C", bound_c);
  r.row(std::nullopt, "boundedness_slack", bound_slack);

  // support exactness
  double support_dev = 0.0;
  for (const auto& nc : sc.currents) {
    double reach = 0.0;
    for (const auto& p : nc.current.support_points()) reach = std::max(reach, p.norm());
    for (std::size_t e = 0; e < kernels.size(); ++e) {
      const double rad = 0.5;
      const Vec<2> c(reach + rad + 2.0 * cfg.epsilons[e] + 0.1, 0.0);
      const TestForm<2> far = detail::bump_form(nc.current.degree(), c, rad);
      support_dev = std::max(support_dev, std::abs(smooth_Z(nc.current, far, kernels[e])));
    }
  }
  const Current<2> outside0 = Current<2>::point_mass(Vec<2>(1.3, 0.4)) + Current<2>::point_mass(Vec<2>(-0.2, -1.1), 2.0);
  const Current<2> outside1 = Current<2>::polyhedral(1, {{Vec<2>(1.2, -0.5), Vec<2>(1.2, 0.5)}}, {1.0});
  for (const Current<2>* c : {&outside0, &outside1})
    for (const NamedForm* nf : sc.forms_of_degree(c->degree()))
      for (const auto& k : kernels)
        support_dev = std::max(support_dev, std::abs(smooth_Z_tilde(*c, nf->form, k) - evaluate(*c, nf->form)));
  r.check("support_exactness", support_dev, 0.0, support_dev == 0.0);

  // linearity
  double lin = 0.0;
  if (sc.currents.size() >= 2)
    for (const NamedForm* nf : sc.forms_of_degree(sc.currents[0].current.degree())) {
      const auto& t1 = sc.currents[0].current;
      const Current<2> t2 = orbit_dirac0(0.25, 1.1);
      if (t2.degree() != t1.degree()) continue;
      const double a = 1.7, b = -0.6;
      for (const auto& k : kernels) {
        const double lhs = smooth_Z(t1 * a + t2 * b, nf->form, k);
        const double rhs = a * smooth_Z(t1, nf->form, k) + b * smooth_Z(t2, nf->form, k);
        lin = std::max(lin, std::abs(lhs - rhs));
      }
    }
  r.check("linearity", lin, 1e-10, lin <= 1e-10);
  for (const auto& k : kernels) r.row(k.epsilon(), "kernel_mass", k.mass());
}

// --- metric experiments -----------------------------------------------------

inline void run_smooth_metric(const Scenario& sc, const ExperimentConfig& cfg, ExperimentResult& r) {
  const auto kernels = detail::make_kernels(cfg);
  const SampleGrid<2> grid = sc.grid(cfg.grid);
  const MetricField<2>& g0 = sc.metric;
  const bool smooth = g0.regularity() == Regularity::Smooth;

  std::vector<double> semi_ht, semi_hg;
  double min_eig = std::numeric_limits<double>::infinity();
  std::size_t locality_mismatch = 0, locality_samples = 0;
  double gequ = 0.0;
  for (const auto& k : kernels) {
    const double eps = k.epsilon();
    const MetricField<2> ht = chart_H_tilde(g0, sc.atlas.front(), k);
    semi_ht.push_back(sobolev_seminorm(difference(ht, g0), grid).value);
    r.row(eps, "seminorm_Htilde_minus_g", semi_ht.back());
    const MetricField<2> hg = compose_HG(g0, detail::atlas_stages(sc, k));
    semi_hg.push_back(sobolev_seminorm(difference(hg, g0), grid).value);
    r.row(eps, "seminorm_HG_minus_g", semi_hg.back());
    const double me = a_nu(hg, grid);
    r.row(eps, "min_eigenvalue_HG", me);
    min_eig = std::min(min_eig, me);

    for (const auto& chart : sc.atlas) {
      const MetricField<2> he = H_e_i(g0, chart, k);
      for (int i = 0; i < 48; ++i) {
        const double a = 2.0 * pi * i / 48.0;
        for (double rad : {1.0, 1.01, 1.25, 1.7}) {
          const Vec<2> x = chart.center + rad * chart.radius * Vec<2>(std::cos(a), std::sin(a));
          ++locality_samples;
          const Mat<2> v = he(x), w = g0(x);
          if (!(v.array() == w.array()).all()) ++locality_mismatch;
        }
      }
      // |H^G_lm| <= C |G| |H_e_lm|
      if (sc.atlas.size() == 1) {
        const MetricField<2> hgi = haar_average_metric(g0, chart, k, sc.group);
        for (const auto& x : grid.points) {
          const Mat<2> a = hgi(x), b = he(x);
          for (int l = 0; l < 2; ++l)
            for (int m = 0; m < 2; ++m)
              if (std::abs(b(l, m)) > 1e-12)
                gequ = std::max(gequ, std::abs(a(l, m)) / (double(sc.group.size()) * std::abs(b(l, m))));
        }
      }
    }
    if (&k == &kernels.back()) detail::metric_grid_table(r, hg, grid);
  }
  r.row(std::nullopt, "gequ_constant_C", gequ);

  const double floor = 1e-9;
  if (smooth) {
    const bool dec = decreasing_with_floor(semi_ht, floor);
    const double best = *std::min_element(semi_ht.begin(), semi_ht.end());
    r.check("Htilde_seminorm_decreasing", dec ? 1.0 : 0.0, 1.0, dec);
    r.check("Htilde_seminorm_below_delta", best, cfg.seminorm_delta, best <= cfg.seminorm_delta);
  } else {
    r.row(std::nullopt, "note_seminorm_not_asserted_for_" + to_string(g0.regularity()), 0.0);
  }
  r.check("spd_min_eigenvalue", min_eig, 0.0, min_eig > 0.0);
  r.check("locality_outside_V_mismatches", double(locality_mismatch), 0.0, locality_mismatch == 0);
  r.row(std::nullopt, "locality_samples", double(locality_samples));

  if (sc.atlas.size() > 1) {
    // constant metric, domain inside the translation region of every chart
    const MetricField<2> hg = compose_HG(g0, detail::atlas_stages(sc, kernels.back()));
    const auto devs = parallel_map(grid.size(), [&](std::size_t i) {
      return max_abs(Mat<2>(hg(grid.points[i]) - g0(grid.points[i])));
    });
    const double dev = *std::max_element(devs.begin(), devs.end());
    r.check("composite_fixes_constant_metric", dev, 1e-12, dev <= 1e-12);
  }
}

inline void run_invariance_check(const Scenario& sc, const ExperimentConfig& cfg, ExperimentResult& r) {
  const auto kernels = detail::make_kernels(cfg);
  const SampleGrid<2> grid = sc.grid(cfg.grid);
  const double iso = isometry_residual(sc.metric, sc.group, grid.points);
  r.check("metric_isometry_residual", iso, 1e-8, iso <= 1e-8);
  const double tol = detail::group_invariance_tolerance(sc.group);
  double worst = 0.0;
  for (const auto& k : kernels) {
    const MetricField<2> hg = compose_HG(sc.metric, detail::atlas_stages(sc, k));
    const double res = invariance_residual(hg, sc.group, grid);
    r.row(k.epsilon(), "HG_invariance_residual", res, tol, res <= tol);
    worst = std::max(worst, res);
  }
  r.check("HG_invariance_residual", worst, tol, worst <= tol);

  if (!sc.currents.empty()) {
    std::vector<TestForm<2>> forms;
    double cur = 0.0, zg = 0.0;
    for (const auto& nc : sc.currents) {
      forms.clear();
      for (const NamedForm* nf : sc.forms_of_degree(nc.current.degree())) forms.push_back(nf->form);
      cur = std::max(cur, invariance_residual(nc.current, sc.group, forms));
      for (const auto& k : kernels)
        for (const auto& w : forms) {
          const double base = equivariant_Z(nc.current, w, k, sc.atlas.front(), sc.group);
          for (const auto& g : sc.group.elements())
            zg = std::max(zg, std::abs(equivariant_Z(nc.current, w.pullback(g), k, sc.atlas.front(), sc.group) - base));
        }
    }
    r.check("current_invariance_residual", cur, 1e-12, cur <= 1e-12);
    r.check("ZG_invariance_residual", zg, 1e-10, zg <= 1e-10);
  }
}

inline void run_curvature_report(const Scenario& sc, const ExperimentConfig& cfg, ExperimentResult& r) {
  const auto kernels = detail::make_kernels(cfg);
  const bool circle = sc.group.kind() == GroupKind::Torus;
  const std::vector<Vec<2>> points = sc.fundamental_points(circle ? cfg.ray_points : cfg.grid);
  CurvatureScanOptions<2> opt;
  opt.sections_per_point = cfg.sections_per_point;
  opt.seed = cfg.seed;
  opt.discontinuities = sc.discontinuities;
  const CurvatureBounds orig = curvature_bounds(sc.metric, points, opt);
  r.row(std::nullopt, "K_lower_original", orig.k_lower);
  r.row(std::nullopt, "K_upper_original", orig.k_upper);
  r.row(std::nullopt, "sample_points", double(orig.points));
  r.row(std::nullopt, "excluded_points", double(orig.excluded));
  CurvatureBounds reference = orig;
  if (sc.bounds) {
    reference.k_lower = sc.bounds->k_lower;
    reference.k_upper = sc.bounds->k_upper;
    const double dev = std::max(std::abs(orig.k_lower - reference.k_lower), std::abs(orig.k_upper - reference.k_upper));
    r.check("original_bounds_vs_declared", dev, 1e-2, dev <= 1e-2);
  }
  std::vector<CurvatureBounds> sweep;
  double best_gap = std::numeric_limits<double>::infinity();
  CurvatureScanOptions<2> smooth_opt = opt;
  smooth_opt.discontinuities.clear();
  for (const auto& k : kernels) {
    const MetricField<2> hg = compose_HG(sc.metric, detail::atlas_stages(sc, k)).finite_difference_only();
    std::size_t excl = 0;
    const auto map = curvature_map(hg, points, smooth_opt, &excl);
    CurvatureBounds b;
    b.k_lower = std::numeric_limits<double>::infinity();
    b.k_upper = -b.k_lower;
    for (const auto& pc : map) {
      b.k_lower = std::min(b.k_lower, pc.k_min);
      b.k_upper = std::max(b.k_upper, pc.k_max);
    }
    b.points = map.size();
    sweep.push_back(b);
    const BoundsComparison cmp = bounds_comparison(reference, b, cfg.curvature_delta);
    r.row(k.epsilon(), "K_lower_smoothed", b.k_lower);
    r.row(k.epsilon(), "K_upper_smoothed", b.k_upper);
    r.row(k.epsilon(), "lower_gap", cmp.lower_gap, cfg.curvature_delta, cmp.lower_gap < cfg.curvature_delta);
    r.row(k.epsilon(), "upper_gap", cmp.upper_gap, cfg.curvature_delta, cmp.upper_gap < cfg.curvature_delta);
    best_gap = std::min(best_gap, std::max(cmp.lower_gap, cmp.upper_gap));
    if (&k == &kernels.back()) {
      std::ostringstream os;
      os << "x1,x2,K_min_at_x,K_max_at_x\n";
      for (const auto& pc : map)
        os << format_double(pc.x[0]) << "," << format_double(pc.x[1]) << "," << format_double(pc.k_min) << ","
           << format_double(pc.k_max) << "\n";
      r.tables["curvature_map.csv"] = os.str();
    }
  }
  r.check("bounds_preserved_for_some_eps", best_gap, cfg.curvature_delta, best_gap < cfg.curvature_delta);
  const SweepLimitReport lim = sweep_limits(reference, sweep, cfg.curvature_delta);
  r.check("limsup_upper_bound", lim.tail_upper - reference.k_upper, cfg.curvature_delta, lim.limsup_ok);
  r.check("liminf_lower_bound", reference.k_lower - lim.tail_lower, cfg.curvature_delta, lim.liminf_ok);
}

inline void run_lipschitz_sweep(const Scenario& sc, const ExperimentConfig& cfg, ExperimentResult& r) {
  const auto kernels = detail::make_kernels(cfg);
  const SampleGrid<2> lattice = sc.grid(cfg.graph_resolution);
  const SampleGraph<2> g0graph = SampleGraph<2>::build(sc.metric, lattice, sc.domain_center, sc.domain_radius);
  const auto pairs = sample_pairs(g0graph, cfg.pairs, cfg.seed, cfg.pair_separation);
  r.row(std::nullopt, "graph_nodes", double(g0graph.size()));
  r.row(std::nullopt, "graph_edges", double(g0graph.edge_count()));
  const double anu = a_nu(sc.metric, sc.grid(cfg.grid));
  std::vector<Vec<2>> chord;
  for (int i = 0; i <= 16; ++i) chord.push_back(Vec<2>(-0.9 + 1.8 * i / 16.0, 0.0));

  std::vector<double> devs;
  bool eq312 = true;
  double eq312_ratio = 0.0;
  std::ostringstream table;
  table << "epsilon,max_dilation_deviation\n";
  for (const auto& k : kernels) {
    const MetricField<2> hg = compose_HG(sc.metric, detail::atlas_stages(sc, k));
    const SampleGraph<2> ge = SampleGraph<2>::build(hg, lattice, sc.domain_center, sc.domain_radius);
    const DilationReport d = dilation_estimate(g0graph, ge, pairs);
    devs.push_back(d.max_deviation);
    r.row(k.epsilon(), "max_dilation_deviation", d.max_deviation);
    table << format_double(k.epsilon()) << "," << format_double(d.max_deviation) << "\n";
    const LengthBoundCheck lb = length_deviation_bound(chord, sc.metric, hg, anu);
    r.row(k.epsilon(), "chord_length_deviation", lb.deviation, lb.bound, lb.holds);
    eq312 = eq312 && lb.holds;
    if (lb.bound > 0.0) eq312_ratio = std::max(eq312_ratio, lb.deviation / lb.bound);
  }
  r.tables["dilation.csv"] = table.str();
  const bool mono = nonincreasing_with_slack(devs, 0.1, 1e-12);
  r.check("dilation_nonincreasing", mono ? 1.0 : 0.0, 1.0, mono);
  r.check("dilation_final", devs.back(), cfg.dilation_target, devs.back() <= cfg.dilation_target);
  r.check("length_bound_ratio", eq312_ratio, 1.0, eq312);
}

inline void run_select_epsilon(const Scenario& sc, const ExperimentConfig& cfg, ExperimentResult& r) {
  const SampleGrid<2> grid = sc.grid(cfg.grid);
  const double anu = a_nu(sc.metric, grid);
  r.row(std::nullopt, "a_nu", anu);
  const auto cands = epsilon_candidates(cfg.epsilons.back(), cfg.epsilons.front(), cfg.epsilon_candidates);
  SmoothingDistance<2> dist(sc.metric, sc.atlas.front(), sc.group, grid, cfg.kernel_level);
  bool all_found = true, monotone = true;
  double prev = std::numeric_limits<double>::infinity();
  for (int k : cfg.k_values) {
    const EpsilonSelection sel = select_epsilon_for_k(dist, k, anu, cands);
    for (const auto& [e, v] : sel.evaluated) r.row(e, "seminorm_HG_minus_g[k=" + std::to_string(k) + "]", v);
    r.row(sel.found ? std::optional<double>(sel.epsilon) : std::nullopt, "selected[k=" + std::to_string(k) + "]",
          sel.seminorm, sel.bound, sel.found);
    all_found = all_found && sel.found;
    if (sel.found) {
      if (sel.epsilon > prev) monotone = false;
      prev = sel.epsilon;
    }
  }
  r.check("epsilon_found_for_all_k", all_found ? 1.0 : 0.0, 1.0, all_found);
  r.check("epsilon_nonincreasing_in_k", monotone ? 1.0 : 0.0, 1.0, monotone);
}

/// Runs one experiment. Module errors are rethrown with the scenario name.
inline ExperimentResult run_experiment(ExperimentKind kind, const ExperimentConfig& cfg) {
  ScenarioOptions so;
  so.torus_nodes = cfg.torus_nodes;
  const Scenario sc = make_scenario(cfg.scenario, so);
  ExperimentResult r;
  r.kind = kind_name(kind);
  r.scenario = sc.name;
  const auto wrap = [&](auto&& fn) {
    try {
      fn();
    } catch (const NumericalAbort& e) {
      throw NumericalAbort(sc.name + ": " + e.what());
    } catch (const InputError& e) {
      throw InputError(sc.name + ": " + e.what());
    }
  };
  switch (kind) {
    case ExperimentKind::MollifyCurrent: wrap([&] { run_mollify_current(sc, cfg, r); }); break;
    case ExperimentKind::SmoothMetric: wrap([&] { run_smooth_metric(sc, cfg, r); }); break;
    case ExperimentKind::CurvatureReport: wrap([&] { run_curvature_report(sc, cfg, r); }); break;
    case ExperimentKind::LipschitzSweep: wrap([&] { run_lipschitz_sweep(sc, cfg, r); }); break;
    case ExperimentKind::InvarianceCheck: wrap([&] { run_invariance_check(sc, cfg, r); }); break;
    case ExperimentKind::SelectEpsilon: wrap([&] { run_select_epsilon(sc, cfg, r); }); break;
  }
  return r;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

inline std::string results_csv(const ExperimentResult& r) {
  std::ostringstream os;
  os << "kind,scenario,epsilon,quantity,value,tolerance,pass\n";
  for (const auto& row : r.rows) {
    os << r.kind << "," << r.scenario << "," << (row.epsilon ? format_double(*row.epsilon) : "") << ","
       << csv_field(row.quantity) << "," << format_double(row.value) << ","
       << (row.tolerance ? format_double(*row.tolerance) : "") << ","
       << (row.pass ? (*row.pass ? "true" : "false") : "") << "\n";
  }
  for (const auto& c : r.checks)
    os << r.kind << "," << r.scenario << ",," << csv_field("check:" + c.name) << "," << format_double(c.value) << ","
       << format_double(c.tolerance) << "," << (c.pass ? "true" : "false") << "\n";
  return os.str();
}

inline std::string summary_json(const ExperimentResult& r) {
  nlohmann::ordered_json j;
  j["scenario"] = r.scenario;
  j["kind"] = r.kind;
  j["checks"] = nlohmann::ordered_json::array();
  for (const auto& c : r.checks) {
    nlohmann::ordered_json e;
    e["name"] = c.name;
    e["value"] = c.value;
    e["tolerance"] = c.tolerance;
    e["pass"] = c.pass;
    j["checks"].push_back(e);
  }
  return j.dump(2) + "\n";
}

/// results.csv, summary.json and any per-kind tables into dir (created).
inline void write_outputs(const ExperimentResult& r, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const auto put = [&](const std::string& name, const std::string& text) {
    std::ofstream out(std::filesystem::path(dir) / name, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + (std::filesystem::path(dir) / name).string());
    out << text;
  };
  put("results.csv", results_csv(r));
  put("summary.json", summary_json(r));
  for (const auto& [name, text] : r.tables) put(name, text);
}

}  // namespace eqmollify
