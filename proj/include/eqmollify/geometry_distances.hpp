#pragma once

// Lengths of polylines under a metric field, shortest paths on a lattice
// graph (8-neighbourhood in the plane, 26 in space) and the sampled dilation
// |d_eps / d_0 - 1| over fixed point pairs.

#include "eqmollify/core.hpp"
#include "eqmollify/metric_fields.hpp"
#include "eqmollify/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <queue>
#include <random>
#include <utility>
#include <vector>

namespace eqmollify {

namespace detail {

template <int Dim>
double chord_length(const MetricField<Dim>& g, const Vec<Dim>& a, const Vec<Dim>& b, const GaussRule& rule,
                    bool check_domain) {
  const Vec<Dim> d = b - a;
  double s = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const Vec<Dim> x = a + 0.5 * (rule.nodes[i] + 1.0) * d;
    const Mat<Dim> m = check_domain ? g.at(x) : g(x);
    s += 0.5 * rule.weights[i] * std::sqrt(std::max(0.0, d.dot(m * d)));
  }
  return s;
}

}  // namespace detail

/// sum over segments of the Gauss-Legendre integral of sqrt(x'^T g(x) x').
/// Throws InputError if a quadrature node leaves g's domain.
template <int Dim>
double curve_length(const std::vector<Vec<Dim>>& polyline, const MetricField<Dim>& g, int gauss_order = 8) {
  if (polyline.size() < 2) throw InputError("curve_length: a polyline needs at least two points");
  const GaussRule rule = gauss_legendre(gauss_order);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < polyline.size(); ++i)
    total += detail::chord_length(g, polyline[i], polyline[i + 1], rule, true);
  return total;
}

/// Lattice nodes inside a ball or box with chord-length edges to lattice
/// neighbours. Immutable once built.
template <int Dim>
class SampleGraph {
public:
  struct Edge {
    int to;
    double length;
  };

  /// resolution lattice points per axis on [c - r, c + r]^n (ball = keep
  /// |x - c| <= r). Edge lengths use gauss_order chord quadrature.
  static SampleGraph build(const MetricField<Dim>& g, const Vec<Dim>& center, double radius, int resolution,
                           bool ball = true, int gauss_order = 3) {
    return build(g, lattice_grid<Dim>(center, radius, resolution, ball), center, radius, gauss_order);
  }

  /// Graph on a lattice produced by lattice_grid / lattice_grid_where with
  /// the same center and radius.
  static SampleGraph build(const MetricField<Dim>& g, const SampleGrid<Dim>& grid, const Vec<Dim>& center,
                           double radius, int gauss_order = 3) {
    SampleGraph G;
    const int resolution = grid.resolution;
    G.resolution_ = resolution;
    G.spacing_ = grid.spacing;
    G.nodes_ = grid.points;
    // lattice index -> node id
    std::vector<int> lookup(static_cast<std::size_t>(std::pow(resolution, Dim)), -1);
    std::vector<std::array<int, Dim>> idx(G.nodes_.size());
    for (std::size_t n = 0; n < G.nodes_.size(); ++n) {
      std::size_t flat = 0;
      for (int d = Dim - 1; d >= 0; --d) {
        idx[n][d] = static_cast<int>(std::lround((G.nodes_[n][d] - (center[d] - radius)) / G.spacing_));
        flat = flat * resolution + idx[n][d];
      }
      lookup[flat] = static_cast<int>(n);
    }
    // forward half of the neighbour offsets
    std::vector<std::array<int, Dim>> offsets;
    std::array<int, Dim> o{};
    for (auto& v : o) v = -1;
    while (true) {
      bool forward = false;
      for (int d = Dim - 1; d >= 0; --d)
        if (o[d] != 0) {
          forward = o[d] > 0;
          break;
        }
      if (forward) offsets.push_back(o);
      int d = 0;
      while (d < Dim && ++o[d] == 2) o[d++] = -1;
      if (d == Dim) break;
    }
    std::vector<std::pair<int, int>> pairs;
    for (std::size_t n = 0; n < G.nodes_.size(); ++n)
      for (const auto& off : offsets) {
        std::size_t flat = 0;
        bool inside = true;
        for (int d = Dim - 1; d >= 0; --d) {
          const int k = idx[n][d] + off[d];
          if (k < 0 || k >= resolution) inside = false;
          flat = flat * resolution + std::max(0, std::min(resolution - 1, k));
        }
        if (inside && lookup[flat] >= 0) pairs.emplace_back(static_cast<int>(n), lookup[flat]);
      }
    const GaussRule rule = gauss_legendre(gauss_order);
    const std::vector<double> lengths = parallel_map(pairs.size(), [&](std::size_t e) {
      return detail::chord_length(g, G.nodes_[pairs[e].first], G.nodes_[pairs[e].second], rule, false);
    });
    G.adjacency_.assign(G.nodes_.size(), {});
    for (std::size_t e = 0; e < pairs.size(); ++e) {
      if (!(lengths[e] > 0.0)) throw NumericalAbort("SampleGraph: non-positive edge length");
      G.adjacency_[pairs[e].first].push_back({pairs[e].second, lengths[e]});
      G.adjacency_[pairs[e].second].push_back({pairs[e].first, lengths[e]});
    }
    G.edge_count_ = pairs.size();
    return G;
  }

  std::size_t size() const { return nodes_.size(); }
  std::size_t edge_count() const { return edge_count_; }
  double spacing() const { return spacing_; }
  int resolution() const { return resolution_; }
  const std::vector<Vec<Dim>>& nodes() const { return nodes_; }
  const std::vector<std::vector<Edge>>& adjacency() const { return adjacency_; }

  /// Nearest node (lowest index on ties).
  int snap(const Vec<Dim>& p) const {
    int best = -1;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < nodes_.size(); ++n) {
      const double d = (nodes_[n] - p).squaredNorm();
      if (d < bd) {
        bd = d;
        best = static_cast<int>(n);
      }
    }
    return best;
  }

  /// Dijkstra distances from node `source` to every node.
  std::vector<double> distances_from(int source) const {
    std::vector<double> dist(nodes_.size(), std::numeric_limits<double>::infinity());
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
    dist[source] = 0.0;
    pq.push({0.0, source});
    while (!pq.empty()) {
      const auto [d, u] = pq.top();
      pq.pop();
      if (d > dist[u]) continue;
      for (const Edge& e : adjacency_[u]) {
        const double nd = d + e.length;
        if (nd < dist[e.to]) {
          dist[e.to] = nd;
          pq.push({nd, e.to});
        }
      }
    }
    return dist;
  }

  /// Node sequence of a shortest path (ties broken by the lowest predecessor).
  std::vector<int> shortest_path(int source, int target) const {
    const std::vector<double> dist = distances_from(source);
    if (std::isinf(dist[target])) throw InputError("shortest_path: nodes lie in different components");
    std::vector<int> path{target};
    int cur = target;
    while (cur != source) {
      int prev = -1;
      for (const Edge& e : adjacency_[cur])
        if (std::abs(dist[e.to] + e.length - dist[cur]) <= 1e-12 * std::max(1.0, dist[cur]) && dist[e.to] < dist[cur]) {
          prev = e.to;
          break;
        }
      if (prev < 0) throw NumericalAbort("shortest_path: predecessor not found");
      path.push_back(prev);
      cur = prev;
    }
    std::reverse(path.begin(), path.end());
    return path;
  }

private:
  std::vector<Vec<Dim>> nodes_;
  std::vector<std::vector<Edge>> adjacency_;
  std::size_t edge_count_ = 0;
  double spacing_ = 0.0;
  int resolution_ = 0;
};

/// Shortest-path length between the nodes nearest to p and q.
template <int Dim>
double graph_distance(const SampleGraph<Dim>& graph, const Vec<Dim>& p, const Vec<Dim>& q) {
  const int a = graph.snap(p), b = graph.snap(q);
  const double d = graph.distances_from(a)[b];
  if (std::isinf(d)) throw InputError("graph_distance: points lie in different components");
  return d;
}

/// Fixed-seed node pairs at Euclidean separation >= min_separation.
template <int Dim>
std::vector<std::pair<int, int>> sample_pairs(const SampleGraph<Dim>& graph, int count, std::uint64_t seed,
                                              double min_separation) {
  if (graph.size() < 2) throw InputError("sample_pairs: graph has fewer than two nodes");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, graph.size() - 1);
  std::vector<std::pair<int, int>> out;
  int attempts = 0;
  while (static_cast<int>(out.size()) < count) {
    if (++attempts > 100000) throw InputError("sample_pairs: separation too large for the graph");
    const int a = static_cast<int>(pick(rng)), b = static_cast<int>(pick(rng));
    if ((graph.nodes()[a] - graph.nodes()[b]).norm() < min_separation) continue;
    out.emplace_back(a, b);
  }
  return out;
}

struct DilationReport {
  std::vector<double> ratios;  // d_eps / d_0 per pair
  double max_deviation = 0.0;  // max |ratio - 1|
};

/// max over pairs of |d_eps(p, q) / d_0(p, q) - 1|; both graphs must share nodes.
template <int Dim>
DilationReport dilation_estimate(const SampleGraph<Dim>& g0, const SampleGraph<Dim>& geps,
                                 const std::vector<std::pair<int, int>>& pairs) {
  if (g0.size() != geps.size()) throw InputError("dilation_estimate: graphs must share the node set");
  DilationReport r;
  // group by source so each Dijkstra runs once
  std::vector<int> sources;
  for (const auto& [a, b] : pairs)
    if (std::find(sources.begin(), sources.end(), a) == sources.end()) sources.push_back(a);
  const auto d0 = parallel_map(sources.size(), [&](std::size_t i) { return g0.distances_from(sources[i]); });
  const auto de = parallel_map(sources.size(), [&](std::size_t i) { return geps.distances_from(sources[i]); });
  for (const auto& [a, b] : pairs) {
    const std::size_t s = std::find(sources.begin(), sources.end(), a) - sources.begin();
    const double base = d0[s][b];
    if (!(base > 0.0)) throw InputError("dilation_estimate: zero-distance pair");
    if (std::isinf(base) || std::isinf(de[s][b])) throw InputError("dilation_estimate: disconnected pair");
    r.ratios.push_back(de[s][b] / base);
    r.max_deviation = std::max(r.max_deviation, std::abs(r.ratios.back() - 1.0));
  }
  return r;
}

/// Length change of a curve between two metrics against the bound
///   |l_eps - l_0| <= l_0 * a_nu^{-1} * sum_{m,q} max_arc |g_eps,mq - g_0,mq|,
/// where a_nu is a lower eigenvalue bound of g_0 along the curve.
struct LengthBoundCheck {
  double l0 = 0.0;
  double leps = 0.0;
  double deviation = 0.0;
  double bound = 0.0;
  bool holds = false;
};

template <int Dim>
LengthBoundCheck length_deviation_bound(const std::vector<Vec<Dim>>& polyline, const MetricField<Dim>& g0,
                                        const MetricField<Dim>& geps, double a_nu_value, int gauss_order = 8) {
  if (!(a_nu_value > 0.0)) throw InputError("length_deviation_bound: a_nu must be positive");
  LengthBoundCheck c;
  c.l0 = curve_length(polyline, g0, gauss_order);
  c.leps = curve_length(polyline, geps, gauss_order);
  c.deviation = std::abs(c.leps - c.l0);
  const GaussRule rule = gauss_legendre(gauss_order);
  Mat<Dim> worst = Mat<Dim>::Zero();
  for (std::size_t i = 0; i + 1 < polyline.size(); ++i)
    for (double t : rule.nodes) {
      const Vec<Dim> x = polyline[i] + 0.5 * (t + 1.0) * (polyline[i + 1] - polyline[i]);
      worst = worst.cwiseMax(Mat<Dim>((geps(x) - g0(x)).cwiseAbs()));
    }
  c.bound = c.l0 * worst.sum() / a_nu_value;
  c.holds = c.deviation <= c.bound * (1.0 + 1e-12) + 1e-14;
  return c;
}

}  // namespace eqmollify
