#pragma once

// Affine chart phi(x) = (x - center) / radius onto the unit ball, with the
// smooth cutoff that is 1 on |phi(x)| <= inner and 0 on |phi(x)| >= outer.

#include "eqmollify/core.hpp"

namespace eqmollify {

template <int Dim>
struct ChartCutoff {
  Vec<Dim> center = Vec<Dim>::Zero();
  double radius = 1.0;
  double inner = 0.5;
  double outer = 1.0;

  Vec<Dim> to_chart(const Vec<Dim>& x) const { return (x - center) / radius; }
  Vec<Dim> from_chart(const Vec<Dim>& u) const { return center + radius * u; }

  /// h_i(x): 1 for |phi(x)| <= inner, 0 for |phi(x)| >= outer.
  double bump(const Vec<Dim>& x) const {
    const double r = to_chart(x).norm();
    return 1.0 - smooth_step((r - inner) / (outer - inner));
  }

  /// x lies in the chart domain V = phi^{-1}(B^n).
  bool contains(const Vec<Dim>& x) const { return to_chart(x).norm() < 1.0; }
};

/// Same object viewed from the metric side of the library.
template <int Dim>
using AtlasChart = ChartCutoff<Dim>;

}  // namespace eqmollify
