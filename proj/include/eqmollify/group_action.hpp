#pragma once

// Compact groups acting linearly by orthogonal matrices: finite subgroups of
// O(n) (uniform Haar weights) and the circle S^1 acting on R^2 by rotations,
// whose Haar integral is realized by the N-point periodic trapezoid rule.

#include "eqmollify/core.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace eqmollify {

enum class GroupKind { Finite, Torus };

template <int Dim>
class GroupAction {
public:
  /// Finite group given by its elements. Validates orthogonality (1e-12),
  /// closure under products and inverses.
  static GroupAction finite(std::vector<Mat<Dim>> elements, std::string name = "finite") {
    if (elements.empty()) throw InputError("GroupAction: empty element list");
    GroupAction g;
    g.kind_ = GroupKind::Finite;
    g.name_ = std::move(name);
    g.elements_ = std::move(elements);
    g.weights_.assign(g.elements_.size(), 1.0 / static_cast<double>(g.elements_.size()));
    g.validate_orthogonal();
    for (const auto& a : g.elements_) {
      if (g.index_of(a.transpose()) < 0) throw InputError("GroupAction: set is not closed under inverses");
      for (const auto& b : g.elements_)
        if (g.index_of(a * b) < 0) throw InputError("GroupAction: set is not closed under products");
    }
    return g;
  }

  static GroupAction trivial() { return finite({Mat<Dim>::Identity()}, "trivial"); }

  /// Z_k acting on R^2 by rotations through multiples of 2 pi / k.
  static GroupAction cyclic_rotations(int k) {
    static_assert(Dim == 2, "cyclic_rotations is defined on R^2");
    if (k < 1) throw InputError("cyclic_rotations: order must be >= 1");
    std::vector<Mat<Dim>> els;
    for (int j = 0; j < k; ++j) els.push_back(rotation(2.0 * pi * j / k));
    return finite(std::move(els), "Z" + std::to_string(k));
  }

  /// Z_2 generated by a reflection (diag(-1, 1, ...)).
  static GroupAction reflection() {
    Mat<Dim> r = Mat<Dim>::Identity();
    r(0, 0) = -1.0;
    return finite({Mat<Dim>::Identity(), r}, "reflection");
  }

  /// S^1 acting on R^2 by rotations; Haar measure by N equispaced angles.
  static GroupAction circle(int nodes) {
    static_assert(Dim == 2, "circle action is defined on R^2");
    if (nodes < 1) throw InputError("circle: node count must be >= 1");
    GroupAction g;
    g.kind_ = GroupKind::Torus;
    g.name_ = "S1[N=" + std::to_string(nodes) + "]";
    for (int j = 0; j < nodes; ++j) {
      g.elements_.push_back(rotation(2.0 * pi * j / nodes));
      g.weights_.push_back(1.0 / nodes);
    }
    g.validate_orthogonal();
    return g;
  }

  static Mat<Dim> rotation(double angle) {
    static_assert(Dim == 2, "planar rotation");
    Mat<Dim> r;
    r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
    return r;
  }

  GroupKind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  std::size_t size() const { return elements_.size(); }
  const std::vector<Mat<Dim>>& elements() const { return elements_; }
  const std::vector<double>& haar_weights() const { return weights_; }

  /// Elements used to probe invariance: the group itself when finite; for the
  /// circle, a fixed set of generic angles that are not quadrature nodes.
  std::vector<Mat<Dim>> probe_elements() const {
    if (kind_ == GroupKind::Finite) return elements_;
    std::vector<Mat<Dim>> out;
    if constexpr (Dim == 2)
      for (double a : {0.1234, 0.7071, 1.9, 2.6180, 4.4, 5.8})
        out.push_back(rotation(a));
    return out;
  }

private:
  GroupAction() = default;

  void validate_orthogonal() const {
    for (const auto& m : elements_)
      if (max_abs(m.transpose() * m - Mat<Dim>::Identity()) > 1e-12)
        throw InputError("GroupAction: element is not orthogonal within 1e-12");
  }

  int index_of(const Mat<Dim>& m) const {
    for (std::size_t i = 0; i < elements_.size(); ++i)
      if (max_abs(elements_[i] - m) <= 1e-12) return static_cast<int>(i);
    return -1;
  }

  GroupKind kind_ = GroupKind::Finite;
  std::string name_;
  std::vector<Mat<Dim>> elements_;
  std::vector<double> weights_;
};

}  // namespace eqmollify
