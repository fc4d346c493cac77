#pragma once

#include <cstddef>
#include <vector>

#include "tep/core.hpp"

namespace tep {

class QuadratureError : public InputError {
 public:
  using InputError::InputError;
};

enum class QuadratureScheme { Trapezoid, GaussLegendre };

/// Nodes and weights integrating over β ∈ [0, 1]. Weights sum to one.
struct QuadratureSpec {
  std::vector<double> nodes;
  std::vector<double> weights;
  QuadratureScheme scheme = QuadratureScheme::Trapezoid;

  std::size_t size() const { return nodes.size(); }

  // Composite trapezoid on k uniformly spaced nodes including both endpoints.
  static QuadratureSpec trapezoid(std::size_t k);
  // Gauss–Legendre with k interior nodes mapped to [0, 1].
  static QuadratureSpec gauss_legendre(std::size_t k);

  // Throws QuadratureError on a malformed rule.
  void validate() const;
};

QuadratureSpec make_quadrature(QuadratureScheme scheme, std::size_t k);

}  // namespace tep
