#include "tep/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "tep/core.hpp"

namespace tep {

QuadratureSpec QuadratureSpec::trapezoid(std::size_t k) {
  if (k < 2) throw QuadratureError("quadrature: trapezoid needs at least 2 nodes, got " + std::to_string(k));
  QuadratureSpec q;
  q.scheme = QuadratureScheme::Trapezoid;
  const double h = 1.0 / static_cast<double>(k - 1);
  for (std::size_t i = 0; i < k; ++i) {
    q.nodes.push_back(i + 1 == k ? 1.0 : static_cast<double>(i) * h);
    q.weights.push_back((i == 0 || i + 1 == k) ? 0.5 * h : h);
  }
  return q;
}

QuadratureSpec QuadratureSpec::gauss_legendre(std::size_t k) {
  if (k < 2) throw QuadratureError("quadrature: Gauss-Legendre needs at least 2 nodes, got " + std::to_string(k));
  QuadratureSpec q;
  q.scheme = QuadratureScheme::GaussLegendre;
  q.nodes.resize(k);
  q.weights.resize(k);
  const auto n = static_cast<double>(k);
  // Newton iteration on P_k from the Chebyshev-like initial guess; nodes come
  // out descending on [-1, 1], so fill from the back to keep them increasing.
  for (std::size_t i = 0; i < k; ++i) {
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (std::size_t j = 2; j <= k; ++j) {
        const double pj = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / static_cast<double>(j);
        p0 = p1;
        p1 = pj;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double step = p1 / dp;
      x -= step;
      if (std::abs(step) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    q.nodes[k - 1 - i] = 0.5 * (x + 1.0);
    q.weights[k - 1 - i] = 0.5 * w;
  }
  return q;
}

void QuadratureSpec::validate() const {
  if (nodes.size() < 2) throw QuadratureError("quadrature: fewer than 2 nodes");
  if (nodes.size() != weights.size()) throw QuadratureError("quadrature: node/weight count mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i] < 0.0 || nodes[i] > 1.0) throw QuadratureError("quadrature: node outside [0, 1]");
    if (i > 0 && !(nodes[i] > nodes[i - 1])) throw QuadratureError("quadrature: nodes not strictly increasing");
    if (!(weights[i] > 0.0)) throw QuadratureError("quadrature: non-positive weight");
    total += weights[i];
  }
  if (std::abs(total - 1.0) > 1e-12) throw QuadratureError("quadrature: weights do not sum to 1");
  if (scheme == QuadratureScheme::Trapezoid && (nodes.front() != 0.0 || nodes.back() != 1.0)) {
    throw QuadratureError("quadrature: trapezoid rule must include both endpoints");
  }
}

QuadratureSpec make_quadrature(QuadratureScheme scheme, std::size_t k) {
  return scheme == QuadratureScheme::Trapezoid ? QuadratureSpec::trapezoid(k)
                                               : QuadratureSpec::gauss_legendre(k);
}

}  // namespace tep
