#pragma once

#include <array>
#include <vector>

namespace sgfem {

/// One-dimensional quadrature rule: sum_i weights[i] * f(points[i]).
struct QuadratureRule1D {
  std::vector<double> points;
  std::vector<double> weights;
};

/// Gauss-Hermite rule for the standard Gaussian probability measure N(0, 1).
/// n nodes integrate polynomials up to degree 2n - 1 exactly; the weights sum to 1.
QuadratureRule1D gauss_hermite(int n);

/// Gauss-Hermite rule for the centered Gaussian measure N(0, variance).
QuadratureRule1D gauss_hermite(int n, double variance);

/// Quadrature point on the reference triangle in barycentric coordinates.
struct TrianglePoint {
  std::array<double, 3> bary;
  double weight;  // relative to the triangle area, weights sum to 1
};

/// Symmetric rule exact for polynomials of the given degree (supported: 1, 2, 5).
const std::vector<TrianglePoint>& triangle_rule(int degree);

}  // namespace sgfem
