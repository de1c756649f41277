#include "sgfem/quadrature.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <stdexcept>

#include "sgfem/errors.hpp"

namespace sgfem {

namespace {

QuadratureRule1D compute_gauss_hermite(int n);

}  // namespace

QuadratureRule1D gauss_hermite(int n) {
  if (n < 1) throw Error("gauss_hermite: need at least one node");
  // memoized; rule construction is single-threaded by the concurrency contract
  static std::map<int, QuadratureRule1D> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, compute_gauss_hermite(n)).first;
  return it->second;
}

namespace {

QuadratureRule1D compute_gauss_hermite(int n) {
  // Golub-Welsch on the Jacobi matrix of the probabilists' Hermite recurrence:
  // zero diagonal, off-diagonal sqrt(k).
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double b = std::sqrt(static_cast<double>(k));
    jacobi(k, k - 1) = b;
    jacobi(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
  if (solver.info() != Eigen::Success) throw NumericalBreakdown("gauss_hermite: eigensolver failed");

  QuadratureRule1D rule;
  rule.points.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    rule.points[i] = solver.eigenvalues()(i);
    const double v0 = solver.eigenvectors()(0, i);
    rule.weights[i] = v0 * v0;  // total mass 1 for the probability measure
  }
  return rule;
}

}  // namespace

QuadratureRule1D gauss_hermite(int n, double variance) {
  if (!(variance > 0.0)) throw Error("gauss_hermite: variance must be positive");
  QuadratureRule1D rule = gauss_hermite(n);
  const double s = std::sqrt(variance);
  for (double& x : rule.points) x *= s;
  return rule;
}

namespace {

std::vector<TrianglePoint> make_triangle_rule(int degree) {
  std::vector<TrianglePoint> pts;
  switch (degree) {
    case 1:
      pts.push_back({{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}, 1.0});
      break;
    case 2:
      // edge midpoints
      pts.push_back({{0.5, 0.5, 0.0}, 1.0 / 3.0});
      pts.push_back({{0.0, 0.5, 0.5}, 1.0 / 3.0});
      pts.push_back({{0.5, 0.0, 0.5}, 1.0 / 3.0});
      break;
    case 5: {
      // 7-point rule (Radon/Dunavant), exact up to degree 5
      const double w0 = 9.0 / 40.0;
      const double a1 = 0.059715871789770, b1 = 0.470142064105115, w1 = 0.132394152788506;
      const double a2 = 0.797426985353087, b2 = 0.101286507323456, w2 = 0.125939180544827;
      pts.push_back({{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}, w0});
      pts.push_back({{a1, b1, b1}, w1});
      pts.push_back({{b1, a1, b1}, w1});
      pts.push_back({{b1, b1, a1}, w1});
      pts.push_back({{a2, b2, b2}, w2});
      pts.push_back({{b2, a2, b2}, w2});
      pts.push_back({{b2, b2, a2}, w2});
      break;
    }
    default:
      throw Error("triangle_rule: unsupported degree " + std::to_string(degree));
  }
  return pts;
}

}  // namespace

const std::vector<TrianglePoint>& triangle_rule(int degree) {
  static const std::map<int, std::vector<TrianglePoint>> rules = {
      {1, make_triangle_rule(1)}, {2, make_triangle_rule(2)}, {5, make_triangle_rule(5)}};
  auto it = rules.find(degree);
  if (it == rules.end()) it = rules.find(5);
  if (degree > 5) throw Error("triangle_rule: unsupported degree " + std::to_string(degree));
  return it->second;
}

}  // namespace sgfem
