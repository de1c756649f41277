#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "sgfem/field.hpp"
#include "sgfem/galerkin.hpp"
#include "sgfem/multi_index.hpp"

// Independent reference implementations used to validate the production paths.
// Quadrature nodes come from Newton iteration rather than the eigensolver route,
// moments from composite Simpson rather than the tilted-Gaussian identity, and
// the Galerkin system from explicit tensor-product quadrature in the parameter.

namespace sgfem::oracles {

struct Rule1D {
  std::vector<double> points;
  std::vector<double> weights;
};

/// Gauss-Hermite rule for N(0,1) via Newton iteration on the recurrence.
Rule1D newton_gauss_hermite(int n);

/// Closed-form triple product sqrt(i! j! k!) / ((s-i)! (s-j)! (s-k)!), s = (i+j+k)/2.
double triple_product_closed_form(int i, int j, int k);

/// Triple product by the Newton-node quadrature at a given node count.
double triple_product_quadrature(int i, int j, int k, double variance, int nodes);

/// integral of zeta_{sigma}^alpha d pi_0 for a single mode by composite Simpson.
double zeta_moment_simpson(double sigma, double alpha);

/// Degree-k orthonormal polynomial under N(0, variance) built by Gram-Schmidt on
/// the moment matrix, evaluated at a point. Degrees up to ~10 are reliable.
double hermite_gram_schmidt(double variance, int degree, double point);

struct DenseGalerkinSystem {
  Eigen::MatrixXd matrix;    // (free * |Lambda|) square
  Eigen::VectorXd rhs;
  Eigen::VectorXd solution;  // flattened row-major [free dof][chaos index]
};

/// Stochastic Galerkin system assembled by explicit tensor-product Gauss-Hermite
/// quadrature over the parameter vector; no triple products involved.
DenseGalerkinSystem brute_force_galerkin(const FESpace& space, const DiscreteCoefficient& coeff,
                                         const MultiIndexSet& lambda, const ModeScaling& scaling,
                                         const std::function<double(const Vec2&)>& f);

/// Minimal cardinality over all subsets reaching the marking threshold.
/// root_sum_square: compare sqrt(sum of squares); otherwise plain sums against
/// theta * total (total supplied by the caller).
int exhaustive_min_cardinality(const std::vector<double>& values, double theta, bool root_sum_square,
                               double total);

}  // namespace sgfem::oracles
