#pragma once

#include <Eigen/Dense>
#include <map>
#include <vector>

#include "sgfem/multi_index.hpp"

namespace sgfem {

inline constexpr int kMaxHermiteDegree = 30;

/// Value of the degree-k polynomial orthonormal in L2 under N(0, variance),
/// evaluated by the three-term recurrence in the rescaled variable.
double hermite_eval(double variance, int degree, double point);

/// Integral of P_i P_j P_k against the orthonormality measure. The value is
/// independent of the variance; the parity/support rule zeros are returned exactly.
double triple_product_1d(double variance, int i, int j, int k);

/// Per-mode dense triple-product array tau[b][a][i] for b < deg_b, a < deg_a, i < deg_i.
class TripleProductTable {
 public:
  TripleProductTable() = default;
  TripleProductTable(int deg_b, int deg_a, int deg_i);

  double operator()(int b, int a, int i) const {
    return data_[(static_cast<std::size_t>(b) * deg_a_ + a) * deg_i_ + i];
  }
  int deg_b() const { return deg_b_; }
  int deg_a() const { return deg_a_; }
  int deg_i() const { return deg_i_; }

 private:
  int deg_b_ = 0, deg_a_ = 0, deg_i_ = 0;
  std::vector<double> data_;
};

/// Per-mode scalings sigma_m(theta * rho) = exp(theta * rho * ||gamma_m||_inf)
/// together with the zeta-weight moments they induce.
class ModeScaling {
 public:
  ModeScaling() = default;
  ModeScaling(std::vector<double> gamma_sup, double rho, double theta);

  int mode_count() const { return static_cast<int>(gamma_sup_.size()); }
  double rho() const { return rho_; }
  double theta() const { return theta_; }
  const std::vector<double>& gamma_sup() const { return gamma_sup_; }

  /// sigma_m(scale * theta * rho); scale = 1 gives the chaos measure deviation.
  double sigma(int mode, double scale = 1.0) const;

  /// Normalization constant c_{alpha,m} = sigma^{alpha-1} sqrt(alpha + (1-alpha) sigma^2).
  double moment_constant(int mode, double alpha) const;

  /// Variance of the Gaussian proportional to zeta^alpha pi_0 in mode m.
  double tilted_variance(int mode, double alpha) const;

  /// integral of zeta_{theta rho}^alpha over all modes = prod_m 1 / c_{alpha,m}.
  double zeta_moment(double alpha) const;

  /// || zeta^2 - zeta ||_{pi_0} = sqrt(M4 + M2 - 2 M3).
  double zeta_defect() const;

 private:
  std::vector<double> gamma_sup_;
  double rho_ = 1.0;
  double theta_ = 0.0;
};

/// Single-mode doubly orthogonal block: Z^T G1 Z = I and Z^T G2 Z = diag(c^2),
/// where G1, G2 are the Gram matrices of {P_k} under zeta pi_0 and zeta^2 pi_0.
struct ModeTransform {
  Eigen::MatrixXd z;       // columns sorted by ascending c
  Eigen::VectorXd c;       // positive weights
  Eigen::MatrixXd gram2;   // G2, kept for the weighted-norm identity
};

ModeTransform doubly_orthogonal(const ModeScaling& scaling, int mode, int size);

/// Tensorized transform: z_{mu nu} = prod_m z^m, c_nu = prod_m c^m.
class DoublyOrthogonalTransform {
 public:
  DoublyOrthogonalTransform() = default;
  DoublyOrthogonalTransform(const ModeScaling& scaling, std::vector<int> dims);

  const std::vector<int>& dims() const { return dims_; }
  const ModeTransform& block(int mode) const { return blocks_[static_cast<std::size_t>(mode)]; }
  int mode_count() const { return static_cast<int>(blocks_.size()); }

  double z_entry(const MultiIndex& mu, const MultiIndex& nu) const;
  double c_weight(const MultiIndex& nu) const;

  /// ||P_mu zeta||^2_{pi_0} = sum_nu c_nu^2 z_{mu nu}^2 = prod_m G2^m[mu_m, mu_m].
  double basis_weight_sq(const MultiIndex& mu) const;

 private:
  std::vector<int> dims_;
  std::vector<ModeTransform> blocks_;
};

/// sum_nu c_nu^2 ( sum_mu v_mu z_{mu nu} )^2 for scalar coefficients v.
double weighted_sq_norm(const std::map<MultiIndex, double>& coeffs, const DoublyOrthogonalTransform& transform);

}  // namespace sgfem
