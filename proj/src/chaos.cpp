#include "sgfem/chaos.hpp"

#include <algorithm>
#include <cmath>

#include "sgfem/errors.hpp"
#include "sgfem/quadrature.hpp"

namespace sgfem {

double hermite_eval(double variance, int degree, double point) {
  if (!(variance > 0.0)) throw Error("hermite_eval: variance must be positive");
  if (degree < 0) throw Error("hermite_eval: negative degree");
  if (degree > kMaxHermiteDegree) throw Error("hermite_eval: degree exceeds cap of 30");
  const double x = point / std::sqrt(variance);
  // normalized probabilists' recurrence: p_{k+1} = (x p_k - sqrt(k) p_{k-1}) / sqrt(k+1)
  double pk = 1.0, pkm1 = 0.0;
  for (int k = 0; k < degree; ++k) {
    const double pkp1 = (x * pk - std::sqrt(static_cast<double>(k)) * pkm1) / std::sqrt(static_cast<double>(k + 1));
    pkm1 = pk;
    pk = pkp1;
  }
  return pk;
}

double triple_product_1d(double variance, int i, int j, int k) {
  if (!(variance > 0.0)) throw Error("triple_product_1d: variance must be positive");
  if (i < 0 || j < 0 || k < 0) throw Error("triple_product_1d: negative degree");
  const int total = i + j + k;
  if (total % 2 != 0) return 0.0;
  if (2 * std::max({i, j, k}) > total) return 0.0;
  // Exact quadrature; the value does not depend on the variance, so integrate in
  // the standard variable.
  const QuadratureRule1D rule = gauss_hermite(total / 2 + 1);
  double acc = 0.0;
  for (std::size_t q = 0; q < rule.points.size(); ++q) {
    const double y = rule.points[q];
    acc += rule.weights[q] * hermite_eval(1.0, i, y) * hermite_eval(1.0, j, y) * hermite_eval(1.0, k, y);
  }
  return acc;
}

TripleProductTable::TripleProductTable(int deg_b, int deg_a, int deg_i)
    : deg_b_(deg_b), deg_a_(deg_a), deg_i_(deg_i) {
  data_.assign(static_cast<std::size_t>(deg_b) * deg_a * deg_i, 0.0);
  for (int b = 0; b < deg_b; ++b)
    for (int a = 0; a < deg_a; ++a)
      for (int i = 0; i < deg_i; ++i)
        data_[(static_cast<std::size_t>(b) * deg_a_ + a) * deg_i_ + i] = triple_product_1d(1.0, b, a, i);
}

ModeScaling::ModeScaling(std::vector<double> gamma_sup, double rho, double theta)
    : gamma_sup_(std::move(gamma_sup)), rho_(rho), theta_(theta) {
  if (!(rho_ > 0.0) || rho_ > 1.0) throw Error("ModeScaling: rho must be in (0, 1]");
  if (theta_ < 0.0 || theta_ >= 1.0) throw Error("ModeScaling: theta must be in [0, 1)");
  for (double g : gamma_sup_)
    if (g < 0.0) throw Error("ModeScaling: sup norms must be nonnegative");
}

double ModeScaling::sigma(int mode, double scale) const {
  return std::exp(scale * theta_ * rho_ * gamma_sup_[static_cast<std::size_t>(mode)]);
}

double ModeScaling::moment_constant(int mode, double alpha) const {
  const double s = sigma(mode);
  const double disc = alpha + (1.0 - alpha) * s * s;
  if (!(disc > 0.0))
    throw DivergentMoment("zeta moment diverges for alpha=" + std::to_string(alpha) + " in mode " +
                          std::to_string(mode + 1));
  return std::pow(s, alpha - 1.0) * std::sqrt(disc);
}

double ModeScaling::tilted_variance(int mode, double alpha) const {
  const double s = sigma(mode);
  const double disc = alpha + (1.0 - alpha) * s * s;
  if (!(disc > 0.0)) throw DivergentMoment("tilted variance undefined, alpha=" + std::to_string(alpha));
  return s * s / disc;
}

double ModeScaling::zeta_moment(double alpha) const {
  if (alpha < 0.0) throw Error("zeta_moment: alpha must be nonnegative");
  double value = 1.0;
  for (int m = 0; m < mode_count(); ++m) value /= moment_constant(m, alpha);
  return value;
}

double ModeScaling::zeta_defect() const {
  const double m4 = zeta_moment(4.0);
  const double m3 = zeta_moment(3.0);
  const double m2 = zeta_moment(2.0);
  return std::sqrt(std::max(0.0, m4 + m2 - 2.0 * m3));
}

namespace {

/// Gram matrix of the orthonormal polynomials under zeta^alpha pi_0. The weighted
/// measure is proportional to a Gaussian of known variance, so the quadrature is exact.
Eigen::MatrixXd weighted_gram(const ModeScaling& scaling, int mode, int size, double alpha) {
  const double chaos_var = scaling.sigma(mode) * scaling.sigma(mode);
  const double c_alpha = scaling.moment_constant(mode, alpha);
  const double tilted_var = scaling.tilted_variance(mode, alpha);
  const QuadratureRule1D rule = gauss_hermite(size + 1, tilted_var);
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(size, size);
  for (std::size_t q = 0; q < rule.points.size(); ++q) {
    const double y = rule.points[q];
    Eigen::VectorXd p(size);
    for (int k = 0; k < size; ++k) p(k) = hermite_eval(chaos_var, k, y);
    gram.noalias() += (rule.weights[q] / c_alpha) * p * p.transpose();
  }
  return gram;
}

}  // namespace

ModeTransform doubly_orthogonal(const ModeScaling& scaling, int mode, int size) {
  if (size < 1) throw Error("doubly_orthogonal: size must be >= 1");
  if (size > kMaxHermiteDegree + 1) throw Error("doubly_orthogonal: block size exceeds degree cap");
  ModeTransform t;
  if (scaling.sigma(mode) == 1.0) {
    // zeta == 1: both Gram matrices are the identity
    t.z = Eigen::MatrixXd::Identity(size, size);
    t.c = Eigen::VectorXd::Ones(size);
    t.gram2 = Eigen::MatrixXd::Identity(size, size);
    return t;
  }
  const Eigen::MatrixXd g1 = weighted_gram(scaling, mode, size, 1.0);
  const Eigen::MatrixXd g2 = weighted_gram(scaling, mode, size, 2.0);

  Eigen::LLT<Eigen::MatrixXd> llt(g1);
  if (llt.info() != Eigen::Success)
    throw NumericalBreakdown("doubly_orthogonal: G1 not positive definite (quadrature misconfiguration)");

  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(g2, g1);
  if (solver.info() != Eigen::Success) throw NumericalBreakdown("doubly_orthogonal: eigensolver failed");

  // eigenvalues ascending; eigenvectors normalized such that Z^T G1 Z = I
  t.z = solver.eigenvectors();
  Eigen::VectorXd lambda = solver.eigenvalues();
  t.c.resize(size);
  for (int k = 0; k < size; ++k) {
    if (lambda(k) <= 0.0) throw NumericalBreakdown("doubly_orthogonal: nonpositive generalized eigenvalue");
    t.c(k) = std::sqrt(lambda(k));
  }
  // deterministic sign: first entry of significant magnitude made positive
  for (int k = 0; k < size; ++k) {
    const double colmax = t.z.col(k).cwiseAbs().maxCoeff();
    for (int r = 0; r < size; ++r) {
      if (std::abs(t.z(r, k)) > 1e-12 * colmax) {
        if (t.z(r, k) < 0.0) t.z.col(k) *= -1.0;
        break;
      }
    }
  }
  t.gram2 = g2;
  return t;
}

DoublyOrthogonalTransform::DoublyOrthogonalTransform(const ModeScaling& scaling, std::vector<int> dims)
    : dims_(std::move(dims)) {
  if (static_cast<int>(dims_.size()) > scaling.mode_count())
    throw Error("DoublyOrthogonalTransform: more dims than scaling modes");
  blocks_.reserve(dims_.size());
  for (std::size_t m = 0; m < dims_.size(); ++m)
    blocks_.push_back(doubly_orthogonal(scaling, static_cast<int>(m), dims_[m]));
}

double DoublyOrthogonalTransform::z_entry(const MultiIndex& mu, const MultiIndex& nu) const {
  double value = 1.0;
  for (std::size_t m = 0; m < dims_.size(); ++m) {
    const int i = m < mu.size() ? mu[m] : 0;
    const int j = m < nu.size() ? nu[m] : 0;
    if (i >= dims_[m] || j >= dims_[m]) throw IndexOutOfRange("z_entry: index beyond transform block");
    value *= blocks_[m].z(i, j);
  }
  return value;
}

double DoublyOrthogonalTransform::c_weight(const MultiIndex& nu) const {
  double value = 1.0;
  for (std::size_t m = 0; m < dims_.size(); ++m) {
    const int j = m < nu.size() ? nu[m] : 0;
    if (j >= dims_[m]) throw IndexOutOfRange("c_weight: index beyond transform block");
    value *= blocks_[m].c(j);
  }
  return value;
}

double DoublyOrthogonalTransform::basis_weight_sq(const MultiIndex& mu) const {
  double value = 1.0;
  for (std::size_t m = 0; m < dims_.size(); ++m) {
    const int i = m < mu.size() ? mu[m] : 0;
    if (i >= dims_[m]) throw IndexOutOfRange("basis_weight_sq: index beyond transform block");
    value *= blocks_[m].gram2(i, i);
  }
  return value;
}

double weighted_sq_norm(const std::map<MultiIndex, double>& coeffs, const DoublyOrthogonalTransform& transform) {
  const MultiIndexSet cover(transform.dims());
  double total = 0.0;
  for (std::size_t f = 0; f < cover.size(); ++f) {
    const MultiIndex nu = cover.unflatten(f);
    double inner = 0.0;
    for (const auto& [mu, v] : coeffs) inner += v * transform.z_entry(mu, nu);
    const double c = transform.c_weight(nu);
    total += c * c * inner * inner;
  }
  return total;
}

}  // namespace sgfem
