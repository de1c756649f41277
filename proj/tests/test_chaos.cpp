#include <doctest.h>

#include <cmath>
#include <map>

#include "oracles/oracles.hpp"
#include "sgfem/chaos.hpp"
#include "sgfem/errors.hpp"
#include "sgfem/quadrature.hpp"

using namespace sgfem;

namespace {

ModeScaling scaling_for_sigma(double sigma, int modes = 1) {
  // theta * rho * sup = log(sigma); pick rho = 1, theta in [0,1)
  if (sigma == 1.0) return ModeScaling(std::vector<double>(static_cast<std::size_t>(modes), 0.0), 1.0, 0.0);
  return ModeScaling(std::vector<double>(static_cast<std::size_t>(modes), std::log(sigma) * 2.0), 1.0, 0.5);
}

}  // namespace

TEST_CASE("gauss-hermite rules match the Newton-iteration oracle") {
  for (int n : {1, 2, 5, 12, 31, 64}) {
    const QuadratureRule1D rule = gauss_hermite(n);
    const auto oracle = oracles::newton_gauss_hermite(n);
    REQUIRE(rule.points.size() == oracle.points.size());
    double wsum = 0.0;
    for (int i = 0; i < n; ++i) {
      CHECK(rule.points[static_cast<std::size_t>(i)] ==
            doctest::Approx(oracle.points[static_cast<std::size_t>(i)]).epsilon(1e-12));
      CHECK(rule.weights[static_cast<std::size_t>(i)] ==
            doctest::Approx(oracle.weights[static_cast<std::size_t>(i)]).epsilon(1e-11));
      wsum += rule.weights[static_cast<std::size_t>(i)];
    }
    CHECK(wsum == doctest::Approx(1.0).epsilon(1e-13));
  }
}

TEST_CASE("hermite evaluation basics") {
  CHECK(hermite_eval(1.0, 0, 3.7) == 1.0);
  CHECK(hermite_eval(1.0, 1, 2.0) == doctest::Approx(2.0).epsilon(1e-15));
  // degree 2 under N(0,4) at y=2: Gram-Schmidt oracle
  const double expected = oracles::hermite_gram_schmidt(4.0, 2, 2.0);
  CHECK(hermite_eval(4.0, 2, 2.0) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(std::abs(expected) < 1e-12);  // (y^2/4 - 1)/sqrt(2) vanishes at y = 2
}

TEST_CASE("hermite orthonormality under the scaled measure") {
  for (double var : {1.0, 1.44, 4.0}) {
    const QuadratureRule1D rule = gauss_hermite(12, var);
    for (int i = 0; i <= 5; ++i) {
      for (int j = 0; j <= 5; ++j) {
        double acc = 0.0;
        for (std::size_t q = 0; q < rule.points.size(); ++q)
          acc += rule.weights[q] * hermite_eval(var, i, rule.points[q]) * hermite_eval(var, j, rule.points[q]);
        CHECK(acc == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("hermite degree cap") {
  CHECK_THROWS_AS(hermite_eval(1.0, 31, 0.5), Error);
}

TEST_CASE("triple product examples") {
  CHECK(triple_product_1d(1.0, 0, 0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(triple_product_1d(2.5, 0, 1, 1) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(triple_product_1d(1.0, 1, 1, 2) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
  CHECK(triple_product_1d(1.7, 1, 1, 1) == 0.0);  // odd sum: exactly zero
}

TEST_CASE("triple products match the 64-node oracle and the closed form") {
  for (double var : {1.0, 1.21, 4.0}) {
    for (int i = 0; i <= 8; ++i) {
      for (int j = i; j <= 8 && i + j <= 16; ++j) {
        for (int k = j; k <= 16 - i - j; ++k) {
          const double value = triple_product_1d(var, i, j, k);
          CHECK(std::abs(value - oracles::triple_product_quadrature(i, j, k, var, 64)) <= 1e-10);
          CHECK(value == doctest::Approx(oracles::triple_product_closed_form(i, j, k)).epsilon(1e-11));
        }
      }
    }
  }
}

TEST_CASE("triple product support rule gives exact zeros") {
  for (int i = 0; i <= 6; ++i) {
    for (int j = 0; j <= 6; ++j) {
      for (int k = 0; k <= 6; ++k) {
        const int total = i + j + k;
        if (total % 2 == 1 || 2 * std::max({i, j, k}) > total) {
          CHECK(triple_product_1d(1.0, i, j, k) == 0.0);
        }
      }
    }
  }
}

TEST_CASE("triple product is independent of the variance") {
  for (int i : {0, 1, 3}) {
    for (int j : {1, 2, 4}) {
      for (int k : {1, 3, 5}) {
        const double base = triple_product_1d(1.0, i, j, k);
        CHECK(triple_product_1d(1.21, i, j, k) == doctest::Approx(base).epsilon(1e-12));
        CHECK(triple_product_1d(4.0, i, j, k) == doctest::Approx(base).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("permutation symmetry of the triple product table") {
  const TripleProductTable table(4, 4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k) {
        CHECK(table(i, j, k) == doctest::Approx(table(j, i, k)).epsilon(1e-14));
        CHECK(table(i, j, k) == doctest::Approx(table(k, j, i)).epsilon(1e-14));
      }
}

TEST_CASE("zeta moment trivial values") {
  const ModeScaling s = scaling_for_sigma(1.17, 3);
  CHECK(s.zeta_moment(0.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(s.zeta_moment(1.0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("zeta moment closed form vs quadrature oracle") {
  // restricted to the integrable part of the stated grid: alpha + (1-alpha) sigma^2 > 0
  for (double sigma : {1.0, 1.05, 1.1, 1.2, 1.3}) {
    for (double alpha : {0.5, 2.0, 3.0, 4.0}) {
      if (alpha + (1.0 - alpha) * sigma * sigma <= 0.05) continue;
      const ModeScaling s = scaling_for_sigma(sigma);
      CHECK(s.zeta_moment(alpha) == doctest::Approx(oracles::zeta_moment_simpson(sigma, alpha)).epsilon(1e-10));
    }
  }
  // closed form at alpha = 2 on a single mode with sigma = 1.1
  const ModeScaling s = scaling_for_sigma(1.1);
  CHECK(s.zeta_moment(2.0) == doctest::Approx(1.0 / (1.1 * std::sqrt(2.0 - 1.21))).epsilon(1e-13));
}

TEST_CASE("divergent moments are rejected") {
  const ModeScaling s = scaling_for_sigma(1.3);
  CHECK_THROWS_AS(s.zeta_moment(4.0), DivergentMoment);   // sigma^2 = 1.69 > 4/3
  CHECK_THROWS_AS(s.zeta_moment(3.0), DivergentMoment);   // > 3/2
  CHECK_NOTHROW(s.zeta_moment(2.0));
}

TEST_CASE("zeta defect vanishes for theta = 0 and decreases with theta") {
  const ModeScaling flat(std::vector<double>{0.5, 0.5}, 1.0, 0.0);
  CHECK(flat.zeta_defect() == 0.0);
  double last = 1e300;
  for (double theta : {0.20, 0.10, 0.05, 0.01}) {
    const ModeScaling s(std::vector<double>{0.5, 0.5}, 1.0, theta);
    const double defect = s.zeta_defect();
    CHECK(defect < last);
    CHECK(defect >= 0.0);
    last = defect;
  }
  // closed form vs quadrature for sigma(theta rho) = 1.05
  const ModeScaling one(std::vector<double>{std::log(1.05) * 2.0}, 1.0, 0.5);
  const double m4 = oracles::zeta_moment_simpson(1.05, 4.0);
  const double m3 = oracles::zeta_moment_simpson(1.05, 3.0);
  const double m2 = oracles::zeta_moment_simpson(1.05, 2.0);
  CHECK(one.zeta_defect() == doctest::Approx(std::sqrt(m4 + m2 - 2.0 * m3)).epsilon(1e-9));
}

TEST_CASE("doubly orthogonal transform: identity at theta = 0") {
  const ModeScaling s = scaling_for_sigma(1.0);
  const ModeTransform t = doubly_orthogonal(s, 0, 5);
  CHECK((t.z - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() == 0.0);
  for (int k = 0; k < 5; ++k) CHECK(t.c(k) == 1.0);
}

TEST_CASE("doubly orthogonal transform: 1x1 block") {
  const ModeScaling s = scaling_for_sigma(1.12);
  const ModeTransform t = doubly_orthogonal(s, 0, 1);
  const double g1 = 1.0;  // orthonormality of P_0 under zeta pi_0
  const double g2 = s.zeta_moment(2.0);
  CHECK(t.c(0) == doctest::Approx(std::sqrt(g2 / g1)).epsilon(1e-12));
  CHECK(t.z(0, 0) == doctest::Approx(1.0 / std::sqrt(g1)).epsilon(1e-12));
}

TEST_CASE("doubly orthogonal transform diagonalizes both Gram matrices") {
  // sigma = 1.41, n = 12 has Gram entries near 1e24: the small weights fall below
  // the attainable floating-point resolution, so the grid keeps kappa manageable
  for (double sigma : {1.0, 1.05, 1.1, 1.2, 1.3, 1.41}) {
    for (int n : {2, 6, 12}) {
      if (sigma > 1.35 && n > 6) continue;
      const ModeScaling s = scaling_for_sigma(sigma);
      const ModeTransform t = doubly_orthogonal(s, 0, n);
      // recompute the Gram matrices by quadrature at the tilted variances
      Eigen::MatrixXd g1 = Eigen::MatrixXd::Zero(n, n);
      Eigen::MatrixXd g2 = Eigen::MatrixXd::Zero(n, n);
      const double var = s.sigma(0) * s.sigma(0);
      for (int pass = 0; pass < 2; ++pass) {
        const double alpha = pass == 0 ? 1.0 : 2.0;
        const double c = s.moment_constant(0, alpha);
        const QuadratureRule1D rule = gauss_hermite(n + 2, s.tilted_variance(0, alpha));
        Eigen::MatrixXd& g = pass == 0 ? g1 : g2;
        for (std::size_t q = 0; q < rule.points.size(); ++q) {
          Eigen::VectorXd p(n);
          for (int k = 0; k < n; ++k) p(k) = hermite_eval(var, k, rule.points[q]);
          g.noalias() += (rule.weights[q] / c) * p * p.transpose();
        }
      }
      const double scale = std::max(1.0, g2.cwiseAbs().maxCoeff());
      const Eigen::MatrixXd r1 = t.z.transpose() * g1 * t.z - Eigen::MatrixXd::Identity(n, n);
      const Eigen::MatrixXd r2 =
          t.z.transpose() * g2 * t.z - Eigen::MatrixXd(t.c.array().square().matrix().asDiagonal());
      CHECK(r1.cwiseAbs().maxCoeff() <= 1e-10);
      CHECK(r2.cwiseAbs().maxCoeff() / scale <= 1e-10);
    }
  }
}

TEST_CASE("transform weights increase strictly with the degree") {
  const ModeScaling s = scaling_for_sigma(1.1);
  const ModeTransform t = doubly_orthogonal(s, 0, 6);
  for (int k = 0; k + 1 < 6; ++k) CHECK(t.c(k) < t.c(k + 1));
  CHECK(t.c(0) > 0.0);
}

TEST_CASE("transform construction requires finite second moments") {
  const ModeScaling s = scaling_for_sigma(1.45);  // sigma^2 > 2
  CHECK_THROWS_AS(doubly_orthogonal(s, 0, 4), DivergentMoment);
}

TEST_CASE("transform construction fails loudly when the block is unresolvable") {
  // near the integrability edge with a large block the spectrum spans ~1e24;
  // the construction must refuse rather than return garbage weights
  const ModeScaling s = scaling_for_sigma(1.41);
  CHECK_THROWS_AS(doubly_orthogonal(s, 0, 12), NumericalBreakdown);
}

TEST_CASE("weighted square norm: Parseval at theta = 0") {
  const ModeScaling s(std::vector<double>{0.3, 0.4}, 1.0, 0.0);
  const DoublyOrthogonalTransform t(s, {3, 3});
  std::map<MultiIndex, double> v = {{{0, 0}, 1.0}};
  CHECK(weighted_sq_norm(v, t) == doctest::Approx(1.0).epsilon(1e-13));
  v = {{{0, 0}, 0.5}, {{1, 2}, -2.0}, {{2, 1}, 0.25}};
  CHECK(weighted_sq_norm(v, t) == doctest::Approx(0.25 + 4.0 + 0.0625).epsilon(1e-13));
}

TEST_CASE("weighted square norm matches direct quadrature for sigma = 1.1") {
  const ModeScaling s = scaling_for_sigma(1.1);
  const DoublyOrthogonalTransform t(s, {4});
  const std::map<MultiIndex, double> v = {{{1}, 0.7}, {{3}, -0.4}};
  // direct: integral of (sum v_mu P_mu)^2 zeta^2 d pi_0 via the tilted-Gaussian form
  const double var = s.sigma(0) * s.sigma(0);
  const double c2 = s.moment_constant(0, 2.0);
  const QuadratureRule1D rule = gauss_hermite(10, s.tilted_variance(0, 2.0));
  double direct = 0.0;
  for (std::size_t q = 0; q < rule.points.size(); ++q) {
    const double g = 0.7 * hermite_eval(var, 1, rule.points[q]) - 0.4 * hermite_eval(var, 3, rule.points[q]);
    direct += rule.weights[q] / c2 * g * g;
  }
  CHECK(weighted_sq_norm(v, t) == doctest::Approx(direct).epsilon(1e-10));
}

TEST_CASE("weighted square norm rejects indices beyond the block") {
  const ModeScaling s = scaling_for_sigma(1.1);
  const DoublyOrthogonalTransform t(s, {2});
  const std::map<MultiIndex, double> v = {{{5}, 1.0}};
  CHECK_THROWS_AS(weighted_sq_norm(v, t), IndexOutOfRange);
}
