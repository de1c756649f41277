#include "oracles.hpp"

#include <cmath>
#include <stdexcept>

#include "sgfem/chaos.hpp"

namespace sgfem::oracles {

namespace {

/// Orthonormal probabilists' Hermite value and all lower degrees at x.
void hermite_column(int n, double x, std::vector<double>& p) {
  p.resize(static_cast<std::size_t>(n) + 1);
  p[0] = 1.0;
  if (n >= 1) p[1] = x;
  for (int k = 1; k < n; ++k)
    p[static_cast<std::size_t>(k) + 1] =
        (x * p[static_cast<std::size_t>(k)] - std::sqrt(static_cast<double>(k)) * p[static_cast<std::size_t>(k) - 1]) /
        std::sqrt(static_cast<double>(k + 1));
}

}  // namespace

Rule1D newton_gauss_hermite(int n) {
  if (n < 1) throw std::invalid_argument("newton_gauss_hermite: n >= 1");
  Rule1D rule;
  rule.points.assign(static_cast<std::size_t>(n), 0.0);
  rule.weights.assign(static_cast<std::size_t>(n), 0.0);
  std::vector<double> p;
  // initial guesses in the physicists' variable (descending roots), polished by
  // Newton on the orthonormal probabilists' recurrence
  const int half = (n + 1) / 2;
  std::vector<double> phys(static_cast<std::size_t>(half), 0.0);
  double z = 0.0;
  for (int i = 0; i < half; ++i) {
    if (i == 0) {
      z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
    } else if (i == 1) {
      z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * phys[0];
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * phys[1];
    } else {
      z = 2.0 * z - phys[static_cast<std::size_t>(i) - 2];
    }
    double x = z * std::sqrt(2.0);
    for (int it = 0; it < 200; ++it) {
      hermite_column(n, x, p);
      const double deriv = std::sqrt(static_cast<double>(n)) * p[static_cast<std::size_t>(n) - 1];
      const double step = p[static_cast<std::size_t>(n)] / deriv;
      x -= step;
      if (std::abs(step) < 1e-15 * std::max(1.0, std::abs(x))) break;
    }
    rule.points[static_cast<std::size_t>(i)] = x;
    phys[static_cast<std::size_t>(i)] = x / std::sqrt(2.0);
    z = phys[static_cast<std::size_t>(i)];
  }
  // mirror the symmetric roots and compute Christoffel weights 1 / sum_k p_k(x)^2
  for (int i = 0; i < half; ++i)
    rule.points[static_cast<std::size_t>(n - 1 - i)] = -rule.points[static_cast<std::size_t>(i)];
  std::sort(rule.points.begin(), rule.points.end());
  for (int i = 0; i < n; ++i) {
    hermite_column(n - 1, rule.points[static_cast<std::size_t>(i)], p);
    double s = 0.0;
    for (int k = 0; k < n; ++k) s += p[static_cast<std::size_t>(k)] * p[static_cast<std::size_t>(k)];
    rule.weights[static_cast<std::size_t>(i)] = 1.0 / s;
  }
  return rule;
}

double triple_product_closed_form(int i, int j, int k) {
  const int total = i + j + k;
  if (total % 2 != 0) return 0.0;
  const int s = total / 2;
  if (i > s || j > s || k > s) return 0.0;
  const double lg = 0.5 * (std::lgamma(i + 1.0) + std::lgamma(j + 1.0) + std::lgamma(k + 1.0)) -
                    std::lgamma(s - i + 1.0) - std::lgamma(s - j + 1.0) - std::lgamma(s - k + 1.0);
  return std::exp(lg);
}

double triple_product_quadrature(int i, int j, int k, double variance, int nodes) {
  const Rule1D rule = newton_gauss_hermite(nodes);
  const double s = std::sqrt(variance);
  std::vector<double> p;
  double acc = 0.0;
  const int top = std::max({i, j, k});
  for (std::size_t q = 0; q < rule.points.size(); ++q) {
    // integrate in the N(0, variance) variable: y = s * x
    const double y = s * rule.points[q];
    hermite_column(top, y / s, p);
    acc += rule.weights[q] * p[static_cast<std::size_t>(i)] * p[static_cast<std::size_t>(j)] *
           p[static_cast<std::size_t>(k)];
  }
  return acc;
}

double zeta_moment_simpson(double sigma, double alpha) {
  const double c = alpha * (0.5 - 0.5 / (sigma * sigma));
  if (!(0.5 - c > 1e-6)) throw std::invalid_argument("zeta_moment_simpson: divergent integrand");
  const double bound = 25.0 / std::sqrt(std::min(1.0, 0.5 - c) * 2.0);
  const int n = 400001;  // odd for Simpson
  const double h = 2.0 * bound / (n - 1);
  const double inv_sqrt_2pi = 0.39894228040143267794;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double y = -bound + i * h;
    const double integrand = std::pow(1.0 / sigma, alpha) * std::exp((c - 0.5) * y * y) * inv_sqrt_2pi;
    const double w = (i == 0 || i == n - 1) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    acc += w * integrand;
  }
  return acc * h / 3.0;
}

double hermite_gram_schmidt(double variance, int degree, double point) {
  const int n = degree + 1;
  // Gaussian moments E[y^k] for N(0, variance)
  std::vector<double> moments(static_cast<std::size_t>(2 * n), 0.0);
  moments[0] = 1.0;
  for (int k = 2; k < 2 * n; k += 2)
    moments[static_cast<std::size_t>(k)] = moments[static_cast<std::size_t>(k) - 2] * variance * (k - 1);
  Eigen::MatrixXd gram(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) gram(i, j) = moments[static_cast<std::size_t>(i + j)];
  const Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) throw std::runtime_error("hermite_gram_schmidt: moment matrix not SPD");
  // p_degree coefficients solve L c = e_degree scaled; evaluate the monomials
  Eigen::VectorXd mono(n);
  double ypow = 1.0;
  for (int k = 0; k < n; ++k) {
    mono(k) = ypow;
    ypow *= point;
  }
  const Eigen::MatrixXd linv = llt.matrixL().solve(Eigen::MatrixXd::Identity(n, n));
  return linv.row(degree).dot(mono);
}

DenseGalerkinSystem brute_force_galerkin(const FESpace& space, const DiscreteCoefficient& coeff,
                                         const MultiIndexSet& lambda, const ModeScaling& scaling,
                                         const std::function<double(const Vec2&)>& f) {
  const int modes = std::max(lambda.mode_count(), coeff.mode_count());
  const long n = static_cast<long>(space.free_count()) * static_cast<long>(lambda.size());
  if (n > 2000) throw std::invalid_argument("brute_force_galerkin: instance too large");

  // per-mode node counts: integrand degree (dhat-1) + 2 (d-1)
  std::vector<Rule1D> rules;
  for (int m = 0; m < modes; ++m) {
    const int d = m < lambda.mode_count() ? lambda.dims()[static_cast<std::size_t>(m)] : 1;
    const int dh = m < coeff.mode_count() ? coeff.dhat_dims()[static_cast<std::size_t>(m)] : 1;
    const int deg = (dh - 1) + 2 * (d - 1);
    rules.push_back(newton_gauss_hermite(deg / 2 + 2));
  }

  const MultiIndexSet dhat_set(coeff.mode_count() > 0 ? coeff.dhat_dims() : std::vector<int>{});
  const Eigen::MatrixXd a_dense = coeff.node_count() > 0
                                      ? coeff.to_dense()
                                      : Eigen::MatrixXd::Ones(space.node_count(), 1);

  DenseGalerkinSystem sys;
  sys.matrix = Eigen::MatrixXd::Zero(n, n);

  // iterate the tensor-product quadrature grid
  std::vector<int> idx(static_cast<std::size_t>(modes), 0);
  const std::vector<MultiIndex> lambda_list = lambda.enumerate();
  while (true) {
    double weight = 1.0;
    std::vector<double> y(static_cast<std::size_t>(modes));
    for (int m = 0; m < modes; ++m) {
      const auto& rule = rules[static_cast<std::size_t>(m)];
      const double var = scaling.sigma(m) * scaling.sigma(m);
      y[static_cast<std::size_t>(m)] = std::sqrt(var) * rule.points[static_cast<std::size_t>(idx[m])];
      weight *= rule.weights[static_cast<std::size_t>(idx[m])];
    }

    // nodal coefficient a_N(., y) and the chaos basis values at y
    Eigen::VectorXd a_at_y = Eigen::VectorXd::Zero(space.node_count());
    for (std::size_t af = 0; af < dhat_set.size(); ++af) {
      const MultiIndex alpha = dhat_set.unflatten(af);
      double p = 1.0;
      for (int m = 0; m < modes && p != 0.0; ++m) {
        const int k = static_cast<std::size_t>(m) < alpha.size() ? alpha[static_cast<std::size_t>(m)] : 0;
        if (k > 0) p *= hermite_eval(scaling.sigma(m) * scaling.sigma(m), k, y[static_cast<std::size_t>(m)]);
      }
      a_at_y += p * a_dense.col(static_cast<Eigen::Index>(af));
    }
    const SparseMat k_y = assemble_stiffness(space, a_at_y);

    Eigen::VectorXd basis(static_cast<Eigen::Index>(lambda_list.size()));
    for (std::size_t b = 0; b < lambda_list.size(); ++b) {
      double p = 1.0;
      for (int m = 0; m < modes; ++m) {
        const int k = static_cast<std::size_t>(m) < lambda_list[b].size() ? lambda_list[b][static_cast<std::size_t>(m)] : 0;
        if (k > 0) p *= hermite_eval(scaling.sigma(m) * scaling.sigma(m), k, y[static_cast<std::size_t>(m)]);
      }
      basis(static_cast<Eigen::Index>(b)) = p;
    }

    for (int ko = 0; ko < k_y.outerSize(); ++ko) {
      for (SparseMat::InnerIterator it(k_y, ko); it; ++it) {
        for (std::size_t b1 = 0; b1 < lambda_list.size(); ++b1) {
          for (std::size_t b2 = 0; b2 < lambda_list.size(); ++b2) {
            sys.matrix(it.row() * static_cast<long>(lambda_list.size()) + static_cast<long>(b1),
                       it.col() * static_cast<long>(lambda_list.size()) + static_cast<long>(b2)) +=
                weight * it.value() * basis(static_cast<Eigen::Index>(b1)) * basis(static_cast<Eigen::Index>(b2));
          }
        }
      }
    }

    int m = modes - 1;
    for (; m >= 0; --m) {
      if (++idx[static_cast<std::size_t>(m)] < static_cast<int>(rules[static_cast<std::size_t>(m)].points.size()))
        break;
      idx[static_cast<std::size_t>(m)] = 0;
    }
    if (m < 0) break;
    if (modes == 0) break;
  }

  // deterministic load on the mean mode
  const CoeffTensor load = assemble_rhs(space, f, lambda);
  sys.rhs = Eigen::VectorXd::Zero(n);
  for (int v = 0; v < space.node_count(); ++v) {
    const int fr = space.free_index(v);
    if (fr < 0) continue;
    for (std::size_t b = 0; b < lambda_list.size(); ++b)
      sys.rhs(fr * static_cast<long>(lambda_list.size()) + static_cast<long>(b)) =
          load.values(v, static_cast<Eigen::Index>(b));
  }
  sys.solution = sys.matrix.ldlt().solve(sys.rhs);
  return sys;
}

int exhaustive_min_cardinality(const std::vector<double>& values, double theta, bool root_sum_square,
                               double total) {
  const int n = static_cast<int>(values.size());
  if (n > 20) throw std::invalid_argument("exhaustive_min_cardinality: too many items");
  int best = n + 1;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    double acc = 0.0;
    int card = 0;
    for (int i = 0; i < n; ++i) {
      if (mask & (1u << i)) {
        acc += root_sum_square ? values[static_cast<std::size_t>(i)] * values[static_cast<std::size_t>(i)]
                               : values[static_cast<std::size_t>(i)];
        ++card;
      }
    }
    const bool ok = root_sum_square ? std::sqrt(acc) >= theta * total : acc >= theta * total;
    if (ok) best = std::min(best, card);
  }
  return best <= n ? best : -1;
}

}  // namespace sgfem::oracles
