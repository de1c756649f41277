#include "sgfem/field.hpp"

#include <cmath>

#include "sgfem/errors.hpp"
#include "sgfem/rng.hpp"

namespace sgfem {

double AffineField::evaluate(const Vec2& x, const std::vector<double>& y) const {
  double g = 0.0;
  for (std::size_t m = 0; m < modes.size() && m < y.size(); ++m) g += modes[m](x) * y[m];
  return g;
}

FourierModeInfo fourier_mode_info(int m) {
  if (m < 1) throw Error("fourier_mode_info: modes are 1-based");
  FourierModeInfo info;
  info.k = static_cast<int>(std::floor(-0.5 + std::sqrt(0.25 + 2.0 * m)));
  info.beta1 = m - info.k * (info.k + 1) / 2;
  info.beta2 = info.k - info.beta1;
  return info;
}

double riemann_zeta(double s) {
  if (!(s > 1.0)) throw Error("riemann_zeta: requires s > 1");
  const int n = 20000;
  double sum = 0.0;
  for (int k = 1; k <= n; ++k) sum += std::pow(static_cast<double>(k), -s);
  // Euler-Maclaurin tail
  const double nn = static_cast<double>(n);
  sum += std::pow(nn, 1.0 - s) / (s - 1.0) - 0.5 * std::pow(nn, -s) + s * std::pow(nn, -s - 1.0) / 12.0;
  return sum;
}

AffineField benchmark_modes(int m_hat, double sigma) {
  if (m_hat < 0) throw Error("benchmark_modes: mode count must be nonnegative");
  if (m_hat > 0 && !(sigma > 1.0)) throw Error("benchmark_modes: decay must satisfy sigma > 1");
  AffineField field;
  if (m_hat == 0) return field;
  const double scale = 0.9 / riemann_zeta(sigma);
  field.modes.reserve(static_cast<std::size_t>(m_hat));
  field.sup_norms.reserve(static_cast<std::size_t>(m_hat));
  for (int m = 1; m <= m_hat; ++m) {
    const FourierModeInfo info = fourier_mode_info(m);
    const double amp = scale * std::pow(static_cast<double>(m), -sigma);
    const double f1 = 2.0 * M_PI * info.beta1;
    const double f2 = 2.0 * M_PI * info.beta2;
    field.modes.push_back(
        [amp, f1, f2](const Vec2& x) { return amp * std::cos(f1 * x[0]) * std::cos(f2 * x[1]); });
    field.sup_norms.push_back(amp);  // the cosine product attains 1 on the closure
  }
  return field;
}

InterpolationStencil InterpolationStencil::identity(int node_count) {
  InterpolationStencil s;
  s.nodes.resize(static_cast<std::size_t>(node_count));
  s.weights.resize(static_cast<std::size_t>(node_count));
  for (int v = 0; v < node_count; ++v) {
    s.nodes[static_cast<std::size_t>(v)] = {v, 0, 0};
    s.weights[static_cast<std::size_t>(v)] = {1.0, 0.0, 0.0};
  }
  return s;
}

InterpolationStencil InterpolationStencil::refine(const RefinementMap& map) const {
  InterpolationStencil out;
  out.nodes.resize(map.vertex_parents.size());
  out.weights.resize(map.vertex_parents.size());
  for (std::size_t v = 0; v < map.vertex_parents.size(); ++v) {
    const auto& [a, b] = map.vertex_parents[v];
    if (a == static_cast<int>(v) && b == static_cast<int>(v)) {
      out.nodes[v] = nodes[v];
      out.weights[v] = weights[v];
      continue;
    }
    // midpoint: average the parents' sources; nested bisection keeps them inside
    // one carrier element, so at most three distinct sources survive
    std::array<int, 3> ids = {0, 0, 0};
    std::array<double, 3> wts = {0.0, 0.0, 0.0};
    int used = 0;
    const auto add = [&](int id, double w) {
      if (w == 0.0) return;
      for (int s = 0; s < used; ++s) {
        if (ids[static_cast<std::size_t>(s)] == id) {
          wts[static_cast<std::size_t>(s)] += w;
          return;
        }
      }
      if (used == 3) throw Error("InterpolationStencil: more than three sources (non-nested refinement)");
      ids[static_cast<std::size_t>(used)] = id;
      wts[static_cast<std::size_t>(used)] = w;
      ++used;
    };
    for (int s = 0; s < 3; ++s) add(out.nodes[static_cast<std::size_t>(a)][static_cast<std::size_t>(s)],
                                    0.5 * out.weights[static_cast<std::size_t>(a)][static_cast<std::size_t>(s)]);
    for (int s = 0; s < 3; ++s) add(out.nodes[static_cast<std::size_t>(b)][static_cast<std::size_t>(s)],
                                    0.5 * out.weights[static_cast<std::size_t>(b)][static_cast<std::size_t>(s)]);
    out.nodes[v] = ids;
    out.weights[v] = wts;
  }
  return out;
}

DiscreteCoefficient DiscreteCoefficient::factored(std::vector<int> dhat_dims,
                                                  std::vector<Eigen::MatrixXd> node_factors) {
  if (dhat_dims.size() != node_factors.size())
    throw Error("DiscreteCoefficient: factor count does not match mode count");
  DiscreteCoefficient c;
  c.dhat_dims_ = std::move(dhat_dims);
  c.node_factors_ = std::move(node_factors);
  c.storage_ = Storage::kFactored;
  c.node_count_ = c.node_factors_.empty() ? 0 : static_cast<int>(c.node_factors_[0].rows());
  for (std::size_t m = 0; m < c.node_factors_.size(); ++m) {
    if (c.node_factors_[m].cols() != c.dhat_dims_[m] || c.node_factors_[m].rows() != c.node_count_)
      throw Error("DiscreteCoefficient: factor shape mismatch");
  }
  return c;
}

DiscreteCoefficient DiscreteCoefficient::dense(std::vector<int> dhat_dims, Eigen::MatrixXd values) {
  DiscreteCoefficient c;
  c.dhat_dims_ = std::move(dhat_dims);
  const MultiIndexSet lambda(c.dhat_dims_);
  if (static_cast<std::size_t>(values.cols()) != lambda.size())
    throw Error("DiscreteCoefficient: dense tensor has wrong column count");
  c.values_ = std::move(values);
  c.storage_ = Storage::kDense;
  c.node_count_ = static_cast<int>(c.values_.rows());
  return c;
}

DiscreteCoefficient DiscreteCoefficient::interpolated(const DiscreteCoefficient& carrier,
                                                      InterpolationStencil stencil) {
  if (carrier.storage_ != Storage::kFactored)
    throw Error("DiscreteCoefficient::interpolated: carrier must be factored");
  DiscreteCoefficient c;
  c.dhat_dims_ = carrier.dhat_dims_;
  c.node_factors_ = carrier.node_factors_;
  c.storage_ = Storage::kInterpolated;
  c.node_count_ = stencil.node_count();
  c.stencil_ = std::move(stencil);
  for (const auto& src : c.stencil_.nodes)
    for (int s = 0; s < 3; ++s)
      if (src[static_cast<std::size_t>(s)] < 0 || src[static_cast<std::size_t>(s)] >= carrier.node_count_)
        throw Error("DiscreteCoefficient::interpolated: stencil source outside the carrier");
  return c;
}

int DiscreteCoefficient::term_count() const {
  switch (storage_) {
    case Storage::kFactored:
      return node_count_ == 0 ? 0 : 1;
    case Storage::kInterpolated:
      return 3;
    case Storage::kDense:
      return static_cast<int>(values_.cols());
  }
  return 0;
}

double DiscreteCoefficient::term_factor(int r, int m, int j, int k) const {
  switch (storage_) {
    case Storage::kFactored:
      return node_factors_[static_cast<std::size_t>(m)](j, k);
    case Storage::kInterpolated:
      return node_factors_[static_cast<std::size_t>(m)](
          stencil_.nodes[static_cast<std::size_t>(j)][static_cast<std::size_t>(r)], k);
    case Storage::kDense: {
      const MultiIndexSet lambda(dhat_dims_);
      const MultiIndex alpha = lambda.unflatten(static_cast<std::size_t>(r));
      return k == alpha[static_cast<std::size_t>(m)] ? 1.0 : 0.0;
    }
  }
  return 0.0;
}

double DiscreteCoefficient::term_weight(int r, int j) const {
  switch (storage_) {
    case Storage::kFactored:
      return 1.0;
    case Storage::kInterpolated:
      return stencil_.weights[static_cast<std::size_t>(j)][static_cast<std::size_t>(r)];
    case Storage::kDense:
      return values_(j, r);
  }
  return 0.0;
}

double DiscreteCoefficient::value(int j, const MultiIndex& alpha) const {
  if (storage_ == Storage::kDense) {
    const MultiIndexSet lambda(dhat_dims_);
    if (!lambda.contains(alpha)) return 0.0;
    return values_(j, static_cast<Eigen::Index>(lambda.flat_index(alpha)));
  }
  const auto carrier_value = [&](int node) {
    double v = 1.0;
    for (int m = 0; m < mode_count(); ++m) {
      const int k = static_cast<std::size_t>(m) < alpha.size() ? alpha[static_cast<std::size_t>(m)] : 0;
      if (k >= dhat_dims_[static_cast<std::size_t>(m)]) return 0.0;
      v *= node_factors_[static_cast<std::size_t>(m)](node, k);
    }
    return v;
  };
  if (storage_ == Storage::kFactored) return carrier_value(j);
  double v = 0.0;
  for (int r = 0; r < 3; ++r) {
    const double w = stencil_.weights[static_cast<std::size_t>(j)][static_cast<std::size_t>(r)];
    if (w != 0.0) v += w * carrier_value(stencil_.nodes[static_cast<std::size_t>(j)][static_cast<std::size_t>(r)]);
  }
  return v;
}

Eigen::VectorXd DiscreteCoefficient::mode_values(const MultiIndex& alpha) const {
  Eigen::VectorXd out(node_count_);
  for (int j = 0; j < node_count_; ++j) out(j) = value(j, alpha);
  return out;
}

double DiscreteCoefficient::sup_norm(const MultiIndex& alpha) const {
  double best = 0.0;
  for (int j = 0; j < node_count_; ++j) best = std::max(best, std::abs(value(j, alpha)));
  return best;
}

Eigen::MatrixXd DiscreteCoefficient::to_dense() const {
  if (storage_ == Storage::kDense) return values_;
  const MultiIndexSet lambda(dhat_dims_);
  if (lambda.size() * static_cast<std::size_t>(node_count_) > (1u << 24))
    throw Error("DiscreteCoefficient::to_dense: tensor too large to materialize");
  Eigen::MatrixXd out(node_count_, static_cast<Eigen::Index>(lambda.size()));
  for (std::size_t f = 0; f < lambda.size(); ++f) {
    const MultiIndex alpha = lambda.unflatten(f);
    out.col(static_cast<Eigen::Index>(f)) = mode_values(alpha);
  }
  return out;
}

std::vector<int> select_dhat(const AffineField& field, const ModeScaling& scaling, double tail_threshold, int cap) {
  if (!(tail_threshold > 0.0)) throw Error("select_dhat: threshold must be positive");
  std::vector<int> dhat;
  dhat.reserve(field.modes.size());
  for (int m = 0; m < field.mode_count(); ++m) {
    const double bs = field.sup_norms[static_cast<std::size_t>(m)] * scaling.sigma(m);
    const double lead = std::exp(0.5 * bs * bs);
    int k = 1;
    double tail = lead * bs;  // factor at degree 1
    while (k < cap && tail >= tail_threshold) {
      ++k;
      tail *= bs / std::sqrt(static_cast<double>(k));
    }
    dhat.push_back(std::max(1, k));
  }
  return dhat;
}

DiscreteCoefficient expand_lognormal(const AffineField& field, const ModeScaling& scaling,
                                     const std::vector<int>& dhat_dims, const Mesh2D& mesh) {
  if (static_cast<int>(dhat_dims.size()) != field.mode_count())
    throw Error("expand_lognormal: dhat dims must cover every field mode");
  if (field.mode_count() == 0) {
    // gamma == 0: the coefficient is identically one
    return DiscreteCoefficient::dense({}, Eigen::MatrixXd::Ones(mesh.vertex_count(), 1));
  }
  const int nodes = mesh.vertex_count();
  std::vector<Eigen::MatrixXd> factors;
  factors.reserve(dhat_dims.size());
  for (int m = 0; m < field.mode_count(); ++m) {
    const int dh = dhat_dims[static_cast<std::size_t>(m)];
    if (dh < 1) throw Error("expand_lognormal: dhat entries must be >= 1");
    if (dh > kMaxHermiteDegree) throw Error("expand_lognormal: dhat exceeds the degree cap");
    const double s = scaling.sigma(m);
    Eigen::MatrixXd a(nodes, dh);
    for (int j = 0; j < nodes; ++j) {
      const double b = field.modes[static_cast<std::size_t>(m)](mesh.vertex(j));
      const double bs = b * s;
      // integral of exp(b y) P_k(y) under N(0, s^2): exp(b^2 s^2 / 2) (b s)^k / sqrt(k!)
      double f = std::exp(0.5 * bs * bs);
      for (int k = 0; k < dh; ++k) {
        a(j, k) = f;
        f *= bs / std::sqrt(static_cast<double>(k + 1));
      }
    }
    factors.push_back(std::move(a));
  }
  return DiscreteCoefficient::factored(dhat_dims, std::move(factors));
}

double coefficient_residual(const DiscreteCoefficient& coeff, const AffineField& field, const ModeScaling& scaling,
                            const Mesh2D& mesh, int sample_count, std::uint64_t seed) {
  if (sample_count < 1) throw Error("coefficient_residual: need at least one sample");
  if (coeff.node_count() != mesh.vertex_count())
    throw Error("coefficient_residual: coefficient nodes do not match the mesh");
  const int modes = field.mode_count();
  const int nodes = mesh.vertex_count();
  const std::vector<int>& dhat = coeff.dhat_dims();

  double err_sq = 0.0, ref_sq = 0.0;
  std::vector<double> y(static_cast<std::size_t>(modes));
  for (int i = 0; i < sample_count; ++i) {
    GaussianSampler rng = GaussianSampler::substream(seed, static_cast<std::uint64_t>(i));
    for (int m = 0; m < modes; ++m) y[static_cast<std::size_t>(m)] = rng.normal();
    // per-mode chaos polynomial values at this sample
    std::vector<std::vector<double>> pvals(static_cast<std::size_t>(modes));
    for (int m = 0; m < modes; ++m) {
      const double var = scaling.sigma(m) * scaling.sigma(m);
      const int dh = dhat[static_cast<std::size_t>(m)];
      pvals[static_cast<std::size_t>(m)].resize(static_cast<std::size_t>(dh));
      for (int k = 0; k < dh; ++k)
        pvals[static_cast<std::size_t>(m)][static_cast<std::size_t>(k)] =
            hermite_eval(var, k, y[static_cast<std::size_t>(m)]);
    }
    double sup_err = 0.0, sup_ref = 0.0;
    for (int j = 0; j < nodes; ++j) {
      const double exact = std::exp(field.evaluate(mesh.vertex(j), y));
      double approx = 0.0;
      for (int r = 0; r < coeff.term_count(); ++r) {
        double term = coeff.term_weight(r, j);
        for (int m = 0; m < modes && term != 0.0; ++m) {
          double part = 0.0;
          for (int k = 0; k < dhat[static_cast<std::size_t>(m)]; ++k)
            part += coeff.term_factor(r, m, j, k) * pvals[static_cast<std::size_t>(m)][static_cast<std::size_t>(k)];
          term *= part;
        }
        approx += term;
      }
      sup_err = std::max(sup_err, std::abs(exact - approx));
      sup_ref = std::max(sup_ref, std::abs(exact));
    }
    err_sq += sup_err * sup_err;
    ref_sq += sup_ref * sup_ref;
  }
  if (ref_sq == 0.0) return 0.0;
  return std::sqrt(err_sq / ref_sq);
}

double truncation_residual(const AffineField& field, const ModeScaling& scaling, const std::vector<int>& dhat_dims,
                           const Mesh2D& mesh, int sample_count, std::uint64_t seed) {
  if (field.mode_count() == 0) return 0.0;
  const DiscreteCoefficient coeff = expand_lognormal(field, scaling, dhat_dims, mesh);
  return coefficient_residual(coeff, field, scaling, mesh, sample_count, seed);
}

}  // namespace sgfem
