#include "sgfem/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sgfem/errors.hpp"
#include "sgfem/quadrature.hpp"

namespace sgfem {

namespace {

std::vector<int> pad_dims(const std::vector<int>& dims, int modes) {
  std::vector<int> out(static_cast<std::size_t>(modes), 1);
  for (std::size_t m = 0; m < dims.size(); ++m) out[m] = dims[m];
  return out;
}

/// out[mu] = sum_beta v[beta] prod_m W_m(beta_m, mu_m) on row-major flat layouts.
Eigen::VectorXd kron_vec_apply(Eigen::VectorXd v, const std::vector<Eigen::MatrixXd>& mats) {
  long stride = 1;
  for (int m = static_cast<int>(mats.size()) - 1; m >= 0; --m) {
    const Eigen::MatrixXd& w = mats[static_cast<std::size_t>(m)];
    const int d = static_cast<int>(w.rows());
    if (d == 1) {
      v *= w(0, 0);
    } else {
      Eigen::VectorXd next = Eigen::VectorXd::Zero(v.size());
      const long blocks = v.size() / (stride * d);
      for (long o = 0; o < blocks; ++o) {
        for (int mu = 0; mu < d; ++mu) {
          for (int b = 0; b < d; ++b) {
            const double c = w(b, mu);
            if (c == 0.0) continue;
            next.segment(o * d * stride + mu * stride, stride) += c * v.segment(o * d * stride + b * stride, stride);
          }
        }
      }
      v.swap(next);
    }
    stride *= d;
  }
  return v;
}

double kron_quadratic(const Eigen::VectorXd& left, const std::vector<Eigen::MatrixXd>& mats,
                      const Eigen::VectorXd& right) {
  return left.dot(kron_vec_apply(right, mats));
}

}  // namespace

EstimatorContext::EstimatorContext(const FESpace& space, const DiscreteCoefficient& coeff,
                                   const MultiIndexSet& lambda, const ModeScaling& scaling)
    : space_(&space), coeff_(&coeff), scaling_(&scaling) {
  modes_ = std::max(lambda.mode_count(), coeff.mode_count());
  if (modes_ > scaling.mode_count() && modes_ > 0)
    throw Error("EstimatorContext: scaling does not cover every mode");
  dims_ = pad_dims(lambda.dims(), modes_);
  dhat_ = pad_dims(coeff.dhat_dims(), modes_);
  lambda_ = MultiIndexSet(dims_);
  cover_.resize(static_cast<std::size_t>(modes_));
  for (int m = 0; m < modes_; ++m) {
    cover_[static_cast<std::size_t>(m)] = dims_[static_cast<std::size_t>(m)] + dhat_[static_cast<std::size_t>(m)] - 1;
    if (cover_[static_cast<std::size_t>(m)] > kMaxHermiteDegree + 1)
      throw Error("EstimatorContext: covering degree exceeds the Hermite cap");
  }
  transform_ = DoublyOrthogonalTransform(scaling, cover_);

  g2_.reserve(static_cast<std::size_t>(modes_));
  tau_.reserve(static_cast<std::size_t>(modes_));
  for (int m = 0; m < modes_; ++m) {
    const ModeTransform& block = transform_.block(m);
    g2_.push_back(block.z * block.c.array().square().matrix().asDiagonal() * block.z.transpose());
    tau_.emplace_back(dims_[static_cast<std::size_t>(m)], dhat_[static_cast<std::size_t>(m)],
                      cover_[static_cast<std::size_t>(m)]);
  }

  terms_ = std::max(1, coeff.term_count());
  const int nodes = space.node_count();
  if (coeff.node_count() > 0 && coeff.node_count() != nodes)
    throw Error("EstimatorContext: coefficient nodes do not match the mesh");

  tvec_.assign(static_cast<std::size_t>(terms_), {});
  for (int r = 0; r < terms_; ++r) {
    auto& per_mode = tvec_[static_cast<std::size_t>(r)];
    per_mode.reserve(static_cast<std::size_t>(modes_));
    for (int m = 0; m < modes_; ++m) {
      const int d = dims_[static_cast<std::size_t>(m)];
      const int dh = dhat_[static_cast<std::size_t>(m)];
      const int cov = cover_[static_cast<std::size_t>(m)];
      Eigen::MatrixXd t = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nodes) * d, cov);
      for (int j = 0; j < nodes; ++j) {
        for (int b = 0; b < d; ++b) {
          for (int i = 0; i < cov; ++i) {
            double acc = 0.0;
            for (int k = 0; k < dh; ++k) {
              const double tv = tau_[static_cast<std::size_t>(m)](b, k, i);
              if (tv != 0.0)
                acc += (m < coeff.mode_count() ? coeff.term_factor(r, m, j, k) : (k == 0 ? 1.0 : 0.0)) * tv;
            }
            t(static_cast<Eigen::Index>(j) * d + b, i) = acc;
          }
        }
      }
      per_mode.push_back(std::move(t));
    }
  }
}

bool EstimatorContext::boundary_empty() const {
  for (int m = 0; m < modes_; ++m)
    if (cover_[static_cast<std::size_t>(m)] > dims_[static_cast<std::size_t>(m)]) return false;
  return true;
}

double EstimatorContext::term_weight(int r, int node) const {
  if (coeff_->node_count() == 0) return 1.0;
  return coeff_->term_weight(r, node);
}

Eigen::Block<const Eigen::MatrixXd> EstimatorContext::t_block(int r, int m, int node) const {
  const int d = dims_[static_cast<std::size_t>(m)];
  const Eigen::MatrixXd& t = tvec_[static_cast<std::size_t>(r)][static_cast<std::size_t>(m)];
  return t.middleRows(static_cast<Eigen::Index>(node) * d, d);
}

double EstimatorContext::basis_weight_sq(const MultiIndex& mu) const {
  double v = 1.0;
  for (int m = 0; m < modes_; ++m) {
    const int i = static_cast<std::size_t>(m) < mu.size() ? mu[static_cast<std::size_t>(m)] : 0;
    v *= g2_[static_cast<std::size_t>(m)](i, i);
  }
  return v;
}

void EstimatorContext::element_gradients(const CoeffTensor& w, int t, Eigen::VectorXd& gx,
                                         Eigen::VectorXd& gy) const {
  if (w.values.rows() != space_->node_count() ||
      static_cast<std::size_t>(w.values.cols()) != lambda_.size())
    throw Error("estimator: coefficient tensor shape does not match the context");
  const auto& v = space_->mesh().triangle(t).v;
  const Eigen::Index cols = w.values.cols();
  gx = Eigen::VectorXd::Zero(cols);
  gy = Eigen::VectorXd::Zero(cols);
  for (int l = 0; l < 3; ++l) {
    const Vec2& g = space_->hat_gradient(t, l);
    gx += g[0] * w.values.row(v[l]).transpose();
    gy += g[1] * w.values.row(v[l]).transpose();
  }
}

double EstimatorContext::node_coeff(int node, const MultiIndex& mu, const MultiIndex& beta) const {
  double acc = 0.0;
  for (int r = 0; r < terms_; ++r) {
    double prod = term_weight(r, node);
    for (int m = 0; m < modes_ && prod != 0.0; ++m) {
      const int i = static_cast<std::size_t>(m) < mu.size() ? mu[static_cast<std::size_t>(m)] : 0;
      const int b = static_cast<std::size_t>(m) < beta.size() ? beta[static_cast<std::size_t>(m)] : 0;
      prod *= t_block(r, m, node)(b, i);
    }
    acc += prod;
  }
  return acc;
}

namespace {

struct Ranges {
  std::vector<int> row_lo, row_len, col_lo, col_len;
  double weight = 1.0;
};

/// Accumulates the weighted sum of index-range quadratic forms
/// sum_T sum_{k,k'} w_kk' |T| (gx' Psi gx + gy' Psi gy) in one element sweep.
double ranges_quadratic(const CoeffTensor& w, const EstimatorContext& ctx, const std::vector<Ranges>& range_list) {
  const Mesh2D& mesh = ctx.space().mesh();
  const int modes = ctx.mode_count();
  const int terms = ctx.term_count();
  Eigen::VectorXd gx, gy;
  std::vector<Eigen::MatrixXd> mats(static_cast<std::size_t>(modes));
  double total = 0.0;
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    ctx.element_gradients(w, t, gx, gy);
    const auto& v = mesh.triangle(t).v;
    double local = 0.0;
    for (int k = 0; k < 3; ++k) {
      for (int k2 = 0; k2 < 3; ++k2) {
        const double wq = (k == k2 ? 1.0 / 6.0 : 1.0 / 12.0) * mesh.area(t);
        for (int r = 0; r < terms; ++r) {
          for (int r2 = 0; r2 < terms; ++r2) {
            const double weight = ctx.term_weight(r, v[k]) * ctx.term_weight(r2, v[k2]);
            if (weight == 0.0) continue;
            for (const Ranges& ranges : range_list) {
              for (int m = 0; m < modes; ++m) {
                const auto ta = ctx.t_block(r, m, v[k]);
                const auto tb = ctx.t_block(r2, m, v[k2]);
                const std::size_t mm = static_cast<std::size_t>(m);
                mats[mm].noalias() =
                    ta.middleCols(ranges.row_lo[mm], ranges.row_len[mm]) *
                    ctx.g2(m).block(ranges.row_lo[mm], ranges.col_lo[mm], ranges.row_len[mm], ranges.col_len[mm]) *
                    tb.middleCols(ranges.col_lo[mm], ranges.col_len[mm]).transpose();
              }
              local += ranges.weight * wq * weight * (kron_quadratic(gx, mats, gx) + kron_quadratic(gy, mats, gy));
            }
          }
        }
      }
    }
    total += local;
  }
  return total;
}

/// Half-open per-mode ranges of the boundary shell with first excess in mode s:
/// [0,d) below s, [d_s, cover_s) at s, [0, cover) above s.
Ranges shell_ranges(const EstimatorContext& ctx, int s_row, int s_col) {
  const int modes = ctx.mode_count();
  Ranges r;
  r.row_lo.assign(static_cast<std::size_t>(modes), 0);
  r.col_lo.assign(static_cast<std::size_t>(modes), 0);
  r.row_len.resize(static_cast<std::size_t>(modes));
  r.col_len.resize(static_cast<std::size_t>(modes));
  for (int m = 0; m < modes; ++m) {
    const int d = ctx.dims()[static_cast<std::size_t>(m)];
    const int cov = ctx.cover()[static_cast<std::size_t>(m)];
    if (m < s_row) {
      r.row_len[static_cast<std::size_t>(m)] = d;
    } else if (m == s_row) {
      r.row_lo[static_cast<std::size_t>(m)] = d;
      r.row_len[static_cast<std::size_t>(m)] = cov - d;
    } else {
      r.row_len[static_cast<std::size_t>(m)] = cov;
    }
    if (m < s_col) {
      r.col_len[static_cast<std::size_t>(m)] = d;
    } else if (m == s_col) {
      r.col_lo[static_cast<std::size_t>(m)] = d;
      r.col_len[static_cast<std::size_t>(m)] = cov - d;
    } else {
      r.col_len[static_cast<std::size_t>(m)] = cov;
    }
  }
  return r;
}

}  // namespace

double eta_sto_boundary(const CoeffTensor& w, const EstimatorContext& ctx) {
  if (ctx.boundary_empty()) return 0.0;
  // inclusion-exclusion over the product sets: boundary = cover \ Lambda_d. The
  // cancellation against the interior content stays far below the estimator scale.
  std::vector<Ranges> combos;
  for (int rows_cover = 0; rows_cover < 2; ++rows_cover) {
    for (int cols_cover = 0; cols_cover < 2; ++cols_cover) {
      Ranges r = shell_ranges(ctx, -1, -1);
      for (int m = 0; m < ctx.mode_count(); ++m) {
        r.row_len[static_cast<std::size_t>(m)] = rows_cover ? ctx.cover()[static_cast<std::size_t>(m)]
                                                            : ctx.dims()[static_cast<std::size_t>(m)];
        r.col_len[static_cast<std::size_t>(m)] = cols_cover ? ctx.cover()[static_cast<std::size_t>(m)]
                                                            : ctx.dims()[static_cast<std::size_t>(m)];
      }
      r.weight = (rows_cover + cols_cover) % 2 == 0 ? 1.0 : -1.0;
      combos.push_back(std::move(r));
    }
  }
  const double sq = ranges_quadratic(w, ctx, combos);
  return std::sqrt(std::max(0.0, sq));
}

double eta_sto_slab(const CoeffTensor& w, const EstimatorContext& ctx, int mode, int q) {
  if (mode < 1 || mode > ctx.mode_count()) throw Error("eta_sto_slab: mode out of range");
  const std::size_t mm = static_cast<std::size_t>(mode - 1);
  const int dh = ctx.dhat()[mm];
  if (q < 1 || q > dh - 1)
    throw InvalidLookahead("eta_sto_slab: q=" + std::to_string(q) + " outside [1, " + std::to_string(dh - 1) + "]");
  const int modes = ctx.mode_count();
  Ranges r;
  r.row_lo.assign(static_cast<std::size_t>(modes), 0);
  r.col_lo.assign(static_cast<std::size_t>(modes), 0);
  r.row_len.resize(static_cast<std::size_t>(modes));
  r.col_len.resize(static_cast<std::size_t>(modes));
  for (int m = 0; m < modes; ++m) {
    const int len = ctx.dims()[static_cast<std::size_t>(m)];
    r.row_len[static_cast<std::size_t>(m)] = len;
    r.col_len[static_cast<std::size_t>(m)] = len;
  }
  r.row_lo[mm] = ctx.dims()[mm];
  r.col_lo[mm] = ctx.dims()[mm];
  r.row_len[mm] = q;
  r.col_len[mm] = q;
  const double sq = ranges_quadratic(w, ctx, {r});
  return std::sqrt(std::max(0.0, sq));
}

namespace {

Eigen::MatrixXd subset_gram(const EstimatorContext& ctx, const std::vector<MultiIndex>& subset) {
  const int n = static_cast<int>(subset.size());
  Eigen::MatrixXd g(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double v = 1.0;
      for (int m = 0; m < ctx.mode_count(); ++m) {
        const int a = static_cast<std::size_t>(m) < subset[static_cast<std::size_t>(i)].size()
                          ? subset[static_cast<std::size_t>(i)][static_cast<std::size_t>(m)]
                          : 0;
        const int b = static_cast<std::size_t>(m) < subset[static_cast<std::size_t>(j)].size()
                          ? subset[static_cast<std::size_t>(j)][static_cast<std::size_t>(m)]
                          : 0;
        v *= ctx.g2(m)(a, b);
      }
      g(i, j) = v;
    }
  }
  return g;
}

/// Per-node contraction vectors p[mu] = sum_beta c^node_{mu beta} coef[beta].
Eigen::VectorXd subset_contract(const EstimatorContext& ctx, int node, const std::vector<MultiIndex>& subset,
                                const Eigen::VectorXd& coef) {
  const MultiIndexSet& lambda = ctx.lambda();
  Eigen::VectorXd p = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(subset.size()));
  for (std::size_t i = 0; i < subset.size(); ++i) {
    double acc = 0.0;
    for (std::size_t f = 0; f < lambda.size(); ++f) {
      const MultiIndex beta = lambda.unflatten(f);
      acc += ctx.node_coeff(node, subset[i], beta) * coef(static_cast<Eigen::Index>(f));
    }
    p(static_cast<Eigen::Index>(i)) = acc;
  }
  return p;
}

}  // namespace

double eta_sto(const CoeffTensor& w, const EstimatorContext& ctx, const std::vector<MultiIndex>& delta) {
  if (delta.empty()) return 0.0;
  const MultiIndexSet cover_set(ctx.cover());
  for (const auto& mu : delta) {
    if (!cover_set.contains(mu) || ctx.lambda().contains(mu))
      throw IndexNotInBoundary("eta_sto: index " + to_string(mu) + " not in the boundary set");
  }
  const Eigen::MatrixXd g = subset_gram(ctx, delta);
  const Mesh2D& mesh = ctx.space().mesh();
  Eigen::VectorXd gx, gy;
  double sq = 0.0;
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    ctx.element_gradients(w, t, gx, gy);
    const auto& v = mesh.triangle(t).v;
    std::array<Eigen::VectorXd, 3> px, py;
    for (int k = 0; k < 3; ++k) {
      px[static_cast<std::size_t>(k)] = subset_contract(ctx, v[k], delta, gx);
      py[static_cast<std::size_t>(k)] = subset_contract(ctx, v[k], delta, gy);
    }
    for (int k = 0; k < 3; ++k) {
      for (int k2 = 0; k2 < 3; ++k2) {
        const double wq = (k == k2 ? 1.0 / 6.0 : 1.0 / 12.0) * mesh.area(t);
        sq += wq * (px[static_cast<std::size_t>(k)].dot(g * px[static_cast<std::size_t>(k2)]) +
                    py[static_cast<std::size_t>(k)].dot(g * py[static_cast<std::size_t>(k2)]));
      }
    }
  }
  return std::sqrt(std::max(0.0, sq));
}

namespace {

double integrate_f(const Mesh2D& mesh, int t, const SpatialFn& f, bool squared) {
  const auto& rule = triangle_rule(2);
  const auto& v = mesh.triangle(t).v;
  const Vec2& p0 = mesh.vertex(v[0]);
  const Vec2& p1 = mesh.vertex(v[1]);
  const Vec2& p2 = mesh.vertex(v[2]);
  double acc = 0.0;
  for (const auto& q : rule) {
    const Vec2 x = {q.bary[0] * p0[0] + q.bary[1] * p1[0] + q.bary[2] * p2[0],
                    q.bary[0] * p0[1] + q.bary[1] * p1[1] + q.bary[2] * p2[1]};
    const double fv = f(x);
    acc += q.weight * (squared ? fv * fv : fv);
  }
  return acc * mesh.area(t);
}

}  // namespace

EtaDetReport eta_det(const CoeffTensor& w, const EstimatorContext& ctx, const SpatialFn& f) {
  const Mesh2D& mesh = ctx.space().mesh();
  const int nt = mesh.triangle_count();
  const int modes = ctx.mode_count();
  const int terms = ctx.term_count();

  std::vector<Eigen::MatrixXd> gd(static_cast<std::size_t>(modes));
  for (int m = 0; m < modes; ++m) {
    const int d = ctx.dims()[static_cast<std::size_t>(m)];
    gd[static_cast<std::size_t>(m)] = ctx.g2(m).topLeftCorner(d, d);
  }
  double g00 = 1.0;
  for (int m = 0; m < modes; ++m) g00 *= gd[static_cast<std::size_t>(m)](0, 0);

  Eigen::VectorXd vol_sq = Eigen::VectorXd::Zero(nt);
  Eigen::VectorXd jump_sq = Eigen::VectorXd::Zero(nt);
  Eigen::VectorXd gx, gy;
  std::vector<Eigen::MatrixXd> tmats(static_cast<std::size_t>(modes));

  // volume residual: f delta_{mu 0} - div r_mu, elementwise constant divergence for P1
  for (int t = 0; t < nt; ++t) {
    ctx.element_gradients(w, t, gx, gy);
    const auto& v = mesh.triangle(t).v;
    Eigen::VectorXd div = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ctx.lambda().size()));
    for (int k = 0; k < 3; ++k) {
      const Vec2& hg = ctx.space().hat_gradient(t, k);
      const Eigen::VectorXd ek = hg[0] * gx + hg[1] * gy;
      for (int r = 0; r < terms; ++r) {
        const double weight = ctx.term_weight(r, v[k]);
        if (weight == 0.0) continue;
        for (int m = 0; m < modes; ++m) {
          const int d = ctx.dims()[static_cast<std::size_t>(m)];
          tmats[static_cast<std::size_t>(m)] = ctx.t_block(r, m, v[k]).leftCols(d);
        }
        div += weight * kron_vec_apply(ek, tmats);
      }
    }
    const Eigen::VectorXd gdd = kron_vec_apply(div, gd);
    const double int_f = integrate_f(mesh, t, f, false);
    const double int_f2 = integrate_f(mesh, t, f, true);
    const double h = mesh.h_t(t);
    const double val = mesh.area(t) * div.dot(gdd) - 2.0 * int_f * gdd(0) + g00 * int_f2;
    vol_sq(t) = h * h * std::max(0.0, val);
  }

  // jump residual over interior edges; each edge feeds both neighbours
  for (int e = 0; e < mesh.edge_count(); ++e) {
    if (mesh.edge(e).boundary) continue;
    const EdgeFrame frame = mesh.edge_jump_frame(e);
    Eigen::VectorXd gxp, gyp, gxm, gym;
    ctx.element_gradients(w, frame.tri_plus, gxp, gyp);
    ctx.element_gradients(w, frame.tri_minus, gxm, gym);
    const Eigen::VectorXd u = frame.normal[0] * (gxp - gxm) + frame.normal[1] * (gyp - gym);

    const int na = mesh.edge(e).a;
    const int nb = mesh.edge(e).b;
    Eigen::VectorXd ja = Eigen::VectorXd::Zero(u.size());
    Eigen::VectorXd jb = Eigen::VectorXd::Zero(u.size());
    for (int r = 0; r < terms; ++r) {
      for (int m = 0; m < modes; ++m) {
        const int d = ctx.dims()[static_cast<std::size_t>(m)];
        tmats[static_cast<std::size_t>(m)] = ctx.t_block(r, m, na).leftCols(d);
      }
      const double wa = ctx.term_weight(r, na);
      if (wa != 0.0) ja += wa * kron_vec_apply(u, tmats);
      for (int m = 0; m < modes; ++m) {
        const int d = ctx.dims()[static_cast<std::size_t>(m)];
        tmats[static_cast<std::size_t>(m)] = ctx.t_block(r, m, nb).leftCols(d);
      }
      const double wb = ctx.term_weight(r, nb);
      if (wb != 0.0) jb += wb * kron_vec_apply(u, tmats);
    }
    const double qaa = kron_quadratic(ja, gd, ja);
    const double qab = kron_quadratic(ja, gd, jb);
    const double qbb = kron_quadratic(jb, gd, jb);
    const double edge_int = frame.length / 6.0 * (2.0 * qaa + 2.0 * qab + 2.0 * qbb);
    jump_sq(frame.tri_plus) += mesh.h_t(frame.tri_plus) * edge_int;
    jump_sq(frame.tri_minus) += mesh.h_t(frame.tri_minus) * edge_int;
  }

  EtaDetReport report;
  report.per_element = (vol_sq + jump_sq).cwiseMax(0.0).cwiseSqrt();
  report.volume_sq = vol_sq.sum();
  report.jump_sq = jump_sq.sum();
  report.total = std::sqrt(std::max(0.0, report.volume_sq + report.jump_sq));
  return report;
}

double eta_det_restricted(const CoeffTensor& w, const EstimatorContext& ctx, const SpatialFn& f,
                          const std::vector<MultiIndex>& subset) {
  if (subset.empty()) return 0.0;
  const MultiIndexSet cover_set(ctx.cover());
  int zero_pos = -1;
  for (std::size_t i = 0; i < subset.size(); ++i) {
    if (!cover_set.contains(subset[i]))
      throw IndexOutOfRange("eta_det_restricted: index outside the covering set");
    bool is_zero = true;
    for (int x : subset[i])
      if (x != 0) is_zero = false;
    if (is_zero) zero_pos = static_cast<int>(i);
  }
  const Eigen::MatrixXd g = subset_gram(ctx, subset);
  const Mesh2D& mesh = ctx.space().mesh();
  Eigen::VectorXd gx, gy;
  double total = 0.0;

  for (int t = 0; t < mesh.triangle_count(); ++t) {
    ctx.element_gradients(w, t, gx, gy);
    const auto& v = mesh.triangle(t).v;
    Eigen::VectorXd div = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(subset.size()));
    for (int k = 0; k < 3; ++k) {
      const Vec2& hg = ctx.space().hat_gradient(t, k);
      const Eigen::VectorXd ek = hg[0] * gx + hg[1] * gy;
      div += subset_contract(ctx, v[k], subset, ek);
    }
    const Eigen::VectorXd gdd = g * div;
    double val = mesh.area(t) * div.dot(gdd);
    if (zero_pos >= 0) {
      val += -2.0 * integrate_f(mesh, t, f, false) * gdd(zero_pos) +
             g(zero_pos, zero_pos) * integrate_f(mesh, t, f, true);
    }
    const double h = mesh.h_t(t);
    total += h * h * std::max(0.0, val);
  }

  for (int e = 0; e < mesh.edge_count(); ++e) {
    if (mesh.edge(e).boundary) continue;
    const EdgeFrame frame = mesh.edge_jump_frame(e);
    Eigen::VectorXd gxp, gyp, gxm, gym;
    ctx.element_gradients(w, frame.tri_plus, gxp, gyp);
    ctx.element_gradients(w, frame.tri_minus, gxm, gym);
    const Eigen::VectorXd u = frame.normal[0] * (gxp - gxm) + frame.normal[1] * (gyp - gym);
    const Eigen::VectorXd ja = subset_contract(ctx, mesh.edge(e).a, subset, u);
    const Eigen::VectorXd jb = subset_contract(ctx, mesh.edge(e).b, subset, u);
    const double edge_int =
        frame.length / 6.0 * (2.0 * ja.dot(g * ja) + 2.0 * ja.dot(g * jb) + 2.0 * jb.dot(g * jb));
    total += mesh.h_t(frame.tri_plus) * edge_int;
    total += mesh.h_t(frame.tri_minus) * edge_int;
  }
  return std::sqrt(std::max(0.0, total));
}

EstimatorReport eta_total(const CoeffTensor& w, const EstimatorContext& ctx, const SpatialFn& f, double c_eq,
                          const std::vector<int>& lookahead) {
  if (!(c_eq > 0.0)) throw Error("eta_total: c_eq must be positive");
  EstimatorReport report;
  report.c_eq = c_eq;
  const EtaDetReport det = eta_det(w, ctx, f);
  report.eta_det = det.total;
  report.eta_det_vol_sq = det.volume_sq;
  report.eta_det_jump_sq = det.jump_sq;
  report.eta_det_per_element = det.per_element;
  report.eta_sto = eta_sto_boundary(w, ctx);
  report.eta = std::sqrt(report.eta_det * report.eta_det + c_eq * c_eq * report.eta_sto * report.eta_sto);

  const int modes = ctx.mode_count();
  report.slab_values.assign(static_cast<std::size_t>(modes), 0.0);
  report.slab_valid.assign(static_cast<std::size_t>(modes), 0);
  for (int m = 1; m <= modes; ++m) {
    const int dh = ctx.dhat()[static_cast<std::size_t>(m - 1)];
    const int q = static_cast<std::size_t>(m - 1) < lookahead.size() ? lookahead[static_cast<std::size_t>(m - 1)] : 1;
    if (dh < 2 || q < 1 || q > dh - 1) continue;  // no admissible look-ahead for this mode
    report.slab_values[static_cast<std::size_t>(m - 1)] = eta_sto_slab(w, ctx, m, q);
    report.slab_valid[static_cast<std::size_t>(m - 1)] = 1;
  }
  return report;
}

LipschitzDiagnostic lipschitz_diagnostic(const EstimatorContext& ctx, std::size_t boundary_cap) {
  LipschitzDiagnostic out;
  const int modes = ctx.mode_count();
  const MultiIndexSet& lambda = ctx.lambda();
  const DiscreteCoefficient& coeff = ctx.coeff();

  // basis weights ||P_mu zeta||
  const MultiIndexSet cover_set(ctx.cover());

  // active-set constant: alpha restricted by the triple-product support to Lambda_{2d-1}
  {
    std::vector<int> adeg(static_cast<std::size_t>(modes), 1);
    for (int m = 0; m < modes; ++m)
      adeg[static_cast<std::size_t>(m)] =
          std::min(2 * ctx.dims()[static_cast<std::size_t>(m)] - 1, ctx.dhat()[static_cast<std::size_t>(m)]);
    const MultiIndexSet alpha_set(adeg);
    std::vector<double> sup(alpha_set.size());
    const MultiIndex zero(static_cast<std::size_t>(modes), 0);
    for (std::size_t a = 0; a < alpha_set.size(); ++a)
      sup[a] = coeff.mode_count() > 0 ? coeff.sup_norm(alpha_set.unflatten(a)) : (a == 0 ? 1.0 : 0.0);

    double c_sq = 0.0;
    for (std::size_t bf = 0; bf < lambda.size(); ++bf) {
      const MultiIndex beta = lambda.unflatten(bf);
      double inner = 0.0;
      for (std::size_t mf = 0; mf < lambda.size(); ++mf) {
        const MultiIndex mu = lambda.unflatten(mf);
        const double pw = std::sqrt(ctx.basis_weight_sq(mu));
        for (std::size_t af = 0; af < alpha_set.size(); ++af) {
          const MultiIndex alpha = alpha_set.unflatten(af);
          double tau = 1.0;
          for (int m = 0; m < modes && tau != 0.0; ++m)
            tau *= ctx.tau(m)(beta[static_cast<std::size_t>(m)], alpha[static_cast<std::size_t>(m)],
                              mu[static_cast<std::size_t>(m)]);
          if (tau != 0.0) inner += sup[af] * std::abs(tau) * pw;
        }
      }
      c_sq += inner * inner;
    }
    out.c_lambda = std::sqrt(c_sq);
  }

  // boundary constant: explicit enumeration guarded by size
  const MultiIndexSet dhat_set(ctx.dhat());
  if (boundary_cap == 0 || dhat_set.size() > boundary_cap || cover_set.size() > boundary_cap) {
    out.c_boundary = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  std::vector<double> sup(dhat_set.size());
  for (std::size_t a = 0; a < dhat_set.size(); ++a)
    sup[a] = coeff.mode_count() > 0 ? coeff.sup_norm(dhat_set.unflatten(a)) : (a == 0 ? 1.0 : 0.0);

  double c_sq = 0.0;
  std::vector<int> lo(static_cast<std::size_t>(modes)), hi(static_cast<std::size_t>(modes));
  for (std::size_t bf = 0; bf < lambda.size(); ++bf) {
    const MultiIndex beta = lambda.unflatten(bf);
    double inner = 0.0;
    for (std::size_t af = 0; af < dhat_set.size(); ++af) {
      const MultiIndex alpha = dhat_set.unflatten(af);
      if (sup[af] == 0.0) continue;
      // mu ranges with nonzero triple products: |beta - alpha| .. beta + alpha
      bool any = true;
      for (int m = 0; m < modes; ++m) {
        lo[static_cast<std::size_t>(m)] = std::abs(beta[static_cast<std::size_t>(m)] - alpha[static_cast<std::size_t>(m)]);
        hi[static_cast<std::size_t>(m)] = std::min(beta[static_cast<std::size_t>(m)] + alpha[static_cast<std::size_t>(m)],
                                                   ctx.cover()[static_cast<std::size_t>(m)] - 1);
        if (lo[static_cast<std::size_t>(m)] > hi[static_cast<std::size_t>(m)]) any = false;
      }
      if (!any) continue;
      MultiIndex mu(lo.begin(), lo.end());
      while (true) {
        if (!lambda.contains(mu)) {
          double tau = 1.0;
          for (int m = 0; m < modes && tau != 0.0; ++m)
            tau *= ctx.tau(m)(beta[static_cast<std::size_t>(m)], alpha[static_cast<std::size_t>(m)],
                              mu[static_cast<std::size_t>(m)]);
          if (tau != 0.0) inner += sup[af] * std::abs(tau) * std::sqrt(ctx.basis_weight_sq(mu));
        }
        int m = modes - 1;
        for (; m >= 0; --m) {
          if (++mu[static_cast<std::size_t>(m)] <= hi[static_cast<std::size_t>(m)]) break;
          mu[static_cast<std::size_t>(m)] = lo[static_cast<std::size_t>(m)];
        }
        if (m < 0) break;
      }
    }
    c_sq += inner * inner;
  }
  out.c_boundary = std::sqrt(c_sq);
  return out;
}

double pair_product_norm(const CoeffTensor& w, const EstimatorContext& ctx, const std::vector<MultiIndex>& d1,
                         const std::vector<MultiIndex>& d2) {
  if (d1.empty() || d2.empty()) return 0.0;
  const int modes = ctx.mode_count();

  // per-mode fourth-moment tables under pi_0
  std::vector<Eigen::MatrixXd> q4;  // flattened [i * cov + j, k * cov + l]
  q4.reserve(static_cast<std::size_t>(modes));
  for (int m = 0; m < modes; ++m) {
    const int cov = ctx.cover()[static_cast<std::size_t>(m)];
    const double var = ctx.scaling().sigma(m) * ctx.scaling().sigma(m);
    const QuadratureRule1D rule = gauss_hermite(2 * (cov - 1) + 1);
    Eigen::MatrixXd table = Eigen::MatrixXd::Zero(cov * cov, cov * cov);
    for (std::size_t p = 0; p < rule.points.size(); ++p) {
      Eigen::VectorXd pv(cov);
      for (int k = 0; k < cov; ++k) pv(k) = hermite_eval(var, k, rule.points[p]);
      Eigen::VectorXd pair(cov * cov);
      for (int i = 0; i < cov; ++i)
        for (int j = 0; j < cov; ++j) pair(i * cov + j) = pv(i) * pv(j);
      table.noalias() += rule.weights[p] * pair * pair.transpose();
    }
    q4.push_back(std::move(table));
  }

  const std::size_t n1 = d1.size(), n2 = d2.size();
  const std::size_t np = n1 * n2;
  Eigen::MatrixXd moments(np, np);
  for (std::size_t a = 0; a < np; ++a) {
    const MultiIndex& mu1 = d1[a / n2];
    const MultiIndex& nu1 = d2[a % n2];
    for (std::size_t b = 0; b < np; ++b) {
      const MultiIndex& mu2 = d1[b / n2];
      const MultiIndex& nu2 = d2[b % n2];
      double v = 1.0;
      for (int m = 0; m < modes && v != 0.0; ++m) {
        const int cov = ctx.cover()[static_cast<std::size_t>(m)];
        const auto at = [&](const MultiIndex& mu) {
          return static_cast<std::size_t>(m) < mu.size() ? mu[static_cast<std::size_t>(m)] : 0;
        };
        v *= q4[static_cast<std::size_t>(m)](at(mu1) * cov + at(nu1), at(mu2) * cov + at(nu2));
      }
      moments(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = v;
    }
  }

  const ResidualModes res(w, ctx);
  const Mesh2D& mesh = ctx.space().mesh();
  const auto& rule = triangle_rule(5);
  double total = 0.0;
  Eigen::VectorXd s(np);
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    for (const auto& qp : rule) {
      std::vector<Vec2> r1(n1), r2(n2);
      for (std::size_t i = 0; i < n1; ++i) r1[i] = res.evaluate(t, qp.bary, d1[i]);
      for (std::size_t i = 0; i < n2; ++i) r2[i] = res.evaluate(t, qp.bary, d2[i]);
      for (std::size_t i = 0; i < n1; ++i)
        for (std::size_t j = 0; j < n2; ++j)
          s(static_cast<Eigen::Index>(i * n2 + j)) = r1[i][0] * r2[j][0] + r1[i][1] * r2[j][1];
      total += qp.weight * mesh.area(t) * s.dot(moments * s);
    }
  }
  return std::sqrt(std::max(0.0, total));
}

ResidualModes::ResidualModes(const CoeffTensor& w, const EstimatorContext& ctx) : w_(&w), ctx_(&ctx) {}

Vec2 ResidualModes::evaluate(int t, const std::array<double, 3>& bary, const MultiIndex& mu) const {
  if (!in_support(mu)) return {0.0, 0.0};
  const Mesh2D& mesh = ctx_->space().mesh();
  const auto& v = mesh.triangle(t).v;
  Eigen::VectorXd gx, gy;
  ctx_->element_gradients(*w_, t, gx, gy);
  const MultiIndexSet& lambda = ctx_->lambda();
  Vec2 out = {0.0, 0.0};
  for (std::size_t f = 0; f < lambda.size(); ++f) {
    const MultiIndex beta = lambda.unflatten(f);
    double c = 0.0;
    for (int k = 0; k < 3; ++k) c += bary[static_cast<std::size_t>(k)] * ctx_->node_coeff(v[k], mu, beta);
    out[0] += c * gx(static_cast<Eigen::Index>(f));
    out[1] += c * gy(static_cast<Eigen::Index>(f));
  }
  return out;
}

double ResidualModes::divergence(int t, const MultiIndex& mu) const {
  if (!in_support(mu)) return 0.0;
  const Mesh2D& mesh = ctx_->space().mesh();
  const auto& v = mesh.triangle(t).v;
  Eigen::VectorXd gx, gy;
  ctx_->element_gradients(*w_, t, gx, gy);
  const MultiIndexSet& lambda = ctx_->lambda();
  double out = 0.0;
  for (std::size_t f = 0; f < lambda.size(); ++f) {
    const MultiIndex beta = lambda.unflatten(f);
    for (int k = 0; k < 3; ++k) {
      const Vec2& hg = ctx_->space().hat_gradient(t, k);
      out += ctx_->node_coeff(v[k], mu, beta) *
             (hg[0] * gx(static_cast<Eigen::Index>(f)) + hg[1] * gy(static_cast<Eigen::Index>(f)));
    }
  }
  return out;
}

}  // namespace sgfem
