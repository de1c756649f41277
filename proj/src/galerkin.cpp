#include "sgfem/galerkin.hpp"

#include <cmath>

#include "sgfem/chaos.hpp"
#include "sgfem/errors.hpp"
#include "sgfem/quadrature.hpp"

namespace sgfem {

FESpace::FESpace(const Mesh2D& mesh) : mesh_(&mesh) {
  const int nv = mesh.vertex_count();
  free_index_.assign(static_cast<std::size_t>(nv), -1);
  free_count_ = 0;
  for (int v = 0; v < nv; ++v)
    if (!mesh.vertex_on_boundary(v)) free_index_[static_cast<std::size_t>(v)] = free_count_++;

  const int nt = mesh.triangle_count();
  gradients_.resize(static_cast<std::size_t>(3 * nt));
  for (int t = 0; t < nt; ++t) {
    const auto& v = mesh.triangle(t).v;
    const double inv2a = 1.0 / (2.0 * mesh.area(t));
    for (int l = 0; l < 3; ++l) {
      const Vec2& p1 = mesh.vertex(v[(l + 1) % 3]);
      const Vec2& p2 = mesh.vertex(v[(l + 2) % 3]);
      gradients_[static_cast<std::size_t>(3 * t + l)] = {(p1[1] - p2[1]) * inv2a, (p2[0] - p1[0]) * inv2a};
    }
  }
}

namespace {

SparseMat scatter_stiffness(const FESpace& space, const std::function<double(int)>& element_coef) {
  const Mesh2D& mesh = space.mesh();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(9 * mesh.triangle_count()));
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto& v = mesh.triangle(t).v;
    const double c = element_coef(t) * mesh.area(t);
    for (int i = 0; i < 3; ++i) {
      const int fi = space.free_index(v[i]);
      if (fi < 0) continue;
      const Vec2& gi = space.hat_gradient(t, i);
      for (int j = 0; j < 3; ++j) {
        const int fj = space.free_index(v[j]);
        if (fj < 0) continue;
        const Vec2& gj = space.hat_gradient(t, j);
        trips.emplace_back(fi, fj, c * (gi[0] * gj[0] + gi[1] * gj[1]));
      }
    }
  }
  SparseMat k(space.free_count(), space.free_count());
  k.setFromTriplets(trips.begin(), trips.end());
  return k;
}

}  // namespace

SparseMat assemble_stiffness(const FESpace& space, const Eigen::VectorXd& a_nodal) {
  if (a_nodal.size() != space.node_count()) throw Error("assemble_stiffness: nodal coefficient size mismatch");
  const Mesh2D& mesh = space.mesh();
  return scatter_stiffness(space, [&](int t) {
    const auto& v = mesh.triangle(t).v;
    // exact integral of the P1 interpolant over the element, divided by the area
    return (a_nodal(v[0]) + a_nodal(v[1]) + a_nodal(v[2])) / 3.0;
  });
}

SparseMat assemble_stiffness_pointwise(const FESpace& space, const std::function<double(const Vec2&)>& a) {
  const Mesh2D& mesh = space.mesh();
  const auto& rule = triangle_rule(2);
  return scatter_stiffness(space, [&](int t) {
    const auto& v = mesh.triangle(t).v;
    const Vec2& p0 = mesh.vertex(v[0]);
    const Vec2& p1 = mesh.vertex(v[1]);
    const Vec2& p2 = mesh.vertex(v[2]);
    double acc = 0.0;
    for (const auto& q : rule) {
      const Vec2 x = {q.bary[0] * p0[0] + q.bary[1] * p1[0] + q.bary[2] * p2[0],
                      q.bary[0] * p0[1] + q.bary[1] * p1[1] + q.bary[2] * p2[1]};
      acc += q.weight * a(x);
    }
    return acc;
  });
}

CoeffTensor assemble_rhs(const FESpace& space, const std::function<double(const Vec2&)>& f,
                         const MultiIndexSet& lambda) {
  const Mesh2D& mesh = space.mesh();
  CoeffTensor b(space.node_count(), lambda);
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto& v = mesh.triangle(t).v;
    const Vec2& p0 = mesh.vertex(v[0]);
    const Vec2& p1 = mesh.vertex(v[1]);
    const Vec2& p2 = mesh.vertex(v[2]);
    const Vec2 m01 = {0.5 * (p0[0] + p1[0]), 0.5 * (p0[1] + p1[1])};
    const Vec2 m12 = {0.5 * (p1[0] + p2[0]), 0.5 * (p1[1] + p2[1])};
    const Vec2 m20 = {0.5 * (p2[0] + p0[0]), 0.5 * (p2[1] + p0[1])};
    const double f01 = f(m01), f12 = f(m12), f20 = f(m20);
    const double w = mesh.area(t) / 6.0;  // midpoint rule, phi = 1/2 on adjacent midpoints
    b.values(v[0], 0) += w * (f01 + f20);
    b.values(v[1], 0) += w * (f01 + f12);
    b.values(v[2], 0) += w * (f12 + f20);
  }
  for (int j = 0; j < space.node_count(); ++j)
    if (space.is_dirichlet(j)) b.values.row(j).setZero();
  return b;
}

GalerkinOperator::GalerkinOperator(const FESpace& space, const DiscreteCoefficient& coeff,
                                   const MultiIndexSet& lambda, double sup_cut)
    : space_(&space), lambda_(lambda) {
  const int modes = std::max(lambda.mode_count(), coeff.mode_count());
  const std::vector<int>& dims = lambda.dims();

  // coupling blocks per mode and coefficient degree
  couplings_.resize(static_cast<std::size_t>(modes));
  std::vector<int> active_deg(static_cast<std::size_t>(modes), 1);
  for (int m = 0; m < modes; ++m) {
    const int d = m < lambda.mode_count() ? dims[static_cast<std::size_t>(m)] : 1;
    const int dh = m < coeff.mode_count() ? coeff.dhat_dims()[static_cast<std::size_t>(m)] : 1;
    const int adeg = std::min(2 * d - 1, dh);  // triple-product support bound
    active_deg[static_cast<std::size_t>(m)] = adeg;
    couplings_[static_cast<std::size_t>(m)].reserve(static_cast<std::size_t>(adeg));
    for (int k = 0; k < adeg; ++k) {
      Eigen::MatrixXd tk(d, d);
      for (int b = 0; b < d; ++b)
        for (int mu = 0; mu < d; ++mu) tk(b, mu) = triple_product_1d(1.0, k, b, mu);
      couplings_[static_cast<std::size_t>(m)].push_back(std::move(tk));
    }
  }

  const MultiIndexSet active_set(active_deg);
  const MultiIndex zero(static_cast<std::size_t>(modes), 0);
  const double cut = sup_cut > 0.0 ? sup_cut * coeff.sup_norm(zero) : 0.0;

  for (std::size_t f = 0; f < active_set.size(); ++f) {
    const MultiIndex alpha = active_set.unflatten(f);
    bool coupled = true;
    for (int m = 0; m < modes && coupled; ++m) {
      const auto& tk = couplings_[static_cast<std::size_t>(m)][static_cast<std::size_t>(alpha[m])];
      if (tk.cwiseAbs().maxCoeff() == 0.0) coupled = false;
    }
    if (!coupled) continue;
    if (cut > 0.0 && coeff.sup_norm(alpha) <= cut && f != 0) continue;

    ActiveMode mode;
    mode.stiffness = assemble_stiffness(space, coeff.mode_values(alpha));
    mode.coupling.reserve(static_cast<std::size_t>(modes));
    for (int m = 0; m < modes; ++m)
      mode.coupling.push_back(&couplings_[static_cast<std::size_t>(m)][static_cast<std::size_t>(alpha[m])]);
    active_.push_back(std::move(mode));
    active_index_.push_back(alpha);
  }
  if (active_.empty()) throw Error("GalerkinOperator: no active coefficient modes");

  mean_solver_.compute(active_[0].stiffness);
  if (mean_solver_.info() != Eigen::Success)
    throw NumericalBreakdown("GalerkinOperator: mean-field stiffness factorization failed");
}

namespace {

/// Right-contraction of a row-major flattened tensor with per-mode matrices:
/// out[j, (mu_1..mu_M)] = sum_beta v[j, (beta_1..beta_M)] prod_m T_m(beta_m, mu_m).
Eigen::MatrixXd kron_apply(const Eigen::MatrixXd& v, const std::vector<const Eigen::MatrixXd*>& mats,
                           const std::vector<int>& dims) {
  Eigen::MatrixXd cur = v;
  const int modes = static_cast<int>(dims.size());
  long stride = 1;
  for (int m = modes - 1; m >= 0; --m) {
    const int d = dims[static_cast<std::size_t>(m)];
    const Eigen::MatrixXd& t = *mats[static_cast<std::size_t>(m)];
    if (d > 1 || t(0, 0) != 1.0) {
      Eigen::MatrixXd next =Eigen::MatrixXd::Zero(cur.rows(), cur.cols());
      const long blocks = cur.cols() / (stride * d);
      for (long o = 0; o < blocks; ++o) {
        for (int mu = 0; mu < d; ++mu) {
          for (int b = 0; b < d; ++b) {
            const double w = t(b, mu);
            if (w == 0.0) continue;
            next.middleCols(o * d * stride + mu * stride, stride) +=
                w * cur.middleCols(o * d * stride + b * stride, stride);
          }
        }
      }
      cur.swap(next);
    }
    stride *= d;
  }
  return cur;
}

}  // namespace

Eigen::MatrixXd GalerkinOperator::apply(const Eigen::MatrixXd& v) const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(v.rows(), v.cols());
  for (const auto& mode : active_) {
    const Eigen::MatrixXd coupled = kron_apply(v, mode.coupling, lambda_.dims());
    out.noalias() += mode.stiffness * coupled;
  }
  return out;
}

Eigen::MatrixXd GalerkinOperator::precondition(const Eigen::MatrixXd& r) const {
  Eigen::MatrixXd out(r.rows(), r.cols());
  for (Eigen::Index c = 0; c < r.cols(); ++c) out.col(c) = mean_solver_.solve(r.col(c));
  return out;
}

Eigen::MatrixXd GalerkinOperator::restrict_free(const CoeffTensor& full) const {
  Eigen::MatrixXd out(space_->free_count(), full.values.cols());
  for (int v = 0; v < space_->node_count(); ++v) {
    const int f = space_->free_index(v);
    if (f >= 0) out.row(f) = full.values.row(v);
  }
  return out;
}

CoeffTensor GalerkinOperator::extend_full(const Eigen::MatrixXd& free) const {
  CoeffTensor out(space_->node_count(), lambda_);
  for (int v = 0; v < space_->node_count(); ++v) {
    const int f = space_->free_index(v);
    if (f >= 0) out.values.row(v) = free.row(f);
  }
  return out;
}

double GalerkinOperator::energy_product(const CoeffTensor& v, const CoeffTensor& w) const {
  const Eigen::MatrixXd vf = restrict_free(v);
  const Eigen::MatrixXd wf = restrict_free(w);
  return (apply(vf).cwiseProduct(wf)).sum();
}

Eigen::MatrixXd GalerkinOperator::materialize() const {
  const long n = static_cast<long>(space_->free_count()) * static_cast<long>(lambda_.size());
  if (n > 4000) throw Error("GalerkinOperator::materialize: system too large");
  Eigen::MatrixXd a(n, n);
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(space_->free_count(), static_cast<Eigen::Index>(lambda_.size()));
  for (long c = 0; c < n; ++c) {
    const long j = c / static_cast<long>(lambda_.size());
    const long mu = c % static_cast<long>(lambda_.size());
    e(j, mu) = 1.0;
    const Eigen::MatrixXd col = apply(e);
    e(j, mu) = 0.0;
    for (long r = 0; r < n; ++r)
      a(r, c) = col(r / static_cast<long>(lambda_.size()), r % static_cast<long>(lambda_.size()));
  }
  return a;
}

SolveReport solve(const GalerkinOperator& op, const CoeffTensor& rhs, double tol, int maxit) {
  if (!(tol > 0.0)) throw Error("solve: tolerance must be positive");
  if (rhs.values.rows() != op.space().node_count() ||
      static_cast<std::size_t>(rhs.values.cols()) != op.lambda().size())
    throw Error("solve: load tensor shape does not match the operator");
  const Eigen::MatrixXd b = op.restrict_free(rhs);
  const double bnorm = b.norm();
  SolveReport report;
  if (bnorm == 0.0) {
    report.solution = op.extend_full(Eigen::MatrixXd::Zero(b.rows(), b.cols()));
    return report;
  }
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(b.rows(), b.cols());
  Eigen::MatrixXd r = b;
  Eigen::MatrixXd z = op.precondition(r);
  Eigen::MatrixXd p = z;
  double rz = (r.cwiseProduct(z)).sum();
  for (int it = 0; it < maxit; ++it) {
    const Eigen::MatrixXd ap = op.apply(p);
    const double pap = (p.cwiseProduct(ap)).sum();
    if (!(pap > 0.0)) throw NumericalBreakdown("solve: operator not positive definite on free dofs");
    const double alpha = rz / pap;
    x.noalias() += alpha * p;
    r.noalias() -= alpha * ap;
    const double rel = r.norm() / bnorm;
    report.iterations = it + 1;
    report.residual = rel;
    if (rel <= tol) {
      report.solution = op.extend_full(x);
      return report;
    }
    z = op.precondition(r);
    const double rz_next = (r.cwiseProduct(z)).sum();
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  throw NoConvergence(report.iterations, report.residual);
}

Eigen::VectorXd prolong_vertex_values(const RefinementMap& map, const Eigen::VectorXd& coarse) {
  Eigen::VectorXd fine(static_cast<Eigen::Index>(map.vertex_parents.size()));
  // midpoint parents always precede their child, so a forward sweep suffices
  for (std::size_t v = 0; v < map.vertex_parents.size(); ++v) {
    const auto& [a, b] = map.vertex_parents[v];
    if (a == static_cast<int>(v) && b == static_cast<int>(v)) {
      fine(static_cast<Eigen::Index>(v)) = coarse(static_cast<Eigen::Index>(v));
    } else {
      fine(static_cast<Eigen::Index>(v)) = 0.5 * (fine(a) + fine(b));
    }
  }
  return fine;
}

CoeffTensor prolong_tensor(const CoeffTensor& coarse, const RefinementMap& map, const MultiIndexSet& fine_lambda) {
  CoeffTensor fine(static_cast<int>(map.vertex_parents.size()), fine_lambda);
  for (std::size_t f = 0; f < coarse.lambda.size(); ++f) {
    const MultiIndex mu = coarse.lambda.unflatten(f);
    const std::size_t g = fine_lambda.flat_index(pad_index(mu, fine_lambda.mode_count()));
    fine.values.col(static_cast<Eigen::Index>(g)) =
        prolong_vertex_values(map, coarse.values.col(static_cast<Eigen::Index>(f)));
  }
  return fine;
}

}  // namespace sgfem
