#include "sgfem/adapt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sgfem/errors.hpp"

namespace sgfem {

std::vector<int> doerfler_mark_det(const Eigen::VectorXd& indicators, double theta) {
  if (indicators.size() == 0) throw EmptyIndicators("doerfler_mark_det: no indicators");
  if (!(theta > 0.0) || theta > 1.0) throw Error("doerfler_mark_det: theta must be in (0, 1]");
  if (!indicators.allFinite()) throw Error("doerfler_mark_det: indicators must be finite");
  std::vector<int> order(static_cast<std::size_t>(indicators.size()));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (indicators(a) != indicators(b)) return indicators(a) > indicators(b);
    return a < b;
  });
  // total accumulated in the same order as the prefix so theta = 1 hits exactly
  double total_sq = 0.0;
  for (int id : order) total_sq += indicators(id) * indicators(id);
  if (total_sq == 0.0) return {};
  const double target = theta * theta * total_sq;
  std::vector<int> marked;
  double prefix = 0.0;
  for (int id : order) {
    if (prefix >= target) break;
    if (indicators(id) == 0.0) break;
    marked.push_back(id);
    prefix += indicators(id) * indicators(id);
  }
  std::sort(marked.begin(), marked.end());
  return marked;
}

std::vector<int> doerfler_mark_sto(const std::vector<double>& slab_values, const std::vector<char>& slab_valid,
                                   double theta, double total) {
  if (slab_values.empty()) throw EmptyIndicators("doerfler_mark_sto: no slab values");
  if (!(theta > 0.0) || theta > 1.0) throw Error("doerfler_mark_sto: theta must be in (0, 1]");
  if (!(total >= 0.0) || !std::isfinite(total)) throw Error("doerfler_mark_sto: total must be finite and nonnegative");
  for (double v : slab_values)
    if (!std::isfinite(v)) throw Error("doerfler_mark_sto: slab values must be finite");
  std::vector<int> order;
  for (std::size_t m = 0; m < slab_values.size(); ++m)
    if (slab_valid.empty() || slab_valid[m]) order.push_back(static_cast<int>(m));
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double va = slab_values[static_cast<std::size_t>(a)];
    const double vb = slab_values[static_cast<std::size_t>(b)];
    if (va != vb) return va > vb;
    return a < b;
  });
  const double target = theta * total;
  // the caller accumulates the total in its own summation order; absorb the
  // resulting ulp-level discrepancy so theta = 1 remains reachable
  const double slack = 8.0 * std::numeric_limits<double>::epsilon() * std::abs(target);
  std::vector<int> marked;
  double prefix = 0.0;
  if (prefix >= target - slack) return {};
  for (int m : order) {
    marked.push_back(m + 1);  // modes are 1-based
    prefix += slab_values[static_cast<std::size_t>(m)];
    if (prefix >= target - slack) return marked;
  }
  throw UnreachableThreshold("doerfler_mark_sto: slab sum " + std::to_string(prefix) +
                             " below target " + std::to_string(target));
}

namespace {

/// Sparse spatial prolongation on free dofs, built by propagating interpolation
/// weights vertex by vertex (midpoint parents always precede their children).
SparseMat spatial_prolongation(const RefinementMap& map, const FESpace& coarse, const FESpace& fine) {
  std::vector<std::vector<std::pair<int, double>>> weights(map.vertex_parents.size());
  for (std::size_t v = 0; v < map.vertex_parents.size(); ++v) {
    const auto& [a, b] = map.vertex_parents[v];
    if (a == static_cast<int>(v) && b == static_cast<int>(v)) {
      weights[v] = {{static_cast<int>(v), 1.0}};
    } else {
      std::vector<std::pair<int, double>> merged;
      for (const auto& [c, wa] : weights[static_cast<std::size_t>(a)]) merged.emplace_back(c, 0.5 * wa);
      for (const auto& [c, wb] : weights[static_cast<std::size_t>(b)]) {
        bool found = false;
        for (auto& [c2, w2] : merged) {
          if (c2 == c) {
            w2 += 0.5 * wb;
            found = true;
            break;
          }
        }
        if (!found) merged.emplace_back(c, 0.5 * wb);
      }
      weights[v] = std::move(merged);
    }
  }
  std::vector<Eigen::Triplet<double>> trips;
  for (int v = 0; v < fine.node_count(); ++v) {
    const int fr = fine.free_index(v);
    if (fr < 0) continue;
    for (const auto& [c, w] : weights[static_cast<std::size_t>(v)]) {
      const int cr = coarse.free_index(c);
      if (cr >= 0) trips.emplace_back(fr, cr, w);
    }
  }
  SparseMat p(fine.free_count(), coarse.free_count());
  p.setFromTriplets(trips.begin(), trips.end());
  return p;
}

struct OrthogonalityCheck {
  double max_relative_defect = 0.0;
  double b_increment = 0.0;
};

/// Galerkin-orthogonality audit: B(u_fine - P u_coarse, P v) over all prolongated
/// coarse basis vectors v, relative to ||u_fine||_B ||P v||_B.
OrthogonalityCheck orthogonality_check(const GalerkinOperator& op_fine, const CoeffTensor& u_fine,
                                       const CoeffTensor& u_coarse_prolonged, const RefinementMap& map,
                                       const FESpace& coarse_space, const MultiIndexSet& coarse_lambda,
                                       const FESpace& fine_space) {
  OrthogonalityCheck out;
  const Eigen::MatrixXd uf = op_fine.restrict_free(u_fine);
  const Eigen::MatrixXd up = op_fine.restrict_free(u_coarse_prolonged);
  const Eigen::MatrixXd diff = uf - up;
  const Eigen::MatrixXd g = op_fine.apply(diff);
  out.b_increment = std::sqrt(std::max(0.0, (g.cwiseProduct(diff)).sum()));
  const double u_norm = std::sqrt(std::max(0.0, (op_fine.apply(uf).cwiseProduct(uf)).sum()));
  if (u_norm == 0.0) return out;

  const SparseMat p = spatial_prolongation(map, coarse_space, fine_space);
  const Eigen::MatrixXd r = p.transpose() * g;  // coarse_free x |Lambda_fine|

  // squared B-norms of the prolongated basis vectors: sum_alpha diag(P^T K_a P)[i] tau_a(b, b)
  const auto& modes = op_fine.active_modes();
  const MultiIndexSet& fine_lambda = op_fine.lambda();
  Eigen::MatrixXd vnorm_sq = Eigen::MatrixXd::Zero(p.cols(), static_cast<Eigen::Index>(coarse_lambda.size()));
  for (std::size_t a = 0; a < modes.size(); ++a) {
    // diag of P^T K_a P via the stiffness action on each prolongation column
    // (columns are sparse; cost is modest at desk scale)
    Eigen::VectorXd diag(p.cols());
    const SparseMat kp = op_fine.stiffness(static_cast<int>(a)) * p;
    for (Eigen::Index c = 0; c < p.cols(); ++c) diag(c) = p.col(c).dot(kp.col(c));
    for (std::size_t bf = 0; bf < coarse_lambda.size(); ++bf) {
      const MultiIndex beta = coarse_lambda.unflatten(bf);
      double tau = 1.0;
      for (int m = 0; m < fine_lambda.mode_count() && tau != 0.0; ++m) {
        const int am = modes[a][static_cast<std::size_t>(m)];
        const int bm = static_cast<std::size_t>(m) < beta.size() ? beta[static_cast<std::size_t>(m)] : 0;
        tau *= triple_product_1d(1.0, am, bm, bm);
      }
      if (tau != 0.0) vnorm_sq.col(static_cast<Eigen::Index>(bf)) += tau * diag;
    }
  }

  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    for (std::size_t bf = 0; bf < coarse_lambda.size(); ++bf) {
      const MultiIndex beta = coarse_lambda.unflatten(bf);
      const std::size_t fine_flat = fine_lambda.flat_index(pad_index(beta, fine_lambda.mode_count()));
      const double vn = std::sqrt(std::max(0.0, vnorm_sq(i, static_cast<Eigen::Index>(bf))));
      if (vn == 0.0) continue;
      const double defect = std::abs(r(i, static_cast<Eigen::Index>(fine_flat))) / (u_norm * vn);
      out.max_relative_defect = std::max(out.max_relative_defect, defect);
    }
  }
  return out;
}

}  // namespace

RunResult run_adaptive(const ProblemSetup& setup, const AdaptConfig& config) {
  if (config.max_iterations < 1) throw Error("run_adaptive: need at least one iteration");
  if (!(config.theta_det > 0.0) || config.theta_det > 1.0) throw Error("run_adaptive: theta_det outside (0, 1]");
  if (!(config.theta_sto > 0.0) || config.theta_sto > 1.0) throw Error("run_adaptive: theta_sto outside (0, 1]");
  if (!(config.c_eq > 0.0)) throw Error("run_adaptive: c_eq must be positive");
  if (config.initial_degree < 1) throw Error("run_adaptive: initial degree must be >= 1");

  RunResult result;
  result.ledger.omega = config.omega;
  result.ledger.tau = config.tau;

  const int m_hat = setup.field.mode_count();
  std::vector<int> dims(static_cast<std::size_t>(m_hat), 1);
  if (m_hat > 0) dims[0] = config.initial_degree;

  auto mesh = std::make_shared<Mesh2D>(setup.initial_mesh);
  CoeffTensor previous_solution;
  RefinementMap previous_map;
  std::shared_ptr<const Mesh2D> previous_mesh;
  MultiIndexSet previous_lambda;
  bool have_previous = false;

  // the coefficient carrier is expanded once; refinements restrict it exactly,
  // keeping the bilinear form identical on every level of the run
  const DiscreteCoefficient carrier = expand_lognormal(setup.field, setup.scaling, setup.dhat, *mesh);
  InterpolationStencil stencil = InterpolationStencil::identity(mesh->vertex_count());
  bool mesh_refined = false;

  std::vector<int> lookahead(static_cast<std::size_t>(std::max(1, m_hat)), 1);
  for (std::size_t m = 0; m < config.lookahead.size() && m < lookahead.size(); ++m)
    lookahead[m] = config.lookahead[m];

  for (int iter = 1; iter <= config.max_iterations; ++iter) {
    const MultiIndexSet lambda(dims);
    FESpace space(*mesh);
    const DiscreteCoefficient coeff =
        !mesh_refined ? carrier
        : m_hat == 0  ? DiscreteCoefficient::dense({}, Eigen::MatrixXd::Ones(mesh->vertex_count(), 1))
                      : DiscreteCoefficient::interpolated(carrier, stencil);
    const GalerkinOperator op(space, coeff, lambda, config.op_sup_cut);
    const CoeffTensor rhs = assemble_rhs(space, setup.source, lambda);
    SolveReport solved;
    try {
      solved = solve(op, rhs, config.solver_tol, config.solver_maxit);
    } catch (const NoConvergence& err) {
      result.aborted = true;
      result.abort_reason = err.what();
      break;
    }

    const EstimatorContext ctx(space, coeff, lambda, setup.scaling);
    const EstimatorReport est = eta_total(solved.solution, ctx, setup.source, config.c_eq, lookahead);

    IterationRecord row;
    row.iter = iter;
    row.n_triangles = mesh->triangle_count();
    row.dims = dims;
    row.dofs = static_cast<long>(space.free_count()) * static_cast<long>(lambda.size());
    row.eta_det = est.eta_det;
    row.eta_det_vol = est.eta_det_vol_sq;
    row.eta_det_jump = est.eta_det_jump_sq;
    row.eta_sto = est.eta_sto;
    row.eta = est.eta;
    row.branch = est.eta_det >= config.c_eq * est.eta_sto ? "det" : "sto";
    row.energy = op.energy_product(solved.solution, solved.solution);
    if (config.diagnostics) row.c_lambda = lipschitz_diagnostic(ctx, 0).c_lambda;

    if (have_previous) {
      const CoeffTensor prolonged = prolong_tensor(previous_solution, previous_map, lambda);
      FESpace coarse_space(*previous_mesh);
      const OrthogonalityCheck check = orthogonality_check(op, solved.solution, prolonged, previous_map,
                                                           coarse_space, previous_lambda, space);
      result.ledger.rows.back().b_increment = check.b_increment;
      result.ledger.rows.back().orth_defect = check.max_relative_defect;
    }

    AdaptState state;
    state.mesh = mesh;
    state.lambda = lambda;
    state.solution = solved.solution;
    state.slab_values = est.slab_values;
    state.map_to_next.identity = true;

    const bool stop_eta = config.stop_eta > 0.0 && est.eta <= config.stop_eta;
    const bool stop_dofs = config.stop_dofs > 0 && row.dofs >= config.stop_dofs;
    if (iter >= config.max_iterations || stop_eta || stop_dofs) {
      result.final_coefficient = coeff;
      result.ledger.rows.push_back(std::move(row));
      result.states.push_back(std::move(state));
      break;
    }

    // Mark and refine exactly one discretization direction
    if (est.eta_det >= config.c_eq * est.eta_sto) {
      const std::vector<int> marked = doerfler_mark_det(est.eta_det_per_element, config.theta_det);
      row.marked_elements = static_cast<int>(marked.size());
      auto [refined, map] = bisect(*mesh, marked);
      state.map_to_next = map;
      previous_map = map;
      stencil = stencil.refine(map);
      mesh_refined = true;
      mesh = std::make_shared<Mesh2D>(std::move(refined));
    } else {
      std::vector<int> marked_modes;
      try {
        marked_modes = doerfler_mark_sto(est.slab_values, est.slab_valid, config.theta_sto, est.eta_sto);
      } catch (const UnreachableThreshold&) {
        for (std::size_t m = 0; m < est.slab_values.size(); ++m)
          if (est.slab_valid[m]) marked_modes.push_back(static_cast<int>(m) + 1);
        row.sto_fallback_all = true;
      }
      row.marked_modes = static_cast<int>(marked_modes.size());
      for (int m : marked_modes) dims[static_cast<std::size_t>(m - 1)] += lookahead[static_cast<std::size_t>(m - 1)];
      // the mesh is unchanged: identity refinement map
      RefinementMap id;
      id.identity = true;
      id.vertex_parents.reserve(static_cast<std::size_t>(mesh->vertex_count()));
      for (int v = 0; v < mesh->vertex_count(); ++v) id.vertex_parents.push_back({v, v});
      state.map_to_next = id;
      previous_map = id;
    }

    previous_solution = state.solution;
    previous_mesh = state.mesh;
    previous_lambda = state.lambda;
    have_previous = true;
    result.ledger.rows.push_back(std::move(row));
    result.states.push_back(std::move(state));
  }
  return result;
}

}  // namespace sgfem
