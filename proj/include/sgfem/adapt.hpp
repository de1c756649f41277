#pragma once

#include <Eigen/Dense>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "sgfem/estimator.hpp"
#include "sgfem/field.hpp"
#include "sgfem/galerkin.hpp"
#include "sgfem/mesh.hpp"

namespace sgfem {

struct AdaptConfig {
  double theta_det = 0.3;
  double theta_sto = 0.5;
  double c_eq = 5.0;
  std::vector<int> lookahead;  // per mode; missing entries default to 1
  int max_iterations = 12;
  int initial_degree = 2;  // chaos dimension of the first mode
  double omega = 1.0;
  double tau = 4.0;
  double solver_tol = 1e-10;
  int solver_maxit = 10000;
  double op_sup_cut = 1e-12;
  double stop_eta = 0.0;     // optional: stop once eta falls below (0 = off)
  long stop_dofs = 0;        // optional: stop once dofs exceed (0 = off)
  bool diagnostics = true;   // record Lipschitz constants per iteration
};

/// Minimal set of elements whose squared indicators reach theta^2 of the total;
/// ties broken by ascending element id.
std::vector<int> doerfler_mark_det(const Eigen::VectorXd& indicators, double theta);

/// Minimal set of modes whose plain slab sum reaches theta * total. Throws
/// UnreachableThreshold when even all slabs together fall short.
std::vector<int> doerfler_mark_sto(const std::vector<double>& slab_values, const std::vector<char>& slab_valid,
                                   double theta, double total);

constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();

struct IterationRecord {
  int iter = 0;
  std::string branch;  // dominating contribution at estimate time
  int n_triangles = 0;
  std::vector<int> dims;
  long dofs = 0;
  double eta_det = 0.0;
  double eta_det_vol = 0.0;   // volume part of eta_det^2, for the dominance audit
  double eta_det_jump = 0.0;  // jump part of eta_det^2
  double eta_sto = 0.0;
  double eta = 0.0;
  double mc_error = kUnset;
  double mc_stderr = kUnset;
  double quasi_err = kUnset;
  double delta = kUnset;
  int marked_elements = 0;
  int marked_modes = 0;
  bool sto_fallback_all = false;
  double energy = kUnset;        // F(u_l), nondecreasing under nested refinement
  double b_increment = kUnset;   // ||u_{l+1} - u_l||_B, filled on the next iteration
  double orth_defect = kUnset;   // max relative Galerkin-orthogonality defect
  double c_lambda = kUnset;      // Lipschitz diagnostic over the active set
};

struct QuasiErrorLedger {
  double omega = 1.0;
  double tau = 4.0;
  std::vector<IterationRecord> rows;
};

/// Per-iteration artifacts retained for Monte Carlo validation.
struct AdaptState {
  std::shared_ptr<const Mesh2D> mesh;
  MultiIndexSet lambda;
  CoeffTensor solution;
  RefinementMap map_to_next;  // identity-flagged on the final iteration
  std::vector<double> slab_values;
};

struct ProblemSetup {
  AffineField field;
  ModeScaling scaling;
  std::vector<int> dhat;
  Mesh2D initial_mesh;
  SpatialFn source;
};

struct RunResult {
  QuasiErrorLedger ledger;
  std::vector<AdaptState> states;
  /// Carrier expanded on the initial mesh, restricted to the final mesh. One
  /// coefficient per run keeps a single bilinear form across all levels.
  DiscreteCoefficient final_coefficient;
  bool aborted = false;
  std::string abort_reason;
};

/// Solve-Estimate-Mark-Refine loop; the final iteration estimates but does not refine.
RunResult run_adaptive(const ProblemSetup& setup, const AdaptConfig& config);

}  // namespace sgfem
