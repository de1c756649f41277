#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "sgfem/adapt.hpp"
#include "sgfem/field.hpp"
#include "sgfem/galerkin.hpp"
#include "sgfem/rng.hpp"

namespace sgfem {

struct MCConfig {
  int samples = 250;
  std::uint64_t seed = 1;
  int uplifts = 1;   // uniform refinements above the finest adaptive mesh
  int cadence = 1;   // evaluate every n-th iteration (the last one always)
  int threads = 1;
  bool widened_measure = false;  // sample from pi_{theta rho} instead of pi_0
};

/// One i.i.d. parameter draw; variance 1 per mode (pi_0) or sigma_m(theta rho)^2.
std::vector<double> sample_parameter(GaussianSampler& rng, const ModeScaling& scaling, bool widened);

/// Deterministic solve with the exact coefficient exp(gamma(., y)) evaluated at
/// quadrature points. Returns the full nodal vector.
Eigen::VectorXd reference_solve(const std::vector<double>& y, const AffineField& field, const FESpace& space,
                                const SpatialFn& f);

/// Pointwise chaos evaluation u(y)[node] = sum_mu u[node, mu] P_mu(y).
Eigen::VectorXd evaluate_at_parameter(const CoeffTensor& u, const ModeScaling& scaling,
                                      const std::vector<double>& y);

struct MCError {
  double error = 0.0;      // E(u_l)
  double stderr_sq = 0.0;  // standard error of the squared-error estimate
};

/// Sampled H1-seminorm errors for every recorded iteration, with common random
/// numbers across iterations and nodal prolongation onto the reference mesh.
std::vector<MCError> mc_errors(const RunResult& run, const AffineField& field, const ModeScaling& scaling,
                               const SpatialFn& f, const MCConfig& config);

}  // namespace sgfem
