#pragma once

#include <cstdint>
#include <string>

namespace sgfem {

/// Run configuration with the benchmark defaults. Parsed from plain key=value
/// files with dotted keys; unknown keys are rejected.
struct RunConfig {
  std::string domain = "lshape";  // lshape | unit-square
  double mesh_h0 = 0.1;

  int field_modes = 20;
  double field_sigma = 2.0;
  double field_rho = 1.0;
  double field_theta = 0.1;
  double field_tail_threshold = 1e-8;

  int fe_order = 1;

  double theta_det = 0.3;
  double theta_sto = 0.5;
  double c_eq = 5.0;
  int lookahead = 1;
  int max_iterations = 12;
  double omega = 1.0;
  double tau = 4.0;
  double stop_eta = 0.0;
  long stop_dofs = 0;
  int initial_degree = 2;

  double solver_tol = 1e-10;
  int solver_maxit = 10000;

  int mc_samples = 250;
  std::uint64_t mc_seed = 1;
  int mc_uplifts = 1;
  int mc_cadence = 1;

  int threads = 1;
  bool write_svg = true;
};

RunConfig load_config(const std::string& path);
RunConfig parse_config_text(const std::string& text);

/// Range checks shared by the parser and programmatic construction.
void validate_config(const RunConfig& config);

}  // namespace sgfem
