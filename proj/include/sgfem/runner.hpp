#pragma once

#include <string>

#include "sgfem/adapt.hpp"
#include "sgfem/config.hpp"
#include "sgfem/validate.hpp"

namespace sgfem {

struct BenchmarkArtifacts {
  RunResult run;
  std::vector<MCError> mc;
  double truncation = 0.0;        // frozen carrier vs exact field on the final mesh
  double truncation_chaos = 0.0;  // fresh expansion on the final mesh (degree tail only)
  QuasiErrorLedger ledger;        // rows completed with MC columns
};

/// Problem assembly from a validated configuration.
ProblemSetup make_setup(const RunConfig& config);

/// Full pipeline: adaptive loop, Monte Carlo validation, ledger completion.
BenchmarkArtifacts run_pipeline(const RunConfig& config);

/// Pipeline plus artifact files (ledger.csv, summary.json, mesh snapshots,
/// optional convergence.svg) under out_dir. Returns the process exit code.
int run_benchmark(const RunConfig& config, const std::string& out_dir);

std::string ledger_csv(const QuasiErrorLedger& ledger);
std::string summary_json(const RunConfig& config, const BenchmarkArtifacts& artifacts);
std::string convergence_svg(const QuasiErrorLedger& ledger);

}  // namespace sgfem
