#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "oracles/oracles.hpp"
#include "sgfem/adapt.hpp"
#include "sgfem/config.hpp"
#include "sgfem/errors.hpp"
#include "sgfem/runner.hpp"

namespace {

int run_command(const std::string& config_path, const std::string& out_dir, long long seed_override,
                int threads_override) {
  sgfem::RunConfig config = config_path.empty() ? sgfem::RunConfig{} : sgfem::load_config(config_path);
  if (seed_override >= 0) config.mc_seed = static_cast<std::uint64_t>(seed_override);
  if (threads_override > 0) config.threads = threads_override;
  if (const char* env = std::getenv("SGFEM_THREADS")) {
    const int t = std::atoi(env);
    if (t > 0) config.threads = t;
  }
  sgfem::validate_config(config);
  const int code = sgfem::run_benchmark(config, out_dir);
  std::cout << "artifacts written to " << out_dir << "\n";
  return code;
}

nlohmann::json chaos_oracle_suite() {
  using namespace sgfem;
  nlohmann::json suite;
  nlohmann::json triples = nlohmann::json::array();
  for (double variance : {1.0, 1.21, 4.0}) {
    for (int i = 0; i <= 8; ++i) {
      for (int j = i; j <= 8 && i + j <= 16; ++j) {
        for (int k = j; k <= 16 - i - j; ++k) {
          triples.push_back({{"variance", variance},
                             {"i", i},
                             {"j", j},
                             {"k", k},
                             {"closed_form", oracles::triple_product_closed_form(i, j, k)},
                             {"quadrature_64", oracles::triple_product_quadrature(i, j, k, variance, 64)}});
        }
      }
    }
  }
  suite["triple_products"] = std::move(triples);

  nlohmann::json moments = nlohmann::json::array();
  for (double sigma : {1.0, 1.05, 1.1, 1.2, 1.3}) {
    for (double alpha : {0.5, 2.0, 3.0, 4.0}) {
      if (alpha + (1.0 - alpha) * sigma * sigma <= 0.05) continue;
      moments.push_back(
          {{"sigma", sigma}, {"alpha", alpha}, {"simpson", oracles::zeta_moment_simpson(sigma, alpha)}});
    }
  }
  suite["zeta_moments"] = std::move(moments);
  return suite;
}

nlohmann::json galerkin_oracle_suite() {
  using namespace sgfem;
  const Mesh2D mesh = initial_unit_square(0.34);
  const FESpace space(mesh);
  const ModeScaling scaling({0.4, 0.25}, 1.0, 0.2);
  const MultiIndexSet lambda({2, 2});
  const std::vector<int> dhat = {3, 3};
  AffineField field;
  field.modes = {[](const Vec2& x) { return 0.4 * std::cos(2.0 * M_PI * x[0]); },
                 [](const Vec2& x) { return 0.25 * std::cos(2.0 * M_PI * x[1]); }};
  field.sup_norms = {0.4, 0.25};
  const DiscreteCoefficient coeff = expand_lognormal(field, scaling, dhat, mesh);
  const auto f = [](const Vec2&) { return 1.0; };
  const auto sys = oracles::brute_force_galerkin(space, coeff, lambda, scaling, f);
  nlohmann::json out;
  out["free_dofs"] = space.free_count();
  out["lambda_size"] = lambda.size();
  out["solution"] = std::vector<double>(sys.solution.data(), sys.solution.data() + sys.solution.size());
  return out;
}

nlohmann::json marking_oracle_suite() {
  using namespace sgfem;
  nlohmann::json out = nlohmann::json::array();
  std::uint64_t state = 12345;
  const auto next_uniform = [&]() {
    state ^= state << 13;
    state ^= state >> 7;
    state ^= state << 17;
    return static_cast<double>(state >> 11) * 0x1.0p-53;
  };
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 3 + static_cast<int>(next_uniform() * 9);
    std::vector<double> values(static_cast<std::size_t>(n));
    for (auto& v : values) v = next_uniform();
    for (double theta : {0.1, 0.3, 0.5, 1.0}) {
      double total_sq = 0.0, total = 0.0;
      for (double v : values) {
        total_sq += v * v;
        total += v;
      }
      out.push_back({{"values", values},
                     {"theta", theta},
                     {"min_card_rss", oracles::exhaustive_min_cardinality(values, theta, true, std::sqrt(total_sq))},
                     {"min_card_sum", oracles::exhaustive_min_cardinality(values, theta, false, total)}});
    }
  }
  return out;
}

int oracle_command(const std::string& suite, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  nlohmann::json result;
  if (suite == "chaos") {
    result = chaos_oracle_suite();
  } else if (suite == "galerkin") {
    result = galerkin_oracle_suite();
  } else if (suite == "marking") {
    result = marking_oracle_suite();
  } else {
    std::cerr << "unknown oracle suite '" << suite << "' (expected chaos | galerkin | marking)\n";
    return 2;
  }
  const std::filesystem::path path = std::filesystem::path(out_dir) / (suite + ".json");
  std::ofstream out(path);
  out << result.dump(2) << "\n";
  std::cout << "wrote " << path.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive stochastic Galerkin FEM for lognormal diffusion"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out";
  long long seed_override = -1;
  int threads_override = 0;
  CLI::App* run = app.add_subcommand("run", "Run the adaptive benchmark and write artifacts");
  run->add_option("--config", config_path, "key=value configuration file");
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--seed", seed_override, "Monte Carlo seed override");
  run->add_option("--threads", threads_override, "Monte Carlo worker threads");

  std::string suite, oracle_out = "oracle_out";
  CLI::App* oracle = app.add_subcommand("oracle", "Generate independent oracle golden files");
  oracle->add_option("suite", suite, "chaos | galerkin | marking")->required();
  oracle->add_option("--out", oracle_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return run_command(config_path, out_dir, seed_override, threads_override);
    if (oracle->parsed()) return oracle_command(suite, oracle_out);
  } catch (const sgfem::Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "unexpected error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
