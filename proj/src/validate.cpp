#include "sgfem/validate.hpp"

#include <cmath>
#include <thread>

#include "sgfem/chaos.hpp"
#include "sgfem/errors.hpp"

namespace sgfem {

std::vector<double> sample_parameter(GaussianSampler& rng, const ModeScaling& scaling, bool widened) {
  std::vector<double> y(static_cast<std::size_t>(scaling.mode_count()));
  for (int m = 0; m < scaling.mode_count(); ++m) {
    const double s = widened ? scaling.sigma(m) : 1.0;
    y[static_cast<std::size_t>(m)] = s * rng.normal();
  }
  return y;
}

Eigen::VectorXd reference_solve(const std::vector<double>& y, const AffineField& field, const FESpace& space,
                                const SpatialFn& f) {
  const SparseMat k = assemble_stiffness_pointwise(
      space, [&](const Vec2& x) { return std::exp(field.evaluate(x, y)); });
  Eigen::SimplicialLDLT<SparseMat> solver(k);
  if (solver.info() != Eigen::Success) throw NumericalBreakdown("reference_solve: factorization failed");

  const CoeffTensor load = assemble_rhs(space, f, MultiIndexSet(std::vector<int>{}));
  Eigen::VectorXd b(space.free_count());
  for (int v = 0; v < space.node_count(); ++v) {
    const int fi = space.free_index(v);
    if (fi >= 0) b(fi) = load.values(v, 0);
  }
  const Eigen::VectorXd xf = solver.solve(b);
  Eigen::VectorXd full = Eigen::VectorXd::Zero(space.node_count());
  for (int v = 0; v < space.node_count(); ++v) {
    const int f = space.free_index(v);
    if (f >= 0) full(v) = xf(f);
  }
  return full;
}

Eigen::VectorXd evaluate_at_parameter(const CoeffTensor& u, const ModeScaling& scaling,
                                      const std::vector<double>& y) {
  const MultiIndexSet& lambda = u.lambda;
  Eigen::VectorXd chaos(static_cast<Eigen::Index>(lambda.size()));
  for (std::size_t f = 0; f < lambda.size(); ++f) {
    const MultiIndex mu = lambda.unflatten(f);
    double p = 1.0;
    for (std::size_t m = 0; m < mu.size(); ++m) {
      if (mu[m] == 0) continue;
      const double var = scaling.sigma(static_cast<int>(m)) * scaling.sigma(static_cast<int>(m));
      p *= hermite_eval(var, mu[m], y[m]);
    }
    chaos(static_cast<Eigen::Index>(f)) = p;
  }
  return u.values * chaos;
}

std::vector<MCError> mc_errors(const RunResult& run, const AffineField& field, const ModeScaling& scaling,
                               const SpatialFn& f, const MCConfig& config) {
  if (run.states.empty()) return {};
  if (config.samples < 1) throw Error("mc_errors: need at least one sample");
  const int levels = static_cast<int>(run.states.size());

  // prolongation chains level -> reference mesh (finest mesh plus uplifts)
  std::vector<RefinementMap> chain;
  for (int l = 0; l + 1 < levels; ++l) chain.push_back(run.states[static_cast<std::size_t>(l)].map_to_next);
  Mesh2D ref_mesh = *run.states.back().mesh;
  for (int u = 0; u < config.uplifts; ++u) {
    auto [refined, map] = uniform_refine_mapped(ref_mesh);
    chain.push_back(map);
    ref_mesh = std::move(refined);
  }
  const FESpace ref_space(ref_mesh);
  const SparseMat k1 = assemble_stiffness(ref_space, Eigen::VectorXd::Ones(ref_space.node_count()));

  const auto prolong_to_ref = [&](Eigen::VectorXd v, int level) {
    for (std::size_t c = static_cast<std::size_t>(level); c < chain.size(); ++c) {
      if (chain[c].identity && chain[c].vertex_parents.size() == static_cast<std::size_t>(v.size())) continue;
      v = prolong_vertex_values(chain[c], v);
    }
    return v;
  };

  const auto h1_sq = [&](const Eigen::VectorXd& full) {
    Eigen::VectorXd free(ref_space.free_count());
    for (int v = 0; v < ref_space.node_count(); ++v) {
      const int f = ref_space.free_index(v);
      if (f >= 0) free(f) = full(v);
    }
    return free.dot(k1 * free);
  };

  // which levels get evaluated
  std::vector<char> active(static_cast<std::size_t>(levels), 0);
  for (int l = 0; l < levels; ++l)
    if ((l % std::max(1, config.cadence)) == 0 || l + 1 == levels) active[static_cast<std::size_t>(l)] = 1;

  // per-sample squared errors, stored by sample index so the reduction order is
  // independent of the thread count
  std::vector<std::vector<double>> sq(static_cast<std::size_t>(levels),
                                      std::vector<double>(static_cast<std::size_t>(config.samples), 0.0));

  const auto worker = [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      GaussianSampler rng = GaussianSampler::substream(config.seed, static_cast<std::uint64_t>(i));
      const std::vector<double> y = sample_parameter(rng, scaling, config.widened_measure);
      const Eigen::VectorXd ref = reference_solve(y, field, ref_space, f);
      for (int l = 0; l < levels; ++l) {
        if (!active[static_cast<std::size_t>(l)]) continue;
        const AdaptState& state = run.states[static_cast<std::size_t>(l)];
        const Eigen::VectorXd coarse = evaluate_at_parameter(state.solution, scaling, y);
        const Eigen::VectorXd lifted = prolong_to_ref(coarse, l);
        sq[static_cast<std::size_t>(l)][static_cast<std::size_t>(i)] = h1_sq(ref - lifted);
      }
    }
  };

  const int threads = std::max(1, config.threads);
  if (threads == 1) {
    worker(0, config.samples);
  } else {
    std::vector<std::thread> pool;
    const int per = (config.samples + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const int begin = t * per;
      const int end = std::min(config.samples, begin + per);
      if (begin < end) pool.emplace_back(worker, begin, end);
    }
    for (auto& th : pool) th.join();
  }

  std::vector<MCError> out(static_cast<std::size_t>(levels));
  for (int l = 0; l < levels; ++l) {
    if (!active[static_cast<std::size_t>(l)]) {
      out[static_cast<std::size_t>(l)].error = kUnset;
      out[static_cast<std::size_t>(l)].stderr_sq = kUnset;
      continue;
    }
    const auto& xs = sq[static_cast<std::size_t>(l)];
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(config.samples);
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var = config.samples > 1 ? var / static_cast<double>(config.samples - 1) : 0.0;
    out[static_cast<std::size_t>(l)].error = std::sqrt(std::max(0.0, mean));
    out[static_cast<std::size_t>(l)].stderr_sq = std::sqrt(var / static_cast<double>(config.samples));
  }
  return out;
}

}  // namespace sgfem
