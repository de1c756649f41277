#include "sgfem/runner.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "sgfem/errors.hpp"

namespace sgfem {

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string dims_string(const std::vector<int>& dims) {
  std::string s = "(";
  for (std::size_t m = 0; m < dims.size(); ++m) {
    if (m > 0) s += ",";
    s += std::to_string(dims[m]);
  }
  s += ")";
  return s;
}

}  // namespace

ProblemSetup make_setup(const RunConfig& config) {
  validate_config(config);
  ProblemSetup setup;
  setup.field = benchmark_modes(config.field_modes, config.field_sigma);
  setup.scaling = ModeScaling(setup.field.sup_norms, config.field_rho, config.field_theta);
  setup.dhat = select_dhat(setup.field, setup.scaling, config.field_tail_threshold);
  setup.initial_mesh = config.domain == "lshape" ? initial_lshape(config.mesh_h0)
                                                 : initial_unit_square(config.mesh_h0);
  setup.source = [](const Vec2&) { return 1.0; };
  return setup;
}

BenchmarkArtifacts run_pipeline(const RunConfig& config) {
  const ProblemSetup setup = make_setup(config);

  AdaptConfig adapt;
  adapt.theta_det = config.theta_det;
  adapt.theta_sto = config.theta_sto;
  adapt.c_eq = config.c_eq;
  adapt.lookahead.assign(static_cast<std::size_t>(std::max(0, config.field_modes)), config.lookahead);
  adapt.max_iterations = config.max_iterations;
  adapt.initial_degree = config.field_modes > 0 ? config.initial_degree : 1;
  adapt.omega = config.omega;
  adapt.tau = config.tau;
  adapt.solver_tol = config.solver_tol;
  adapt.solver_maxit = config.solver_maxit;
  adapt.stop_eta = config.stop_eta;
  adapt.stop_dofs = config.stop_dofs;

  BenchmarkArtifacts artifacts;
  artifacts.run = run_adaptive(setup, adapt);

  MCConfig mc;
  mc.samples = config.mc_samples;
  mc.seed = config.mc_seed;
  mc.uplifts = config.mc_uplifts;
  mc.cadence = config.mc_cadence;
  mc.threads = config.threads;
  artifacts.mc = mc_errors(artifacts.run, setup.field, setup.scaling, setup.source, mc);

  if (config.field_modes > 0 && !artifacts.run.states.empty()) {
    const Mesh2D& final_mesh = *artifacts.run.states.back().mesh;
    const int samples = std::min(200, config.mc_samples);
    artifacts.truncation = coefficient_residual(artifacts.run.final_coefficient, setup.field, setup.scaling,
                                                final_mesh, samples, config.mc_seed + 101);
    artifacts.truncation_chaos =
        truncation_residual(setup.field, setup.scaling, setup.dhat, final_mesh, samples, config.mc_seed + 101);
  }

  // complete the ledger: MC columns, quasi-error and realized reduction factors
  artifacts.ledger = artifacts.run.ledger;
  auto& rows = artifacts.ledger.rows;
  for (std::size_t l = 0; l < rows.size(); ++l) {
    if (l < artifacts.mc.size() && !std::isnan(artifacts.mc[l].error)) {
      rows[l].mc_error = artifacts.mc[l].error;
      rows[l].mc_stderr = artifacts.mc[l].stderr_sq;
      const double q_sq = rows[l].mc_error * rows[l].mc_error +
                          config.omega * (rows[l].eta_det * rows[l].eta_det +
                                          config.tau * rows[l].eta_sto * rows[l].eta_sto);
      rows[l].quasi_err = std::sqrt(q_sq);
    }
  }
  for (std::size_t l = 0; l + 1 < rows.size(); ++l) {
    if (!std::isnan(rows[l].quasi_err) && !std::isnan(rows[l + 1].quasi_err) && rows[l].quasi_err > 0.0) {
      rows[l].delta = (rows[l + 1].quasi_err * rows[l + 1].quasi_err) / (rows[l].quasi_err * rows[l].quasi_err);
    }
  }
  return artifacts;
}

std::string ledger_csv(const QuasiErrorLedger& ledger) {
  std::string out = "iter,branch,n_triangles,dims,dofs,eta_det,eta_sto,eta,mc_error,mc_stderr,quasi_err,delta\n";
  for (const auto& row : ledger.rows) {
    out += std::to_string(row.iter) + "," + row.branch + "," + std::to_string(row.n_triangles) + ",\"" +
           dims_string(row.dims) + "\"," + std::to_string(row.dofs) + "," + fmt(row.eta_det) + "," +
           fmt(row.eta_sto) + "," + fmt(row.eta) + "," + fmt(row.mc_error) + "," + fmt(row.mc_stderr) + "," +
           fmt(row.quasi_err) + "," + fmt(row.delta) + "\n";
  }
  return out;
}

std::string summary_json(const RunConfig& config, const BenchmarkArtifacts& artifacts) {
  nlohmann::json j;
  j["config"] = {{"domain", config.domain},
                 {"mesh.h0", config.mesh_h0},
                 {"field.modes", config.field_modes},
                 {"field.sigma", config.field_sigma},
                 {"field.rho", config.field_rho},
                 {"field.theta", config.field_theta},
                 {"field.tail_threshold", config.field_tail_threshold},
                 {"fe.order", config.fe_order},
                 {"adapt.theta_det", config.theta_det},
                 {"adapt.theta_sto", config.theta_sto},
                 {"adapt.c_eq", config.c_eq},
                 {"adapt.lookahead", config.lookahead},
                 {"adapt.max_iterations", config.max_iterations},
                 {"adapt.omega", config.omega},
                 {"adapt.tau", config.tau},
                 {"adapt.initial_degree", config.initial_degree},
                 {"solver.tol", config.solver_tol},
                 {"solver.maxit", config.solver_maxit},
                 {"mc.samples", config.mc_samples},
                 {"mc.seed", config.mc_seed},
                 {"mc.uplifts", config.mc_uplifts},
                 {"mc.cadence", config.mc_cadence},
                 {"threads", config.threads}};

  j["aborted"] = artifacts.run.aborted;
  if (artifacts.run.aborted) j["abort_reason"] = artifacts.run.abort_reason;
  j["truncation_residual"] = artifacts.truncation;
  j["truncation_residual_chaos_only"] = artifacts.truncation_chaos;

  nlohmann::json iters = nlohmann::json::array();
  const auto put = [](nlohmann::json& obj, const char* key, double v) {
    if (!std::isnan(v)) obj[key] = v;
  };
  for (const auto& row : artifacts.ledger.rows) {
    nlohmann::json r;
    r["iter"] = row.iter;
    r["branch"] = row.branch;
    r["n_triangles"] = row.n_triangles;
    r["dims"] = row.dims;
    r["dofs"] = row.dofs;
    r["eta_det"] = row.eta_det;
    r["eta_det_vol_sq"] = row.eta_det_vol;
    r["eta_det_jump_sq"] = row.eta_det_jump;
    r["eta_sto"] = row.eta_sto;
    r["eta"] = row.eta;
    r["marked_elements"] = row.marked_elements;
    r["marked_modes"] = row.marked_modes;
    r["sto_fallback_all"] = row.sto_fallback_all;
    put(r, "mc_error", row.mc_error);
    put(r, "mc_stderr", row.mc_stderr);
    put(r, "quasi_err", row.quasi_err);
    put(r, "delta", row.delta);
    put(r, "energy", row.energy);
    put(r, "b_increment", row.b_increment);
    put(r, "orth_defect", row.orth_defect);
    put(r, "c_lambda", row.c_lambda);
    iters.push_back(std::move(r));
  }
  j["iterations"] = std::move(iters);

  if (!artifacts.ledger.rows.empty()) {
    const auto& last = artifacts.ledger.rows.back();
    j["final"] = {{"iter", last.iter},     {"dofs", last.dofs}, {"n_triangles", last.n_triangles},
                  {"eta", last.eta},       {"dims", last.dims}, {"eta_det", last.eta_det},
                  {"eta_sto", last.eta_sto}};
    if (!std::isnan(last.mc_error)) j["final"]["mc_error"] = last.mc_error;
  }
  return j.dump(2) + "\n";
}

namespace {

struct PlotSeries {
  std::string color;
  std::string label;
  std::vector<std::pair<double, double>> points;  // (dofs, value), positive
};

}  // namespace

std::string convergence_svg(const QuasiErrorLedger& ledger) {
  std::vector<PlotSeries> series(2);
  series[0] = {"#1c6fd6", "estimator", {}};
  series[1] = {"#e07b00", "sampled error", {}};
  for (const auto& row : ledger.rows) {
    if (row.dofs > 0 && row.eta > 0.0) series[0].points.push_back({static_cast<double>(row.dofs), row.eta});
    if (row.dofs > 0 && !std::isnan(row.mc_error) && row.mc_error > 0.0)
      series[1].points.push_back({static_cast<double>(row.dofs), row.mc_error});
  }

  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      x0 = std::min(x0, std::log10(x));
      x1 = std::max(x1, std::log10(x));
      y0 = std::min(y0, std::log10(y));
      y1 = std::max(y1, std::log10(y));
    }
  }
  if (x1 < x0) {
    x0 = 0.0;
    x1 = 1.0;
    y0 = -1.0;
    y1 = 0.0;
  }
  if (x1 - x0 < 0.5) x1 = x0 + 0.5;
  if (y1 - y0 < 0.5) y1 = y0 + 0.5;
  const double w = 640, h = 480, ml = 70, mr = 20, mt = 20, mb = 50;
  const auto px = [&](double lx) { return ml + (lx - x0) / (x1 - x0) * (w - ml - mr); };
  const auto py = [&](double ly) { return h - mb - (ly - y0) / (y1 - y0) * (h - mt - mb); };

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" "
                    "viewBox=\"0 0 640 480\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg += "<rect width=\"640\" height=\"480\" fill=\"white\"/>\n";
  // axes
  svg += "<line x1=\"" + fmt(ml) + "\" y1=\"" + fmt(h - mb) + "\" x2=\"" + fmt(w - mr) + "\" y2=\"" +
         fmt(h - mb) + "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + fmt(ml) + "\" y1=\"" + fmt(mt) + "\" x2=\"" + fmt(ml) + "\" y2=\"" + fmt(h - mb) +
         "\" stroke=\"black\"/>\n";
  // decade ticks
  for (int d = static_cast<int>(std::ceil(x0)); d <= static_cast<int>(std::floor(x1)); ++d) {
    svg += "<line x1=\"" + fmt(px(d)) + "\" y1=\"" + fmt(h - mb) + "\" x2=\"" + fmt(px(d)) + "\" y2=\"" +
           fmt(h - mb + 5) + "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + fmt(px(d)) + "\" y=\"" + fmt(h - mb + 18) + "\" text-anchor=\"middle\">1e" +
           std::to_string(d) + "</text>\n";
  }
  for (int d = static_cast<int>(std::ceil(y0)); d <= static_cast<int>(std::floor(y1)); ++d) {
    svg += "<line x1=\"" + fmt(ml - 5) + "\" y1=\"" + fmt(py(d)) + "\" x2=\"" + fmt(ml) + "\" y2=\"" +
           fmt(py(d)) + "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + fmt(ml - 8) + "\" y=\"" + fmt(py(d) + 4) + "\" text-anchor=\"end\">1e" +
           std::to_string(d) + "</text>\n";
  }
  svg += "<text x=\"" + fmt((ml + w - mr) / 2) + "\" y=\"" + fmt(h - 10) +
         "\" text-anchor=\"middle\">degrees of freedom</text>\n";

  // slope -1/2 guide anchored at the first estimator point
  if (!series[0].points.empty()) {
    const double ax = std::log10(series[0].points.front().first);
    const double ay = std::log10(series[0].points.front().second);
    const double bx = x1;
    const double by = ay - 0.5 * (bx - ax);
    svg += "<line x1=\"" + fmt(px(ax)) + "\" y1=\"" + fmt(py(ay)) + "\" x2=\"" + fmt(px(bx)) + "\" y2=\"" +
           fmt(py(by)) + "\" stroke=\"#999999\" stroke-dasharray=\"6 4\"/>\n";
    svg += "<text x=\"" + fmt(px(bx) - 70) + "\" y=\"" + fmt(py(by) - 6) +
           "\" fill=\"#999999\">slope -1/2</text>\n";
  }

  int legend_y = 36;
  for (const auto& s : series) {
    if (s.points.empty()) continue;
    std::string path;
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      path += (i == 0 ? "M" : "L");
      path += fmt(px(std::log10(s.points[i].first))) + " " + fmt(py(std::log10(s.points[i].second))) + " ";
    }
    svg += "<path d=\"" + path + "\" fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1.5\"/>\n";
    for (const auto& [x, y] : s.points) {
      svg += "<circle cx=\"" + fmt(px(std::log10(x))) + "\" cy=\"" + fmt(py(std::log10(y))) +
             "\" r=\"3\" fill=\"" + s.color + "\"/>\n";
    }
    svg += "<rect x=\"" + fmt(w - 180) + "\" y=\"" + fmt(legend_y - 9) + "\" width=\"12\" height=\"4\" fill=\"" +
           s.color + "\"/>\n";
    svg += "<text x=\"" + fmt(w - 160) + "\" y=\"" + fmt(legend_y) + "\">" + s.label + "</text>\n";
    legend_y += 18;
  }
  svg += "</svg>\n";
  return svg;
}

int run_benchmark(const RunConfig& config, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  BenchmarkArtifacts artifacts;
  int exit_code = 0;
  try {
    artifacts = run_pipeline(config);
    if (artifacts.run.aborted) exit_code = 2;
  } catch (const Error& err) {
    // flush whatever exists before reporting failure
    std::ofstream fail(fs::path(out_dir) / "error.txt");
    fail << err.what() << "\n";
    throw;
  }

  {
    std::ofstream out(fs::path(out_dir) / "ledger.csv", std::ios::binary);
    out << ledger_csv(artifacts.ledger);
  }
  {
    std::ofstream out(fs::path(out_dir) / "summary.json", std::ios::binary);
    out << summary_json(config, artifacts);
  }
  for (std::size_t l = 0; l < artifacts.run.states.size(); ++l) {
    char name[32];
    std::snprintf(name, sizeof(name), "mesh_%03zu.txt", l + 1);
    write_mesh_file(*artifacts.run.states[l].mesh, (fs::path(out_dir) / name).string());
  }
  if (config.write_svg) {
    std::ofstream out(fs::path(out_dir) / "convergence.svg", std::ios::binary);
    out << convergence_svg(artifacts.ledger);
  }
  return exit_code;
}

}  // namespace sgfem
