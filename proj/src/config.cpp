#include "sgfem/config.hpp"

#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include "sgfem/errors.hpp"

namespace sgfem {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value);

template <>
double parse_number<double>(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &pos);
  } catch (const std::exception&) {
    throw ValidationError(key, "not a number: '" + value + "'");
  }
  if (pos != value.size()) throw ValidationError(key, "trailing characters in '" + value + "'");
  return v;
}

template <>
long parse_number<long>(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  long v = 0;
  try {
    v = std::stol(value, &pos);
  } catch (const std::exception&) {
    throw ValidationError(key, "not an integer: '" + value + "'");
  }
  if (pos != value.size()) throw ValidationError(key, "trailing characters in '" + value + "'");
  return v;
}

template <>
int parse_number<int>(const std::string& key, const std::string& value) {
  return static_cast<int>(parse_number<long>(key, value));
}

template <>
std::uint64_t parse_number<std::uint64_t>(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(value, &pos);
  } catch (const std::exception&) {
    throw ValidationError(key, "not an unsigned integer: '" + value + "'");
  }
  if (pos != value.size()) throw ValidationError(key, "trailing characters in '" + value + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ValidationError(key, "expected a boolean, got '" + value + "'");
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  RunConfig config;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(line_no, "expected key=value, got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError(line_no, "empty key");

    if (key == "domain") {
      config.domain = value;
    } else if (key == "mesh.h0") {
      config.mesh_h0 = parse_number<double>(key, value);
    } else if (key == "field.modes") {
      config.field_modes = parse_number<int>(key, value);
    } else if (key == "field.sigma") {
      config.field_sigma = parse_number<double>(key, value);
    } else if (key == "field.rho") {
      config.field_rho = parse_number<double>(key, value);
    } else if (key == "field.theta") {
      config.field_theta = parse_number<double>(key, value);
    } else if (key == "field.tail_threshold") {
      config.field_tail_threshold = parse_number<double>(key, value);
    } else if (key == "fe.order") {
      config.fe_order = parse_number<int>(key, value);
    } else if (key == "adapt.theta_det") {
      config.theta_det = parse_number<double>(key, value);
    } else if (key == "adapt.theta_sto") {
      config.theta_sto = parse_number<double>(key, value);
    } else if (key == "adapt.c_eq") {
      config.c_eq = parse_number<double>(key, value);
    } else if (key == "adapt.lookahead") {
      config.lookahead = parse_number<int>(key, value);
    } else if (key == "adapt.max_iterations") {
      config.max_iterations = parse_number<int>(key, value);
    } else if (key == "adapt.omega") {
      config.omega = parse_number<double>(key, value);
    } else if (key == "adapt.tau") {
      config.tau = parse_number<double>(key, value);
    } else if (key == "adapt.stop_eta") {
      config.stop_eta = parse_number<double>(key, value);
    } else if (key == "adapt.stop_dofs") {
      config.stop_dofs = parse_number<long>(key, value);
    } else if (key == "adapt.initial_degree") {
      config.initial_degree = parse_number<int>(key, value);
    } else if (key == "solver.tol") {
      config.solver_tol = parse_number<double>(key, value);
    } else if (key == "solver.maxit") {
      config.solver_maxit = parse_number<int>(key, value);
    } else if (key == "mc.samples") {
      config.mc_samples = parse_number<int>(key, value);
    } else if (key == "mc.seed") {
      config.mc_seed = parse_number<std::uint64_t>(key, value);
    } else if (key == "mc.uplifts") {
      config.mc_uplifts = parse_number<int>(key, value);
    } else if (key == "mc.cadence") {
      config.mc_cadence = parse_number<int>(key, value);
    } else if (key == "threads") {
      config.threads = parse_number<int>(key, value);
    } else if (key == "output.svg") {
      config.write_svg = parse_bool(key, value);
    } else {
      throw ParseError(line_no, "unknown key '" + key + "'");
    }
  }
  validate_config(config);
  return config;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("load_config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

void validate_config(const RunConfig& c) {
  if (c.domain != "lshape" && c.domain != "unit-square")
    throw ValidationError("domain", "must be 'lshape' or 'unit-square'");
  if (!(c.mesh_h0 > 0.0) || c.mesh_h0 > 1.0) throw ValidationError("mesh.h0", "must be in (0, 1]");
  if (c.field_modes < 0) throw ValidationError("field.modes", "must be nonnegative");
  if (c.field_modes > 0 && !(c.field_sigma > 1.0)) throw ValidationError("field.sigma", "must satisfy sigma > 1");
  if (!(c.field_rho > 0.0) || c.field_rho > 1.0) throw ValidationError("field.rho", "must be in (0, 1]");
  if (c.field_theta < 0.0 || c.field_theta >= 1.0) throw ValidationError("field.theta", "must be in [0, 1)");
  if (!(c.field_tail_threshold > 0.0)) throw ValidationError("field.tail_threshold", "must be positive");
  if (c.fe_order != 1)
    throw ValidationError("fe.order", "only order 1 is implemented in this build");
  if (!(c.theta_det > 0.0) || c.theta_det > 1.0) throw ValidationError("adapt.theta_det", "must be in (0, 1]");
  if (!(c.theta_sto > 0.0) || c.theta_sto > 1.0) throw ValidationError("adapt.theta_sto", "must be in (0, 1]");
  if (!(c.c_eq > 0.0)) throw ValidationError("adapt.c_eq", "must be positive");
  if (c.lookahead < 1) throw ValidationError("adapt.lookahead", "must be >= 1");
  if (c.max_iterations < 1) throw ValidationError("adapt.max_iterations", "must be >= 1");
  if (!(c.omega > 0.0)) throw ValidationError("adapt.omega", "must be positive");
  if (c.tau < 0.0) throw ValidationError("adapt.tau", "must be nonnegative");
  if (c.stop_eta < 0.0) throw ValidationError("adapt.stop_eta", "must be nonnegative");
  if (c.stop_dofs < 0) throw ValidationError("adapt.stop_dofs", "must be nonnegative");
  if (c.initial_degree < 1) throw ValidationError("adapt.initial_degree", "must be >= 1");
  if (!(c.solver_tol > 0.0)) throw ValidationError("solver.tol", "must be positive");
  if (c.solver_maxit < 1) throw ValidationError("solver.maxit", "must be >= 1");
  if (c.mc_samples < 1) throw ValidationError("mc.samples", "must be >= 1");
  if (c.mc_uplifts < 0) throw ValidationError("mc.uplifts", "must be nonnegative");
  if (c.mc_cadence < 1) throw ValidationError("mc.cadence", "must be >= 1");
  if (c.threads < 1) throw ValidationError("threads", "must be >= 1");
}

}  // namespace sgfem
