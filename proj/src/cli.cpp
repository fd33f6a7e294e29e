#include "ahho/cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "json.hpp"

namespace ahho {

namespace {

template <class T>
T read_as(const YAML::Node& node, const std::string& key, const char* expected) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("key '" + key + "': expected " + expected);
  }
}

Variant variant_from_string(const std::string& s) {
  if (s == "rt") return Variant::RT;
  if (s == "stabilized") return Variant::Stabilized;
  throw ConfigError("variant must be 'rt' or 'stabilized', got '" + s + "'");
}

Optimizer optimizer_from_string(const std::string& s) {
  if (s == "newton") return Optimizer::Newton;
  if (s == "lbfgs") return Optimizer::LBFGS;
  throw ConfigError("solver.optimizer must be 'newton' or 'lbfgs', got '" + s + "'");
}

void read_solver(const YAML::Node& node, SolverOptions& s) {
  if (!node.IsMap()) throw ConfigError("key 'solver': expected a mapping");
  for (const auto& item : node) {
    const std::string key = item.first.as<std::string>();
    const std::string full = "solver." + key;
    if (key == "optimizer") s.optimizer = optimizer_from_string(read_as<std::string>(item.second, full, "a string"));
    else if (key == "gradient_tolerance") s.gradient_tolerance = read_as<double>(item.second, full, "a number");
    else if (key == "max_iterations") s.max_iterations = read_as<int>(item.second, full, "an integer");
    else if (key == "lbfgs_memory") s.lbfgs_memory = read_as<int>(item.second, full, "an integer");
    else throw ConfigError("unknown key '" + full + "'");
  }
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string optional_field(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

std::string mesh_name(int level) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "level_%03d.mesh", level);
  return buf;
}

nlohmann::ordered_json config_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["benchmark"] = c.benchmark;
  j["k"] = c.degree;
  j["variant"] = to_string(c.variant);
  j["mode"] = to_string(c.mode);
  j["theta"] = c.theta;
  j["epsilon"] = c.epsilon;
  j["max_ndof"] = c.max_ndof;
  j["max_levels"] = c.max_levels;
  j["output"] = c.output;
  j["record_time"] = c.record_time;
  j["solver"] = {{"optimizer", to_string(c.solver.optimizer)},
                 {"gradient_tolerance", c.solver.gradient_tolerance},
                 {"max_iterations", c.solver.max_iterations},
                 {"lbfgs_memory", c.solver.lbfgs_memory}};
  return j;
}

}  // namespace

RunConfig parse_config(const std::string& text, const ConfigOverrides& overrides) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("invalid YAML: ") + e.what());
  }
  if (root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  if (!root.IsMap()) throw ConfigError("config must be a mapping");
  for (const auto& [key, value] : overrides) root[key] = value;
  RunConfig c;
  bool auto_epsilon = true;
  for (const auto& item : root) {
    const std::string key = item.first.as<std::string>();
    const YAML::Node& v = item.second;
    if (key == "benchmark") c.benchmark = read_as<std::string>(v, key, "a string");
    else if (key == "k") c.degree = read_as<int>(v, key, "an integer");
    else if (key == "variant") c.variant = variant_from_string(read_as<std::string>(v, key, "a string"));
    else if (key == "mode") {
      const std::string mode = read_as<std::string>(v, key, "a string");
      try {
        c.mode = refinement_from_string(mode);
      } catch (const std::invalid_argument&) {
        throw ConfigError("mode must be 'adaptive' or 'uniform', got '" + mode + "'");
      }
    } else if (key == "theta") c.theta = read_as<double>(v, key, "a number");
    else if (key == "epsilon") {
      if (v.IsScalar() && v.Scalar() == "auto") continue;
      c.epsilon = read_as<double>(v, key, "a number or 'auto'");
      auto_epsilon = false;
    } else if (key == "max_ndof") c.max_ndof = read_as<int>(v, key, "an integer");
    else if (key == "max_levels") c.max_levels = read_as<int>(v, key, "an integer");
    else if (key == "output") c.output = read_as<std::string>(v, key, "a string");
    else if (key == "record_time") c.record_time = read_as<bool>(v, key, "a boolean");
    else if (key == "solver") read_solver(v, c.solver);
    else throw ConfigError("unknown key '" + key + "'");
  }
  if (auto_epsilon) c.epsilon = (c.degree + 1) / 100.0;
  return c;
}

RunConfig load_config(const std::string& path, const ConfigOverrides& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), overrides);
}

std::string serialize_config(const RunConfig& c) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "benchmark" << YAML::Value << c.benchmark;
  out << YAML::Key << "k" << YAML::Value << c.degree;
  out << YAML::Key << "variant" << YAML::Value << to_string(c.variant);
  out << YAML::Key << "mode" << YAML::Value << to_string(c.mode);
  out << YAML::Key << "theta" << YAML::Value << c.theta;
  out << YAML::Key << "epsilon" << YAML::Value << c.epsilon;
  out << YAML::Key << "max_ndof" << YAML::Value << c.max_ndof;
  out << YAML::Key << "max_levels" << YAML::Value << c.max_levels;
  out << YAML::Key << "output" << YAML::Value << c.output;
  out << YAML::Key << "record_time" << YAML::Value << c.record_time;
  out << YAML::Key << "solver" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "optimizer" << YAML::Value << to_string(c.solver.optimizer);
  out << YAML::Key << "gradient_tolerance" << YAML::Value << c.solver.gradient_tolerance;
  out << YAML::Key << "max_iterations" << YAML::Value << c.solver.max_iterations;
  out << YAML::Key << "lbfgs_memory" << YAML::Value << c.solver.lbfgs_memory;
  out << YAML::EndMap << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

void validate(const RunConfig& c) {
  if (c.benchmark.empty()) throw ConfigError("benchmark is required");
  Benchmark b;
  try {
    b = make_benchmark(c.benchmark);
  } catch (const std::invalid_argument&) {
    std::string list;
    for (const std::string& n : benchmark_names()) list += (list.empty() ? "" : ", ") + n;
    throw ConfigError("unknown benchmark '" + c.benchmark + "' (expected one of " + list + ")");
  }
  if (c.degree < 0 || c.degree > 8) throw ConfigError("k must satisfy 0 ≤ k ≤ 8");
  EstimatorParams params;
  params.theta = c.theta;
  params.epsilon = c.epsilon;
  params.indicator = indicator_for(b, c.variant);
  try {
    validate(params, c.degree, b.setup.data.density->growth());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (c.max_ndof <= 0) throw ConfigError("max_ndof must be positive");
  if (c.max_levels <= 0) throw ConfigError("max_levels must be positive");
  if (c.output.empty()) throw ConfigError("output must be a non-empty path");
  if (!(c.solver.gradient_tolerance > 0)) throw ConfigError("solver.gradient_tolerance must be positive");
  if (c.solver.max_iterations <= 0) throw ConfigError("solver.max_iterations must be positive");
  if (c.solver.lbfgs_memory <= 0) throw ConfigError("solver.lbfgs_memory must be positive");
}

std::vector<std::string> config_warnings(const RunConfig& c) {
  std::vector<std::string> out;
  if (c.epsilon == 0.0) out.push_back("epsilon = 0 is outside the convergence theory of the adaptive loop");
  if (c.record_time) out.push_back("record_time makes convergence.csv differ between reruns");
  return out;
}

AhhoSettings ahho_settings(const RunConfig& c, const Benchmark& b) {
  AhhoSettings s;
  s.degree = c.degree;
  s.variant = c.variant;
  s.estimator.epsilon = c.epsilon;
  s.estimator.theta = c.theta;
  s.estimator.indicator = indicator_for(b, c.variant);
  s.mode = c.mode;
  s.max_ndof = c.max_ndof;
  s.max_levels = c.max_levels;
  s.solver.optimizer = c.solver.optimizer;
  s.solver.gradient_tolerance = c.solver.gradient_tolerance;
  s.solver.max_iterations = c.solver.max_iterations;
  s.solver.lbfgs_memory = c.solver.lbfgs_memory;
  return s;
}

LevelReport report_level(const Benchmark& b, const LevelState& state) {
  const DiscreteProblem& problem = *state.problem;
  const HhoSpace& s = problem.space();
  LevelReport r;
  r.level = state.level;
  r.ndof = s.ndof();
  r.ntriangles = s.mesh().num_triangles();
  r.energy = state.solution.energy;
  r.estimator = state.estimate.total;
  if (problem.stabilized()) r.stabilization = state.stabilization;
  if (b.exact) {
    r.errors = error_norms(problem, state.solution.u, state.solution.energy, *b.exact);
    const LowerBound leb = lower_energy_bound(problem, state.solution.u, state.solution.energy, *b.exact);
    r.leb = leb.with_oscillation;
    r.leb_without_oscillation = leb.without_oscillation;
  } else if (b.reference_energy) {
    r.errors.energy = std::abs(*b.reference_energy - state.solution.energy);
  }
  if (b.has_dual && !problem.stabilized())
    r.rhs = dual_bound(problem, state.solution.u, state.solution.energy, state.sigma).rhs;
  return r;
}

std::string csv_header() {
  return "level,ndof,ntriangles,energy,estimator,stab,err_energy,err_grad_Lp,err_stress_Lpprime,err_vol_L2,leb,rhs,"
         "seconds";
}

std::string csv_row(const LevelReport& r) {
  std::string row = std::to_string(r.level) + "," + std::to_string(r.ndof) + "," + std::to_string(r.ntriangles) + ",";
  row += format_number(r.energy) + "," + format_number(r.estimator);
  for (const std::optional<double>& v : {r.stabilization, r.errors.energy, r.errors.gradient, r.errors.stress,
                                         r.errors.volume, r.leb, r.rhs, r.seconds})
    row += "," + optional_field(v);
  return row;
}

RunOutcome run(const RunConfig& config, std::ostream& log) {
  validate(config);
  for (const std::string& w : config_warnings(config)) log << "warning: " << w << "\n";
  const Benchmark b = make_benchmark(config.benchmark);
  const std::filesystem::path dir(config.output);
  std::filesystem::create_directories(dir);
  std::ofstream csv(dir / "convergence.csv");
  if (!csv) throw std::runtime_error("cannot write " + (dir / "convergence.csv").string());
  csv << csv_header() << "\n" << std::flush;

  RunOutcome outcome;
  auto start = std::chrono::steady_clock::now();
  const AhhoRun result = run_ahho(b.setup, ahho_settings(config, b), [&](const LevelState& state) {
    if (!state.solution.converged) {
      log << "level " << state.level << ": solver did not converge (gradient norm "
          << format_number(state.solution.gradient_norm) << ")\n";
      return;
    }
    LevelReport r = report_level(b, state);
    const auto now = std::chrono::steady_clock::now();
    if (config.record_time) r.seconds = std::chrono::duration<double>(now - start).count();
    csv << csv_row(r) << "\n" << std::flush;
    std::ofstream mesh(dir / mesh_name(state.level));
    state.problem->space().mesh().write(mesh);
    log << "level " << r.level << ": ndof " << r.ndof << ", energy " << format_number(r.energy) << ", estimator "
        << format_number(r.estimator) << "\n";
    outcome.reports.push_back(std::move(r));
    start = std::chrono::steady_clock::now();
  });
  outcome.reason = result.reason;
  outcome.exit_code = result.reason == StopReason::SolverFailure ? 2 : 0;
  if (config.mode == Refinement::Uniform && outcome.reports.size() >= 3) {
    std::vector<double> energies;
    for (const LevelReport& r : outcome.reports) energies.push_back(r.energy);
    outcome.extrapolation = aitken_extrapolate(energies);
  }

  nlohmann::ordered_json j;
  j["config"] = config_json(config);
  j["benchmark"] = {{"name", b.name},
                    {"description", b.description},
                    {"initial_mesh",
                     {{"vertices", b.setup.mesh->num_vertices()},
                      {"triangles", b.setup.mesh->num_triangles()},
                      {"file", mesh_name(0)}}}};
  if (b.reference_energy) j["benchmark"]["reference_energy"] = *b.reference_energy;
  j["result"] = {{"levels", outcome.reports.size()}, {"stop_reason", to_string(outcome.reason)}};
  if (!outcome.reports.empty()) j["result"]["final_energy"] = outcome.reports.back().energy;
  if (outcome.extrapolation)
    j["result"]["aitken"] = {{"value", outcome.extrapolation->value}, {"degenerate", outcome.extrapolation->degenerate}};
  std::ofstream(dir / "run.json") << j.dump(2) << "\n";
  log << "stopped: " << to_string(outcome.reason) << "\n";
  return outcome;
}

}  // namespace ahho
