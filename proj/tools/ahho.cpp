#include <iostream>
#include <tuple>
#include <vector>

#include "CLI11.hpp"
#include "ahho/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Adaptive HHO for convex minimization with p-growth"};
  app.require_subcommand(1);

  CLI::App* list = app.add_subcommand("list", "List the registered benchmarks");
  CLI::App* run = app.add_subcommand("run", "Run a benchmark and write convergence.csv, meshes and run.json");

  std::string config_path;
  std::string benchmark, degree, mode, theta, eps, max_ndof, variant, output;
  bool record_time = false;
  run->add_option("--config", config_path, "YAML run configuration")->check(CLI::ExistingFile);
  const std::vector<std::tuple<const char*, const char*, std::string*, const char*>> flags{
      {"--benchmark", "benchmark", &benchmark, "Benchmark name"},
      {"--degree", "k", &degree, "Polynomial degree k"},
      {"--mode", "mode", &mode, "adaptive or uniform"},
      {"--theta", "theta", &theta, "Doerfler bulk parameter"},
      {"--eps", "epsilon", &eps, "Indicator exponent epsilon, or auto"},
      {"--max-ndof", "max_ndof", &max_ndof, "Stop before the mesh exceeds this many dofs"},
      {"--variant", "variant", &variant, "rt or stabilized"},
      {"--out", "output", &output, "Output directory"}};
  std::vector<std::pair<CLI::Option*, const char*>> options;
  for (const auto& [flag, key, target, help] : flags) options.emplace_back(run->add_option(flag, *target, help), key);
  run->add_flag("--record-time", record_time, "Fill the seconds column");

  CLI11_PARSE(app, argc, argv);

  if (*list) {
    for (const std::string& name : ahho::benchmark_names())
      std::cout << name << ": " << ahho::make_benchmark(name).description << "\n";
    return 0;
  }

  try {
    ahho::ConfigOverrides overrides;
    for (const auto& [option, key] : options)
      if (*option) overrides.emplace_back(key, option->as<std::string>());
    if (record_time) overrides.emplace_back("record_time", "true");
    const ahho::RunConfig config =
        config_path.empty() ? ahho::parse_config("", overrides) : ahho::load_config(config_path, overrides);
    return ahho::run(config, std::cout).exit_code;
  } catch (const ahho::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
