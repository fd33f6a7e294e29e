#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ahho/adaptivity.hpp"
#include "ahho/diagnostics.hpp"

namespace ahho {

struct Benchmark {
  std::string name;
  std::string description;
  ProblemSetup setup;
  Indicator indicator = Indicator::RT;  // estimator of the RT variant
  std::optional<ExactSolution> exact;
  std::optional<double> reference_energy;
  bool has_dual = false;                // W* available for the guaranteed bound
};

std::vector<std::string> benchmark_names();
// Throws std::invalid_argument for unknown names.
Benchmark make_benchmark(const std::string& name);

// Estimator matching the variant: the stabilized indicator for the stabilized variant,
// the benchmark's own indicator otherwise.
Indicator indicator_for(const Benchmark& benchmark, Variant variant);

}  // namespace ahho
