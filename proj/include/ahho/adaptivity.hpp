#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ahho/solver.hpp"

namespace ahho {

enum class Indicator { RT, Stabilized, TwoWellExtended, FhmModified };

const char* to_string(Indicator i);
Indicator indicator_from_string(const std::string& name);

struct EstimatorParams {
  double epsilon = 0.01;
  double theta = 0.5;
  Indicator indicator = Indicator::RT;
};

// Largest admissible epsilon: k+1, or min{k+1, (k+1)/(p-1)} for the stabilized indicator.
double max_epsilon(Indicator indicator, int k, double p);
// Throws std::invalid_argument naming the violated constraint. epsilon = 0 passes.
void validate(const EstimatorParams& params, int k, double p);

struct ElementEstimate {
  double volume = 0.0;     // |T|^{(eps p - p)/2} ||Pi_T^k (R u - u_T)||^p
  double stress = 0.0;     // |T|^{eps p'/2} ||sigma - DW(G u)||^{p'}
  double osc_f = 0.0;      // |T|^{p'/2} ||(1 - Pi_T^k) f||^{p'}
  double osc_g = 0.0;      // |T|^{1/2} sum over Neumann sides of ||(1 - Pi_F^k) g||^{p'}
  double dirichlet = 0.0;  // side terms carry |T|^{(eps p + 1 - p)/2}
  double jumps = 0.0;
  double traces = 0.0;
  double zeta = 0.0;       // |T| ||(1 - Pi_T^k) zeta||^2

  double total() const { return volume + stress + osc_f + osc_g + dirichlet + jumps + traces + zeta; }
};

struct Estimate {
  std::vector<ElementEstimate> elements;
  std::vector<double> eta;
  double total = 0.0;
};

Estimate estimate(const DiscreteProblem& problem, const Eigen::VectorXd& u, const StressField& sigma,
                  const EstimatorParams& params);

// Minimal set of triangles carrying theta of the total; ties favour the smaller index.
std::vector<int> mark_doerfler(const std::vector<double>& eta, double theta);

// I_{l+1} J_l u on the refined mesh with Dirichlet dofs reset to Pi_F^k u_D.
Eigen::VectorXd prolong(const DiscreteProblem& fine, const HhoSpace& coarse, const Eigen::VectorXd& u);

enum class Refinement { Adaptive, Uniform };

const char* to_string(Refinement r);
Refinement refinement_from_string(const std::string& name);

struct ProblemSetup {
  std::shared_ptr<const Triangulation> mesh;
  ProblemData data;
  ComponentMask dirichlet;
};

struct AhhoSettings {
  int degree = 0;
  Variant variant = Variant::RT;
  EstimatorParams estimator;
  Refinement mode = Refinement::Adaptive;
  int max_ndof = 10000;
  int max_levels = 100;
  double zero_estimator = 1e-20;
  SolverSettings solver;
  std::optional<QuadraturePolicy> quadrature;  // default_quadrature() when empty
};

struct LevelState {
  int level = 0;
  std::shared_ptr<const DiscreteProblem> problem;
  DiscreteSolution solution;
  StressField sigma;
  Estimate estimate;
  double stabilization = 0.0;  // s(u; u), zero for the RT variant
  std::vector<int> marked;
};

struct LevelSummary {
  int level = 0;
  int ndof = 0;
  int ntriangles = 0;
  double energy = 0.0;
  double estimator = 0.0;
  double stabilization = 0.0;
  int iterations = 0;
  double gradient_norm = 0.0;
  bool converged = false;
};

enum class StopReason { MaxNdof, MaxLevels, EstimatorZero, SolverFailure };

const char* to_string(StopReason r);

struct AhhoRun {
  std::vector<LevelSummary> levels;
  StopReason reason = StopReason::MaxLevels;
};

using LevelObserver = std::function<void(const LevelState&)>;

int hho_ndof(const Triangulation& mesh, int k, int m);

// SOLVE, ESTIMATE, MARK, REFINE until the next mesh exceeds max_ndof, max_levels are done,
// the estimator vanishes, or the solver fails.
AhhoRun run_ahho(const ProblemSetup& setup, const AhhoSettings& settings, const LevelObserver& observer = {});

}  // namespace ahho
