#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "ahho/solver.hpp"

namespace ahho {

struct ExactSolution {
  Field u;
  JacobianField gradient;
  JacobianField stress;          // DW(grad u) when empty
  std::optional<double> energy;  // minimal energy E(u)
};

struct ErrorNorms {
  std::optional<double> energy;    // |E(u) - E_l(u_l)|
  std::optional<double> gradient;  // ||grad u - G u_l||_{L^p}
  std::optional<double> stress;    // ||sigma - DW(G u_l)||_{L^p'}
  std::optional<double> volume;    // ||u - u_T||_{L^2}
};

// Quadrature of degree ceil(p)(k+1)+4 unless `degree` is given.
ErrorNorms error_norms(const DiscreteProblem& problem, const Eigen::VectorXd& u, double discrete_energy,
                       const ExactSolution& exact, int degree = -1);

// osc(f) = (sum_T |T|^{1/2} ||(1 - Pi_T^k) f||^{p'})^{1/p'} with f the load plus the lower-order
// term's load lower_weight * zeta.
double oscillation_volume(const DiscreteProblem& problem);
// osc_N(g) = (sum_F h_F ||(1 - Pi_F^k) g||^{p'})^{1/p'} over sides with unconstrained components.
double oscillation_neumann(const DiscreteProblem& problem);

struct LowerBound {
  double with_oscillation = 0.0;  // C_osc = 1
  double without_oscillation = 0.0;
};

// E_l(u_l) + int (1 - Pi_Sigma) DW(G u_l) : grad u [- s(u_l; I u)] - C_osc (osc + osc_N).
LowerBound lower_energy_bound(const DiscreteProblem& problem, const Eigen::VectorXd& u, double discrete_energy,
                              const ExactSolution& exact);

struct DualBound {
  double rhs = 0.0;
  double dual_energy = 0.0;  // E*(sigma) = -int W*(sigma) + int_{Gamma_D} u_D . sigma nu
  double oscillation = 0.0;
  double companion = 0.0;    // ||G u - grad J u||^2_{L^2}
};

// Throws UnsupportedError for densities without a conjugate.
DualBound dual_bound(const DiscreteProblem& problem, const Eigen::VectorXd& u, double discrete_energy,
                     const StressField& sigma);

struct Extrapolation {
  double value = 0.0;
  bool degenerate = false;
};

// Aitken's delta-squared on the last three values.
Extrapolation aitken_extrapolate(const std::vector<double>& values);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // root mean square in log scale
  int points = 0;
};

// Least squares fit of log(value) against log(ndof) over the last `window` points (0: all).
RateFit fit_rate(const std::vector<double>& ndof, const std::vector<double>& values, int window = 0);

struct LevelReport {
  int level = 0;
  int ndof = 0;
  int ntriangles = 0;
  double energy = 0.0;
  double estimator = 0.0;
  std::optional<double> stabilization;
  ErrorNorms errors;
  std::optional<double> leb;
  std::optional<double> leb_without_oscillation;
  std::optional<double> rhs;
  std::optional<double> seconds;
};

using ReportQuantity = std::function<std::optional<double>(const LevelReport&)>;
RateFit fit_rate(const std::vector<LevelReport>& reports, const ReportQuantity& quantity, int window = 0);

struct HdivResiduals {
  double normal_jump = 0.0;   // max_F ||[sigma nu]_F||_{L^2(F)}
  double divergence = 0.0;    // max_T ||div sigma + Pi_T^k f||_{L^2(T)}
  double neumann = 0.0;       // max_F ||sigma nu - Pi_F^k g||_{L^2(F)} on free components
};

// Only meaningful for the RT variant; f includes the lower-order term lower_weight (zeta - u_T).
HdivResiduals hdiv_residuals(const DiscreteProblem& problem, const Eigen::VectorXd& u, const StressField& sigma);

// max_T ||G I v - Pi_Sigma D v||_{L^2(T)}.
double commutativity_defect(const HhoSpace& space, const Field& v, const JacobianField& dv);
// Largest coefficient mismatch between (Pi_T^k J v, Pi_F^k J v) and v.
double companion_moment_defect(const HhoSpace& space, const Eigen::VectorXd& v);

struct CourantResult {
  double energy = 0.0;
  int ndof = 0;
  bool converged = false;
  int iterations = 0;
  Eigen::VectorXd nodal;  // vertex-major, m values per vertex
};

// Minimizes the same energy over continuous piecewise affine fields with nodal Dirichlet values.
CourantResult courant_p1_minimize(const ProblemData& data, const Triangulation& mesh, const ComponentMask& dirichlet,
                                  const SolverSettings& settings = {}, int data_degree = 8);

}  // namespace ahho
