#pragma once

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "ahho/densities.hpp"
#include "ahho/hho.hpp"

namespace ahho {

// Neumann data may depend on the outward unit normal.
using NeumannField = std::function<Values(const Point&, const Eigen::Vector2d&)>;

// Nonlinear rule exact for polynomials of degree exponent * (k + 1); data rule of degree 2k + 8.
QuadraturePolicy default_quadrature(const EnergyDensity& density, int k);

struct ProblemData {
  DensityPtr density;
  Field load;              // f; empty means zero
  NeumannField neumann;    // g on boundary sides with a free component; empty means zero
  Field dirichlet;         // u_D; empty means zero
  double lower_weight = 0.0;  // adds lower_weight / 2 * ||zeta - v_T||^2
  Field zeta;
};

class DiscreteProblem {
 public:
  DiscreteProblem(std::shared_ptr<const HhoSpace> space, ProblemData data);

  const HhoSpace& space() const { return *space_; }
  const std::shared_ptr<const HhoSpace>& space_ptr() const { return space_; }
  const ProblemData& data() const { return data_; }
  const EnergyDensity& density() const { return *data_.density; }
  double p() const { return data_.density->growth(); }
  bool stabilized() const { return space_->variant() == Variant::Stabilized; }

  int num_free() const { return static_cast<int>(free_.size()); }
  const std::vector<int>& free_dofs() const { return free_; }
  bool constrained_dof(int dof) const { return free_index_[dof] < 0; }
  // Full vector: prescribed values on constrained dofs, zero elsewhere.
  const Eigen::VectorXd& dirichlet_values() const { return dirichlet_; }
  Eigen::VectorXd apply_dirichlet(Eigen::VectorXd v) const;
  Eigen::VectorXd restrict_free(const Eigen::VectorXd& v) const;
  Eigen::VectorXd expand(const Eigen::VectorXd& free) const;

  // Cell and side moments of the load terms: E(v) contains -linear_term().dot(v).
  const Eigen::VectorXd& linear_term() const { return linear_; }

  double energy(const Eigen::VectorXd& v) const;
  // Derivative with respect to every dof (constrained entries included).
  Eigen::VectorXd gradient(const Eigen::VectorXd& v) const;
  // Hessian restricted to free dofs.
  Eigen::SparseMatrix<double> hessian(const Eigen::VectorXd& v) const;

  // Initial guess on a coarsest mesh: v = 1 on free cells and sides, Pi_F^k u_D on constrained ones.
  Eigen::VectorXd initial_guess() const;

 private:
  struct Local {
    double energy = 0.0;
    Eigen::VectorXd grad;
    Eigen::MatrixXd hess;
  };
  Local local(int t, const Eigen::MatrixXd& u, int order) const;

  std::shared_ptr<const HhoSpace> space_;
  ProblemData data_;
  std::vector<int> free_;
  std::vector<int> free_index_;
  Eigen::VectorXd dirichlet_;
  Eigen::VectorXd linear_;
  double constant_ = 0.0;
};

enum class Optimizer { Newton, LBFGS };
const char* to_string(Optimizer o);

struct SolverSettings {
  Optimizer optimizer = Optimizer::Newton;
  double gradient_tolerance = 1e-10;  // relative to max(1, |free part of the load functional|)
  double step_tolerance = 1e-15;
  int max_iterations = 500;
  double armijo = 1e-4;
  int max_backtracks = 60;
  int lbfgs_memory = 10;
};

struct DiscreteSolution {
  Eigen::VectorXd u;
  double energy = 0.0;
  int iterations = 0;
  double gradient_norm = 0.0;
  double tolerance = 0.0;  // absolute gradient tolerance applied
  bool converged = false;
};

// Smooth convex objective in the free unknowns.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual double energy(const Eigen::VectorXd& x) const = 0;
  virtual Eigen::VectorXd gradient(const Eigen::VectorXd& x) const = 0;
  virtual Eigen::SparseMatrix<double> hessian(const Eigen::VectorXd& x) const = 0;
};

// Stops once the gradient norm is at most `tolerance`; the result holds free unknowns.
DiscreteSolution minimize(const Objective& objective, const Eigen::VectorXd& initial,
                          const SolverSettings& settings, double tolerance);

DiscreteSolution minimize(const DiscreteProblem& problem, const Eigen::VectorXd& initial,
                          const SolverSettings& settings = {});

// Elementwise L^2 projection of DW(G u) onto the gradient space, gradient_size() x m per triangle.
struct StressField {
  std::vector<Eigen::MatrixXd> coefficients;
};

StressField discrete_stress(const DiscreteProblem& problem, const Eigen::VectorXd& u);
Jacobian stress_at(const HhoSpace& space, const StressField& sigma, int t, const Point& x);

// Residual of the discrete Euler-Lagrange equations evaluated through sigma:
// int sigma : G w - int f . w_T - int_N g . w_F (+ s(u; w) + lower-order term).
double ele_residual(const DiscreteProblem& problem, const Eigen::VectorXd& u, const StressField& sigma,
                    const Eigen::VectorXd& w);

}  // namespace ahho
