#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <Eigen/SparseCholesky>

#include "ahho/solver.hpp"
#include "support.hpp"

using namespace ahho;
using namespace ahho::testing;

namespace {

ProblemData generic_data(DensityPtr w) {
  ProblemData d;
  const int m = w->components();
  d.density = std::move(w);
  d.load = [m](const Point& x) {
    Values v(m);
    for (int c = 0; c < m; ++c) v[c] = 1.0 + (c + 1) * x.x() * x.y();
    return v;
  };
  d.neumann = [m](const Point& x, const Eigen::Vector2d&) { return Values::Constant(m, 0.3 + x.x()); };
  d.dirichlet = [m](const Point& x) {
    Values v(m);
    for (int c = 0; c < m; ++c) v[c] = std::sin(x.x() + c) * 0.5;
    return v;
  };
  return d;
}

std::vector<DensityPtr> densities() {
  const Eigen::Vector2d f2 = Eigen::Vector2d(3, 2) / std::sqrt(13.0);
  return {p_laplace(4.0), p_laplace(2.0), optimal_design(OdpParameters::from_lambda(1, 2, 0.0145)),
          two_well(-f2, f2), fhm()};
}

}  // namespace

TEST(Solver, ZeroDataZeroEnergy) {
  auto mesh = square_mesh(1);
  for (const auto& w : densities()) {
    for (int k = 0; k <= 1; ++k) {
      ProblemData d;
      d.density = w;
      DiscreteProblem problem(space_for(mesh, k, w->components(), Variant::RT, *w), d);
      EXPECT_EQ(problem.energy(Eigen::VectorXd::Zero(problem.space().ndof())), 0.0) << w->name();
    }
  }
}

TEST(Solver, AffineEnergyMatchesHandQuadrature) {
  auto mesh = square_mesh(2);
  for (int k = 0; k <= 2; ++k) {
    auto w = p_laplace(2.0);
    DiscreteProblem problem(space_for(mesh, k, 1, Variant::RT, *w), affine_data());
    const Eigen::VectorXd v = interpolate(problem.space(), affine_data().dirichlet);
    // int |B|^2 / 2 = 2.5; Neumann sides x = 1 (g = 2) and y = 1 (g = -1).
    double boundary = 0.0;
    const LineRule& gl = gauss_legendre(8);
    for (std::size_t q = 0; q < gl.nodes.size(); ++q) {
      const double s = gl.nodes[q];
      boundary += gl.weights[q] * (2.0 * (0.5 + 2.0 - s) - 1.0 * (0.5 + 2.0 * s - 1.0));
    }
    EXPECT_NEAR(problem.energy(v), 2.5 - boundary, 1e-12);
  }
}

TEST(Solver, LowerOrderTermVanishesAtZeta) {
  auto mesh = square_mesh(1);
  auto w = p_laplace(4.0);
  ProblemData d;
  d.density = w;
  d.lower_weight = 2.0;
  d.zeta = [](const Point& x) { return Values::Constant(1, 1.0 + x.x()); };
  DiscreteProblem with(space_for(mesh, 1, 1, Variant::RT, *w), d);
  d.lower_weight = 0.0;
  DiscreteProblem without(space_for(mesh, 1, 1, Variant::RT, *w), d);
  const Eigen::VectorXd v = interpolate(with.space(), d.zeta);
  EXPECT_NEAR(with.energy(v), without.energy(v), 1e-13);
}

TEST(Solver, GradientAndHessianMatchFiniteDifferences) {
  auto mesh = square_mesh(1);
  std::mt19937 rng(7);
  for (const auto& w : densities()) {
    for (Variant variant : {Variant::RT, Variant::Stabilized}) {
      for (int k = 0; k <= 1; ++k) {
        ProblemData d = generic_data(w);
        if (w->name() == "two-well") {
          d.lower_weight = 2.0;
          d.zeta = [](const Point& x) { return Values::Constant(1, x.y()); };
        }
        DiscreteProblem problem(space_for(mesh, k, w->components(), variant, *w), d);
        const Eigen::VectorXd v = problem.apply_dirichlet(0.7 * random_vector(problem.space().ndof(), rng));
        const Eigen::VectorXd g = problem.restrict_free(problem.gradient(v));
        const Eigen::SparseMatrix<double> h = problem.hessian(v);
        for (int trial = 0; trial < 3; ++trial) {
          const Eigen::VectorXd dir = random_vector(problem.num_free(), rng);
          const Eigen::VectorXd wfull = problem.expand(dir) - problem.dirichlet_values();
          const double eps = 1e-6;
          const double fd = (problem.energy(v + eps * wfull) - problem.energy(v - eps * wfull)) / (2 * eps);
          EXPECT_NEAR(fd, g.dot(dir), 1e-5 * std::max(1.0, std::abs(fd))) << w->name() << " k=" << k;
          const Eigen::VectorXd gfd = (problem.restrict_free(problem.gradient(v + eps * wfull)) -
                                       problem.restrict_free(problem.gradient(v - eps * wfull))) / (2 * eps);
          const Eigen::VectorXd hd = h * dir;
          EXPECT_LT((gfd - hd).norm(), 1e-5 * std::max(1.0, hd.norm())) << w->name() << " k=" << k;
        }
      }
    }
  }
}

TEST(Solver, QuadraticGradientMatchesBilinearAssembly) {
  auto mesh = square_mesh(1);
  std::mt19937 rng(9);
  for (int k = 0; k <= 2; ++k) {
    auto w = p_laplace(2.0);
    ProblemData d = generic_data(w);
    DiscreteProblem problem(space_for(mesh, k, 1, Variant::RT, *w), d);
    const HhoSpace& s = problem.space();
    // Dense a(u, v) = int G u . G v assembled from unit vectors with an independent rule.
    const int n = s.ndof();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (int t = 0; t < mesh->num_triangles(); ++t) {
      const auto dofs = s.local_dofs(t);
      const auto rule = triangle_quadrature(2 * k + 2, *mesh, t);
      const auto& op = s.element(t);
      for (int q = 0; q < rule.size(); ++q) {
        const Eigen::MatrixXd b = op.gradient.eval(rule.points[q]).transpose() * op.grad_op;  // 2 x nloc
        const Eigen::MatrixXd local = rule.weights[q] * b.transpose() * b;
        for (std::size_t i = 0; i < dofs.size(); ++i)
          for (std::size_t j = 0; j < dofs.size(); ++j) a(dofs[i], dofs[j]) += local(i, j);
      }
    }
    const Eigen::VectorXd v = random_vector(n, rng);
    EXPECT_LT((problem.gradient(v) - (a * v - problem.linear_term())).norm(), 1e-10 * std::max(1.0, v.norm()));
  }
}

TEST(Solver, ManufacturedAffineIsReproduced) {
  auto mesh = square_mesh(2);
  for (int k = 0; k <= 2; ++k) {
    for (Variant variant : {Variant::RT, Variant::Stabilized}) {
      for (Optimizer opt : {Optimizer::Newton, Optimizer::LBFGS}) {
        auto w = p_laplace(2.0);
        DiscreteProblem problem(space_for(mesh, k, 1, variant, *w), affine_data());
        SolverSettings settings;
        settings.optimizer = opt;
        settings.max_iterations = 20000;
        if (opt == Optimizer::LBFGS) settings.gradient_tolerance = 1e-7;
        const DiscreteSolution sol = minimize(problem, problem.initial_guess(), settings);
        EXPECT_TRUE(sol.converged);
        const double tol = opt == Optimizer::Newton ? 1e-10 : 1e-6;
        if (opt == Optimizer::Newton) EXPECT_LE(sol.iterations, 3);
        const Eigen::VectorXd exact = interpolate(problem.space(), affine_data().dirichlet);
        EXPECT_NEAR(sol.energy, problem.energy(exact), 1e-10);
        Jacobian b(1, 2);
        b << 2.0, -1.0;
        for (int t = 0; t < mesh->num_triangles(); ++t) {
          EXPECT_LT((gradient_at(problem.space(), sol.u, t, mesh->centroid(t)) - b).norm(), tol);
          const StressField sigma = discrete_stress(problem, sol.u);
          EXPECT_LT((stress_at(problem.space(), sigma, t, mesh->centroid(t)) - b).norm(), tol);
        }
      }
    }
  }
}

TEST(Solver, QuadraticMinimizerMatchesLinearSolve) {
  auto mesh = square_mesh(2);
  auto w = p_laplace(2.0);
  for (int k = 0; k <= 1; ++k) {
    DiscreteProblem problem(space_for(mesh, k, 1, Variant::RT, *w), generic_data(w));
    const Eigen::VectorXd zero = problem.apply_dirichlet(Eigen::VectorXd::Zero(problem.space().ndof()));
    const Eigen::SparseMatrix<double> a = problem.hessian(zero);
    const Eigen::VectorXd rhs = -problem.restrict_free(problem.gradient(zero));
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(a);
    const Eigen::VectorXd direct = problem.expand(solver.solve(rhs));
    for (Optimizer opt : {Optimizer::Newton, Optimizer::LBFGS}) {
      SolverSettings settings;
      settings.optimizer = opt;
      settings.max_iterations = 20000;
      if (opt == Optimizer::LBFGS) settings.gradient_tolerance = 1e-7;
      const DiscreteSolution sol = minimize(problem, problem.initial_guess(), settings);
      EXPECT_TRUE(sol.converged) << to_string(opt);
      EXPECT_LT((sol.u - direct).lpNorm<Eigen::Infinity>(), opt == Optimizer::Newton ? 1e-10 : 1e-6) << to_string(opt);
    }
  }
}

TEST(Solver, MinimizerPropertiesAcrossDensities) {
  auto mesh = square_mesh(2);
  std::mt19937 rng(11);
  for (const auto& w : densities()) {
    for (Variant variant : {Variant::RT, Variant::Stabilized}) {
      const int k = 1;
      ProblemData d = generic_data(w);
      if (w->name() == "two-well") {
        d.lower_weight = 2.0;
        d.zeta = [](const Point& x) { return Values::Constant(1, x.y()); };
      }
      DiscreteProblem problem(space_for(mesh, k, w->components(), variant, *w), d);
      const DiscreteSolution sol = minimize(problem, problem.initial_guess());
      ASSERT_TRUE(sol.converged) << w->name() << " " << to_string(variant);
      for (int i = 0; i < problem.space().ndof(); ++i)
        if (problem.constrained_dof(i)) EXPECT_EQ(sol.u[i], problem.dirichlet_values()[i]);
      const StressField sigma = discrete_stress(problem, sol.u);
      for (int trial = 0; trial < 20; ++trial) {
        Eigen::VectorXd dir = problem.expand(random_vector(problem.num_free(), rng)) - problem.dirichlet_values();
        dir /= dir.norm();
        EXPECT_LE(std::abs(ele_residual(problem, sol.u, sigma, dir)), 10 * sol.tolerance) << w->name();
      }
      // Perturbations do not decrease the energy.
      for (int trial = 0; trial < 5; ++trial) {
        const Eigen::VectorXd dir = problem.expand(1e-3 * random_vector(problem.num_free(), rng)) - problem.dirichlet_values();
        EXPECT_GE(problem.energy(sol.u + dir), sol.energy - 1e-12) << w->name();
      }
      const DiscreteSolution again = minimize(problem, problem.initial_guess());
      EXPECT_EQ(again.u, sol.u);
      EXPECT_EQ(again.iterations, sol.iterations);
    }
  }
}

TEST(Solver, StressIsHdivConforming) {
  auto mesh = square_mesh(2);
  for (int k = 0; k <= 2; ++k) {
    for (const auto& w : {p_laplace(4.0), fhm()}) {
      ProblemData d = generic_data(w);
      DiscreteProblem problem(space_for(mesh, k, w->components(), Variant::RT, *w), d);
      const HhoSpace& s = problem.space();
      const DiscreteSolution sol = minimize(problem, problem.initial_guess());
      ASSERT_TRUE(sol.converged);
      const StressField sigma = discrete_stress(problem, sol.u);
      const int m = w->components();
      for (int f = 0; f < mesh->num_sides(); ++f) {
        const Side& side = mesh->side(f);
        const auto rule = side_quadrature(2 * k + 4, mesh->vertex(side.v[0]), mesh->vertex(side.v[1]));
        const SideBasis basis = s.side_basis(f);
        Eigen::MatrixXd mass = Eigen::MatrixXd::Zero(k + 1, k + 1), rhs = Eigen::MatrixXd::Zero(k + 1, m);
        double jump = 0.0;
        std::vector<Values> flux(rule.size());
        for (int q = 0; q < rule.size(); ++q) {
          const Point& x = rule.points[q];
          flux[q] = stress_at(s, sigma, side.tplus, x) * side.normal;
          if (!side.boundary()) jump += rule.weights[q] * (flux[q] - stress_at(s, sigma, side.tminus, x) * side.normal).squaredNorm();
          const Eigen::VectorXd psi = basis.eval(x);
          mass += rule.weights[q] * psi * psi.transpose();
          rhs += rule.weights[q] * psi * d.neumann(x, side.normal).transpose();
        }
        EXPECT_LE(std::sqrt(jump), 1e-8);
        if (side.label == BoundaryLabel::Neumann) {
          const Eigen::MatrixXd pg = mass.ldlt().solve(rhs);
          double err = 0.0;
          for (int q = 0; q < rule.size(); ++q)
            err += rule.weights[q] * (flux[q] - Values(pg.transpose() * basis.eval(rule.points[q]))).squaredNorm();
          EXPECT_LE(std::sqrt(err), 1e-8);
        }
      }
      for (int t = 0; t < mesh->num_triangles(); ++t) {
        const auto& op = s.element(t);
        const auto rule = triangle_quadrature(2 * k + 8, *mesh, t);
        Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(s.cell_size(), m);
        for (int q = 0; q < rule.size(); ++q)
          rhs += rule.weights[q] * op.cell.eval(rule.points[q]) * d.load(rule.points[q]).transpose();
        const Eigen::MatrixXd pf = op.cell_mass.ldlt().solve(rhs);
        double err = 0.0;
        for (int q = 0; q < rule.size(); ++q) {
          const Eigen::VectorXd div = sigma.coefficients[t].transpose() * op.gradient.div(rule.points[q]);
          err += rule.weights[q] * (div + pf.transpose() * op.cell.eval(rule.points[q])).squaredNorm();
        }
        EXPECT_LE(std::sqrt(err), 1e-8);
      }
    }
  }
}
