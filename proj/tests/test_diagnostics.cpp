#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ahho/diagnostics.hpp"
#include "support.hpp"

using namespace ahho;
using namespace ahho::testing;

namespace {

ExactSolution affine_exact() {
  ExactSolution e;
  e.u = affine_data().dirichlet;
  e.gradient = [](const Point&) {
    Jacobian b(1, 2);
    b << 2.0, -1.0;
    return b;
  };
  // |b|^2 / 2 minus the Neumann work on x = 1 (4) and y = 1 (-1/2).
  e.energy = 2.5 - 3.5;
  return e;
}

DiscreteSolution solve(const DiscreteProblem& problem) {
  const DiscreteSolution sol = minimize(problem, problem.initial_guess());
  EXPECT_TRUE(sol.converged);
  return sol;
}

}  // namespace

TEST(Diagnostics, ManufacturedAffineHasNoErrors) {
  auto mesh = square_mesh(2);
  auto w = p_laplace(2.0);
  for (int k = 0; k <= 2; ++k) {
    for (Variant variant : {Variant::RT, Variant::Stabilized}) {
      DiscreteProblem problem(space_for(mesh, k, 1, variant, *w), affine_data());
      const DiscreteSolution sol = solve(problem);
      const ErrorNorms err = error_norms(problem, sol.u, sol.energy, affine_exact());
      EXPECT_LE(*err.energy, 1e-9);
      EXPECT_LE(*err.gradient, 1e-9);
      EXPECT_LE(*err.stress, 1e-9);
      if (k >= 1) EXPECT_LE(*err.volume, 1e-9);
      EXPECT_LE(oscillation_volume(problem), 1e-12);
      EXPECT_LE(oscillation_neumann(problem), 1e-12);
      const LowerBound leb = lower_energy_bound(problem, sol.u, sol.energy, affine_exact());
      EXPECT_NEAR(leb.with_oscillation, -1.0, 1e-9);
      const DualBound dual = dual_bound(problem, sol.u, sol.energy, discrete_stress(problem, sol.u));
      // -int W*(b) + int_D u_D b.nu: -5/2 + 0 (x = 0) + 3/2 (y = 0).
      EXPECT_NEAR(dual.dual_energy, -1.0, 1e-9);
      EXPECT_NEAR(dual.rhs, 0.0, 1e-9);
    }
  }
}

TEST(Diagnostics, ErrorNormsMatchRefinedQuadrature) {
  auto mesh = square_mesh(2);
  auto w = p_laplace(4.0);
  ExactSolution e;
  e.u = [](const Point& x) { return Values::Constant(1, std::sin(2 * x.x()) * std::exp(x.y())); };
  e.gradient = [](const Point& x) {
    Jacobian g(1, 2);
    g << 2 * std::cos(2 * x.x()) * std::exp(x.y()), std::sin(2 * x.x()) * std::exp(x.y());
    return g;
  };
  for (int k = 0; k <= 1; ++k) {
    DiscreteProblem problem(space_for(mesh, k, 1, Variant::RT, *w), affine_data());
    const Eigen::VectorXd iu = interpolate(problem.space(), e.u);
    const ErrorNorms a = error_norms(problem, iu, 0.0, e);
    const ErrorNorms b = error_norms(problem, iu, 0.0, e, 24);
    EXPECT_NEAR(*a.gradient, *b.gradient, 1e-4 * *b.gradient);
    EXPECT_NEAR(*a.stress, *b.stress, 1e-4 * *b.stress);
    EXPECT_NEAR(*a.volume, *b.volume, 1e-4 * *b.volume);
    EXPECT_FALSE(a.energy);
    // Halving the mesh size reduces the interpolation errors.
    DiscreteProblem fine(space_for(std::make_shared<const Triangulation>(refine_uniform(*mesh)), k, 1, Variant::RT, *w),
                         affine_data());
    const ErrorNorms c = error_norms(fine, interpolate(fine.space(), e.u), 0.0, e);
    EXPECT_LT(*c.gradient, 0.6 * *a.gradient);
    EXPECT_LT(*c.volume, 0.6 * *a.volume);
  }
}

TEST(Diagnostics, OscillationMatchesHandComputation) {
  // f = x on one triangle, k = 0: ||f - mean||_{L^2}^2 is the variance integral.
  Triangulation tri = Triangulation::build({{0, 0}, {1, 0}, {0, 1}}, {{0, 1, 2}}, all_dirichlet);
  auto mesh = std::make_shared<const Triangulation>(tri);
  auto w = p_laplace(2.0);
  ProblemData d;
  d.density = w;
  d.load = [](const Point& x) { return Values::Constant(1, x.x()); };
  DiscreteProblem problem(space_for(mesh, 0, 1, Variant::RT, *w), d);
  // int x^2 = 1/12, mean 1/3, area 1/2: 1/12 - 1/18 = 1/36; h_T = |T|^{1/2}.
  EXPECT_NEAR(oscillation_volume(problem), std::sqrt(std::sqrt(0.5) / 36.0), 1e-13);
  // The lower-order load lower_weight * zeta enters the same way.
  d.load = nullptr;
  d.lower_weight = 2.0;
  d.zeta = [](const Point& x) { return Values::Constant(1, x.x() / 2); };
  DiscreteProblem lower(space_for(mesh, 0, 1, Variant::RT, *w), d);
  EXPECT_NEAR(oscillation_volume(lower), std::sqrt(std::sqrt(0.5) / 36.0), 1e-13);
}

TEST(Diagnostics, StressBalancesLoadsAfterMinimization) {
  auto mesh = square_mesh(2);
  for (int k = 0; k <= 2; ++k) {
    for (double lw : {0.0, 2.0}) {
      auto w = p_laplace(4.0);
      ProblemData d = affine_data();
      d.density = w;
      d.load = [](const Point& x) { return Values::Constant(1, 1.0 + x.x() * x.y() * x.y()); };
      d.neumann = [](const Point& x, const Eigen::Vector2d&) { return Values::Constant(1, std::cos(3 * x.x() + x.y())); };
      d.lower_weight = lw;
      d.zeta = [](const Point& x) { return Values::Constant(1, std::exp(x.x())); };
      DiscreteProblem problem(space_for(mesh, k, 1, Variant::RT, *w), d);
      const DiscreteSolution sol = solve(problem);
      const HdivResiduals r = hdiv_residuals(problem, sol.u, discrete_stress(problem, sol.u));
      EXPECT_LE(r.normal_jump, 1e-8);
      EXPECT_LE(r.divergence, 1e-8);
      EXPECT_LE(r.neumann, 1e-8);
    }
  }
}

TEST(Diagnostics, DualEnergyMatchesIndependentQuadrature) {
  auto mesh = square_mesh(1);
  auto w = p_laplace(4.0);
  ProblemData d = affine_data();
  d.density = w;
  DiscreteProblem problem(space_for(mesh, 1, 1, Variant::RT, *w), d);
  const DiscreteSolution sol = solve(problem);
  const StressField sigma = discrete_stress(problem, sol.u);
  const DualBound dual = dual_bound(problem, sol.u, sol.energy, sigma);
  double oracle = 0.0;
  for (int t = 0; t < mesh->num_triangles(); ++t) {
    const QuadratureRule rule = triangle_quadrature(20, *mesh, t);
    for (int q = 0; q < rule.size(); ++q)
      oracle -= rule.weights[q] * 0.75 * std::pow(stress_at(problem.space(), sigma, t, rule.points[q]).norm(), 4.0 / 3.0);
  }
  for (int f = 0; f < mesh->num_sides(); ++f) {
    const Side& side = mesh->side(f);
    if (side.label != BoundaryLabel::Dirichlet) continue;
    const QuadratureRule rule = side_quadrature(12, mesh->vertex(side.v[0]), mesh->vertex(side.v[1]));
    for (int q = 0; q < rule.size(); ++q)
      oracle += rule.weights[q] * d.dirichlet(rule.points[q])[0] *
                (stress_at(problem.space(), sigma, side.tplus, rule.points[q]) * side.normal)[0];
  }
  EXPECT_NEAR(dual.dual_energy, oracle, 1e-6 * std::abs(oracle));
  // Weak duality: the dual energy never exceeds the discrete energy by more than the oscillation.
  EXPECT_GE(dual.rhs, -1e-10);
  EXPECT_THROW(dual_bound(DiscreteProblem(space_for(mesh, 0, 2, Variant::RT, *fhm()), [] {
                            ProblemData f;
                            f.density = fhm();
                            return f;
                          }()),
                          Eigen::VectorXd::Zero(1), 0.0, sigma),
               UnsupportedError);
}

TEST(Diagnostics, AitkenExtrapolation) {
  std::vector<double> geometric;
  for (int n = 0; n < 5; ++n) geometric.push_back(-1.5 + 0.7 * std::pow(0.4, n));
  const Extrapolation e = aitken_extrapolate(geometric);
  EXPECT_FALSE(e.degenerate);
  EXPECT_NEAR(e.value, -1.5, 1e-13);
  const Extrapolation c = aitken_extrapolate({2.0, 2.0, 2.0});
  EXPECT_TRUE(c.degenerate);
  EXPECT_EQ(c.value, 2.0);
  const Extrapolation linear = aitken_extrapolate({1.0, 2.0, 3.0});
  EXPECT_TRUE(linear.degenerate);
  EXPECT_THROW(aitken_extrapolate({1.0, 2.0}), std::invalid_argument);
}

TEST(Diagnostics, RateFit) {
  std::vector<double> ndof, exact, noisy;
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> noise(-0.01, 0.01);
  for (int i = 0; i < 8; ++i) {
    ndof.push_back(100.0 * std::pow(4.0, i));
    exact.push_back(3.0 * std::pow(ndof.back(), -0.75));
    noisy.push_back(exact.back() * (1 + noise(rng)));
  }
  const RateFit a = fit_rate(ndof, exact);
  EXPECT_NEAR(a.slope, -0.75, 1e-12);
  EXPECT_NEAR(std::exp(a.intercept), 3.0, 1e-10);
  EXPECT_EQ(a.points, 8);
  EXPECT_NEAR(fit_rate(ndof, noisy).slope, -0.75, 0.02);
  EXPECT_EQ(fit_rate(ndof, exact, 3).points, 3);

  std::vector<LevelReport> reports(4);
  for (int i = 0; i < 4; ++i) {
    reports[i].ndof = static_cast<int>(ndof[i]);
    if (i != 1) reports[i].errors.gradient = exact[i];
  }
  const RateFit r = fit_rate(reports, [](const LevelReport& l) { return l.errors.gradient; });
  EXPECT_EQ(r.points, 3);
  EXPECT_NEAR(r.slope, -0.75, 1e-12);
  EXPECT_THROW(fit_rate({1.0}, {1.0}), std::invalid_argument);
}

TEST(Diagnostics, CourantReproducesAffine) {
  auto mesh = square_mesh(2);
  ProblemData d = affine_data();
  const CourantResult r = courant_p1_minimize(d, *mesh, dirichlet_mask);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.energy, -1.0, 1e-10);
  for (int v = 0; v < mesh->num_vertices(); ++v) EXPECT_NEAR(r.nodal[v], d.dirichlet(mesh->vertex(v))[0], 1e-10);
}

TEST(Diagnostics, CourantEnergiesDecreaseTowardsTorsionEnergy) {
  // -Laplace u = 1 on the unit square with u = 0: E(u) = -(1/2) int u = -0.0175721...
  auto w = p_laplace(2.0);
  ProblemData d;
  d.density = w;
  d.load = [](const Point&) { return Values::Constant(1, 1.0); };
  Triangulation mesh = Triangulation::build({{0, 0}, {1, 0}, {1, 1}, {0, 1}}, {{0, 1, 2}, {0, 2, 3}}, all_dirichlet);
  double previous = 0.0;
  for (int level = 0; level < 6; ++level) {
    mesh = refine_uniform(mesh);
    const CourantResult r = courant_p1_minimize(d, mesh, all_components);
    EXPECT_TRUE(r.converged);
    EXPECT_LT(r.energy, previous);
    previous = r.energy;
  }
  EXPECT_NEAR(previous, -0.0175721, 2e-4);
}

TEST(Diagnostics, CommutativityAndCompanionHelpers) {
  auto mesh = test_mesh();
  std::mt19937 rng(5);
  const Field v = [](const Point& x) { return Values::Constant(1, std::sin(x.x()) * std::cos(2 * x.y())); };
  const JacobianField dv = [](const Point& x) {
    Jacobian g(1, 2);
    g << std::cos(x.x()) * std::cos(2 * x.y()), -2 * std::sin(x.x()) * std::sin(2 * x.y());
    return g;
  };
  for (int k = 0; k <= 2; ++k) {
    const HhoSpace rt = make_space(mesh, k, 1, Variant::RT);
    EXPECT_LE(commutativity_defect(rt, v, dv), 1e-9);
    const HhoSpace st = make_space(mesh, k, 1, Variant::Stabilized);
    EXPECT_LE(commutativity_defect(st, v, dv), 1e-9);
    EXPECT_LE(companion_moment_defect(rt, random_vector(rt.ndof(), rng)), 1e-9);
  }
}
