#include <gtest/gtest.h>

#include <cmath>

#include "ahho/benchmarks.hpp"

using namespace ahho;

namespace {

Jacobian stress(const Benchmark& b, const Point& x) {
  return b.exact->stress ? b.exact->stress(x) : b.setup.data.density->derivative(b.exact->gradient(x));
}

// Central-difference divergence of the exact stress, one entry per component.
Values divergence(const Benchmark& b, const Point& x, double h = 1e-5) {
  const Point ex(h, 0), ey(0, h);
  const Jacobian dx = (stress(b, x + ex) - stress(b, x - ex)) / (2 * h);
  const Jacobian dy = (stress(b, x + ey) - stress(b, x - ey)) / (2 * h);
  return dx.col(0) + dy.col(1);
}

// E(u) by quadrature on a uniformly refined initial mesh.
double exact_energy(const Benchmark& b, int refinements, int degree) {
  Triangulation mesh = *b.setup.mesh;
  for (int i = 0; i < refinements; ++i) mesh = refine_uniform(mesh);
  const ProblemData& d = b.setup.data;
  const ExactSolution& e = *b.exact;
  double energy = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const QuadratureRule rule = triangle_quadrature(degree, mesh, t);
    for (int q = 0; q < rule.size(); ++q) {
      const Point& x = rule.points[q];
      double w = d.density->value(e.gradient(x));
      if (d.load) w -= d.load(x).dot(e.u(x));
      if (d.lower_weight != 0.0) w += d.lower_weight / 2 * (d.zeta(x) - e.u(x)).squaredNorm();
      energy += rule.weights[q] * w;
    }
  }
  for (const Side& side : mesh.sides()) {
    if (!side.boundary() || b.setup.dirichlet(side.label) || !d.neumann) continue;
    const QuadratureRule rule = side_quadrature(degree, mesh.vertex(side.v[0]), mesh.vertex(side.v[1]));
    for (int q = 0; q < rule.size(); ++q)
      energy -= rule.weights[q] * d.neumann(rule.points[q], side.normal).dot(e.u(rule.points[q]));
  }
  return energy;
}

}  // namespace

TEST(Benchmarks, Registry) {
  const auto names = benchmark_names();
  EXPECT_EQ(names.size(), 5u);
  for (const std::string& name : names) {
    const Benchmark b = make_benchmark(name);
    EXPECT_EQ(b.name, name);
    EXPECT_TRUE(b.setup.mesh);
    EXPECT_TRUE(b.setup.data.density);
  }
  for (const std::string& name : {"p-laplace-lshape", "odp-lshape", "two-well-rect", "fhm-rect"})
    EXPECT_TRUE(make_benchmark(name).reference_energy) << name;
  EXPECT_THROW(make_benchmark("p-laplace"), std::invalid_argument);
  EXPECT_EQ(indicator_for(make_benchmark("fhm-rect"), Variant::RT), Indicator::FhmModified);
  EXPECT_EQ(indicator_for(make_benchmark("fhm-rect"), Variant::Stabilized), Indicator::Stabilized);
}

TEST(Benchmarks, ReferenceValues) {
  EXPECT_EQ(*make_benchmark("p-laplace-lshape").reference_energy, -1.4423089582447);
  EXPECT_EQ(*make_benchmark("odp-lshape").reference_energy, -0.0745512);
  EXPECT_EQ(*make_benchmark("two-well-rect").reference_energy, 0.1078147674);
  EXPECT_EQ(*make_benchmark("fhm-rect").reference_energy, 0.88137023556);
}

TEST(Benchmarks, BoundaryPartitions) {
  const Benchmark p = make_benchmark("p-laplace-lshape");
  double dirichlet = 0.0, neumann = 0.0;
  for (const Side& s : p.setup.mesh->sides()) {
    if (s.label == BoundaryLabel::Dirichlet) dirichlet += s.length;
    if (s.label == BoundaryLabel::Neumann) neumann += s.length;
  }
  EXPECT_NEAR(dirichlet, 2.0, 1e-14);
  EXPECT_NEAR(neumann, 6.0, 1e-14);

  const Benchmark f = make_benchmark("fhm-rect");
  double g[3] = {0, 0, 0};
  for (const Side& s : f.setup.mesh->sides()) {
    if (s.label == BoundaryLabel::Gamma1) g[0] += s.length;
    if (s.label == BoundaryLabel::Gamma2) g[1] += s.length;
    if (s.label == BoundaryLabel::Gamma3) g[2] += s.length;
  }
  EXPECT_NEAR(g[0], 1.0, 1e-14);
  EXPECT_NEAR(g[1], 1.0, 1e-14);
  EXPECT_NEAR(g[2], 4.0, 1e-14);
  EXPECT_EQ(f.setup.dirichlet(BoundaryLabel::Gamma1), 1u);
  EXPECT_EQ(f.setup.dirichlet(BoundaryLabel::Gamma2), 2u);
  EXPECT_EQ(f.setup.dirichlet(BoundaryLabel::Gamma3), 3u);
}

TEST(Benchmarks, ExactGradientsMatchFiniteDifferences) {
  const std::vector<Point> points{{-0.5, 0.3}, {0.4, 0.7}, {-0.2, -0.6}, {0.7, 0.2}, {0.3, 1.1}, {0.9, 0.05}};
  for (const std::string& name : {"p-laplace-lshape", "two-well-rect", "fhm-rect", "manufactured-affine"}) {
    const Benchmark b = make_benchmark(name);
    const double h = 1e-6;
    for (const Point& x : points) {
      bool inside = false;
      for (int t = 0; t < b.setup.mesh->num_triangles() && !inside; ++t) {
        const Point a = b.setup.mesh->corner(t, 0), c1 = b.setup.mesh->corner(t, 1), c2 = b.setup.mesh->corner(t, 2);
        Eigen::Matrix2d j;
        j << c1 - a, c2 - a;
        const Eigen::Vector2d l = j.inverse() * (x - a);
        inside = l.minCoeff() > 0 && l.sum() < 1;
      }
      if (!inside) continue;
      const Jacobian g = b.exact->gradient(x);
      const Values dx = (b.exact->u(x + Point(h, 0)) - b.exact->u(x - Point(h, 0))) / (2 * h);
      const Values dy = (b.exact->u(x + Point(0, h)) - b.exact->u(x - Point(0, h))) / (2 * h);
      EXPECT_LT((g.col(0) - dx).norm(), 1e-7) << name;
      EXPECT_LT((g.col(1) - dy).norm(), 1e-7) << name;
    }
  }
}

TEST(Benchmarks, ExactSolutionsSatisfyEulerLagrange) {
  const Benchmark p = make_benchmark("p-laplace-lshape");
  for (const Point& x : {Point(-0.5, 0.3), Point(0.4, 0.7), Point(-0.2, -0.6)}) {
    EXPECT_NEAR(divergence(p, x)[0] + p.setup.data.load(x)[0], 0.0, 1e-6);
    // The closed-form stress equals DW(grad u).
    EXPECT_LT((p.exact->stress(x) - p.setup.data.density->derivative(p.exact->gradient(x))).norm(), 1e-12);
  }
  const Benchmark w = make_benchmark("two-well-rect");
  for (const Point& x : {Point(0.2, 0.3), Point(0.8, 1.2), Point(0.5, 0.9), Point(0.9, 0.2)}) {
    const ProblemData& d = w.setup.data;
    const double residual = -divergence(w, x)[0] + d.lower_weight * (w.exact->u(x) - d.zeta(x))[0];
    EXPECT_NEAR(residual, 0.0, 1e-6);
  }
  const Benchmark f = make_benchmark("fhm-rect");
  for (const Point& x : {Point(-0.5, 0.3), Point(0.4, 0.7), Point(0.9, 0.9)}) EXPECT_LT(divergence(f, x).norm(), 1e-5);
  // Natural conditions on the free components of Gamma1 and Gamma2.
  EXPECT_LT(std::abs(stress(f, Point(-0.5, 0.0)).row(1).dot(Eigen::Vector2d(0, -1))), 1e-12);
  EXPECT_LT(std::abs(stress(f, Point(0.5, 0.0)).row(0).dot(Eigen::Vector2d(0, -1))), 1e-12);
}

TEST(Benchmarks, DirichletDataAgreesWithExactSolution) {
  const Benchmark f = make_benchmark("fhm-rect");
  EXPECT_NEAR(f.setup.data.dirichlet(Point(-0.25, 0.0))[0], 0.0, 1e-15);
  EXPECT_NEAR(f.setup.data.dirichlet(Point(0.25, 0.0))[1], 0.0, 1e-15);
  const Benchmark p = make_benchmark("p-laplace-lshape");
  EXPECT_NEAR(p.setup.data.dirichlet(Point(0.5, 0.0))[0], 0.0, 1e-15);
  EXPECT_NEAR(p.setup.data.dirichlet(Point(0.0, 0.0))[0], 0.0, 1e-15);
}

TEST(Benchmarks, ReferenceEnergiesMatchQuadratureOfExactSolutions) {
  EXPECT_NEAR(exact_energy(make_benchmark("manufactured-affine"), 0, 4), -1.0, 1e-13);
  // Singular integrands: the fine-mesh quadrature converges slowly towards the stored values.
  EXPECT_NEAR(exact_energy(make_benchmark("p-laplace-lshape"), 6, 12), -1.4423089582447, 2e-4);
  EXPECT_NEAR(exact_energy(make_benchmark("two-well-rect"), 6, 10), 0.1078147674, 1e-5);
  EXPECT_NEAR(exact_energy(make_benchmark("fhm-rect"), 6, 12), 0.88137023556, 2e-4);
}
