#pragma once

#include <cmath>
#include <memory>
#include <random>

#include "ahho/hho.hpp"
#include "ahho/mesh.hpp"
#include "ahho/solver.hpp"

namespace ahho::testing {

inline BoundaryLabel all_dirichlet(const Point&, const Point&) { return BoundaryLabel::Dirichlet; }

inline Triangulation lshape_mesh() {
  std::vector<Point> v{{-1, -1}, {0, -1}, {-1, 0}, {0, 0}, {1, 0}, {-1, 1}, {0, 1}, {1, 1}};
  std::vector<std::array<int, 3>> t{{0, 1, 3}, {0, 3, 2}, {2, 3, 6}, {2, 6, 5}, {3, 4, 7}, {3, 7, 6}};
  return Triangulation::build(v, t, all_dirichlet);
}

// L-shape refined once uniformly and once locally: irregular but conforming.
inline std::shared_ptr<const Triangulation> test_mesh() {
  auto mesh = refine_uniform(lshape_mesh());
  std::vector<int> marked;
  for (int t = 0; t < mesh.num_triangles(); ++t)
    if (mesh.centroid(t).norm() < 0.6) marked.push_back(t);
  return std::make_shared<const Triangulation>(refine_nvb(mesh, marked));
}

inline unsigned all_components(BoundaryLabel) { return ~0u; }

inline HhoSpace make_space(std::shared_ptr<const Triangulation> mesh, int k, int m,
                           Variant variant = Variant::RT, int nonlinear_degree = -1) {
  QuadraturePolicy policy;
  policy.nonlinear_degree = nonlinear_degree >= 0 ? nonlinear_degree : 4 * (k + 1);
  policy.data_degree = 2 * k + 10;
  return HhoSpace(std::move(mesh), k, m, variant, all_components, policy);
}

inline Eigen::VectorXd random_vector(int n, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

// Unit square; the sides x = 1 and y = 1 are Neumann.
inline std::shared_ptr<const Triangulation> square_mesh(int refinements) {
  auto rule = [](const Point& a, const Point& b) {
    const Point mid = (a + b) / 2;
    return (mid.x() > 1 - 1e-12 || mid.y() > 1 - 1e-12) ? BoundaryLabel::Neumann : BoundaryLabel::Dirichlet;
  };
  Triangulation mesh = Triangulation::build({{0, 0}, {1, 0}, {1, 1}, {0, 1}}, {{0, 1, 2}, {0, 2, 3}}, rule);
  for (int i = 0; i < refinements; ++i) mesh = refine_uniform(mesh);
  return std::make_shared<const Triangulation>(std::move(mesh));
}

inline unsigned dirichlet_mask(BoundaryLabel label) { return label == BoundaryLabel::Dirichlet ? ~0u : 0u; }

inline std::shared_ptr<const HhoSpace> space_for(std::shared_ptr<const Triangulation> mesh, int k, int m,
                                                 Variant variant, const EnergyDensity& w) {
  return std::make_shared<const HhoSpace>(std::move(mesh), k, m, variant, dirichlet_mask,
                                          default_quadrature(w, k));
}

inline ProblemData affine_data() {
  ProblemData d;
  d.density = p_laplace(2.0);
  d.dirichlet = [](const Point& x) { return Values::Constant(1, 0.5 + 2.0 * x.x() - 1.0 * x.y()); };
  d.neumann = [](const Point&, const Eigen::Vector2d& n) { return Values::Constant(1, 2.0 * n.x() - 1.0 * n.y()); };
  return d;
}

}  // namespace ahho::testing
