#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "ahho/mesh.hpp"

using namespace ahho;

namespace {

BoundaryLabel all_dirichlet(const Point&, const Point&) { return BoundaryLabel::Dirichlet; }

Triangulation unit_square() {
  return Triangulation::build({{0, 0}, {1, 0}, {1, 1}, {0, 1}}, {{0, 1, 2}, {0, 2, 3}},
                              all_dirichlet);
}

Triangulation lshape() {
  std::vector<Point> v{{-1, -1}, {0, -1}, {-1, 0}, {0, 0}, {1, 0}, {-1, 1}, {0, 1}, {1, 1}};
  std::vector<std::array<int, 3>> t{{0, 1, 3}, {0, 3, 2}, {2, 3, 6}, {2, 6, 5}, {3, 4, 7}, {3, 7, 6}};
  return Triangulation::build(v, t, all_dirichlet);
}

// Undirected edge counts computed from scratch through directed half-edges.
std::map<std::pair<int, int>, int> half_edge_counts(const Triangulation& mesh) {
  std::map<std::pair<int, int>, int> count;
  for (const auto& tri : mesh.triangles()) {
    for (int i = 0; i < 3; ++i) {
      int a = tri[i], b = tri[(i + 1) % 3];
      if (a > b) std::swap(a, b);
      ++count[{a, b}];
    }
  }
  return count;
}

bool on_square_boundary(const Point& p) {
  return std::abs(p.x()) < 1e-14 || std::abs(p.y()) < 1e-14 || std::abs(p.x() - 1) < 1e-14 ||
         std::abs(p.y() - 1) < 1e-14;
}

void expect_conforming_square(const Triangulation& mesh) {
  for (const auto& [edge, n] : half_edge_counts(mesh)) {
    ASSERT_LE(n, 2);
    if (n == 1) {
      const Point mid = 0.5 * (mesh.vertex(edge.first) + mesh.vertex(edge.second));
      EXPECT_TRUE(on_square_boundary(mesh.vertex(edge.first)) &&
                  on_square_boundary(mesh.vertex(edge.second)) && on_square_boundary(mid));
    }
  }
  // No vertex lies strictly inside any edge.
  for (const auto& [edge, n] : half_edge_counts(mesh)) {
    const Point a = mesh.vertex(edge.first), b = mesh.vertex(edge.second);
    for (int v = 0; v < mesh.num_vertices(); ++v) {
      if (v == edge.first || v == edge.second) continue;
      const Point p = mesh.vertex(v);
      const double cross = (b - a).x() * (p - a).y() - (b - a).y() * (p - a).x();
      const double s = (p - a).dot(b - a) / (b - a).squaredNorm();
      EXPECT_FALSE(std::abs(cross) < 1e-13 && s > 1e-12 && s < 1 - 1e-12);
    }
  }
}

}  // namespace

TEST(Mesh, ReferenceTriangleTopology) {
  auto mesh = Triangulation::build({{0, 0}, {1, 0}, {0, 1}}, {{0, 1, 2}}, all_dirichlet);
  EXPECT_EQ(mesh.num_triangles(), 1);
  EXPECT_EQ(mesh.num_sides(), 3);
  for (const auto& s : mesh.sides()) EXPECT_TRUE(s.boundary());
  EXPECT_DOUBLE_EQ(mesh.area(0), 0.5);
  // Longest edge is the hypotenuse, opposite the right-angle vertex.
  EXPECT_EQ(mesh.triangle(0)[0], 0);
}

TEST(Mesh, UnitSquareCounts) {
  auto mesh = unit_square();
  EXPECT_EQ(mesh.num_triangles(), 2);
  int interior = 0, boundary = 0;
  for (const auto& s : mesh.sides()) (s.boundary() ? boundary : interior)++;
  EXPECT_EQ(interior, 1);
  EXPECT_EQ(boundary, 4);
}

TEST(Mesh, LShapeEulerCharacteristic) {
  auto mesh = lshape();
  const auto edges = half_edge_counts(mesh);
  EXPECT_EQ(static_cast<int>(edges.size()), mesh.num_sides());
  EXPECT_EQ(mesh.num_vertices() - mesh.num_sides() + mesh.num_triangles(), 1);
  EXPECT_NEAR(mesh.domain_area(), 3.0, 1e-14);
}

TEST(Mesh, NormalsPointOutOfTplus) {
  auto mesh = lshape();
  for (const auto& s : mesh.sides()) {
    const Point mid = 0.5 * (mesh.vertex(s.v[0]) + mesh.vertex(s.v[1]));
    EXPECT_GT((mid - mesh.centroid(s.tplus)).dot(s.normal), 0.0);
    EXPECT_NEAR(s.normal.norm(), 1.0, 1e-15);
    if (!s.boundary()) EXPECT_LT((mid - mesh.centroid(s.tminus)).dot(s.normal), 0.0);
  }
}

TEST(Mesh, RejectsDegenerateTriangle) {
  EXPECT_THROW(Triangulation::build({{0, 0}, {1, 0}, {2, 0}}, {{0, 1, 2}}, all_dirichlet),
               MeshError);
}

TEST(Mesh, RejectsHangingNode) {
  // Left triangle has an edge split by vertex 4 of the two right triangles.
  std::vector<Point> v{{0, 0}, {1, 0}, {1, 2}, {2, 1}, {1, 1}};
  std::vector<std::array<int, 3>> t{{0, 1, 2}, {1, 3, 4}, {4, 3, 2}};
  EXPECT_THROW(Triangulation::build(v, t, all_dirichlet), MeshError);
}

TEST(Mesh, RejectsUnlabeledBoundary) {
  auto rule = [](const Point& a, const Point& b) {
    return std::abs(a.y()) + std::abs(b.y()) < 1e-14 ? BoundaryLabel::Interior
                                                      : BoundaryLabel::Dirichlet;
  };
  EXPECT_THROW(Triangulation::build({{0, 0}, {1, 0}, {0, 1}}, {{0, 1, 2}}, rule), MeshError);
}

TEST(Mesh, SingleMarkedTriangleIsBisected) {
  auto mesh = Triangulation::build({{0, 0}, {1, 0}, {0, 1}}, {{0, 1, 2}}, all_dirichlet);
  auto fine = refine_nvb(mesh, {0});
  ASSERT_EQ(fine.num_triangles(), 2);
  for (int t = 0; t < 2; ++t) {
    EXPECT_NEAR(fine.area(t), 0.25, 1e-15);
    EXPECT_EQ(fine.ancestry(t).parent, 0);
    EXPECT_EQ(fine.ancestry(t).depth, 1);
  }
}

TEST(Mesh, ClosureBisectsNeighbour) {
  auto mesh = unit_square();
  auto fine = refine_nvb(mesh, {0});
  EXPECT_EQ(fine.num_triangles(), 4);
  expect_conforming_square(fine);
  // Repeated local refinement near one corner stays conforming.
  for (int level = 0; level < 8; ++level) {
    std::vector<int> marked;
    for (int t = 0; t < fine.num_triangles(); ++t)
      if (fine.centroid(t).norm() < 0.3) marked.push_back(t);
    fine = refine_nvb(fine, marked);
    expect_conforming_square(fine);
  }
  EXPECT_NEAR(fine.domain_area(), 1.0, 1e-12);
}

TEST(Mesh, ChildrenHalveAreaPerBisection) {
  auto mesh = lshape();
  for (int level = 0; level < 6; ++level) {
    std::vector<int> marked;
    for (int t = 0; t < mesh.num_triangles(); ++t)
      if (mesh.centroid(t).norm() < 0.5 || t % 3 == 0) marked.push_back(t);
    auto fine = refine_nvb(mesh, marked);
    std::vector<double> child_sum(mesh.num_triangles(), 0.0);
    for (int t = 0; t < fine.num_triangles(); ++t) {
      const auto& anc = fine.ancestry(t);
      EXPECT_NEAR(fine.area(t), mesh.area(anc.parent) / std::ldexp(1.0, anc.depth),
                  1e-14 * mesh.area(anc.parent));
      EXPECT_LE(anc.depth, 3);
      child_sum[anc.parent] += fine.area(t);
      // Barycentric embedding reproduces the physical vertices.
      for (int i = 0; i < 3; ++i) {
        const auto& l = anc.barycentric[i];
        const Point p = l[0] * mesh.corner(anc.parent, 0) + l[1] * mesh.corner(anc.parent, 1) +
                        l[2] * mesh.corner(anc.parent, 2);
        EXPECT_NEAR((p - fine.corner(t, i)).norm(), 0.0, 1e-14);
      }
    }
    for (int t = 0; t < mesh.num_triangles(); ++t)
      EXPECT_NEAR(child_sum[t], mesh.area(t), 1e-12 * mesh.area(t));
    mesh = fine;
  }
}

TEST(Mesh, MarkedTrianglesAreRefined) {
  auto mesh = lshape();
  mesh = refine_uniform(mesh);
  std::vector<int> marked{0, 5, 11};
  auto fine = refine_nvb(mesh, marked);
  std::vector<int> children(mesh.num_triangles(), 0);
  for (int t = 0; t < fine.num_triangles(); ++t) children[fine.ancestry(t).parent]++;
  for (int t : marked) EXPECT_GE(children[t], 2);
}

TEST(Mesh, UniformRefinementCounts) {
  auto one = Triangulation::build({{0, 0}, {1, 0}, {0, 1}}, {{0, 1, 2}}, all_dirichlet);
  EXPECT_EQ(refine_uniform(one).num_triangles(), 4);
  auto two = unit_square();
  auto fine = refine_uniform(two);
  EXPECT_EQ(fine.num_triangles(), 8);
  expect_conforming_square(fine);
  auto l = lshape();
  for (int i = 0; i < 4; ++i) {
    l = refine_uniform(l);
    EXPECT_NEAR(l.domain_area(), 3.0, 3e-12);
  }
  EXPECT_EQ(l.num_triangles(), 6 * 256);
}

TEST(Mesh, BoundaryLabelsInherited) {
  auto rule = [](const Point& a, const Point& b) {
    const Point mid = 0.5 * (a + b);
    return mid.x() < 1e-12 ? BoundaryLabel::Dirichlet : BoundaryLabel::Neumann;
  };
  auto mesh = Triangulation::build({{0, 0}, {1, 0}, {1, 1}, {0, 1}}, {{0, 1, 2}, {0, 2, 3}}, rule);
  for (int i = 0; i < 3; ++i) mesh = refine_uniform(mesh);
  for (const auto& s : mesh.sides()) {
    if (!s.boundary()) {
      EXPECT_EQ(s.label, BoundaryLabel::Interior);
      continue;
    }
    EXPECT_EQ(s.label, rule(mesh.vertex(s.v[0]), mesh.vertex(s.v[1])));
  }
}

TEST(Mesh, ShapeRegularityClosedForms) {
  const double r3 = std::sqrt(3.0);
  EXPECT_NEAR(shape_ratio({0, 0}, {1, 0}, {0.5, r3 / 2}), 0.5, 1e-14);
  const double ri = (2 - std::sqrt(2.0)) / 2, rc = std::sqrt(2.0) / 2;
  EXPECT_NEAR(shape_ratio({0, 0}, {1, 0}, {0, 1}), ri / rc, 1e-14);
  EXPECT_NEAR(ri / rc, 0.4142, 1e-4);
}

TEST(Mesh, ShapeRegularityDoesNotDegrade) {
  auto mesh = lshape();
  const double initial = shape_regularity(mesh);
  double previous = initial;
  for (int i = 0; i < 5; ++i) {
    mesh = refine_uniform(mesh);
    const double current = shape_regularity(mesh);
    EXPECT_GE(current, previous - 1e-12);
    previous = current;
  }
}

TEST(Mesh, AtMostFourSimilarityClasses) {
  auto mesh = Triangulation::build({{0, 0}, {1, 0}, {0.3, 0.7}}, {{0, 1, 2}}, all_dirichlet);
  std::set<std::array<long long, 2>> classes;
  for (int gen = 0; gen < 6; ++gen) {
    mesh = refine_nvb(mesh, [&] {
      std::vector<int> all(mesh.num_triangles());
      for (int t = 0; t < mesh.num_triangles(); ++t) all[t] = t;
      return all;
    }());
    for (int t = 0; t < mesh.num_triangles(); ++t) {
      std::array<double, 3> len;
      for (int i = 0; i < 3; ++i) len[i] = (mesh.corner(t, i) - mesh.corner(t, (i + 1) % 3)).norm();
      std::sort(len.begin(), len.end());
      classes.insert({std::llround(1e8 * len[0] / len[2]), std::llround(1e8 * len[1] / len[2])});
    }
  }
  EXPECT_LE(classes.size(), 4u);
}

TEST(Mesh, TextRoundTrip) {
  auto rule = [](const Point& a, const Point& b) {
    return 0.5 * (a + b).y() < 1e-12 ? BoundaryLabel::Gamma1 : BoundaryLabel::Gamma3;
  };
  auto mesh = Triangulation::build({{0, 0}, {1, 0}, {1, 1}, {0, 1}}, {{0, 1, 2}, {0, 2, 3}}, rule);
  mesh = refine_nvb(mesh, {1});
  std::stringstream ss;
  mesh.write(ss);
  auto copy = Triangulation::read(ss);
  std::stringstream again;
  copy.write(again);
  std::stringstream first;
  mesh.write(first);
  EXPECT_EQ(first.str(), again.str());
  EXPECT_EQ(first.str().substr(0, first.str().find('\n')), "vertices 5 / triangles 4 / sides 8");
}
