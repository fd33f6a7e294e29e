#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ahho {

using Point = Eigen::Vector2d;

enum class BoundaryLabel : std::uint8_t { Interior, Dirichlet, Neumann, Gamma1, Gamma2, Gamma3 };

std::string to_string(BoundaryLabel label);
BoundaryLabel label_from_string(const std::string& name);

class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Receives the endpoints of a boundary side; must return a non-interior label.
using LabelRule = std::function<BoundaryLabel(const Point&, const Point&)>;

struct Side {
  std::array<int, 2> v;   // oriented counter-clockwise w.r.t. tplus
  int tplus = -1;
  int tminus = -1;        // -1 on the boundary
  Point normal;           // outward unit normal of tplus
  double length = 0.0;
  BoundaryLabel label = BoundaryLabel::Interior;

  bool boundary() const { return tminus < 0; }
};

// Genealogy of a triangle with respect to the mesh it was refined from.
struct Ancestry {
  int parent = -1;
  int depth = 0;                                   // number of bisections from parent
  std::array<Eigen::Vector3d, 3> barycentric{};    // vertices in parent barycentric coordinates
};

// Conforming triangulation. Triangles are stored counter-clockwise with the
// refinement edge opposite local vertex 0; local side i is opposite vertex i.
class Triangulation {
 public:
  Triangulation() = default;

  static Triangulation build(std::vector<Point> vertices, std::vector<std::array<int, 3>> triangles,
                             const LabelRule& rule);
  // Same, but triangles[i][0] is already the vertex opposite the refinement edge.
  static Triangulation build_with_refinement_edges(std::vector<Point> vertices,
                                                   std::vector<std::array<int, 3>> triangles,
                                                   const LabelRule& rule);

  int num_vertices() const { return static_cast<int>(vertices_.size()); }
  int num_triangles() const { return static_cast<int>(triangles_.size()); }
  int num_sides() const { return static_cast<int>(sides_.size()); }

  const Point& vertex(int i) const { return vertices_[i]; }
  const std::vector<Point>& vertices() const { return vertices_; }
  const std::array<int, 3>& triangle(int t) const { return triangles_[t]; }
  const std::vector<std::array<int, 3>>& triangles() const { return triangles_; }
  const Side& side(int f) const { return sides_[f]; }
  const std::vector<Side>& sides() const { return sides_; }
  const std::array<int, 3>& sides_of(int t) const { return side_of_triangle_[t]; }

  Point corner(int t, int i) const { return vertices_[triangles_[t][i]]; }
  double area(int t) const { return area_[t]; }
  Point centroid(int t) const;
  double diameter(int t) const;
  // |T|^{1/2}
  double mesh_size(int t) const;
  // Outward unit normal of triangle t on its local side i.
  Point outward_normal(int t, int i) const;
  double domain_area() const;

  const std::vector<int>& vertex_triangles(int v) const { return vertex_triangles_[v]; }

  const Ancestry& ancestry(int t) const { return ancestry_[t]; }
  bool has_ancestry() const { return !ancestry_.empty(); }

  void write(std::ostream& out) const;
  static Triangulation read(std::istream& in);

 private:
  friend Triangulation refine_nvb(const Triangulation&, const std::vector<int>&);
  friend Triangulation refine_uniform(const Triangulation&);

  static Triangulation bisect_marked_sides(const Triangulation& mesh,
                                           const std::vector<char>& side_marked);
  void finalize(const LabelRule* rule,
                const std::vector<std::pair<std::array<int, 2>, BoundaryLabel>>* labelled_edges);

  std::vector<Point> vertices_;
  std::vector<std::array<int, 3>> triangles_;
  std::vector<Side> sides_;
  std::vector<std::array<int, 3>> side_of_triangle_;
  std::vector<double> area_;
  std::vector<std::vector<int>> vertex_triangles_;
  std::vector<Ancestry> ancestry_;
};

// Newest-vertex bisection of the marked triangles plus conformity closure.
Triangulation refine_nvb(const Triangulation& mesh, const std::vector<int>& marked);
// Every triangle is bisected three times (four children).
Triangulation refine_uniform(const Triangulation& mesh);

// min_T r_in / r_circ
double shape_regularity(const Triangulation& mesh);
double shape_ratio(const Point& a, const Point& b, const Point& c);

}  // namespace ahho
