#include "ahho/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace ahho {

namespace {

using EdgeKey = std::array<int, 2>;

EdgeKey edge_key(int a, int b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; }

double signed_area(const Point& a, const Point& b, const Point& c) {
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

// Strictly inside the open segment (a, b).
bool on_open_segment(const Point& p, const Point& a, const Point& b) {
  const Point d = b - a;
  const double len2 = d.squaredNorm();
  const double cross = d.x() * (p.y() - a.y()) - d.y() * (p.x() - a.x());
  if (std::abs(cross) > 1e-12 * len2) return false;
  const double s = (p - a).dot(d) / len2;
  return s > 1e-12 && s < 1.0 - 1e-12;
}

}  // namespace

std::string to_string(BoundaryLabel label) {
  switch (label) {
    case BoundaryLabel::Interior: return "interior";
    case BoundaryLabel::Dirichlet: return "dirichlet";
    case BoundaryLabel::Neumann: return "neumann";
    case BoundaryLabel::Gamma1: return "gamma1";
    case BoundaryLabel::Gamma2: return "gamma2";
    case BoundaryLabel::Gamma3: return "gamma3";
  }
  return "interior";
}

BoundaryLabel label_from_string(const std::string& name) {
  for (auto l : {BoundaryLabel::Interior, BoundaryLabel::Dirichlet, BoundaryLabel::Neumann,
                 BoundaryLabel::Gamma1, BoundaryLabel::Gamma2, BoundaryLabel::Gamma3})
    if (to_string(l) == name) return l;
  throw MeshError("unknown boundary label '" + name + "'");
}

Triangulation Triangulation::build(std::vector<Point> vertices,
                                   std::vector<std::array<int, 3>> triangles,
                                   const LabelRule& rule) {
  const int nv = static_cast<int>(vertices.size());
  // Provisional side numbering in order of first appearance, used for tie breaking.
  std::map<EdgeKey, int> numbering;
  for (const auto& tri : triangles) {
    for (int i = 0; i < 3; ++i) {
      if (tri[i] < 0 || tri[i] >= nv) throw MeshError("triangle references invalid vertex");
    }
    for (int i = 0; i < 3; ++i) {
      numbering.try_emplace(edge_key(tri[(i + 1) % 3], tri[(i + 2) % 3]),
                            static_cast<int>(numbering.size()));
    }
  }
  for (auto& tri : triangles) {
    int best = 0;
    double best_len = -1.0;
    int best_id = 0;
    for (int i = 0; i < 3; ++i) {
      const int a = tri[(i + 1) % 3], b = tri[(i + 2) % 3];
      const double len = (vertices[a] - vertices[b]).norm();
      const int id = numbering.at(edge_key(a, b));
      const double tol = 1e-12 * std::max(len, best_len);
      if (len > best_len + tol || (std::abs(len - best_len) <= tol && id < best_id)) {
        best = i;
        best_len = len;
        best_id = id;
      }
    }
    std::rotate(tri.begin(), tri.begin() + best, tri.end());
  }
  return build_with_refinement_edges(std::move(vertices), std::move(triangles), rule);
}

Triangulation Triangulation::build_with_refinement_edges(std::vector<Point> vertices,
                                                         std::vector<std::array<int, 3>> triangles,
                                                         const LabelRule& rule) {
  Triangulation mesh;
  mesh.vertices_ = std::move(vertices);
  mesh.triangles_ = std::move(triangles);
  const int nv = mesh.num_vertices();
  for (auto& tri : mesh.triangles_) {
    for (int i = 0; i < 3; ++i)
      if (tri[i] < 0 || tri[i] >= nv) throw MeshError("triangle references invalid vertex");
    // Swapping the two refinement-edge vertices keeps the refinement edge.
    if (signed_area(mesh.vertices_[tri[0]], mesh.vertices_[tri[1]], mesh.vertices_[tri[2]]) < 0)
      std::swap(tri[1], tri[2]);
  }
  mesh.finalize(&rule, nullptr);
  return mesh;
}

void Triangulation::finalize(
    const LabelRule* rule,
    const std::vector<std::pair<std::array<int, 2>, BoundaryLabel>>* labelled_edges) {
  const int nt = num_triangles();
  area_.resize(nt);
  double scale = 0.0;
  for (const auto& p : vertices_) scale = std::max(scale, p.norm());
  scale = std::max(scale, 1.0);
  for (int t = 0; t < nt; ++t) {
    const auto& tri = triangles_[t];
    area_[t] = signed_area(vertices_[tri[0]], vertices_[tri[1]], vertices_[tri[2]]);
    if (!(area_[t] > 1e-14 * scale * scale))
      throw MeshError("degenerate triangle " + std::to_string(t));
  }

  sides_.clear();
  side_of_triangle_.assign(nt, {-1, -1, -1});
  std::map<EdgeKey, int> lookup;
  for (int t = 0; t < nt; ++t) {
    const auto& tri = triangles_[t];
    for (int i = 0; i < 3; ++i) {
      const int a = tri[(i + 1) % 3], b = tri[(i + 2) % 3];
      auto [it, inserted] = lookup.try_emplace(edge_key(a, b), static_cast<int>(sides_.size()));
      if (inserted) {
        Side s;
        s.v = {a, b};
        s.tplus = t;
        const Point d = vertices_[b] - vertices_[a];
        s.length = d.norm();
        s.normal = Point(d.y(), -d.x()) / s.length;
        sides_.push_back(s);
      } else {
        Side& s = sides_[it->second];
        if (s.tminus >= 0) throw MeshError("side shared by more than two triangles");
        if (s.v[0] != b || s.v[1] != a) throw MeshError("inconsistent triangle orientation");
        s.tminus = t;
      }
      side_of_triangle_[t][i] = it->second;
    }
  }

  std::vector<int> boundary;
  for (int f = 0; f < num_sides(); ++f)
    if (sides_[f].boundary()) boundary.push_back(f);
  for (int f : boundary) {
    const Point& a = vertices_[sides_[f].v[0]];
    const Point& b = vertices_[sides_[f].v[1]];
    for (int g : boundary) {
      for (int v : sides_[g].v) {
        if (on_open_segment(vertices_[v], a, b))
          throw MeshError("hanging node " + std::to_string(v) + " on side " + std::to_string(f));
      }
    }
  }

  std::map<EdgeKey, BoundaryLabel> inherited;
  if (labelled_edges)
    for (const auto& [key, label] : *labelled_edges) inherited[edge_key(key[0], key[1])] = label;
  for (int f : boundary) {
    Side& s = sides_[f];
    BoundaryLabel label = BoundaryLabel::Interior;
    if (auto it = inherited.find(edge_key(s.v[0], s.v[1])); it != inherited.end())
      label = it->second;
    else if (rule && *rule)
      label = (*rule)(vertices_[s.v[0]], vertices_[s.v[1]]);
    if (label == BoundaryLabel::Interior)
      throw MeshError("unlabeled boundary side " + std::to_string(f));
    s.label = label;
  }

  vertex_triangles_.assign(num_vertices(), {});
  for (int t = 0; t < nt; ++t)
    for (int v : triangles_[t]) vertex_triangles_[v].push_back(t);
}

Point Triangulation::centroid(int t) const {
  return (corner(t, 0) + corner(t, 1) + corner(t, 2)) / 3.0;
}

double Triangulation::diameter(int t) const {
  const auto& s = side_of_triangle_[t];
  return std::max({sides_[s[0]].length, sides_[s[1]].length, sides_[s[2]].length});
}

double Triangulation::mesh_size(int t) const { return std::sqrt(area_[t]); }

Point Triangulation::outward_normal(int t, int i) const {
  const Side& s = sides_[side_of_triangle_[t][i]];
  return s.tplus == t ? s.normal : Point(-s.normal);
}

double Triangulation::domain_area() const {
  double sum = 0.0;
  for (double a : area_) sum += a;
  return sum;
}

void Triangulation::write(std::ostream& out) const {
  out << "vertices " << num_vertices() << " / triangles " << num_triangles() << " / sides "
      << num_sides() << '\n';
  char buf[64];
  for (const auto& p : vertices_) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g", p.x(), p.y());
    out << buf << '\n';
  }
  for (const auto& tri : triangles_) out << tri[0] << ' ' << tri[1] << ' ' << tri[2] << " 0\n";
  for (const auto& s : sides_) out << s.v[0] << ' ' << s.v[1] << ' ' << to_string(s.label) << '\n';
}

Triangulation Triangulation::read(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw MeshError("empty mesh file");
  int nv = 0, nt = 0, ns = 0;
  if (std::sscanf(line.c_str(), "vertices %d / triangles %d / sides %d", &nv, &nt, &ns) != 3)
    throw MeshError("malformed mesh header");
  std::vector<Point> vertices(nv);
  for (auto& p : vertices) {
    if (!(in >> p.x() >> p.y())) throw MeshError("malformed vertex row");
  }
  std::vector<std::array<int, 3>> triangles(nt);
  for (auto& tri : triangles) {
    int ref = 0;
    if (!(in >> tri[0] >> tri[1] >> tri[2] >> ref) || ref < 0 || ref > 2)
      throw MeshError("malformed triangle row");
    std::rotate(tri.begin(), tri.begin() + ref, tri.end());
  }
  std::vector<std::pair<std::array<int, 2>, BoundaryLabel>> labels;
  for (int i = 0; i < ns; ++i) {
    int a = 0, b = 0;
    std::string name;
    if (!(in >> a >> b >> name)) throw MeshError("malformed side row");
    labels.push_back({{a, b}, label_from_string(name)});
  }
  Triangulation mesh;
  mesh.vertices_ = std::move(vertices);
  mesh.triangles_ = std::move(triangles);
  for (auto& tri : mesh.triangles_) {
    for (int v : tri)
      if (v < 0 || v >= nv) throw MeshError("triangle references invalid vertex");
    if (signed_area(mesh.vertices_[tri[0]], mesh.vertices_[tri[1]], mesh.vertices_[tri[2]]) < 0)
      std::swap(tri[1], tri[2]);
  }
  mesh.finalize(nullptr, &labels);
  if (mesh.num_sides() != ns) throw MeshError("side count mismatch");
  return mesh;
}

Triangulation refine_nvb(const Triangulation& mesh, const std::vector<int>& marked) {
  const int nt = mesh.num_triangles();
  std::vector<char> edge_marked(mesh.num_sides(), 0);
  std::vector<int> work;
  for (int t : marked) {
    if (t < 0 || t >= nt) throw MeshError("marked triangle out of range");
    const int f = mesh.sides_of(t)[0];
    if (!edge_marked[f]) {
      edge_marked[f] = 1;
      work.push_back(f);
    }
  }
  // Closure: a triangle with any marked side must have its refinement edge marked.
  while (!work.empty()) {
    const int f = work.back();
    work.pop_back();
    for (int t : {mesh.side(f).tplus, mesh.side(f).tminus}) {
      if (t < 0) continue;
      const int r = mesh.sides_of(t)[0];
      if (!edge_marked[r]) {
        edge_marked[r] = 1;
        work.push_back(r);
      }
    }
  }

  return Triangulation::bisect_marked_sides(mesh, edge_marked);
}

Triangulation Triangulation::bisect_marked_sides(const Triangulation& mesh,
                                                 const std::vector<char>& edge_marked) {
  const int nt = mesh.num_triangles();
  Triangulation fine;
  fine.vertices_ = mesh.vertices_;
  std::map<EdgeKey, int> midpoint;
  for (int f = 0; f < mesh.num_sides(); ++f) {
    if (!edge_marked[f]) continue;
    const auto& s = mesh.side(f);
    midpoint[edge_key(s.v[0], s.v[1])] = static_cast<int>(fine.vertices_.size());
    fine.vertices_.push_back(0.5 * (mesh.vertex(s.v[0]) + mesh.vertex(s.v[1])));
  }

  struct Node {
    std::array<int, 3> v;
    std::array<Eigen::Vector3d, 3> bary;
    int depth;
  };
  for (int t = 0; t < nt; ++t) {
    std::vector<Node> stack{{mesh.triangle(t),
                             {Eigen::Vector3d::UnitX(), Eigen::Vector3d::UnitY(),
                              Eigen::Vector3d::UnitZ()},
                             0}};
    std::vector<Node> leaves;
    while (!stack.empty()) {
      Node n = stack.back();
      stack.pop_back();
      auto it = midpoint.find(edge_key(n.v[1], n.v[2]));
      if (it == midpoint.end()) {
        leaves.push_back(n);
        continue;
      }
      const int m = it->second;
      const Eigen::Vector3d bm = 0.5 * (n.bary[1] + n.bary[2]);
      // Push the second child first so the first child is emitted first.
      stack.push_back({{m, n.v[2], n.v[0]}, {bm, n.bary[2], n.bary[0]}, n.depth + 1});
      stack.push_back({{m, n.v[0], n.v[1]}, {bm, n.bary[0], n.bary[1]}, n.depth + 1});
    }
    for (const auto& leaf : leaves) {
      fine.triangles_.push_back(leaf.v);
      fine.ancestry_.push_back({t, leaf.depth, leaf.bary});
    }
  }

  std::vector<std::pair<std::array<int, 2>, BoundaryLabel>> labels;
  for (const auto& s : mesh.sides()) {
    if (!s.boundary()) continue;
    if (auto it = midpoint.find(edge_key(s.v[0], s.v[1])); it != midpoint.end()) {
      labels.push_back({{s.v[0], it->second}, s.label});
      labels.push_back({{it->second, s.v[1]}, s.label});
    } else {
      labels.push_back({s.v, s.label});
    }
  }
  fine.finalize(nullptr, &labels);
  return fine;
}

Triangulation refine_uniform(const Triangulation& mesh) {
  return Triangulation::bisect_marked_sides(mesh, std::vector<char>(mesh.num_sides(), 1));
}

double shape_ratio(const Point& a, const Point& b, const Point& c) {
  const double la = (b - c).norm(), lb = (c - a).norm(), lc = (a - b).norm();
  const double area = std::abs(signed_area(a, b, c));
  const double r_in = 2.0 * area / (la + lb + lc);
  const double r_circ = la * lb * lc / (4.0 * area);
  return r_in / r_circ;
}

double shape_regularity(const Triangulation& mesh) {
  double result = 1.0;
  for (int t = 0; t < mesh.num_triangles(); ++t)
    result = std::min(result, shape_ratio(mesh.corner(t, 0), mesh.corner(t, 1), mesh.corner(t, 2)));
  return result;
}

}  // namespace ahho
