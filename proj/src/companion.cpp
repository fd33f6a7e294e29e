#include <algorithm>
#include <map>
#include <utility>

#include "ahho/hho.hpp"
#include "ahho/parallel.hpp"

namespace ahho {

namespace {

using NodeKey = std::vector<std::pair<int, int>>;

Eigen::Vector3d barycentric(const Triangulation& mesh, int t, const Point& x) {
  const Point a = mesh.corner(t, 0), b = mesh.corner(t, 1), c = mesh.corner(t, 2);
  Eigen::Matrix2d m;
  m.col(0) = b - a;
  m.col(1) = c - a;
  const Eigen::Vector2d l = m.partialPivLu().solve(x - a);
  return {1.0 - l[0] - l[1], l[0], l[1]};
}

// Principal lattice of degree n on triangle t: barycentric multi-indices.
std::vector<std::array<int, 3>> lattice(int n) {
  std::vector<std::array<int, 3>> nodes;
  for (int i = n; i >= 0; --i)
    for (int j = n - i; j >= 0; --j) nodes.push_back({i, j, n - i - j});
  return nodes;
}

Point lattice_point(const Triangulation& mesh, int t, const std::array<int, 3>& idx, int n) {
  return (idx[0] * mesh.corner(t, 0) + idx[1] * mesh.corner(t, 1) + idx[2] * mesh.corner(t, 2)) /
         static_cast<double>(n);
}

NodeKey node_key(const Triangulation& mesh, int t, const std::array<int, 3>& idx) {
  NodeKey key;
  for (int i = 0; i < 3; ++i)
    if (idx[i] > 0) key.emplace_back(mesh.triangle(t)[i], idx[i]);
  std::sort(key.begin(), key.end());
  if (key.size() == 3) key.emplace_back(-1, t);  // interior nodes are never shared
  return key;
}

// Coefficients in `basis` of the polynomial taking `values` at the lattice nodes.
Eigen::MatrixXd fit_lattice(const Triangulation& mesh, int t, const CellBasis& basis,
                            const Eigen::MatrixXd& values) {
  const auto nodes = lattice(basis.degree());
  Eigen::MatrixXd vander(nodes.size(), basis.size());
  for (std::size_t r = 0; r < nodes.size(); ++r)
    vander.row(r) = basis.eval(lattice_point(mesh, t, nodes[r], basis.degree())).transpose();
  return vander.partialPivLu().solve(values);
}

}  // namespace

PiecewisePolynomial companion(const HhoSpace& space, const Eigen::VectorXd& v) {
  const Triangulation& mesh = space.mesh();
  const int k = space.degree(), m = space.components(), nk = space.cell_size();
  const int ns = space.side_size(), nt = mesh.num_triangles();
  const PiecewisePolynomial r = potential_reconstruction(space, v);

  // Step 1: averaged nodal values of R v on the continuous P_{k+1} lattice.
  std::map<NodeKey, std::pair<Eigen::VectorXd, int>> sums;
  const auto nodes1 = lattice(k + 1);
  for (int t = 0; t < nt; ++t) {
    for (const auto& idx : nodes1) {
      const Values val = r.eval(t, lattice_point(mesh, t, idx, k + 1));
      auto [it, inserted] = sums.try_emplace(node_key(mesh, t, idx), Eigen::VectorXd(val), 1);
      if (!inserted) {
        it->second.first += val;
        it->second.second += 1;
      }
    }
  }
  std::vector<Eigen::MatrixXd> j1(nt);
  parallel_for(nt, [&](int t) {
    Eigen::MatrixXd values(nodes1.size(), m);
    for (std::size_t i = 0; i < nodes1.size(); ++i) {
      const auto& entry = sums.at(node_key(mesh, t, nodes1[i]));
      values.row(i) = (entry.first / entry.second).transpose();
    }
    j1[t] = fit_lattice(mesh, t, space.element(t).potential, values);
  });
  auto eval_j1 = [&](int t, const Point& x) -> Eigen::RowVectorXd {
    return space.element(t).potential.eval(x).transpose() * j1[t];
  };

  // Step 2: side bubbles lambda_a lambda_b q(2 lambda_b - 1) fix the side moments.
  std::vector<Eigen::MatrixXd> alpha(mesh.num_sides());
  parallel_for(mesh.num_sides(), [&](int f) {
    const Side& s = mesh.side(f);
    const SideBasis basis = space.side_basis(f);
    const QuadratureRule rule = side_quadrature(2 * k + 4, mesh.vertex(s.v[0]), mesh.vertex(s.v[1]));
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(ns, ns), rhs = Eigen::MatrixXd::Zero(ns, m);
    Eigen::MatrixXd vf(ns, m);
    for (int c = 0; c < m; ++c) vf.col(c) = v.segment(space.side_dof(f, c), ns);
    for (int q = 0; q < rule.size(); ++q) {
      const double tq = basis.parameter(rule.points[q]);
      const Eigen::VectorXd psi = basis.eval(rule.points[q]);
      a.noalias() += rule.weights[q] * tq * (1.0 - tq) * psi * psi.transpose();
      rhs.noalias() += rule.weights[q] * psi *
                       (psi.transpose() * vf - eval_j1(s.tplus, rule.points[q]));
    }
    alpha[f] = a.ldlt().solve(rhs);
  });

  auto eval_j2 = [&](int t, const Point& x) -> Eigen::RowVectorXd {
    Eigen::RowVectorXd val = eval_j1(t, x);
    const Eigen::Vector3d lam = barycentric(mesh, t, x);
    for (int i = 0; i < 3; ++i) {
      const int f = mesh.sides_of(t)[i];
      const Side& s = mesh.side(f);
      int la = 0, lb = 0;
      for (int j = 0; j < 3; ++j) {
        if (mesh.triangle(t)[j] == s.v[0]) la = j;
        if (mesh.triangle(t)[j] == s.v[1]) lb = j;
      }
      Eigen::VectorXd powers(ns);
      powers[0] = 1.0;
      for (int j = 1; j < ns; ++j) powers[j] = powers[j - 1] * (2.0 * lam[lb] - 1.0);
      val += lam[la] * lam[lb] * (powers.transpose() * alpha[f]);
    }
    return val;
  };

  // Step 3: cell bubbles fix the cell moments; then represent exactly in P_{k+3}.
  PiecewisePolynomial out;
  out.mesh = space.mesh_ptr();
  out.degree = k + 3;
  out.components = m;
  out.bases.resize(nt);
  out.coefficients.resize(nt);
  const auto nodes3 = lattice(k + 3);
  parallel_for(nt, [&](int t) {
    const ElementOperators& op = space.element(t);
    const QuadratureRule rule = triangle_quadrature(2 * k + 4, mesh, t);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(nk, nk), rhs = Eigen::MatrixXd::Zero(nk, m);
    Eigen::MatrixXd vt(nk, m);
    for (int c = 0; c < m; ++c) vt.col(c) = v.segment(space.cell_dof(t, c), nk);
    for (int q = 0; q < rule.size(); ++q) {
      const Point& x = rule.points[q];
      const Eigen::Vector3d lam = barycentric(mesh, t, x);
      const Eigen::VectorXd phi = op.cell.eval(x);
      a.noalias() += rule.weights[q] * lam.prod() * phi * phi.transpose();
      rhs.noalias() += rule.weights[q] * phi * (phi.transpose() * vt - eval_j2(t, x));
    }
    const Eigen::MatrixXd beta = a.ldlt().solve(rhs);
    out.bases[t] = CellBasis(op.cell.center(), op.cell.scale(), k + 3);
    Eigen::MatrixXd values(nodes3.size(), m);
    for (std::size_t i = 0; i < nodes3.size(); ++i) {
      const Point x = lattice_point(mesh, t, nodes3[i], k + 3);
      const Eigen::Vector3d lam = barycentric(mesh, t, x);
      values.row(i) = eval_j2(t, x) + lam.prod() * (op.cell.eval(x).transpose() * beta);
    }
    out.coefficients[t] = fit_lattice(mesh, t, out.bases[t], values);
  });
  return out;
}

}  // namespace ahho
