#include "ahho/hho.hpp"

#include <cmath>
#include <stdexcept>

#include "ahho/parallel.hpp"

namespace ahho {

const char* to_string(Variant v) { return v == Variant::RT ? "rt" : "stabilized"; }

HhoSpace::HhoSpace(std::shared_ptr<const Triangulation> mesh, int degree, int components,
                   Variant variant, const ComponentMask& dirichlet, QuadraturePolicy policy)
    : mesh_(std::move(mesh)), k_(degree), m_(components), variant_(variant), policy_(policy) {
  if (k_ < 0 || k_ > 8) throw std::invalid_argument("HhoSpace: degree must lie in [0, 8]");
  if (m_ < 1 || m_ > kMaxComponents)
    throw std::invalid_argument("HhoSpace: component count must lie in [1, 4]");
  dirichlet_.assign(mesh_->num_sides(), 0u);
  for (int f = 0; f < mesh_->num_sides(); ++f) {
    const Side& s = mesh_->side(f);
    if (s.boundary() && dirichlet) dirichlet_[f] = dirichlet(s.label) & ((1u << m_) - 1u);
  }
  ops_.resize(mesh_->num_triangles());
  parallel_for(mesh_->num_triangles(), [this](int t) { build_element(t); });
}

int HhoSpace::gradient_size() const {
  return variant_ == Variant::RT ? rt_dim(k_) : 2 * dim_pk(k_);
}

int HhoSpace::ndof() const {
  return m_ * (mesh_->num_triangles() * cell_size() + mesh_->num_sides() * side_size());
}

std::vector<int> HhoSpace::local_dofs(int t) const {
  const int nk = cell_size(), ns = side_size(), nloc = local_size();
  std::vector<int> dofs(m_ * nloc);
  const auto& sides = mesh_->sides_of(t);
  for (int c = 0; c < m_; ++c) {
    for (int i = 0; i < nk; ++i) dofs[c * nloc + i] = cell_dof(t, c, i);
    for (int j = 0; j < 3; ++j)
      for (int i = 0; i < ns; ++i) dofs[c * nloc + nk + j * ns + i] = side_dof(sides[j], c, i);
  }
  return dofs;
}

Eigen::MatrixXd HhoSpace::gather(int t, const Eigen::VectorXd& v) const {
  const int nk = cell_size(), ns = side_size(), nloc = local_size();
  Eigen::MatrixXd u(nloc, m_);
  const auto& sides = mesh_->sides_of(t);
  for (int c = 0; c < m_; ++c) {
    u.col(c).head(nk) = v.segment(cell_dof(t, c), nk);
    for (int j = 0; j < 3; ++j) u.col(c).segment(nk + j * ns, ns) = v.segment(side_dof(sides[j], c), ns);
  }
  return u;
}

SideBasis HhoSpace::side_basis(int f) const {
  const Side& s = mesh_->side(f);
  return SideBasis(mesh_->vertex(s.v[0]), mesh_->vertex(s.v[1]), k_);
}

void HhoSpace::build_element(int t) {
  const Triangulation& mesh = *mesh_;
  ElementOperators& op = ops_[t];
  const Point xc = mesh.centroid(t);
  const double h = mesh.diameter(t);
  op.cell = CellBasis(xc, h, k_);
  op.potential = CellBasis(xc, h, k_ + 1);
  op.gradient = VectorBasis(xc, h, k_, variant_ == Variant::RT);

  const int nk = cell_size(), ns = side_size(), nloc = local_size();
  const int ng = op.gradient.size(), np = op.potential.size();

  const QuadratureRule exact = triangle_quadrature(2 * k_ + 2, mesh, t);
  op.cell_mass = cell_mass(op.cell, exact);
  const Eigen::MatrixXd grad_mass = vector_mass(op.gradient, exact);

  Eigen::MatrixXd bg = Eigen::MatrixXd::Zero(ng, nloc);
  Eigen::MatrixXd stiff = Eigen::MatrixXd::Zero(np, np);
  Eigen::MatrixXd br = Eigen::MatrixXd::Zero(np, nloc);
  Eigen::VectorXd mean_psi = Eigen::VectorXd::Zero(np);
  Eigen::VectorXd mean_phi = Eigen::VectorXd::Zero(nloc);
  Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(nk, np);
  for (int q = 0; q < exact.size(); ++q) {
    const Point& x = exact.points[q];
    const double w = exact.weights[q];
    const Eigen::VectorXd phi = op.cell.eval(x);
    const Eigen::VectorXd psi = op.potential.eval(x);
    const GradientMatrix dpsi = op.potential.grad(x);
    bg.leftCols(nk).noalias() -= w * op.gradient.div(x) * phi.transpose();
    stiff.noalias() += w * dpsi * dpsi.transpose();
    br.leftCols(nk).noalias() -= w * op.potential.laplacian(x) * phi.transpose();
    mean_psi += w * psi;
    mean_phi.head(nk) += w * phi;
    cross.noalias() += w * phi * psi.transpose();
  }

  for (int i = 0; i < 3; ++i) {
    const int f = mesh.sides_of(t)[i];
    const Side& s = mesh.side(f);
    op.sides[i] = side_basis(f);
    op.side_length[i] = s.length;
    const Point n = mesh.outward_normal(t, i);
    const QuadratureRule srule = side_quadrature(2 * k_ + 2, mesh.vertex(s.v[0]), mesh.vertex(s.v[1]));
    for (int q = 0; q < srule.size(); ++q) {
      const Point& x = srule.points[q];
      const double w = srule.weights[q];
      const Eigen::VectorXd psi_f = op.sides[i].eval(x);
      bg.middleCols(nk + i * ns, ns).noalias() += w * (op.gradient.eval(x) * n) * psi_f.transpose();
      br.middleCols(nk + i * ns, ns).noalias() += w * (op.potential.grad(x) * n) * psi_f.transpose();
    }
  }
  op.grad_op = grad_mass.ldlt().solve(bg);

  // Neumann problem for the potential with the mean fixed by a multiplier.
  Eigen::MatrixXd saddle = Eigen::MatrixXd::Zero(np + 1, np + 1);
  saddle.topLeftCorner(np, np) = stiff;
  saddle.block(0, np, np, 1) = mean_psi;
  saddle.block(np, 0, 1, np) = mean_psi.transpose();
  Eigen::MatrixXd rhs(np + 1, nloc);
  rhs.topRows(np) = br;
  rhs.row(np) = mean_phi.transpose();
  op.potential_op = saddle.fullPivLu().solve(rhs).topRows(np);

  // S_{K,S} v = Pi_S^k (v_S - v_K - (1 - Pi_K^k) R v)
  const Eigen::MatrixXd lower = op.cell_mass.ldlt().solve(cross);  // Pi_K^k on P_{k+1}
  Eigen::MatrixXd cell_select = Eigen::MatrixXd::Zero(nk, nloc);
  cell_select.leftCols(nk).setIdentity();
  for (int i = 0; i < 3; ++i) {
    const Side& s = mesh.side(mesh.sides_of(t)[i]);
    const QuadratureRule srule = side_quadrature(2 * k_ + 3, mesh.vertex(s.v[0]), mesh.vertex(s.v[1]));
    Eigen::MatrixXd ms = Eigen::MatrixXd::Zero(ns, ns);
    Eigen::MatrixXd tk = Eigen::MatrixXd::Zero(ns, nk);
    Eigen::MatrixXd tk1 = Eigen::MatrixXd::Zero(ns, np);
    for (int q = 0; q < srule.size(); ++q) {
      const Point& x = srule.points[q];
      const double w = srule.weights[q];
      const Eigen::VectorXd psi_f = op.sides[i].eval(x);
      ms.noalias() += w * psi_f * psi_f.transpose();
      tk.noalias() += w * psi_f * op.cell.eval(x).transpose();
      tk1.noalias() += w * psi_f * op.potential.eval(x).transpose();
    }
    Eigen::MatrixXd select = Eigen::MatrixXd::Zero(ns, nloc);
    select.middleCols(nk + i * ns, ns).setIdentity();
    const Eigen::MatrixXd trace = tk * cell_select + tk1 * op.potential_op - tk * lower * op.potential_op;
    op.stab_op[i] = select - ms.ldlt().solve(trace);
  }

  op.rule = triangle_quadrature(policy_.nonlinear_degree, mesh, t);
  const int nq = op.rule.size();
  op.grad_at_points.resize(2 * nq, nloc);
  Eigen::MatrixXd stack(ng, 2 * nq);
  for (int q = 0; q < nq; ++q) {
    const GradientMatrix e = op.gradient.eval(op.rule.points[q]);
    op.grad_at_points.middleRows(2 * q, 2).noalias() = e.transpose() * op.grad_op;
    stack.col(2 * q) = op.rule.weights[q] * e.col(0);
    stack.col(2 * q + 1) = op.rule.weights[q] * e.col(1);
  }
  op.stress_projector = grad_mass.ldlt().solve(stack);

  for (int i = 0; i < 3; ++i) {
    const Side& s = mesh.side(mesh.sides_of(t)[i]);
    op.side_rules[i] =
        side_quadrature(policy_.nonlinear_degree, mesh.vertex(s.v[0]), mesh.vertex(s.v[1]));
    Eigen::MatrixXd values(op.side_rules[i].size(), ns);
    for (int q = 0; q < op.side_rules[i].size(); ++q)
      values.row(q) = op.sides[i].eval(op.side_rules[i].points[q]).transpose();
    op.stab_at_points[i] = values * op.stab_op[i];
  }
}

Values PiecewisePolynomial::eval(int t, const Point& x) const {
  return (coefficients[t].transpose() * bases[t].eval(x)).eval();
}

Jacobian PiecewisePolynomial::grad(int t, const Point& x) const {
  return (coefficients[t].transpose() * bases[t].grad(x)).eval();
}

Eigen::VectorXd interpolate(const HhoSpace& space, const Field& v, int degree) {
  const Triangulation& mesh = space.mesh();
  const int m = space.components(), nk = space.cell_size(), ns = space.side_size();
  const int d = degree >= 0 ? degree : space.policy().data_degree;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(space.ndof());
  parallel_for(mesh.num_triangles(), [&](int t) {
    const ElementOperators& op = space.element(t);
    const QuadratureRule rule = triangle_quadrature(d, mesh, t);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(nk, m);
    for (int q = 0; q < rule.size(); ++q)
      rhs.noalias() += rule.weights[q] * op.cell.eval(rule.points[q]) * v(rule.points[q]).transpose();
    const Eigen::MatrixXd coef = op.cell_mass.ldlt().solve(rhs);
    for (int c = 0; c < m; ++c) out.segment(space.cell_dof(t, c), nk) = coef.col(c);
  });
  parallel_for(mesh.num_sides(), [&](int f) {
    const Side& s = mesh.side(f);
    const SideBasis basis = space.side_basis(f);
    const QuadratureRule rule = side_quadrature(d, mesh.vertex(s.v[0]), mesh.vertex(s.v[1]));
    Eigen::MatrixXd mass = Eigen::MatrixXd::Zero(ns, ns), rhs = Eigen::MatrixXd::Zero(ns, m);
    for (int q = 0; q < rule.size(); ++q) {
      const Eigen::VectorXd psi = basis.eval(rule.points[q]);
      mass.noalias() += rule.weights[q] * psi * psi.transpose();
      rhs.noalias() += rule.weights[q] * psi * v(rule.points[q]).transpose();
    }
    const Eigen::MatrixXd coef = mass.ldlt().solve(rhs);
    for (int c = 0; c < m; ++c) out.segment(space.side_dof(f, c), ns) = coef.col(c);
  });
  return out;
}

Eigen::MatrixXd gradient_coefficients(const HhoSpace& space, const Eigen::VectorXd& v, int t) {
  return space.element(t).grad_op * space.gather(t, v);
}

Jacobian gradient_at(const HhoSpace& space, const Eigen::VectorXd& v, int t, const Point& x) {
  const Eigen::MatrixXd coef = gradient_coefficients(space, v, t);
  return (coef.transpose() * space.element(t).gradient.eval(x)).eval();
}

PiecewisePolynomial potential_reconstruction(const HhoSpace& space, const Eigen::VectorXd& v) {
  PiecewisePolynomial r;
  r.mesh = space.mesh_ptr();
  r.degree = space.degree() + 1;
  r.components = space.components();
  const int nt = space.mesh().num_triangles();
  r.bases.resize(nt);
  r.coefficients.resize(nt);
  parallel_for(nt, [&](int t) {
    r.bases[t] = space.element(t).potential;
    r.coefficients[t] = space.element(t).potential_op * space.gather(t, v);
  });
  return r;
}

Eigen::MatrixXd stabilization_trace(const HhoSpace& space, const Eigen::VectorXd& v, int t, int i) {
  return space.element(t).stab_op[i] * space.gather(t, v);
}

std::vector<double> stabilization_local(const HhoSpace& space, const Eigen::VectorXd& u,
                                        const Eigen::VectorXd& v, double p) {
  const int nt = space.mesh().num_triangles();
  std::vector<double> out(nt, 0.0);
  parallel_for(nt, [&](int t) {
    const ElementOperators& op = space.element(t);
    const Eigen::MatrixXd uu = space.gather(t, u), vv = space.gather(t, v);
    double sum = 0.0;
    for (int i = 0; i < 3; ++i) {
      const Eigen::MatrixXd su = op.stab_at_points[i] * uu, sv = op.stab_at_points[i] * vv;
      double side = 0.0;
      for (int q = 0; q < su.rows(); ++q) {
        const double a = su.row(q).norm();
        if (a == 0.0) continue;
        side += op.side_rules[i].weights[q] * std::pow(a, p - 2.0) * su.row(q).dot(sv.row(q));
      }
      sum += std::pow(op.side_length[i], 1.0 - p) * side;
    }
    out[t] = sum;
  });
  return out;
}

double stabilization(const HhoSpace& space, const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                     double p) {
  double sum = 0.0;
  for (double s : stabilization_local(space, u, v, p)) sum += s;
  return sum;
}

double discrete_seminorm(const HhoSpace& space, const Eigen::VectorXd& v, double p) {
  const Triangulation& mesh = space.mesh();
  const int nk = space.cell_size(), ns = space.side_size(), nt = mesh.num_triangles();
  std::vector<double> local(nt, 0.0);
  parallel_for(nt, [&](int t) {
    const ElementOperators& op = space.element(t);
    const Eigen::MatrixXd u = space.gather(t, v);
    double sum = 0.0;
    for (int q = 0; q < op.rule.size(); ++q) {
      const Eigen::MatrixXd g = op.cell.grad(op.rule.points[q]).transpose() * u.topRows(nk);
      sum += op.rule.weights[q] * std::pow(g.norm(), p);
    }
    for (int i = 0; i < 3; ++i) {
      double side = 0.0;
      for (int q = 0; q < op.side_rules[i].size(); ++q) {
        const Point& x = op.side_rules[i].points[q];
        const Eigen::VectorXd diff = u.topRows(nk).transpose() * op.cell.eval(x) -
                                     u.middleRows(nk + i * ns, ns).transpose() * op.sides[i].eval(x);
        side += op.side_rules[i].weights[q] * std::pow(diff.norm(), p);
      }
      sum += std::pow(op.side_length[i], 1.0 - p) * side;
    }
    local[t] = sum;
  });
  double total = 0.0;
  for (double s : local) total += s;
  return std::pow(total, 1.0 / p);
}

}  // namespace ahho
