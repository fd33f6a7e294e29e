#include "ahho/diagnostics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "ahho/parallel.hpp"

namespace ahho {

namespace {

double sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

double conjugate_exponent(double p) { return p / (p - 1); }

// Values of G u at x from precomputed gradient coefficients.
Jacobian reconstructed_gradient(const ElementOperators& op, const Eigen::MatrixXd& coefficients, const Point& x) {
  return (coefficients.transpose() * op.gradient.eval(x)).eval();
}

Eigen::MatrixXd project_cell(const ElementOperators& op, const QuadratureRule& rule, const Eigen::MatrixXd& values) {
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(op.cell_mass.rows(), values.cols());
  for (int q = 0; q < rule.size(); ++q) rhs.noalias() += rule.weights[q] * op.cell.eval(rule.points[q]) * values.row(q);
  return op.cell_mass.ldlt().solve(rhs);
}

Eigen::MatrixXd project_side(const SideBasis& basis, const QuadratureRule& rule, const Eigen::MatrixXd& values) {
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(basis.size(), values.cols());
  for (int q = 0; q < rule.size(); ++q) rhs.noalias() += rule.weights[q] * basis.eval(rule.points[q]) * values.row(q);
  return side_mass(basis, rule).ldlt().solve(rhs);
}

// Load of the first variation: f + lower_weight * zeta (the -lower_weight * u_T part is in P_k).
Eigen::MatrixXd effective_load(const ProblemData& data, const QuadratureRule& rule, int m) {
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(rule.size(), m);
  for (int q = 0; q < rule.size(); ++q) {
    if (data.load) f.row(q) += data.load(rule.points[q]).transpose();
    if (data.lower_weight != 0.0 && data.zeta) f.row(q) += data.lower_weight * data.zeta(rule.points[q]).transpose();
  }
  return f;
}

int error_degree(const DiscreteProblem& problem) {
  return static_cast<int>(std::ceil(problem.p())) * (problem.space().degree() + 1) + 4;
}

}  // namespace

ErrorNorms error_norms(const DiscreteProblem& problem, const Eigen::VectorXd& u, double discrete_energy,
                       const ExactSolution& exact, int degree) {
  const HhoSpace& s = problem.space();
  const Triangulation& mesh = s.mesh();
  const int nt = mesh.num_triangles(), nk = s.cell_size();
  const double p = problem.p(), pp = conjugate_exponent(p);
  if (degree < 0) degree = error_degree(problem);
  const bool has_grad = static_cast<bool>(exact.gradient), has_stress = has_grad || exact.stress;
  std::vector<double> grad(nt, 0.0), stress(nt, 0.0), vol(nt, 0.0);
  parallel_for(nt, [&](int t) {
    const ElementOperators& op = s.element(t);
    const Eigen::MatrixXd ul = s.gather(t, u);
    const Eigen::MatrixXd g = op.grad_op * ul;
    const QuadratureRule rule = triangle_quadrature(degree, mesh, t);
    for (int q = 0; q < rule.size(); ++q) {
      const Point& x = rule.points[q];
      const double w = rule.weights[q];
      if (has_grad || has_stress) {
        const Jacobian a = reconstructed_gradient(op, g, x);
        if (has_grad) grad[t] += w * std::pow((exact.gradient(x) - a).norm(), p);
        if (has_stress) {
          const Jacobian sigma = exact.stress ? exact.stress(x) : problem.density().derivative(exact.gradient(x));
          stress[t] += w * std::pow((sigma - problem.density().derivative(a)).norm(), pp);
        }
      }
      if (exact.u) vol[t] += w * (exact.u(x) - ul.topRows(nk).transpose() * op.cell.eval(x)).squaredNorm();
    }
  });
  ErrorNorms out;
  if (exact.energy) out.energy = std::abs(*exact.energy - discrete_energy);
  if (has_grad) out.gradient = std::pow(sum(grad), 1 / p);
  if (has_stress) out.stress = std::pow(sum(stress), 1 / pp);
  if (exact.u) out.volume = std::sqrt(sum(vol));
  return out;
}

double oscillation_volume(const DiscreteProblem& problem) {
  const HhoSpace& s = problem.space();
  const Triangulation& mesh = s.mesh();
  const ProblemData& data = problem.data();
  if (!data.load && !(data.lower_weight != 0.0 && data.zeta)) return 0.0;
  const double pp = conjugate_exponent(problem.p());
  const int nt = mesh.num_triangles(), m = s.components();
  std::vector<double> local(nt, 0.0);
  parallel_for(nt, [&](int t) {
    const ElementOperators& op = s.element(t);
    const QuadratureRule rule = triangle_quadrature(s.policy().data_degree, mesh, t);
    Eigen::MatrixXd f = effective_load(data, rule, m);
    const Eigen::MatrixXd c = project_cell(op, rule, f);
    double osc = 0.0;
    for (int q = 0; q < rule.size(); ++q)
      osc += rule.weights[q] * std::pow((f.row(q) - (c.transpose() * op.cell.eval(rule.points[q])).transpose()).norm(), pp);
    local[t] = mesh.mesh_size(t) * osc;
  });
  return std::pow(sum(local), 1 / pp);
}

double oscillation_neumann(const DiscreteProblem& problem) {
  const HhoSpace& s = problem.space();
  const Triangulation& mesh = s.mesh();
  const ProblemData& data = problem.data();
  if (!data.neumann) return 0.0;
  const double pp = conjugate_exponent(problem.p());
  const int m = s.components();
  double total = 0.0;
  for (int f = 0; f < mesh.num_sides(); ++f) {
    const Side& side = mesh.side(f);
    const unsigned mask = s.constrained_mask(f);
    if (!side.boundary() || (mask & ((1u << m) - 1)) == (1u << m) - 1) continue;
    const QuadratureRule rule = side_quadrature(s.policy().data_degree, mesh.vertex(side.v[0]), mesh.vertex(side.v[1]));
    const SideBasis basis = s.side_basis(f);
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(rule.size(), m);
    for (int q = 0; q < rule.size(); ++q) {
      const Values val = data.neumann(rule.points[q], side.normal);
      for (int c = 0; c < m; ++c)
        if (!((mask >> c) & 1u)) g(q, c) = val[c];
    }
    const Eigen::MatrixXd c = project_side(basis, rule, g);
    double osc = 0.0;
    for (int q = 0; q < rule.size(); ++q)
      osc += rule.weights[q] * std::pow((g.row(q) - (c.transpose() * basis.eval(rule.points[q])).transpose()).norm(), pp);
    total += side.length * osc;
  }
  return std::pow(total, 1 / pp);
}

LowerBound lower_energy_bound(const DiscreteProblem& problem, const Eigen::VectorXd& u, double discrete_energy,
                              const ExactSolution& exact) {
  if (!exact.gradient) throw std::invalid_argument("lower_energy_bound: exact gradient required");
  if (problem.stabilized() && !exact.u) throw std::invalid_argument("lower_energy_bound: exact solution required");
  const HhoSpace& s = problem.space();
  const Triangulation& mesh = s.mesh();
  const int nt = mesh.num_triangles();
  const int degree = std::max(s.policy().nonlinear_degree, error_degree(problem));
  const StressField sigma = discrete_stress(problem, u);
  std::vector<double> local(nt, 0.0);
  parallel_for(nt, [&](int t) {
    const ElementOperators& op = s.element(t);
    const Eigen::MatrixXd g = op.grad_op * s.gather(t, u);
    const QuadratureRule rule = triangle_quadrature(degree, mesh, t);
    for (int q = 0; q < rule.size(); ++q) {
      const Point& x = rule.points[q];
      const Jacobian r = problem.density().derivative(reconstructed_gradient(op, g, x)) - stress_at(s, sigma, t, x);
      local[t] += rule.weights[q] * r.cwiseProduct(exact.gradient(x)).sum();
    }
  });
  LowerBound out;
  out.without_oscillation = discrete_energy + sum(local);
  if (problem.stabilized()) out.without_oscillation -= stabilization(s, u, interpolate(s, exact.u), problem.p());
  out.with_oscillation = out.without_oscillation - oscillation_volume(problem) - oscillation_neumann(problem);
  return out;
}

DualBound dual_bound(const DiscreteProblem& problem, const Eigen::VectorXd& u, double discrete_energy,
                     const StressField& sigma) {
  const EnergyDensity& w = problem.density();
  if (!w.has_conjugate()) throw UnsupportedError("density '" + w.name() + "' has no convex conjugate");
  const HhoSpace& s = problem.space();
  const Triangulation& mesh = s.mesh();
  const int nt = mesh.num_triangles(), k = s.degree(), m = s.components();
  const PiecewisePolynomial j = companion(s, u);
  std::vector<double> dual(nt, 0.0), comp(nt, 0.0);
  parallel_for(nt, [&](int t) {
    const ElementOperators& op = s.element(t);
    for (int q = 0; q < op.rule.size(); ++q)
      dual[t] -= op.rule.weights[q] * w.conjugate(stress_at(s, sigma, t, op.rule.points[q]));
    const Eigen::MatrixXd g = op.grad_op * s.gather(t, u);
    const QuadratureRule rule = triangle_quadrature(2 * k + 4, mesh, t);
    for (int q = 0; q < rule.size(); ++q) {
      const Point& x = rule.points[q];
      comp[t] += rule.weights[q] * (reconstructed_gradient(op, g, x) - j.grad(t, x)).squaredNorm();
    }
  });
  DualBound out;
  out.dual_energy = sum(dual);
  if (problem.data().dirichlet) {
    for (int f = 0; f < mesh.num_sides(); ++f) {
      const Side& side = mesh.side(f);
      const unsigned mask = s.constrained_mask(f);
      if (!side.boundary() || !mask) continue;
      const QuadratureRule rule = side_quadrature(s.policy().data_degree, mesh.vertex(side.v[0]), mesh.vertex(side.v[1]));
      for (int q = 0; q < rule.size(); ++q) {
        const Values ud = problem.data().dirichlet(rule.points[q]);
        const Values flux = stress_at(s, sigma, side.tplus, rule.points[q]) * side.normal;
        for (int c = 0; c < m; ++c)
          if ((mask >> c) & 1u) out.dual_energy += rule.weights[q] * ud[c] * flux[c];
      }
    }
  }
  out.oscillation = oscillation_volume(problem);
  out.companion = sum(comp);
  out.rhs = discrete_energy - out.dual_energy + out.oscillation + out.companion;
  return out;
}

Extrapolation aitken_extrapolate(const std::vector<double>& values) {
  if (values.size() < 3) throw std::invalid_argument("aitken_extrapolate: at least three values required");
  const std::size_t n = values.size();
  const double x0 = values[n - 3], x1 = values[n - 2], x2 = values[n - 1];
  const double d1 = x1 - x0, d2 = x2 - x1, den = d2 - d1;
  const double scale = std::max({std::abs(x0), std::abs(x1), std::abs(x2), std::numeric_limits<double>::min()});
  if (std::abs(den) <= 1e-14 * scale) return {x2, true};
  return {x2 - d2 * d2 / den, false};
}

RateFit fit_rate(const std::vector<double>& ndof, const std::vector<double>& values, int window) {
  if (ndof.size() != values.size()) throw std::invalid_argument("fit_rate: size mismatch");
  const int n = static_cast<int>(ndof.size());
  const int first = window > 0 ? std::max(0, n - window) : 0;
  if (n - first < 2) throw std::invalid_argument("fit_rate: at least two points required");
  Eigen::MatrixXd a(n - first, 2);
  Eigen::VectorXd b(n - first);
  for (int i = first; i < n; ++i) {
    if (!(ndof[i] > 0 && values[i] > 0)) throw std::invalid_argument("fit_rate: values must be positive");
    a(i - first, 0) = std::log(ndof[i]);
    a(i - first, 1) = 1.0;
    b[i - first] = std::log(values[i]);
  }
  const Eigen::Vector2d c = a.colPivHouseholderQr().solve(b);
  RateFit fit;
  fit.slope = c[0];
  fit.intercept = c[1];
  fit.points = n - first;
  fit.residual = std::sqrt((a * c - b).squaredNorm() / fit.points);
  return fit;
}

RateFit fit_rate(const std::vector<LevelReport>& reports, const ReportQuantity& quantity, int window) {
  std::vector<double> ndof, values;
  for (const LevelReport& r : reports) {
    const std::optional<double> v = quantity(r);
    if (!v) continue;
    ndof.push_back(r.ndof);
    values.push_back(*v);
  }
  return fit_rate(ndof, values, window);
}

HdivResiduals hdiv_residuals(const DiscreteProblem& problem, const Eigen::VectorXd& u, const StressField& sigma) {
  const HhoSpace& s = problem.space();
  const Triangulation& mesh = s.mesh();
  const ProblemData& data = problem.data();
  const int m = s.components(), k = s.degree(), nk = s.cell_size();
  HdivResiduals out;
  for (int f = 0; f < mesh.num_sides(); ++f) {
    const Side& side = mesh.side(f);
    const QuadratureRule rule = side_quadrature(std::max(2 * k + 4, s.policy().data_degree),
                                                mesh.vertex(side.v[0]), mesh.vertex(side.v[1]));
    Eigen::MatrixXd flux(rule.size(), m);
    for (int q = 0; q < rule.size(); ++q)
      flux.row(q) = (stress_at(s, sigma, side.tplus, rule.points[q]) * side.normal).transpose();
    if (!side.boundary()) {
      double jump = 0.0;
      for (int q = 0; q < rule.size(); ++q)
        jump += rule.weights[q] *
                (flux.row(q) - (stress_at(s, sigma, side.tminus, rule.points[q]) * side.normal).transpose()).squaredNorm();
      out.normal_jump = std::max(out.normal_jump, std::sqrt(jump));
      continue;
    }
    const unsigned mask = s.constrained_mask(f);
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(rule.size(), m);
    bool any = false;
    for (int q = 0; q < rule.size(); ++q) {
      const Values val = data.neumann ? data.neumann(rule.points[q], side.normal) : Values(Values::Zero(m));
      for (int c = 0; c < m; ++c)
        if (!((mask >> c) & 1u)) g(q, c) = val[c], any = true;
    }
    if (!any) continue;
    const SideBasis basis = s.side_basis(f);
    const Eigen::MatrixXd pg = project_side(basis, rule, g);
    double err = 0.0;
    for (int q = 0; q < rule.size(); ++q) {
      const Eigen::RowVectorXd target = (pg.transpose() * basis.eval(rule.points[q])).transpose();
      for (int c = 0; c < m; ++c)
        if (!((mask >> c) & 1u)) err += rule.weights[q] * std::pow(flux(q, c) - target[c], 2);
    }
    out.neumann = std::max(out.neumann, std::sqrt(err));
  }
  std::vector<double> div(mesh.num_triangles(), 0.0);
  parallel_for(mesh.num_triangles(), [&](int t) {
    const ElementOperators& op = s.element(t);
    const QuadratureRule rule = triangle_quadrature(std::max(2 * k + 4, s.policy().data_degree), mesh, t);
    Eigen::MatrixXd pf = project_cell(op, rule, effective_load(data, rule, m));
    if (data.lower_weight != 0.0) pf -= data.lower_weight * s.gather(t, u).topRows(nk);
    double err = 0.0;
    for (int q = 0; q < rule.size(); ++q) {
      const Eigen::VectorXd d = sigma.coefficients[t].transpose() * op.gradient.div(rule.points[q]);
      err += rule.weights[q] * (d + pf.transpose() * op.cell.eval(rule.points[q])).squaredNorm();
    }
    div[t] = std::sqrt(err);
  });
  for (double d : div) out.divergence = std::max(out.divergence, d);
  return out;
}

double commutativity_defect(const HhoSpace& space, const Field& v, const JacobianField& dv) {
  const Triangulation& mesh = space.mesh();
  const Eigen::VectorXd iv = interpolate(space, v);
  const int m = space.components();
  std::vector<double> local(mesh.num_triangles(), 0.0);
  parallel_for(mesh.num_triangles(), [&](int t) {
    const ElementOperators& op = space.element(t);
    const QuadratureRule rule = triangle_quadrature(space.policy().data_degree, mesh, t);
    const Eigen::MatrixXd mass = vector_mass(op.gradient, rule);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(mass.rows(), m);
    for (int q = 0; q < rule.size(); ++q) {
      const GradientMatrix e = op.gradient.eval(rule.points[q]);
      const Jacobian d = dv(rule.points[q]);
      for (int c = 0; c < m; ++c) rhs.col(c) += rule.weights[q] * e * d.row(c).transpose();
    }
    const Eigen::MatrixXd diff = op.grad_op * space.gather(t, iv) - mass.ldlt().solve(rhs);
    local[t] = std::sqrt((diff.transpose() * mass * diff).trace());
  });
  double worst = 0.0;
  for (double x : local) worst = std::max(worst, x);
  return worst;
}

double companion_moment_defect(const HhoSpace& space, const Eigen::VectorXd& v) {
  const Triangulation& mesh = space.mesh();
  const PiecewisePolynomial j = companion(space, v);
  const int m = space.components(), nk = space.cell_size(), ns = space.side_size();
  const int degree = 2 * space.degree() + 4;
  std::vector<double> cells(mesh.num_triangles(), 0.0), sides(mesh.num_sides(), 0.0);
  parallel_for(mesh.num_triangles(), [&](int t) {
    const ElementOperators& op = space.element(t);
    const QuadratureRule rule = triangle_quadrature(degree, mesh, t);
    Eigen::MatrixXd val(rule.size(), m);
    for (int q = 0; q < rule.size(); ++q) val.row(q) = j.eval(t, rule.points[q]).transpose();
    cells[t] = (project_cell(op, rule, val) - space.gather(t, v).topRows(nk)).cwiseAbs().maxCoeff();
  });
  parallel_for(mesh.num_sides(), [&](int f) {
    const Side& side = mesh.side(f);
    const SideBasis basis = space.side_basis(f);
    const QuadratureRule rule = side_quadrature(degree, mesh.vertex(side.v[0]), mesh.vertex(side.v[1]));
    Eigen::MatrixXd val(rule.size(), m), own(ns, m);
    for (int q = 0; q < rule.size(); ++q) val.row(q) = j.eval(side.tplus, rule.points[q]).transpose();
    for (int c = 0; c < m; ++c) own.col(c) = v.segment(space.side_dof(f, c), ns);
    sides[f] = (project_side(basis, rule, val) - own).cwiseAbs().maxCoeff();
  });
  double worst = 0.0;
  for (double x : cells) worst = std::max(worst, x);
  for (double x : sides) worst = std::max(worst, x);
  return worst;
}

namespace {

class CourantObjective final : public Objective {
 public:
  CourantObjective(const ProblemData& data, const Triangulation& mesh, const ComponentMask& dirichlet, int degree)
      : data_(data), mesh_(mesh), m_(data.density->components()) {
    const int nv = mesh.num_vertices(), n = nv * m_;
    fixed_.assign(n, 0);
    values_ = Eigen::VectorXd::Zero(n);
    linear_ = Eigen::VectorXd::Zero(n);
    for (int f = 0; f < mesh.num_sides(); ++f) {
      const Side& side = mesh.side(f);
      if (!side.boundary()) continue;
      const unsigned mask = dirichlet(side.label);
      for (int v : side.v)
        for (int c = 0; c < m_; ++c)
          if ((mask >> c) & 1u) {
            fixed_[v * m_ + c] = 1;
            values_[v * m_ + c] = data.dirichlet ? data.dirichlet(mesh.vertex(v))[c] : 0.0;
          }
      if (!data.neumann) continue;
      const Point a = mesh.vertex(side.v[0]), b = mesh.vertex(side.v[1]);
      const QuadratureRule rule = side_quadrature(degree, a, b);
      for (int q = 0; q < rule.size(); ++q) {
        const double s = (rule.points[q] - a).norm() / side.length;
        const Values g = data.neumann(rule.points[q], side.normal);
        for (int c = 0; c < m_; ++c)
          if (!((mask >> c) & 1u)) {
            linear_[side.v[0] * m_ + c] += rule.weights[q] * (1 - s) * g[c];
            linear_[side.v[1] * m_ + c] += rule.weights[q] * s * g[c];
          }
      }
    }
    grads_.resize(mesh.num_triangles());
    for (int t = 0; t < mesh.num_triangles(); ++t) {
      const Point a = mesh.corner(t, 0), b = mesh.corner(t, 1), c = mesh.corner(t, 2);
      Eigen::Matrix2d j;
      j.col(0) = b - a;
      j.col(1) = c - a;
      const Eigen::Matrix2d jit = j.inverse().transpose();
      Eigen::Matrix<double, 3, 2> g;
      g.row(1) = (jit * Eigen::Vector2d(1, 0)).transpose();
      g.row(2) = (jit * Eigen::Vector2d(0, 1)).transpose();
      g.row(0) = -g.row(1) - g.row(2);
      grads_[t] = g;
      const bool lower = data.lower_weight != 0.0 && data.zeta;
      if (!data.load && !lower) continue;
      const QuadratureRule rule = triangle_quadrature(degree, mesh, t);
      for (int q = 0; q < rule.size(); ++q) {
        const Point& x = rule.points[q];
        const Eigen::Vector2d l = j.partialPivLu().solve(x - a);
        const Eigen::Vector3d lambda(1 - l[0] - l[1], l[0], l[1]);
        Values f = Values::Zero(m_);
        if (data.load) f += data.load(x);
        if (lower) {
          const Values z = data.zeta(x);
          f += data.lower_weight * z;
          constant_ += rule.weights[q] * data.lower_weight / 2 * z.squaredNorm();
        }
        for (int i = 0; i < 3; ++i)
          for (int cc = 0; cc < m_; ++cc) linear_[mesh.triangle(t)[i] * m_ + cc] += rule.weights[q] * lambda[i] * f[cc];
      }
    }
    for (int i = 0; i < n; ++i)
      if (!fixed_[i]) free_.push_back(i);
  }

  int num_free() const { return static_cast<int>(free_.size()); }
  Eigen::VectorXd restrict_free(const Eigen::VectorXd& v) const {
    Eigen::VectorXd out(free_.size());
    for (std::size_t i = 0; i < free_.size(); ++i) out[i] = v[free_[i]];
    return out;
  }
  Eigen::VectorXd expand(const Eigen::VectorXd& x) const {
    Eigen::VectorXd v = values_;
    for (std::size_t i = 0; i < free_.size(); ++i) v[free_[i]] = x[i];
    return v;
  }
  const Eigen::VectorXd& linear() const { return linear_; }

  double energy(const Eigen::VectorXd& x) const override { return evaluate(x, 0).energy; }
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const override { return restrict_free(evaluate(x, 1).grad); }
  Eigen::SparseMatrix<double> hessian(const Eigen::VectorXd& x) const override {
    const Local loc = evaluate(x, 2);
    std::vector<int> index(fixed_.size(), -1);
    for (std::size_t i = 0; i < free_.size(); ++i) index[free_[i]] = static_cast<int>(i);
    std::vector<Eigen::Triplet<double>> trip;
    for (int t = 0; t < mesh_.num_triangles(); ++t) {
      const auto dofs = local_dofs(t);
      for (int a = 0; a < 3 * m_; ++a) {
        if (index[dofs[a]] < 0) continue;
        for (int b = 0; b < 3 * m_; ++b)
          if (index[dofs[b]] >= 0) trip.emplace_back(index[dofs[a]], index[dofs[b]], loc.hess[t](a, b));
      }
    }
    Eigen::SparseMatrix<double> h(num_free(), num_free());
    h.setFromTriplets(trip.begin(), trip.end());
    return h;
  }

 private:
  struct Local {
    double energy = 0.0;
    Eigen::VectorXd grad;
    std::vector<Eigen::MatrixXd> hess;
  };

  std::vector<int> local_dofs(int t) const {
    std::vector<int> dofs(3 * m_);
    for (int i = 0; i < 3; ++i)
      for (int c = 0; c < m_; ++c) dofs[i * m_ + c] = mesh_.triangle(t)[i] * m_ + c;
    return dofs;
  }

  Local evaluate(const Eigen::VectorXd& x, int order) const {
    const Eigen::VectorXd v = expand(x);
    const int nt = mesh_.num_triangles();
    const bool lower = data_.lower_weight != 0.0;
    std::vector<double> e(nt, 0.0);
    std::vector<Eigen::VectorXd> g(order >= 1 ? nt : 0);
    Local out;
    if (order >= 2) out.hess.resize(nt);
    parallel_for(nt, [&](int t) {
      const auto dofs = local_dofs(t);
      const double area = mesh_.area(t);
      Eigen::Matrix<double, 3, Eigen::Dynamic> nodal(3, m_);
      for (int i = 0; i < 3; ++i)
        for (int c = 0; c < m_; ++c) nodal(i, c) = v[dofs[i * m_ + c]];
      const Jacobian a = (nodal.transpose() * grads_[t]).eval();
      e[t] = area * data_.density->value(a);
      Eigen::Matrix3d mass = Eigen::Matrix3d::Constant(area / 12);
      mass.diagonal().array() = area / 6;
      if (lower) e[t] += data_.lower_weight / 2 * (nodal.transpose() * mass * nodal).trace();
      if (order < 1) return;
      const Jacobian dw = data_.density->derivative(a);
      g[t] = Eigen::VectorXd::Zero(3 * m_);
      for (int i = 0; i < 3; ++i)
        for (int c = 0; c < m_; ++c) {
          g[t][i * m_ + c] = area * dw.row(c).dot(grads_[t].row(i));
          if (lower) g[t][i * m_ + c] += data_.lower_weight * mass.row(i).dot(nodal.col(c));
        }
      if (order < 2) return;
      const DensityHessian h = data_.density->hessian(a);
      Eigen::MatrixXd& hl = out.hess[t];
      hl = Eigen::MatrixXd::Zero(3 * m_, 3 * m_);
      for (int i = 0; i < 3; ++i)
        for (int c = 0; c < m_; ++c)
          for (int jn = 0; jn < 3; ++jn)
            for (int d = 0; d < m_; ++d) {
              hl(i * m_ + c, jn * m_ + d) =
                  area * grads_[t].row(i) * h.block(2 * c, 2 * d, 2, 2) * grads_[t].row(jn).transpose();
              if (lower && c == d) hl(i * m_ + c, jn * m_ + d) += data_.lower_weight * mass(i, jn);
            }
    });
    out.energy = constant_ + sum(e) - linear_.dot(v);
    if (order >= 1) {
      out.grad = -linear_;
      for (int t = 0; t < nt; ++t) {
        const auto dofs = local_dofs(t);
        for (int a = 0; a < 3 * m_; ++a) out.grad[dofs[a]] += g[t][a];
      }
    }
    return out;
  }

  const ProblemData& data_;
  const Triangulation& mesh_;
  int m_;
  std::vector<char> fixed_;
  std::vector<int> free_;
  Eigen::VectorXd values_;
  Eigen::VectorXd linear_;
  double constant_ = 0.0;
  std::vector<Eigen::Matrix<double, 3, 2>> grads_;
};

}  // namespace

CourantResult courant_p1_minimize(const ProblemData& data, const Triangulation& mesh, const ComponentMask& dirichlet,
                                  const SolverSettings& settings, int data_degree) {
  if (!data.density) throw std::invalid_argument("courant_p1_minimize: density required");
  const CourantObjective objective(data, mesh, dirichlet, data_degree);
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(objective.num_free());
  const double tolerance =
      settings.gradient_tolerance * std::max(1.0, objective.restrict_free(objective.linear()).norm());
  const DiscreteSolution sol = minimize(objective, x0, settings, tolerance);
  CourantResult out;
  out.nodal = objective.expand(sol.u);
  out.energy = objective.energy(sol.u);
  out.ndof = objective.num_free();
  out.converged = sol.converged;
  out.iterations = sol.iterations;
  return out;
}

}  // namespace ahho
