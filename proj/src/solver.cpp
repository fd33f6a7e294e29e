#include "ahho/solver.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

#include <Eigen/SparseCholesky>

#include "ahho/parallel.hpp"

namespace ahho {

QuadraturePolicy default_quadrature(const EnergyDensity& density, int k) {
  QuadraturePolicy q;
  q.nonlinear_degree = density.quadrature_exponent() * (k + 1);
  q.data_degree = 2 * k + 8;
  return q;
}

const char* to_string(Optimizer o) { return o == Optimizer::Newton ? "newton" : "lbfgs"; }

DiscreteProblem::DiscreteProblem(std::shared_ptr<const HhoSpace> space, ProblemData data)
    : space_(std::move(space)), data_(std::move(data)) {
  if (!data_.density) throw std::invalid_argument("DiscreteProblem: density required");
  const HhoSpace& s = *space_;
  const Triangulation& mesh = s.mesh();
  const int m = s.components(), nk = s.cell_size(), ns = s.side_size();
  if (data_.density->components() != m)
    throw std::invalid_argument("DiscreteProblem: density and space component counts differ");
  const int d = s.policy().data_degree;

  free_index_.assign(s.ndof(), 0);
  dirichlet_ = Eigen::VectorXd::Zero(s.ndof());
  linear_ = Eigen::VectorXd::Zero(s.ndof());

  for (int f = 0; f < mesh.num_sides(); ++f) {
    const Side& side = mesh.side(f);
    if (!side.boundary()) continue;
    const unsigned mask = s.constrained_mask(f);
    const SideBasis basis = s.side_basis(f);
    const QuadratureRule rule = side_quadrature(d, mesh.vertex(side.v[0]), mesh.vertex(side.v[1]));
    Eigen::MatrixXd mass = Eigen::MatrixXd::Zero(ns, ns);
    Eigen::MatrixXd ud = Eigen::MatrixXd::Zero(ns, m), g = Eigen::MatrixXd::Zero(ns, m);
    for (int q = 0; q < rule.size(); ++q) {
      const Eigen::VectorXd psi = basis.eval(rule.points[q]);
      mass.noalias() += rule.weights[q] * psi * psi.transpose();
      if (mask && data_.dirichlet) ud.noalias() += rule.weights[q] * psi * data_.dirichlet(rule.points[q]).transpose();
      if (data_.neumann) g.noalias() += rule.weights[q] * psi * data_.neumann(rule.points[q], side.normal).transpose();
    }
    ud = mass.ldlt().solve(ud);
    for (int c = 0; c < m; ++c) {
      if ((mask >> c) & 1u) {
        for (int i = 0; i < ns; ++i) {
          free_index_[s.side_dof(f, c, i)] = -1;
          dirichlet_[s.side_dof(f, c, i)] = ud(i, c);
        }
      } else {
        linear_.segment(s.side_dof(f, c), ns) += g.col(c);
      }
    }
  }

  std::vector<double> constants(mesh.num_triangles(), 0.0);
  parallel_for(mesh.num_triangles(), [&](int t) {
    if (!data_.load && !(data_.lower_weight != 0.0 && data_.zeta)) return;
    const ElementOperators& op = s.element(t);
    const QuadratureRule rule = triangle_quadrature(d, mesh, t);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(nk, m);
    for (int q = 0; q < rule.size(); ++q) {
      Values val = Values::Zero(m);
      if (data_.load) val += data_.load(rule.points[q]);
      if (data_.lower_weight != 0.0 && data_.zeta) {
        const Values z = data_.zeta(rule.points[q]);
        val += data_.lower_weight * z;
        constants[t] += rule.weights[q] * data_.lower_weight / 2 * z.squaredNorm();
      }
      rhs.noalias() += rule.weights[q] * op.cell.eval(rule.points[q]) * val.transpose();
    }
    for (int c = 0; c < m; ++c) linear_.segment(s.cell_dof(t, c), nk) = rhs.col(c);
  });
  for (double c : constants) constant_ += c;

  for (int i = 0; i < s.ndof(); ++i) {
    if (free_index_[i] < 0) continue;
    free_index_[i] = static_cast<int>(free_.size());
    free_.push_back(i);
  }
}

Eigen::VectorXd DiscreteProblem::apply_dirichlet(Eigen::VectorXd v) const {
  for (int i = 0; i < v.size(); ++i)
    if (free_index_[i] < 0) v[i] = dirichlet_[i];
  return v;
}

Eigen::VectorXd DiscreteProblem::restrict_free(const Eigen::VectorXd& v) const {
  Eigen::VectorXd out(free_.size());
  for (std::size_t i = 0; i < free_.size(); ++i) out[i] = v[free_[i]];
  return out;
}

Eigen::VectorXd DiscreteProblem::expand(const Eigen::VectorXd& free) const {
  Eigen::VectorXd out = dirichlet_;
  for (std::size_t i = 0; i < free_.size(); ++i) out[free_[i]] = free[i];
  return out;
}

Eigen::VectorXd DiscreteProblem::initial_guess() const {
  const HhoSpace& s = *space_;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(s.ndof());
  for (int c = 0; c < s.components(); ++c) {
    for (int t = 0; t < s.mesh().num_triangles(); ++t) v[s.cell_dof(t, c)] = 1.0;
    for (int f = 0; f < s.mesh().num_sides(); ++f) v[s.side_dof(f, c)] = 1.0;
  }
  return apply_dirichlet(v);
}

DiscreteProblem::Local DiscreteProblem::local(int t, const Eigen::MatrixXd& u, int order) const {
  const HhoSpace& s = *space_;
  const ElementOperators& op = s.element(t);
  const EnergyDensity& w = *data_.density;
  const int m = s.components(), nloc = s.local_size(), nk = s.cell_size(), n = m * nloc;
  Local out;
  if (order >= 1) out.grad = Eigen::VectorXd::Zero(n);
  if (order >= 2) out.hess = Eigen::MatrixXd::Zero(n, n);

  Jacobian a(m, 2);
  for (int q = 0; q < op.rule.size(); ++q) {
    const auto b = op.grad_at_points.middleRows(2 * q, 2);
    a = (b * u).transpose();
    const double wq = op.rule.weights[q];
    out.energy += wq * w.value(a);
    if (order < 1) continue;
    const Jacobian dw = w.derivative(a);
    for (int c = 0; c < m; ++c) out.grad.segment(c * nloc, nloc).noalias() += wq * b.transpose() * dw.row(c).transpose();
    if (order < 2) continue;
    const DensityHessian h = w.hessian(a);
    for (int c = 0; c < m; ++c)
      for (int e = 0; e < m; ++e)
        out.hess.block(c * nloc, e * nloc, nloc, nloc).noalias() +=
            wq * b.transpose() * h.block(2 * c, 2 * e, 2, 2) * b;
  }

  if (data_.lower_weight != 0.0) {
    const double lw = data_.lower_weight;
    for (int c = 0; c < m; ++c) {
      const Eigen::VectorXd mu = op.cell_mass * u.col(c).head(nk);
      out.energy += lw / 2 * u.col(c).head(nk).dot(mu);
      if (order >= 1) out.grad.segment(c * nloc, nk) += lw * mu;
      if (order >= 2) out.hess.block(c * nloc, c * nloc, nk, nk) += lw * op.cell_mass;
    }
  }

  if (stabilized()) {
    const double p = this->p();
    for (int i = 0; i < 3; ++i) {
      const Eigen::MatrixXd& st = op.stab_at_points[i];
      const Eigen::MatrixXd su = st * u;
      const double scale = std::pow(op.side_length[i], 1.0 - p);
      for (int q = 0; q < su.rows(); ++q) {
        const double a2 = su.row(q).squaredNorm();
        const double omega = scale * op.side_rules[i].weights[q];
        out.energy += omega * std::pow(a2, p / 2) / p;
        if (order < 1 || (a2 == 0.0 && p > 2.0)) continue;
        const double reg = a2 + (p < 2.0 ? 1e-12 : 0.0);
        const double c1 = omega * std::pow(reg, (p - 2) / 2);
        for (int c = 0; c < m; ++c) out.grad.segment(c * nloc, nloc).noalias() += c1 * su(q, c) * st.row(q).transpose();
        if (order < 2) continue;
        const Eigen::MatrixXd outer = st.row(q).transpose() * st.row(q);
        for (int c = 0; c < m; ++c)
          for (int e = 0; e < m; ++e) {
            double coef = (c == e ? c1 : 0.0);
            if (p != 2.0 && reg > 0.0) coef += c1 * (p - 2) * su(q, c) * su(q, e) / reg;
            out.hess.block(c * nloc, e * nloc, nloc, nloc).noalias() += coef * outer;
          }
      }
    }
  }
  return out;
}

double DiscreteProblem::energy(const Eigen::VectorXd& v) const {
  const int nt = space_->mesh().num_triangles();
  std::vector<double> e(nt);
  parallel_for(nt, [&](int t) { e[t] = local(t, space_->gather(t, v), 0).energy; });
  double sum = constant_;
  for (double x : e) sum += x;
  return sum - linear_.dot(v);
}

Eigen::VectorXd DiscreteProblem::gradient(const Eigen::VectorXd& v) const {
  const int nt = space_->mesh().num_triangles();
  std::vector<Eigen::VectorXd> g(nt);
  parallel_for(nt, [&](int t) { g[t] = local(t, space_->gather(t, v), 1).grad; });
  Eigen::VectorXd out = -linear_;
  for (int t = 0; t < nt; ++t) {
    const std::vector<int> dofs = space_->local_dofs(t);
    for (std::size_t i = 0; i < dofs.size(); ++i) out[dofs[i]] += g[t][i];
  }
  return out;
}

Eigen::SparseMatrix<double> DiscreteProblem::hessian(const Eigen::VectorXd& v) const {
  const int nt = space_->mesh().num_triangles();
  std::vector<Eigen::MatrixXd> h(nt);
  parallel_for(nt, [&](int t) { h[t] = local(t, space_->gather(t, v), 2).hess; });
  std::vector<Eigen::Triplet<double>> trip;
  const std::size_t n = space_->components() * space_->local_size();
  trip.reserve(nt * n * n);
  for (int t = 0; t < nt; ++t) {
    const std::vector<int> dofs = space_->local_dofs(t);
    for (std::size_t i = 0; i < dofs.size(); ++i) {
      const int fi = free_index_[dofs[i]];
      if (fi < 0) continue;
      for (std::size_t j = 0; j < dofs.size(); ++j) {
        const int fj = free_index_[dofs[j]];
        if (fj >= 0) trip.emplace_back(fi, fj, h[t](i, j));
      }
    }
  }
  Eigen::SparseMatrix<double> out(num_free(), num_free());
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

namespace {

class HhoObjective final : public Objective {
 public:
  explicit HhoObjective(const DiscreteProblem& problem) : problem_(problem) {}
  double energy(const Eigen::VectorXd& x) const override { return problem_.energy(problem_.expand(x)); }
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const override {
    return problem_.restrict_free(problem_.gradient(problem_.expand(x)));
  }
  Eigen::SparseMatrix<double> hessian(const Eigen::VectorXd& x) const override {
    return problem_.hessian(problem_.expand(x));
  }

 private:
  const DiscreteProblem& problem_;
};


// Below this predicted decrease the energy carries no usable information in double precision.
bool roundoff_level(double predicted, double e) {
  return std::abs(predicted) <= 1e-12 * (1.0 + std::abs(e));
}

struct LineSearchResult {
  bool accepted = false;
  double alpha = 0.0;
  Eigen::VectorXd x;
  double energy = 0.0;
  Eigen::VectorXd grad;
};

LineSearchResult line_search(const Objective& ev, const Eigen::VectorXd& x, double e, const Eigen::VectorXd& g,
                             const Eigen::VectorXd& d, double alpha0, const SolverSettings& settings) {
  LineSearchResult r;
  const double slope = g.dot(d);
  if (roundoff_level(alpha0 * slope, e)) {
    Eigen::VectorXd xn = x + alpha0 * d;
    Eigen::VectorXd gn = ev.gradient(xn);
    if (gn.norm() < g.norm()) return {true, alpha0, xn, ev.energy(xn), gn};
  }
  double alpha = alpha0;
  for (int i = 0; i < settings.max_backtracks; ++i, alpha /= 2) {
    Eigen::VectorXd xn = x + alpha * d;
    const double en = ev.energy(xn);
    if (std::isfinite(en) && en <= e + settings.armijo * alpha * slope) return {true, alpha, xn, en, ev.gradient(xn)};
    if (roundoff_level(alpha * slope, e)) {
      Eigen::VectorXd gn = ev.gradient(xn);
      if (gn.norm() < g.norm()) return {true, alpha, xn, en, gn};
    }
  }
  return r;
}

DiscreteSolution newton(const Objective& ev, Eigen::VectorXd x, const SolverSettings& settings, double tolerance) {
  DiscreteSolution sol;
  double e = ev.energy(x);
  Eigen::VectorXd g = ev.gradient(x);
  sol.tolerance = tolerance;
  double shift = 0.0;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  bool analyzed = false;
  int it = 0;
  for (; it < settings.max_iterations && g.norm() > sol.tolerance; ++it) {
    Eigen::SparseMatrix<double> h = ev.hessian(x);
    double scale = 0.0;
    for (int i = 0; i < h.rows(); ++i) scale = std::max(scale, std::abs(h.coeff(i, i)));
    scale = std::max(scale, 1e-300);
    if (!analyzed) {
      ldlt.analyzePattern(h);
      analyzed = true;
    }
    LineSearchResult step;
    for (int attempt = 0; attempt < 40; ++attempt) {
      Eigen::SparseMatrix<double> hs = h;
      if (shift > 0.0)
        for (int i = 0; i < hs.rows(); ++i) hs.coeffRef(i, i) += shift * scale;
      ldlt.factorize(hs);
      Eigen::VectorXd d;
      if (ldlt.info() == Eigen::Success) d = ldlt.solve(-g);
      if (ldlt.info() == Eigen::Success && d.allFinite() && g.dot(d) < 0.0) {
        step = line_search(ev, x, e, g, d, 1.0, settings);
        if (step.accepted) break;
      }
      shift = std::max(10.0 * shift, 1e-10);
    }
    if (!step.accepted) break;
    const double moved = (step.x - x).lpNorm<Eigen::Infinity>();
    x = std::move(step.x);
    e = step.energy;
    g = std::move(step.grad);
    if (step.alpha == 1.0)
      shift = shift > 1e-10 ? shift / 10 : 0.0;
    else if (step.alpha < 0.25)
      shift = std::max(4.0 * shift, 1e-10);
    if (moved <= settings.step_tolerance * (1.0 + x.lpNorm<Eigen::Infinity>())) {
      ++it;
      break;
    }
  }
  sol.u = std::move(x);
  sol.energy = e;
  sol.iterations = it;
  sol.gradient_norm = g.norm();
  sol.converged = sol.gradient_norm <= sol.tolerance;
  return sol;
}

DiscreteSolution lbfgs(const Objective& ev, Eigen::VectorXd x, const SolverSettings& settings, double tolerance) {
  DiscreteSolution sol;
  double e = ev.energy(x);
  Eigen::VectorXd g = ev.gradient(x);
  sol.tolerance = tolerance;
  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> memory;
  int it = 0;
  for (; it < settings.max_iterations && g.norm() > sol.tolerance; ++it) {
    Eigen::VectorXd d = -g;
    std::vector<double> alpha(memory.size());
    for (int i = static_cast<int>(memory.size()) - 1; i >= 0; --i) {
      const auto& [s, y] = memory[i];
      alpha[i] = s.dot(d) / y.dot(s);
      d -= alpha[i] * y;
    }
    if (!memory.empty()) d *= memory.back().first.dot(memory.back().second) / memory.back().second.squaredNorm();
    for (std::size_t i = 0; i < memory.size(); ++i) {
      const auto& [s, y] = memory[i];
      d += (alpha[i] - y.dot(d) / y.dot(s)) * s;
    }
    double alpha0 = memory.empty() ? 1.0 / std::max(1.0, g.norm()) : 1.0;
    if (g.dot(d) >= 0.0) {
      memory.clear();
      d = -g;
      alpha0 = 1.0 / std::max(1.0, g.norm());
    }
    LineSearchResult step = line_search(ev, x, e, g, d, alpha0, settings);
    if (!step.accepted) {
      if (memory.empty()) break;
      memory.clear();
      continue;
    }
    Eigen::VectorXd s = step.x - x, y = step.grad - g;
    const double moved = s.lpNorm<Eigen::Infinity>();
    if (s.dot(y) > 1e-14 * s.norm() * y.norm()) {
      memory.emplace_back(std::move(s), std::move(y));
      if (static_cast<int>(memory.size()) > settings.lbfgs_memory) memory.pop_front();
    }
    x = std::move(step.x);
    e = step.energy;
    g = std::move(step.grad);
    if (moved <= settings.step_tolerance * (1.0 + x.lpNorm<Eigen::Infinity>())) {
      ++it;
      break;
    }
  }
  sol.u = std::move(x);
  sol.energy = e;
  sol.iterations = it;
  sol.gradient_norm = g.norm();
  sol.converged = sol.gradient_norm <= sol.tolerance;
  return sol;
}

void check_settings(const SolverSettings& settings) {
  if (!(settings.gradient_tolerance > 0) || !(settings.step_tolerance > 0) || settings.max_iterations < 1)
    throw std::invalid_argument("SolverSettings: tolerances and iteration budget must be positive");
}

}  // namespace

DiscreteSolution minimize(const Objective& objective, const Eigen::VectorXd& initial,
                          const SolverSettings& settings, double tolerance) {
  check_settings(settings);
  if (initial.size() == 0) {
    DiscreteSolution sol;
    sol.energy = objective.energy(initial);
    sol.converged = true;
    return sol;
  }
  return settings.optimizer == Optimizer::Newton ? newton(objective, initial, settings, tolerance)
                                                 : lbfgs(objective, initial, settings, tolerance);
}

DiscreteSolution minimize(const DiscreteProblem& problem, const Eigen::VectorXd& initial,
                          const SolverSettings& settings) {
  check_settings(settings);
  const Eigen::VectorXd x0 = problem.restrict_free(problem.apply_dirichlet(initial));
  const double tolerance =
      settings.gradient_tolerance * std::max(1.0, problem.restrict_free(problem.linear_term()).norm());
  DiscreteSolution sol = minimize(HhoObjective(problem), x0, settings, tolerance);
  sol.u = problem.expand(sol.u);
  return sol;
}

StressField discrete_stress(const DiscreteProblem& problem, const Eigen::VectorXd& u) {
  const HhoSpace& s = problem.space();
  const int nt = s.mesh().num_triangles(), m = s.components();
  StressField out;
  out.coefficients.resize(nt);
  parallel_for(nt, [&](int t) {
    const ElementOperators& op = s.element(t);
    const Eigen::MatrixXd ul = s.gather(t, u);
    Eigen::MatrixXd dw(2 * op.rule.size(), m);
    for (int q = 0; q < op.rule.size(); ++q) {
      const Jacobian a = (op.grad_at_points.middleRows(2 * q, 2) * ul).transpose();
      dw.middleRows(2 * q, 2) = problem.density().derivative(a).transpose();
    }
    out.coefficients[t] = op.stress_projector * dw;
  });
  return out;
}

Jacobian stress_at(const HhoSpace& space, const StressField& sigma, int t, const Point& x) {
  return (sigma.coefficients[t].transpose() * space.element(t).gradient.eval(x)).eval();
}

double ele_residual(const DiscreteProblem& problem, const Eigen::VectorXd& u, const StressField& sigma,
                    const Eigen::VectorXd& w_in) {
  const HhoSpace& s = problem.space();
  const Triangulation& mesh = s.mesh();
  const int nt = mesh.num_triangles(), k = s.degree(), m = s.components(), nk = s.cell_size();
  Eigen::VectorXd w = w_in;
  for (int i = 0; i < w.size(); ++i)
    if (problem.constrained_dof(i)) w[i] = 0.0;
  std::vector<double> local(nt, 0.0);
  parallel_for(nt, [&](int t) {
    const ElementOperators& op = s.element(t);
    const Eigen::MatrixXd gw = op.grad_op * s.gather(t, w);
    const QuadratureRule rule = triangle_quadrature(2 * k + 2, mesh, t);
    double sum = 0.0;
    for (int q = 0; q < rule.size(); ++q) {
      const GradientMatrix e = op.gradient.eval(rule.points[q]);
      const Eigen::MatrixXd a = sigma.coefficients[t].transpose() * e, b = gw.transpose() * e;
      sum += rule.weights[q] * a.cwiseProduct(b).sum();
    }
    if (problem.data().lower_weight != 0.0)
      for (int c = 0; c < m; ++c)
        sum += problem.data().lower_weight * u.segment(s.cell_dof(t, c), nk).dot(op.cell_mass * w.segment(s.cell_dof(t, c), nk));
    local[t] = sum;
  });
  double r = -problem.linear_term().dot(w);
  for (double x : local) r += x;
  if (problem.stabilized()) r += stabilization(s, u, w, problem.p());
  return r;
}

}  // namespace ahho
