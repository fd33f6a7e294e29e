#include "ahho/adaptivity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ahho/parallel.hpp"

namespace ahho {

const char* to_string(Indicator i) {
  switch (i) {
    case Indicator::RT: return "rt";
    case Indicator::Stabilized: return "stabilized";
    case Indicator::TwoWellExtended: return "two-well";
    case Indicator::FhmModified: return "fhm";
  }
  return "?";
}

Indicator indicator_from_string(const std::string& name) {
  for (Indicator i : {Indicator::RT, Indicator::Stabilized, Indicator::TwoWellExtended, Indicator::FhmModified})
    if (name == to_string(i)) return i;
  throw std::invalid_argument("unknown indicator '" + name + "'");
}

double max_epsilon(Indicator indicator, int k, double p) {
  if (indicator == Indicator::Stabilized) return std::min(k + 1.0, (k + 1.0) / (p - 1.0));
  return k + 1.0;
}

void validate(const EstimatorParams& params, int k, double p) {
  if (!(params.theta > 0.0 && params.theta < 1.0)) throw std::invalid_argument("theta must satisfy 0 < θ < 1");
  const double top = max_epsilon(params.indicator, k, p);
  if (!(params.epsilon >= 0.0 && params.epsilon <= top * (1 + 1e-14))) {
    if (params.indicator == Indicator::Stabilized)
      throw std::invalid_argument("epsilon must satisfy 0 < ε ≤ min{k+1, (k+1)/(p-1)}");
    throw std::invalid_argument("epsilon must satisfy 0 < ε ≤ k+1");
  }
}

namespace {

// Projects point values (rows) onto the span of the basis evaluations with the given rule.
template <class Eval>
Eigen::MatrixXd project(const Eigen::MatrixXd& mass, const QuadratureRule& rule, const Eval& basis,
                        const Eigen::MatrixXd& values) {
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(mass.rows(), values.cols());
  for (int q = 0; q < rule.size(); ++q) rhs.noalias() += rule.weights[q] * basis(rule.points[q]) * values.row(q);
  return mass.ldlt().solve(rhs);
}

double integrate_power(const QuadratureRule& rule, const Eigen::MatrixXd& values, double p) {
  double sum = 0.0;
  for (int q = 0; q < rule.size(); ++q) sum += rule.weights[q] * std::pow(values.row(q).norm(), p);
  return sum;
}

void check_consistency(const DiscreteProblem& problem, const EstimatorParams& params) {
  const HhoSpace& s = problem.space();
  switch (params.indicator) {
    case Indicator::RT:
      if (s.variant() != Variant::RT) throw std::invalid_argument("RT indicator requires the RT variant");
      break;
    case Indicator::Stabilized:
      if (s.variant() != Variant::Stabilized)
        throw std::invalid_argument("stabilized indicator requires the stabilized variant");
      break;
    case Indicator::TwoWellExtended:
      if (!problem.data().zeta || problem.data().lower_weight == 0.0)
        throw std::invalid_argument("two-well indicator requires a lower-order term");
      break;
    case Indicator::FhmModified:
      if (s.components() != 2) throw std::invalid_argument("fhm indicator requires a vector-valued problem");
      break;
  }
}

}  // namespace

Estimate estimate(const DiscreteProblem& problem, const Eigen::VectorXd& u, const StressField& sigma,
                  const EstimatorParams& params) {
  check_consistency(problem, params);
  const HhoSpace& s = problem.space();
  const Triangulation& mesh = s.mesh();
  const ProblemData& data = problem.data();
  const bool fhm = params.indicator == Indicator::FhmModified;
  const bool projected = params.indicator != Indicator::Stabilized;
  const double p = fhm ? 2.0 : problem.p(), pp = p / (p - 1), eps = params.epsilon;
  const int m = s.components(), nk = s.cell_size(), ns = s.side_size(), nt = mesh.num_triangles();
  const int degree = std::max(s.policy().nonlinear_degree, s.policy().data_degree);
  const PiecewisePolynomial r = potential_reconstruction(s, u);

  Estimate out;
  out.elements.resize(nt);
  parallel_for(nt, [&](int t) {
    const ElementOperators& op = s.element(t);
    const Eigen::MatrixXd ul = s.gather(t, u);
    const double area = mesh.area(t);
    const auto cell_eval = [&](const Point& x) { return op.cell.eval(x); };
    ElementEstimate& e = out.elements[t];

    const QuadratureRule rule = triangle_quadrature(degree, mesh, t);
    Eigen::MatrixXd diff(rule.size(), m);
    for (int q = 0; q < rule.size(); ++q)
      diff.row(q) = r.eval(t, rule.points[q]).transpose() - op.cell.eval(rule.points[q]).transpose() * ul.topRows(nk);
    if (projected) {
      const Eigen::MatrixXd c = project(op.cell_mass, rule, cell_eval, diff);
      for (int q = 0; q < rule.size(); ++q) diff.row(q) = op.cell.eval(rule.points[q]).transpose() * c;
    }
    e.volume = std::pow(area, (eps * p - p) / 2) * integrate_power(rule, diff, p);

    if (!fhm) {
      double stress = 0.0;
      for (int q = 0; q < op.rule.size(); ++q) {
        const Jacobian a = (op.grad_at_points.middleRows(2 * q, 2) * ul).transpose();
        const Jacobian d = stress_at(s, sigma, t, op.rule.points[q]) - problem.density().derivative(a);
        stress += op.rule.weights[q] * std::pow(d.norm(), pp);
      }
      e.stress = std::pow(area, eps * pp / 2) * stress;
    }

    const bool has_zeta = params.indicator == Indicator::TwoWellExtended;
    if ((data.load && !fhm) || has_zeta) {
      const QuadratureRule drule = triangle_quadrature(s.policy().data_degree, mesh, t);
      Eigen::MatrixXd f = Eigen::MatrixXd::Zero(drule.size(), m), z = f;
      for (int q = 0; q < drule.size(); ++q) {
        if (data.load) f.row(q) = data.load(drule.points[q]).transpose();
        if (has_zeta) z.row(q) = data.zeta(drule.points[q]).transpose();
      }
      const Eigen::MatrixXd pf = project(op.cell_mass, drule, cell_eval, f);
      const Eigen::MatrixXd pz = project(op.cell_mass, drule, cell_eval, z);
      for (int q = 0; q < drule.size(); ++q) {
        f.row(q) -= op.cell.eval(drule.points[q]).transpose() * pf;
        z.row(q) -= op.cell.eval(drule.points[q]).transpose() * pz;
      }
      if (data.load && !fhm) e.osc_f = std::pow(area, pp / 2) * integrate_power(drule, f, pp);
      if (has_zeta) e.zeta = area * integrate_power(drule, z, 2.0);
    }

    double dirichlet = 0.0, jumps = 0.0, traces = 0.0, osc_g = 0.0;
    for (int i = 0; i < 3; ++i) {
      const int f = mesh.sides_of(t)[i];
      const Side& side = mesh.side(f);
      const QuadratureRule srule = side_quadrature(degree, mesh.vertex(side.v[0]), mesh.vertex(side.v[1]));
      const auto side_eval = [&](const Point& x) { return op.sides[i].eval(x); };
      const Eigen::MatrixXd smass = side_mass(op.sides[i], srule);
      const unsigned mask = s.constrained_mask(f);

      Eigen::MatrixXd rt(srule.size(), m), tr(srule.size(), m);
      for (int q = 0; q < srule.size(); ++q) {
        rt.row(q) = r.eval(t, srule.points[q]).transpose();
        tr.row(q) = rt.row(q) - op.sides[i].eval(srule.points[q]).transpose() * ul.middleRows(nk + i * ns, ns);
      }
      if (projected) {
        const Eigen::MatrixXd c = project(smass, srule, side_eval, tr);
        for (int q = 0; q < srule.size(); ++q) tr.row(q) = op.sides[i].eval(srule.points[q]).transpose() * c;
      }
      traces += integrate_power(srule, tr, p);

      if (!side.boundary()) {
        const int other = side.tplus == t ? side.tminus : side.tplus;
        Eigen::MatrixXd jump(srule.size(), m);
        for (int q = 0; q < srule.size(); ++q)
          jump.row(q) = rt.row(q) - r.eval(other, srule.points[q]).transpose();
        jumps += integrate_power(srule, jump, p);
        continue;
      }

      if (mask) {
        Eigen::MatrixXd res = Eigen::MatrixXd::Zero(srule.size(), m);
        for (int q = 0; q < srule.size(); ++q) {
          const Point& x = srule.points[q];
          if (fhm && side.label == BoundaryLabel::Gamma1) {
            res(q, 0) = rt(q, 0);
          } else if (fhm && side.label == BoundaryLabel::Gamma2) {
            res(q, 1) = rt(q, 1);
          } else {
            const Values ud = data.dirichlet ? data.dirichlet(x) : Values(Values::Zero(m));
            for (int c = 0; c < m; ++c)
              if ((mask >> c) & 1u) res(q, c) = rt(q, c) - ud[c];
          }
        }
        dirichlet += integrate_power(srule, res, p);
      }
      const unsigned all = (1u << m) - 1;
      if (data.neumann && !fhm && (mask & all) != all) {
        const QuadratureRule grule =
            side_quadrature(s.policy().data_degree, mesh.vertex(side.v[0]), mesh.vertex(side.v[1]));
        Eigen::MatrixXd g = Eigen::MatrixXd::Zero(grule.size(), m);
        for (int q = 0; q < grule.size(); ++q) {
          const Values val = data.neumann(grule.points[q], side.normal);
          for (int c = 0; c < m; ++c)
            if (!((mask >> c) & 1u)) g(q, c) = val[c];
        }
        const Eigen::MatrixXd c = project(side_mass(op.sides[i], grule), grule, side_eval, g);
        for (int q = 0; q < grule.size(); ++q) g.row(q) -= op.sides[i].eval(grule.points[q]).transpose() * c;
        osc_g += integrate_power(grule, g, pp);
      }
    }
    const double side_weight = std::pow(area, (eps * p + 1 - p) / 2);
    e.dirichlet = side_weight * dirichlet;
    e.jumps = side_weight * jumps;
    e.traces = side_weight * traces;
    e.osc_g = std::sqrt(area) * osc_g;
  });

  out.eta.resize(nt);
  for (int t = 0; t < nt; ++t) {
    out.eta[t] = out.elements[t].total();
    out.total += out.eta[t];
  }
  return out;
}

std::vector<int> mark_doerfler(const std::vector<double>& eta, double theta) {
  if (!(theta > 0.0 && theta < 1.0)) throw std::invalid_argument("theta must satisfy 0 < θ < 1");
  std::vector<int> order(eta.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return eta[a] > eta[b]; });
  double total = 0.0;
  for (double x : eta) total += x;
  const double goal = theta * total;
  std::vector<int> marked;
  double sum = 0.0;
  for (int t : order) {
    if (sum >= goal) break;
    marked.push_back(t);
    sum += eta[t];
  }
  std::sort(marked.begin(), marked.end());
  return marked;
}

Eigen::VectorXd prolong(const DiscreteProblem& fine, const HhoSpace& coarse, const Eigen::VectorXd& u) {
  const HhoSpace& s = fine.space();
  const Triangulation& mesh = s.mesh();
  const Triangulation& parent_mesh = coarse.mesh();
  if (s.degree() != coarse.degree() || s.components() != coarse.components())
    throw std::invalid_argument("prolong: spaces differ in degree or components");
  if (!mesh.has_ancestry()) throw std::invalid_argument("prolong: meshes are not nested");
  std::vector<double> child_area(parent_mesh.num_triangles(), 0.0);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Ancestry& a = mesh.ancestry(t);
    if (a.parent < 0 || a.parent >= parent_mesh.num_triangles())
      throw std::invalid_argument("prolong: meshes are not nested");
    for (int i = 0; i < 3; ++i) {
      const Point x = a.barycentric[i][0] * parent_mesh.corner(a.parent, 0) +
                      a.barycentric[i][1] * parent_mesh.corner(a.parent, 1) +
                      a.barycentric[i][2] * parent_mesh.corner(a.parent, 2);
      if ((x - mesh.corner(t, i)).norm() > 1e-10 * (1 + x.norm()))
        throw std::invalid_argument("prolong: meshes are not nested");
    }
    child_area[a.parent] += mesh.area(t);
  }
  for (int t = 0; t < parent_mesh.num_triangles(); ++t)
    if (std::abs(child_area[t] - parent_mesh.area(t)) > 1e-10 * parent_mesh.area(t))
      throw std::invalid_argument("prolong: meshes are not nested");

  const PiecewisePolynomial j = companion(coarse, u);
  const int m = s.components(), nk = s.cell_size(), ns = s.side_size(), d = s.policy().data_degree;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(s.ndof());
  parallel_for(mesh.num_triangles(), [&](int t) {
    const ElementOperators& op = s.element(t);
    const int parent = mesh.ancestry(t).parent;
    const QuadratureRule rule = triangle_quadrature(d, mesh, t);
    Eigen::MatrixXd val(rule.size(), m);
    for (int q = 0; q < rule.size(); ++q) val.row(q) = j.eval(parent, rule.points[q]).transpose();
    const Eigen::MatrixXd c = project(op.cell_mass, rule, [&](const Point& x) { return op.cell.eval(x); }, val);
    for (int comp = 0; comp < m; ++comp) v.segment(s.cell_dof(t, comp), nk) = c.col(comp);
  });
  parallel_for(mesh.num_sides(), [&](int f) {
    const Side& side = mesh.side(f);
    const int parent = mesh.ancestry(side.tplus).parent;
    const SideBasis basis = s.side_basis(f);
    const QuadratureRule rule = side_quadrature(d, mesh.vertex(side.v[0]), mesh.vertex(side.v[1]));
    Eigen::MatrixXd val(rule.size(), m);
    for (int q = 0; q < rule.size(); ++q) val.row(q) = j.eval(parent, rule.points[q]).transpose();
    const Eigen::MatrixXd c =
        project(side_mass(basis, rule), rule, [&](const Point& x) { return basis.eval(x); }, val);
    for (int comp = 0; comp < m; ++comp) v.segment(s.side_dof(f, comp), ns) = c.col(comp);
  });
  return fine.apply_dirichlet(v);
}

const char* to_string(Refinement r) { return r == Refinement::Adaptive ? "adaptive" : "uniform"; }

Refinement refinement_from_string(const std::string& name) {
  if (name == "adaptive") return Refinement::Adaptive;
  if (name == "uniform") return Refinement::Uniform;
  throw std::invalid_argument("unknown refinement mode '" + name + "'");
}

const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::MaxNdof: return "max-ndof";
    case StopReason::MaxLevels: return "max-levels";
    case StopReason::EstimatorZero: return "estimator zero";
    case StopReason::SolverFailure: return "solver failure";
  }
  return "?";
}

int hho_ndof(const Triangulation& mesh, int k, int m) {
  return m * (mesh.num_triangles() * dim_pk(k) + mesh.num_sides() * (k + 1));
}

AhhoRun run_ahho(const ProblemSetup& setup, const AhhoSettings& settings, const LevelObserver& observer) {
  if (!setup.mesh || !setup.data.density) throw std::invalid_argument("run_ahho: mesh and density required");
  const int k = settings.degree, m = setup.data.density->components();
  validate(settings.estimator, k, setup.data.density->growth());
  const QuadraturePolicy policy = settings.quadrature.value_or(default_quadrature(*setup.data.density, k));

  AhhoRun run;
  std::shared_ptr<const Triangulation> mesh = setup.mesh;
  std::shared_ptr<const DiscreteProblem> previous;
  Eigen::VectorXd previous_u;
  for (int level = 0;; ++level) {
    auto space = std::make_shared<const HhoSpace>(mesh, k, m, settings.variant, setup.dirichlet, policy);
    LevelState state;
    state.level = level;
    state.problem = std::make_shared<const DiscreteProblem>(space, setup.data);
    const DiscreteProblem& problem = *state.problem;
    const Eigen::VectorXd initial =
        previous ? prolong(problem, previous->space(), previous_u) : problem.initial_guess();
    state.solution = minimize(problem, initial, settings.solver);

    LevelSummary summary;
    summary.level = level;
    summary.ndof = space->ndof();
    summary.ntriangles = mesh->num_triangles();
    summary.energy = state.solution.energy;
    summary.iterations = state.solution.iterations;
    summary.gradient_norm = state.solution.gradient_norm;
    summary.converged = state.solution.converged;

    if (!state.solution.converged) {
      run.levels.push_back(summary);
      run.reason = StopReason::SolverFailure;
      if (observer) observer(state);
      return run;
    }
    state.sigma = discrete_stress(problem, state.solution.u);
    state.estimate = estimate(problem, state.solution.u, state.sigma, settings.estimator);
    if (problem.stabilized()) state.stabilization = stabilization(*space, state.solution.u, state.solution.u, problem.p());
    summary.estimator = state.estimate.total;
    summary.stabilization = state.stabilization;
    run.levels.push_back(summary);

    std::shared_ptr<const Triangulation> next;
    if (state.estimate.total <= settings.zero_estimator) {
      run.reason = StopReason::EstimatorZero;
    } else if (level + 1 >= settings.max_levels) {
      run.reason = StopReason::MaxLevels;
    } else {
      if (settings.mode == Refinement::Adaptive) {
        state.marked = mark_doerfler(state.estimate.eta, settings.estimator.theta);
        next = std::make_shared<const Triangulation>(refine_nvb(*mesh, state.marked));
      } else {
        state.marked.resize(mesh->num_triangles());
        std::iota(state.marked.begin(), state.marked.end(), 0);
        next = std::make_shared<const Triangulation>(refine_uniform(*mesh));
      }
      if (hho_ndof(*next, k, m) > settings.max_ndof) {
        run.reason = StopReason::MaxNdof;
        next.reset();
      }
    }
    if (observer) observer(state);
    if (!next) return run;
    previous = state.problem;
    previous_u = state.solution.u;
    mesh = next;
  }
}

}  // namespace ahho
