#include "ahho/benchmarks.hpp"

#include <cmath>
#include <stdexcept>

namespace ahho {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTol = 1e-12;

// Polar angle in [0, 2 pi).
double angle(const Point& x) {
  const double phi = std::atan2(x.y(), x.x());
  return phi < 0 ? phi + 2 * kPi : phi;
}

Values scalar(double v) { return Values::Constant(1, v); }

Jacobian row(double a, double b) {
  Jacobian j(1, 2);
  j << a, b;
  return j;
}

std::shared_ptr<const Triangulation> lshape(const LabelRule& rule) {
  std::vector<Point> v{{-1, -1}, {0, -1}, {-1, 0}, {0, 0}, {1, 0}, {-1, 1}, {0, 1}, {1, 1}};
  std::vector<std::array<int, 3>> t{{0, 1, 3}, {0, 3, 2}, {2, 3, 6}, {2, 6, 5}, {3, 4, 7}, {3, 7, 6}};
  return std::make_shared<const Triangulation>(Triangulation::build(v, t, rule));
}

unsigned dirichlet_only(BoundaryLabel label) { return label == BoundaryLabel::Dirichlet ? ~0u : 0u; }

Benchmark p_laplace_lshape() {
  Benchmark b;
  b.name = "p-laplace-lshape";
  b.description = "p = 4 on the L-shape, singular solution r^{7/8} sin(7 phi/8), mixed boundary";
  auto rule = [](const Point& a, const Point& c) {
    const Point mid = (a + c) / 2;
    const bool slit = (std::abs(mid.x()) < kTol && mid.y() < 0) || (std::abs(mid.y()) < kTol && mid.x() > 0);
    return slit ? BoundaryLabel::Dirichlet : BoundaryLabel::Neumann;
  };
  b.setup.mesh = lshape(rule);
  b.setup.dirichlet = dirichlet_only;
  ProblemData& d = b.setup.data;
  d.density = p_laplace(4.0);
  const auto u = [](const Point& x) {
    const double r = x.norm();
    return r == 0.0 ? 0.0 : std::pow(r, 7.0 / 8) * std::sin(7 * angle(x) / 8);
  };
  const auto stress = [](const Point& x) {
    const double r = x.norm(), phi = angle(x);
    const double s = 343.0 / 512 * std::pow(r, -3.0 / 8);
    return Eigen::Vector2d(-s * std::sin(phi / 8), s * std::cos(phi / 8));
  };
  d.load = [](const Point& x) {
    return scalar(343.0 / 2048 * std::pow(x.norm(), -11.0 / 8) * std::sin(7 * angle(x) / 8));
  };
  d.dirichlet = [u](const Point& x) { return scalar(u(x)); };
  d.neumann = [stress](const Point& x, const Eigen::Vector2d& n) { return scalar(stress(x).dot(n)); };
  ExactSolution e;
  e.u = d.dirichlet;
  e.gradient = [](const Point& x) {
    const double phi = angle(x), s = 7.0 / 8 * std::pow(x.norm(), -1.0 / 8);
    return row(-s * std::sin(phi / 8), s * std::cos(phi / 8));
  };
  e.stress = [stress](const Point& x) {
    const Eigen::Vector2d s = stress(x);
    return row(s.x(), s.y());
  };
  e.energy = -1.4423089582447;
  b.exact = e;
  b.reference_energy = e.energy;
  b.has_dual = true;
  return b;
}

Benchmark odp_lshape() {
  Benchmark b;
  b.name = "odp-lshape";
  b.description = "optimal design, mu1 = 1, mu2 = 2, lambda = 0.0145, f = 1 on the L-shape";
  b.setup.mesh = lshape([](const Point&, const Point&) { return BoundaryLabel::Dirichlet; });
  b.setup.dirichlet = dirichlet_only;
  ProblemData& d = b.setup.data;
  d.density = optimal_design(OdpParameters::from_lambda(1.0, 2.0, 0.0145));
  d.load = [](const Point&) { return scalar(1.0); };
  d.dirichlet = [](const Point&) { return scalar(0.0); };
  b.reference_energy = -0.0745512;
  b.has_dual = true;
  return b;
}

double two_well_rho(const Point& x) { return (3 * (x.x() - 1) + 2 * x.y()) / std::sqrt(13.0); }
double two_well_target(double rho) { return -3 * std::pow(rho, 5) / 128 - std::pow(rho, 3) / 3; }

Benchmark two_well_rect() {
  Benchmark b;
  b.name = "two-well-rect";
  b.description = "relaxed two-well, wells -+(3,2)/sqrt(13) on (0,1)x(0,3/2), mesh not aligned with the interface";
  // Interior vertex off the interface rho = 0; every triangle is refined at its outer side first.
  auto mesh = Triangulation::build_with_refinement_edges(
      {{0, 0}, {1, 0}, {1, 1.5}, {0, 1.5}, {0.4, 0.6}}, {{4, 0, 1}, {4, 1, 2}, {4, 2, 3}, {4, 3, 0}},
      [](const Point&, const Point&) { return BoundaryLabel::Dirichlet; });
  b.setup.mesh = std::make_shared<const Triangulation>(std::move(mesh));
  b.setup.dirichlet = dirichlet_only;
  ProblemData& d = b.setup.data;
  const Eigen::Vector2d f2 = Eigen::Vector2d(3, 2) / std::sqrt(13.0);
  d.density = two_well(-f2, f2);
  d.lower_weight = 2.0;
  d.zeta = [](const Point& x) { return scalar(two_well_target(two_well_rho(x))); };
  const auto u = [](double rho) { return rho <= 0 ? two_well_target(rho) : std::pow(rho, 3) / 24 + rho; };
  const auto du = [](double rho) {
    return rho <= 0 ? -15 * std::pow(rho, 4) / 128 - rho * rho : rho * rho / 8 + 1;
  };
  d.dirichlet = [u](const Point& x) { return scalar(u(two_well_rho(x))); };
  ExactSolution e;
  e.u = d.dirichlet;
  e.gradient = [du, f2](const Point& x) {
    const Eigen::Vector2d g = du(two_well_rho(x)) * f2;
    return row(g.x(), g.y());
  };
  e.energy = 0.1078147674;
  b.exact = e;
  b.reference_energy = e.energy;
  b.indicator = Indicator::TwoWellExtended;
  return b;
}

Benchmark fhm_rect() {
  Benchmark b;
  b.name = "fhm-rect";
  b.description = "modified Foss-Hrusa-Mizel on (-1,1)x(0,1), solution r^{1/2}(cos(phi/2), sin(phi/2))";
  auto rule = [](const Point& a, const Point& c) {
    const Point mid = (a + c) / 2;
    if (std::abs(mid.y()) < kTol) return mid.x() < 0 ? BoundaryLabel::Gamma1 : BoundaryLabel::Gamma2;
    return BoundaryLabel::Gamma3;
  };
  b.setup.mesh = std::make_shared<const Triangulation>(Triangulation::build(
      {{-1, 0}, {0, 0}, {1, 0}, {-1, 1}, {0, 1}, {1, 1}}, {{0, 1, 4}, {0, 4, 3}, {1, 2, 5}, {1, 5, 4}}, rule));
  b.setup.dirichlet = [](BoundaryLabel label) -> unsigned {
    switch (label) {
      case BoundaryLabel::Gamma1: return 1u;
      case BoundaryLabel::Gamma2: return 2u;
      case BoundaryLabel::Gamma3: return 3u;
      default: return 0u;
    }
  };
  // The domain lies in the closed upper half-plane, so phi is taken in [0, pi].
  const auto phi = [](const Point& x) { return x.y() <= 0 ? (x.x() < 0 ? kPi : 0.0) : std::atan2(x.y(), x.x()); };
  ProblemData& d = b.setup.data;
  d.density = fhm();
  d.dirichlet = [phi](const Point& x) {
    const double s = std::sqrt(x.norm()), a = phi(x) / 2;
    Values v(2);
    v << s * std::cos(a), s * std::sin(a);
    return v;
  };
  ExactSolution e;
  e.u = d.dirichlet;
  e.gradient = [phi](const Point& x) {
    const double s = 1 / (2 * std::sqrt(x.norm())), a = phi(x) / 2;
    Jacobian j(2, 2);
    j << s * std::cos(a), s * std::sin(a), -s * std::sin(a), s * std::cos(a);
    return j;
  };
  e.energy = 0.88137023556;
  b.exact = e;
  b.reference_energy = e.energy;
  b.indicator = Indicator::FhmModified;
  return b;
}

Benchmark manufactured_affine() {
  Benchmark b;
  b.name = "manufactured-affine";
  b.description = "p = 2 on the unit square, u = 1/2 + 2x - y, Neumann on x = 1 and y = 1";
  auto rule = [](const Point& a, const Point& c) {
    const Point mid = (a + c) / 2;
    return (mid.x() > 1 - kTol || mid.y() > 1 - kTol) ? BoundaryLabel::Neumann : BoundaryLabel::Dirichlet;
  };
  b.setup.mesh = std::make_shared<const Triangulation>(
      Triangulation::build({{0, 0}, {1, 0}, {1, 1}, {0, 1}}, {{0, 1, 2}, {0, 2, 3}}, rule));
  b.setup.dirichlet = dirichlet_only;
  ProblemData& d = b.setup.data;
  d.density = p_laplace(2.0);
  d.dirichlet = [](const Point& x) { return scalar(0.5 + 2 * x.x() - x.y()); };
  d.neumann = [](const Point&, const Eigen::Vector2d& n) { return scalar(2 * n.x() - n.y()); };
  ExactSolution e;
  e.u = d.dirichlet;
  e.gradient = [](const Point&) { return row(2.0, -1.0); };
  // |grad u|^2/2 = 5/2 minus the Neumann work 4 (x = 1) - 1/2 (y = 1).
  e.energy = -1.0;
  b.exact = e;
  b.reference_energy = e.energy;
  b.has_dual = true;
  return b;
}

}  // namespace

std::vector<std::string> benchmark_names() {
  return {"p-laplace-lshape", "odp-lshape", "two-well-rect", "fhm-rect", "manufactured-affine"};
}

Benchmark make_benchmark(const std::string& name) {
  if (name == "p-laplace-lshape") return p_laplace_lshape();
  if (name == "odp-lshape") return odp_lshape();
  if (name == "two-well-rect") return two_well_rect();
  if (name == "fhm-rect") return fhm_rect();
  if (name == "manufactured-affine") return manufactured_affine();
  throw std::invalid_argument("unknown benchmark '" + name + "'");
}

Indicator indicator_for(const Benchmark& benchmark, Variant variant) {
  return variant == Variant::Stabilized ? Indicator::Stabilized : benchmark.indicator;
}

}  // namespace ahho
