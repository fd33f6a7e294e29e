#include "ahho/poly.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace ahho {

namespace {

// Returns P_n(x) and P_{n-1}(x).
std::pair<double, double> legendre(int n, double x) {
  double p0 = 1.0, p1 = x;
  if (n == 0) return {1.0, 0.0};
  for (int j = 2; j <= n; ++j) {
    const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
    p0 = p1;
    p1 = p2;
  }
  return {p1, p0};
}

LineRule compute_gauss_legendre(int n) {
  LineRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      const auto [pn, pm] = legendre(n, x);
      const double dx = pn / (n * (x * pn - pm) / (x * x - 1.0));
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const auto [pn, pm] = legendre(n, x);
    const double dp = n * (x * pn - pm) / (x * x - 1.0);
    // Map from [-1, 1] to [0, 1], ascending order.
    rule.nodes[n - 1 - i] = 0.5 * (1.0 + x);
    rule.weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

void add_orbit3(ReferenceRule& r, double a, double w) {
  const double b = 1.0 - 2.0 * a;
  r.barycentric.emplace_back(b, a, a);
  r.barycentric.emplace_back(a, b, a);
  r.barycentric.emplace_back(a, a, b);
  for (int i = 0; i < 3; ++i) r.weights.push_back(w);
}

void add_orbit6(ReferenceRule& r, double a, double b, double w) {
  const double c = 1.0 - a - b;
  for (const auto& p : {Eigen::Vector3d(a, b, c), Eigen::Vector3d(b, c, a), Eigen::Vector3d(c, a, b),
                        Eigen::Vector3d(b, a, c), Eigen::Vector3d(a, c, b), Eigen::Vector3d(c, b, a)}) {
    r.barycentric.push_back(p);
    r.weights.push_back(w);
  }
}

ReferenceRule compute_triangle_rule(int degree) {
  ReferenceRule r;
  if (degree <= 1) {
    r.degree = 1;
    r.barycentric.emplace_back(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0);
    r.weights.push_back(1.0);
  } else if (degree == 2) {
    r.degree = 2;
    add_orbit3(r, 1.0 / 6.0, 1.0 / 3.0);
  } else if (degree == 3) {
    r.degree = 3;
    add_orbit6(r, 0.659027622374092, 0.231933368553031, 1.0 / 6.0);
  } else if (degree <= 5) {
    r.degree = 5;
    const double s = std::sqrt(15.0);
    r.barycentric.emplace_back(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0);
    r.weights.push_back(9.0 / 40.0);
    add_orbit3(r, (6.0 - s) / 21.0, (155.0 - s) / 1200.0);
    add_orbit3(r, (6.0 + s) / 21.0, (155.0 + s) / 1200.0);
  } else {
    // Collapsed tensor Gauss rule: x = u, y = (1 - u) v.
    r.degree = degree;
    const LineRule& gu = gauss_legendre((degree + 3) / 2);
    const LineRule& gv = gauss_legendre((degree + 2) / 2);
    for (std::size_t i = 0; i < gu.nodes.size(); ++i) {
      for (std::size_t j = 0; j < gv.nodes.size(); ++j) {
        const double u = gu.nodes[i], v = gv.nodes[j];
        const double x = u, y = (1.0 - u) * v;
        r.barycentric.emplace_back(1.0 - x - y, x, y);
        r.weights.push_back(2.0 * gu.weights[i] * gv.weights[j] * (1.0 - u));
      }
    }
  }
  return r;
}

}  // namespace

const LineRule& gauss_legendre(int npoints) {
  static std::mutex mutex;
  static std::map<int, LineRule> cache;
  if (npoints < 1) throw std::invalid_argument("gauss_legendre: npoints < 1");
  std::lock_guard lock(mutex);
  auto it = cache.find(npoints);
  if (it == cache.end()) it = cache.emplace(npoints, compute_gauss_legendre(npoints)).first;
  return it->second;
}

const ReferenceRule& reference_triangle_rule(int degree) {
  static std::mutex mutex;
  static std::map<int, ReferenceRule> cache;
  if (degree < 0) throw std::invalid_argument("triangle_quadrature: negative degree");
  std::lock_guard lock(mutex);
  auto it = cache.find(degree);
  if (it == cache.end()) it = cache.emplace(degree, compute_triangle_rule(degree)).first;
  return it->second;
}

QuadratureRule triangle_quadrature(int degree, const Point& a, const Point& b, const Point& c) {
  const ReferenceRule& ref = reference_triangle_rule(degree);
  const double area =
      0.5 * std::abs((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
  QuadratureRule rule;
  rule.degree = ref.degree;
  rule.points.reserve(ref.weights.size());
  rule.weights.reserve(ref.weights.size());
  for (std::size_t i = 0; i < ref.weights.size(); ++i) {
    const auto& l = ref.barycentric[i];
    rule.points.push_back(l[0] * a + l[1] * b + l[2] * c);
    rule.weights.push_back(ref.weights[i] * area);
  }
  return rule;
}

QuadratureRule triangle_quadrature(int degree, const Triangulation& mesh, int t) {
  return triangle_quadrature(degree, mesh.corner(t, 0), mesh.corner(t, 1), mesh.corner(t, 2));
}

QuadratureRule side_quadrature(int degree, const Point& a, const Point& b) {
  const LineRule& g = gauss_legendre(std::max(1, (degree + 2) / 2));
  const double len = (b - a).norm();
  QuadratureRule rule;
  rule.degree = 2 * static_cast<int>(g.nodes.size()) - 1;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    rule.points.push_back(a + g.nodes[i] * (b - a));
    rule.weights.push_back(g.weights[i] * len);
  }
  return rule;
}

int dim_pk(int k) { return k < 0 ? 0 : (k + 1) * (k + 2) / 2; }

const std::vector<std::array<int, 2>>& monomial_exponents(int degree) {
  static std::mutex mutex;
  static std::map<int, std::vector<std::array<int, 2>>> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(degree);
  if (it == cache.end()) {
    std::vector<std::array<int, 2>> e;
    for (int d = 0; d <= degree; ++d)
      for (int j = 0; j <= d; ++j) e.push_back({d - j, j});
    it = cache.emplace(degree, std::move(e)).first;
  }
  return it->second;
}

namespace {

// powers[i] = z^i for i = 0..n
void fill_powers(double z, int n, double* out) {
  out[0] = 1.0;
  for (int i = 1; i <= n; ++i) out[i] = out[i - 1] * z;
}

}  // namespace

CellBasis::CellBasis(const Point& center, double scale, int degree)
    : center_(center), scale_(scale), degree_(degree) {
  if (degree < 0 || degree > 30) throw std::invalid_argument("CellBasis: degree out of range");
}

Eigen::VectorXd CellBasis::eval(const Point& x) const {
  double px[32], py[32];
  fill_powers((x.x() - center_.x()) / scale_, degree_, px);
  fill_powers((x.y() - center_.y()) / scale_, degree_, py);
  Eigen::VectorXd v(size());
  int i = 0;
  for (int d = 0; d <= degree_; ++d)
    for (int j = 0; j <= d; ++j) v[i++] = px[d - j] * py[j];
  return v;
}

GradientMatrix CellBasis::grad(const Point& x) const {
  double px[32], py[32];
  fill_powers((x.x() - center_.x()) / scale_, degree_, px);
  fill_powers((x.y() - center_.y()) / scale_, degree_, py);
  GradientMatrix g(size(), 2);
  int i = 0;
  for (int d = 0; d <= degree_; ++d) {
    for (int b = 0; b <= d; ++b, ++i) {
      const int a = d - b;
      g(i, 0) = a > 0 ? a * px[a - 1] * py[b] / scale_ : 0.0;
      g(i, 1) = b > 0 ? b * px[a] * py[b - 1] / scale_ : 0.0;
    }
  }
  return g;
}

Eigen::VectorXd CellBasis::laplacian(const Point& x) const {
  double px[32], py[32];
  fill_powers((x.x() - center_.x()) / scale_, degree_, px);
  fill_powers((x.y() - center_.y()) / scale_, degree_, py);
  Eigen::VectorXd l(size());
  const double s2 = scale_ * scale_;
  int i = 0;
  for (int d = 0; d <= degree_; ++d) {
    for (int b = 0; b <= d; ++b, ++i) {
      const int a = d - b;
      double v = 0.0;
      if (a > 1) v += a * (a - 1) * px[a - 2] * py[b];
      if (b > 1) v += b * (b - 1) * px[a] * py[b - 2];
      l[i] = v / s2;
    }
  }
  return l;
}

SideBasis::SideBasis(const Point& a, const Point& b, int degree)
    : a_(a), d_(b - a), degree_(degree) {}

double SideBasis::parameter(const Point& x) const { return (x - a_).dot(d_) / d_.squaredNorm(); }

Eigen::VectorXd SideBasis::eval(const Point& x) const { return eval_parameter(parameter(x)); }

Eigen::VectorXd SideBasis::eval_parameter(double t) const {
  Eigen::VectorXd v(degree_ + 1);
  fill_powers(2.0 * t - 1.0, degree_, v.data());
  return v;
}

VectorBasis::VectorBasis(const Point& center, double scale, int degree, bool raviart_thomas)
    : scalar_(center, scale, degree), degree_(degree), rt_(raviart_thomas) {}

int VectorBasis::size() const { return rt_ ? rt_dim(degree_) : 2 * dim_pk(degree_); }

GradientMatrix VectorBasis::eval(const Point& x) const {
  const int n = dim_pk(degree_);
  const Eigen::VectorXd phi = scalar_.eval(x);
  GradientMatrix v = GradientMatrix::Zero(size(), 2);
  v.block(0, 0, n, 1) = phi;
  v.block(n, 1, n, 1) = phi;
  if (rt_) {
    const Point xi = (x - scalar_.center()) / scalar_.scale();
    const int first = n - (degree_ + 1);
    for (int j = 0; j <= degree_; ++j) {
      v(2 * n + j, 0) = xi.x() * phi[first + j];
      v(2 * n + j, 1) = xi.y() * phi[first + j];
    }
  }
  return v;
}

Eigen::VectorXd VectorBasis::div(const Point& x) const {
  const int n = dim_pk(degree_);
  const Eigen::VectorXd phi = scalar_.eval(x);
  const GradientMatrix g = scalar_.grad(x);
  Eigen::VectorXd d(size());
  d.head(n) = g.col(0);
  d.segment(n, n) = g.col(1);
  if (rt_) {
    const int first = n - (degree_ + 1);
    for (int j = 0; j <= degree_; ++j)
      d[2 * n + j] = (2.0 + degree_) * phi[first + j] / scalar_.scale();
  }
  return d;
}

Eigen::MatrixXd cell_mass(const CellBasis& basis, const QuadratureRule& rule) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(basis.size(), basis.size());
  for (int q = 0; q < rule.size(); ++q) {
    const Eigen::VectorXd phi = basis.eval(rule.points[q]);
    m.noalias() += rule.weights[q] * phi * phi.transpose();
  }
  return m;
}

Eigen::MatrixXd side_mass(const SideBasis& basis, const QuadratureRule& rule) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(basis.size(), basis.size());
  for (int q = 0; q < rule.size(); ++q) {
    const Eigen::VectorXd phi = basis.eval(rule.points[q]);
    m.noalias() += rule.weights[q] * phi * phi.transpose();
  }
  return m;
}

Eigen::MatrixXd vector_mass(const VectorBasis& basis, const QuadratureRule& rule) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(basis.size(), basis.size());
  for (int q = 0; q < rule.size(); ++q) {
    const GradientMatrix v = basis.eval(rule.points[q]);
    m.noalias() += rule.weights[q] * v * v.transpose();
  }
  return m;
}

Eigen::VectorXd l2_project_cell(const CellBasis& basis, const QuadratureRule& rule,
                                const ScalarFunction& f) {
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(basis.size());
  for (int q = 0; q < rule.size(); ++q)
    rhs.noalias() += rule.weights[q] * f(rule.points[q]) * basis.eval(rule.points[q]);
  return cell_mass(basis, rule).ldlt().solve(rhs);
}

Eigen::VectorXd l2_project_side(const SideBasis& basis, const QuadratureRule& rule,
                                const ScalarFunction& f) {
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(basis.size());
  for (int q = 0; q < rule.size(); ++q)
    rhs.noalias() += rule.weights[q] * f(rule.points[q]) * basis.eval(rule.points[q]);
  return side_mass(basis, rule).ldlt().solve(rhs);
}

Eigen::VectorXd l2_project_vector(const VectorBasis& basis, const QuadratureRule& rule,
                                  const VectorFunction& f) {
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(basis.size());
  for (int q = 0; q < rule.size(); ++q)
    rhs.noalias() += rule.weights[q] * (basis.eval(rule.points[q]) * f(rule.points[q]));
  return vector_mass(basis, rule).ldlt().solve(rhs);
}

}  // namespace ahho
