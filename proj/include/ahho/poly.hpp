#pragma once

#include <array>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "ahho/mesh.hpp"

namespace ahho {

using ScalarFunction = std::function<double(const Point&)>;
using VectorFunction = std::function<Eigen::Vector2d(const Point&)>;
using GradientMatrix = Eigen::Matrix<double, Eigen::Dynamic, 2>;

// Rule on the reference simplex; weights sum to one.
struct ReferenceRule {
  int degree = 0;
  std::vector<Eigen::Vector3d> barycentric;
  std::vector<double> weights;
};

// Rule mapped to a physical cell or side; weights sum to its measure.
struct QuadratureRule {
  int degree = 0;
  std::vector<Point> points;
  std::vector<double> weights;

  int size() const { return static_cast<int>(points.size()); }
};

// Gauss-Legendre nodes and weights on [0, 1].
struct LineRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
const LineRule& gauss_legendre(int npoints);

const ReferenceRule& reference_triangle_rule(int degree);
QuadratureRule triangle_quadrature(int degree, const Point& a, const Point& b, const Point& c);
QuadratureRule triangle_quadrature(int degree, const Triangulation& mesh, int t);
QuadratureRule side_quadrature(int degree, const Point& a, const Point& b);

int dim_pk(int k);
// Exponents (i, j) of x^i y^j ordered by total degree, then by decreasing i.
const std::vector<std::array<int, 2>>& monomial_exponents(int degree);

// Scaled monomials ((x - c) / h)^alpha.
class CellBasis {
 public:
  CellBasis() = default;
  CellBasis(const Point& center, double scale, int degree);

  int degree() const { return degree_; }
  int size() const { return dim_pk(degree_); }
  const Point& center() const { return center_; }
  double scale() const { return scale_; }

  Eigen::VectorXd eval(const Point& x) const;
  GradientMatrix grad(const Point& x) const;
  Eigen::VectorXd laplacian(const Point& x) const;

 private:
  Point center_ = Point::Zero();
  double scale_ = 1.0;
  int degree_ = 0;
};

// Monomials s^i of the side parameter s = 2t - 1, t in [0, 1] from a to b.
class SideBasis {
 public:
  SideBasis() = default;
  SideBasis(const Point& a, const Point& b, int degree);

  int degree() const { return degree_; }
  int size() const { return degree_ + 1; }
  double parameter(const Point& x) const;
  Eigen::VectorXd eval(const Point& x) const;
  Eigen::VectorXd eval_parameter(double t) const;

 private:
  Point a_ = Point::Zero();
  Point d_ = Point::UnitX();
  int degree_ = 0;
};

// Vector fields P_k(T; R^2), optionally enriched by (x - c) / h times homogeneous
// degree-k scaled monomials to span RT_k(T).
class VectorBasis {
 public:
  VectorBasis() = default;
  VectorBasis(const Point& center, double scale, int degree, bool raviart_thomas);

  int degree() const { return degree_; }
  bool raviart_thomas() const { return rt_; }
  int size() const;
  // Row i is the i-th basis field.
  GradientMatrix eval(const Point& x) const;
  Eigen::VectorXd div(const Point& x) const;

 private:
  CellBasis scalar_;
  int degree_ = 0;
  bool rt_ = true;
};

inline int rt_dim(int k) { return (k + 1) * (k + 3); }

Eigen::MatrixXd cell_mass(const CellBasis& basis, const QuadratureRule& rule);
Eigen::MatrixXd side_mass(const SideBasis& basis, const QuadratureRule& rule);
Eigen::MatrixXd vector_mass(const VectorBasis& basis, const QuadratureRule& rule);

Eigen::VectorXd l2_project_cell(const CellBasis& basis, const QuadratureRule& rule,
                                const ScalarFunction& f);
Eigen::VectorXd l2_project_side(const SideBasis& basis, const QuadratureRule& rule,
                                const ScalarFunction& f);
Eigen::VectorXd l2_project_vector(const VectorBasis& basis, const QuadratureRule& rule,
                                  const VectorFunction& f);

}  // namespace ahho
