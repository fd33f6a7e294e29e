#pragma once

#include <array>
#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "ahho/mesh.hpp"
#include "ahho/poly.hpp"

namespace ahho {

constexpr int kMaxComponents = 4;

// Point values of an R^m-valued field and m x 2 Jacobians (row c = gradient of component c).
using Values = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxComponents, 1>;
using Jacobian = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor, kMaxComponents, 2>;
using Field = std::function<Values(const Point&)>;
using JacobianField = std::function<Jacobian(const Point&)>;

enum class Variant { RT, Stabilized };

const char* to_string(Variant v);

struct QuadraturePolicy {
  int nonlinear_degree = 2;  // W(G v), DW(G v), stress projection, stabilization
  int data_degree = 8;       // loads, boundary data, interpolation of closures
};

// Bit c set: component c is prescribed on sides with this label.
using ComponentMask = std::function<unsigned(BoundaryLabel)>;

struct ElementOperators {
  CellBasis cell;                      // P_k
  CellBasis potential;                 // P_{k+1}
  VectorBasis gradient;                // RT_k or P_k(T; R^2), one row of the m x 2 gradient
  std::array<SideBasis, 3> sides;      // global side orientation
  std::array<double, 3> side_length{};
  Eigen::MatrixXd cell_mass;
  Eigen::MatrixXd grad_op;             // gradient coefficients <- local dofs
  Eigen::MatrixXd potential_op;        // P_{k+1} coefficients <- local dofs
  std::array<Eigen::MatrixXd, 3> stab_op;  // S_{K,S} side coefficients <- local dofs

  QuadratureRule rule;                 // nonlinear rule
  Eigen::MatrixXd grad_at_points;      // rows 2q, 2q+1: x/y part of G v at rule.points[q]
  Eigen::MatrixXd stress_projector;    // gradient coefficients <- stacked point values
  std::array<QuadratureRule, 3> side_rules;
  std::array<Eigen::MatrixXd, 3> stab_at_points;
};

class HhoSpace {
 public:
  HhoSpace(std::shared_ptr<const Triangulation> mesh, int degree, int components, Variant variant,
           const ComponentMask& dirichlet, QuadraturePolicy policy);

  const Triangulation& mesh() const { return *mesh_; }
  const std::shared_ptr<const Triangulation>& mesh_ptr() const { return mesh_; }
  int degree() const { return k_; }
  int components() const { return m_; }
  Variant variant() const { return variant_; }
  const QuadraturePolicy& policy() const { return policy_; }

  int cell_size() const { return dim_pk(k_); }
  int side_size() const { return k_ + 1; }
  int local_size() const { return cell_size() + 3 * side_size(); }
  int gradient_size() const;
  int ndof() const;
  int num_cell_dofs() const { return mesh_->num_triangles() * m_ * cell_size(); }
  int cell_dof(int t, int c, int i = 0) const { return (t * m_ + c) * cell_size() + i; }
  int side_dof(int f, int c, int i = 0) const {
    return num_cell_dofs() + (f * m_ + c) * side_size() + i;
  }

  // Global indices of the local dofs of t, component-major: c * local_size() + j.
  std::vector<int> local_dofs(int t) const;
  // Local coefficients as a local_size() x m matrix.
  Eigen::MatrixXd gather(int t, const Eigen::VectorXd& v) const;

  bool constrained(int f, int c) const { return (dirichlet_[f] >> c) & 1u; }
  unsigned constrained_mask(int f) const { return dirichlet_[f]; }
  SideBasis side_basis(int f) const;

  const ElementOperators& element(int t) const { return ops_[t]; }

 private:
  void build_element(int t);

  std::shared_ptr<const Triangulation> mesh_;
  int k_;
  int m_;
  Variant variant_;
  QuadraturePolicy policy_;
  std::vector<unsigned> dirichlet_;
  std::vector<ElementOperators> ops_;
};

// Polynomial of fixed degree on every triangle, R^m-valued.
struct PiecewisePolynomial {
  std::shared_ptr<const Triangulation> mesh;
  int degree = 0;
  int components = 1;
  std::vector<CellBasis> bases;
  std::vector<Eigen::MatrixXd> coefficients;  // basis size x m

  Values eval(int t, const Point& x) const;
  Jacobian grad(int t, const Point& x) const;
};

// (Pi_T^k v, Pi_F^k v) with the data quadrature (or the given degree).
Eigen::VectorXd interpolate(const HhoSpace& space, const Field& v, int degree = -1);

// Gradient reconstruction coefficients on t, gradient_size() x m; column c holds row c of
// the m x 2 gradient in the VectorBasis.
Eigen::MatrixXd gradient_coefficients(const HhoSpace& space, const Eigen::VectorXd& v, int t);
Jacobian gradient_at(const HhoSpace& space, const Eigen::VectorXd& v, int t, const Point& x);

PiecewisePolynomial potential_reconstruction(const HhoSpace& space, const Eigen::VectorXd& v);

// S_{K,S} v on local side i of t, side_size() x m coefficients.
Eigen::MatrixXd stabilization_trace(const HhoSpace& space, const Eigen::VectorXd& v, int t, int i);
// s_K(u; v) for every triangle.
std::vector<double> stabilization_local(const HhoSpace& space, const Eigen::VectorXd& u,
                                        const Eigen::VectorXd& v, double p);
double stabilization(const HhoSpace& space, const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                     double p);

// Globally continuous piecewise P_{k+3} field preserving cell and side moments.
PiecewisePolynomial companion(const HhoSpace& space, const Eigen::VectorXd& v);

double discrete_seminorm(const HhoSpace& space, const Eigen::VectorXd& v, double p);

}  // namespace ahho
