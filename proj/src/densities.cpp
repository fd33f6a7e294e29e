#include "ahho/densities.hpp"

#include <cmath>

namespace ahho {

double EnergyDensity::conjugate(const Jacobian&) const {
  throw UnsupportedError("density '" + name() + "' has no convex conjugate");
}

double conjugate(const EnergyDensity& density, const Jacobian& sigma) {
  return density.conjugate(sigma);
}

namespace {

Eigen::Vector2d row(const Jacobian& a) { return a.row(0).transpose(); }

Jacobian as_jacobian(const Eigen::Vector2d& v) {
  Jacobian j(1, 2);
  j.row(0) = v.transpose();
  return j;
}

class PLaplace final : public EnergyDensity {
 public:
  explicit PLaplace(double p) : p_(p) {}

  std::string name() const override { return "p-laplace"; }
  int components() const override { return 1; }
  double growth() const override { return p_; }
  int quadrature_exponent() const override { return static_cast<int>(std::ceil(p_)); }
  std::map<std::string, double> parameters() const override { return {{"p", p_}}; }

  double value(const Jacobian& a) const override { return std::pow(a.squaredNorm(), p_ / 2) / p_; }
  Jacobian derivative(const Jacobian& a) const override {
    const double s = a.squaredNorm();
    if (s == 0.0) return Jacobian::Zero(1, 2);
    return std::pow(s, (p_ - 2) / 2) * a;
  }
  DensityHessian hessian(const Jacobian& a) const override {
    const Eigen::Vector2d v = row(a);
    const double s = v.squaredNorm() + kRegularization;
    DensityHessian h = std::pow(s, (p_ - 2) / 2) * Eigen::Matrix2d::Identity();
    h += (p_ - 2) * std::pow(s, (p_ - 4) / 2) * v * v.transpose();
    return h;
  }

  bool has_conjugate() const override { return true; }
  double conjugate(const Jacobian& sigma) const override {
    const double q = p_ / (p_ - 1);
    return std::pow(sigma.squaredNorm(), q / 2) / q;
  }

 private:
  static constexpr double kRegularization = 1e-12;
  double p_;
};

class OptimalDesign final : public EnergyDensity {
 public:
  explicit OptimalDesign(const OdpParameters& q) : q_(q) {}

  std::string name() const override { return "optimal-design"; }
  int components() const override { return 1; }
  double growth() const override { return 2.0; }
  int quadrature_exponent() const override { return 2; }
  std::map<std::string, double> parameters() const override {
    return {{"mu1", q_.mu1}, {"mu2", q_.mu2}, {"xi1", q_.xi1}, {"xi2", q_.xi2}};
  }

  double psi(double xi) const {
    if (xi <= q_.xi1) return q_.mu2 * xi * xi / 2;
    if (xi <= q_.xi2) return q_.xi1 * q_.mu2 * (xi - q_.xi1 / 2);
    return q_.mu1 * xi * xi / 2 - q_.xi1 * q_.mu2 * (q_.xi1 / 2 - q_.xi2 / 2);
  }
  double dpsi(double xi) const {
    if (xi <= q_.xi1) return q_.mu2 * xi;
    if (xi <= q_.xi2) return q_.xi1 * q_.mu2;
    return q_.mu1 * xi;
  }

  double value(const Jacobian& a) const override { return psi(a.norm()); }
  Jacobian derivative(const Jacobian& a) const override {
    const double xi = a.norm();
    if (xi <= q_.xi1) return q_.mu2 * a;
    return (dpsi(xi) / xi) * a;
  }
  DensityHessian hessian(const Jacobian& a) const override {
    const double xi = a.norm();
    if (xi <= q_.xi1) return q_.mu2 * Eigen::Matrix2d::Identity();
    if (xi > q_.xi2) return q_.mu1 * Eigen::Matrix2d::Identity();
    const Eigen::Vector2d n = row(a) / xi;
    return (dpsi(xi) / xi) * (Eigen::Matrix2d::Identity() - n * n.transpose());
  }

  bool has_conjugate() const override { return true; }
  double conjugate(const Jacobian& sigma) const override {
    const double t = sigma.norm();
    if (t <= q_.mu2 * q_.xi1) return t * t / (2 * q_.mu2);
    return t * t / (2 * q_.mu1) + q_.xi1 * q_.mu2 * (q_.xi1 / 2 - q_.xi2 / 2);
  }

 private:
  OdpParameters q_;
};

class TwoWell final : public EnergyDensity {
 public:
  TwoWell(const Eigen::Vector2d& f1, const Eigen::Vector2d& f2)
      : f1_(f1), f2_(f2), a_((f2 - f1) / 2), b_((f1 + f2) / 2) {}

  std::string name() const override { return "two-well"; }
  int components() const override { return 1; }
  double growth() const override { return 4.0; }
  int quadrature_exponent() const override { return 4; }
  std::map<std::string, double> parameters() const override {
    return {{"F1x", f1_.x()}, {"F1y", f1_.y()}, {"F2x", f2_.x()}, {"F2y", f2_.y()}};
  }

  double value(const Jacobian& f) const override {
    const Eigen::Vector2d g = row(f) - b_;
    const double q = std::max(0.0, g.squaredNorm() - a_.squaredNorm());
    return q * q + 4 * (a_.squaredNorm() * g.squaredNorm() - std::pow(a_.dot(g), 2));
  }
  Jacobian derivative(const Jacobian& f) const override {
    const Eigen::Vector2d g = row(f) - b_;
    const double q = std::max(0.0, g.squaredNorm() - a_.squaredNorm());
    return as_jacobian(4 * q * g + 8 * (a_.squaredNorm() * g - a_.dot(g) * a_));
  }
  DensityHessian hessian(const Jacobian& f) const override {
    const Eigen::Vector2d g = row(f) - b_;
    const double q = g.squaredNorm() - a_.squaredNorm();
    Eigen::Matrix2d h = 8 * (a_.squaredNorm() * Eigen::Matrix2d::Identity() - a_ * a_.transpose());
    if (q > 0) h += 4 * q * Eigen::Matrix2d::Identity() + 8 * g * g.transpose();
    return h;
  }

 private:
  Eigen::Vector2d f1_, f2_, a_, b_;
};

class Fhm final : public EnergyDensity {
 public:
  std::string name() const override { return "fhm"; }
  int components() const override { return 2; }
  double growth() const override { return 2.0; }
  int quadrature_exponent() const override { return 8; }

  // |A|^2 - 2 det A = (a11 - a22)^2 + (a12 + a21)^2.
  static double defect(const Jacobian& a) {
    return std::pow(a(0, 0) - a(1, 1), 2) + std::pow(a(0, 1) + a(1, 0), 2);
  }
  static Eigen::Vector4d defect_gradient(const Jacobian& a) {
    const double d = a(0, 0) - a(1, 1), s = a(0, 1) + a(1, 0);
    return 2 * Eigen::Vector4d(d, s, s, -d);
  }

  double value(const Jacobian& a) const override { return std::pow(defect(a), 4) + a.squaredNorm() / 2; }
  Jacobian derivative(const Jacobian& a) const override {
    const Eigen::Vector4d dq = defect_gradient(a);
    Jacobian out = a;
    const double c = 4 * std::pow(defect(a), 3);
    out(0, 0) += c * dq[0];
    out(0, 1) += c * dq[1];
    out(1, 0) += c * dq[2];
    out(1, 1) += c * dq[3];
    return out;
  }
  DensityHessian hessian(const Jacobian& a) const override {
    const double q = defect(a);
    const Eigen::Vector4d dq = defect_gradient(a);
    Eigen::Matrix4d d2q;
    d2q << 2, 0, 0, -2, 0, 2, 2, 0, 0, 2, 2, 0, -2, 0, 0, 2;
    return Eigen::Matrix4d::Identity() + 12 * q * q * dq * dq.transpose() + 4 * q * q * q * d2q;
  }
};

}  // namespace

OdpParameters OdpParameters::from_lambda(double mu1, double mu2, double lambda) {
  OdpParameters q;
  q.mu1 = mu1;
  q.mu2 = mu2;
  q.xi1 = std::sqrt(2 * lambda * mu1 / mu2);
  q.xi2 = mu2 * q.xi1 / mu1;
  return q;
}

DensityPtr p_laplace(double p) {
  if (!(p > 1.0) || !std::isfinite(p)) throw std::invalid_argument("p-laplace requires 1 < p < inf");
  return std::make_shared<PLaplace>(p);
}

DensityPtr optimal_design(const OdpParameters& q) {
  if (!(0 < q.xi1 && q.xi1 < q.xi2)) throw std::invalid_argument("optimal design requires 0 < xi1 < xi2");
  if (!(0 < q.mu1 && q.mu1 < q.mu2)) throw std::invalid_argument("optimal design requires 0 < mu1 < mu2");
  if (std::abs(q.xi1 * q.mu2 - q.xi2 * q.mu1) > 1e-12 * q.xi2 * q.mu2)
    throw std::invalid_argument("optimal design requires xi1 mu2 = xi2 mu1");
  return std::make_shared<OptimalDesign>(q);
}

DensityPtr two_well(const Eigen::Vector2d& f1, const Eigen::Vector2d& f2) {
  if (f1 == f2) throw std::invalid_argument("two-well requires distinct wells");
  return std::make_shared<TwoWell>(f1, f2);
}

DensityPtr fhm() { return std::make_shared<Fhm>(); }

}  // namespace ahho
