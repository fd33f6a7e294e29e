#pragma once

#include <map>
#include <memory>
#include <stdexcept>
#include <string>

#include "ahho/hho.hpp"

namespace ahho {

// Flattened Hessian, index 2c + j for entry (c, j) of the m x 2 argument.
using DensityHessian = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 2 * kMaxComponents,
                                     2 * kMaxComponents>;

class UnsupportedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EnergyDensity {
 public:
  virtual ~EnergyDensity() = default;

  virtual std::string name() const = 0;
  virtual int components() const = 0;
  // Exponent p of the two-sided growth used by the indicator and the norms.
  virtual double growth() const = 0;
  // W(G v) is integrated exactly up to degree quadrature_exponent() * (k + 1).
  virtual int quadrature_exponent() const = 0;
  virtual std::map<std::string, double> parameters() const { return {}; }

  virtual double value(const Jacobian& a) const = 0;
  virtual Jacobian derivative(const Jacobian& a) const = 0;
  virtual DensityHessian hessian(const Jacobian& a) const = 0;

  virtual bool has_conjugate() const { return false; }
  virtual double conjugate(const Jacobian& sigma) const;
};

using DensityPtr = std::shared_ptr<const EnergyDensity>;

struct OdpParameters {
  double mu1 = 1.0;
  double mu2 = 2.0;
  double xi1 = 0.0;
  double xi2 = 0.0;

  // mu1, mu2 and lambda with xi1 = sqrt(2 lambda mu1 / mu2), xi2 = mu2 xi1 / mu1.
  static OdpParameters from_lambda(double mu1, double mu2, double lambda);
};

DensityPtr p_laplace(double p);
DensityPtr optimal_design(const OdpParameters& params);
DensityPtr two_well(const Eigen::Vector2d& f1, const Eigen::Vector2d& f2);
DensityPtr fhm();

double conjugate(const EnergyDensity& density, const Jacobian& sigma);

}  // namespace ahho
