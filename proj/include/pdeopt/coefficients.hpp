#pragma once

#include <functional>

#include "pdeopt/mesh.hpp"

namespace pdeopt {

// Data of the operator  A y = -div(A grad y) + b . grad y  and of the
// nonlinearity  f(x, y) = c0(x) + c1(x) y + c3(x) y^3.  A and b are piecewise
// constant per triangle (sampled at centroids); c0/c1/c3 are nodal fields.
// c1, c3 >= 0 keeps df/dy >= 0, which the solvers rely on.
struct CoefficientSet {
  MeshPtr mesh;
  std::vector<Eigen::Matrix2d> A;
  std::vector<Eigen::Vector2d> b;
  NodalField c0, c1, c3;
  // Ellipticity bound: worst eigenvalue of the symmetric part of A over all
  // triangles. Derived during construction and guaranteed positive.
  double lambda_A = 0.0;

  bool linear_in_y() const;

  Eigen::VectorXd f_value(const Eigen::VectorXd& y) const;
  Eigen::VectorXd f_prime(const Eigen::VectorXd& y) const;
  Eigen::VectorXd f_second(const Eigen::VectorXd& y) const;
};

using MatrixFn = std::function<Eigen::Matrix2d(double, double)>;
using VectorFn = std::function<Eigen::Vector2d(double, double)>;

// Samples A and b at triangle centroids, validates ellipticity (including a
// sampled-direction check of xi' A xi >= lambda_A |xi|^2 on every triangle)
// and the sign constraints on c1, c3.
CoefficientSet make_coefficients(const MeshPtr& mesh, const MatrixFn& A,
                                 const VectorFn& b, NodalField c0,
                                 NodalField c1, NodalField c3);

// Convenience: A = diffusion * I, constant transport, constant c0/c1/c3.
CoefficientSet isotropic_coefficients(const MeshPtr& mesh, double diffusion,
                                      const Eigen::Vector2d& b, double c0 = 0.0,
                                      double c1 = 0.0, double c3 = 0.0);

}  // namespace pdeopt
