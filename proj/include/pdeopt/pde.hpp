#pragma once

#include <Eigen/SparseLU>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "pdeopt/coefficients.hpp"

namespace pdeopt {

Eigen::VectorXd restrict_interior(const Mesh& mesh, const Eigen::VectorXd& full);
NodalField extend_zero(const MeshPtr& mesh, const Eigen::VectorXd& interior);
// Interior rows of M h: the consistent-mass load vector of nodal data h.
Eigen::VectorXd l2_load_interior(const Mesh& mesh, const Eigen::VectorXd& h);

// Interior matrix of  -div(A grad .) + b . grad . + a .  with homogeneous
// Dirichlet rows eliminated. The reaction a >= 0 enters through the lumped
// mass diagonal, which keeps the matrix an M-matrix for a >= 0 and makes the
// discrete adjoint the literal transpose (adjoint = true returns it).
Eigen::SparseMatrix<double> assemble_operator(const CoefficientSet& coeffs,
                                              const NodalField& a,
                                              bool adjoint = false);

struct LinearSystem {
  Eigen::SparseMatrix<double> matrix;
  Eigen::VectorXd rhs;
};

LinearSystem assemble_system(const CoefficientSet& coeffs, const NodalField& a,
                             const NodalField& h_rhs, bool adjoint = false);

// Sparse LU wrapper that verifies each solve by its relative residual.
class FactorizedOperator {
 public:
  explicit FactorizedOperator(Eigen::SparseMatrix<double> matrix);

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  const Eigen::SparseMatrix<double>& matrix() const { return matrix_; }

 private:
  Eigen::SparseMatrix<double> matrix_;
  std::unique_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> lu_;
};

// Solves  A y + a y = h  (or the adjoint) with zero boundary values.
NodalField solve_linear(const CoefficientSet& coeffs, const NodalField& a,
                        const NodalField& h_rhs, bool adjoint = false);

struct NewtonConfig {
  double tol = 1e-11;          // Euclidean norm of the algebraic residual
  int max_iter = 30;
  double damping_floor = 9.5367431640625e-07;  // 2^-20
};

struct NewtonReport {
  int iterations = 0;
  std::vector<double> residual_history;
  bool converged = false;
  bool damping_used = false;
};

struct StateResult {
  NodalField y;
  NewtonReport report;
};

// Damped Newton for  A y + f(., y) = u + xi, started from y = 0; step sizes
// halve until the residual decreases. Throws SolverError on divergence.
StateResult solve_state(const CoefficientSet& coeffs, const NodalField& u,
                        const std::optional<NodalField>& xi = std::nullopt,
                        const NewtonConfig& cfg = {});

// A z + f_y(., y_u) z = v: the derivative of the state map at y_u.
NodalField solve_linearized(const CoefficientSet& coeffs, const NodalField& y_u,
                            const NodalField& v);

// A z + f_y(., y_u) z = -f_yy(., y_u) z1 z2: the curvature correction term.
NodalField solve_second_derivative(const CoefficientSet& coeffs,
                                   const NodalField& y_u, const NodalField& z1,
                                   const NodalField& z2);

// h * max |b| / (2 lambda_A); above 1 the plain Galerkin transport
// discretization can oscillate, so callers should warn.
double mesh_peclet(const CoefficientSet& coeffs);

}  // namespace pdeopt
