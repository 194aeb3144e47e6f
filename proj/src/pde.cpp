#include "pdeopt/pde.hpp"

#include <cmath>
#include <sstream>

#include "pdeopt/errors.hpp"

namespace pdeopt {

Eigen::VectorXd restrict_interior(const Mesh& mesh, const Eigen::VectorXd& full) {
  const auto& in = mesh.interior_nodes();
  Eigen::VectorXd r(in.size());
  for (std::size_t k = 0; k < in.size(); ++k) r[static_cast<Eigen::Index>(k)] = full[in[k]];
  return r;
}

NodalField extend_zero(const MeshPtr& mesh, const Eigen::VectorXd& interior) {
  Eigen::VectorXd full = Eigen::VectorXd::Zero(mesh->num_nodes());
  const auto& in = mesh->interior_nodes();
  for (std::size_t k = 0; k < in.size(); ++k) full[in[k]] = interior[static_cast<Eigen::Index>(k)];
  return NodalField(mesh, std::move(full));
}

Eigen::VectorXd l2_load_interior(const Mesh& mesh, const Eigen::VectorXd& h) {
  return restrict_interior(mesh, mesh.mass() * h);
}

Eigen::SparseMatrix<double> assemble_operator(const CoefficientSet& coeffs,
                                              const NodalField& a, bool adjoint) {
  const Mesh& mesh = *coeffs.mesh;
  if (a.mesh().get() != &mesh)
    throw std::invalid_argument("assemble: reaction field on a different mesh");
  if (a.values().minCoeff() < 0.0)
    throw std::invalid_argument("assemble: reaction coefficient must be nonnegative");

  const int ni = static_cast<int>(mesh.interior_nodes().size());
  std::vector<Eigen::Triplet<double>> tr;
  tr.reserve(mesh.triangles().size() * 9 + static_cast<std::size_t>(ni));
  for (std::size_t t = 0; t < mesh.triangles().size(); ++t) {
    const Triangle& T = mesh.triangles()[t];
    const Eigen::Matrix2d& At = coeffs.A[t];
    const Eigen::Vector2d& bt = coeffs.b[t];
    for (int i = 0; i < 3; ++i) {
      const int ri = mesh.interior_index(T.v[i]);
      if (ri < 0) continue;
      for (int j = 0; j < 3; ++j) {
        const int cj = mesh.interior_index(T.v[j]);
        if (cj < 0) continue;
        const double diff = T.area * T.grad[i].dot(At * T.grad[j]);
        const double conv = (T.area / 3.0) * bt.dot(T.grad[j]);
        tr.emplace_back(ri, cj, diff + conv);
      }
    }
  }
  // lumped-mass reaction: diagonal, so boundary values never couple in
  for (int k = 0; k < ni; ++k) {
    const int node = mesh.interior_nodes()[static_cast<std::size_t>(k)];
    tr.emplace_back(k, k, mesh.lumped_mass()[node] * a.values()[node]);
  }
  Eigen::SparseMatrix<double> K(ni, ni);
  K.setFromTriplets(tr.begin(), tr.end());
  if (adjoint) {
    Eigen::SparseMatrix<double> Kt = K.transpose();
    return Kt;
  }
  return K;
}

LinearSystem assemble_system(const CoefficientSet& coeffs, const NodalField& a,
                             const NodalField& h_rhs, bool adjoint) {
  if (h_rhs.mesh().get() != coeffs.mesh.get())
    throw std::invalid_argument("assemble: rhs field on a different mesh");
  return {assemble_operator(coeffs, a, adjoint),
          l2_load_interior(*coeffs.mesh, h_rhs.values())};
}

FactorizedOperator::FactorizedOperator(Eigen::SparseMatrix<double> matrix)
    : matrix_(std::move(matrix)),
      lu_(std::make_unique<Eigen::SparseLU<Eigen::SparseMatrix<double>>>()) {
  matrix_.makeCompressed();
  lu_->compute(matrix_);
  if (lu_->info() != Eigen::Success)
    throw SolverError("factorization failed: operator is singular to working precision");
}

Eigen::VectorXd FactorizedOperator::solve(const Eigen::VectorXd& rhs) const {
  Eigen::VectorXd x = lu_->solve(rhs);
  const double rel = (matrix_ * x - rhs).norm() / (rhs.norm() + 1e-300);
  if (!x.allFinite() || rel > 1e-8) {
    std::ostringstream os;
    os << "linear solve unreliable: relative residual " << rel
       << " (condition estimate ~" << rel / 2.2e-16 << ")";
    throw SolverError(os.str());
  }
  return x;
}

NodalField solve_linear(const CoefficientSet& coeffs, const NodalField& a,
                        const NodalField& h_rhs, bool adjoint) {
  LinearSystem sys = assemble_system(coeffs, a, h_rhs, adjoint);
  FactorizedOperator op(std::move(sys.matrix));
  return extend_zero(coeffs.mesh, op.solve(sys.rhs));
}

StateResult solve_state(const CoefficientSet& coeffs, const NodalField& u,
                        const std::optional<NodalField>& xi,
                        const NewtonConfig& cfg) {
  const MeshPtr& mesh = coeffs.mesh;
  if (u.mesh().get() != mesh.get())
    throw std::invalid_argument("solve_state: control field on a different mesh");
  Eigen::VectorXd data = u.values();
  if (xi) {
    require_same_mesh(u, *xi, "solve_state");
    data += xi->values();
  }
  const Eigen::VectorXd rhs = l2_load_interior(*mesh, data);

  const auto& in = mesh->interior_nodes();
  const int ni = static_cast<int>(in.size());
  Eigen::VectorXd m_in(ni);
  for (int k = 0; k < ni; ++k) m_in[k] = mesh->lumped_mass()[in[static_cast<std::size_t>(k)]];

  const Eigen::SparseMatrix<double> Kc =
      assemble_operator(coeffs, NodalField::zero(mesh), false);

  Eigen::VectorXd y_full = Eigen::VectorXd::Zero(mesh->num_nodes());
  Eigen::VectorXd y_in = Eigen::VectorXd::Zero(ni);

  auto residual = [&](const Eigen::VectorXd& yi) {
    Eigen::VectorXd yf = Eigen::VectorXd::Zero(mesh->num_nodes());
    for (int k = 0; k < ni; ++k) yf[in[static_cast<std::size_t>(k)]] = yi[k];
    Eigen::VectorXd fv = coeffs.f_value(yf);
    Eigen::VectorXd F = Kc * yi - rhs;
    for (int k = 0; k < ni; ++k) F[k] += m_in[k] * fv[in[static_cast<std::size_t>(k)]];
    return F;
  };

  NewtonReport rep;
  Eigen::VectorXd F = residual(y_in);
  double res = F.norm();
  rep.residual_history.push_back(res);

  while (res > cfg.tol && rep.iterations < cfg.max_iter) {
    for (int k = 0; k < ni; ++k) y_full[in[static_cast<std::size_t>(k)]] = y_in[k];
    Eigen::VectorXd fp = coeffs.f_prime(y_full);
    Eigen::SparseMatrix<double> J = Kc;
    Eigen::VectorXd diag(ni);
    for (int k = 0; k < ni; ++k) diag[k] = m_in[k] * fp[in[static_cast<std::size_t>(k)]];
    J += Eigen::SparseMatrix<double>(diag.asDiagonal());
    FactorizedOperator lin(std::move(J));
    const Eigen::VectorXd step = lin.solve(-F);

    double lambda = 1.0;
    bool accepted = false;
    while (lambda >= cfg.damping_floor) {
      Eigen::VectorXd y_try = y_in + lambda * step;
      Eigen::VectorXd F_try = residual(y_try);
      const double res_try = F_try.norm();
      if (res_try < res) {
        y_in = std::move(y_try);
        F = std::move(F_try);
        res = res_try;
        if (lambda < 1.0) rep.damping_used = true;
        accepted = true;
        break;
      }
      lambda *= 0.5;
    }
    ++rep.iterations;
    rep.residual_history.push_back(res);
    if (!accepted) break;  // stalled at the damping floor
  }

  rep.converged = res <= cfg.tol;
  if (!rep.converged) {
    std::ostringstream os;
    os << "state solve did not converge after " << rep.iterations
       << " iterations; residual history:";
    for (double r : rep.residual_history) os << " " << r;
    throw SolverError(os.str());
  }
  return {extend_zero(mesh, y_in), std::move(rep)};
}

NodalField solve_linearized(const CoefficientSet& coeffs, const NodalField& y_u,
                            const NodalField& v) {
  NodalField a(coeffs.mesh, coeffs.f_prime(y_u.values()));
  return solve_linear(coeffs, a, v, false);
}

NodalField solve_second_derivative(const CoefficientSet& coeffs,
                                   const NodalField& y_u, const NodalField& z1,
                                   const NodalField& z2) {
  require_same_mesh(y_u, z1, "solve_second_derivative");
  require_same_mesh(y_u, z2, "solve_second_derivative");
  const MeshPtr& mesh = coeffs.mesh;
  NodalField a(mesh, coeffs.f_prime(y_u.values()));
  // rhs pairs -f_yy z1 z2 through the same lumped rule that carries f in the
  // state residual, so this solve is the exact second derivative of the
  // discrete state map.
  Eigen::VectorXd w = -coeffs.f_second(y_u.values()).array() *
                      z1.values().array() * z2.values().array() *
                      mesh->lumped_mass().array();
  FactorizedOperator op(assemble_operator(coeffs, a, false));
  return extend_zero(mesh, op.solve(restrict_interior(*mesh, w)));
}

double mesh_peclet(const CoefficientSet& coeffs) {
  double bmax = 0.0;
  for (const auto& b : coeffs.b) bmax = std::max(bmax, b.lpNorm<Eigen::Infinity>());
  return coeffs.mesh->h() * bmax / (2.0 * coeffs.lambda_A);
}

}  // namespace pdeopt
