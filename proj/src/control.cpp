#include "pdeopt/control.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace pdeopt {

namespace {

void check_perturbation(const ProblemData& prob, const Perturbation& pert) {
  if (!std::isfinite(pert.tikhonov_eps) || pert.tikhonov_eps < 0.0)
    throw std::invalid_argument(
        "perturbation: tikhonov_eps must be finite and nonnegative");
  auto on_mesh = [&](const std::optional<NodalField>& f, const char* what) {
    if (f && f->mesh() != prob.mesh)
      throw std::invalid_argument(std::string("perturbation: ") + what +
                                  " lives on a different mesh than the problem");
  };
  on_mesh(pert.xi, "xi");
  on_mesh(pert.eta, "eta");
  on_mesh(pert.g_delta, "g_delta");
}

void check_control(const ProblemData& prob, const NodalField& u) {
  require_same_mesh(u, prob.g, "control");
  if (!is_admissible(prob, u))
    throw std::invalid_argument(
        "control leaves the admissible box [" + std::to_string(prob.u_a) +
        ", " + std::to_string(prob.u_b) + "]: values range [" +
        std::to_string(u.values().minCoeff()) + ", " +
        std::to_string(u.values().maxCoeff()) + "]");
}

NodalField effective_g(const ProblemData& prob, const Perturbation& pert) {
  return pert.g_delta ? prob.g + *pert.g_delta : prob.g;
}

Eigen::VectorXd interior_adjoint_solve(const ProblemData& prob,
                                       const NodalField& y,
                                       const Eigen::VectorXd& rhs_interior) {
  if (prob.cache) return prob.cache->adjoint.solve(rhs_interior);
  NodalField a(prob.mesh, prob.coeffs.f_prime(y.values()));
  FactorizedOperator op(assemble_operator(prob.coeffs, a, true));
  return op.solve(rhs_interior);
}

double objective_value(const ProblemData& prob, const NodalField& u,
                       const Perturbation& pert, const NodalField& y) {
  NodalField diff = y - prob.y_d;
  double value = 0.5 * inner_l2(diff, diff) + inner_l2(effective_g(prob, pert), u);
  if (pert.eta) value += inner_l2(*pert.eta, y);
  if (pert.tikhonov_eps != 0.0)
    value += 0.5 * pert.tikhonov_eps * inner_l2(u, u);
  return value;
}

}  // namespace

ProblemData make_problem(const MeshPtr& mesh, const CoefficientSet& coeffs,
                         const NodalField& y_d, const NodalField& g,
                         double u_a, double u_b, const NewtonConfig& newton) {
  if (!mesh) throw std::invalid_argument("make_problem: mesh is null");
  if (coeffs.mesh != mesh)
    throw std::invalid_argument(
        "make_problem: coefficients live on a different mesh");
  if (y_d.mesh() != mesh || g.mesh() != mesh)
    throw std::invalid_argument(
        "make_problem: y_d and g must live on the problem mesh");
  if (!std::isfinite(u_a) || !std::isfinite(u_b) || !(u_a < u_b))
    throw std::invalid_argument("make_problem: bounds must satisfy u_a < u_b");
  ProblemData prob{mesh, coeffs, y_d, g, u_a, u_b, newton, nullptr};
  if (coeffs.linear_in_y()) {
    prob.cache = std::make_shared<OperatorCache>(OperatorCache{
        FactorizedOperator(assemble_operator(coeffs, coeffs.c1, false)),
        FactorizedOperator(assemble_operator(coeffs, coeffs.c1, true))});
  }
  return prob;
}

bool is_admissible(const ProblemData& prob, const NodalField& u, double tol) {
  return u.values().minCoeff() >= prob.u_a - tol &&
         u.values().maxCoeff() <= prob.u_b + tol;
}

StateResult problem_state(const ProblemData& prob, const NodalField& u,
                          const Perturbation& pert) {
  check_perturbation(prob, pert);
  check_control(prob, u);
  if (!prob.cache) return solve_state(prob.coeffs, u, pert.xi, prob.newton);
  const Mesh& mesh = *prob.mesh;
  const Eigen::VectorXd load =
      pert.xi ? Eigen::VectorXd(u.values() + pert.xi->values()) : u.values();
  Eigen::VectorXd rhs = l2_load_interior(mesh, load);
  // the constant part of f moves to the right-hand side of the linear system
  rhs -= restrict_interior(
      mesh, mesh.lumped_mass().cwiseProduct(prob.coeffs.c0.values()));
  Eigen::VectorXd y_int = prob.cache->forward.solve(rhs);
  StateResult out{extend_zero(prob.mesh, y_int), {}};
  out.report.iterations = 1;
  out.report.converged = true;
  out.report.residual_history = {
      (prob.cache->forward.matrix() * y_int - rhs).norm()};
  return out;
}

NodalField problem_adjoint(const ProblemData& prob, const NodalField& y,
                           const Perturbation& pert) {
  check_perturbation(prob, pert);
  require_same_mesh(y, prob.y_d, "state");
  NodalField source = y - prob.y_d;
  if (pert.eta) source = source + *pert.eta;
  Eigen::VectorXd rhs = l2_load_interior(*prob.mesh, source.values());
  return extend_zero(prob.mesh, interior_adjoint_solve(prob, y, rhs));
}

NodalField problem_linearized(const ProblemData& prob, const NodalField& y,
                              const NodalField& v) {
  require_same_mesh(v, prob.g, "direction");
  if (!prob.cache) return solve_linearized(prob.coeffs, y, v);
  Eigen::VectorXd rhs = l2_load_interior(*prob.mesh, v.values());
  return extend_zero(prob.mesh, prob.cache->forward.solve(rhs));
}

double evaluate_J(const ProblemData& prob, const NodalField& u,
                  const Perturbation& pert) {
  return objective_value(prob, u, pert, problem_state(prob, u, pert).y);
}

double objective_at_state(const ProblemData& prob, const NodalField& u,
                          const NodalField& y, const Perturbation& pert) {
  check_perturbation(prob, pert);
  require_same_mesh(u, prob.g, "control");
  require_same_mesh(y, prob.y_d, "state");
  return objective_value(prob, u, pert, y);
}

AdjointPack evaluate_gradient(const ProblemData& prob, const NodalField& u,
                              const Perturbation& pert) {
  StateResult state = problem_state(prob, u, pert);
  NodalField phi = problem_adjoint(prob, state.y, pert);
  NodalField density = phi + effective_g(prob, pert);
  if (pert.tikhonov_eps != 0.0) density = density + pert.tikhonov_eps * u;
  const double value = objective_value(prob, u, pert, state.y);
  return AdjointPack{std::move(state.y), std::move(phi), std::move(density),
                     value};
}

double hessian_form_precomputed(const ProblemData& prob,
                                const AdjointPack& pack, const NodalField& v1,
                                const NodalField& v2, const NodalField& z1,
                                const NodalField& z2, double tikhonov_eps) {
  double value = inner_l2(z1, z2);
  if (!prob.coeffs.linear_in_y()) {
    // curvature of the nonlinearity pairs with the lumped mass, matching the
    // state discretization; this keeps finite differences of J consistent
    const Eigen::VectorXd fyy = prob.coeffs.f_second(pack.y.values());
    value -= (prob.mesh->lumped_mass().array() * pack.phi.values().array() *
              fyy.array() * z1.values().array() * z2.values().array())
                 .sum();
  }
  if (tikhonov_eps != 0.0) value += tikhonov_eps * inner_l2(v1, v2);
  return value;
}

double evaluate_hessian_form(const ProblemData& prob, const NodalField& u,
                             const NodalField& v1, const NodalField& v2,
                             const Perturbation& pert) {
  require_same_mesh(v1, prob.g, "direction");
  require_same_mesh(v2, prob.g, "direction");
  AdjointPack pack = evaluate_gradient(prob, u, pert);
  NodalField z1 = problem_linearized(prob, pack.y, v1);
  NodalField z2 = &v1 == &v2 ? z1 : problem_linearized(prob, pack.y, v2);
  return hessian_form_precomputed(prob, pack, v1, v2, z1, z2,
                                  pert.tikhonov_eps);
}

NodalField solve_psi(const ProblemData& prob, const NodalField& u,
                     const NodalField& v, const Perturbation& pert) {
  require_same_mesh(v, prob.g, "direction");
  AdjointPack pack = evaluate_gradient(prob, u, pert);
  NodalField z = problem_linearized(prob, pack.y, v);
  const Mesh& mesh = *prob.mesh;
  Eigen::VectorXd rhs = l2_load_interior(mesh, z.values());
  if (!prob.coeffs.linear_in_y()) {
    const Eigen::VectorXd fyy = prob.coeffs.f_second(pack.y.values());
    rhs -= restrict_interior(
        mesh, Eigen::VectorXd(mesh.lumped_mass().array() *
                              pack.phi.values().array() * fyy.array() *
                              z.values().array()));
  }
  return extend_zero(prob.mesh, interior_adjoint_solve(prob, pack.y, rhs));
}

}  // namespace pdeopt
