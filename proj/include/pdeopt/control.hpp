#pragma once

#include <memory>
#include <optional>

#include "pdeopt/pde.hpp"

namespace pdeopt {

// Data perturbing the base problem: a load shift xi in the state equation, a
// linear term eta y in the objective, a shift g_delta of the control cost
// density, and a Tikhonov weight. Absent fields mean zero; the default
// object reproduces the unperturbed problem exactly.
struct Perturbation {
  std::optional<NodalField> xi;
  std::optional<NodalField> eta;
  std::optional<NodalField> g_delta;
  double tikhonov_eps = 0.0;
};

// When f is linear in y the PDE operator is control independent, so a single
// LU pair (forward and transpose) serves every solve of a problem.
struct OperatorCache {
  FactorizedOperator forward;
  FactorizedOperator adjoint;
};

// The control problem: minimize over u_a <= u <= u_b
//   1/2 |y_u - y_d|^2_{L2} + (g, u)_{L2},
// y_u solving the state equation. Perturbed evaluations add the xi load, the
// eta y and g_delta u terms and (eps/2)|u|^2 on top.
struct ProblemData {
  MeshPtr mesh;
  CoefficientSet coeffs;
  NodalField y_d;
  NodalField g;
  double u_a = 0.0;
  double u_b = 0.0;
  NewtonConfig newton;
  std::shared_ptr<const OperatorCache> cache;
};

// Validates bounds and mesh consistency; prebuilds the operator cache when
// the nonlinearity is linear in y.
ProblemData make_problem(const MeshPtr& mesh, const CoefficientSet& coeffs,
                         const NodalField& y_d, const NodalField& g,
                         double u_a, double u_b,
                         const NewtonConfig& newton = {});

bool is_admissible(const ProblemData& prob, const NodalField& u,
                   double tol = 1e-12);

// State solve for the possibly perturbed problem (load u + xi), through the
// cached factorization when one exists.
StateResult problem_state(const ProblemData& prob, const NodalField& u,
                          const Perturbation& pert = {});

// Adjoint solve at the state y:  A* phi + f_y(., y) phi = (y - y_d) + eta.
NodalField problem_adjoint(const ProblemData& prob, const NodalField& y,
                           const Perturbation& pert = {});

// Linearized state solve at y:  A z + f_y(., y) z = v.
NodalField problem_linearized(const ProblemData& prob, const NodalField& y,
                              const NodalField& v);

// Everything the first derivative of J at u yields in one pass. The density
// represents the derivative exactly: dJ(u) v = (gradient_density, v)_{L2}.
struct AdjointPack {
  NodalField y;
  NodalField phi;
  NodalField gradient_density;  // phi + g + g_delta + eps u
  double J_value = 0.0;
};

double evaluate_J(const ProblemData& prob, const NodalField& u,
                  const Perturbation& pert = {});

// Objective value at an already computed state, for callers that solved the
// state equation themselves and want to avoid a second solve.
double objective_at_state(const ProblemData& prob, const NodalField& u,
                          const NodalField& y, const Perturbation& pert = {});

AdjointPack evaluate_gradient(const ProblemData& prob, const NodalField& u,
                              const Perturbation& pert = {});

// Second derivative of the perturbed J at u:
//   d2J(u)(v1,v2) = (z1, z2) - int phi f_yy(., y) z1 z2 + eps (v1, v2),
// with z_i the linearized states of v_i. The middle term pairs with the
// lumped mass, matching the state discretization, so finite differences of
// evaluate_J reproduce this value to O(t^2).
double evaluate_hessian_form(const ProblemData& prob, const NodalField& u,
                             const NodalField& v1, const NodalField& v2,
                             const Perturbation& pert = {});

// Same curvature form from precomputed pieces; z1, z2 must be the linearized
// states of v1, v2 at pack.y. Lets samplers at a fixed base point pay one
// linear solve per direction instead of a full gradient evaluation.
double hessian_form_precomputed(const ProblemData& prob,
                                const AdjointPack& pack, const NodalField& v1,
                                const NodalField& v2, const NodalField& z1,
                                const NodalField& z2, double tikhonov_eps = 0.0);

// The curvature transfer field: psi solves the adjoint-type equation
//   A* psi + f_y(., y) psi = (1 - phi f_yy(., y)) z_v,
// so (psi, v)_{L2} equals the eps-free part of the curvature form at (v, v).
NodalField solve_psi(const ProblemData& prob, const NodalField& u,
                     const NodalField& v, const Perturbation& pert = {});

}  // namespace pdeopt
