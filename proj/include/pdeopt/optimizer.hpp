#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "pdeopt/control.hpp"

namespace pdeopt {

struct OptimizerConfig {
  int max_iters = 5000;
  double armijo_c = 1e-4;       // sufficient-decrease constant, in (0,1)
  double step_init = 1.0;
  double step_shrink = 0.5;     // backtracking factor, in (0,1)
  double stationarity_tol = 1e-8;
  int restart_count = 5;
  std::uint64_t rng_seed = 0;
};

struct RestartLog {
  double J_value = 0.0;
  double residual = 0.0;
  bool converged = false;
  int iterations = 0;
};

struct OptimizeResult {
  NodalField u_star;
  AdjointPack pack;  // evaluated at u_star
  double stationarity_residual = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<RestartLog> restart_values;  // one entry per restart, in order
};

// Nodewise clamp onto [u_a, u_b].
NodalField project_admissible(const NodalField& u, double u_a, double u_b);

// |u - clamp(u - gradient_density)|_{L2}; zero exactly at points satisfying
// the discrete variational inequality.
double stationarity_residual(const ProblemData& prob, const NodalField& u,
                             const Perturbation& pert = {});

// Projected gradient with Armijo backtracking on the possibly perturbed J.
// The initial trial step doubles after accepts that needed no backtracking,
// which keeps progress independent of the Tikhonov scale. Runs
// restart_count times (the first run from u_init when given, otherwise from
// controls drawn uniformly in the box) and returns the best converged run;
// every run is logged. Throws SolverError when no restart converges.
OptimizeResult solve_control_problem(
    const ProblemData& prob, const Perturbation& pert = {},
    const OptimizerConfig& cfg = {},
    const std::optional<NodalField>& u_init = std::nullopt);

// Same search, but reports failure through the converged flag instead of
// throwing; sweep drivers record it and move on.
OptimizeResult try_solve_control_problem(
    const ProblemData& prob, const Perturbation& pert = {},
    const OptimizerConfig& cfg = {},
    const std::optional<NodalField>& u_init = std::nullopt);

}  // namespace pdeopt
