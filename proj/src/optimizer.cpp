#include "pdeopt/optimizer.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "pdeopt/errors.hpp"

namespace pdeopt {

namespace {

void check_config(const OptimizerConfig& cfg) {
  if (!(cfg.armijo_c > 0.0 && cfg.armijo_c < 1.0))
    throw std::invalid_argument("optimizer: armijo_c must lie in (0,1)");
  if (!(cfg.step_shrink > 0.0 && cfg.step_shrink < 1.0))
    throw std::invalid_argument("optimizer: step_shrink must lie in (0,1)");
  if (!(cfg.stationarity_tol > 0.0))
    throw std::invalid_argument("optimizer: stationarity_tol must be positive");
  if (!(cfg.step_init > 0.0))
    throw std::invalid_argument("optimizer: step_init must be positive");
  if (cfg.max_iters < 1)
    throw std::invalid_argument("optimizer: max_iters must be at least 1");
  if (cfg.restart_count < 1)
    throw std::invalid_argument("optimizer: restart_count must be at least 1");
}

// top 53 bits of the generator state: identical doubles on every platform
double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

NodalField draw_admissible(std::mt19937_64& rng, const ProblemData& prob) {
  Eigen::VectorXd v(prob.mesh->num_nodes());
  for (Eigen::Index i = 0; i < v.size(); ++i)
    v[i] = prob.u_a + (prob.u_b - prob.u_a) * uniform01(rng);
  return NodalField(prob.mesh, v);
}

struct RunOutcome {
  NodalField u;
  AdjointPack pack;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

RunOutcome run_descent(const ProblemData& prob, const Perturbation& pert,
                       const OptimizerConfig& cfg, const NodalField& u_init) {
  constexpr double kStepFloor = 1e-13;
  constexpr double kStepCeil = 1e9;
  NodalField u = project_admissible(u_init, prob.u_a, prob.u_b);
  AdjointPack pack = evaluate_gradient(prob, u, pert);
  double step = cfg.step_init;
  for (int it = 0; it < cfg.max_iters; ++it) {
    const double res =
        norm(u - project_admissible(u - pack.gradient_density, prob.u_a, prob.u_b),
             NormKind::L2);
    if (res <= cfg.stationarity_tol)
      return {std::move(u), std::move(pack), res, it, true};
    double t = step;
    bool clean_accept = true;
    while (true) {
      NodalField trial =
          project_admissible(u - t * pack.gradient_density, prob.u_a, prob.u_b);
      NodalField move = trial - u;
      const double move_sq = inner_l2(move, move);
      const double J_trial = evaluate_J(prob, trial, pert);
      if (J_trial <= pack.J_value - (cfg.armijo_c / t) * move_sq) {
        u = std::move(trial);
        pack = evaluate_gradient(prob, u, pert);
        step = std::min(clean_accept ? 2.0 * t : t, kStepCeil);
        break;
      }
      clean_accept = false;
      t *= cfg.step_shrink;
      if (t < kStepFloor)  // line search stalled below any meaningful step
        return {std::move(u), std::move(pack), res, it + 1, false};
    }
  }
  const double res =
      norm(u - project_admissible(u - pack.gradient_density, prob.u_a, prob.u_b),
           NormKind::L2);
  const bool ok = res <= cfg.stationarity_tol;
  return {std::move(u), std::move(pack), res, cfg.max_iters, ok};
}

}  // namespace

NodalField project_admissible(const NodalField& u, double u_a, double u_b) {
  if (!(u_a < u_b))
    throw std::invalid_argument("project_admissible: bounds must satisfy u_a < u_b");
  return NodalField(u.mesh(), u.values().cwiseMax(u_a).cwiseMin(u_b));
}

double stationarity_residual(const ProblemData& prob, const NodalField& u,
                             const Perturbation& pert) {
  AdjointPack pack = evaluate_gradient(prob, u, pert);
  return norm(
      u - project_admissible(u - pack.gradient_density, prob.u_a, prob.u_b),
      NormKind::L2);
}

OptimizeResult try_solve_control_problem(const ProblemData& prob,
                                         const Perturbation& pert,
                                         const OptimizerConfig& cfg,
                                         const std::optional<NodalField>& u_init) {
  check_config(cfg);
  if (u_init) {
    require_same_mesh(*u_init, prob.g, "initial control");
    if (!is_admissible(prob, *u_init))
      throw std::invalid_argument("optimizer: initial control is not admissible");
  }
  std::mt19937_64 rng(cfg.rng_seed);
  std::optional<RunOutcome> best;
  std::vector<RestartLog> logs;
  logs.reserve(static_cast<std::size_t>(cfg.restart_count));
  for (int r = 0; r < cfg.restart_count; ++r) {
    NodalField u0 =
        (r == 0 && u_init) ? *u_init : draw_admissible(rng, prob);
    RunOutcome out = run_descent(prob, pert, cfg, u0);
    logs.push_back({out.pack.J_value, out.residual, out.converged, out.iterations});
    const bool better =
        !best || (out.converged && !best->converged) ||
        (out.converged == best->converged && out.pack.J_value < best->pack.J_value);
    if (better) best = std::move(out);
  }
  return OptimizeResult{std::move(best->u), std::move(best->pack),
                        best->residual, best->iterations, best->converged,
                        std::move(logs)};
}

OptimizeResult solve_control_problem(const ProblemData& prob,
                                     const Perturbation& pert,
                                     const OptimizerConfig& cfg,
                                     const std::optional<NodalField>& u_init) {
  OptimizeResult result = try_solve_control_problem(prob, pert, cfg, u_init);
  if (!result.converged) {
    std::ostringstream msg;
    msg << "projected gradient: no restart reached stationarity tolerance "
        << cfg.stationarity_tol << " within " << cfg.max_iters
        << " iterations; best residual " << result.stationarity_residual;
    throw SolverError(msg.str());
  }
  return result;
}

}  // namespace pdeopt
