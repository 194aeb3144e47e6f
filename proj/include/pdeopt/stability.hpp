#pragma once

// Stability sweeps: solve a family of perturbed problems along a decreasing
// epsilon grid, record the distances of the perturbed optimizers to the
// unperturbed one, and fit the Lipschitz exponent of distance against
// perturbation magnitude in log-log coordinates.

#include <utility>
#include <vector>

#include "pdeopt/control.hpp"
#include "pdeopt/optimizer.hpp"

namespace pdeopt {

// One-parameter perturbation family. At parameter eps the active components
// are xi = eps * xi_shape, eta = eps * eta_shape, g_delta = eps * g_shape and
// a Tikhonov weight of eps itself. Enabled xi/eta shapes must have unit L2
// norm and an enabled g shape unit Linf norm, so that the combined magnitude
// of the perturbation at eps stays proportional to eps.
struct PerturbationFamily {
  NodalField xi_shape;
  NodalField eta_shape;
  NodalField g_shape;
  bool scale_xi = false;
  bool scale_eta = false;
  bool scale_g = false;
  bool tikhonov = false;
  std::vector<double> eps_grid;
};

// Twelve geometric points from 1e-1 down to 1e-4.
std::vector<double> default_eps_grid();

// Zero shapes, every component off, default grid.
PerturbationFamily make_family(const MeshPtr& mesh);

// Copy of shape scaled to unit norm in the given kind. Throws on zero norm.
NodalField normalize(const NodalField& shape, NormKind kind);

// Checks mesh consistency, unit norms of the enabled shapes and that the
// grid is nonempty, positive and strictly decreasing.
void validate_family(const ProblemData& prob, const PerturbationFamily& family);

// The perturbation the family induces at parameter eps. Components whose
// flag is off are left unset, so a family with every flag off reproduces the
// unperturbed problem exactly.
Perturbation family_at(const PerturbationFamily& family, double eps);

// Sum of the component sizes actually applied at eps: the L2 norms of xi and
// eta, the Linf norm of the g shift and the Tikhonov weight.
double perturbation_magnitude(const PerturbationFamily& family, double eps);

struct SweepRecord {
  double eps = 0.0;
  NodalField u_eps;
  NodalField y_eps;
  double dist_y_L2 = 0.0;   // |y_eps - y_ref| in L2
  double dist_u_L1 = 0.0;   // |u_eps - u_ref| in L1
  double J_eps = 0.0;       // perturbed objective at its minimizer
  double magnitude = 0.0;   // perturbation_magnitude at this eps
  bool optimizer_converged = false;
};

// Solves the unperturbed problem with cfg, then each perturbed problem along
// the grid in the given (decreasing) order. With warm_start each solve starts
// from the previous converged minimizer, which keeps the sweep on one branch
// of solutions; without it every solve uses the restart strategy of cfg.
// Non-converged entries are recorded with their flag cleared. Throws
// SolverError if the unperturbed reference itself fails to converge.
std::vector<SweepRecord> run_stability_sweep(const ProblemData& prob,
                                             const PerturbationFamily& family,
                                             const OptimizerConfig& cfg = {},
                                             bool warm_start = true);

enum class FitMetric { state_L2, control_L1 };

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;  // natural-log intercept
  double r_squared = 0.0;
  std::pair<double, double> eps_range_used{0.0, 0.0};  // (min, max)
  int n_points = 0;
  double floor_used = 0.0;
};

// Discretization floor below which distances are dominated by mesh error.
double default_distance_floor(const Mesh& mesh);  // 10 h^2

// Least-squares fit of log(distance) against log(magnitude) over the
// converged records whose chosen distance exceeds the floor. Throws
// std::invalid_argument (naming the floor) when fewer than four records
// remain usable.
SlopeFit fit_lipschitz_slope(const std::vector<SweepRecord>& records,
                             FitMetric metric, double floor);

// Perturbation bounds at fixed controls: ratios of the state shift and the
// linearized-state shift caused by the source perturbation at eps to the L2
// size of that perturbation.
struct BoundsSample {
  bool solved = false;
  double state_linf = 0.0;      // |y^eps_u - y_u|_Linf / |xi_eps|_L2
  double state_h10 = 0.0;       // |y^eps_u - y_u|_H10 / |xi_eps|_L2
  double linearized_l2 = 0.0;   // |z^eps_{u,v} - z_{u,v}|_L2 / |xi_eps|_L2
};

struct BoundsReport {
  std::vector<BoundsSample> samples;
  int failures = 0;  // state solves that did not converge
  double worst_state_linf = 0.0;
  double worst_state_h10 = 0.0;
  double worst_linearized_l2 = 0.0;
  double eps_used = 0.0;
};

// Evaluates the ratios at every control in u_samples for one grid parameter
// eps (which must be a member of the family grid). The linearized ratio uses
// the fixed direction v = sin(pi x) sin(pi y). Controls must be admissible.
// Solver failures are flagged per sample and excluded from the worst ratios.
BoundsReport perturbation_bounds_check(const ProblemData& prob,
                                       const PerturbationFamily& family,
                                       const std::vector<NodalField>& u_samples,
                                       double eps);

}  // namespace pdeopt
