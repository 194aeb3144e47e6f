#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "pdeopt/optimizer.hpp"

namespace pdeopt {

// Local geometry around a candidate minimizer: the switching field sigma
// (adjoint plus control offset), the nodes sitting on a bound, and the band
// width tau used by the relaxed cones.
struct ConeSpec {
  double tau = 0.0;
  std::vector<int> active_lower;
  std::vector<int> active_upper;
  NodalField sigma;
};

// Detects the active sets of u_bar nodewise (|u - bound| <= activity_tol).
// Requires tau > 0 and an admissible u_bar.
ConeSpec make_cone_spec(const ProblemData& prob, const NodalField& u_bar,
                        const NodalField& sigma, double tau,
                        double activity_tol = 1e-9);

// Membership of one direction in the critical cone and its relaxations.
// All four sets live inside the feasible-direction cone, so a sign violation
// at an active bound clears every flag.
struct DirectionClass {
  bool in_C = false;     // v = 0 wherever |sigma| exceeds 1e-12
  bool in_Dtau = false;  // v = 0 wherever |sigma| exceeds tau
  bool in_Gtau = false;  // Jprime_v <= tau * |z_v|_{L1}
  bool in_Ctau = false;  // both relaxations at once
  bool none() const { return !(in_C || in_Dtau || in_Gtau || in_Ctau); }
};

// z_v is the linearized state in direction v. Jprime_v is the first-order
// value the caller associates with v; the cone nesting C within G^tau is
// guaranteed when it is the lumped pairing sum_i m_i sigma_i v_i, which
// vanishes exactly on the critical cone.
DirectionClass classify_direction(const ConeSpec& cone, const NodalField& v,
                                  const NodalField& z_v, double Jprime_v);

enum class QuotientMode { state_quotient, control_quotient };

struct QuotientReport {
  int samples = 0;          // directions that passed the neighborhood filter
  double min_quotient = 0.0;
  double quantile_05 = 0.0;
  std::optional<NodalField> violating_sample;  // control attaining a negative quotient
  double alpha_used = 0.0;
};

// Samples admissible controls u = clamp(u_bar + s w) at logarithmically
// spaced excursion scales, keeps those with |y_u - y_bar|_Linf < alpha, and
// evaluates [J'(u_bar)(u - u_bar) + J''(u_bar)(u - u_bar)^2] / denom with
// denom = |z|_{L2}^2 (state mode) or |z|_{L2} |u - u_bar|_{L1} (control
// mode). A fixed family of smooth probe directions rides along with the
// n_samples random draws so the reported minimum can actually approach the
// extremal direction, which white noise alone never does. Requires a
// converged base point; throws SolverError when the filter rejects
// everything.
QuotientReport coercivity_quotient_sweep(const ProblemData& prob,
                                         const OptimizeResult& u_bar,
                                         QuotientMode mode, double alpha,
                                         int n_samples, std::uint64_t rng_seed,
                                         const Perturbation& pert = {});

struct MeasurePoint {
  double eps = 0.0;
  double measure = 0.0;  // area of { |sigma| <= eps }
  double ratio = 0.0;    // measure / eps
};

// Exact area of the sublevel bands of the interpolant of sigma, one point
// per entry of the strictly increasing positive eps_grid. Bounded ratios
// across the grid are the structural assumption behind bang-bang stability.
std::vector<MeasurePoint> measure_condition_probe(
    const NodalField& sigma, const std::vector<double>& eps_grid);

struct KappaCheck {
  double kappa = 0.0;
  double worst_margin = 0.0;  // min over samples of kappa_emp - kappa
  bool holds = false;
};

struct GrowthReport {
  int samples = 0;
  double min_kappa = 0.0;          // min of 2 (J(u) - J(u_bar)) / |y_u - y_bar|_{L2}^2
  double positive_fraction = 0.0;  // share of samples with a positive increment
  std::vector<KappaCheck> candidates;
  double eps_ball_used = 0.0;
};

// Samples the same admissible neighborhood and measures the quadratic
// growth of J around u_bar in the state distance. Samples outside the ball
// |y_u - y_bar|_Linf <= eps_ball are discarded; throws SolverError when
// nothing survives and std::invalid_argument for an empty candidate list.
GrowthReport quadratic_growth_probe(const ProblemData& prob,
                                    const OptimizeResult& u_bar,
                                    const std::vector<double>& kappa_candidates,
                                    double eps_ball, int n_samples,
                                    std::uint64_t rng_seed,
                                    const Perturbation& pert = {});

struct RatioRange {
  double lo = 0.0;
  double hi = 0.0;
};

// Empirical constants for the Taylor and Lipschitz estimates tying the
// control-to-state map to its linearization. Ratios are restricted to the
// sandwich_samples draws whose state increment is below sandwich_eps (the
// 25th percentile of the observed increments), the regime the two-sided
// bounds speak about.
struct LinearizationReport {
  int samples = 0;
  double K_linf = 0.0;   // |y_u - y_bar - z|_Linf / |y_u - y_bar|_Linf^2
  double M_l2 = 0.0;     // |y_u - y_bar - z|_L2 / |y_u - y_bar|_L2^2
  double C_linf = 0.0;   // |z_u,v - z_bar,v|_Linf / (|y_u - y_bar|_Linf |z_bar,v|_Linf)
  double C_l2 = 0.0;     // same in L2
  double C_theta = 0.0;  // (|y_theta - y_bar| / |y_u - y_bar| - 1) / |y_u - y_bar|, Linf
  double sandwich_eps = 0.0;
  int sandwich_samples = 0;
  RatioRange state_ratio_l2;   // |z_bar,(u-u_bar)| / |y_u - y_bar|
  RatioRange state_ratio_linf;
  RatioRange z_ratio_l2;       // |z_u,v| / |z_bar,v| for a fresh direction v
  RatioRange z_ratio_linf;
};

LinearizationReport verify_linearization_estimates(const ProblemData& prob,
                                                   const OptimizeResult& u_bar,
                                                   int n_samples,
                                                   std::uint64_t rng_seed,
                                                   const Perturbation& pert = {});

}  // namespace pdeopt
