#include "pdeopt/stability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "pdeopt/errors.hpp"

namespace pdeopt {

namespace {

// Both sides zero means the perturbation is absent and nothing moved.
double ratio_or_zero(double left, double right) {
  if (right > 0.0) return left / right;
  return left == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
}

void check_unit(const NodalField& shape, NormKind kind, const char* name) {
  const double n = norm(shape, kind);
  if (std::abs(n - 1.0) > 1e-8) {
    std::ostringstream os;
    os << "perturbation family: " << name << " must have unit norm, got " << n;
    throw std::invalid_argument(os.str());
  }
}

}  // namespace

std::vector<double> default_eps_grid() {
  std::vector<double> grid;
  grid.reserve(12);
  for (int k = 0; k < 12; ++k)
    grid.push_back(1e-1 * std::pow(1e-3, k / 11.0));
  return grid;
}

PerturbationFamily make_family(const MeshPtr& mesh) {
  return {NodalField::zero(mesh), NodalField::zero(mesh),
          NodalField::zero(mesh), false, false, false, false,
          default_eps_grid()};
}

NodalField normalize(const NodalField& shape, NormKind kind) {
  const double n = norm(shape, kind);
  if (!(n > 0.0))
    throw std::invalid_argument("normalize: shape has zero norm");
  return (1.0 / n) * shape;
}

void validate_family(const ProblemData& prob, const PerturbationFamily& family) {
  require_same_mesh(prob.g, family.xi_shape, "xi_shape");
  require_same_mesh(prob.g, family.eta_shape, "eta_shape");
  require_same_mesh(prob.g, family.g_shape, "g_shape");
  if (family.eps_grid.empty())
    throw std::invalid_argument("perturbation family: eps grid is empty");
  double prev = std::numeric_limits<double>::infinity();
  for (double e : family.eps_grid) {
    if (!(e > 0.0))
      throw std::invalid_argument(
          "perturbation family: eps grid entries must be positive");
    if (!(e < prev))
      throw std::invalid_argument(
          "perturbation family: eps grid must be strictly decreasing");
    prev = e;
  }
  if (family.scale_xi) check_unit(family.xi_shape, NormKind::L2, "xi_shape");
  if (family.scale_eta) check_unit(family.eta_shape, NormKind::L2, "eta_shape");
  if (family.scale_g) check_unit(family.g_shape, NormKind::Linf, "g_shape");
}

Perturbation family_at(const PerturbationFamily& family, double eps) {
  Perturbation pert;
  if (family.scale_xi) pert.xi = eps * family.xi_shape;
  if (family.scale_eta) pert.eta = eps * family.eta_shape;
  if (family.scale_g) pert.g_delta = eps * family.g_shape;
  if (family.tikhonov) pert.tikhonov_eps = eps;
  return pert;
}

double perturbation_magnitude(const PerturbationFamily& family, double eps) {
  const Perturbation pert = family_at(family, eps);
  double m = pert.tikhonov_eps;
  if (pert.xi) m += norm(*pert.xi, NormKind::L2);
  if (pert.eta) m += norm(*pert.eta, NormKind::L2);
  if (pert.g_delta) m += norm(*pert.g_delta, NormKind::Linf);
  return m;
}

std::vector<SweepRecord> run_stability_sweep(const ProblemData& prob,
                                             const PerturbationFamily& family,
                                             const OptimizerConfig& cfg,
                                             bool warm_start) {
  validate_family(prob, family);
  const OptimizeResult ref = solve_control_problem(prob, {}, cfg);

  std::vector<SweepRecord> records;
  records.reserve(family.eps_grid.size());
  std::optional<NodalField> warm;
  if (warm_start) warm = ref.u_star;
  const double nan = std::numeric_limits<double>::quiet_NaN();

  for (double eps : family.eps_grid) {
    const Perturbation pert = family_at(family, eps);
    const double magnitude = perturbation_magnitude(family, eps);
    try {
      OptimizeResult res = try_solve_control_problem(
          prob, pert, cfg, warm_start ? warm : std::nullopt);
      if (warm_start && res.converged) warm = res.u_star;
      records.push_back(SweepRecord{
          eps, res.u_star, res.pack.y,
          norm(res.pack.y - ref.pack.y, NormKind::L2),
          norm(res.u_star - ref.u_star, NormKind::L1), res.pack.J_value,
          magnitude, res.converged});
    } catch (const SolverError&) {
      // a state solve blew up at this eps; keep the slot so the grid stays
      // aligned, but with nothing a fit could mistake for data
      records.push_back(SweepRecord{eps, ref.u_star, ref.pack.y, nan, nan,
                                    nan, magnitude, false});
    }
  }
  return records;
}

double default_distance_floor(const Mesh& mesh) {
  return 10.0 * mesh.h() * mesh.h();
}

SlopeFit fit_lipschitz_slope(const std::vector<SweepRecord>& records,
                             FitMetric metric, double floor) {
  std::vector<double> lx;
  std::vector<double> ly;
  double eps_min = std::numeric_limits<double>::infinity();
  double eps_max = 0.0;
  for (const auto& r : records) {
    if (!r.optimizer_converged) continue;
    const double d =
        metric == FitMetric::state_L2 ? r.dist_y_L2 : r.dist_u_L1;
    if (!(d > floor) || !(r.magnitude > 0.0)) continue;
    lx.push_back(std::log(r.magnitude));
    ly.push_back(std::log(d));
    eps_min = std::min(eps_min, r.eps);
    eps_max = std::max(eps_max, r.eps);
  }
  const int n = static_cast<int>(lx.size());
  if (n < 4) {
    std::ostringstream os;
    os << "slope fit needs at least 4 usable points, got " << n
       << " (converged records with distance above the floor " << floor
       << ")";
    throw std::invalid_argument(os.str());
  }

  double mx = 0.0;
  double my = 0.0;
  for (int i = 0; i < n; ++i) {
    mx += lx[static_cast<std::size_t>(i)];
    my += ly[static_cast<std::size_t>(i)];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (int i = 0; i < n; ++i) {
    const double dx = lx[static_cast<std::size_t>(i)] - mx;
    const double dy = ly[static_cast<std::size_t>(i)] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0.0))
    throw std::invalid_argument(
        "slope fit: all usable records share one magnitude");

  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  const double ss_res = syy - sxy * sxy / sxx;
  fit.r_squared =
      syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
  fit.eps_range_used = {eps_min, eps_max};
  fit.n_points = n;
  fit.floor_used = floor;
  return fit;
}

BoundsReport perturbation_bounds_check(const ProblemData& prob,
                                       const PerturbationFamily& family,
                                       const std::vector<NodalField>& u_samples,
                                       double eps) {
  validate_family(prob, family);
  if (std::find(family.eps_grid.begin(), family.eps_grid.end(), eps) ==
      family.eps_grid.end()) {
    std::ostringstream os;
    os << "bounds check: eps " << eps << " is not a grid point of the family";
    throw std::invalid_argument(os.str());
  }
  if (u_samples.empty())
    throw std::invalid_argument("bounds check: no control samples given");

  const Perturbation pert = family_at(family, eps);
  const double right = pert.xi ? norm(*pert.xi, NormKind::L2) : 0.0;
  const NodalField v = interpolate(prob.mesh, [](double x, double y) {
    return std::sin(M_PI * x) * std::sin(M_PI * y);
  });

  BoundsReport rep;
  rep.eps_used = eps;
  rep.samples.reserve(u_samples.size());
  int index = 0;
  for (const auto& u : u_samples) {
    require_same_mesh(prob.g, u, "control sample");
    if (!is_admissible(prob, u)) {
      std::ostringstream os;
      os << "bounds check: control sample " << index
         << " violates the control bounds";
      throw std::invalid_argument(os.str());
    }
    BoundsSample sample;
    try {
      const NodalField y_u = problem_state(prob, u).y;
      const NodalField y_eps = problem_state(prob, u, pert).y;
      const NodalField dy = y_eps - y_u;
      const NodalField z_u = problem_linearized(prob, y_u, v);
      const NodalField z_eps = problem_linearized(prob, y_eps, v);
      sample.solved = true;
      sample.state_linf = ratio_or_zero(norm(dy, NormKind::Linf), right);
      sample.state_h10 = ratio_or_zero(norm(dy, NormKind::H10), right);
      sample.linearized_l2 =
          ratio_or_zero(norm(z_eps - z_u, NormKind::L2), right);
      rep.worst_state_linf = std::max(rep.worst_state_linf, sample.state_linf);
      rep.worst_state_h10 = std::max(rep.worst_state_h10, sample.state_h10);
      rep.worst_linearized_l2 =
          std::max(rep.worst_linearized_l2, sample.linearized_l2);
    } catch (const SolverError&) {
      ++rep.failures;
    }
    rep.samples.push_back(sample);
    ++index;
  }
  return rep;
}

}  // namespace pdeopt
