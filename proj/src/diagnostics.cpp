#include "pdeopt/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "pdeopt/errors.hpp"
#include "pdeopt/pde.hpp"

namespace pdeopt {

namespace {

constexpr double kNodeTol = 1e-12;

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

NodalField random_direction(const MeshPtr& mesh, std::mt19937_64& rng) {
  Eigen::VectorXd w(mesh->num_nodes());
  for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = 2.0 * uniform01(rng) - 1.0;
  return NodalField(mesh, std::move(w));
}

// excursion scales, logarithmically spaced over three decades
double scale_for(int k, int n) {
  if (n <= 1) return 1.0;
  return 1e-3 * std::pow(1e3, static_cast<double>(k) / (n - 1));
}

// Forward linearized solves at one fixed base state; factorizes once so
// sweeps do not pay an assembly per sample.
class LinearizedSolver {
 public:
  LinearizedSolver(const ProblemData& prob, const NodalField& y_base)
      : prob_(prob) {
    if (!prob.cache) {
      NodalField a(prob.mesh, prob.coeffs.f_prime(y_base.values()));
      op_.emplace(assemble_operator(prob.coeffs, a));
    }
  }

  NodalField solve(const NodalField& v) const {
    Eigen::VectorXd rhs = l2_load_interior(*prob_.mesh, v.values());
    const FactorizedOperator& op = prob_.cache ? prob_.cache->forward : *op_;
    return extend_zero(prob_.mesh, op.solve(rhs));
  }

 private:
  const ProblemData& prob_;
  std::optional<FactorizedOperator> op_;
};

void check_base_point(const ProblemData& prob, const OptimizeResult& base,
                      const char* op) {
  if (!base.converged) {
    std::ostringstream msg;
    msg << op << " requires a converged base point (stationarity residual "
        << base.stationarity_residual << ")";
    throw std::invalid_argument(msg.str());
  }
  require_same_mesh(base.u_star, prob.g, "base control");
  require_same_mesh(base.pack.y, prob.y_d, "base state");
}

// admissible controls around the base point: n random white-noise
// excursions plus, when requested, a deterministic family of smooth shapes
// that can actually align with extremal curvature directions
std::vector<NodalField> neighborhood_samples(const ProblemData& prob,
                                             const NodalField& u_bar,
                                             int n_samples,
                                             std::uint64_t rng_seed,
                                             bool with_probes) {
  std::mt19937_64 rng(rng_seed);
  std::vector<NodalField> out;
  out.reserve(static_cast<std::size_t>(n_samples) + 24);
  for (int k = 0; k < n_samples; ++k) {
    NodalField w = random_direction(prob.mesh, rng);
    out.push_back(project_admissible(u_bar + scale_for(k, n_samples) * w,
                                     prob.u_a, prob.u_b));
  }
  if (!with_probes) return out;
  std::vector<NodalField> shapes;
  shapes.push_back(NodalField::constant(prob.mesh, 1.0));
  for (auto [kx, ky] : {std::pair{1, 1}, std::pair{2, 1}, std::pair{1, 2}}) {
    shapes.push_back(interpolate(prob.mesh, [kx = kx, ky = ky](double x, double y) {
      return std::sin(kx * M_PI * x) * std::sin(ky * M_PI * y);
    }));
  }
  for (const NodalField& shape : shapes)
    for (double s : {1e-3, 3e-2, 1.0})
      for (double sign : {1.0, -1.0})
        out.push_back(project_admissible(u_bar + (sign * s) * shape,
                                         prob.u_a, prob.u_b));
  return out;
}

[[noreturn]] void throw_all_filtered(const char* op, double radius,
                                     std::size_t total) {
  std::ostringstream msg;
  msg << op << ": neighborhood radius " << radius << " rejected all " << total
      << " samples; widen the filter or add samples";
  throw SolverError(msg.str());
}

// area fraction of one triangle where the linear interpolant of d is below c
double fraction_below(const std::array<double, 3>& d, double c) {
  const std::array<double, 3> e = {d[0] - c, d[1] - c, d[2] - c};
  const bool neg[3] = {e[0] < 0.0, e[1] < 0.0, e[2] < 0.0};
  const int count = neg[0] + neg[1] + neg[2];
  if (count == 0) return 0.0;
  if (count == 3) return 1.0;
  // the level line cuts off a triangle similar to the one spanned at the
  // odd vertex; its area scales with the squared barycentric offsets
  const int a = count == 1 ? (neg[0] ? 0 : neg[1] ? 1 : 2)
                           : (!neg[0] ? 0 : !neg[1] ? 1 : 2);
  const double ea = e[a];
  const double eb = e[(a + 1) % 3];
  const double ec = e[(a + 2) % 3];
  const double corner = ea * ea / ((ea - eb) * (ea - ec));
  return count == 1 ? corner : 1.0 - corner;
}

}  // namespace

ConeSpec make_cone_spec(const ProblemData& prob, const NodalField& u_bar,
                        const NodalField& sigma, double tau,
                        double activity_tol) {
  if (!(tau > 0.0)) throw std::invalid_argument("cone width tau must be positive");
  if (!(activity_tol >= 0.0))
    throw std::invalid_argument("activity tolerance must be nonnegative");
  require_same_mesh(u_bar, prob.g, "control");
  require_same_mesh(sigma, prob.g, "switching field");
  if (!is_admissible(prob, u_bar))
    throw std::invalid_argument("cone base control violates the box bounds");
  ConeSpec cone{tau, {}, {}, sigma};
  for (int i = 0; i < u_bar.size(); ++i) {
    if (u_bar[i] - prob.u_a <= activity_tol)
      cone.active_lower.push_back(i);
    else if (prob.u_b - u_bar[i] <= activity_tol)
      cone.active_upper.push_back(i);
  }
  return cone;
}

DirectionClass classify_direction(const ConeSpec& cone, const NodalField& v,
                                  const NodalField& z_v, double Jprime_v) {
  require_same_mesh(v, cone.sigma, "direction");
  require_same_mesh(z_v, cone.sigma, "linearized state");
  for (int i : cone.active_lower)
    if (v[i] < -kNodeTol) return {};
  for (int i : cone.active_upper)
    if (v[i] > kNodeTol) return {};
  DirectionClass cls;
  cls.in_C = true;
  cls.in_Dtau = true;
  for (int i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) <= kNodeTol) continue;
    const double s = std::abs(cone.sigma[i]);
    if (s > kNodeTol) cls.in_C = false;
    if (s > cone.tau) cls.in_Dtau = false;
    if (!cls.in_C && !cls.in_Dtau) break;
  }
  cls.in_Gtau = Jprime_v <= cone.tau * norm(z_v, NormKind::L1) + kNodeTol;
  cls.in_Ctau = cls.in_Dtau && cls.in_Gtau;
  return cls;
}

QuotientReport coercivity_quotient_sweep(const ProblemData& prob,
                                         const OptimizeResult& u_bar,
                                         QuotientMode mode, double alpha,
                                         int n_samples, std::uint64_t rng_seed,
                                         const Perturbation& pert) {
  check_base_point(prob, u_bar, "quotient sweep");
  if (!(alpha > 0.0))
    throw std::invalid_argument("neighborhood radius alpha must be positive");
  if (n_samples < 1) throw std::invalid_argument("need at least one sample");

  const NodalField& y_bar = u_bar.pack.y;
  LinearizedSolver lin(prob, y_bar);
  auto candidates =
      neighborhood_samples(prob, u_bar.u_star, n_samples, rng_seed, true);

  QuotientReport rep;
  rep.alpha_used = alpha;
  std::vector<double> quotients;
  quotients.reserve(candidates.size());
  std::optional<NodalField> argmin;
  double best = std::numeric_limits<double>::infinity();
  for (const NodalField& u : candidates) {
    NodalField y_u = problem_state(prob, u, pert).y;
    if (!(norm(y_u - y_bar, NormKind::Linf) < alpha)) continue;
    NodalField v = u - u_bar.u_star;
    NodalField z = lin.solve(v);
    const double zz = inner_l2(z, z);
    const double denom = mode == QuotientMode::state_quotient
                             ? zz
                             : std::sqrt(zz) * norm(v, NormKind::L1);
    if (!(denom > 0.0) || !std::isfinite(denom)) continue;
    const double first = inner_l2(u_bar.pack.gradient_density, v);
    const double second = hessian_form_precomputed(prob, u_bar.pack, v, v, z, z,
                                                   pert.tikhonov_eps);
    const double q = (first + second) / denom;
    quotients.push_back(q);
    if (q < best) {
      best = q;
      argmin = u;
    }
  }
  if (quotients.empty())
    throw_all_filtered("quotient sweep", alpha, candidates.size());

  std::sort(quotients.begin(), quotients.end());
  rep.samples = static_cast<int>(quotients.size());
  rep.min_quotient = quotients.front();
  const auto q05 = static_cast<std::size_t>(0.05 * (quotients.size() - 1));
  rep.quantile_05 = quotients[q05];
  if (rep.min_quotient < 0.0) rep.violating_sample = std::move(argmin);
  return rep;
}

std::vector<MeasurePoint> measure_condition_probe(
    const NodalField& sigma, const std::vector<double>& eps_grid) {
  if (eps_grid.empty())
    throw std::invalid_argument("measure probe needs a nonempty eps grid");
  for (std::size_t i = 0; i < eps_grid.size(); ++i) {
    if (!(eps_grid[i] > 0.0))
      throw std::invalid_argument("measure probe eps values must be positive");
    if (i > 0 && !(eps_grid[i] > eps_grid[i - 1]))
      throw std::invalid_argument(
          "measure probe eps grid must be strictly increasing");
  }
  const Mesh& mesh = *sigma.mesh();
  std::vector<MeasurePoint> out;
  out.reserve(eps_grid.size());
  for (double eps : eps_grid) {
    double area = 0.0;
    for (const Triangle& t : mesh.triangles()) {
      const std::array<double, 3> d = {sigma[t.v[0]], sigma[t.v[1]],
                                       sigma[t.v[2]]};
      area += t.area * (fraction_below(d, eps) - fraction_below(d, -eps));
    }
    out.push_back({eps, area, area / eps});
  }
  return out;
}

GrowthReport quadratic_growth_probe(const ProblemData& prob,
                                    const OptimizeResult& u_bar,
                                    const std::vector<double>& kappa_candidates,
                                    double eps_ball, int n_samples,
                                    std::uint64_t rng_seed,
                                    const Perturbation& pert) {
  check_base_point(prob, u_bar, "growth probe");
  if (kappa_candidates.empty())
    throw std::invalid_argument("growth probe needs candidate kappa values");
  if (!(eps_ball > 0.0))
    throw std::invalid_argument("growth ball radius must be positive");
  if (n_samples < 1) throw std::invalid_argument("need at least one sample");

  const NodalField& y_bar = u_bar.pack.y;
  const double J_bar = u_bar.pack.J_value;
  auto candidates =
      neighborhood_samples(prob, u_bar.u_star, n_samples, rng_seed, false);

  std::vector<double> kappas;
  kappas.reserve(candidates.size());
  int positive = 0;
  for (const NodalField& u : candidates) {
    NodalField y_u = problem_state(prob, u, pert).y;
    NodalField dy = y_u - y_bar;
    if (!(norm(dy, NormKind::Linf) <= eps_ball)) continue;
    const double dist2 = inner_l2(dy, dy);
    if (!(dist2 > 0.0)) continue;
    const double gain = objective_at_state(prob, u, y_u, pert) - J_bar;
    if (gain > 0.0) ++positive;
    kappas.push_back(2.0 * gain / dist2);
  }
  if (kappas.empty())
    throw_all_filtered("growth probe", eps_ball, candidates.size());

  GrowthReport rep;
  rep.samples = static_cast<int>(kappas.size());
  rep.min_kappa = *std::min_element(kappas.begin(), kappas.end());
  rep.positive_fraction = static_cast<double>(positive) / rep.samples;
  rep.eps_ball_used = eps_ball;
  for (double kappa : kappa_candidates) {
    const double margin = rep.min_kappa - kappa;
    rep.candidates.push_back({kappa, margin, margin >= 0.0});
  }
  return rep;
}

LinearizationReport verify_linearization_estimates(const ProblemData& prob,
                                                   const OptimizeResult& u_bar,
                                                   int n_samples,
                                                   std::uint64_t rng_seed,
                                                   const Perturbation& pert) {
  check_base_point(prob, u_bar, "linearization check");
  if (n_samples < 1) throw std::invalid_argument("need at least one sample");

  const NodalField& y_bar = u_bar.pack.y;
  LinearizedSolver lin(prob, y_bar);
  std::mt19937_64 rng(rng_seed);

  struct Sample {
    double dn_inf;
    double state_l2, state_linf;  // |z_dir| / |y_u - y_bar|
    double z_l2, z_linf;          // |z at y_u| / |z at y_bar|
  };
  std::vector<Sample> samples;
  samples.reserve(static_cast<std::size_t>(n_samples));

  LinearizationReport rep;
  rep.samples = n_samples;
  rep.C_theta = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < n_samples; ++k) {
    NodalField u = u_bar.u_star;
    NodalField v = NodalField::zero(prob.mesh);
    for (int tries = 0; norm(v, NormKind::Linf) <= 0.0; ++tries) {
      if (tries > 64)
        throw SolverError("linearization check cannot leave the base point");
      u = project_admissible(
          u_bar.u_star + scale_for(k, n_samples) * random_direction(prob.mesh, rng),
          prob.u_a, prob.u_b);
      v = u - u_bar.u_star;
    }
    NodalField y_u = problem_state(prob, u, pert).y;
    NodalField dy = y_u - y_bar;
    const double dn_inf = norm(dy, NormKind::Linf);
    const double dn_l2 = norm(dy, NormKind::L2);
    NodalField z_dir = lin.solve(v);

    rep.K_linf = std::max(rep.K_linf,
                          norm(dy - z_dir, NormKind::Linf) / (dn_inf * dn_inf));
    rep.M_l2 =
        std::max(rep.M_l2, norm(dy - z_dir, NormKind::L2) / (dn_l2 * dn_l2));

    // Lipschitz dependence of the linearization on its base state, probed
    // with a fresh direction
    NodalField v_fresh = random_direction(prob.mesh, rng);
    NodalField z_bar_f = lin.solve(v_fresh);
    NodalField z_u_f = problem_linearized(prob, y_u, v_fresh);
    const double zb_inf = norm(z_bar_f, NormKind::Linf);
    const double zb_l2 = norm(z_bar_f, NormKind::L2);
    rep.C_linf = std::max(
        rep.C_linf, norm(z_u_f - z_bar_f, NormKind::Linf) / (dn_inf * zb_inf));
    rep.C_l2 = std::max(rep.C_l2,
                        norm(z_u_f - z_bar_f, NormKind::L2) / (dn_l2 * zb_l2));

    // intermediate points of the segment stay uniformly close to the base
    for (double theta : {0.25, 0.5, 0.75}) {
      NodalField y_theta = problem_state(prob, u_bar.u_star + theta * v, pert).y;
      const double ratio = norm(y_theta - y_bar, NormKind::Linf) / dn_inf;
      rep.C_theta = std::max(rep.C_theta, (ratio - 1.0) / dn_inf);
    }

    samples.push_back({dn_inf, norm(z_dir, NormKind::L2) / dn_l2,
                       norm(z_dir, NormKind::Linf) / dn_inf,
                       norm(z_u_f, NormKind::L2) / zb_l2,
                       norm(z_u_f, NormKind::Linf) / zb_inf});
  }

  // the two-sided bounds concern small increments: restrict the ratio
  // ranges to the quarter of the draws with the smallest state change
  std::vector<double> dists;
  dists.reserve(samples.size());
  for (const Sample& s : samples) dists.push_back(s.dn_inf);
  std::sort(dists.begin(), dists.end());
  rep.sandwich_eps = dists[static_cast<std::size_t>(0.25 * (dists.size() - 1))];

  const double inf = std::numeric_limits<double>::infinity();
  rep.state_ratio_l2 = rep.state_ratio_linf = rep.z_ratio_l2 = rep.z_ratio_linf =
      {inf, -inf};
  auto widen = [](RatioRange& r, double value) {
    r.lo = std::min(r.lo, value);
    r.hi = std::max(r.hi, value);
  };
  for (const Sample& s : samples) {
    if (s.dn_inf > rep.sandwich_eps) continue;
    ++rep.sandwich_samples;
    widen(rep.state_ratio_l2, s.state_l2);
    widen(rep.state_ratio_linf, s.state_linf);
    widen(rep.z_ratio_l2, s.z_l2);
    widen(rep.z_ratio_linf, s.z_linf);
  }
  return rep;
}

}  // namespace pdeopt
