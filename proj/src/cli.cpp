#include "pdeopt/cli.hpp"

#include <CLI11.hpp>
#include <array>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <ostream>
#include <random>

#include "pdeopt/config.hpp"
#include "pdeopt/csvio.hpp"
#include "pdeopt/diagnostics.hpp"
#include "pdeopt/errors.hpp"
#include "pdeopt/stability.hpp"
#include "pdeopt/svg.hpp"

namespace pdeopt {

namespace fs = std::filesystem;

namespace {

struct Context {
  fs::path dir;
  bool quiet = false;
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;

  void info(const std::string& msg) const {
    if (!quiet) *out << msg << '\n';
  }
  void emit(const char* name, const std::vector<std::string>& header,
            const std::vector<std::vector<std::string>>& rows) const {
    const fs::path p = dir / name;
    write_csv(p.string(), header, rows);
    info("wrote " + p.string());
  }
};

std::string fmt_int(long long v) { return std::to_string(v); }

void warn_peclet(const ProblemData& prob, const Context& ctx) {
  const double pe = mesh_peclet(prob.coeffs);
  if (pe > 1.0)
    *ctx.err << "warning: mesh Peclet number " << format_number(pe)
             << " exceeds 1; convection is underresolved at this h\n";
}

void cmd_solve_state(const ExperimentConfig& cfg, const Context& ctx) {
  const BuiltExperiment b = build_experiment(cfg);
  warn_peclet(b.prob, ctx);
  const StateResult st = solve_state(b.prob.coeffs, b.state_u);

  const Mesh& m = *b.prob.mesh;
  std::vector<std::vector<std::string>> rows;
  rows.reserve(static_cast<std::size_t>(m.num_nodes()));
  for (int i = 0; i < m.num_nodes(); ++i)
    rows.push_back({format_number(m.node(i)[0]), format_number(m.node(i)[1]),
                    format_number(st.y[i])});
  ctx.emit("state.csv", {"node_x1", "node_x2", "y"}, rows);

  const double resid = st.report.residual_history.empty()
                           ? 0.0
                           : st.report.residual_history.back();
  ctx.emit("report.csv", {"newton_iters", "residual"},
           {{fmt_int(st.report.iterations), format_number(resid)}});
}

void cmd_solve_control(const ExperimentConfig& cfg, const Context& ctx) {
  const BuiltExperiment b = build_experiment(cfg);
  warn_peclet(b.prob, ctx);
  const OptimizeResult res = solve_control_problem(b.prob, {}, b.optimizer);

  const Mesh& m = *b.prob.mesh;
  std::vector<std::vector<std::string>> rows;
  rows.reserve(static_cast<std::size_t>(m.num_nodes()));
  for (int i = 0; i < m.num_nodes(); ++i)
    rows.push_back({format_number(m.node(i)[0]), format_number(m.node(i)[1]),
                    format_number(res.u_star[i]), format_number(res.pack.y[i]),
                    format_number(res.pack.phi[i])});
  ctx.emit("control.csv", {"node_x1", "node_x2", "u", "y", "phi"}, rows);

  ctx.emit("report.csv", {"iterations", "residual", "converged", "J"},
           {{fmt_int(res.iterations), format_number(res.stationarity_residual),
             res.converged ? "1" : "0", format_number(res.pack.J_value)}});
}

void cmd_verify_derivatives(const ExperimentConfig& cfg, const Context& ctx) {
  const BuiltExperiment b = build_experiment(cfg);
  warn_peclet(b.prob, ctx);
  const MeshPtr& mesh = b.prob.mesh;

  // one interior control/direction pair per run; u +- t v stays meaningful
  // for every t below because the draw leaves half the box as margin
  std::mt19937_64 rng(cfg.rng_seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const double mid = 0.5 * (b.prob.u_a + b.prob.u_b);
  const double halfw = 0.5 * (b.prob.u_b - b.prob.u_a);
  Eigen::VectorXd uv(mesh->num_nodes()), vv(mesh->num_nodes());
  for (int i = 0; i < mesh->num_nodes(); ++i)
    uv[i] = mid + 0.5 * halfw * unif(rng);
  for (int i = 0; i < mesh->num_nodes(); ++i) vv[i] = 0.2 * halfw * unif(rng);
  const NodalField u(mesh, uv), v(mesh, vv);

  const AdjointPack pack = evaluate_gradient(b.prob, u);
  const double dJ = inner_l2(pack.gradient_density, v);

  std::vector<std::vector<std::string>> rows;
  for (double t : {1e-1, 1e-2, 1e-3, 1e-4, 1e-5}) {
    const double fd =
        (evaluate_J(b.prob, u + v * t) - evaluate_J(b.prob, u - v * t)) /
        (2.0 * t);
    rows.push_back({format_number(t), format_number(fd), format_number(dJ),
                    format_number(std::abs(fd - dJ))});
  }
  ctx.emit("gradient_check.csv", {"t", "fd_value", "adjoint_value", "abs_error"},
           rows);
}

void cmd_check_assumptions(const ExperimentConfig& cfg, const Context& ctx) {
  const BuiltExperiment b = build_experiment(cfg);
  warn_peclet(b.prob, ctx);
  const OptimizeResult res = solve_control_problem(b.prob, {}, b.optimizer);
  ctx.info("base point solved: J = " + format_number(res.pack.J_value));

  const QuotientReport qs = coercivity_quotient_sweep(
      b.prob, res, QuotientMode::state_quotient, cfg.alpha, cfg.n_samples,
      cfg.rng_seed);
  const QuotientReport qc = coercivity_quotient_sweep(
      b.prob, res, QuotientMode::control_quotient, cfg.alpha, cfg.n_samples,
      cfg.rng_seed);
  auto quotient_row = [](const char* mode, const QuotientReport& q) {
    return std::vector<std::string>{mode, format_number(q.min_quotient),
                                    format_number(q.quantile_05),
                                    fmt_int(q.samples),
                                    format_number(q.alpha_used)};
  };
  ctx.emit("quotients.csv", {"mode", "min_quotient", "quantile_05", "samples",
                             "alpha"},
           {quotient_row("state", qs), quotient_row("control", qc)});

  std::vector<std::vector<std::string>> mrows;
  for (const MeasurePoint& p :
       measure_condition_probe(res.pack.gradient_density, cfg.measure_eps))
    mrows.push_back({format_number(p.eps), format_number(p.measure),
                     format_number(p.ratio)});
  ctx.emit("measure.csv", {"eps", "measure", "ratio"}, mrows);

  std::vector<double> candidates = cfg.kappa_candidates;
  if (candidates.empty() && qs.min_quotient > 0.0) {
    const double q = qs.min_quotient;
    candidates = {q / 32.0, q / 16.0, q / 8.0};
  }
  const std::vector<std::string> growth_header = {
      "kappa", "worst_margin", "holds", "min_kappa_emp", "positive_fraction"};
  if (candidates.empty()) {
    ctx.emit("growth.csv", growth_header, {});
    *ctx.err << "note: sampled quotient minimum is not positive and no "
                "kappa candidates were configured; growth probe skipped\n";
    return;
  }
  const GrowthReport gr = quadratic_growth_probe(
      b.prob, res, candidates, cfg.eps_ball, cfg.n_samples, cfg.rng_seed);
  std::vector<std::vector<std::string>> grows;
  for (const KappaCheck& k : gr.candidates)
    grows.push_back({format_number(k.kappa), format_number(k.worst_margin),
                     k.holds ? "1" : "0", format_number(gr.min_kappa),
                     format_number(gr.positive_fraction)});
  ctx.emit("growth.csv", growth_header, grows);
}

void cmd_sweep_stability(const ExperimentConfig& cfg, const Context& ctx) {
  const BuiltExperiment b = build_experiment(cfg);
  warn_peclet(b.prob, ctx);
  const std::vector<SweepRecord> records =
      run_stability_sweep(b.prob, b.family, b.optimizer, b.warm_start);

  std::vector<std::vector<std::string>> rows;
  for (const SweepRecord& r : records)
    rows.push_back({format_number(r.eps), format_number(r.magnitude),
                    format_number(r.dist_y_L2), format_number(r.dist_u_L1),
                    format_number(r.J_eps), r.optimizer_converged ? "1" : "0"});
  ctx.emit("sweep.csv",
           {"eps", "magnitude", "dist_y_L2", "dist_u_L1", "J_eps", "converged"},
           rows);

  const double floor = default_distance_floor(*b.prob.mesh);
  std::vector<std::vector<std::string>> srows;
  const std::pair<FitMetric, const char*> metrics[] = {
      {FitMetric::state_L2, "state_L2"}, {FitMetric::control_L1, "control_L1"}};
  for (const auto& [metric, name] : metrics) {
    try {
      const SlopeFit f = fit_lipschitz_slope(records, metric, floor);
      srows.push_back({name, format_number(f.slope),
                       format_number(f.r_squared), fmt_int(f.n_points)});
    } catch (const std::invalid_argument& e) {
      *ctx.err << "note: no slope fit for " << name << ": " << e.what()
               << '\n';
    }
  }
  ctx.emit("slopes.csv", {"metric", "slope", "r2", "n_points"}, srows);

  PlotSeries state_series{"state_L2", {}};
  PlotSeries control_series{"control_L1", {}};
  for (const SweepRecord& r : records) {
    if (!r.optimizer_converged) continue;
    state_series.points.emplace_back(r.magnitude, r.dist_y_L2);
    control_series.points.emplace_back(r.magnitude, r.dist_u_L1);
  }
  const fs::path svg = ctx.dir / "sweep.svg";
  write_loglog_svg(svg.string(), "stability sweep", "perturbation magnitude",
                   "distance to reference", {state_series, control_series});
  ctx.info("wrote " + svg.string());
}

void cmd_convergence_study(const ExperimentConfig& cfg, const Context& ctx) {
  // fixed smooth benchmark: unit diffusion, convection (1,1), cubic
  // reaction, exact state sin(pi x1) sin(pi x2) via a manufactured load
  struct Level {
    int n;
    double h;
    double error;
  };
  std::vector<Level> levels;
  for (int n : cfg.levels) {
    const MeshPtr mesh = build_mesh(n);
    const CoefficientSet coeffs =
        isotropic_coefficients(mesh, 1.0, {1.0, 1.0}, 0.0, 0.0, 1.0);
    const NodalField exact = interpolate(mesh, [](double x, double y) {
      return std::sin(M_PI * x) * std::sin(M_PI * y);
    });
    const NodalField load = interpolate(mesh, [](double x, double y) {
      const double s = std::sin(M_PI * x) * std::sin(M_PI * y);
      const double conv = M_PI * (std::cos(M_PI * x) * std::sin(M_PI * y) +
                                  std::sin(M_PI * x) * std::cos(M_PI * y));
      return 2.0 * M_PI * M_PI * s + conv + s * s * s;
    });
    const StateResult st = solve_state(coeffs, load);
    levels.push_back({n, mesh->h(), norm(st.y - exact, NormKind::L2)});
    ctx.info("n = " + fmt_int(n) +
             ": L2 error = " + format_number(levels.back().error));
  }

  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    std::string order;
    if (i > 0)
      order = format_number(std::log(levels[i - 1].error / levels[i].error) /
                            std::log(levels[i - 1].h / levels[i].h));
    rows.push_back({fmt_int(levels[i].n), format_number(levels[i].h),
                    format_number(levels[i].error), order});
  }
  ctx.emit("convergence.csv", {"n", "h", "error_L2", "order"}, rows);

  PlotSeries series{"error_L2", {}};
  for (const Level& l : levels) series.points.emplace_back(l.h, l.error);
  const fs::path svg = ctx.dir / "convergence.svg";
  write_loglog_svg(svg.string(), "state convergence", "h", "L2 error",
                   {series});
  ctx.info("wrote " + svg.string());
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out,
                std::ostream& err) {
  CLI::App app{"finite element control experiments on the unit square"};
  app.require_subcommand(1);

  using Handler = void (*)(const ExperimentConfig&, const Context&);
  struct Spec {
    const char* name;
    const char* desc;
    Handler fn;
  };
  constexpr std::array<Spec, 6> specs{{
      {"solve-state", "solve the state equation for the configured control",
       &cmd_solve_state},
      {"solve-control", "solve the box-constrained control problem",
       &cmd_solve_control},
      {"verify-derivatives",
       "compare the adjoint derivative against central differences",
       &cmd_verify_derivatives},
      {"check-assumptions",
       "probe coercivity quotients, level-set measures and quadratic growth",
       &cmd_check_assumptions},
      {"sweep-stability",
       "re-solve under shrinking perturbations and fit distance slopes",
       &cmd_sweep_stability},
      {"convergence-study",
       "manufactured-solution mesh refinement study", &cmd_convergence_study},
  }};

  struct Sub {
    Handler fn = nullptr;
    CLI::App* cmd = nullptr;
    std::string config_path;
    std::string output_override;
    std::uint64_t seed = 0;
    CLI::Option* output_opt = nullptr;
    CLI::Option* seed_opt = nullptr;
    bool quiet = false;
  };
  std::array<Sub, 6> subs;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    Sub& s = subs[i];
    s.fn = specs[i].fn;
    s.cmd = app.add_subcommand(specs[i].name, specs[i].desc);
    s.cmd->add_option("--config", s.config_path, "experiment config (TOML)")
        ->required();
    s.output_opt =
        s.cmd->add_option("--output", s.output_override, "output directory");
    s.seed_opt = s.cmd->add_option("--seed", s.seed, "override rng_seed");
    s.cmd->add_flag("--quiet", s.quiet, "suppress progress output");
  }

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("pdeopt");
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n\n" << app.help();
    return 1;
  }

  const Sub* chosen = nullptr;
  for (const Sub& s : subs)
    if (s.cmd->parsed()) chosen = &s;
  if (!chosen) {  // unreachable with require_subcommand(1)
    err << app.help();
    return 1;
  }

  try {
    ExperimentConfig cfg = parse_config(chosen->config_path);
    if (chosen->seed_opt->count() > 0) cfg.rng_seed = chosen->seed;

    std::string outdir = cfg.output_dir;
    if (const char* env = std::getenv("OUTPUT_DIR"); env && *env)
      outdir = env;
    if (chosen->output_opt->count() > 0) outdir = chosen->output_override;
    fs::create_directories(outdir);

    const Context ctx{fs::path(outdir), chosen->quiet, &out, &err};
    chosen->fn(cfg, ctx);
    return 0;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const SolverError& e) {
    err << "solver error: " << e.what() << '\n';
    return 3;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace pdeopt
