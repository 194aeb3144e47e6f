// Python interface. Handles hold the C++ value types; fields cross the
// boundary as plain numpy vectors indexed like Mesh::node, and results come
// back as dicts so the surface stays small.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <stdexcept>

#include "pdeopt/control.hpp"
#include "pdeopt/diagnostics.hpp"
#include "pdeopt/errors.hpp"
#include "pdeopt/mesh.hpp"
#include "pdeopt/optimizer.hpp"
#include "pdeopt/pde.hpp"
#include "pdeopt/stability.hpp"

namespace py = pybind11;
using namespace pdeopt;

namespace {

struct PyMesh {
  MeshPtr m;
};

struct PyCoeffs {
  MeshPtr m;
  CoefficientSet co;
};

struct PyProblem {
  ProblemData prob;
};

NodalField to_field(const MeshPtr& m, const Eigen::VectorXd& v) {
  if (v.size() != m->num_nodes())
    throw std::invalid_argument("field has " + std::to_string(v.size()) +
                                " entries for a mesh with " +
                                std::to_string(m->num_nodes()) + " nodes");
  return NodalField(m, v);
}

std::optional<NodalField> opt_field(const MeshPtr& m,
                                    const std::optional<Eigen::VectorXd>& v) {
  if (!v) return std::nullopt;
  return to_field(m, *v);
}

Perturbation build_pert(const ProblemData& prob,
                        const std::optional<Eigen::VectorXd>& xi,
                        const std::optional<Eigen::VectorXd>& eta,
                        const std::optional<Eigen::VectorXd>& g_delta,
                        double tikhonov_eps) {
  Perturbation pert;
  pert.xi = opt_field(prob.mesh, xi);
  pert.eta = opt_field(prob.mesh, eta);
  pert.g_delta = opt_field(prob.mesh, g_delta);
  pert.tikhonov_eps = tikhonov_eps;
  return pert;
}

OptimizerConfig build_cfg(int max_iters, double stationarity_tol,
                          int restart_count, std::uint64_t rng_seed) {
  OptimizerConfig cfg;
  cfg.max_iters = max_iters;
  cfg.stationarity_tol = stationarity_tol;
  cfg.restart_count = restart_count;
  cfg.rng_seed = rng_seed;
  return cfg;
}

NormKind parse_norm(const std::string& kind) {
  if (kind == "L1") return NormKind::L1;
  if (kind == "L2") return NormKind::L2;
  if (kind == "Linf") return NormKind::Linf;
  if (kind == "H10") return NormKind::H10;
  throw std::invalid_argument("unknown norm kind '" + kind +
                              "' (expected L1, L2, Linf or H10)");
}

py::dict optimize_dict(const OptimizeResult& res) {
  py::dict d;
  d["u"] = res.u_star.values();
  d["y"] = res.pack.y.values();
  d["phi"] = res.pack.phi.values();
  d["gradient_density"] = res.pack.gradient_density.values();
  d["J"] = res.pack.J_value;
  d["residual"] = res.stationarity_residual;
  d["iterations"] = res.iterations;
  d["converged"] = res.converged;
  return d;
}

py::object fit_dict(const std::vector<SweepRecord>& records, FitMetric metric,
                    double floor) {
  try {
    const SlopeFit fit = fit_lipschitz_slope(records, metric, floor);
    py::dict d;
    d["slope"] = fit.slope;
    d["intercept"] = fit.intercept;
    d["r_squared"] = fit.r_squared;
    d["n_points"] = fit.n_points;
    d["floor_used"] = fit.floor_used;
    return d;
  } catch (const std::invalid_argument&) {
    return py::none();  // fewer than four usable points
  }
}

}  // namespace

PYBIND11_MODULE(_core, mod) {
  mod.doc() =
      "Optimal control of a semilinear elliptic equation: state/adjoint "
      "solves, projected-gradient control solves and stability sweeps.";

  py::register_exception<ConfigError>(mod, "ConfigError", PyExc_ValueError);
  py::register_exception<SolverError>(mod, "SolverError", PyExc_RuntimeError);

  py::class_<PyMesh>(mod, "Mesh", "Uniform triangulation of the unit square.")
      .def_property_readonly("h", [](const PyMesh& s) { return s.m->h(); })
      .def_property_readonly(
          "num_nodes", [](const PyMesh& s) { return s.m->num_nodes(); })
      .def_property_readonly("nodes",
                             [](const PyMesh& s) {
                               Eigen::MatrixXd out(s.m->num_nodes(), 2);
                               for (int i = 0; i < s.m->num_nodes(); ++i)
                                 out.row(i) = s.m->node(i).transpose();
                               return out;
                             },
                             "(N, 2) array of node coordinates")
      .def_property_readonly(
          "lumped_mass",
          [](const PyMesh& s) -> Eigen::VectorXd { return s.m->lumped_mass(); })
      .def("__repr__", [](const PyMesh& s) {
        return "Mesh(h=" + std::to_string(s.m->h()) + ", nodes=" +
               std::to_string(s.m->num_nodes()) + ")";
      });

  py::class_<PyCoeffs>(mod, "Coefficients",
                       "PDE data: diffusion, convection and reaction.")
      .def_property_readonly(
          "peclet", [](const PyCoeffs& s) { return mesh_peclet(s.co); });

  py::class_<PyProblem>(mod, "Problem",
                        "Control problem: tracking objective, cost density "
                        "and box constraints over a coefficient set.")
      .def_property_readonly(
          "u_a", [](const PyProblem& s) { return s.prob.u_a; })
      .def_property_readonly(
          "u_b", [](const PyProblem& s) { return s.prob.u_b; });

  mod.def(
      "build_mesh", [](int n) { return PyMesh{build_mesh(n)}; }, py::arg("n"),
      "Uniform n x n criss-cross mesh of the unit square.");

  mod.def(
      "isotropic_coefficients",
      [](const PyMesh& mesh, double diffusion, std::pair<double, double> b,
         double c0, double c1, double c3) {
        return PyCoeffs{mesh.m,
                        isotropic_coefficients(mesh.m, diffusion,
                                               {b.first, b.second}, c0, c1, c3)};
      },
      py::arg("mesh"), py::arg("diffusion"),
      py::arg("b") = std::pair<double, double>{0.0, 0.0}, py::arg("c0") = 0.0,
      py::arg("c1") = 0.0, py::arg("c3") = 0.0,
      "Constant diffusion and convection with reaction c0 + c1 y + c3 y^3.");

  mod.def(
      "solve_state",
      [](const PyCoeffs& co, const Eigen::VectorXd& u,
         const std::optional<Eigen::VectorXd>& xi) {
        auto res = solve_state(co.co, to_field(co.m, u), opt_field(co.m, xi));
        py::dict d;
        d["y"] = res.y.values();
        d["iterations"] = res.report.iterations;
        d["converged"] = res.report.converged;
        d["residual_history"] = res.report.residual_history;
        return d;
      },
      py::arg("coefficients"), py::arg("u"), py::arg("xi") = py::none(),
      "Damped-Newton solve of the state equation with control u (plus an "
      "optional extra load xi).");

  mod.def(
      "make_problem",
      [](const PyMesh& mesh, const PyCoeffs& co, const Eigen::VectorXd& y_d,
         const Eigen::VectorXd& g, double u_a, double u_b) {
        return PyProblem{make_problem(mesh.m, co.co, to_field(mesh.m, y_d),
                                      to_field(mesh.m, g), u_a, u_b)};
      },
      py::arg("mesh"), py::arg("coefficients"), py::arg("y_d"), py::arg("g"),
      py::arg("u_a"), py::arg("u_b"));

  mod.def(
      "evaluate_J",
      [](const PyProblem& p, const Eigen::VectorXd& u, double tikhonov_eps) {
        Perturbation pert;
        pert.tikhonov_eps = tikhonov_eps;
        return evaluate_J(p.prob, to_field(p.prob.mesh, u), pert);
      },
      py::arg("problem"), py::arg("u"), py::arg("tikhonov_eps") = 0.0);

  mod.def(
      "evaluate_gradient",
      [](const PyProblem& p, const Eigen::VectorXd& u, double tikhonov_eps) {
        Perturbation pert;
        pert.tikhonov_eps = tikhonov_eps;
        auto pack = evaluate_gradient(p.prob, to_field(p.prob.mesh, u), pert);
        py::dict d;
        d["y"] = pack.y.values();
        d["phi"] = pack.phi.values();
        d["gradient_density"] = pack.gradient_density.values();
        d["J"] = pack.J_value;
        return d;
      },
      py::arg("problem"), py::arg("u"), py::arg("tikhonov_eps") = 0.0,
      "State, adjoint and gradient density in one pass; dJ(u) v equals the "
      "L2 pairing of gradient_density with v.");

  mod.def(
      "solve_control",
      [](const PyProblem& p, const std::optional<Eigen::VectorXd>& xi,
         const std::optional<Eigen::VectorXd>& eta,
         const std::optional<Eigen::VectorXd>& g_delta, double tikhonov_eps,
         int max_iters, double stationarity_tol, int restart_count,
         std::uint64_t rng_seed, const std::optional<Eigen::VectorXd>& u_init) {
        const auto pert = build_pert(p.prob, xi, eta, g_delta, tikhonov_eps);
        const auto cfg =
            build_cfg(max_iters, stationarity_tol, restart_count, rng_seed);
        return optimize_dict(solve_control_problem(
            p.prob, pert, cfg, opt_field(p.prob.mesh, u_init)));
      },
      py::arg("problem"), py::arg("xi") = py::none(),
      py::arg("eta") = py::none(), py::arg("g_delta") = py::none(),
      py::arg("tikhonov_eps") = 0.0, py::arg("max_iters") = 5000,
      py::arg("stationarity_tol") = 1e-8, py::arg("restart_count") = 5,
      py::arg("rng_seed") = 0, py::arg("u_init") = py::none(),
      "Projected-gradient solve of the (possibly perturbed) control problem; "
      "raises SolverError when no restart converges.");

  mod.def(
      "stability_sweep",
      [](const PyProblem& p, const std::optional<Eigen::VectorXd>& xi_shape,
         const std::optional<Eigen::VectorXd>& eta_shape,
         const std::optional<Eigen::VectorXd>& g_shape, bool tikhonov,
         const std::optional<std::vector<double>>& eps_grid, bool warm_start,
         int max_iters, double stationarity_tol, int restart_count,
         std::uint64_t rng_seed, std::optional<double> fit_floor) {
        auto family = make_family(p.prob.mesh);
        if (xi_shape) {
          family.xi_shape = normalize(to_field(p.prob.mesh, *xi_shape), NormKind::L2);
          family.scale_xi = true;
        }
        if (eta_shape) {
          family.eta_shape = normalize(to_field(p.prob.mesh, *eta_shape), NormKind::L2);
          family.scale_eta = true;
        }
        if (g_shape) {
          family.g_shape = normalize(to_field(p.prob.mesh, *g_shape), NormKind::Linf);
          family.scale_g = true;
        }
        family.tikhonov = tikhonov;
        if (eps_grid) family.eps_grid = *eps_grid;
        const auto cfg =
            build_cfg(max_iters, stationarity_tol, restart_count, rng_seed);
        const auto records = run_stability_sweep(p.prob, family, cfg, warm_start);

        py::list rows;
        for (const auto& r : records) {
          py::dict d;
          d["eps"] = r.eps;
          d["magnitude"] = r.magnitude;
          d["dist_y_L2"] = r.dist_y_L2;
          d["dist_u_L1"] = r.dist_u_L1;
          d["J"] = r.J_eps;
          d["converged"] = r.optimizer_converged;
          rows.append(d);
        }
        const double floor =
            fit_floor ? *fit_floor : default_distance_floor(*p.prob.mesh);
        py::dict out;
        out["records"] = rows;
        out["state_L2"] = fit_dict(records, FitMetric::state_L2, floor);
        out["control_L1"] = fit_dict(records, FitMetric::control_L1, floor);
        return out;
      },
      py::arg("problem"), py::arg("xi_shape") = py::none(),
      py::arg("eta_shape") = py::none(), py::arg("g_shape") = py::none(),
      py::arg("tikhonov") = false, py::arg("eps_grid") = py::none(),
      py::arg("warm_start") = true, py::arg("max_iters") = 5000,
      py::arg("stationarity_tol") = 1e-8, py::arg("restart_count") = 5,
      py::arg("rng_seed") = 0, py::arg("fit_floor") = py::none(),
      "Perturbation sweep along a decreasing eps grid. Shapes are normalized "
      "internally; returns the per-eps records plus log-log slope fits (None "
      "when fewer than four points clear the floor).");

  mod.def(
      "norm",
      [](const PyMesh& mesh, const Eigen::VectorXd& v, const std::string& kind) {
        return norm(to_field(mesh.m, v), parse_norm(kind));
      },
      py::arg("mesh"), py::arg("v"), py::arg("kind") = "L2");

  mod.def(
      "inner_l2",
      [](const PyMesh& mesh, const Eigen::VectorXd& v, const Eigen::VectorXd& w) {
        return inner_l2(to_field(mesh.m, v), to_field(mesh.m, w));
      },
      py::arg("mesh"), py::arg("v"), py::arg("w"));

  mod.def(
      "default_eps_grid", [] { return default_eps_grid(); },
      "Twelve geometric points from 1e-1 down to 1e-4.");
}
