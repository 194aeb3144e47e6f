#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pdeopt/cli.hpp"

using namespace pdeopt;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code;
  std::string out;
  std::string err;
};

RunResult run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_command(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("pdeopt_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const fs::path& dir, const std::string& body) {
  const fs::path p = dir / "exp.toml";
  std::ofstream f(p, std::ios::binary);
  f << body;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE_MESSAGE(in.good(), "missing file " << p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

double cell_num(const std::vector<std::string>& cells, std::size_t i) {
  REQUIRE(i < cells.size());
  return std::strtod(cells[i].c_str(), nullptr);
}

// robust box-constrained instance: the optimal control pins to the lower
// bound everywhere, so every subcommand on it runs in milliseconds
std::string base_config(const fs::path& outdir, const std::string& extra = "") {
  std::ostringstream cfg;
  cfg << "output_dir = \"" << outdir.string() << "\"\n"
      << "rng_seed = 7\n"
      << "[mesh]\n"
      << "n = 8\n"
      << "[coefficients]\n"
      << "A = [\"0.25\", \"0\", \"0\", \"0.25\"]\n"
      << "c1 = \"0.3\"\n"
      << "[objective]\n"
      << "y_d = \"0.2*sin(pi*x1)*sin(pi*x2)\"\n"
      << "g = \"2\"\n"
      << "[bounds]\n"
      << "u_a = -1\n"
      << "u_b = 1\n"
      << "[optimizer]\n"
      << "restart_count = 2\n"
      << extra;
  return cfg.str();
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("usage errors exit with code 1 and help exits cleanly") {
  auto r = run({});
  CHECK(r.code == 1);
  CHECK(r.err.find("solve-state") != std::string::npos);

  r = run({"frobnicate", "--config", "x.toml"});
  CHECK(r.code == 1);
  CHECK(!r.err.empty());

  r = run({"--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("sweep-stability") != std::string::npos);

  // missing required --config is a usage error
  r = run({"solve-state"});
  CHECK(r.code == 1);
}

TEST_CASE("config problems exit with code 2 and name the trouble") {
  const auto dir = fresh_dir("cfgerr");
  auto r = run({"solve-state", "--config", (dir / "nope.toml").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("nope.toml") != std::string::npos);

  const auto bad = write_config(dir,
                                "[objective]\ny_d = \"0\"\ng = \"1\"\n"
                                "[bounds]\nu_a = 1\nu_b = 0\n");
  r = run({"solve-state", "--config", bad.string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("bounds") != std::string::npos);
}

TEST_CASE("solve-state writes the nodal state and a newton report") {
  const auto dir = fresh_dir("state");
  const auto cfg = write_config(
      dir, base_config(dir / "out", "[state]\nu = \"sin(pi*x1)*x2\"\n"));
  auto r = run({"solve-state", "--config", cfg.string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("state.csv") != std::string::npos);  // progress line

  const auto rows = lines_of(dir / "out" / "state.csv");
  REQUIRE(rows.size() == 1 + 81);  // header + (8+1)^2 nodes
  CHECK(rows[0] == "node_x1,node_x2,y");
  const auto first = split_csv(rows[1]);
  REQUIRE(first.size() == 3);
  CHECK(cell_num(first, 0) == 0.0);
  CHECK(cell_num(first, 1) == 0.0);
  CHECK(cell_num(first, 2) == 0.0);  // homogeneous boundary node

  const auto rep = lines_of(dir / "out" / "report.csv");
  REQUIRE(rep.size() == 2);
  CHECK(rep[0] == "newton_iters,residual");
  const auto vals = split_csv(rep[1]);
  CHECK(cell_num(vals, 0) >= 1.0);
  CHECK(cell_num(vals, 1) < 1e-8);

  // --quiet silences progress but not the artifacts
  const auto dir2 = fresh_dir("state_quiet");
  const auto cfg2 = write_config(dir2, base_config(dir2 / "out"));
  r = run({"solve-state", "--config", cfg2.string(), "--quiet"});
  CHECK(r.code == 0);
  CHECK(r.out.empty());
  CHECK(fs::exists(dir2 / "out" / "state.csv"));
}

TEST_CASE("solve-control writes control, state, adjoint and a report") {
  const auto dir = fresh_dir("control");
  const auto cfg = write_config(dir, base_config(dir / "out"));
  auto r = run({"solve-control", "--config", cfg.string()});
  CHECK(r.code == 0);

  const auto rows = lines_of(dir / "out" / "control.csv");
  REQUIRE(rows.size() == 1 + 81);
  CHECK(rows[0] == "node_x1,node_x2,u,y,phi");
  // the offset g = 2 dominates the adjoint, so u == u_a at every node
  for (std::size_t i = 1; i < rows.size(); ++i)
    CHECK(cell_num(split_csv(rows[i]), 2) == -1.0);

  const auto rep = lines_of(dir / "out" / "report.csv");
  REQUIRE(rep.size() == 2);
  CHECK(rep[0] == "iterations,residual,converged,J");
  const auto vals = split_csv(rep[1]);
  REQUIRE(vals.size() == 4);
  CHECK(vals[2] == "1");
  CHECK(cell_num(vals, 1) <= 1e-8);
}

TEST_CASE("a run that cannot reach stationarity exits with code 3") {
  const auto dir = fresh_dir("solverfail");
  const auto cfg = write_config(
      dir,
      "output_dir = \"" + (dir / "out").string() + "\"\n" +
          "[mesh]\nn = 8\n"
          "[objective]\ny_d = \"x1*x2\"\ng = \"0.01*x1 - 0.005\"\n"
          "[bounds]\nu_a = -2\nu_b = 2\n"
          "[optimizer]\nmax_iters = 1\nrestart_count = 1\n"
          "stationarity_tol = 1e-14\n");
  auto r = run({"solve-control", "--config", cfg.string()});
  CHECK(r.code == 3);
  CHECK(!r.err.empty());
}

TEST_CASE("verify-derivatives reports a quadratically shrinking gap") {
  // cubic reaction keeps J genuinely nonquadratic, so the finite-difference
  // truncation error is visible instead of sitting at roundoff
  const auto dir = fresh_dir("deriv");
  const auto cfg = write_config(
      dir, base_config(dir / "out", "[coefficients]\nc3 = \"1\"\n"));
  auto r = run({"verify-derivatives", "--config", cfg.string()});
  CHECK(r.code == 0);

  const auto rows = lines_of(dir / "out" / "gradient_check.csv");
  REQUIRE(rows.size() == 1 + 5);
  CHECK(rows[0] == "t,fd_value,adjoint_value,abs_error");
  const auto at_1e2 = split_csv(rows[2]);
  const auto at_1e3 = split_csv(rows[3]);
  CHECK(cell_num(at_1e2, 0) == 1e-2);
  CHECK(cell_num(at_1e3, 0) == 1e-3);
  // adjoint value identical in every row, fd error shrinking
  CHECK(at_1e2[2] == at_1e3[2]);
  CHECK(cell_num(at_1e3, 3) < cell_num(at_1e2, 3));

  // the sampled pair follows the seed
  const auto dir_b = fresh_dir("deriv_b");
  const auto cfg_b = write_config(dir_b, base_config(dir_b / "out"));
  auto r1 = run({"verify-derivatives", "--config", cfg_b.string(), "--seed", "11"});
  const std::string first = slurp(dir_b / "out" / "gradient_check.csv");
  auto r2 = run({"verify-derivatives", "--config", cfg_b.string(), "--seed", "11"});
  CHECK(slurp(dir_b / "out" / "gradient_check.csv") == first);
  auto r3 = run({"verify-derivatives", "--config", cfg_b.string(), "--seed", "12"});
  CHECK(slurp(dir_b / "out" / "gradient_check.csv") != first);
  CHECK((r1.code == 0 && r2.code == 0 && r3.code == 0));
}

TEST_CASE("check-assumptions writes quotient, measure and growth tables") {
  const auto dir = fresh_dir("assume");
  const auto cfg = write_config(
      dir, base_config(dir / "out",
                       "[diagnostics]\nn_samples = 6\n"
                       "measure_eps = [0.5, 1.0, 2.0]\n"));
  auto r = run({"check-assumptions", "--config", cfg.string()});
  CHECK(r.code == 0);

  const auto q = lines_of(dir / "out" / "quotients.csv");
  REQUIRE(q.size() == 3);
  CHECK(q[0] == "mode,min_quotient,quantile_05,samples,alpha");
  const auto qs = split_csv(q[1]);
  const auto qc = split_csv(q[2]);
  CHECK(qs[0] == "state");
  CHECK(qc[0] == "control");
  CHECK(cell_num(qs, 3) >= 1.0);

  const auto m = lines_of(dir / "out" / "measure.csv");
  REQUIRE(m.size() == 1 + 3);
  CHECK(m[0] == "eps,measure,ratio");
  CHECK(cell_num(split_csv(m[1]), 0) == 0.5);

  const auto g = lines_of(dir / "out" / "growth.csv");
  REQUIRE(g.size() >= 1);
  CHECK(g[0] == "kappa,worst_margin,holds,min_kappa_emp,positive_fraction");
  if (g.size() > 1) {
    const auto row = split_csv(g[1]);
    REQUIRE(row.size() == 5);
    CHECK((row[2] == "0" || row[2] == "1"));
  }
}

TEST_CASE("sweep-stability writes the sweep table, slopes and a plot") {
  const auto dir = fresh_dir("sweep");
  const std::string pert =
      "[optimizer]\nrestart_count = 1\nmax_iters = 400\n"
      "[perturbation]\nxi_shape = \"sin(pi*x1)*sin(pi*x2)\"\n"
      "scale_xi = true\n"
      "eps_grid = [2.0, 1.0, 0.5, 0.25]\n";
  std::ostringstream body;
  body << "output_dir = \"" << (dir / "out").string() << "\"\n"
       << "rng_seed = 5\n[mesh]\nn = 16\n"
       << "[coefficients]\nA = [\"0.25\", \"0\", \"0\", \"0.25\"]\n"
       << "c1 = \"0.3\"\n"
       << "[objective]\ny_d = \"0.2*sin(pi*x1)*sin(pi*x2)\"\ng = \"2\"\n"
       << "[bounds]\nu_a = -1\nu_b = 1\n" << pert;
  const auto cfg = write_config(dir, body.str());

  auto r = run({"sweep-stability", "--config", cfg.string()});
  CHECK(r.code == 0);

  const auto rows = lines_of(dir / "out" / "sweep.csv");
  REQUIRE(rows.size() == 1 + 4);
  CHECK(rows[0] == "eps,magnitude,dist_y_L2,dist_u_L1,J_eps,converged");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto cells = split_csv(rows[i]);
    REQUIRE(cells.size() == 6);
    CHECK(cells[5] == "1");
    CHECK(cell_num(cells, 1) ==
          doctest::Approx(cell_num(cells, 0)).epsilon(1e-12));  // xi-only
    CHECK(cell_num(cells, 3) == 0.0);                 // control pinned at u_a
  }

  // control distances are all zero, so only the state fit has enough points
  const auto slopes = lines_of(dir / "out" / "slopes.csv");
  REQUIRE(slopes.size() == 2);
  CHECK(slopes[0] == "metric,slope,r2,n_points");
  const auto srow = split_csv(slopes[1]);
  CHECK(srow[0] == "state_L2");
  CHECK(cell_num(srow, 1) == doctest::Approx(1.0).epsilon(0.05));
  CHECK(cell_num(srow, 2) >= 0.99);
  CHECK(cell_num(srow, 3) == 4.0);
  CHECK(r.err.find("control_L1") != std::string::npos);

  const std::string svg = slurp(dir / "out" / "sweep.svg");
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("state_L2") != std::string::npos);

  // identical config and seed reproduce every artifact byte for byte
  const std::string sweep_bytes = slurp(dir / "out" / "sweep.csv");
  const std::string slope_bytes = slurp(dir / "out" / "slopes.csv");
  auto r2 = run({"sweep-stability", "--config", cfg.string()});
  CHECK(r2.code == 0);
  CHECK(slurp(dir / "out" / "sweep.csv") == sweep_bytes);
  CHECK(slurp(dir / "out" / "slopes.csv") == slope_bytes);
  CHECK(slurp(dir / "out" / "sweep.svg") == svg);
}

TEST_CASE("convergence-study reports second order on the smooth benchmark") {
  const auto dir = fresh_dir("conv");
  const auto cfg = write_config(
      dir, base_config(dir / "out", "[convergence]\nlevels = [4, 8, 16]\n"));
  auto r = run({"convergence-study", "--config", cfg.string()});
  CHECK(r.code == 0);

  const auto rows = lines_of(dir / "out" / "convergence.csv");
  REQUIRE(rows.size() == 1 + 3);
  CHECK(rows[0] == "n,h,error_L2,order");
  const auto r0 = split_csv(rows[1]);
  REQUIRE(r0.size() == 4);
  CHECK(r0[3] == "");  // no order estimate on the coarsest level
  const auto r1 = split_csv(rows[2]);
  const auto r2c = split_csv(rows[3]);
  CHECK(cell_num(r1, 2) < cell_num(r0, 2));
  CHECK(cell_num(r2c, 2) < cell_num(r1, 2));
  CHECK(cell_num(r2c, 3) > 1.5);
  CHECK(cell_num(r2c, 3) < 2.5);
  CHECK(slurp(dir / "out" / "convergence.svg").find("<svg") !=
        std::string::npos);
}

TEST_CASE("output directory resolution prefers flag over env over config") {
  const auto dir = fresh_dir("outdirs");
  const auto cfg = write_config(dir, base_config(dir / "from_config"));

  auto r = run({"solve-state", "--config", cfg.string()});
  CHECK(r.code == 0);
  CHECK(fs::exists(dir / "from_config" / "state.csv"));

  ::setenv("OUTPUT_DIR", (dir / "from_env").string().c_str(), 1);
  r = run({"solve-state", "--config", cfg.string()});
  CHECK(r.code == 0);
  CHECK(fs::exists(dir / "from_env" / "state.csv"));

  r = run({"solve-state", "--config", cfg.string(), "--output",
           (dir / "from_flag").string()});
  CHECK(r.code == 0);
  CHECK(fs::exists(dir / "from_flag" / "state.csv"));
  ::unsetenv("OUTPUT_DIR");
}

TEST_SUITE_END();
