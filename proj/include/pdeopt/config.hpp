#pragma once

// Experiment configuration: a small TOML subset (sections, scalars, strings,
// booleans, flat arrays, comments) parsed into a flat key table, and the
// typed experiment description built from it. All diagnostics carry the
// offending line or field path and surface as ConfigError.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pdeopt/control.hpp"
#include "pdeopt/optimizer.hpp"
#include "pdeopt/stability.hpp"

namespace pdeopt {

struct TomlValue {
  enum class Kind { number, boolean, string, number_array, string_array };
  Kind kind = Kind::number;
  double number = 0.0;
  bool boolean = false;
  std::string string;
  std::vector<double> number_array;
  std::vector<std::string> string_array;
  int line = 0;
};

class TomlTable {
 public:
  bool has(const std::string& key) const;
  double get_number(const std::string& key) const;
  double get_number_or(const std::string& key, double fallback) const;
  int get_int(const std::string& key) const;
  int get_int_or(const std::string& key, int fallback) const;
  std::uint64_t get_u64_or(const std::string& key,
                           std::uint64_t fallback) const;
  bool get_bool(const std::string& key) const;
  bool get_bool_or(const std::string& key, bool fallback) const;
  std::string get_string(const std::string& key) const;
  std::string get_string_or(const std::string& key,
                            const std::string& fallback) const;
  std::vector<double> get_number_array(const std::string& key) const;
  std::vector<double> get_number_array_or(
      const std::string& key, const std::vector<double>& fallback) const;
  std::vector<int> get_int_array_or(const std::string& key,
                                    const std::vector<int>& fallback) const;
  std::vector<std::string> get_string_array(const std::string& key) const;

  void insert(const std::string& key, TomlValue value);  // throws on duplicate
  const std::map<std::string, TomlValue>& entries() const { return values_; }

 private:
  const TomlValue& require(const std::string& key) const;
  std::map<std::string, TomlValue> values_;
};

// Section keys become "section.key"; keys before any section keep their bare
// name. Line numbers are 1-based.
TomlTable parse_toml_string(const std::string& text);
TomlTable parse_toml_file(const std::string& path);

// Fully defaulted experiment description. Expression-valued fields hold the
// source text; they are compile-checked at parse time and evaluated on the
// mesh when the experiment is built.
struct ExperimentConfig {
  int n = 64;
  std::string state_u = "0";  // control used by the plain state solve

  std::string a11 = "1", a12 = "0", a21 = "0", a22 = "1";
  Eigen::Vector2d b{0.0, 0.0};
  std::string c0 = "0", c1 = "0", c3 = "0";

  std::string y_d;  // required
  std::string g;    // required
  double u_a = 0.0;
  double u_b = 0.0;

  OptimizerConfig optimizer;

  std::string xi_shape = "0", eta_shape = "0", g_shape = "0";
  bool scale_xi = false, scale_eta = false, scale_g = false;
  bool tikhonov = false;
  std::vector<double> eps_grid;  // default: twelve geometric points
  bool warm_start = true;

  double alpha = 1.0;
  int n_samples = 40;
  double eps_ball = 0.1;
  std::vector<double> measure_eps;       // default: 1e-3 .. 1e-1 geometric
  std::vector<double> kappa_candidates;  // empty: derived from the quotient

  std::vector<int> levels{16, 32, 64};  // convergence study meshes

  std::string output_dir = "out";
  std::uint64_t rng_seed = 0;
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config(const std::string& path);

// The experiment instantiated on its mesh: problem data, perturbation family
// (shapes normalized), optimizer settings with the top-level seed applied,
// and the control for the plain state solve. Guards the sign assumptions on
// c1 and c3 and wraps any construction failure as ConfigError naming the
// field.
struct BuiltExperiment {
  ProblemData prob;
  PerturbationFamily family;
  OptimizerConfig optimizer;
  bool warm_start = true;
  NodalField state_u;
  ExperimentConfig config;
};

BuiltExperiment build_experiment(const ExperimentConfig& cfg);

}  // namespace pdeopt
