#include "pdeopt/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include "pdeopt/coefficients.hpp"
#include "pdeopt/errors.hpp"
#include "pdeopt/expr.hpp"

namespace pdeopt {

namespace {

[[noreturn]] void fail_line(int line, const std::string& what) {
  std::ostringstream os;
  os << "line " << line << ": " << what;
  throw ConfigError(os.str());
}

std::string trim(const std::string& s) {
  const std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& s) {
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') in_string = !in_string;
    else if (s[i] == '#' && !in_string) return s.substr(0, i);
  }
  return s;
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-')
      return false;
  return true;
}

bool parse_number_text(const std::string& text, double* out) {
  const char* s = text.c_str();
  char* end = nullptr;
  const double v = std::strtod(s, &end);
  if (end == s || *end != '\0') return false;
  *out = v;
  return true;
}

std::vector<std::string> split_elements(const std::string& body, int line) {
  std::vector<std::string> parts;
  std::string cur;
  bool in_string = false;
  for (char c : body) {
    if (c == '"') {
      in_string = !in_string;
      cur += c;
    } else if (c == ',' && !in_string) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (in_string) fail_line(line, "unterminated string in array");
  parts.push_back(cur);
  return parts;
}

std::string parse_string_literal(const std::string& text, int line) {
  if (text.size() < 2 || text.back() != '"' ||
      text.find('"', 1) != text.size() - 1)
    fail_line(line, "unterminated string");
  return text.substr(1, text.size() - 2);
}

TomlValue parse_value(const std::string& raw, int line) {
  TomlValue v;
  v.line = line;
  const std::string text = trim(raw);
  if (text.empty()) fail_line(line, "missing value");

  if (text.front() == '"') {
    v.kind = TomlValue::Kind::string;
    v.string = parse_string_literal(text, line);
    return v;
  }
  if (text.front() == '[') {
    if (text.back() != ']') fail_line(line, "unterminated array");
    const std::string body = trim(text.substr(1, text.size() - 2));
    if (body.empty()) {
      v.kind = TomlValue::Kind::number_array;
      return v;
    }
    bool saw_number = false;
    bool saw_string = false;
    for (const std::string& part : split_elements(body, line)) {
      const std::string elem = trim(part);
      if (elem.empty()) fail_line(line, "empty array element");
      if (elem.front() == '"') {
        saw_string = true;
        v.string_array.push_back(parse_string_literal(elem, line));
      } else {
        double num = 0.0;
        if (!parse_number_text(elem, &num))
          fail_line(line, "cannot parse array element '" + elem + "'");
        saw_number = true;
        v.number_array.push_back(num);
      }
    }
    if (saw_number && saw_string)
      fail_line(line, "mixed array element kinds");
    v.kind = saw_string ? TomlValue::Kind::string_array
                        : TomlValue::Kind::number_array;
    return v;
  }
  if (text == "true" || text == "false") {
    v.kind = TomlValue::Kind::boolean;
    v.boolean = text == "true";
    return v;
  }
  if (!parse_number_text(text, &v.number))
    fail_line(line, "cannot parse value '" + text + "'");
  v.kind = TomlValue::Kind::number;
  return v;
}

const char* kind_name(TomlValue::Kind k) {
  switch (k) {
    case TomlValue::Kind::number: return "number";
    case TomlValue::Kind::boolean: return "boolean";
    case TomlValue::Kind::string: return "string";
    case TomlValue::Kind::number_array: return "number array";
    case TomlValue::Kind::string_array: return "string array";
  }
  return "value";
}

[[noreturn]] void kind_error(const std::string& key, const TomlValue& v,
                             const char* want) {
  std::ostringstream os;
  os << "key '" << key << "': expected a " << want << ", got "
     << kind_name(v.kind) << " (line " << v.line << ")";
  throw ConfigError(os.str());
}

int to_int(const std::string& key, const TomlValue& v, double num) {
  if (num != std::floor(num) || std::abs(num) > 2147483647.0) {
    std::ostringstream os;
    os << "key '" << key << "': expected an integer, got " << num << " (line "
       << v.line << ")";
    throw ConfigError(os.str());
  }
  return static_cast<int>(num);
}

}  // namespace

bool TomlTable::has(const std::string& key) const {
  return values_.count(key) != 0;
}

const TomlValue& TomlTable::require(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end())
    throw ConfigError("missing required key '" + key + "'");
  return it->second;
}

double TomlTable::get_number(const std::string& key) const {
  const TomlValue& v = require(key);
  if (v.kind != TomlValue::Kind::number) kind_error(key, v, "number");
  return v.number;
}

double TomlTable::get_number_or(const std::string& key, double fallback) const {
  return has(key) ? get_number(key) : fallback;
}

int TomlTable::get_int(const std::string& key) const {
  return to_int(key, require(key), get_number(key));
}

int TomlTable::get_int_or(const std::string& key, int fallback) const {
  return has(key) ? get_int(key) : fallback;
}

std::uint64_t TomlTable::get_u64_or(const std::string& key,
                                    std::uint64_t fallback) const {
  if (!has(key)) return fallback;
  const TomlValue& v = require(key);
  const double num = get_number(key);
  if (num != std::floor(num) || num < 0.0 || num > 1.8446744073709552e19) {
    std::ostringstream os;
    os << "key '" << key << "': expected a nonnegative integer seed (line "
       << v.line << ")";
    throw ConfigError(os.str());
  }
  return static_cast<std::uint64_t>(num);
}

bool TomlTable::get_bool(const std::string& key) const {
  const TomlValue& v = require(key);
  if (v.kind != TomlValue::Kind::boolean) kind_error(key, v, "boolean");
  return v.boolean;
}

bool TomlTable::get_bool_or(const std::string& key, bool fallback) const {
  return has(key) ? get_bool(key) : fallback;
}

std::string TomlTable::get_string(const std::string& key) const {
  const TomlValue& v = require(key);
  if (v.kind != TomlValue::Kind::string) kind_error(key, v, "string");
  return v.string;
}

std::string TomlTable::get_string_or(const std::string& key,
                                     const std::string& fallback) const {
  return has(key) ? get_string(key) : fallback;
}

std::vector<double> TomlTable::get_number_array(const std::string& key) const {
  const TomlValue& v = require(key);
  if (v.kind != TomlValue::Kind::number_array)
    kind_error(key, v, "number array");
  return v.number_array;
}

std::vector<double> TomlTable::get_number_array_or(
    const std::string& key, const std::vector<double>& fallback) const {
  return has(key) ? get_number_array(key) : fallback;
}

std::vector<int> TomlTable::get_int_array_or(
    const std::string& key, const std::vector<int>& fallback) const {
  if (!has(key)) return fallback;
  const TomlValue& v = require(key);
  std::vector<int> out;
  for (double num : get_number_array(key)) out.push_back(to_int(key, v, num));
  return out;
}

std::vector<std::string> TomlTable::get_string_array(
    const std::string& key) const {
  const TomlValue& v = require(key);
  if (v.kind != TomlValue::Kind::string_array)
    kind_error(key, v, "string array");
  return v.string_array;
}

void TomlTable::insert(const std::string& key, TomlValue value) {
  if (values_.count(key)) fail_line(value.line, "duplicate key '" + key + "'");
  values_.emplace(key, std::move(value));
}

TomlTable parse_toml_string(const std::string& text) {
  TomlTable table;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(strip_comment(raw));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') fail_line(line, "malformed section header");
      const std::string name = trim(s.substr(1, s.size() - 2));
      if (!valid_key(name))
        fail_line(line, "invalid section name '" + name + "'");
      section = name;
      continue;
    }
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos) fail_line(line, "expected 'key = value'");
    const std::string key = trim(s.substr(0, eq));
    if (!valid_key(key)) fail_line(line, "invalid key '" + key + "'");
    TomlValue value = parse_value(s.substr(eq + 1), line);
    table.insert(section.empty() ? key : section + "." + key,
                 std::move(value));
  }
  return table;
}

TomlTable parse_toml_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_toml_string(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

namespace {

void check_known_keys(const TomlTable& table) {
  static const std::map<std::string, std::set<std::string>> allowed = {
      {"", {"output_dir", "rng_seed"}},
      {"mesh", {"n"}},
      {"state", {"u"}},
      {"coefficients", {"A", "b", "c0", "c1", "c3"}},
      {"objective", {"y_d", "g"}},
      {"bounds", {"u_a", "u_b"}},
      {"optimizer",
       {"max_iters", "armijo_c", "step_init", "step_shrink",
        "stationarity_tol", "restart_count"}},
      {"perturbation",
       {"xi_shape", "eta_shape", "g_shape", "scale_xi", "scale_eta",
        "scale_g", "tikhonov", "eps_grid", "warm_start"}},
      {"diagnostics",
       {"alpha", "n_samples", "eps_ball", "measure_eps", "kappa"}},
      {"convergence", {"levels"}},
  };
  for (const auto& [full, value] : table.entries()) {
    const std::size_t dot = full.find('.');
    const std::string section =
        dot == std::string::npos ? "" : full.substr(0, dot);
    const std::string key =
        dot == std::string::npos ? full : full.substr(dot + 1);
    auto it = allowed.find(section);
    if (it == allowed.end()) {
      std::ostringstream os;
      os << "unknown section '" << section << "' (line " << value.line << ")";
      throw ConfigError(os.str());
    }
    if (!it->second.count(key)) {
      std::ostringstream os;
      os << "unknown key '" << full << "' (line " << value.line << ")";
      throw ConfigError(os.str());
    }
  }
}

void check_expression(const std::string& src, const std::string& field) {
  try {
    compile_expression(src);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(field + ": " + e.what());
  }
}

std::vector<double> default_measure_eps() {
  std::vector<double> grid;
  for (int k = 0; k < 7; ++k) grid.push_back(1e-3 * std::pow(1e2, k / 6.0));
  return grid;
}

void check_decreasing_positive(const std::vector<double>& grid,
                               const std::string& field) {
  if (grid.empty()) throw ConfigError(field + ": must not be empty");
  double prev = std::numeric_limits<double>::infinity();
  for (double e : grid) {
    if (!(e > 0.0)) throw ConfigError(field + ": entries must be positive");
    if (!(e < prev))
      throw ConfigError(field + ": entries must be strictly decreasing");
    prev = e;
  }
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  const TomlTable t = parse_toml_string(text);
  check_known_keys(t);

  ExperimentConfig cfg;
  cfg.n = t.get_int_or("mesh.n", cfg.n);
  if (cfg.n < 2) throw ConfigError("mesh.n: must be at least 2");
  cfg.state_u = t.get_string_or("state.u", cfg.state_u);

  if (t.has("coefficients.A")) {
    const auto a = t.get_string_array("coefficients.A");
    if (a.size() != 4)
      throw ConfigError(
          "coefficients.A: expected 4 expression strings (row major)");
    cfg.a11 = a[0];
    cfg.a12 = a[1];
    cfg.a21 = a[2];
    cfg.a22 = a[3];
  }
  if (t.has("coefficients.b")) {
    const auto b = t.get_number_array("coefficients.b");
    if (b.size() != 2) throw ConfigError("coefficients.b: expected 2 numbers");
    cfg.b = Eigen::Vector2d(b[0], b[1]);
  }
  cfg.c0 = t.get_string_or("coefficients.c0", cfg.c0);
  cfg.c1 = t.get_string_or("coefficients.c1", cfg.c1);
  cfg.c3 = t.get_string_or("coefficients.c3", cfg.c3);

  cfg.y_d = t.get_string("objective.y_d");
  cfg.g = t.get_string("objective.g");
  cfg.u_a = t.get_number("bounds.u_a");
  cfg.u_b = t.get_number("bounds.u_b");
  if (!(cfg.u_a < cfg.u_b))
    throw ConfigError("bounds: u_a must be strictly less than u_b");

  cfg.optimizer.max_iters =
      t.get_int_or("optimizer.max_iters", cfg.optimizer.max_iters);
  cfg.optimizer.armijo_c =
      t.get_number_or("optimizer.armijo_c", cfg.optimizer.armijo_c);
  cfg.optimizer.step_init =
      t.get_number_or("optimizer.step_init", cfg.optimizer.step_init);
  cfg.optimizer.step_shrink =
      t.get_number_or("optimizer.step_shrink", cfg.optimizer.step_shrink);
  cfg.optimizer.stationarity_tol = t.get_number_or(
      "optimizer.stationarity_tol", cfg.optimizer.stationarity_tol);
  cfg.optimizer.restart_count =
      t.get_int_or("optimizer.restart_count", cfg.optimizer.restart_count);

  cfg.xi_shape = t.get_string_or("perturbation.xi_shape", cfg.xi_shape);
  cfg.eta_shape = t.get_string_or("perturbation.eta_shape", cfg.eta_shape);
  cfg.g_shape = t.get_string_or("perturbation.g_shape", cfg.g_shape);
  cfg.scale_xi = t.get_bool_or("perturbation.scale_xi", cfg.scale_xi);
  cfg.scale_eta = t.get_bool_or("perturbation.scale_eta", cfg.scale_eta);
  cfg.scale_g = t.get_bool_or("perturbation.scale_g", cfg.scale_g);
  cfg.tikhonov = t.get_bool_or("perturbation.tikhonov", cfg.tikhonov);
  cfg.eps_grid =
      t.get_number_array_or("perturbation.eps_grid", default_eps_grid());
  check_decreasing_positive(cfg.eps_grid, "perturbation.eps_grid");
  cfg.warm_start = t.get_bool_or("perturbation.warm_start", cfg.warm_start);

  cfg.alpha = t.get_number_or("diagnostics.alpha", cfg.alpha);
  if (!(cfg.alpha > 0.0))
    throw ConfigError("diagnostics.alpha: must be positive");
  cfg.n_samples = t.get_int_or("diagnostics.n_samples", cfg.n_samples);
  if (cfg.n_samples < 1)
    throw ConfigError("diagnostics.n_samples: must be positive");
  cfg.eps_ball = t.get_number_or("diagnostics.eps_ball", cfg.eps_ball);
  if (!(cfg.eps_ball > 0.0))
    throw ConfigError("diagnostics.eps_ball: must be positive");
  cfg.measure_eps =
      t.get_number_array_or("diagnostics.measure_eps", default_measure_eps());
  {
    double prev = 0.0;
    for (double e : cfg.measure_eps) {
      if (!(e > prev))
        throw ConfigError(
            "diagnostics.measure_eps: must be positive and strictly "
            "increasing");
      prev = e;
    }
    if (cfg.measure_eps.empty())
      throw ConfigError("diagnostics.measure_eps: must not be empty");
  }
  cfg.kappa_candidates = t.get_number_array_or("diagnostics.kappa", {});

  cfg.levels = t.get_int_array_or("convergence.levels", cfg.levels);
  {
    int prev = 1;
    for (int n : cfg.levels) {
      if (n < 2 || n <= prev)
        throw ConfigError(
            "convergence.levels: mesh sizes must be at least 2 and strictly "
            "increasing");
      prev = n;
    }
    if (cfg.levels.empty())
      throw ConfigError("convergence.levels: must not be empty");
  }

  cfg.output_dir = t.get_string_or("output_dir", cfg.output_dir);
  cfg.rng_seed = t.get_u64_or("rng_seed", cfg.rng_seed);

  check_expression(cfg.a11, "coefficients.A");
  check_expression(cfg.a12, "coefficients.A");
  check_expression(cfg.a21, "coefficients.A");
  check_expression(cfg.a22, "coefficients.A");
  check_expression(cfg.c0, "coefficients.c0");
  check_expression(cfg.c1, "coefficients.c1");
  check_expression(cfg.c3, "coefficients.c3");
  check_expression(cfg.y_d, "objective.y_d");
  check_expression(cfg.g, "objective.g");
  check_expression(cfg.state_u, "state.u");
  check_expression(cfg.xi_shape, "perturbation.xi_shape");
  check_expression(cfg.eta_shape, "perturbation.eta_shape");
  check_expression(cfg.g_shape, "perturbation.g_shape");
  return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config_text(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

namespace {

NodalField field_from_expr(const MeshPtr& mesh, const std::string& src,
                           const std::string& field) {
  try {
    return interpolate(mesh, compile_expression(src));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(field + ": " + e.what());
  }
}

void check_sign(const NodalField& field, const MeshPtr& mesh,
                const std::string& name) {
  for (int i = 0; i < field.size(); ++i) {
    if (field[i] < 0.0) {
      std::ostringstream os;
      const auto& p = mesh->node(i);
      os << name << ": must be nonnegative so the reaction term stays "
         << "monotone in y; found " << field[i] << " at (" << p.x() << ", "
         << p.y() << ")";
      throw ConfigError(os.str());
    }
  }
}

}  // namespace

BuiltExperiment build_experiment(const ExperimentConfig& cfg) {
  MeshPtr mesh;
  try {
    mesh = build_mesh(cfg.n);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("mesh.n: ") + e.what());
  }

  const auto fa11 = compile_expression(cfg.a11);
  const auto fa12 = compile_expression(cfg.a12);
  const auto fa21 = compile_expression(cfg.a21);
  const auto fa22 = compile_expression(cfg.a22);
  const MatrixFn A = [fa11, fa12, fa21, fa22](double x, double y) {
    Eigen::Matrix2d m;
    m << fa11(x, y), fa12(x, y), fa21(x, y), fa22(x, y);
    return m;
  };
  const VectorFn b = [bv = cfg.b](double, double) { return bv; };

  const NodalField c0 = field_from_expr(mesh, cfg.c0, "coefficients.c0");
  const NodalField c1 = field_from_expr(mesh, cfg.c1, "coefficients.c1");
  const NodalField c3 = field_from_expr(mesh, cfg.c3, "coefficients.c3");
  check_sign(c1, mesh, "coefficients.c1");
  check_sign(c3, mesh, "coefficients.c3");

  CoefficientSet coeffs = [&] {
    try {
      return make_coefficients(mesh, A, b, c0, c1, c3);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("coefficients: ") + e.what());
    }
  }();

  const NodalField y_d = field_from_expr(mesh, cfg.y_d, "objective.y_d");
  const NodalField g = field_from_expr(mesh, cfg.g, "objective.g");
  ProblemData prob = [&] {
    try {
      return make_problem(mesh, coeffs, y_d, g, cfg.u_a, cfg.u_b);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("problem: ") + e.what());
    }
  }();

  PerturbationFamily family = make_family(mesh);
  family.eps_grid = cfg.eps_grid;
  family.scale_xi = cfg.scale_xi;
  family.scale_eta = cfg.scale_eta;
  family.scale_g = cfg.scale_g;
  family.tikhonov = cfg.tikhonov;
  const auto shape_field = [&](const std::string& src, NormKind kind,
                               const std::string& field) {
    try {
      return normalize(field_from_expr(mesh, src, field), kind);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(field + ": " + e.what());
    }
  };
  if (cfg.scale_xi)
    family.xi_shape =
        shape_field(cfg.xi_shape, NormKind::L2, "perturbation.xi_shape");
  if (cfg.scale_eta)
    family.eta_shape =
        shape_field(cfg.eta_shape, NormKind::L2, "perturbation.eta_shape");
  if (cfg.scale_g)
    family.g_shape =
        shape_field(cfg.g_shape, NormKind::Linf, "perturbation.g_shape");
  try {
    validate_family(prob, family);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("perturbation: ") + e.what());
  }

  OptimizerConfig optimizer = cfg.optimizer;
  optimizer.rng_seed = cfg.rng_seed;

  NodalField state_u = field_from_expr(mesh, cfg.state_u, "state.u");

  return BuiltExperiment{std::move(prob),     std::move(family), optimizer,
                         cfg.warm_start,      std::move(state_u), cfg};
}

}  // namespace pdeopt
