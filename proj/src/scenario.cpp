#include "gpos/scenario.hpp"

#include "gpos/linalg.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <chrono>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace gpos {

using nlohmann::json;

namespace {
constexpr int kChaosRefinements = 4;
}  // namespace

std::string to_string(CheckKind k) {
  switch (k) {
    case CheckKind::proposition: return "proposition";
    case CheckKind::identities: return "identities";
    case CheckKind::theorem: return "theorem";
    case CheckKind::wasserstein: return "wasserstein";
    case CheckKind::inverse: return "inverse";
    case CheckKind::monge_ampere: return "monge_ampere";
    case CheckKind::discriminant: return "discriminant";
    case CheckKind::chaos: return "chaos";
    case CheckKind::convexity: return "convexity";
    case CheckKind::corollary2: return "corollary2";
    case CheckKind::corollary1: return "corollary1";
  }
  return "unknown";
}

std::string to_string(MethodChoice m) {
  switch (m) {
    case MethodChoice::automatic: return "auto";
    case MethodChoice::quantile: return "quantile";
    case MethodChoice::gaussian: return "gaussian";
    case MethodChoice::entropic: return "entropic";
  }
  return "unknown";
}

bool ScenarioConfig::has_check(CheckKind k) const {
  return std::any_of(checks.begin(), checks.end(), [k](const CheckSpec& c) { return c.kind == k; });
}

int default_quadrature_degree(int dim) {
  if (dim <= 1) return 80;
  if (dim == 2) return 40;
  return 16;
}

int default_entropic_degree(int dim) {
  if (dim <= 1) return 200;
  if (dim == 2) return 30;
  return 10;
}

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

const std::map<std::string, CheckKind>& check_names() {
  static const std::map<std::string, CheckKind> names = {
      {"proposition", CheckKind::proposition}, {"identities", CheckKind::identities},
      {"theorem", CheckKind::theorem},         {"wasserstein", CheckKind::wasserstein},
      {"inverse", CheckKind::inverse},         {"monge_ampere", CheckKind::monge_ampere},
      {"discriminant", CheckKind::discriminant}, {"chaos", CheckKind::chaos},
      {"convexity", CheckKind::convexity},     {"corollary2", CheckKind::corollary2},
      {"corollary1", CheckKind::corollary1},
  };
  return names;
}

bool is_measure_check(CheckKind k) { return k == CheckKind::corollary1 || k == CheckKind::corollary2; }

class Reader {
 public:
  Reader(const std::string& text, std::string source) : text_(text), source_(std::move(source)) {}

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    const int line = locate(key);
    throw ConfigError(source_ + (line > 0 ? ":" + std::to_string(line) : std::string()) + ": " + msg);
  }

  // Line of the first occurrence of "key" at or after the last located key.
  int locate(const std::string& key) const {
    if (key.empty()) return 0;
    const std::string needle = "\"" + key + "\"";
    auto pos = text_.find(needle, cursor_);
    if (pos == std::string::npos) pos = text_.find(needle);
    if (pos == std::string::npos) return 0;
    return 1 + static_cast<int>(std::count(text_.begin(), text_.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
  }

  void advance(const std::string& key) {
    const auto pos = text_.find("\"" + key + "\"", cursor_);
    if (pos != std::string::npos) cursor_ = pos;
  }

  void only(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) const {
    if (!obj.is_object()) fail(where, where + " must be an object");
    for (const auto& [key, value] : obj.items()) {
      (void)value;
      if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
        fail(key, "unknown key '" + key + "' in " + where);
      }
    }
  }

  double number(const json& v, const std::string& key) const {
    if (!v.is_number()) fail(key, "'" + key + "' must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(key, "'" + key + "' must be finite");
    return x;
  }

  long long integer(const json& v, const std::string& key) const {
    if (!v.is_number_integer()) fail(key, "'" + key + "' must be an integer");
    return v.get<long long>();
  }

  std::string string(const json& v, const std::string& key) const {
    if (!v.is_string()) fail(key, "'" + key + "' must be a string");
    return v.get<std::string>();
  }

  Vector vector(const json& v, const std::string& key, int dim) const {
    if (v.is_number() && dim == 1) return Vector::Constant(1, number(v, key));
    if (!v.is_array()) fail(key, "'" + key + "' must be an array of " + std::to_string(dim) + " numbers");
    if (static_cast<int>(v.size()) != dim) {
      fail(key, "'" + key + "' has length " + std::to_string(v.size()) + ", expected " + std::to_string(dim));
    }
    Vector out(dim);
    for (int i = 0; i < dim; ++i) out[i] = number(v[static_cast<std::size_t>(i)], key);
    return out;
  }

  Matrix matrix(const json& v, const std::string& key, int dim) const {
    if (v.is_number()) return number(v, key) * Matrix::Identity(dim, dim);
    if (!v.is_array() || static_cast<int>(v.size()) != dim) {
      fail(key, "'" + key + "' must be a number or a " + std::to_string(dim) + "x" + std::to_string(dim) + " array");
    }
    Matrix out(dim, dim);
    for (int i = 0; i < dim; ++i) out.row(i) = vector(v[static_cast<std::size_t>(i)], key, dim).transpose();
    return out;
  }

 private:
  const std::string& text_;
  std::string source_;
  std::size_t cursor_ = 0;
};

Matrix parse_covariance(const Reader& rd, const json& obj, int dim, const std::string& where) {
  const bool has_cov = obj.contains("covariance");
  const bool has_var = obj.contains("variance");
  if (has_cov && has_var) rd.fail("variance", where + ": give either 'covariance' or 'variance', not both");
  if (has_var) return rd.vector(obj["variance"], "variance", dim).asDiagonal();
  if (has_cov) return rd.matrix(obj["covariance"], "covariance", dim);
  rd.fail(where, where + ": 'covariance' or 'variance' is required");
}

DensitySpec parse_density(Reader& rd, const json& obj, int dim) {
  rd.advance("density");
  if (!obj.is_object()) rd.fail("density", "'density' must be an object");
  if (!obj.contains("family")) rd.fail("density", "density: 'family' is required");
  const std::string family = rd.string(obj["family"], "family");
  DensitySpec spec;
  if (family == "uniform") {
    rd.only(obj, {"family", "scale"}, "density");
    spec.family = DensityFamily::uniform;
  } else if (family == "wick_shift") {
    rd.only(obj, {"family", "h", "scale"}, "density");
    if (!obj.contains("h")) rd.fail("family", "wick_shift: 'h' is required");
    spec.family = DensityFamily::wick_shift;
    spec.shift = rd.vector(obj["h"], "h", dim);
  } else if (family == "scaled_gaussian") {
    rd.only(obj, {"family", "covariance", "variance", "mean", "scale"}, "density");
    spec.family = DensityFamily::scaled_gaussian;
    spec.covariance = parse_covariance(rd, obj, dim, "scaled_gaussian");
    spec.mean = obj.contains("mean") ? rd.vector(obj["mean"], "mean", dim) : Vector::Zero(dim);
  } else if (family == "gaussian_mixture") {
    rd.only(obj, {"family", "components", "scale"}, "density");
    if (!obj.contains("components") || !obj["components"].is_array() || obj["components"].empty()) {
      rd.fail("components", "gaussian_mixture: 'components' must be a non-empty array");
    }
    spec.family = DensityFamily::gaussian_mixture;
    for (const auto& c : obj["components"]) {
      rd.only(c, {"weight", "mean", "covariance", "variance"}, "mixture component");
      GaussianComponent g;
      g.weight = c.contains("weight") ? rd.number(c["weight"], "weight") : 1.0;
      if (!(g.weight > 0.0)) rd.fail("weight", "mixture weights must be positive");
      g.mean = c.contains("mean") ? rd.vector(c["mean"], "mean", dim) : Vector::Zero(dim);
      g.covariance = parse_covariance(rd, c, dim, "mixture component");
      spec.components.push_back(std::move(g));
    }
  } else {
    rd.fail("family", "unknown density family '" + family + "'");
  }
  if (obj.contains("scale")) {
    spec.scale = rd.number(obj["scale"], "scale");
    if (!(*spec.scale > 0.0)) rd.fail("scale", "'scale' must be positive");
  }
  return spec;
}

MeasureSpec parse_measure(Reader& rd, const json& obj, int dim) {
  rd.advance("measure");
  rd.only(obj, {"atoms", "discretized_gaussian"}, "measure");
  MeasureSpec spec;
  if (obj.contains("atoms") == obj.contains("discretized_gaussian")) {
    rd.fail("measure", "measure: give exactly one of 'atoms' or 'discretized_gaussian'");
  }
  if (obj.contains("atoms")) {
    const json& atoms = obj["atoms"];
    if (!atoms.is_array() || atoms.empty()) rd.fail("atoms", "'atoms' must be a non-empty array");
    for (const auto& a : atoms) {
      rd.only(a, {"location", "weight"}, "atom");
      if (!a.contains("location")) rd.fail("atoms", "atom: 'location' is required");
      Atom atom;
      atom.location = rd.vector(a["location"], "location", dim);
      atom.weight = a.contains("weight") ? rd.number(a["weight"], "weight") : 1.0;
      if (!(atom.weight > 0.0)) rd.fail("weight", "atom weights must be positive");
      spec.atoms.push_back(std::move(atom));
    }
  } else {
    const json& g = obj["discretized_gaussian"];
    rd.only(g, {"degree", "mass"}, "discretized_gaussian");
    spec.gaussian_degree = g.contains("degree") ? static_cast<int>(rd.integer(g["degree"], "degree")) : 20;
    if (spec.gaussian_degree < 1) rd.fail("degree", "discretized_gaussian: 'degree' must be >= 1");
    spec.gaussian_mass = g.contains("mass") ? rd.number(g["mass"], "mass") : 1.0;
    if (!(spec.gaussian_mass > 0.0)) rd.fail("mass", "discretized_gaussian: 'mass' must be positive");
  }
  return spec;
}

std::vector<double> parse_number_list(const Reader& rd, const std::string& text, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double v = 0.0;
    const auto* first = item.data();
    const auto* last = item.data() + item.size();
    while (first < last && *first == ' ') ++first;
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last) rd.fail(key, "cannot parse number '" + item + "' in '" + key + "'");
    out.push_back(v);
  }
  return out;
}

CheckSpec parse_check(const Reader& rd, const json& item, int dim) {
  std::string name;
  json arg;
  bool has_arg = false;
  if (item.is_string()) {
    name = item.get<std::string>();
    if (const auto colon = name.find(':'); colon != std::string::npos) {
      const std::string rest = name.substr(colon + 1);
      name = name.substr(0, colon);
      arg = json::array();
      for (double v : parse_number_list(rd, rest, name)) arg.push_back(v);
      if (name == "chaos" && arg.size() == 1) {
        const double v = arg[0].get<double>();
        if (v == std::floor(v)) {
          arg = static_cast<long long>(v);
        } else {
          arg = v;
        }
      }
      has_arg = true;
    }
  } else if (item.is_object() && item.size() == 1) {
    name = item.begin().key();
    arg = item.begin().value();
    has_arg = true;
  } else {
    rd.fail("checks", "each check must be a name or a single-key object");
  }
  const auto it = check_names().find(name);
  if (it == check_names().end()) rd.fail(name, "unknown check '" + name + "'");
  CheckSpec c;
  c.kind = it->second;
  switch (c.kind) {
    case CheckKind::corollary1:
      c.times = {1.0, 0.5, 0.25, 0.1};
      if (has_arg) {
        if (!arg.is_array() || arg.empty()) rd.fail(name, "corollary1 expects a non-empty list of t values");
        c.times.clear();
        for (const auto& t : arg) {
          const double v = rd.number(t, name);
          if (!(v > 0.0)) rd.fail(name, "corollary1: t values must be positive");
          c.times.push_back(v);
        }
      }
      break;
    case CheckKind::discriminant:
      if (!has_arg) rd.fail(name, "discriminant needs a direction h, e.g. {\"discriminant\": [1]}");
      if (arg.is_array() && !arg.empty() && arg[0].is_array()) {
        for (const auto& h : arg) c.directions.push_back(rd.vector(h, name, dim));
      } else {
        c.directions.push_back(rd.vector(arg, name, dim));
      }
      for (const auto& h : c.directions) {
        if (!(h.norm() > 0.0)) rd.fail(name, "discriminant: |h| must be positive");
      }
      break;
    case CheckKind::chaos:
      if (has_arg) {
        c.chaos_degree = static_cast<int>(rd.integer(arg, name));
        if (c.chaos_degree < 0 || c.chaos_degree > 40) rd.fail(name, "chaos: degree must be in [0, 40]");
      }
      break;
    case CheckKind::convexity:
      if (has_arg) {
        rd.only(arg, {"kernel", "r"}, "convexity");
        if (arg.contains("kernel")) c.kernel = rd.matrix(arg["kernel"], "kernel", dim);
        if (arg.contains("r")) c.r = rd.number(arg["r"], "r");
      }
      break;
    default:
      if (has_arg) rd.fail(name, "check '" + name + "' takes no argument");
  }
  return c;
}

void parse_sinkhorn(const Reader& rd, const json& obj, ScenarioConfig& cfg) {
  rd.only(obj,
          {"epsilon_start", "epsilon_final", "epsilon_ratio", "max_iterations", "marginal_tol", "relaxation",
           "support_floor", "source", "source_samples", "target_samples", "grid_degree", "target_degree",
           "target_atoms"},
          "sinkhorn");
  SinkhornParams& p = cfg.sinkhorn;
  if (obj.contains("epsilon_start")) p.epsilon_start = rd.number(obj["epsilon_start"], "epsilon_start");
  if (obj.contains("epsilon_final")) p.epsilon_final = rd.number(obj["epsilon_final"], "epsilon_final");
  if (obj.contains("epsilon_ratio")) p.epsilon_ratio = rd.number(obj["epsilon_ratio"], "epsilon_ratio");
  if (obj.contains("max_iterations")) p.max_iterations = static_cast<int>(rd.integer(obj["max_iterations"], "max_iterations"));
  if (obj.contains("marginal_tol")) p.marginal_tol = rd.number(obj["marginal_tol"], "marginal_tol");
  if (obj.contains("relaxation")) p.relaxation = rd.number(obj["relaxation"], "relaxation");
  if (obj.contains("support_floor")) p.support_floor = rd.number(obj["support_floor"], "support_floor");
  if (obj.contains("source")) {
    const std::string s = rd.string(obj["source"], "source");
    if (s == "quadrature") {
      p.source = SampleSource::quadrature;
    } else if (s == "monte_carlo") {
      p.source = SampleSource::monte_carlo;
    } else {
      rd.fail("source", "sinkhorn.source must be 'quadrature' or 'monte_carlo'");
    }
  }
  auto count = [&](const char* key) {
    const long long n = rd.integer(obj[key], key);
    if (n < 1) rd.fail(key, std::string(key) + " must be positive");
    return n;
  };
  if (obj.contains("source_samples")) p.source_samples = static_cast<std::size_t>(count("source_samples"));
  if (obj.contains("target_samples")) p.target_samples = static_cast<std::size_t>(count("target_samples"));
  if (obj.contains("grid_degree")) cfg.entropic_degree = static_cast<int>(count("grid_degree"));
  if (obj.contains("target_degree")) p.target_degree = static_cast<int>(count("target_degree"));
  if (obj.contains("target_atoms")) {
    const std::string s = rd.string(obj["target_atoms"], "target_atoms");
    if (s == "pushforward") {
      p.target_atoms = TargetAtoms::pushforward;
    } else if (s == "reweighted") {
      p.target_atoms = TargetAtoms::reweighted;
    } else {
      rd.fail("target_atoms", "sinkhorn.target_atoms must be 'pushforward' or 'reweighted'");
    }
  }
  try {
    p.validate();
  } catch (const DomainError& e) {
    rd.fail("sinkhorn", e.what());
  }
}

bool single_gaussian(const DensitySpec& d) {
  return !d.scale && (d.family == DensityFamily::uniform || d.family == DensityFamily::wick_shift ||
                      d.family == DensityFamily::scaled_gaussian);
}

}  // namespace

ScenarioConfig parse_scenario(const std::string& text, const std::string& source) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto byte = std::min<std::size_t>(e.byte, text.size());
    const auto upto = text.begin() + static_cast<std::ptrdiff_t>(byte);
    const int line = 1 + static_cast<int>(std::count(text.begin(), upto, '\n'));
    const auto nl = text.rfind('\n', byte == 0 ? 0 : byte - 1);
    const auto col = nl == std::string::npos ? byte : byte - nl - 1;
    throw ConfigError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": malformed JSON (" +
                      e.what() + ")");
  }
  Reader rd(text, source);
  rd.only(root,
          {"case_id", "dim", "density", "measure", "quadrature", "method", "sinkhorn", "checks", "tolerances", "seed",
           "output"},
          "scenario");
  ScenarioConfig cfg;
  cfg.source = source;
  if (!root.contains("case_id")) rd.fail("", "'case_id' is required");
  cfg.case_id = rd.string(root["case_id"], "case_id");
  if (cfg.case_id.empty()) rd.fail("case_id", "'case_id' must not be empty");
  if (!root.contains("dim")) rd.fail("", "'dim' is required");
  const long long dim = rd.integer(root["dim"], "dim");
  if (dim < 1 || dim > 6) rd.fail("dim", "'dim' must be in [1, 6]");
  cfg.dim = static_cast<int>(dim);

  if (root.contains("density") == root.contains("measure")) {
    rd.fail(root.contains("density") ? "measure" : "", "give exactly one of 'density' or 'measure'");
  }
  if (root.contains("density")) cfg.density = parse_density(rd, root["density"], cfg.dim);
  if (root.contains("measure")) cfg.measure = parse_measure(rd, root["measure"], cfg.dim);

  cfg.quadrature_degree = default_quadrature_degree(cfg.dim);
  if (root.contains("quadrature")) {
    const json& q = root["quadrature"];
    if (q.is_string() && q.get<std::string>() == "adaptive") {
      cfg.quadrature_degree = 0;
    } else {
      const long long deg = rd.integer(q, "quadrature");
      if (deg < 2) rd.fail("quadrature", "'quadrature' must be \"adaptive\" or an integer >= 2");
      cfg.quadrature_degree = static_cast<int>(deg);
    }
  }

  if (root.contains("method")) {
    const std::string m = rd.string(root["method"], "method");
    if (m == "auto") {
      cfg.method = MethodChoice::automatic;
    } else if (m == "quantile") {
      cfg.method = MethodChoice::quantile;
    } else if (m == "gaussian") {
      cfg.method = MethodChoice::gaussian;
    } else if (m == "entropic") {
      cfg.method = MethodChoice::entropic;
    } else {
      rd.fail("method", "'method' must be one of quantile, gaussian, entropic, auto");
    }
  }
  if (cfg.method == MethodChoice::quantile && cfg.dim != 1) rd.fail("method", "method 'quantile' requires dim = 1");
  if (cfg.method == MethodChoice::gaussian && cfg.density && !single_gaussian(*cfg.density)) {
    rd.fail("method", "method 'gaussian' requires a uniform, wick_shift or scaled_gaussian density");
  }

  if (root.contains("sinkhorn")) parse_sinkhorn(rd, root["sinkhorn"], cfg);

  if (root.contains("seed")) {
    const long long seed = rd.integer(root["seed"], "seed");
    if (seed < 0) rd.fail("seed", "'seed' must be non-negative");
    cfg.seed = static_cast<std::uint64_t>(seed);
  }

  if (root.contains("tolerances")) {
    const json& t = root["tolerances"];
    if (!t.is_object()) rd.fail("tolerances", "'tolerances' must be an object");
    for (const auto& [key, value] : t.items()) {
      double* slot = cfg.tolerances.find(key);
      if (!slot) rd.fail(key, "unknown tolerance '" + key + "'");
      *slot = rd.number(value, key);
      if (!(*slot >= 0.0)) rd.fail(key, "tolerance '" + key + "' must be non-negative");
    }
  }

  if (root.contains("output")) {
    rd.only(root["output"], {"report"}, "output");
    if (root["output"].contains("report")) cfg.report_path = rd.string(root["output"]["report"], "report");
  }

  rd.advance("checks");
  if (!root.contains("checks") || !root["checks"].is_array() || root["checks"].empty()) {
    rd.fail("checks", "'checks' must be a non-empty array");
  }
  std::set<CheckKind> seen;
  for (const auto& item : root["checks"]) {
    CheckSpec c = parse_check(rd, item, cfg.dim);
    const std::string name = to_string(c.kind);
    if (!seen.insert(c.kind).second) rd.fail(name, "check '" + name + "' listed twice");
    if (cfg.measure && !is_measure_check(c.kind)) {
      rd.fail(name, "check '" + name + "' needs a density spec; this scenario has a measure");
    }
    if (cfg.density && is_measure_check(c.kind)) {
      rd.fail(name, "check '" + name + "' needs a measure spec; this scenario has a density");
    }
    cfg.checks.push_back(std::move(c));
  }
  std::stable_sort(cfg.checks.begin(), cfg.checks.end(),
                   [](const CheckSpec& a, const CheckSpec& b) { return a.kind < b.kind; });
  return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path);
}

// ---------------------------------------------------------------------------
// Building blocks

DensityModel build_density(const ScenarioConfig& cfg, const QuadratureGrid& grid) {
  if (!cfg.density) throw ConfigError(cfg.source + ": scenario has no density");
  const DensitySpec& s = *cfg.density;
  DensityModel base = DensityModel::uniform(cfg.dim);
  switch (s.family) {
    case DensityFamily::uniform: break;
    case DensityFamily::wick_shift: base = DensityModel::wick_shift(s.shift); break;
    case DensityFamily::scaled_gaussian: base = DensityModel::scaled_gaussian(s.covariance, s.mean); break;
    case DensityFamily::gaussian_mixture: base = DensityModel::gaussian_mixture(s.components); break;
    case DensityFamily::point_expression: throw ConfigError(cfg.source + ": point_expression is not configurable");
  }
  if (s.scale) return base.scaled(*s.scale, grid);
  return base;
}

PositiveMeasure build_measure(const ScenarioConfig& cfg) {
  if (!cfg.measure) throw ConfigError(cfg.source + ": scenario has no measure");
  const MeasureSpec& m = *cfg.measure;
  if (m.gaussian_degree > 0) {
    return PositiveMeasure::discretized_gaussian(build_grid(cfg.dim, m.gaussian_degree), m.gaussian_mass);
  }
  return PositiveMeasure::from_atoms(m.atoms);
}

TransportMethod resolve_method(const ScenarioConfig& cfg) {
  switch (cfg.method) {
    case MethodChoice::quantile: return TransportMethod::quantile_1d;
    case MethodChoice::gaussian: return TransportMethod::gaussian_linear;
    case MethodChoice::entropic: return TransportMethod::entropic;
    case MethodChoice::automatic: break;
  }
  if (cfg.dim == 1) return TransportMethod::quantile_1d;
  if (cfg.density && single_gaussian(*cfg.density)) return TransportMethod::gaussian_linear;
  return TransportMethod::entropic;
}

CheckRecord margin_record(std::string name, double value, double tolerance) {
  CheckRecord r;
  r.name = std::move(name);
  r.quantity = "margin";
  r.value = value;
  r.tolerance = tolerance;
  r.pass = value >= -tolerance;
  return r;
}

CheckRecord residual_record(std::string name, double value, double tolerance) {
  CheckRecord r;
  r.name = std::move(name);
  r.quantity = "residual";
  r.value = value;
  r.tolerance = tolerance;
  r.pass = value <= tolerance;
  return r;
}

bool VerificationReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckRecord& c) { return c.pass; });
}

const CheckRecord* VerificationReport::find(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

// ---------------------------------------------------------------------------
// Execution

namespace {

json to_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json to_json(const Matrix& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(to_json(Vector(m.row(i).transpose())));
  return a;
}

json density_json(const ScenarioConfig& cfg, const DensityModel& density) {
  const DensitySpec& s = *cfg.density;
  json j;
  j["family"] = to_string(s.family);
  switch (s.family) {
    case DensityFamily::wick_shift: j["h"] = to_json(s.shift); break;
    case DensityFamily::scaled_gaussian:
      j["covariance"] = to_json(s.covariance);
      j["mean"] = to_json(s.mean);
      break;
    case DensityFamily::gaussian_mixture: {
      json comps = json::array();
      for (const auto& c : s.components) {
        comps.push_back({{"weight", c.weight}, {"mean", to_json(c.mean)}, {"covariance", to_json(c.covariance)}});
      }
      j["components"] = comps;
      break;
    }
    default: break;
  }
  if (s.scale) {
    j["scale"] = *s.scale;
    j["evaluated_as"] = to_string(density.family());
    j["raw_mass"] = density.raw_mass();
  }
  j["certifies_l2"] = density.certifies_l2();
  j["certifies_entropy"] = density.certifies_entropy();
  return j;
}

json measure_json(const PositiveMeasure& m, const MeasureSpec& spec) {
  json j;
  j["atoms"] = m.atoms().size();
  j["mass"] = m.total_mass();
  if (spec.gaussian_degree > 0) {
    j["kind"] = "discretized_gaussian";
    j["degree"] = spec.gaussian_degree;
  } else {
    j["kind"] = "atoms";
    json atoms = json::array();
    for (const auto& a : m.atoms()) atoms.push_back({{"location", to_json(a.location)}, {"weight", a.weight}});
    j["locations"] = atoms;
  }
  return j;
}

json moments_json(const ChaosMoments& m) {
  return {{"mass", m.mass},
          {"m1", to_json(m.m1)},
          {"m2", to_json(m.m2)},
          {"provenance", to_string(m.provenance)},
          {"route_gap", m.route_gap},
          {"converged", m.converged},
          {"grid_degree", m.grid_degree}};
}

json solver_json(const TransportSolution& sol) {
  const auto& d = sol.diagnostics;
  json j = {{"method", to_string(sol.method)},
            {"converged", d.converged},
            {"pushforward_error", d.pushforward_error},
            {"wasserstein_sq", sol.wasserstein_sq},
            {"mean_hessian", to_json(sol.mean_hessian)}};
  if (sol.method == TransportMethod::entropic) {
    j["iterations"] = d.iterations;
    j["stages"] = d.stages;
    j["marginal_error"] = d.marginal_error;
    j["absorptions"] = d.absorptions;
    j["fallbacks"] = d.fallbacks;
    j["relaxation_resets"] = d.relaxation_resets;
    j["source_atoms"] = d.source_atoms;
    j["target_atoms"] = d.target_atoms;
    if (sol.epsilon_final) j["epsilon_final"] = *sol.epsilon_final;
  }
  if (!d.note.empty()) j["note"] = d.note;
  return j;
}

std::string indexed(const std::string& base, std::size_t k, std::size_t n) {
  return n == 1 ? base : base + "[" + std::to_string(k) + "]";
}

// Stroock prediction of c_alpha for |alpha| <= 2 from the moments.
double predicted_coefficient(const MultiIndex& a, const ChaosMoments& m) {
  std::vector<int> axes;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (int k = 0; k < a[i]; ++k) axes.push_back(static_cast<int>(i));
  if (axes.empty()) return m.mass;
  if (axes.size() == 1) return m.m1[axes[0]];
  const double v = m.m2(axes[0], axes[1]);
  return axes[0] == axes[1] ? 0.5 * v : v;
}

QuadratureGrid scenario_grid(const ScenarioConfig& cfg, json& diag) {
  int degree = cfg.quadrature_degree;
  if (degree == 0) {
    const QuadratureGrid probe = build_grid(cfg.dim, default_quadrature_degree(cfg.dim));
    const ChaosMoments am = adaptive_moments(build_density(cfg, probe));
    degree = am.grid_degree;
    diag["adaptive"] = {{"degree", am.grid_degree}, {"converged", am.converged}};
  }
  return build_grid(cfg.dim, degree);
}

void run_measure_checks(const ScenarioConfig& cfg, VerificationReport& r) {
  const PositiveMeasure m = build_measure(cfg);
  r.subject = measure_json(m, *cfg.measure);
  const Tolerances& tol = cfg.tolerances;
  for (const CheckSpec& c : cfg.checks) {
    if (c.kind == CheckKind::corollary2) {
      const MomentFunctionals mf = moment_functionals(m);
      const MeasureMargins mm = measure_corollary_margin(mf);
      CheckRecord rec = margin_record("corollary2", mm.margin, tol.margin);
      rec.extra["mass"] = mf.mass;
      rec.extra["m1"] = to_json(mf.m1);
      rec.extra["m2"] = to_json(mf.m2);
      r.checks.push_back(std::move(rec));
      CheckRecord conv = margin_record("corollary2_convexity", mm.convexity_margin, tol.convexity);
      conv.extra["r"] = 1.0;
      r.checks.push_back(std::move(conv));
    } else if (c.kind == CheckKind::corollary1) {
      const int degree = cfg.quadrature_degree > 0 ? cfg.quadrature_degree : default_quadrature_degree(cfg.dim);
      const QuadratureGrid grid = build_grid(cfg.dim, degree);
      const int edeg = cfg.entropic_degree > 0 ? cfg.entropic_degree : default_entropic_degree(cfg.dim);
      const QuadratureGrid egrid = build_grid(cfg.dim, edeg);
      SinkhornParams p = cfg.sinkhorn;
      p.seed = cfg.seed;
      const std::vector<TrendPoint> trend = measure_transport_margin(m, c.times, grid, p, &egrid);
      double worst = std::numeric_limits<double>::infinity();
      json pts = json::array();
      bool all_converged = true;
      for (const auto& tp : trend) {
        worst = std::min(worst, tp.margin);
        all_converged = all_converged && tp.converged;
        pts.push_back({{"t", tp.t}, {"margin", tp.margin}, {"method", to_string(tp.method)}, {"converged", tp.converged}});
      }
      CheckRecord rec = margin_record("corollary1", worst, tol.trend);
      rec.extra["trend"] = pts;
      rec.extra["solver_converged"] = all_converged;
      r.checks.push_back(std::move(rec));
    }
  }
}

bool needs_transport(const ScenarioConfig& cfg) {
  for (CheckKind k : {CheckKind::identities, CheckKind::theorem, CheckKind::wasserstein, CheckKind::inverse,
                      CheckKind::monge_ampere}) {
    if (cfg.has_check(k)) return true;
  }
  return false;
}

void run_density_checks(const ScenarioConfig& cfg, VerificationReport& r) {
  const QuadratureGrid grid = scenario_grid(cfg, r.diagnostics);
  const DensityModel density = build_density(cfg, grid);
  r.subject = density_json(cfg, density);
  r.diagnostics["quadrature"] = {{"degree", grid.degree}, {"nodes", grid.size()}};
  density.validate_on(grid);
  const ChaosMoments mo = stroock_moments(density, grid);
  r.diagnostics["moments"] = moments_json(mo);
  const Tolerances& tol = cfg.tolerances;

  std::optional<TransportSolution> sol;
  std::optional<QuadratureGrid> support;
  if (needs_transport(cfg)) {
    const TransportMethod method = resolve_method(cfg);
    switch (method) {
      case TransportMethod::quantile_1d: sol = solve_quantile_1d(density, grid); break;
      case TransportMethod::gaussian_linear: sol = solve_gaussian_linear(density); break;
      case TransportMethod::entropic: {
        const int edeg = cfg.entropic_degree > 0 ? cfg.entropic_degree : default_entropic_degree(cfg.dim);
        SinkhornParams p = cfg.sinkhorn;
        p.seed = cfg.seed;
        sol = solve_entropic(density, build_grid(cfg.dim, edeg), p);
        r.diagnostics["entropic_grid_degree"] = edeg;
        break;
      }
    }
    support = sol->source_support;
    r.diagnostics["transport"] = solver_json(*sol);
    if (support) r.diagnostics["transport"]["support_nodes"] = support->size();
  }
  // Transport-side expectations run on the grid the solver integrated on.
  const QuadratureGrid& tgrid = support ? *support : grid;

  for (const CheckSpec& c : cfg.checks) {
    switch (c.kind) {
      case CheckKind::proposition: {
        CheckRecord rec = margin_record("proposition", proposition_margin(mo), tol.margin);
        const int d = mo.dim();
        rec.extra["lhs"] = to_json(Matrix(linalg::symmetrize(
            Matrix::Identity(d, d) + mo.m2 / mo.mass - mo.m1 * mo.m1.transpose() / (mo.mass * mo.mass))));
        rec.extra["rhs"] = to_json(Matrix(Matrix::Zero(d, d)));
        r.checks.push_back(std::move(rec));
        break;
      }
      case CheckKind::identities: {
        const double t = tol.identity_for(sol->method);
        r.checks.push_back(residual_record("first_order_identity", first_order_identity(mo, *sol, tgrid), t));
        r.checks.push_back(residual_record("second_order_identity", second_order_identity(mo, *sol, tgrid), t));
        break;
      }
      case CheckKind::theorem: {
        const OperatorSides s = theorem_sides(mo, *sol);
        CheckRecord rec = margin_record("theorem", s.margin, tol.margin_for(sol->method));
        rec.extra["lhs"] = to_json(s.lhs);
        rec.extra["rhs"] = to_json(s.rhs);
        r.checks.push_back(std::move(rec));
        if (sol->method == TransportMethod::entropic && sol->dim >= 2) {
          r.diagnostics["stein_symmetry_defect"] = linalg::symmetry_defect(stein_hessian_raw(*sol, tgrid));
        }
        break;
      }
      case CheckKind::wasserstein: {
        const double w = wasserstein_sq(*sol, tgrid);
        CheckRecord rec =
            residual_record("wasserstein", std::abs(w - sol->wasserstein_sq), tol.wasserstein_for(sol->method));
        rec.extra["solver"] = sol->wasserstein_sq;
        rec.extra["quadrature"] = w;
        r.checks.push_back(std::move(rec));
        break;
      }
      case CheckKind::inverse: {
        const InverseMap inv = inverse_map(*sol, tgrid);
        r.checks.push_back(residual_record("inverse", inv.roundtrip_error, tol.inverse_for(sol->method)));
        break;
      }
      case CheckKind::monge_ampere: {
        const MongeAmpereResult ma = monge_ampere_residual(density, *sol, tgrid);
        if (is_closed_form(sol->method)) {
          CheckRecord rec = residual_record("monge_ampere", ma.residual, tol.monge_ampere);
          rec.extra["interior_nodes"] = ma.nodes;
          rec.extra["argmax"] = to_json(ma.argmax);
          r.checks.push_back(std::move(rec));
        } else {
          r.diagnostics["monge_ampere"] = {{"residual", ma.residual},
                                           {"tolerance", tol.entropic_monge_ampere},
                                           {"within_tolerance", ma.residual <= tol.entropic_monge_ampere},
                                           {"interior_nodes", ma.nodes},
                                           {"diagnostic_only", true}};
        }
        break;
      }
      case CheckKind::discriminant: {
        const std::size_t n = c.directions.size();
        for (std::size_t k = 0; k < n; ++k) {
          const DiscriminantResult dr = discriminant_check(density, mo, c.directions[k], grid);
          CheckRecord slack = margin_record(indexed("discriminant", k, n), dr.slack, tol.discriminant_slack);
          slack.extra["h"] = to_json(c.directions[k]);
          slack.extra["l0"] = dr.value;
          slack.extra["l1"] = dr.first;
          slack.extra["l2"] = dr.second;
          r.checks.push_back(std::move(slack));
          CheckRecord routes =
              residual_record(indexed("discriminant_routes", k, n), dr.agreement, tol.discriminant_agreement);
          routes.extra["l1_fd"] = dr.first_fd;
          routes.extra["l2_fd"] = dr.second_fd;
          r.checks.push_back(std::move(routes));
        }
        break;
      }
      case CheckKind::chaos: {
        // Refine the grid until the coefficients stop moving; densities with
        // growing L (variance above one) need far more nodes than moments do.
        int degree = std::max(grid.degree, c.chaos_degree + 2);
        ChaosExpansion e = chaos_coefficients(density, degree == grid.degree ? grid : build_grid(cfg.dim, degree),
                                              c.chaos_degree);
        double change = std::numeric_limits<double>::infinity();
        for (int round = 0; round < kChaosRefinements && change > 0.1 * tol.chaos; ++round) {
          const int next = degree + (degree + 1) / 2;
          if (std::pow(static_cast<double>(next), cfg.dim) > static_cast<double>(kDefaultNodeCap)) break;
          ChaosExpansion finer = chaos_coefficients(density, build_grid(cfg.dim, next), c.chaos_degree);
          change = 0.0;
          for (std::size_t i = 0; i < e.terms.size(); ++i) {
            change = std::max(change, std::abs(finer.terms[i].coefficient - e.terms[i].coefficient));
          }
          e = std::move(finer);
          degree = next;
        }
        double worst = 0.0;
        for (const auto& t : e.terms) {
          if (t.alpha.degree() > 2) continue;
          worst = std::max(worst, std::abs(t.coefficient - predicted_coefficient(t.alpha, mo)));
        }
        CheckRecord rec = residual_record("chaos", worst, tol.chaos);
        rec.extra["grid_degree"] = degree;
        rec.extra["refinement_change"] = change;
        rec.extra["max_degree"] = e.max_degree;
        rec.extra["terms"] = e.terms.size();
        rec.extra["parseval_sum"] = e.parseval_sum();
        r.checks.push_back(std::move(rec));
        break;
      }
      case CheckKind::convexity: {
        const Matrix k = c.kernel ? *c.kernel : second_chaos_form(mo).kernel;
        CheckRecord rec = margin_record("convexity", r_convexity(make_quadratic_form(k), c.r), tol.convexity);
        rec.extra["kernel"] = to_json(k);
        rec.extra["r"] = c.r;
        rec.extra["injected_kernel"] = c.kernel.has_value();
        r.checks.push_back(std::move(rec));
        break;
      }
      case CheckKind::corollary1:
      case CheckKind::corollary2: break;
    }
  }
}

}  // namespace

VerificationReport run_scenario(const ScenarioConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  VerificationReport r;
  r.case_id = cfg.case_id;
  r.dim = cfg.dim;
  r.tolerances = json::object();
  for (const auto& [name, value] : cfg.tolerances.entries()) r.tolerances[name] = value;
  r.diagnostics["method"] = cfg.density && needs_transport(cfg) ? to_string(resolve_method(cfg)) : "none";
  r.diagnostics["seed"] = cfg.seed;
  if (cfg.measure) {
    run_measure_checks(cfg, r);
  } else {
    run_density_checks(cfg, r);
  }
  r.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

json versions_json() {
  return {{"gpos", "0.1.0"},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"cxx", __cplusplus}};
}

json to_json(const VerificationReport& r) {
  json j;
  j["case_id"] = r.case_id;
  j["dim"] = r.dim;
  const bool is_measure = r.subject.contains("atoms") && r.subject.contains("kind");
  j["density"] = is_measure ? json(nullptr) : r.subject;
  if (is_measure) j["measure"] = r.subject;
  json checks = json::object();
  for (const auto& c : r.checks) {
    json e = c.extra;
    e[c.quantity] = c.value;
    e["tolerance"] = c.tolerance;
    e["pass"] = c.pass;
    checks[c.name] = e;
  }
  j["checks"] = checks;
  j["passed"] = r.passed();
  j["tolerances"] = r.tolerances;
  j["diagnostics"] = r.diagnostics;
  j["runtime_ms"] = r.runtime_ms;
  j["versions"] = versions_json();
  return j;
}

json error_json(const std::string& case_id, const std::string& kind, const std::string& message) {
  return {{"case_id", case_id}, {"error", {{"kind", kind}, {"message", message}}}, {"versions", versions_json()}};
}

// ---------------------------------------------------------------------------
// Export

ExportKind parse_export_kind(const std::string& s) {
  if (s == "map") return ExportKind::map;
  if (s == "potential") return ExportKind::potential;
  if (s == "chaos") return ExportKind::chaos;
  throw ConfigError("unknown export '" + s + "' (expected map, potential or chaos)");
}

std::string export_csv(const ScenarioConfig& cfg, ExportKind what) {
  if (!cfg.density) throw ConfigError(cfg.source + ": export is unsupported for measure scenarios");
  json scratch;
  const QuadratureGrid grid = scenario_grid(cfg, scratch);
  const DensityModel density = build_density(cfg, grid);
  std::ostringstream out;
  const int d = cfg.dim;

  if (what == ExportKind::chaos) {
    int degree = kDefaultChaosDegree;
    for (const auto& c : cfg.checks)
      if (c.kind == CheckKind::chaos) degree = c.chaos_degree;
    const QuadratureGrid cg = grid.degree >= degree + 2 ? grid : build_grid(d, degree + 2);
    const ChaosExpansion e = chaos_coefficients(density, cg, degree);
    out << "alpha,coefficient\n";
    for (const auto& t : e.terms) out << t.alpha.to_string() << ',' << format_number(t.coefficient) << '\n';
    return out.str();
  }

  TransportSolution sol;
  QuadratureGrid nodes = grid;
  switch (resolve_method(cfg)) {
    case TransportMethod::quantile_1d: sol = solve_quantile_1d(density, grid); break;
    case TransportMethod::gaussian_linear: sol = solve_gaussian_linear(density); break;
    case TransportMethod::entropic: {
      const int edeg = cfg.entropic_degree > 0 ? cfg.entropic_degree : default_entropic_degree(d);
      SinkhornParams p = cfg.sinkhorn;
      p.seed = cfg.seed;
      sol = solve_entropic(density, build_grid(d, edeg), p);
      nodes = *sol.source_support;
      break;
    }
  }
  for (int i = 0; i < d; ++i) out << (i ? "," : "") << "x_" << i + 1;
  if (what == ExportKind::map) {
    for (int i = 0; i < d; ++i) out << ",T_" << i + 1;
  } else {
    out << ",phi";
  }
  out << '\n';
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const Vector x = nodes.node(k);
    for (int i = 0; i < d; ++i) out << (i ? "," : "") << format_number(x[i]);
    if (what == ExportKind::map) {
      const Vector t = sol.apply(x);
      for (int i = 0; i < d; ++i) out << ',' << format_number(t[i]);
    } else {
      out << ',' << format_number(sol.model->potential(x));
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace gpos
