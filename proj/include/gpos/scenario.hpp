#pragma once

// Scenario configuration, execution and serialization.

#include "gpos/verify.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gpos {

// Malformed or inconsistent configuration. `what()` is prefixed with
// "<source>:<line>:" when the offending text can be located.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DensitySpec {
  DensityFamily family = DensityFamily::uniform;
  Vector shift;                              // wick_shift
  Matrix covariance;                         // scaled_gaussian
  Vector mean;                               // scaled_gaussian
  std::vector<GaussianComponent> components; // gaussian_mixture
  // When set, the density is re-expressed pointwise as scale * L and
  // normalized by quadrature (point_expression).
  std::optional<double> scale;
};

struct MeasureSpec {
  std::vector<Atom> atoms;
  int gaussian_degree = 0;  // > 0: gamma_d discretized on this grid
  double gaussian_mass = 1.0;
};

enum class CheckKind {
  proposition,
  identities,
  theorem,
  wasserstein,
  inverse,
  monge_ampere,
  discriminant,
  chaos,
  convexity,
  corollary2,
  corollary1,
};

std::string to_string(CheckKind k);

struct CheckSpec {
  CheckKind kind = CheckKind::theorem;
  std::vector<double> times;        // corollary1
  std::vector<Vector> directions;   // discriminant
  int chaos_degree = kDefaultChaosDegree;
  std::optional<Matrix> kernel;     // convexity; default: second-chaos kernel
  double r = 1.0;                   // convexity
};

enum class MethodChoice { automatic, quantile, gaussian, entropic };

std::string to_string(MethodChoice m);

struct ScenarioConfig {
  std::string case_id;
  int dim = 1;
  std::optional<DensitySpec> density;
  std::optional<MeasureSpec> measure;
  int quadrature_degree = 0;  // 0: adaptive
  MethodChoice method = MethodChoice::automatic;
  SinkhornParams sinkhorn;
  int entropic_degree = 0;    // 0: default for the dimension
  std::vector<CheckSpec> checks;  // sorted into execution order
  Tolerances tolerances;
  std::uint64_t seed = 42;
  std::string report_path;    // empty: caller decides
  std::string source;         // file the config came from, for messages

  bool has_check(CheckKind k) const;
};

// Parses JSON text. Unknown keys and inconsistent combinations throw ConfigError.
ScenarioConfig parse_scenario(const std::string& text, const std::string& source = "<config>");
ScenarioConfig load_scenario(const std::string& path);

// Default per-axis degrees when the configuration leaves them open.
int default_quadrature_degree(int dim);
int default_entropic_degree(int dim);

DensityModel build_density(const ScenarioConfig& cfg, const QuadratureGrid& grid);
PositiveMeasure build_measure(const ScenarioConfig& cfg);
TransportMethod resolve_method(const ScenarioConfig& cfg);

struct CheckRecord {
  std::string name;
  std::string quantity;  // "margin" (pass iff value >= -tol) or "residual" (pass iff value <= tol)
  double value = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  nlohmann::json extra = nlohmann::json::object();
};

CheckRecord margin_record(std::string name, double value, double tolerance);
CheckRecord residual_record(std::string name, double value, double tolerance);

struct VerificationReport {
  std::string case_id;
  int dim = 0;
  nlohmann::json subject;      // density or measure descriptor
  std::vector<CheckRecord> checks;
  nlohmann::json tolerances;
  nlohmann::json diagnostics = nlohmann::json::object();
  double runtime_ms = 0.0;

  bool passed() const;
  const CheckRecord* find(const std::string& name) const;
};

// Runs the configured checks in a fixed order. Hard numerical or domain
// errors propagate as exceptions.
VerificationReport run_scenario(const ScenarioConfig& cfg);

nlohmann::json to_json(const VerificationReport& r);
// Structured error report for a scenario that could not be run.
nlohmann::json error_json(const std::string& case_id, const std::string& kind, const std::string& message);

nlohmann::json versions_json();

enum class ExportKind { map, potential, chaos };

ExportKind parse_export_kind(const std::string& s);
// CSV text with a header row. Rows follow node order (lexicographic, last
// axis fastest) or multi-index order.
std::string export_csv(const ScenarioConfig& cfg, ExportKind what);

// Shortest round-trip decimal form.
std::string format_number(double v);

}  // namespace gpos
