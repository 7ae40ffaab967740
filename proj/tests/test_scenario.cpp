#include "gpos/scenario.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>

using namespace gpos;
using nlohmann::json;

namespace {

const std::string kRoot = GPOS_SOURCE_DIR;

std::string strip_runtime(json j) {
  j.erase("runtime_ms");
  return j.dump();
}

// Message of the ConfigError thrown by parsing `text`, or "" if it parses.
std::string config_error(const std::string& text) {
  try {
    parse_scenario(text, "cfg.json");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("parse a full density scenario") {
  const ScenarioConfig cfg = parse_scenario(R"({
    "case_id": "demo",
    "dim": 2,
    "density": {"family": "gaussian_mixture", "components": [
      {"weight": 1, "mean": [0, 1], "variance": [0.5, 1.5]},
      {"weight": 2, "mean": [1, -1], "covariance": [[1, 0.2], [0.2, 1]]}]},
    "quadrature": 30,
    "method": "entropic",
    "sinkhorn": {"epsilon_final": 0.01, "source": "monte_carlo", "source_samples": 300},
    "checks": ["theorem", "proposition", {"discriminant": [1, 0]}, "chaos:6"],
    "tolerances": {"entropic_margin": 0.02},
    "seed": 5,
    "output": {"report": "out/demo.json"}
  })");
  CHECK(cfg.case_id == "demo");
  CHECK(cfg.dim == 2);
  REQUIRE(cfg.density);
  CHECK(cfg.density->components.size() == 2);
  CHECK(cfg.density->components[0].covariance(1, 1) == 1.5);
  CHECK(cfg.quadrature_degree == 30);
  CHECK(cfg.method == MethodChoice::entropic);
  CHECK(cfg.sinkhorn.epsilon_final == 0.01);
  CHECK(cfg.sinkhorn.source == SampleSource::monte_carlo);
  CHECK(cfg.sinkhorn.source_samples == 300);
  CHECK(cfg.tolerances.entropic_margin == 0.02);
  CHECK(cfg.seed == 5);
  CHECK(cfg.report_path == "out/demo.json");
  // execution order, not file order
  REQUIRE(cfg.checks.size() == 4);
  CHECK(cfg.checks[0].kind == CheckKind::proposition);
  CHECK(cfg.checks[1].kind == CheckKind::theorem);
  CHECK(cfg.checks[2].kind == CheckKind::discriminant);
  CHECK(cfg.checks[3].chaos_degree == 6);
}

TEST_CASE("config errors are anchored to a line") {
  const std::string bad_key = "{\n \"case_id\": \"x\",\n \"dim\": 1,\n \"density\": {\"family\": \"uniform\", \"oops\": 1},\n"
                              " \"checks\": [\"theorem\"]\n}";
  const std::string e = config_error(bad_key);
  CHECK(e.find("cfg.json:4:") == 0);
  CHECK(e.find("oops") != std::string::npos);

  const std::string malformed = "{\n \"case_id\": \"x\",\n \"dim\": 1\n \"checks\": []\n}";
  CHECK(config_error(malformed).find("cfg.json:4:") == 0);
}

TEST_CASE("inconsistent configurations are rejected") {
  const std::string head = R"({"case_id": "x", )";
  CHECK_FALSE(config_error(head + R"("dim": 2, "density": {"family": "uniform"}, "method": "quantile", "checks": ["theorem"]})").empty());
  CHECK_FALSE(config_error(head + R"("dim": 1, "density": {"family": "gaussian_mixture", "components": [{"weight": 1, "mean": [0], "variance": [1]}]}, "method": "gaussian", "checks": ["theorem"]})").empty());
  CHECK_FALSE(config_error(head + R"("dim": 1, "measure": {"atoms": [{"location": [0], "weight": 1}]}, "checks": ["theorem"]})").empty());
  CHECK_FALSE(config_error(head + R"("dim": 1, "density": {"family": "uniform"}, "checks": ["corollary2"]})").empty());
  CHECK_FALSE(config_error(head + R"("dim": 1, "density": {"family": "uniform"}, "checks": ["theorem", "theorem"]})").empty());
  CHECK_FALSE(config_error(head + R"("dim": 1, "density": {"family": "uniform"}, "checks": ["frobnicate"]})").empty());
  CHECK_FALSE(config_error(head + R"("dim": 1, "density": {"family": "wick_shift", "h": [1, 2]}, "checks": ["theorem"]})").empty());
  CHECK_FALSE(config_error(head + R"("dim": 1, "density": {"family": "uniform"}, "checks": ["theorem"], "tolerances": {"bogus": 1}})").empty());
  CHECK_FALSE(config_error(head + R"("dim": 1, "density": {"family": "uniform"}, "checks": ["chaos:x"]})").empty());
  CHECK_FALSE(config_error(R"({"dim": 1, "density": {"family": "uniform"}, "checks": ["theorem"]})").empty());
  CHECK_THROWS_AS(load_scenario(kRoot + "/scenarios/no_such_file.json"), ConfigError);
}

TEST_CASE("method resolution") {
  auto cfg = parse_scenario(R"({"case_id": "a", "dim": 1, "density": {"family": "wick_shift", "h": [1]}, "checks": ["theorem"]})");
  CHECK(resolve_method(cfg) == TransportMethod::quantile_1d);
  cfg = parse_scenario(R"({"case_id": "a", "dim": 2, "density": {"family": "wick_shift", "h": [1, 0]}, "checks": ["theorem"]})");
  CHECK(resolve_method(cfg) == TransportMethod::gaussian_linear);
  cfg = parse_scenario(R"({"case_id": "a", "dim": 2, "density": {"family": "gaussian_mixture", "components": [{"weight": 1, "mean": [0, 0], "variance": [2, 2]}]}, "checks": ["theorem"]})");
  CHECK(resolve_method(cfg) == TransportMethod::entropic);
}

TEST_CASE("sigma = 2 scenario report") {
  const ScenarioConfig cfg = load_scenario(kRoot + "/scenarios/closed_form/sigma2_1d.json");
  const VerificationReport r = run_scenario(cfg);
  CHECK(r.passed());
  REQUIRE(r.find("theorem"));
  CHECK(r.find("theorem")->value == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(r.find("wasserstein")->value <= 1e-6);
  CHECK(r.find("proposition")->value == doctest::Approx(4.0).epsilon(1e-10));
  const json j = to_json(r);
  for (const char* key : {"case_id", "dim", "density", "checks", "diagnostics", "runtime_ms", "versions"}) {
    CHECK(j.contains(key));
  }
  const json& theorem = j["checks"]["theorem"];
  CHECK(theorem.contains("margin"));
  CHECK(theorem.contains("tolerance"));
  CHECK(theorem["pass"].get<bool>());
  CHECK(j["checks"]["monge_ampere"].contains("residual"));
}

TEST_CASE("reports are deterministic apart from runtime") {
  for (const char* f : {"/scenarios/closed_form/two_atoms_1d.json", "/scenarios/random_1d/mix_007.json",
                        "/scenarios/entropic_2d/mix_03.json"}) {
    const ScenarioConfig cfg = load_scenario(kRoot + f);
    CHECK(strip_runtime(to_json(run_scenario(cfg))) == strip_runtime(to_json(run_scenario(cfg))));
  }
}

TEST_CASE("injected non-convex kernel fails the convexity check") {
  const ScenarioConfig cfg = load_scenario(kRoot + "/scenarios/negative/fake_kernel_fails.json");
  const VerificationReport r = run_scenario(cfg);
  CHECK_FALSE(r.passed());
  CHECK(r.find("convexity")->value == doctest::Approx(-1.0));
}

TEST_CASE("margins are invariant under L -> 7.3 L") {
  const auto a = run_scenario(load_scenario(kRoot + "/scenarios/examples/scale_1_1d.json"));
  const auto b = run_scenario(load_scenario(kRoot + "/scenarios/examples/scale_7_3_1d.json"));
  for (const char* name : {"theorem", "proposition", "discriminant"}) {
    CAPTURE(name);
    CHECK(std::abs(a.find(name)->value - b.find(name)->value) <= 1e-10);
  }
}

TEST_CASE("export formats") {
  const ScenarioConfig cfg = load_scenario(kRoot + "/scenarios/closed_form/shift_one_1d.json");
  const std::string map = export_csv(cfg, ExportKind::map);
  CHECK(map.rfind("x_1,T_1\n", 0) == 0);
  const std::string chaos = export_csv(cfg, ExportKind::chaos);
  CHECK(chaos.rfind("alpha,coefficient\n0,", 0) == 0);
  CHECK(std::count(chaos.begin(), chaos.end(), '\n') == 10);  // header + degrees 0..8
  CHECK(chaos.find("\n2,0.5") != std::string::npos);
  CHECK_THROWS_AS(parse_export_kind("plan"), ConfigError);
  CHECK(format_number(0.1) == "0.1");
}
