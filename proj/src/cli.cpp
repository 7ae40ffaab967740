#include "gpos/cli.hpp"

#include "gpos/scenario.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <fstream>
#include <future>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

namespace gpos::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ostream& out_of(const Options& o) { return o.out ? *o.out : std::cout; }
std::ostream& err_of(const Options& o) { return o.err ? *o.err : std::cerr; }

ScenarioConfig load_with_overrides(const std::string& path, const Options& opts) {
  ScenarioConfig cfg = load_scenario(path);
  for (const auto& [name, value] : opts.tol_overrides) {
    double* slot = cfg.tolerances.find(name);
    if (!slot) throw ConfigError("--tol-override: unknown tolerance '" + name + "'");
    *slot = value;
  }
  if (opts.seed) cfg.seed = *opts.seed;
  return cfg;
}

fs::path default_report_path(const std::string& config_path, const ScenarioConfig* cfg) {
  const fs::path cp(config_path);
  if (cfg && !cfg->report_path.empty()) {
    const fs::path rp(cfg->report_path);
    return rp.is_absolute() ? rp : cp.parent_path() / rp;
  }
  return cp.parent_path() / (cp.stem().string() + ".report.json");
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

const char* error_kind(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const DimensionError*>(&e)) return "dimension";
  if (dynamic_cast<const DomainError*>(&e)) return "domain";
  if (dynamic_cast<const NumericalError*>(&e)) return "numerical";
  return "internal";
}

void print_report(std::ostream& os, const VerificationReport& r) {
  for (const auto& c : r.checks) {
    os << (c.pass ? "PASS " : "FAIL ") << r.case_id << ' ' << c.name << ' ' << c.quantity << '='
       << format_number(c.value) << " tol=" << format_number(c.tolerance) << '\n';
  }
}

// Outcome of one scenario file, as summarized in a suite index.
struct Outcome {
  std::string file;
  std::string case_id;
  std::string status;  // pass | fail | error
  std::string error;
  json checks = json::object();
  double runtime_ms = 0.0;
};

Outcome run_one(const fs::path& file, const fs::path& out_dir, const Options& opts) {
  Outcome o;
  o.file = file.filename().string();
  const fs::path report = out_dir / (file.stem().string() + ".report.json");
  std::string case_id = file.stem().string();
  try {
    const ScenarioConfig cfg = load_with_overrides(file.string(), opts);
    case_id = cfg.case_id;
    o.case_id = cfg.case_id;
    const VerificationReport r = run_scenario(cfg);
    for (const auto& c : r.checks) o.checks[c.name] = {{c.quantity, c.value}, {"pass", c.pass}};
    o.status = r.passed() ? "pass" : "fail";
    o.runtime_ms = r.runtime_ms;
    write_atomic(report, dump(to_json(r)));
  } catch (const std::exception& e) {
    o.case_id = case_id;
    o.status = "error";
    o.error = e.what();
    try {
      write_atomic(report, dump(error_json(case_id, error_kind(e), e.what())));
    } catch (const std::exception&) {
      // the index still records the failure
    }
  }
  return o;
}

}  // namespace

std::pair<std::string, double> parse_tol_override(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == s.size()) {
    throw ConfigError("--tol-override expects name=value, got '" + s + "'");
  }
  const std::string name = s.substr(0, eq);
  const std::string text = s.substr(eq + 1);
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size() || !(v >= 0.0)) {
    throw ConfigError("--tol-override: bad value '" + text + "' for '" + name + "'");
  }
  if (!Tolerances{}.find(name)) throw ConfigError("--tol-override: unknown tolerance '" + name + "'");
  return {name, v};
}

void write_atomic(const fs::path& path, const std::string& content) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  thread_local std::mt19937_64 rng(std::random_device{}());
  const fs::path tmp = path.string() + ".tmp" + std::to_string(rng() % 1000000007ULL);
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    f << content;
    f.flush();
    if (!f) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw std::runtime_error("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

int cmd_verify(const std::string& config_path, const std::optional<std::string>& report_path, const Options& opts) {
  ScenarioConfig cfg;
  try {
    cfg = load_with_overrides(config_path, opts);
  } catch (const std::exception& e) {
    err_of(opts) << "error: " << e.what() << '\n';
    std::error_code ec;
    if (report_path || fs::is_regular_file(config_path, ec)) {
      const fs::path report = report_path ? fs::path(*report_path) : default_report_path(config_path, nullptr);
      try {
        write_atomic(report, dump(error_json(fs::path(config_path).stem().string(), error_kind(e), e.what())));
      } catch (const std::exception& w) {
        err_of(opts) << "error: " << w.what() << '\n';
      }
    }
    return kExitStructural;
  }
  const fs::path report = report_path ? fs::path(*report_path) : default_report_path(config_path, &cfg);
  try {
    const VerificationReport r = run_scenario(cfg);
    write_atomic(report, dump(to_json(r)));
    if (!opts.quiet) {
      print_report(out_of(opts), r);
      out_of(opts) << (r.passed() ? "verified " : "FAILED ") << r.case_id << " -> " << report.string() << '\n';
    }
    return r.passed() ? kExitPass : kExitFailure;
  } catch (const std::exception& e) {
    err_of(opts) << "error: " << cfg.case_id << ": " << e.what() << '\n';
    try {
      write_atomic(report, dump(error_json(cfg.case_id, error_kind(e), e.what())));
    } catch (const std::exception& w) {
      err_of(opts) << "error: " << w.what() << '\n';
    }
    return kExitStructural;
  }
}

int cmd_suite(const std::string& dir, const std::optional<std::string>& out_dir, const Options& opts) {
  std::vector<fs::path> files;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    err_of(opts) << "error: " << dir << ": not a directory\n";
    return kExitStructural;
  }
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (entry.path().extension() != ".json" || name == "index.json") continue;
    if (name.size() > 12 && name.ends_with(".report.json")) continue;
    files.push_back(entry.path());
  }
  if (files.empty()) {
    err_of(opts) << "error: " << dir << ": no scenario files\n";
    return kExitStructural;
  }
  std::sort(files.begin(), files.end());
  const fs::path out = out_dir ? fs::path(*out_dir) : fs::path(dir) / "reports";

  std::vector<Outcome> outcomes(files.size());
  std::atomic<std::size_t> next{0};
  const std::size_t workers = std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(),
                                                              static_cast<unsigned>(files.size())));
  std::vector<std::future<void>> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.push_back(std::async(std::launch::async, [&] {
      for (std::size_t k = next++; k < files.size(); k = next++) outcomes[k] = run_one(files[k], out, opts);
    }));
  }
  for (auto& f : pool) f.get();

  int pass = 0, fail = 0, error = 0;
  json list = json::array();
  for (const auto& o : outcomes) {
    json e = {{"file", o.file}, {"case_id", o.case_id}, {"status", o.status}, {"checks", o.checks},
              {"runtime_ms", o.runtime_ms}};
    if (!o.error.empty()) e["error"] = o.error;
    list.push_back(e);
    if (o.status == "pass") ++pass;
    if (o.status == "fail") ++fail;
    if (o.status == "error") ++error;
    if (!opts.quiet) {
      out_of(opts) << (o.status == "pass" ? "PASS " : o.status == "fail" ? "FAIL " : "ERROR ") << o.file;
      if (!o.error.empty()) out_of(opts) << ": " << o.error;
      out_of(opts) << '\n';
    } else if (!o.error.empty()) {
      err_of(opts) << "error: " << o.file << ": " << o.error << '\n';
    }
  }
  const json index = {{"suite", fs::path(dir).filename().string()},
                      {"scenarios", list},
                      {"counts", {{"pass", pass}, {"fail", fail}, {"error", error}}},
                      {"passed", fail == 0 && error == 0},
                      {"versions", versions_json()}};
  try {
    write_atomic(out / "index.json", dump(index));
  } catch (const std::exception& e) {
    err_of(opts) << "error: " << e.what() << '\n';
    return kExitStructural;
  }
  if (!opts.quiet) {
    out_of(opts) << pass << " passed, " << fail << " failed, " << error << " errors -> " << (out / "index.json").string()
                 << '\n';
  }
  if (error > 0) return kExitStructural;
  return fail > 0 ? kExitFailure : kExitPass;
}

int cmd_export(const std::string& config_path, const std::string& what, const std::optional<std::string>& out_path,
               const Options& opts) {
  try {
    const ExportKind kind = parse_export_kind(what);
    const ScenarioConfig cfg = load_with_overrides(config_path, opts);
    const std::string csv = export_csv(cfg, kind);
    if (out_path) {
      write_atomic(*out_path, csv);
      if (!opts.quiet) out_of(opts) << "wrote " << *out_path << '\n';
    } else {
      out_of(opts) << csv;
    }
    return kExitPass;
  } catch (const std::exception& e) {
    err_of(opts) << "error: " << e.what() << '\n';
    return kExitStructural;
  }
}

int run(int argc, char** argv) {
  CLI::App app{"Numerical verification of second-chaos transport inequalities on Gaussian space", "gpos"};
  app.require_subcommand(1);
  app.fallthrough();

  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  bool quiet = false;
  app.add_option("--tol-override", overrides, "Override a tolerance, name=value (repeatable)");
  auto* seed_opt = app.add_option("--seed", seed, "Override the scenario seed");
  app.add_flag("--quiet,-q", quiet, "Only print errors");

  std::string config, dir, what, out;
  auto* verify = app.add_subcommand("verify", "Run one scenario and write its report");
  verify->add_option("config", config, "Scenario JSON")->required();
  auto* verify_out = verify->add_option("--out", out, "Report path (default: next to the config)");

  auto* suite = app.add_subcommand("suite", "Run every scenario in a directory");
  suite->add_option("dir", dir, "Directory of scenario JSON files")->required();
  auto* suite_out = suite->add_option("--out", out, "Report directory (default: <dir>/reports)");

  auto* exp = app.add_subcommand("export", "Write a CSV dump of a scenario");
  exp->add_option("config", config, "Scenario JSON")->required();
  exp->add_option("--what", what, "map, potential or chaos")->required()->check(
      CLI::IsMember({"map", "potential", "chaos"}));
  auto* exp_out = exp->add_option("--out", out, "CSV path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitPass : kExitStructural;
  }

  Options opts;
  opts.quiet = quiet;
  if (*seed_opt) opts.seed = seed;
  try {
    for (const auto& o : overrides) opts.tol_overrides.push_back(parse_tol_override(o));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitStructural;
  }

  if (*verify) return cmd_verify(config, *verify_out ? std::optional(out) : std::nullopt, opts);
  if (*suite) return cmd_suite(dir, *suite_out ? std::optional(out) : std::nullopt, opts);
  return cmd_export(config, what, *exp_out ? std::optional(out) : std::nullopt, opts);
}

}  // namespace gpos::cli
