#include "gpos/cli.hpp"
#include "gpos/scenario.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace gpos;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kRoot = GPOS_SOURCE_DIR;

// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("gpos_cli_test_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

void write(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << text;
}

std::string read(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "gpos");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return cli::run(static_cast<int>(argv.size()), argv.data());
}

const char* kGood = R"({"case_id": "good", "dim": 1, "density": {"family": "wick_shift", "h": [0.5]},
  "checks": ["proposition", "theorem", "identities"]})";
const char* kFailing = R"({"case_id": "failing", "dim": 1, "density": {"family": "uniform"},
  "checks": [{"convexity": {"kernel": [[-2]], "r": 1}}]})";
const char* kCorrupt = "{\n  \"case_id\": \"corrupt\",\n  \"dim\": 1,\n  \"density\": {\"family\": \"uniform\"\n  \"checks\": []\n}\n";

}  // namespace

TEST_CASE("verify: exit code 0 and the report next to the config") {
  TempDir tmp;
  write(tmp.path / "good.json", kGood);
  CHECK(run({"--quiet", "verify", (tmp.path / "good.json").string()}) == cli::kExitPass);
  const json r = json::parse(read(tmp.path / "good.report.json"));
  CHECK(r["case_id"] == "good");
  CHECK(r["dim"] == 1);
  CHECK(r["checks"]["theorem"]["pass"] == true);
  CHECK(r.contains("runtime_ms"));
  CHECK(r["versions"].contains("gpos"));
}

TEST_CASE("verify: exit code 2 on a verification failure") {
  TempDir tmp;
  write(tmp.path / "failing.json", kFailing);
  CHECK(run({"--quiet", "verify", (tmp.path / "failing.json").string()}) == cli::kExitFailure);
  const json r = json::parse(read(tmp.path / "failing.report.json"));
  CHECK(r["passed"] == false);
  CHECK(r["checks"]["convexity"]["margin"].get<double>() == doctest::Approx(-1.0));
}

TEST_CASE("verify: exit code 1 and an error report for a corrupted config") {
  TempDir tmp;
  write(tmp.path / "corrupt.json", kCorrupt);
  std::ostringstream out, err;
  cli::Options opts;
  opts.out = &out;
  opts.err = &err;
  CHECK(cli::cmd_verify((tmp.path / "corrupt.json").string(), std::nullopt, opts) == cli::kExitStructural);
  CHECK(err.str().find("corrupt.json:5:") != std::string::npos);
  const json r = json::parse(read(tmp.path / "corrupt.report.json"));
  CHECK(r["error"]["kind"] == "config");
  CHECK(run({"--quiet", "verify", (tmp.path / "missing.json").string()}) == cli::kExitStructural);
  CHECK_FALSE(fs::exists(tmp.path / "missing.report.json"));
}

TEST_CASE("verify: --out and output.report") {
  TempDir tmp;
  write(tmp.path / "good.json", kGood);
  CHECK(run({"-q", "verify", (tmp.path / "good.json").string(), "--out", (tmp.path / "x" / "r.json").string()}) == 0);
  CHECK(fs::exists(tmp.path / "x" / "r.json"));
  std::string with_output = kGood;
  with_output.insert(with_output.size() - 1, R"(, "output": {"report": "reports/named.json"})");
  write(tmp.path / "named.json", with_output);
  CHECK(run({"-q", "verify", (tmp.path / "named.json").string()}) == 0);
  CHECK(fs::exists(tmp.path / "reports" / "named.json"));
}

TEST_CASE("quiet suppresses normal output") {
  TempDir tmp;
  write(tmp.path / "good.json", kGood);
  std::ostringstream out, err;
  cli::Options opts;
  opts.out = &out;
  opts.err = &err;
  opts.quiet = true;
  CHECK(cli::cmd_verify((tmp.path / "good.json").string(), std::nullopt, opts) == 0);
  CHECK(out.str().empty());
  opts.quiet = false;
  CHECK(cli::cmd_verify((tmp.path / "good.json").string(), std::nullopt, opts) == 0);
  CHECK(out.str().find("PASS good theorem") != std::string::npos);
}

TEST_CASE("tolerance overrides and seed") {
  TempDir tmp;
  write(tmp.path / "failing.json", kFailing);
  const std::string cfg = (tmp.path / "failing.json").string();
  CHECK(run({"-q", "--tol-override", "convexity=1.5", "verify", cfg}) == cli::kExitPass);
  const json r = json::parse(read(tmp.path / "failing.report.json"));
  CHECK(r["checks"]["convexity"]["tolerance"].get<double>() == 1.5);
  CHECK(run({"-q", "--tol-override", "nonsense=1", "verify", cfg}) == cli::kExitStructural);
  CHECK(run({"-q", "--tol-override", "convexity", "verify", cfg}) == cli::kExitStructural);
  CHECK(run({"-q", "--tol-override", "convexity=-1", "verify", cfg}) == cli::kExitStructural);

  write(tmp.path / "good.json", kGood);
  CHECK(run({"-q", "--seed", "31337", "verify", (tmp.path / "good.json").string()}) == 0);
  CHECK(json::parse(read(tmp.path / "good.report.json"))["diagnostics"]["seed"] == 31337);

  CHECK(cli::parse_tol_override("identity=2e-5").second == 2e-5);
  CHECK_THROWS_AS(cli::parse_tol_override("=3"), ConfigError);
}

TEST_CASE("suite: exit codes and index") {
  TempDir tmp;
  write(tmp.path / "a" / "good.json", kGood);
  CHECK(run({"-q", "suite", (tmp.path / "a").string()}) == cli::kExitPass);
  const json index = json::parse(read(tmp.path / "a" / "reports" / "index.json"));
  CHECK(index["passed"] == true);
  CHECK(index["counts"]["pass"] == 1);
  CHECK(fs::exists(tmp.path / "a" / "reports" / "good.report.json"));

  write(tmp.path / "a" / "failing.json", kFailing);
  CHECK(run({"-q", "suite", (tmp.path / "a").string(), "--out", (tmp.path / "ra").string()}) == cli::kExitFailure);
  CHECK(json::parse(read(tmp.path / "ra" / "index.json"))["counts"]["fail"] == 1);

  // A corrupted file is a structural error and wins over failures.
  write(tmp.path / "a" / "corrupt.json", kCorrupt);
  CHECK(run({"-q", "suite", (tmp.path / "a").string(), "--out", (tmp.path / "rb").string()}) == cli::kExitStructural);
  const json idx = json::parse(read(tmp.path / "rb" / "index.json"));
  CHECK(idx["counts"]["error"] == 1);
  CHECK(idx["counts"]["pass"] == 1);
  CHECK(json::parse(read(tmp.path / "rb" / "corrupt.report.json"))["error"]["kind"] == "config");

  CHECK(run({"-q", "suite", (tmp.path / "nowhere").string()}) == cli::kExitStructural);
  fs::create_directories(tmp.path / "empty");
  CHECK(run({"-q", "suite", (tmp.path / "empty").string()}) == cli::kExitStructural);
}

TEST_CASE("suite reports match single verify runs") {
  TempDir tmp;
  write(tmp.path / "s" / "good.json", kGood);
  CHECK(run({"-q", "suite", (tmp.path / "s").string(), "--out", (tmp.path / "r").string()}) == 0);
  CHECK(run({"-q", "verify", (tmp.path / "s" / "good.json").string(), "--out", (tmp.path / "v.json").string()}) == 0);
  json a = json::parse(read(tmp.path / "r" / "good.report.json"));
  json b = json::parse(read(tmp.path / "v.json"));
  a.erase("runtime_ms");
  b.erase("runtime_ms");
  CHECK(a == b);
}

TEST_CASE("export") {
  TempDir tmp;
  write(tmp.path / "good.json", kGood);
  const std::string cfg = (tmp.path / "good.json").string();
  CHECK(run({"-q", "export", cfg, "--what", "map", "--out", (tmp.path / "map.csv").string()}) == 0);
  const std::string csv = read(tmp.path / "map.csv");
  CHECK(csv.rfind("x_1,T_1\n", 0) == 0);
  CHECK(run({"-q", "export", cfg, "--what", "potential", "--out", (tmp.path / "phi.csv").string()}) == 0);
  CHECK(read(tmp.path / "phi.csv").rfind("x_1,phi\n", 0) == 0);
  CHECK(run({"-q", "export", cfg, "--what", "chaos", "--out", (tmp.path / "c.csv").string()}) == 0);
  CHECK(run({"-q", "export", cfg, "--what", "plan"}) == cli::kExitStructural);
  write(tmp.path / "m.json", R"({"case_id": "m", "dim": 1, "measure": {"atoms": [{"location": [1], "weight": 1}]}, "checks": ["corollary2"]})");
  CHECK(run({"-q", "export", (tmp.path / "m.json").string(), "--what", "map"}) == cli::kExitStructural);
}

TEST_CASE("usage errors") {
  CHECK(run({}) == cli::kExitStructural);
  CHECK(run({"frobnicate"}) == cli::kExitStructural);
  CHECK(run({"verify"}) == cli::kExitStructural);
  CHECK(run({"--help"}) == cli::kExitPass);
}

TEST_CASE("atomic writes replace whole files and leave no temporaries") {
  TempDir tmp;
  const fs::path p = tmp.path / "deep" / "file.json";
  cli::write_atomic(p, "first\n");
  cli::write_atomic(p, "second\n");
  CHECK(read(p) == "second\n");
  int entries = 0;
  for (const auto& e : fs::directory_iterator(p.parent_path())) {
    (void)e;
    ++entries;
  }
  CHECK(entries == 1);

  // Renaming onto a directory fails; the target and siblings are untouched.
  fs::create_directories(tmp.path / "deep" / "dir");
  CHECK_THROWS(cli::write_atomic(tmp.path / "deep" / "dir", "x"));
  CHECK(fs::is_directory(tmp.path / "deep" / "dir"));
  CHECK(read(p) == "second\n");
  entries = 0;
  for (const auto& e : fs::directory_iterator(p.parent_path())) {
    (void)e;
    ++entries;
  }
  CHECK(entries == 2);
}
