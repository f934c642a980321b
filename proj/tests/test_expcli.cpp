#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "ultralog/expcli.hpp"

using namespace ultralog;
namespace fs = std::filesystem;

namespace {

bool mentions(const ConfigError& e, const std::string& needle) {
  for (const auto& p : e.problems())
    if (p.find(needle) != std::string::npos) return true;
  return false;
}

std::vector<std::string> problems_of(const std::string& text, const std::vector<std::string>& overrides = {}) {
  try {
    parse_config(text, overrides);
  } catch (const ConfigError& e) {
    return e.problems();
  }
  return {};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ultralog_test_" + name);
  fs::remove_all(p);
  return p;
}

int exit_status(const std::string& cmd) {
  const int st = std::system((cmd + " > /dev/null 2>&1").c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

}  // namespace

TEST_CASE("parse_config: minimal kg-mc config") {
  const ExperimentConfig c = parse_config("experiment = kg-mc\nseed = 42\n");
  CHECK(c.experiment == "kg-mc");
  CHECK(*c.seed == 42);
  CHECK(c.p == 2);
  CHECK(c.m == 1);
  CHECK(c.Q_max == 12);
  const auto echo = c.echo();
  CHECK(echo["experiment"] == "kg-mc");
  CHECK(echo["seed"] == "42");
  CHECK(echo["psi"] == "inverse");
}

TEST_CASE("parse_config: JSON documents and overrides") {
  const ExperimentConfig c =
      parse_config(R"({"experiment": "tree-loglaw", "seed": "18446744073709551615", "q": 3, "ladder_c": [1, 2.5]})",
                   {"trials = 7"});
  CHECK(*c.seed == 18446744073709551615ULL);
  CHECK(c.residue_size() == 3);
  CHECK(c.ladder_c == std::vector<double>{1.0, 2.5});
  CHECK(c.trials == 7);
  const ExperimentConfig d = parse_config("experiment=tree-loglaw\nseed=1\nladder_c = 1, 1.5, 2 # three rungs\n");
  CHECK(d.ladder_c.size() == 3);
}

TEST_CASE("parse_config: errors") {
  {
    const auto p = problems_of("experiment = kg-mc\nseed = 1\nfoo = 3\n");
    REQUIRE(p.size() == 1);
    CHECK(p[0].find("'foo'") != std::string::npos);
  }
  {
    const auto p = problems_of("experiment = kg-mc\nseed = 1\np = 4\n");
    REQUIRE(p.size() == 1);
    CHECK(p[0].find("not prime") != std::string::npos);
  }
  // every violation, not only the first
  const auto many = problems_of("experiment = kg-mc\nfoo = 1\nbar = 2\np = 9\nm = 7\nformat = xml\n");
  CHECK(many.size() == 6);
  try {
    parse_config("experiment = kg-mc\nfoo = 1\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(mentions(e, "missing seed"));
    CHECK(mentions(e, "'foo'"));
  }
  CHECK_FALSE(problems_of("experiment = warp-drive\nseed = 1\n").empty());
  CHECK_FALSE(problems_of("experiment = kg-mc\nseed = -3\n").empty());
  CHECK_FALSE(problems_of("experiment = kg-mc\nseed = 1\nT = 0\n").empty());
  CHECK_FALSE(problems_of("experiment = reduce\nseed = 1\n").empty());
  CHECK_FALSE(problems_of("experiment = xi-decay\nseed = 1\nq = 6\n").empty());
  CHECK_FALSE(problems_of("{\"experiment\": \"kg-mc\", ").empty());
  CHECK_FALSE(problems_of("experiment = strong-bc\nseed = 1\nm = 2\n").empty());
}

TEST_CASE("same config and seed give byte-identical artifacts at any thread count") {
  const std::vector<std::string> configs = {
      "experiment = delta-flow\nm = 1\nn = 2\nT = 12\ntrials = 3\nsamples = 3000\n",
      "experiment = kg-mc\ntrials = 16\nQ_max = 6\nprecision = 24\n",
      "experiment = mult-mc\nr = 3\ntrials = 4\nQ_max = 2\nradius = 2\n",
      "experiment = strong-bc\nT = 300\ntrials = 6\n",
      "experiment = cusp-volume\nrank = 2\nq = 3\n",
      "experiment = tree-loglaw\nT = 3000\ntrials = 12\ntrace_length = 200\n",
      "experiment = xi-decay\nq = 2\nt_max = 4\nsamples = 400\n",
  };
  for (const auto& text : configs) {
    CAPTURE(text);
    const ExperimentConfig one = parse_config(text + "seed = 99\nthreads = 1\n");
    const ExperimentConfig four = parse_config(text + "seed = 99\nthreads = 4\n");
    const RunReport a = run_experiment(one, false), b = run_experiment(one, false), c = run_experiment(four, false);
    CHECK(a.artifacts == b.artifacts);
    CHECK(a.artifacts == c.artifacts);
    CHECK(a.artifacts.count("report.json") == 1);
    const ExperimentConfig other = parse_config(text + "seed = 100\n");
    if (one.experiment != "cusp-volume") CHECK(run_experiment(other, false).artifacts != a.artifacts);
  }
}

TEST_CASE("a failed tail fit is reported, not hidden") {
  const ExperimentConfig c = parse_config("experiment = delta-flow\nseed = 2\nT = 8\ntrials = 2\nsamples = 20\n");
  const RunReport r = run_experiment(c, false);
  CHECK(r.summary["kappa_fit"].is_null());
  REQUIRE(r.summary.contains("degradations"));
  CHECK(r.summary["degradations"][0].get<std::string>().find("no tail fit") == 0);
}

TEST_CASE("report layout") {
  const fs::path dir = scratch("layout");
  ExperimentConfig c = parse_config("experiment = tree-loglaw\nseed = 5\nT = 2000\ntrials = 10\n", {"out=" + dir.string()});
  const RunReport r = run_experiment(c);
  std::ifstream in(dir / "report.json");
  std::stringstream buf;
  buf << in.rdbuf();
  const auto doc = nlohmann::ordered_json::parse(buf.str());
  CHECK(doc.begin().key() == "schema");
  CHECK(doc["schema"] == kReportSchema);
  CHECK(doc["version"] == kVersion);
  CHECK(doc["summary"].contains("median_ratio"));
  CHECK(doc["summary"].contains("quartiles"));
  CHECK(doc["summary"].contains("excursion_tail_rate"));
  CHECK(doc["pass"] == r.pass);
  CHECK(buf.str().find("wall") == std::string::npos);
  for (const char* csv : {"trace.csv", "loglaw_ratios.csv"}) {
    std::ifstream t(dir / csv);
    std::string first;
    std::getline(t, first);
    CHECK(first.rfind("# ultralog ", 0) == 0);
  }
  // json format writes the report only
  c.format = "json";
  c.out = (dir / "json").string();
  run_experiment(c);
  CHECK(fs::exists(dir / "json" / "report.json"));
  CHECK_FALSE(fs::exists(dir / "json" / "trace.csv"));
}

TEST_CASE("tree-loglaw reference run carries median_ratio") {
  const ExperimentConfig c = parse_config("experiment = tree-loglaw\nseed = 1\nq = 2\ntrials = 200\nT = 100000\nthreads = 4\n");
  const RunReport r = run_experiment(c, false);
  CHECK(r.summary.contains("median_ratio"));
  CHECK(r.summary["median_ratio"].get<double>() == doctest::Approx(1.0).epsilon(0.15));
}

TEST_CASE("strong-bc with convergent thresholds reports bounded counts") {
  const ExperimentConfig c = parse_config("experiment = strong-bc\nseed = 3\nthresholds = convergent\nT = 2000\ntrials = 10\n");
  const RunReport r = run_experiment(c, false);
  CHECK(r.summary["classification"] == "convergent: counts bounded");
  CHECK(r.pass);
  const ExperimentConfig z = parse_config("experiment = strong-bc\nseed = 3\nthresholds = zero\nT = 200\ntrials = 3\n");
  CHECK(run_experiment(z, false).summary["median_ratio"] == 1.0);
}

TEST_CASE("module errors name the module and a reproduction command") {
  const fs::path dir = scratch("err");
  fs::create_directories(dir);
  std::ofstream(dir / "m.txt") << "X, 1\n1\n";
  const ExperimentConfig c = parse_config("experiment = reduce\nseed = 4\n", {"matrix=" + (dir / "m.txt").string()});
  try {
    run_experiment(c, false);
    FAIL("expected ExperimentError");
  } catch (const ExperimentError& e) {
    CHECK(e.module() == "lattice");
    CHECK(e.repro().find("ultralog reduce --seed 4") == 0);
    CHECK(e.repro().find("--set matrix=") != std::string::npos);
  }
}

TEST_CASE("rank-one cusp tail matches the ray") {
  for (unsigned q : {2u, 3u, 4u}) {
    CHECK(rank1_ray_deviation(q, false, 40) <= 1e-9);
    CHECK(rank1_ray_deviation(q, true, 40) <= 1e-9);
  }
}

TEST_CASE("command line exit codes") {
  const std::string bin = ULTRALOG_CLI;
  const fs::path dir = scratch("cli");
  const std::string out = " --out " + dir.string();
  CHECK(exit_status(bin + " cusp-volume --seed 1 --set rank=1 --set q=2" + out) == 0);
  CHECK(exit_status(bin + " cusp-volume --seed 1 --set rank=2 --set q=2 --set cusp_spread_max=1.5" + out) == 2);
  CHECK(exit_status(bin + " cusp-volume --set rank=1" + out) == 1);  // no seed
  CHECK(exit_status(bin + " cusp-volume --seed 1 --set foo=1" + out) == 1);
  CHECK(exit_status(bin + " reduce --seed 1 --matrix /nonexistent/m.txt" + out) == 1);
  CHECK(exit_status(bin + " warp-drive --seed 1") == 1);
  CHECK(fs::exists(dir / "report.json"));
}
