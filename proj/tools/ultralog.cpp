// ultralog: command line front end for the experiment runner.
//
//   ultralog <experiment> --seed N [--config PATH] [--set key=value ...]
//            [--out DIR] [--threads N] [--format csv|json]
//
// Exit status: 0 all acceptance checks passed, 2 some check failed, 1 error.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "ultralog/expcli.hpp"

namespace {

struct Options {
  std::string config_path, out, format, seed, matrix;
  std::vector<std::string> sets;
  int threads = 0;
  bool quiet = false;
};

int run(const std::string& tag, const Options& opt) {
  using namespace ultralog;
  std::string text;
  if (!opt.config_path.empty()) {
    std::ifstream in(opt.config_path);
    if (!in) {
      std::cerr << "error: cannot read config '" << opt.config_path << "'\n";
      return 1;
    }
    std::stringstream buf;
    buf << in.rdbuf();
    text = buf.str();
  }
  try {
    // flags override the file; the experiment and seed are validated afterwards
    std::vector<std::string> sets;
    sets.push_back("experiment=" + tag);
    if (!opt.seed.empty()) sets.push_back("seed=" + opt.seed);
    if (!opt.out.empty()) sets.push_back("out=" + opt.out);
    if (!opt.format.empty()) sets.push_back("format=" + opt.format);
    if (!opt.matrix.empty()) sets.push_back("matrix=" + opt.matrix);
    if (opt.threads > 0) sets.push_back("threads=" + std::to_string(opt.threads));
    for (const auto& s : opt.sets) sets.push_back(s);
    ExperimentConfig cfg;
    try {
      cfg = parse_config(text, sets);
    } catch (const ConfigError& e) {
      for (const auto& p : e.problems()) std::cerr << "config error: " << p << '\n';
      return 1;
    }
    const RunReport rep = run_experiment(cfg);
    if (!opt.quiet) {
      for (const auto& c : rep.checks)
        std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.value << " (" << c.threshold << ")\n";
      std::cout << (rep.pass ? "pass" : "fail") << ": " << cfg.experiment << ", artifacts in " << cfg.out << '\n';
    }
    std::cerr << "wall clock " << rep.wall_clock_seconds << " s\n";
    return rep.exit_code();
  } catch (const ExperimentError& e) {
    std::cerr << "error in " << e.module() << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string("ultralog ") + ultralog::kVersion + ": experiments on lattices over F_q((1/X))"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ultralog::kVersion));
  Options opt;
  for (const auto& tag : ultralog::experiment_tags()) {
    CLI::App* sub = app.add_subcommand(tag, "run the " + tag + " experiment");
    sub->add_option("--config", opt.config_path, "key = value or JSON config file");
    sub->add_option("--seed", opt.seed, "master seed (unsigned 64-bit decimal, mandatory)");
    sub->add_option("--out", opt.out, "output directory");
    sub->add_option("--threads", opt.threads, "worker threads")->check(CLI::Range(1, 256));
    sub->add_option("--format", opt.format, "csv: CSV artifacts and report.json; json: report.json only")
        ->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--set", opt.sets, "override one config key, key=value");
    sub->add_flag("--quiet", opt.quiet, "do not print the check lines");
    if (tag == "reduce") sub->add_option("--matrix", opt.matrix, "matrix file");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  for (auto* sub : app.get_subcommands()) return run(sub->get_name(), opt);
  return 1;
}
