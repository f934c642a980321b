#include "ultralog/expcli.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#include "ultralog/daniflow.hpp"
#include "ultralog/dioph.hpp"
#include "ultralog/lattice.hpp"
#include "ultralog/spectral.hpp"
#include "ultralog/treegeo.hpp"
#include "ultralog/util.hpp"
#include "ultralog/weylvol.hpp"

namespace ultralog {

using json = nlohmann::ordered_json;

namespace {

std::string join(const std::vector<std::string>& v, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
  return out;
}

// q = p^e with p prime, else nullopt
std::optional<std::pair<unsigned, unsigned>> prime_power(unsigned long long q) {
  if (q < 2) return std::nullopt;
  unsigned long long p = 2;
  while (q % p) ++p;
  unsigned e = 0;
  while (q % p == 0) q /= p, ++e;
  if (q != 1) return std::nullopt;
  return std::make_pair(static_cast<unsigned>(p), e);
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Scalar from key=value text: numbers become numbers, the rest strings.
json scalar_from_text(const std::string& v) {
  if (v.empty()) return v;
  try {
    std::size_t used = 0;
    if (v.find_first_of(".eE") == std::string::npos && v[0] != '-') {
      const unsigned long long u = std::stoull(v, &used);
      if (used == v.size()) return u;
    }
    const long long i = std::stoll(v, &used);
    if (used == v.size()) return i;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  return v;
}

long long as_int(const json& v, const std::string& key) {
  if (v.is_number_integer()) {
    if (v.is_number_unsigned() && v.get<unsigned long long>() > static_cast<unsigned long long>(LLONG_MAX))
      throw std::invalid_argument(key + ": value out of range");
    return v.get<long long>();
  }
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d == std::floor(d) && std::fabs(d) < 9e15) return static_cast<long long>(d);
  }
  throw std::invalid_argument(key + ": expected an integer, got " + v.dump());
}

double as_double(const json& v, const std::string& key) {
  if (v.is_number()) return v.get<double>();
  throw std::invalid_argument(key + ": expected a number, got " + v.dump());
}

std::string as_string(const json& v, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) return v.dump();
  throw std::invalid_argument(key + ": expected a string, got " + v.dump());
}

std::uint64_t as_seed(const json& v) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<long long>() >= 0) return static_cast<std::uint64_t>(v.get<long long>());
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (!s.empty() && s.find_first_not_of("0123456789") == std::string::npos) {
      try {
        return std::stoull(s);
      } catch (const std::exception&) {
      }
    }
  }
  throw std::invalid_argument("seed: expected an unsigned 64-bit decimal, got " + v.dump());
}

std::vector<double> as_double_list(const json& v, const std::string& key) {
  std::vector<double> out;
  if (v.is_array()) {
    for (const auto& x : v) out.push_back(as_double(x, key));
    return out;
  }
  if (v.is_number()) return {v.get<double>()};
  if (v.is_string()) {
    std::stringstream ss(v.get<std::string>());
    std::string item;
    while (std::getline(ss, item, ',')) {
      const json x = scalar_from_text(trim(item));
      out.push_back(as_double(x, key));
    }
    return out;
  }
  throw std::invalid_argument(key + ": expected a list of numbers");
}

using Setter = std::function<void(ExperimentConfig&, const json&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto integer = [&](const char* k, auto member) {
      t[k] = [k, member](ExperimentConfig& c, const json& v) {
        c.*member = static_cast<std::remove_reference_t<decltype(c.*member)>>(as_int(v, k));
      };
    };
    auto real = [&](const char* k, double ExperimentConfig::*member) {
      t[k] = [k, member](ExperimentConfig& c, const json& v) { c.*member = as_double(v, k); };
    };
    auto text = [&](const char* k, std::string ExperimentConfig::*member) {
      t[k] = [k, member](ExperimentConfig& c, const json& v) { c.*member = as_string(v, k); };
    };
    auto nonneg = [](long long x, const char* k) {
      if (x < 0) throw std::invalid_argument(std::string(k) + ": must be non-negative");
      return x;
    };
    t["p"] = [nonneg](ExperimentConfig& c, const json& v) { c.p = static_cast<unsigned>(nonneg(as_int(v, "p"), "p")); };
    t["e"] = [nonneg](ExperimentConfig& c, const json& v) { c.e = static_cast<unsigned>(nonneg(as_int(v, "e"), "e")); };
    t["q"] = [nonneg](ExperimentConfig& c, const json& v) { c.q = static_cast<unsigned>(nonneg(as_int(v, "q"), "q")); };
    text("experiment", &ExperimentConfig::experiment);
    integer("m", &ExperimentConfig::m);
    integer("n", &ExperimentConfig::n);
    integer("r", &ExperimentConfig::r);
    integer("rank", &ExperimentConfig::rank);
    text("psi", &ExperimentConfig::psi);
    real("psi_c", &ExperimentConfig::psi_c);
    real("psi_tau", &ExperimentConfig::psi_tau);
    real("psi_sigma", &ExperimentConfig::psi_sigma);
    real("psi_x0", &ExperimentConfig::psi_x0);
    integer("T", &ExperimentConfig::T);
    integer("Q_max", &ExperimentConfig::Q_max);
    integer("trials", &ExperimentConfig::trials);
    integer("samples", &ExperimentConfig::samples);
    integer("precision", &ExperimentConfig::precision);
    integer("burn_in", &ExperimentConfig::burn_in);
    integer("exhaustive_q", &ExperimentConfig::exhaustive_q);
    text("thresholds", &ExperimentConfig::thresholds);
    real("kappa", &ExperimentConfig::kappa);
    t["ladder_c"] = [](ExperimentConfig& c, const json& v) { c.ladder_c = as_double_list(v, "ladder_c"); };
    integer("j_max", &ExperimentConfig::j_max);
    integer("trace_length", &ExperimentConfig::trace_length);
    text("cocharacters", &ExperimentConfig::cocharacters);
    integer("cusp_t_min", &ExperimentConfig::cusp_t_min);
    integer("cusp_t_max", &ExperimentConfig::cusp_t_max);
    integer("t_max", &ExperimentConfig::t_max);
    integer("radius", &ExperimentConfig::radius);
    text("matrix", &ExperimentConfig::matrix);
    t["seed"] = [](ExperimentConfig& c, const json& v) { c.seed = as_seed(v); };
    text("out", &ExperimentConfig::out);
    integer("threads", &ExperimentConfig::threads);
    text("format", &ExperimentConfig::format);
    real("bc_ratio_lo", &ExperimentConfig::bc_ratio_lo);
    real("bc_ratio_hi", &ExperimentConfig::bc_ratio_hi);
    real("kg_divergent_min", &ExperimentConfig::kg_divergent_min);
    real("kg_convergent_max", &ExperimentConfig::kg_convergent_max);
    real("cusp_spread_max", &ExperimentConfig::cusp_spread_max);
    real("loglaw_tolerance", &ExperimentConfig::loglaw_tolerance);
    real("ladder_divergent_min", &ExperimentConfig::ladder_divergent_min);
    real("ladder_convergent_max", &ExperimentConfig::ladder_convergent_max);
    real("mc_sigmas", &ExperimentConfig::mc_sigmas);
    return t;
  }();
  return table;
}

// Applies one assignment, recording problems instead of throwing.
void assign(ExperimentConfig& cfg, const std::string& key, const json& value, std::vector<std::string>& problems) {
  const auto& table = setters();
  const auto it = table.find(key);
  if (it == table.end()) {
    problems.push_back("unknown key '" + key + "'");
    return;
  }
  try {
    it->second(cfg, value);
    std::erase(cfg.explicit_keys, key);
    cfg.explicit_keys.push_back(key);
  } catch (const std::exception& e) {
    problems.push_back(e.what());
  }
}

void parse_assignment_line(ExperimentConfig& cfg, const std::string& raw, int line_no,
                           std::vector<std::string>& problems) {
  std::string line = raw;
  if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
  line = trim(line);
  if (line.empty()) return;
  const auto eq = line.find('=');
  if (eq == std::string::npos) {
    problems.push_back((line_no > 0 ? "line " + std::to_string(line_no) + ": " : "") + "expected key = value, got '" +
                       line + "'");
    return;
  }
  assign(cfg, trim(line.substr(0, eq)), scalar_from_text(trim(line.substr(eq + 1))), problems);
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error("invalid configuration: " + join(problems, "; ")), problems_(std::move(problems)) {}

ExperimentError::ExperimentError(std::string module, std::string what, std::string repro)
    : std::runtime_error(module + ": " + what + " (reproduce with: " + repro + ")"),
      module_(std::move(module)),
      repro_(std::move(repro)) {}

std::vector<std::string> experiment_tags() {
  return {"delta-flow", "kg-mc", "mult-mc", "strong-bc", "cusp-volume", "tree-loglaw", "xi-decay", "reduce"};
}

unsigned ExperimentConfig::field_size() const {
  unsigned long long s = 1;
  for (unsigned i = 0; i < e && s <= 65536; ++i) s *= p;
  return static_cast<unsigned>(std::min<unsigned long long>(s, 1u << 31));
}

json ExperimentConfig::echo() const {
  json j;
  j["experiment"] = experiment;
  j["p"] = p;
  j["e"] = e;
  j["s"] = field_size();
  j["m"] = m;
  j["n"] = n;
  j["r"] = r;
  j["rank"] = rank;
  j["q"] = residue_size();
  j["psi"] = psi;
  j["psi_c"] = psi_c;
  j["psi_tau"] = psi_tau;
  j["psi_sigma"] = psi_sigma;
  j["psi_x0"] = psi_x0;
  j["T"] = T;
  j["Q_max"] = Q_max;
  j["trials"] = trials;
  j["samples"] = samples;
  j["precision"] = precision;
  j["burn_in"] = burn_in;
  j["exhaustive_q"] = exhaustive_q;
  j["thresholds"] = thresholds;
  j["kappa"] = kappa_or_default();
  j["ladder_c"] = ladder_c;
  j["j_max"] = j_max;
  j["trace_length"] = trace_length;
  j["cocharacters"] = cocharacters;
  j["cusp_t_min"] = cusp_t_min;
  j["cusp_t_max"] = cusp_t_max;
  j["t_max"] = t_max;
  j["radius"] = radius;
  j["matrix"] = matrix;
  j["seed"] = seed ? std::to_string(*seed) : "";
  j["format"] = format;
  j["bc_ratio_lo"] = bc_ratio_lo;
  j["bc_ratio_hi"] = bc_ratio_hi;
  j["kg_divergent_min"] = kg_divergent_min;
  j["kg_convergent_max"] = kg_convergent_max;
  j["cusp_spread_max"] = cusp_spread_max;
  j["loglaw_tolerance"] = loglaw_tolerance;
  j["ladder_divergent_min"] = ladder_divergent_min;
  j["ladder_convergent_max"] = ladder_convergent_max;
  j["mc_sigmas"] = mc_sigmas;
  return j;
}

std::string ExperimentConfig::command_line() const {
  std::string s = "ultralog " + experiment;
  if (seed) s += " --seed " + std::to_string(*seed);
  const json j = echo();
  for (const auto& k : explicit_keys) {
    if (k == "experiment" || k == "seed" || k == "out" || k == "threads") continue;
    const json& v = j.contains(k) ? j[k] : json(nullptr);
    std::string val = v.is_string() ? v.get<std::string>() : v.dump();
    if (k == "ladder_c") {
      std::vector<std::string> parts;
      for (double c : ladder_c) parts.push_back(json(c).dump());
      val = join(parts, ",");
    }
    s += " --set " + k + "=" + val;
  }
  return s;
}

std::vector<std::string> validate(const ExperimentConfig& c) {
  std::vector<std::string> bad;
  auto range = [&](const std::string& k, long long v, long long lo, long long hi) {
    if (v < lo || v > hi)
      bad.push_back(k + " = " + std::to_string(v) + " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  };
  const auto tags = experiment_tags();
  if (c.experiment.empty())
    bad.push_back("missing experiment");
  else if (std::find(tags.begin(), tags.end(), c.experiment) == tags.end())
    bad.push_back("unknown experiment '" + c.experiment + "' (expected one of " + join(tags, ", ") + ")");
  if (!c.seed) bad.push_back("missing seed (no default seed is used)");
  if (!is_prime(c.p)) bad.push_back("p = " + std::to_string(c.p) + " is not prime");
  range("e", c.e, 1, 16);
  if (is_prime(c.p) && c.e >= 1 && c.e <= 16 && c.field_size() > 256)
    bad.push_back("field size p^e = " + std::to_string(c.field_size()) + " exceeds the cap 256");
  if (c.q != 0) {
    range("q", c.q, 2, 64);
    if ((c.experiment == "tree-loglaw" || c.experiment == "xi-decay") && !prime_power(c.q))
      bad.push_back("q = " + std::to_string(c.q) + " is not a prime power");
  } else if (c.field_size() > 64 &&
             (c.experiment == "tree-loglaw" || c.experiment == "xi-decay" || c.experiment == "cusp-volume")) {
    bad.push_back("q = p^e = " + std::to_string(c.field_size()) + " exceeds the cap 64");
  }
  range("m", c.m, 1, 4);
  range("n", c.n, 1, 4);
  range("r", c.r, 2, 4);
  range("rank", c.rank, 1, 4);
  if (c.psi != "inverse" && c.psi != "power" && c.psi != "log-power")
    bad.push_back("psi = '" + c.psi + "' (expected inverse, power or log-power)");
  if (c.psi_x0 < 0) bad.push_back("psi_x0 must be non-negative");
  if (c.psi == "log-power" && c.psi_x0 != 0 && c.psi_x0 <= 1) bad.push_back("psi_x0 must exceed 1 for log-power");
  range("T", c.T, 1, 10'000'000);
  range("Q_max", c.Q_max, 0, 24);
  range("trials", c.trials, 1, 100'000);
  range("samples", c.samples, 0, 100'000'000);
  range("precision", c.precision, 1, 100'000);
  range("burn_in", c.burn_in, 0, 64);
  range("exhaustive_q", c.exhaustive_q, -1, 12);
  if (c.thresholds != "divergent" && c.thresholds != "convergent" && c.thresholds != "zero")
    bad.push_back("thresholds = '" + c.thresholds + "' (expected divergent, convergent or zero)");
  if (c.kappa < 0) bad.push_back("kappa must be non-negative");
  if (c.ladder_c.empty()) bad.push_back("ladder_c is empty");
  for (double x : c.ladder_c)
    if (!(x > 0)) bad.push_back("ladder_c entries must be positive");
  range("j_max", c.j_max, 2, 200);
  range("trace_length", c.trace_length, 0, 10'000'000);
  if (c.cocharacters != "coroot" && c.cocharacters != "adjoint")
    bad.push_back("cocharacters = '" + c.cocharacters + "' (expected coroot or adjoint)");
  range("cusp_t_min", c.cusp_t_min, 1, 1000);
  range("cusp_t_max", c.cusp_t_max, 1, 1000);
  if (c.cusp_t_min > c.cusp_t_max) bad.push_back("cusp_t_min exceeds cusp_t_max");
  range("t_max", c.t_max, 0, 16);
  range("radius", c.radius, 0, 8);
  range("threads", c.threads, 1, 256);
  if (c.format != "csv" && c.format != "json") bad.push_back("format = '" + c.format + "' (expected csv or json)");
  if (c.experiment == "reduce" && c.matrix.empty()) bad.push_back("reduce needs matrix = PATH");
  if (c.experiment == "strong-bc" && c.m + c.n != 2 && c.samples == 0)
    bad.push_back("strong-bc with m + n > 2 needs samples > 0 for the tail table");
  if (c.bc_ratio_lo > c.bc_ratio_hi) bad.push_back("bc_ratio_lo exceeds bc_ratio_hi");
  if (c.mc_sigmas <= 0) bad.push_back("mc_sigmas must be positive");
  return bad;
}

ExperimentConfig parse_config(const std::string& text, const std::vector<std::string>& overrides) {
  ExperimentConfig cfg;
  std::vector<std::string> problems;
  const std::string body = trim(text);
  if (!body.empty() && body[0] == '{') {
    json doc;
    try {
      doc = json::parse(body);
    } catch (const std::exception& e) {
      throw ConfigError({std::string("malformed JSON: ") + e.what()});
    }
    if (!doc.is_object()) throw ConfigError({"JSON config must be an object"});
    for (const auto& [k, v] : doc.items()) assign(cfg, k, v, problems);
  } else {
    std::stringstream ss(text);
    std::string line;
    int no = 0;
    while (std::getline(ss, line)) parse_assignment_line(cfg, line, ++no, problems);
  }
  for (const auto& a : overrides) parse_assignment_line(cfg, a, 0, problems);
  for (auto& p : validate(cfg)) problems.push_back(std::move(p));
  if (!problems.empty()) throw ConfigError(problems);
  return cfg;
}

void apply_overrides(ExperimentConfig& cfg, const std::vector<std::string>& assignments) {
  std::vector<std::string> problems;
  for (const auto& a : assignments) parse_assignment_line(cfg, a, 0, problems);
  for (auto& p : validate(cfg)) problems.push_back(std::move(p));
  if (!problems.empty()) throw ConfigError(problems);
}

json RunReport::to_json() const {
  json j;
  j["schema"] = kReportSchema;
  j["version"] = kVersion;
  j["experiment"] = config.value("experiment", "");
  j["config"] = config;
  j["summary"] = summary;
  json cs = json::array();
  for (const auto& c : checks) cs.push_back({{"name", c.name}, {"value", c.value}, {"threshold", c.threshold}, {"pass", c.pass}});
  j["checks"] = cs;
  j["pass"] = pass;
  std::vector<std::string> names;
  for (const auto& [name, _] : artifacts) names.push_back(name);
  j["artifacts"] = names;
  return j;
}

double rank1_ray_deviation(unsigned q, bool adjoint, long t_max, int j_max) {
  const auto pe = prime_power(q);
  if (!pe) throw std::invalid_argument("rank1_ray_deviation: q is not a prime power");
  if (t_max >= j_max) throw std::invalid_argument("rank1_ray_deviation: t_max must be below j_max");
  const QuotientRay ray = quotient_ray(Field::get(pe->first, pe->second), j_max);
  const RootSystemSpec spec(1, adjoint ? Cocharacters::Adjoint : Cocharacters::Coroot);
  double lo = std::numeric_limits<double>::infinity(), hi = 0;
  for (long T = 1; T <= t_max; ++T) {
    double mass;
    if (adjoint) {
      mass = ray.cusp_mass(static_cast<int>(T));
    } else {
      // unimodular classes sit over the even vertices
      mass = ray.tail_mass / (q + 1.0);
      for (int j = static_cast<int>(T); j <= j_max; ++j)
        if (j % 2 == 0) mass += ray.masses[static_cast<std::size_t>(j)];
    }
    const double ratio = cusp_tail(T, spec, q).tail / mass;
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
  }
  return hi / lo - 1;
}

namespace {

struct Runner {
  const ExperimentConfig& cfg;
  RunReport& rep;
  std::string module = "expcli";
  std::uint64_t seed = 0;

  void check(const std::string& name, double value, const std::string& threshold, bool pass) {
    rep.checks.push_back({name, value, threshold, pass});
    if (!pass) rep.pass = false;
  }

  void artifact(const std::string& name, std::string header, const std::string& body) {
    if (cfg.format != "csv") return;
    rep.artifacts[name] = "# " + header + "\n" + body;
  }

  const Field& field() const { return Field::get(cfg.p, cfg.e); }

  const Field& residue_field() const {
    const auto pe = prime_power(cfg.residue_size());
    if (!pe) throw std::invalid_argument("q is not a prime power");
    return Field::get(pe->first, pe->second);
  }

  PsiFunction psi() const {
    const unsigned s = cfg.field_size();
    if (cfg.psi == "inverse") return PsiFunction::power_law(s, 0, 1, cfg.psi_x0 > 0 ? cfg.psi_x0 : 1.0);
    if (cfg.psi == "power") return PsiFunction::power_law(s, cfg.psi_c, cfg.psi_tau, cfg.psi_x0 > 0 ? cfg.psi_x0 : 1.0);
    return PsiFunction::log_power(s, cfg.psi_sigma, cfg.psi_x0 > 0 ? cfg.psi_x0 : s);
  }

  // sum_q psi(|q|^n) diverges iff sum_k s^k psi(s^k) does
  bool psi_divergent() const {
    if (cfg.psi == "inverse") return true;
    if (cfg.psi == "power") return cfg.psi_tau <= 1;
    return cfg.psi_sigma <= 1;
  }

  void delta_flow();
  void finish_delta_flow(long counter, long uncertified);
  void kg_mc();
  void mult_mc();
  void strong_bc();
  void cusp_volume();
  void tree_loglaw();
  void xi_decay();
  void reduce_matrix();
};

json quantiles_json(const std::vector<double>& v) {
  json q;
  for (double p : {0.1, 0.25, 0.5, 0.75, 0.9}) q[std::to_string(static_cast<int>(p * 100))] = quantile(v, p);
  return q;
}

void Runner::delta_flow() {
  module = "daniflow";
  const FlowSpec spec(cfg.m, cfg.n, field());
  const int prec = std::max(cfg.precision, trajectory_precision(spec, static_cast<int>(cfg.T)));
  const PsiFunction ps = psi();
  const int T = static_cast<int>(cfg.T);
  const auto trials = static_cast<std::size_t>(cfg.trials);
  std::vector<std::vector<TrajectoryPoint>> traj(trials);
  std::vector<CorrespondenceReport> corr(trials);
  parallel_for(trials, cfg.threads, [&](std::size_t i) {
    std::mt19937_64 rng = stream_rng(seed, "delta-flow", i);
    const SeriesMatrix a = sample_matrix(spec, prec, rng);
    traj[i] = delta_trajectory(a, spec, T);
    corr[i] = correspondence_check(a, spec, ps, T, cfg.exhaustive_q);
  });
  module = "dioph";
  std::ostringstream tcsv, ccsv;
  tcsv << "trial,t,delta,certified\n";
  ccsv << "trial,t,delta,threshold,flagged,verified,q_exp,err_exp,exhaustive\n";
  std::vector<double> ratios;
  long flagged = 0, verified = 0, counter = 0, skipped = 0, uncertified = 0;
  const double logT = std::log(static_cast<double>(std::max<long>(cfg.T, 2))) / std::log(static_cast<double>(spec.f().size()));
  for (std::size_t i = 0; i < trials; ++i) {
    int best = 0;
    for (const auto& pt : traj[i]) {
      tcsv << i << ',' << pt.t << ',' << pt.delta.value << ',' << (pt.delta.certified ? 1 : 0) << '\n';
      best = std::max(best, pt.delta.value);
      uncertified += !pt.delta.certified;
    }
    ratios.push_back(best / logT);
    for (const auto& row : corr[i].rows) {
      ccsv << i << ',' << row.t << ',' << row.delta << ',' << row.threshold << ',' << row.flagged << ',' << row.verified
           << ',' << row.q_exponent << ',' << (row.error_exponent == kZeroNorm ? std::string("zero") : std::to_string(row.error_exponent))
           << ',' << row.exhaustive_checked << '\n';
    }
    flagged += corr[i].flagged;
    verified += corr[i].verified;
    counter += corr[i].counterexamples;
    skipped += corr[i].skipped;
  }
  artifact("trajectory.csv", "ultralog trajectory v1", tcsv.str());
  artifact("correspondence.csv", "ultralog correspondence v1", ccsv.str());
  json& s = rep.summary;
  s["seed"] = std::to_string(seed);
  s["m"] = cfg.m;
  s["n"] = cfg.n;
  s["s"] = spec.f().size();
  s["T"] = cfg.T;
  s["trials"] = cfg.trials;
  s["precision_used"] = prec;
  s["psi"] = ps.describe();
  s["ratio_quantiles"] = quantiles_json(ratios);
  s["flagged"] = flagged;
  s["verified"] = verified;
  s["counterexamples"] = counter;
  s["skipped"] = skipped;
  s["kappa_fit"] = nullptr;
  if (cfg.samples > 0) {
    module = "daniflow";
    SamplerSpec sp;
    sp.flow = spec;
    sp.tag = "delta-flow-tail";
    sp.burn_in = cfg.burn_in;
    sp.seed = seed;
    sp.threads = cfg.threads;
    TailTable tab;
    try {
      tab = tail_distribution(sp, std::max(cfg.burn_in, 2), cfg.samples);
    } catch (const std::runtime_error& e) {
      s["degradations"] = json::array({std::string("no tail fit: ") + e.what()});
      return finish_delta_flow(counter, uncertified);
    }
    s["kappa_fit"] = tab.kappa;
    s["tail_constant"] = tab.constant;
    std::ostringstream os;
    os.precision(17);
    os << "n,hits,phi,ci_lo,ci_hi\n";
    for (std::size_t k = 0; k < tab.n.size(); ++k)
      os << tab.n[k] << ',' << tab.hits[k] << ',' << tab.phi[k] << ',' << tab.ci_lo[k] << ',' << tab.ci_hi[k] << '\n';
    artifact("tail.csv", "ultralog tail v1", os.str());
  }
  finish_delta_flow(counter, uncertified);
}

void Runner::finish_delta_flow(long counter, long uncertified) {
  check("correspondence counterexamples", static_cast<double>(counter), "== 0", counter == 0);
  check("uncertified trajectory points", static_cast<double>(uncertified), "== 0", uncertified == 0);
}

void Runner::kg_mc() {
  module = "dioph";
  const FlowSpec spec(cfg.m, cfg.n, field());
  const KgReport r = kg_monte_carlo(psi(), spec, cfg.trials, cfg.Q_max, cfg.precision, seed, cfg.threads, "kg-mc");
  json& s = rep.summary;
  s["psi"] = r.psi;
  s["m"] = r.m;
  s["n"] = r.n;
  s["s"] = r.s;
  s["horizon"] = r.horizon;
  s["precision"] = r.precision;
  s["persistence_from"] = r.persistence_from;
  s["persistent_fraction"] = r.persistent_fraction;
  json hist = json::object();
  for (const auto& [count, trials] : r.counts_histogram) hist[std::to_string(count)] = trials;
  s["counts_histogram"] = hist;
  s["mean_cumulative"] = r.mean_cumulative;
  const bool div = psi_divergent();
  s["divergent_series"] = div;
  // mean number of solutions with |q| in the top half of the ladder
  const double top = r.mean_cumulative.back() - r.mean_cumulative[static_cast<std::size_t>(r.persistence_from - 1)];
  s["top_half_mean_count"] = top;
  std::ostringstream os;
  os << "trial,d,count\n";
  for (std::size_t i = 0; i < r.trials.size(); ++i)
    for (std::size_t d = 0; d < r.trials[i].count_by_exponent.size(); ++d)
      os << i << ',' << d << ',' << r.trials[i].count_by_exponent[d] << '\n';
  artifact("kg_counts.csv", "ultralog kg-counts v1", os.str());
  if (div)
    check("persistent fraction (divergent psi)", r.persistent_fraction, ">= " + json(cfg.kg_divergent_min).dump(),
          r.persistent_fraction >= cfg.kg_divergent_min);
  else
    check("persistent fraction (convergent psi)", r.persistent_fraction, "<= " + json(cfg.kg_convergent_max).dump(),
          r.persistent_fraction <= cfg.kg_convergent_max);
}

// diag(X^{-c}) P Z^r with P a random nonsingular polynomial matrix of degree
// <= 2 and sum c = deg det P.
LatticeBasis random_exact_lattice(const Field& f, int r, std::mt19937_64& rng) {
  while (true) {
    PolyMatrix m(f, r, r);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j) {
        const int d = static_cast<int>(uniform_below(rng, 4)) - 1;
        std::vector<Elem> c(static_cast<std::size_t>(d + 1));
        for (auto& x : c) x = static_cast<Elem>(uniform_below(rng, f.size()));
        m(i, j) = Poly(f, c);
      }
    const int d = determinant(m).degree();
    if (d < 0) continue;
    std::vector<int> c(static_cast<std::size_t>(r), 0);
    for (int k = 0; k < d; ++k) ++c[uniform_below(rng, static_cast<std::uint64_t>(r))];
    for (auto& x : c) x = -x;
    return LatticeBasis::from_poly(m).diagonal_action(c);
  }
}

void Runner::mult_mc() {
  module = "dioph";
  const Field& f = field();
  const PsiFunction ps = psi();
  const auto trials = static_cast<std::size_t>(cfg.trials);
  std::vector<MultReport> reps(trials);
  std::vector<int> deltas(trials);
  std::vector<char> zero(trials);
  std::vector<LatticeBasis> bases(trials);
  parallel_for(trials, cfg.threads, [&](std::size_t i) {
    std::mt19937_64 rng = stream_rng(seed, "mult-mc", i);
    bases[i] = random_exact_lattice(f, cfg.r, rng);
    deltas[i] = delta(bases[i]).value;
    reps[i] = mult_solutions(bases[i], ps, cfg.Q_max);
    zero[i] = zero_block_detector(bases[i], 1, cfg.Q_max).flag;
  });
  std::ostringstream os;
  os << "trial,delta,solutions,degenerate,examined,out_of_domain,zero_block\n";
  long sols = 0, with = 0;
  for (std::size_t i = 0; i < trials; ++i) {
    os << i << ',' << deltas[i] << ',' << reps[i].solutions.size() << ',' << reps[i].degenerate << ','
       << reps[i].examined << ',' << reps[i].out_of_domain << ',' << int(zero[i]) << '\n';
    sols += static_cast<long>(reps[i].solutions.size());
    with += !reps[i].solutions.empty();
  }
  artifact("mult.csv", "ultralog mult v1", os.str());
  const auto chambers = multiplicative_scan(bases[0], ps, cfg.radius);
  std::ostringstream cs;
  cs << "order,drifts,flagged,verified,degenerate,failed\n";
  long failed = 0;
  for (const auto& c : chambers) {
    std::vector<std::string> o;
    for (int x : c.order) o.push_back(std::to_string(x));
    cs << join(o, " ") << ',' << c.drifts << ',' << c.flagged << ',' << c.verified << ',' << c.degenerate << ','
       << c.failed << '\n';
    failed += c.failed;
  }
  artifact("chambers.csv", "ultralog chambers v1", cs.str());
  json& s = rep.summary;
  s["seed"] = std::to_string(seed);
  s["r"] = cfg.r;
  s["s"] = f.size();
  s["norm_bound_exponent"] = cfg.Q_max;
  s["psi"] = ps.describe();
  s["trials"] = cfg.trials;
  s["solutions"] = sols;
  s["trials_with_solutions"] = with;
  s["fraction_with_solutions"] = static_cast<double>(with) / cfg.trials;
  s["scan_radius"] = cfg.radius;
  s["scan_chambers"] = chambers.size();
  s["scan_failed"] = failed;
}

void Runner::strong_bc() {
  module = "daniflow";
  const FlowSpec spec(cfg.m, cfg.n, field());
  const unsigned s = spec.f().size();
  const double kappa = cfg.kappa_or_default();
  SamplerSpec sp;
  sp.flow = spec;
  sp.tag = "strong-bc";
  sp.burn_in = cfg.burn_in;
  sp.seed = seed;
  sp.threads = cfg.threads;
  std::function<double(int)> phi;
  std::string source;
  if (spec.rank() == 2) {
    module = "treegeo";
    const auto ray = std::make_shared<QuotientRay>(quotient_ray(spec.f(), cfg.j_max));
    phi = [ray](int n) { return delta_tail_rank2(*ray, n); };
    source = "exact rank-2 table from the quotient ray";
  } else {
    SamplerSpec tp = sp;
    tp.tag = "strong-bc-tail";
    const auto tab = std::make_shared<TailTable>(tail_distribution(tp, std::max(cfg.burn_in, 2), cfg.samples));
    phi = [tab, s](int n) {
      if (n <= 0) return 1.0;
      if (static_cast<std::size_t>(n) < tab->phi.size() && tab->hits[static_cast<std::size_t>(n)] >= 50)
        return tab->phi[static_cast<std::size_t>(n)];
      return tab->constant * std::pow(static_cast<double>(s), -tab->kappa * n);
    };
    source = "sampled tail table, fitted beyond 50 hits";
  }
  module = "daniflow";
  std::function<int(int)> thr;
  if (cfg.thresholds == "divergent")
    thr = [kappa, s](int t) {
      return t <= 1 ? 0 : static_cast<int>(std::ceil(std::log(static_cast<double>(t)) / std::log(static_cast<double>(s)) / kappa - 1e-9));
    };
  else if (cfg.thresholds == "convergent")
    thr = [](int t) { return t; };
  else
    thr = [](int) { return 0; };
  const StrongBcResult r = strong_bc_experiment(sp, thr, phi, static_cast<int>(cfg.T), cfg.trials);
  // counts bounded: no trial gains a hit after the middle checkpoint
  const std::size_t mid = r.checkpoints.size() / 2;
  bool bounded = true;
  long max_count = 0;
  for (const auto& c : r.counts) {
    if (c.back() != c[mid]) bounded = false;
    max_count = std::max(max_count, c.back());
  }
  std::string cls;
  if (r.below_floor)
    cls = bounded ? "convergent: counts bounded" : "convergent: counts growing";
  else
    cls = "divergent: ratio median " + json(r.median_ratio).dump();
  std::ostringstream os;
  os.precision(17);
  os << "trial,N,count,denominator,ratio\n";
  for (std::size_t i = 0; i < r.counts.size(); ++i)
    for (std::size_t k = 0; k < r.checkpoints.size(); ++k)
      os << i << ',' << r.checkpoints[k] << ',' << r.counts[i][k] << ',' << r.denominators[k] << ','
         << static_cast<double>(r.counts[i][k]) / r.denominators[k] << '\n';
  artifact("bc_ratios.csv", "ultralog strong-bc v1", os.str());
  json& j = rep.summary;
  j["seed"] = std::to_string(seed);
  j["m"] = cfg.m;
  j["n"] = cfg.n;
  j["s"] = s;
  j["T"] = cfg.T;
  j["trials"] = cfg.trials;
  j["thresholds"] = cfg.thresholds;
  j["kappa"] = kappa;
  j["phi_source"] = source;
  j["denominator"] = r.denominators.back();
  j["below_floor"] = r.below_floor;
  j["median_ratio"] = r.median_ratio;
  j["ratio_quantiles"] = quantiles_json(r.terminal_ratios);
  j["max_count"] = max_count;
  j["classification"] = cls;
  if (cfg.thresholds == "divergent") {
    check("median terminal ratio", r.median_ratio,
          "in [" + json(cfg.bc_ratio_lo).dump() + ", " + json(cfg.bc_ratio_hi).dump() + "]",
          !r.below_floor && r.median_ratio >= cfg.bc_ratio_lo && r.median_ratio <= cfg.bc_ratio_hi);
  } else if (cfg.thresholds == "convergent") {
    check("convergent: counts bounded", static_cast<double>(max_count), "no hits after the middle checkpoint",
          cls == "convergent: counts bounded");
  } else {
    double worst = 0;
    for (double x : r.terminal_ratios) worst = std::max(worst, std::fabs(x - 1));
    check("ratio identically 1", worst, "== 0", worst == 0);
  }
}

void Runner::cusp_volume() {
  module = "weylvol";
  const unsigned q = cfg.residue_size();
  const bool adj = cfg.cocharacters == "adjoint";
  const RootSystemSpec spec(cfg.rank, adj ? Cocharacters::Adjoint : Cocharacters::Coroot);
  const RatioBand band = cusp_ratio_band(spec, q, cfg.cusp_t_min, cfg.cusp_t_max);
  artifact("cusp_tail.csv", "ultralog cusp-tail v1", cusp_tail_csv(band.rows));
  json& s = rep.summary;
  s["rank"] = cfg.rank;
  s["q"] = q;
  s["cocharacters"] = cfg.cocharacters;
  s["t_min"] = band.t_min;
  s["t_max"] = band.t_max;
  s["min_ratio"] = band.min_ratio;
  s["max_ratio"] = band.max_ratio;
  s["spread"] = band.spread();
  check("ratio band max/min", band.spread(), "<= " + json(cfg.cusp_spread_max).dump(), band.spread() <= cfg.cusp_spread_max);
  if (cfg.rank == 1) {
    if (prime_power(q) && cfg.cusp_t_max < cfg.j_max) {
      module = "treegeo";
      const double dev = rank1_ray_deviation(q, adj, cfg.cusp_t_max, cfg.j_max);
      s["ray_deviation"] = dev;
      check("rank-1 ray agreement up to a constant", dev, "<= 1e-9", dev <= 1e-9);
    } else {
      s["ray_deviation"] = nullptr;
      s["degradations"] = json::array({"rank-1 ray check skipped: q is not a prime power or cusp_t_max >= j_max"});
    }
  }
}

void Runner::tree_loglaw() {
  module = "treegeo";
  const QuotientRay ray = quotient_ray(residue_field(), cfg.j_max);
  const LoglawStats base = loglaw_experiment(ray, cfg.trials, cfg.T, seed, cfg.threads);
  json& s = rep.summary;
  s["q"] = ray.q;
  s["T"] = cfg.T;
  s["trials"] = cfg.trials;
  s["lY"] = ray.lY;
  s["target"] = base.target;
  s["oracle_max"] = ray.oracle_max;
  s["median_ratio"] = base.median_ratio;
  s["quartiles"] = {base.q25, base.q75};
  s["excursions"] = base.excursions;
  s["excursion_tail_rate"] = base.excursion_tail_rate;
  const double rel = std::fabs(base.median_ratio / base.target - 1);
  check("median ratio vs 1/l(Y)", base.median_ratio,
        "within " + json(cfg.loglaw_tolerance).dump() + " relative of " + json(base.target).dump(),
        rel <= cfg.loglaw_tolerance);
  json ladders = json::array();
  for (double c : cfg.ladder_c) {
    const RateLadder lad{c, 0};
    const LoglawStats st = loglaw_experiment(ray, cfg.trials, cfg.T, seed, cfg.threads, &lad);
    const bool div = lad.divergent();
    const bool ok = div ? st.last_decade_fraction >= cfg.ladder_divergent_min
                        : st.last_decade_fraction <= cfg.ladder_convergent_max;
    ladders.push_back({{"c", c},
                       {"divergent_series", div},
                       {"last_decade_fraction", st.last_decade_fraction},
                       {"classified", st.last_decade_fraction > cfg.ladder_divergent_min     ? "divergent"
                                      : st.last_decade_fraction <= cfg.ladder_convergent_max ? "convergent"
                                                                                              : "undecided"}});
    check("ladder c=" + json(c).dump() + (div ? " (divergent)" : " (convergent)"), st.last_decade_fraction,
          div ? ">= " + json(cfg.ladder_divergent_min).dump() : "<= " + json(cfg.ladder_convergent_max).dump(), ok);
  }
  s["ladders"] = ladders;
  std::ostringstream os;
  os.precision(17);
  os << "trial,ratio\n";
  for (std::size_t i = 0; i < base.ratios.size(); ++i) os << i << ',' << base.ratios[i] << '\n';
  artifact("loglaw_ratios.csv", "ultralog loglaw-ratios v1", os.str());
  if (cfg.trace_length > 0)
    artifact("trace.csv", "ultralog trace v1", trace_csv(simulate_geodesic(ray, cfg.trace_length, seed)));
}

void Runner::xi_decay() {
  module = "spectral";
  const Field& f = residue_field();
  const DecayFit fit = decay_check(f, cfg.t_max, cfg.samples, seed, cfg.threads);
  artifact("xi_decay.csv", "ultralog xi-decay v1", decay_csv(fit));
  json& s = rep.summary;
  s["q"] = fit.q;
  s["t_max"] = cfg.t_max;
  s["sigma"] = fit.sigma;
  s["varsigma"] = fit.varsigma;
  s["residuals"] = fit.residuals;
  s["varsigma_sigma1"] = fit.varsigma_sigma1;
  s["scaled_grows"] = fit.scaled_grows;
  s["scaled_slope"] = fit.scaled_slope;
  json rows = json::array();
  long closed_mismatch = 0;
  double worst_z = 0;
  for (const auto& r : fit.rows) {
    const bool match = r.xi == xi_closed_form(f.size(), r.t);
    closed_mismatch += !match;
    json row = {{"t", r.t}, {"xi", r.xi.str()}, {"depth", r.depth}, {"closed_form", match}};
    if (cfg.samples > 0) {
      // rounding floor: cells on which the integrand is constant have zero variance
      const double floor = 1e-12 * r.xi_value;
      const double z = std::fabs(r.xi_mc - r.xi_value) / std::max(r.mc_std_error, floor);
      worst_z = std::max(worst_z, z);
      row["mc"] = r.xi_mc;
      row["stderr"] = r.mc_std_error;
    }
    rows.push_back(row);
  }
  s["rows"] = rows;
  double worst_res = -std::numeric_limits<double>::infinity();
  for (double x : fit.residuals) worst_res = std::max(worst_res, x);
  check("exact Xi equals the closed form", static_cast<double>(closed_mismatch), "== 0", closed_mismatch == 0);
  check("decay bound residual", worst_res, "<= 1e-12", worst_res <= 1e-12);
  if (cfg.samples > 0) {
    s["max_mc_z"] = worst_z;
    check("Monte Carlo within " + json(cfg.mc_sigmas).dump() + " standard errors", worst_z,
          "<= " + json(cfg.mc_sigmas).dump(), worst_z <= cfg.mc_sigmas);
  }
}

void Runner::reduce_matrix() {
  module = "lattice";
  std::ifstream in(cfg.matrix);
  if (!in) throw std::runtime_error("cannot read matrix file '" + cfg.matrix + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const LatticeBasis b = LatticeBasis::parse(field(), buf.str());
  const ReducedBasis rb = reduce(b);
  const DeltaValue d = delta(b, false);
  json& s = rep.summary;
  s["rank"] = b.rank();
  s["s"] = b.field().size();
  s["delta"] = d.value;
  s["certified"] = d.certified;
  s["scale"] = rb.scale;
  s["column_degrees"] = rb.column_degrees;
  s["pivot_rows"] = rb.pivot_rows;
  s["precision_shortfall"] = rb.precision_shortfall;
  if (d.certified) {
    const auto mins = successive_minima(b);
    s["successive_minima"] = mins;
    std::ostringstream os;
    os << "i,exponent\n";
    for (std::size_t i = 0; i < mins.size(); ++i) os << i + 1 << ',' << mins[i] << '\n';
    artifact("minima.csv", "ultralog minima v1", os.str());
  }
  artifact("reduced.txt", "ultralog reduced-basis v1 (weak Popov form of X^scale B)",
           LatticeBasis::from_poly(rb.matrix).to_text());
  check("reduction certified", d.certified ? 1 : 0, "== 1", d.certified);
}

}  // namespace

RunReport run_experiment(const ExperimentConfig& cfg, bool write) {
  if (auto bad = validate(cfg); !bad.empty()) throw ConfigError(bad);
  const auto start = std::chrono::steady_clock::now();
  RunReport rep;
  rep.config = cfg.echo();
  rep.summary = json::object();
  Runner run{cfg, rep};
  run.seed = *cfg.seed;
  try {
    const std::string& x = cfg.experiment;
    if (x == "delta-flow") run.delta_flow();
    else if (x == "kg-mc") run.kg_mc();
    else if (x == "mult-mc") run.mult_mc();
    else if (x == "strong-bc") run.strong_bc();
    else if (x == "cusp-volume") run.cusp_volume();
    else if (x == "tree-loglaw") run.tree_loglaw();
    else if (x == "xi-decay") run.xi_decay();
    else run.reduce_matrix();
  } catch (const ExperimentError&) {
    throw;
  } catch (const std::exception& e) {
    throw ExperimentError(run.module, e.what(), cfg.command_line());
  }
  rep.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  rep.artifacts["report.json"] = rep.to_json().dump(2) + "\n";
  if (write) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out);
    for (const auto& [name, content] : rep.artifacts) {
      std::ofstream os(fs::path(cfg.out) / name, std::ios::binary);
      os << content;
      if (!os) throw ExperimentError("expcli", "cannot write " + (fs::path(cfg.out) / name).string(), cfg.command_line());
    }
  }
  return rep;
}

}  // namespace ultralog
