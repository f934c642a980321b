#pragma once

// Diagonal flows on the space of unimodular lattices: the lattices Lambda_A,
// the flow g_t = diag(X^{nt} I_m, X^{-mt} I_n), the psi <-> r rate transform
// and Borel-Cantelli statistics of Delta along trajectories.

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "ultralog/lattice.hpp"

namespace ultralog {

struct FlowSpec {
  int m = 1, n = 1;
  const Field* field = nullptr;

  FlowSpec() = default;
  FlowSpec(int m_, int n_, const Field& f);
  int rank() const { return m + n; }
  const Field& f() const { return *field; }
};

/// m x n matrix over k, row-major.
using SeriesMatrix = std::vector<LaurentSeries>;

/// Basis (I_m A; 0 I_n). Throws std::invalid_argument for an entry outside O.
LatticeBasis unipotent_lattice(const SeriesMatrix& a, const FlowSpec& spec);

/// Uniform element of Mat_{m x n}(O): iid coefficients at indices 0..precision.
SeriesMatrix sample_matrix(const FlowSpec& spec, int precision, std::mt19937_64& rng);

struct DriftVector {
  std::vector<int> t;
  explicit DriftVector(std::vector<int> entries);  // throws unless sum is 0
  /// max |t_i| over t_i <= 0.
  int minus_norm() const;
};

LatticeBasis flow_apply(const LatticeBasis& b, const FlowSpec& spec, int t);
LatticeBasis flow_apply(const LatticeBasis& b, const DriftVector& drift);

// ---------------------------------------------------------------- psi and r

class RateFunction;

/// Non-increasing positive psi on [x0, inf), evaluated through
/// log_value(b) = log_s psi(s^b).
class PsiFunction {
 public:
  enum class Family { PowerLaw, LogPower, Table, FromRate };

  /// s^{-c} x^{-tau}
  static PsiFunction power_law(unsigned s, double c, double tau, double x0 = 1.0);
  /// 1 / (x (log_s x)^sigma), x0 > 1
  static PsiFunction log_power(unsigned s, double sigma, double x0);
  /// Interpolation in log-log coordinates through (x_i, psi_i), continued past
  /// the last point with the last slope. Throws when not non-increasing.
  static PsiFunction table(unsigned s, std::vector<std::pair<double, double>> points);

  Family family() const { return family_; }
  unsigned base() const { return s_; }
  double x0() const { return x0_; }
  double log_x0() const { return std::log(x0_) / std::log(static_cast<double>(s_)); }
  /// log_s psi(s^b) for b >= log_s x0.
  double log_value(double b) const;
  double operator()(double x) const;
  std::string describe() const;

 private:
  friend PsiFunction rate_to_psi(const RateFunction& r);
  Family family_ = Family::PowerLaw;
  unsigned s_ = 2;
  double x0_ = 1.0;
  std::vector<double> params_;
  std::vector<std::pair<double, double>> table_;  // (log_s x, log_s psi)
  std::shared_ptr<const RateFunction> rate_;
};

class RateFunction {
 public:
  RateFunction(int m, int n, unsigned s, double a0, std::function<double(double)> r);
  int m() const { return m_; }
  int n() const { return n_; }
  unsigned base() const { return s_; }
  double a0() const { return a0_; }
  double r(double a) const;
  double lambda(double a) const { return a - n_ * r(a); }
  double L(double a) const { return a + m_ * r(a); }
  /// Smallest a with lambda(a) >= b, by bisection.
  double lambda_inverse(double b) const;

 private:
  int m_, n_;
  unsigned s_;
  double a0_;
  std::function<double(double)> r_;
};

/// Solves psi(s^{a - n r}) = s^{-a - m r} for r by monotone bisection (1e-12).
/// Throws std::invalid_argument when psi fails monotonicity on the sampled grid.
RateFunction psi_to_rate(const PsiFunction& psi, int m, int n);
/// psi(x) = s^{-L(a)} where lambda(a) = log_s x.
PsiFunction rate_to_psi(const RateFunction& r);

struct Coc4Row {
  double horizon;    // log_s of the x horizon
  double psi_side;   // integral of (log_s x)^q psi(x) dx up to s^horizon
  double rate_side;  // integral of a^q s^{-(m+n) r(a)} da up to lambda^{-1}(horizon)
};
/// Partial integrals of both sides of the sum equivalence, by the trapezoid rule.
std::vector<Coc4Row> coc4_partial_sums(const PsiFunction& psi, const RateFunction& rate, int q,
                                       const std::vector<double>& horizons, double step = 1.0 / 16);

// ---------------------------------------------------------------- trajectories

/// Incremental reduction of g_t Lambda_A for t = 0, 1, 2, ...
///
/// Each basis column is a coefficient vector (p, q) together with e = p + A q,
/// known through a window inherited from the precision of A. The columns are
/// kept in weak Popov form for the current g_t; advancing time rescales the
/// rows and re-reduces, which costs a few column operations per step.
class TrajectoryEngine {
 public:
  TrajectoryEngine(const SeriesMatrix& a, const FlowSpec& spec);

  int time() const { return t_; }
  void advance();
  void advance_to(int t);

  /// Delta(g_t Lambda_A) at the current time with its certificate. Columns
  /// whose tracked window fell behind are recomputed from A first.
  DeltaValue delta();
  /// Extra digits of A needed to certify the current value (0 when certified).
  int precision_shortfall() const;

  struct Vector {
    std::vector<Poly> p, q;
    int norm_exponent;  // log_s of the norm in g_t coordinates
  };
  /// Basis column of smallest norm at the current time.
  Vector shortest() const;

 private:
  struct Dense {
    int lo = 0;
    std::vector<Elem> c;
    int prec = LaurentSeries::kInfinitePrecision;
    bool exact = true;
    bool empty() const { return c.empty(); }
  };
  struct Column {
    std::vector<Dense> e;
    std::vector<Poly> p, q;
  };
  static Dense to_dense(const LaurentSeries& x);
  void sub_scaled(Dense& a, Elem c, int k, const Dense& b) const;
  void column_degree(const Column& col, int& deg, int& piv) const;
  void reduce();
  void refresh_column(Column& col) const;
  int column_uncertainty(const Column& col) const;

  std::vector<Dense> a_;  // m x n entries of A, row-major
  FlowSpec spec_;
  std::vector<Column> cols_;
  int t_ = 0;
};

struct TrajectoryPoint {
  int t;
  DeltaValue delta;
};

/// Delta(g_t Lambda_A) for t = 1..T, each certified. Throws PrecisionError
/// naming the minimal sufficient precision when a step cannot be certified.
std::vector<TrajectoryPoint> delta_trajectory(const SeriesMatrix& a, const FlowSpec& spec, int T);

/// Precision of A that certifies a trajectory up to T.
inline int trajectory_precision(const FlowSpec& spec, int T) { return spec.rank() * T + spec.rank(); }

std::string trajectory_csv(const std::vector<TrajectoryPoint>& points);

// ---------------------------------------------------------------- statistics

struct TailTable {
  unsigned s = 2;
  long samples = 0;
  std::vector<int> n;
  std::vector<long> hits;     // samples with Delta >= n
  std::vector<double> phi;    // hits / samples
  std::vector<double> ci_lo, ci_hi;  // Wilson 95% intervals
  double kappa = 0, constant = 0;    // Phi(n) ~ constant * s^{-kappa n}
  int fit_bins = 0;
};

/// Tail table from observed Delta values for n = 0..n_max. Fits (kappa, C) by
/// least squares on log_s Phi over bins n >= 1 with at least `min_hits` hits;
/// throws std::runtime_error when fewer than two bins qualify.
TailTable tail_from_values(unsigned s, const std::vector<int>& deltas, int n_max, long min_hits = 50);

struct SamplerSpec {
  FlowSpec flow;
  std::string tag = "sampler";  // names the RNG streams
  int burn_in = 8;
  std::uint64_t seed = 0;
  int threads = 1;
};

/// Delta(g_{burn_in} Lambda_A) for `samples` independent uniform A.
TailTable tail_distribution(const SamplerSpec& sampler, int n_max, long samples);

struct StrongBcResult {
  int N = 0, trials = 0;
  std::vector<int> thresholds;            // r_t for t = 1..N
  std::vector<int> checkpoints;           // N values on a geometric ladder
  std::vector<double> denominators;       // sum_{t <= N} Phi(r_t) at each checkpoint
  std::vector<std::vector<long>> counts;  // per trial, hits up to each checkpoint
  std::vector<double> terminal_ratios;
  double median_ratio = 0;
  std::vector<double> ratio_quantiles;    // 10, 25, 50, 75, 90 percent
  bool below_floor = false;               // denominator under `floor`: ratios not meaningful
  std::vector<std::vector<unsigned char>> indicators;  // per trial, event at t = 1..N
};

/// For each trial x = g_{burn_in} Lambda_A, counts t <= N with Delta(g_t x) >= r_t
/// and divides by sum Phi(r_t).
StrongBcResult strong_bc_experiment(const SamplerSpec& sampler, const std::function<int(int)>& threshold,
                                    const std::function<double(int)>& phi, int N, int trials,
                                    double floor = 3.0, bool keep_indicators = false);

struct DiagnosticsReport {
  int M = 0, N = 0;
  std::vector<double> mean_counts;   // mean S_{H,N'} over trials for N' = M..N
  std::vector<double> expectations;  // E_{H,N'} = sum Phi(r_t)
  double correlation_excess = 0;     // sum_{t,u in [M,N]} cov(h_t, h_u)
  double constant = 0;               // excess / sum of means
  std::vector<std::pair<int, double>> lag_covariance;  // mean cov(h_t, h_{t+lag})
  std::vector<double> ed_partial_sums;                 // sup_u sum_t ||g_t g_u^{-1}||^{-beta}
};

/// Correlation diagnostics from the indicator matrix of a strong BC run.
DiagnosticsReport quasi_independence_report(const StrongBcResult& run, const std::function<double(int)>& phi,
                                            const FlowSpec& flow, int M, int N, double beta,
                                            const std::vector<int>& lags);

/// sup_u sum_{t=1}^{N'} s^{-beta max(m,n) |t-u|} for N' = 1..N.
std::vector<double> ed_partial_sums(const FlowSpec& flow, double beta, int N);

}  // namespace ultralog
