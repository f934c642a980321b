#pragma once

// Direct Diophantine search: psi-approximation of matrices, the
// Khintchine-Groshev dichotomy, multiplicative approximation of lattices and
// the check that large Delta along g_t yields actual solutions.

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ultralog/daniflow.hpp"

namespace ultralog {

constexpr int kZeroNorm = INT32_MIN;  // log_s of the norm of 0

struct BestApprox {
  std::vector<Poly> p;
  int error_exponent = kZeroNorm;  // log_s |p + A q|
  bool exact = true;               // false: only an upper bound (window ran out)
};

/// p = -floor(A q) row by row; the error is the norm of the fractional part.
/// Throws PrecisionError when the fractional norm is not determined.
BestApprox best_integer_approx(const SeriesMatrix& a, const FlowSpec& spec, const std::vector<Poly>& q);

struct ApproxSolution {
  std::vector<Poly> q, p;
  int error_exponent = kZeroNorm;  // log_s |p + A q|
  bool error_exact = true;         // false: error_exponent is an upper bound
  int q_exponent = 0;              // log_s |q|
};

/// Every q in Z^n with |q| <= s^{q_exp_max}, taken up to F_s^* scalars, with
/// |p + A q|^m < psi(|q|^n) for the best p. Throws std::length_error when the
/// search exceeds `cap` vectors and PrecisionError when admission of some q
/// cannot be decided from the window of A.
std::vector<ApproxSolution> kg_solutions(const SeriesMatrix& a, const FlowSpec& spec, const PsiFunction& psi,
                                         int q_exp_max, std::size_t cap = std::size_t{1} << 24);

struct KgTrial {
  std::vector<long> count_by_exponent;  // solutions with |q| = s^d, d = 0..horizon
  long total = 0;
  bool persistent = false;
};

struct KgReport {
  std::string psi;
  int m = 1, n = 1;
  unsigned s = 2;
  int horizon = 0;                  // log_s of the bound on |q|
  int precision = 0;
  int persistence_from = 0;         // smallest d counted as persistent
  std::vector<KgTrial> trials;
  double persistent_fraction = 0;
  std::map<long, long> counts_histogram;  // total count -> trials
  std::vector<double> mean_cumulative;    // mean solutions with |q| <= s^d
};

/// Samples A uniformly at the given precision. A trial is persistent when it
/// has a solution with log_s |q| in (horizon/2, horizon], the top rung of the
/// geometric ladder s^1, s^2, ..., s^horizon.
KgReport kg_monte_carlo(const PsiFunction& psi, const FlowSpec& spec, int trials, int horizon, int precision,
                        std::uint64_t seed, int threads = 1, const std::string& tag = "kg-mc");

struct MultiplicativeSolution {
  std::vector<LaurentSeries> v;
  int product_exponent = 0;  // log_s Pi(v)
  int norm_exponent = 0;     // log_s |v|
};

struct MultReport {
  std::vector<MultiplicativeSolution> solutions;  // nondegenerate, up to F_s^* scalars
  long degenerate = 0;      // vectors with a zero coordinate, up to scalars
  long examined = 0;        // nonzero vectors up to scalars
  long out_of_domain = 0;   // psi undefined at |v|
};

/// Exhaustive over lattice vectors with |v| <= s^{norm_exp}: Pi(v) <= |v| psi(|v|).
/// `log_psi(k)` returns log_s psi(s^k), -infinity for psi = 0 and NaN where psi
/// is undefined.
MultReport mult_solutions(const LatticeBasis& b, const std::function<double(int)>& log_psi, int norm_exp,
                          std::size_t cap = 4'000'000);
MultReport mult_solutions(const LatticeBasis& b, const PsiFunction& psi, int norm_exp, std::size_t cap = 4'000'000);

struct CorrespondenceRow {
  int t = 0;
  int delta = 0;
  int threshold = 0;  // ceil r(mnt)
  bool flagged = false;
  bool verified = false;
  int q_exponent = 0, error_exponent = kZeroNorm;
  std::vector<Poly> q, p;
  bool exhaustive_checked = false;  // a separate search over the window also found a solution
  std::string note;
};

struct CorrespondenceReport {
  std::vector<CorrespondenceRow> rows;
  int flagged = 0, verified = 0, counterexamples = 0, skipped = 0;
};

/// For t = 1..T with Delta(g_t Lambda_A) >= ceil r(mnt), takes the shortest
/// vector of g_t Lambda_A, recomputes p + A q from A and checks it lies in the
/// window |q| <= s^{mt-R}, |p + A q| <= s^{-R-nt} and satisfies
/// |p + A q|^m <= psi(|q|^n). Times with |q| <= s^{exhaustive_q_exp} are also
/// confirmed by an independent search over q. Below x0, psi is continued by the
/// constant psi(x0).
CorrespondenceReport correspondence_check(const SeriesMatrix& a, const FlowSpec& spec, const PsiFunction& psi,
                                          int T, int exhaustive_q_exp = 6);

struct ChamberRow {
  std::vector<int> order;  // permutation sorting t ascending
  int drifts = 0, flagged = 0, verified = 0, degenerate = 0, failed = 0;
};

/// Report-only scan of drifts t with |t_i| <= radius and sum 0: flag when
/// Delta(g_t Lambda) >= ceil r(||t||_-) with r from psi for (rank-1, 1), and
/// test the shortest vector against Pi(v) <= |v| psi(|v|). Exact bases only.
std::vector<ChamberRow> multiplicative_scan(const LatticeBasis& b, const PsiFunction& psi, int radius);

struct ZeroBlockResult {
  bool flag = false;
  bool exact = true;   // false: the first block vanished only inside the window
  std::vector<Poly> q;
};

/// Searches q with |q| <= s^{q_exp_max} for A q in Z^m, i.e. a vector of
/// Lambda_A with zero first block.
ZeroBlockResult zero_block_detector(const SeriesMatrix& a, const FlowSpec& spec, int q_exp_max);
/// Same for a general exact lattice: nonzero v with |v| <= s^{norm_exp} and
/// v_1 = ... = v_m = 0.
ZeroBlockResult zero_block_detector(const LatticeBasis& b, int m, int norm_exp);

std::string solutions_csv(const std::vector<ApproxSolution>& sols);

}  // namespace ultralog
