#pragma once

// SL_2(k): Iwasawa factors, the modular function of the upper Borel and the
// Harish-Chandra function Xi, exactly (by stabilized finite sums) and by
// Monte Carlo, with the decay bound Xi(g_t) <= varsigma ||g_t||^{-1/sigma}.

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "ultralog/ffield.hpp"

namespace ultralog {

using Rational = boost::multiprecision::cpp_rational;

/// 2 x 2 matrix over k, row-major.
using Mat2 = std::array<LaurentSeries, 4>;

Mat2 mat2_mul(const Mat2& x, const Mat2& y);
/// Inverse of a determinant-one matrix (the adjugate).
Mat2 sl2_inverse(const Mat2& x);
Mat2 sl2_identity(const Field& f);
/// g_t = diag(X^t, X^-t)
Mat2 diag_flow(const Field& f, int t);
Tri mat2_equals(const Mat2& x, const Mat2& y);
/// log_s of the max-norm of the entries.
int mat2_norm_exponent(const Mat2& x);

struct IwasawaFactors {
  Mat2 b;      // upper triangular
  Mat2 kappa;  // in SL_2(O)
  std::array<int, 2> diagonal_valuations{};  // valuations of b_11, b_22
};

/// g = b kappa by column operations on the bottom row (c d): if |c| <= |d|
/// clear c with (c/d) times the second column, otherwise swap the columns
/// first. The quotient c/d (or d/c) is expanded to `extra_digits` past its
/// leading term when both entries are exact. Throws PrecisionError when |c|
/// and |d| cannot be compared.
IwasawaFactors iwasawa(const Mat2& g, int extra_digits = 64);

/// The B-part p(x) of x = kappa p with kappa in K, which is the projection
/// used inside the Harish-Chandra integral (p(gk) varies with k only for this
/// order). Computed as the inverse of the B-part of x^{-1}.
Mat2 kb_projection(const Mat2& x);

/// Delta_B(diag(u, u^-1)) = |u|^2.
SPower modular_delta_b(const LaurentSeries& u);

/// log_s of Delta_B(p(x))^{-1/2} = -log_s |p(x)_11|.
int xi_integrand_exponent(const Mat2& x);

struct XiExact {
  Rational value;          // exact when stabilized
  bool stabilized = false;
  int depth = 0;           // first level N with S_N = S_{N+1} and every cylinder resolved
  std::vector<Rational> levels;  // S_1, S_2, ...
};

/// Average of the integrand over K by its level-N finite sums. The integrand
/// depends on k only through the first column k e_1, which is uniform over
/// primitive vectors of O^2; the level-N sum runs over those vectors modulo
/// X^{-N}, refining only the residue classes on which the integrand is not yet
/// constant. g must have exact entries. Throws std::runtime_error if
/// `max_depth` is reached first.
XiExact xi_exact(const Mat2& g, int max_depth = 64);
/// The level-N sum alone.
Rational xi_level_sum(const Mat2& g, int N, bool* resolved = nullptr);

/// s^{-t} (1 + 2t (q-1)/(q+1)), the value of Xi(g_t) for t >= 0.
Rational xi_closed_form(unsigned q, int t);

/// Haar-uniform element of SL_2(O) to the given precision: uniform unimodular
/// first row, completed to determinant 1, times a uniform lower unipotent.
Mat2 sample_sl2_o(const Field& f, int precision, std::mt19937_64& rng);

struct XiMonteCarlo {
  double mean = 0, std_error = 0;
  long samples = 0;
};
/// Mean of the integrand over Haar-random k. With strata = J > 0, k = R k'
/// with R = cartan_right_factor(g) and the samples of k' split evenly over the
/// cells v(k'_11) = 0, ..., J-1 and v(k'_11) >= J, weighted by their exact Haar
/// masses (stratified sampling); this keeps the rare cells with large
/// integrand in the sample.
XiMonteCarlo xi_monte_carlo(const Mat2& g, long samples, std::uint64_t seed, int precision, int threads = 1,
                            const std::string& tag = "xi-mc", int strata = 0);
/// R in SL_2(O) such that g R has a largest entry in its first column and a
/// zero beside it: a column swap and an upper unipotent. Quotients are
/// expanded to `extra_digits`.
Mat2 cartan_right_factor(const Mat2& g, int extra_digits = 64);
/// Haar-random element of SL_2(O) conditioned on v(k_11) = j (or >= j when `tail`).
Mat2 sample_sl2_o_stratum(const Field& f, int precision, int j, bool tail, std::mt19937_64& rng);
/// Haar mass of that cell.
double haar_stratum_mass(unsigned q, int j, bool tail);

struct DecayRow {
  int t = 0;
  Rational xi;
  int depth = 0;
  double xi_value = 0;
  double scaled = 0;  // Xi(g_t) s^t
  double xi_mc = 0, mc_std_error = 0;
};

struct DecayFit {
  unsigned q = 2;
  std::vector<DecayRow> rows;
  int sigma = 0;          // smallest integer with Xi(g_t) s^{t/sigma} non-increasing on the upper half of the range
  double varsigma = 0;    // max_t Xi(g_t) s^{t/sigma}
  double varsigma_sigma1 = 0;  // max_t Xi(g_t) s^t on the range
  bool scaled_grows = false;   // Xi(g_t) s^t increasing in t
  double scaled_slope = 0;     // least squares slope of Xi(g_t) s^t against t
  std::vector<double> residuals;  // log_s Xi(g_t) + t/sigma - log_s varsigma (all <= 0)
};

/// Exact Xi(g_t) for t = 0..t_max, optional Monte Carlo columns (stratified
/// over v(k_11) = 0..2t+1 and >= 2t+2).
DecayFit decay_check(const Field& f, int t_max, long mc_samples = 0, std::uint64_t seed = 0, int threads = 1);

std::string decay_csv(const DecayFit& fit);

}  // namespace ultralog
