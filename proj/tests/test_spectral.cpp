#include "doctest.h"
#include "ultralog/spectral.hpp"

#include <cmath>

using namespace ultralog;

namespace {

LaurentSeries S(const Field& f, const char* text) { return LaurentSeries::parse(f, text); }

Mat2 upper(const Field& f, const LaurentSeries& u) {
  return {LaurentSeries::monomial(f, 1, 0), u, LaurentSeries::zero(f), LaurentSeries::monomial(f, 1, 0)};
}
Mat2 lower(const Field& f, const LaurentSeries& u) {
  return {LaurentSeries::monomial(f, 1, 0), LaurentSeries::zero(f), u, LaurentSeries::monomial(f, 1, 0)};
}

// random exact element of SL_2(O): a word in elementary matrices with entries
// that are polynomials in X^-1
Mat2 random_k(const Field& f, std::mt19937_64& rng) {
  Mat2 k = sl2_identity(f);
  for (int i = 0; i < 4; ++i) {
    std::vector<Elem> c(3);
    for (auto& x : c) x = static_cast<Elem>(rng() % f.size());
    const LaurentSeries u = LaurentSeries::from_coeffs(f, 0, c);
    k = mat2_mul(k, i % 2 ? upper(f, u) : lower(f, u));
  }
  return k;
}

bool in_sl2_o(const Mat2& k) {
  for (const auto& e : k)
    if (!e.is_known_zero() && !e.is_zero_in_window() && e.valuation() < 0) return false;
  const LaurentSeries det = k[0] * k[3] - k[1] * k[2];
  return det.equals(LaurentSeries::monomial(k[0].field(), 1, 0)) == Tri::True;
}

}  // namespace

TEST_CASE("iwasawa examples and round trip") {
  const Field& f = Field::get(3);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 20; ++i) {
    const Mat2 k = random_k(f, rng);
    const IwasawaFactors iw = iwasawa(k);
    CHECK(iw.diagonal_valuations[0] == 0);
    CHECK(iw.diagonal_valuations[1] == 0);
    CHECK(mat2_equals(mat2_mul(iw.b, iw.kappa), k) != Tri::False);
  }
  for (int t = -3; t <= 3; ++t) {
    const IwasawaFactors iw = iwasawa(diag_flow(f, t));
    CHECK(mat2_equals(iw.b, diag_flow(f, t)) == Tri::True);
    CHECK(mat2_equals(iw.kappa, sl2_identity(f)) == Tri::True);
  }
  const Mat2 lo = lower(f, S(f, "X^2 + 1"));
  const IwasawaFactors iw = iwasawa(lo);
  CHECK(mat2_equals(mat2_mul(iw.b, iw.kappa), lo) != Tri::False);
  CHECK(in_sl2_o(iw.kappa));
  CHECK(iw.b[2].is_known_zero());
  // inexact entries
  for (int i = 0; i < 30; ++i) {
    const Mat2 g = mat2_mul(mat2_mul(sample_sl2_o(f, 20, rng), diag_flow(f, i % 5)), sample_sl2_o(f, 20, rng));
    const IwasawaFactors w = iwasawa(g);
    CHECK(in_sl2_o(w.kappa));
    CHECK(mat2_equals(mat2_mul(w.b, w.kappa), g) != Tri::False);
  }
  const Mat2 bad = {S(f, "1"), S(f, "0"), LaurentSeries::from_coeffs(f, 0, {0}, 2),
                    LaurentSeries::from_coeffs(f, 0, {0}, 2)};
  CHECK_THROWS_AS(iwasawa(bad), PrecisionError);
}

TEST_CASE("modular_delta_b examples") {
  const Field& f = Field::get(2);
  CHECK(modular_delta_b(S(f, "X^3")) == SPower{false, 6});
  CHECK(modular_delta_b(S(f, "1 + X^-1")) == SPower{false, 0});
  CHECK(modular_delta_b(S(f, "X^-1")) == SPower{false, -2});
}

TEST_CASE("Xi exact: identity, closed form, symmetry") {
  for (unsigned p : {2u, 3u}) {
    const Field& f = Field::get(p);
    const XiExact id = xi_exact(sl2_identity(f));
    CHECK(id.stabilized);
    CHECK(id.value == 1);
    for (int t = 0; t <= 6; ++t) {
      const XiExact x = xi_exact(diag_flow(f, t));
      CHECK(x.stabilized);
      CHECK(x.value == xi_closed_form(p, t));
      CHECK(xi_exact(diag_flow(f, -t)).value == x.value);
      CHECK(x.value > 0);
      CHECK(x.value <= 1);
    }
    // successive ratios tend to 1/s
    const double r = (xi_closed_form(p, 40) / xi_closed_form(p, 39)).convert_to<double>();
    CHECK(r == doctest::Approx(1.0 / p).epsilon(0.03));
  }
}

TEST_CASE("Xi exact is K-bi-invariant") {
  const Field& f = Field::get(2);
  std::mt19937_64 rng(9);
  for (int t = 0; t <= 3; ++t)
    for (int i = 0; i < 4; ++i) {
      const Mat2 g = mat2_mul(mat2_mul(random_k(f, rng), diag_flow(f, t)), random_k(f, rng));
      CHECK(xi_exact(g).value == xi_closed_form(2, t));
    }
}

TEST_CASE("level sums agree with the sum over SL_2(O / X^-N)") {
  const Field& f = Field::get(2);
  const unsigned q = 2;
  for (int N = 1; N <= 3; ++N)
    for (int t = 0; t <= 2; ++t) {
      const Mat2 g = diag_flow(f, t);
      Rational total = 0;
      long count = 0;
      const int digits = 4 * N;
      for (long code = 0; code < (1L << digits); ++code) {
        std::vector<Elem> e[4];
        for (int j = 0; j < 4; ++j)
          for (int i = 0; i < N; ++i) e[j].push_back(static_cast<Elem>((code >> (j * N + i)) & 1));
        Mat2 k;
        for (int j = 0; j < 4; ++j) k[j] = LaurentSeries::from_coeffs(f, 0, e[j]);
        const LaurentSeries det = k[0] * k[3] - k[1] * k[2] - LaurentSeries::monomial(f, 1, 0);
        if (!det.is_known_zero() && det.valuation() < N) continue;
        ++count;
        const int ex = xi_integrand_exponent(mat2_mul(g, k));
        total += ex >= 0 ? Rational(1 << ex) : Rational(1, 1 << -ex);
      }
      CHECK(count == (1L << (3 * N - 2)) * 3);  // |SL_2(F_2[X]/X^N)| = q^{3N-2}(q^2-1)
      CHECK(total / count == xi_level_sum(g, N));
      (void)q;
    }
}

TEST_CASE("Monte Carlo agrees with the exact value") {
  for (unsigned p : {2u, 3u}) {
    const Field& f = Field::get(p);
    for (int t : {0, 1, 3, 5}) {
      const XiMonteCarlo mc = xi_monte_carlo(diag_flow(f, t), 20000, 17, 4 * t + 16, 4);
      const double exact = xi_closed_form(p, t).convert_to<double>();
      CHECK(std::fabs(mc.mean - exact) <= 3 * mc.std_error + 1e-15);
    }
  }
  const Field& f = Field::get(2);
  const XiMonteCarlo a = xi_monte_carlo(diag_flow(f, 2), 500, 3, 24, 1);
  const XiMonteCarlo b = xi_monte_carlo(diag_flow(f, 2), 500, 3, 24, 4);
  CHECK(a.mean == b.mean);
}

TEST_CASE("stratified sampler: cells and masses") {
  for (unsigned p : {2u, 3u}) {
    const Field& f = Field::get(p);
    double total = 0;
    for (int j = 0; j < 6; ++j) total += haar_stratum_mass(p, j, false);
    total += haar_stratum_mass(p, 6, true);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
    std::mt19937_64 rng(p);
    for (int j = 0; j <= 4; ++j) {
      const Mat2 k = sample_sl2_o_stratum(f, 30, j, j == 4, rng);
      for (const auto& e : k) CHECK((e.is_zero_in_window() || e.valuation() >= 0));
      CHECK((k[0] * k[3] - k[1] * k[2]).equals(LaurentSeries::monomial(f, 1, 0)) != Tri::False);
      if (j < 4) CHECK(k[0].valuation() == j);
      if (j == 4) CHECK((k[0].is_zero_in_window() || k[0].valuation() >= 4));
    }
    // plain sampler frequencies of v(k_11) against the cell masses
    long hits[3] = {0, 0, 0};
    const int N = 20000;
    for (int i = 0; i < N; ++i) {
      const LaurentSeries a = sample_sl2_o(f, 8, rng)[0];
      if (!a.is_zero_in_window() && a.valuation() < 3) ++hits[a.valuation()];
    }
    for (int j = 0; j < 3; ++j) {
      const double m = haar_stratum_mass(p, j, false);
      CHECK(std::fabs(hits[j] / double(N) - m) <= 4 * std::sqrt(m * (1 - m) / N));
    }
  }
}

TEST_CASE("stratified Monte Carlo on non-diagonal elements") {
  for (unsigned p : {2u, 3u}) {
    const Field& f = Field::get(p);
    std::mt19937_64 rng(40 + p);
    for (int t : {2, 4, 6}) {
      const Mat2 g = mat2_mul(mat2_mul(random_k(f, rng), diag_flow(f, t)), random_k(f, rng));
      const double exact = xi_closed_form(p, t).convert_to<double>();
      const XiMonteCarlo mc = xi_monte_carlo(g, 7000, 23, 4 * t + 16, 4, "strat", 2 * t + 2);
      CAPTURE(p);
      CAPTURE(t);
      CAPTURE(mc.mean);
      CAPTURE(exact);
      // the integrand is constant on the aligned cells, so the error is rounding
      CHECK(std::fabs(mc.mean - exact) <= 3 * mc.std_error + 1e-12 * exact);
    }
  }
}

TEST_CASE("decay_check") {
  for (unsigned p : {2u, 3u}) {
    const DecayFit fit = decay_check(Field::get(p), 8);
    CHECK(fit.sigma == 2);
    CHECK(fit.varsigma >= 1);
    CHECK(fit.scaled_grows);
    CHECK(fit.scaled_slope == doctest::Approx(2.0 * (p - 1) / (p + 1)).epsilon(1e-9));
    for (double r : fit.residuals) CHECK(r <= 1e-12);
    for (const auto& row : fit.rows)
      CHECK(row.xi_value <= fit.varsigma * std::pow(p, -static_cast<double>(row.t) / fit.sigma) * (1 + 1e-12));
  }
}
