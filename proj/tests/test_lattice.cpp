#include "doctest.h"
#include "random_lattice.hpp"
#include "ultralog/lattice.hpp"

#include <set>

using namespace ultralog;

namespace {

LaurentSeries S(const Field& f, const char* text) { return LaurentSeries::parse(f, text); }

LatticeBasis diag(const Field& f, std::vector<int> exponents) {
  return LatticeBasis::standard(f, static_cast<int>(exponents.size())).diagonal_action(exponents);
}

std::vector<Poly> all_polys(const Field& f, int max_deg) {
  std::vector<Poly> out{Poly(f)};
  for (int d = 0; d <= max_deg; ++d) {
    std::vector<Elem> c(static_cast<std::size_t>(d + 1), 0);
    while (true) {
      if (c.back() != 0) out.emplace_back(f, c);
      std::size_t i = 0;
      while (i < c.size() && ++c[i] == f.size()) c[i++] = 0;
      if (i == c.size()) break;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("weak_popov examples") {
  const Field& f2 = Field::get(2);
  const ReducedBasis id = weak_popov(PolyMatrix::identity(f2, 3));
  CHECK(id.matrix == PolyMatrix::identity(f2, 3));
  CHECK(id.column_degrees == std::vector<int>{0, 0, 0});

  PolyMatrix m(f2, 2, 2);
  m(0, 0) = Poly(f2, {0, 0, 1});
  m(1, 0) = Poly(f2, {1});
  m(0, 1) = Poly(f2, {1, 0, 1});
  m(1, 1) = Poly(f2, {1});
  const ReducedBasis r = weak_popov(m, true);
  std::vector<int> d = r.column_degrees;
  std::sort(d.begin(), d.end());
  CHECK(d == std::vector<int>{0, 0});
  CHECK(r.pivot_rows[0] != r.pivot_rows[1]);
  CHECK(m * r.transform == r.matrix);

  PolyMatrix dm(f2, 2, 2);
  dm(0, 0) = Poly::monomial(f2, 1, 3);
  dm(1, 1) = Poly::monomial(f2, 1, 5);
  const ReducedBasis dr = weak_popov(dm);
  CHECK(dr.matrix == dm);
  CHECK(dr.column_degrees == std::vector<int>{3, 5});

  PolyMatrix sing(f2, 2, 2);
  sing(0, 0) = Poly(f2, {1, 1});
  sing(0, 1) = Poly(f2, {1, 0, 1});
  CHECK_THROWS_AS(weak_popov(sing), std::domain_error);
}

TEST_CASE("delta examples") {
  const Field& f2 = Field::get(2);
  for (int r = 1; r <= 4; ++r) CHECK(delta(LatticeBasis::standard(f2, r)).value == 0);
  const DeltaValue d = delta(diag(f2, {-2, 2}));
  CHECK(d.value == 2);
  CHECK(d.certified);

  // m = n = 1, A = X^-1, t = 1: basis g_1 (1 A; 0 1) = (X 1; 0 X^-1).
  const LatticeBasis g(f2, 2, {S(f2, "X"), S(f2, "1"), S(f2, "0"), S(f2, "X^-1")});
  CHECK(delta(g).value == 0);
  // independent check over (p, q) with deg <= 3
  int best = INT32_MAX;
  const LaurentSeries a = S(f2, "X^-1");
  for (const Poly& p : all_polys(f2, 3))
    for (const Poly& q : all_polys(f2, 3)) {
      if (p.is_zero() && q.is_zero()) continue;
      const LaurentSeries lq = LaurentSeries::from_poly(q);
      const std::vector<LaurentSeries> v{(LaurentSeries::from_poly(p) + a * lq).shifted(1), lq.shifted(-1)};
      best = std::min(best, norm_exponent(v));
    }
  CHECK(best == 0);
}

TEST_CASE("successive_minima examples") {
  const Field& f3 = Field::get(3);
  CHECK(successive_minima(LatticeBasis::standard(f3, 2)) == std::vector<int>{0, 0});
  CHECK(successive_minima(diag(f3, {-3, 3})) == std::vector<int>{-3, 3});
  std::mt19937_64 rng(19);
  for (int i = 0; i < 40; ++i) {
    const LatticeBasis b = testgen::random_unimodular(f3, 3, 3, rng);
    const auto mins = successive_minima(b);
    CHECK(std::accumulate(mins.begin(), mins.end(), 0) == 0);
    CHECK(mins.front() == shortest_norm_by_enumeration(b));
  }
}

TEST_CASE("enumerate_short_vectors examples") {
  for (unsigned s : {2u, 3u, 4u}) {
    const Field& f = s == 4 ? Field::get(2, 2) : Field::get(s);
    const LatticeBasis z2 = LatticeBasis::standard(f, 2);
    CHECK(enumerate_short_vectors(z2, -1).empty());
    const auto unit = enumerate_short_vectors(z2, 0);
    CHECK(unit.size() == s * s - 1);
    std::set<std::string> distinct;
    for (const auto& v : unit) {
      CHECK(norm_exponent(v) == 0);
      distinct.insert(v[0].to_string() + "|" + v[1].to_string());
    }
    CHECK(distinct.size() == s * s - 1);

    const auto small = enumerate_short_vectors(diag(f, {-1, 1}), -1);
    CHECK(small.size() == s - 1);
    for (const auto& v : small) {
      CHECK(v[1].is_known_zero());
      CHECK(v[0].valuation() == 1);
      CHECK(v[0].last_index() == 1);
    }
  }
  CHECK_THROWS_AS(enumerate_short_vectors(diag(Field::get(2), {-12, 12}), 12, 1000), std::length_error);
}

TEST_CASE("delta matches enumeration on random unimodular lattices") {
  std::mt19937_64 rng(2024);
  for (unsigned s : {2u, 3u})
    for (int r : {2, 3})
      for (int i = 0; i < 40; ++i) {
        const Field& f = Field::get(s);
        const LatticeBasis b = testgen::random_unimodular(f, r, r == 2 ? 4 : 2, rng);
        REQUIRE(b.unimodular());
        const DeltaValue d = delta(b);
        CHECK(d.certified);
        CHECK(d.value >= 0);
        CHECK(d.value == -shortest_norm_by_enumeration(b));
      }
}

TEST_CASE("delta scaling, basis invariance and idempotence") {
  std::mt19937_64 rng(77);
  for (unsigned s : {2u, 3u, 5u}) {
    const Field& f = Field::get(s);
    for (int i = 0; i < 60; ++i) {
      const int r = 2 + i % 3;
      const LatticeBasis b = testgen::random_unimodular(f, r, 3, rng);
      const int d0 = delta(b).value;
      for (int c : {-3, -1, 2, 5}) CHECK(delta(b.scaled(c)).value == d0 - c);

      const PolyMatrix u = testgen::random_gl(f, r, 2, 6, rng);
      const LatticeBasis bu = b.times(u);
      CHECK(delta(bu).value == d0);
      CHECK(successive_minima(bu) == successive_minima(b));

      const ReducedBasis red = reduce(b);
      std::set<int> piv(red.pivot_rows.begin(), red.pivot_rows.end());
      CHECK(piv.size() == static_cast<std::size_t>(r));
      const int sum = std::accumulate(red.column_degrees.begin(), red.column_degrees.end(), 0);
      CHECK(sum == determinant(red.matrix).degree());
      const ReducedBasis again = weak_popov(red.matrix);
      CHECK(again.matrix == red.matrix);
    }
  }
}

TEST_CASE("truncated inputs carry a certificate") {
  const Field& f = Field::get(2);
  std::mt19937_64 rng(5);
  std::vector<Elem> coeffs(200);
  for (auto& c : coeffs) c = rng() % 2;
  const LaurentSeries a_exact = LaurentSeries::from_coeffs(f, 1, coeffs);
  for (int t = 1; t <= 12; ++t) {
    const std::vector<int> g{t, -t};
    auto basis = [&](const LaurentSeries& a) {
      return LatticeBasis(f, 2, {LaurentSeries::monomial(f, 1, 0), a, LaurentSeries::zero(f),
                                 LaurentSeries::monomial(f, 1, 0)})
          .diagonal_action(g);
    };
    const int exact = delta(basis(a_exact)).value;
    // window of 2t digits suffices in rank 2
    const DeltaValue ok = delta(basis(a_exact.truncated(2 * t)), false);
    CHECK(ok.certified);
    CHECK(ok.value == exact);
    // a window reaching only t digits leaves X^t A undetermined
    bool certified = true;
    try {
      certified = delta(basis(a_exact.truncated(t - 1)), false).certified;
    } catch (const PrecisionError&) {
      certified = false;  // the truncated basis itself went singular
    }
    CHECK_FALSE(certified);
    CHECK_THROWS_AS(delta(basis(a_exact.truncated(t - 1))), PrecisionError);
  }
}

TEST_CASE("matrix text format round-trips") {
  const Field& f = Field::get(3);
  std::mt19937_64 rng(8);
  for (int i = 0; i < 20; ++i) {
    const LatticeBasis b = testgen::random_unimodular(f, 3, 2, rng);
    const LatticeBasis back = LatticeBasis::parse(f, b.to_text());
    CHECK(back.to_text() == b.to_text());
  }
  CHECK(LatticeBasis::parse(f, "# comment\nX^-1 (prec 4), 1\n0, X\n").precision() == 4);
  CHECK_THROWS_AS(LatticeBasis::parse(f, "1, 0\n0\n"), std::invalid_argument);
  CHECK_THROWS_AS(LatticeBasis::parse(f, "1, 0\n0, 0\n"), std::invalid_argument);
}
