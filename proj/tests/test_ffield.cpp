#include "doctest.h"
#include "ultralog/ffield.hpp"

#include <random>

using namespace ultralog;

namespace {

LaurentSeries S(const Field& f, const char* text) { return LaurentSeries::parse(f, text); }

LaurentSeries random_series(const Field& f, std::mt19937_64& rng, bool exact) {
  const int first = static_cast<int>(rng() % 9) - 4;
  const int len = static_cast<int>(rng() % 8) + 1;
  std::vector<Elem> c(static_cast<std::size_t>(len));
  for (auto& x : c) x = static_cast<Elem>(rng() % f.size());
  if (c[0] == 0) c[0] = 1;
  const int prec = exact ? LaurentSeries::kInfinitePrecision : first + len - 1 + static_cast<int>(rng() % 3);
  return LaurentSeries::from_coeffs(f, first, c, prec);
}

}  // namespace

TEST_CASE("field construction validates parameters") {
  CHECK_THROWS_AS(Field::get(4), std::invalid_argument);
  CHECK_THROWS_AS(Field::get(2, 0), std::invalid_argument);
  CHECK_THROWS_AS(Field::get(2, 17), std::invalid_argument);
  const Field& f9 = Field::get(3, 2);
  CHECK(f9.size() == 9);
  CHECK(f9.modulus().size() == 3);
  CHECK(&Field::get(3, 2) == &f9);
}

TEST_CASE("field axioms hold exhaustively for small fields") {
  for (auto [p, e] : {std::pair{2u, 1u}, {3u, 1u}, {2u, 2u}, {5u, 1u}, {7u, 1u}, {2u, 3u}, {3u, 2u}}) {
    const Field& f = Field::get(p, e);
    const Elem s = f.size();
    for (Elem a = 0; a < s; ++a) {
      CHECK(f.add(a, 0) == a);
      CHECK(f.mul(a, 1) == a);
      CHECK(f.add(a, f.neg(a)) == 0);
      if (a != 0) CHECK(f.mul(a, f.inv(a)) == 1);
      for (Elem b = 0; b < s; ++b) {
        CHECK(f.add(a, b) == f.add(b, a));
        CHECK(f.mul(a, b) == f.mul(b, a));
        for (Elem c = 0; c < s; ++c) {
          CHECK(f.mul(a, f.add(b, c)) == f.add(f.mul(a, b), f.mul(a, c)));
          CHECK(f.mul(f.mul(a, b), c) == f.mul(a, f.mul(b, c)));
          CHECK(f.add(f.add(a, b), c) == f.add(a, f.add(b, c)));
        }
      }
    }
  }
}

TEST_CASE("field axioms sampled for larger fields") {
  std::mt19937_64 rng(7);
  for (auto [p, e] : {std::pair{2u, 8u}, {3u, 5u}, {251u, 1u}, {2u, 16u}}) {
    const Field& f = Field::get(p, e);
    for (int i = 0; i < 2000; ++i) {
      const Elem a = rng() % f.size(), b = rng() % f.size(), c = rng() % f.size();
      CHECK(f.mul(a, f.add(b, c)) == f.add(f.mul(a, b), f.mul(a, c)));
      CHECK(f.mul(f.mul(a, b), c) == f.mul(a, f.mul(b, c)));
      if (a != 0) CHECK(f.mul(a, f.inv(a)) == 1);
    }
  }
}

TEST_CASE("poly_arith examples") {
  const Field& f2 = Field::get(2);
  const Poly xp1(f2, {1, 1});
  CHECK(xp1 * xp1 == Poly(f2, {1, 0, 1}));
  CHECK(xp1 + Poly(f2) == xp1);

  const Field& f3 = Field::get(3);
  auto [q, r] = divmod(Poly(f3, {1, 0, 1}), Poly(f3, {1, 1}));
  CHECK(q == Poly(f3, {2, 1}));
  CHECK(r == Poly(f3, {2}));
  CHECK_THROWS_AS(divmod(xp1, Poly(f2)), std::domain_error);
}

TEST_CASE("divmod recomposes on random inputs") {
  const Field& f = Field::get(5);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    std::vector<Elem> a(rng() % 9), b(rng() % 5 + 1);
    for (auto& x : a) x = rng() % 5;
    for (auto& x : b) x = rng() % 5;
    b.back() = 1 + rng() % 4;
    const Poly pa(f, a), pb(f, b);
    auto [q, r] = divmod(pa, pb);
    CHECK(q * pb + r == pa);
    CHECK(r.degree() < pb.degree());
  }
}

TEST_CASE("laurent_arith examples") {
  const Field& f2 = Field::get(2);
  const LaurentSeries a = S(f2, "1 + X^-1");  // 1 - X^-1 in characteristic 2
  const LaurentSeries inv = a.inverse(8);
  CHECK(inv.to_string() == "1 + X^-1 + X^-2 + X^-3 + X^-4 + X^-5 + X^-6 + X^-7 + X^-8 (prec 8)");
  const LaurentSeries residual = a * inv - LaurentSeries::monomial(f2, 1, 0);
  CHECK(residual.is_zero_in_window());
  CHECK(residual.norm_at_most(9) == Tri::True);
  CHECK(residual.norm_at_most(10) == Tri::Indeterminate);
  CHECK((a * inv).equals(LaurentSeries::monomial(f2, 1, 0)) == Tri::Indeterminate);

  const Field& f3 = Field::get(3);
  const LaurentSeries b = S(f3, "X + 2*X^-3 (prec 6)");
  const LaurentSeries z = b + (-b);
  CHECK(z.is_zero_in_window());
  const LaurentSeries e = S(f3, "X + X^-1");
  CHECK((e + (-e)).is_known_zero());
  CHECK((e * S(f3, "X^-1")).to_string() == "1 + X^-2");
}

TEST_CASE("precision windows propagate pessimistically") {
  const Field& f = Field::get(3);
  const LaurentSeries a = S(f, "X + 1 + X^-2 (prec 4)");
  const LaurentSeries b = S(f, "X^2");
  const LaurentSeries ab = a * b;
  CHECK(ab.precision() == 2);
  CHECK_THROWS_AS(ab.coeff(3), PrecisionError);
  const LaurentSeries sum = a + S(f, "X^-1 (prec 2)");
  CHECK(sum.precision() == 2);
  // inverse of an inexact series: order -1, relative precision 5
  const LaurentSeries ai = a.inverse();
  CHECK(ai.valuation() == 1);
  CHECK(ai.precision() == 6);
  CHECK((a * ai - LaurentSeries::monomial(f, 1, 0)).norm_at_most(6) == Tri::True);
  CHECK_THROWS_AS(S(f, "0 (prec 3)").inverse(), PrecisionError);
  CHECK_THROWS_AS(LaurentSeries::zero(f).inverse(), std::domain_error);
}

TEST_CASE("valuation and absolute value") {
  const Field& f2 = Field::get(2);
  const LaurentSeries a = S(f2, "X^2 + 1");
  CHECK(a.valuation() == -2);
  CHECK(a.abs_value() == SPower{false, 2});
  CHECK(S(f2, "X^-3").valuation() == 3);
  CHECK(S(f2, "X^-3").abs_value().value(2) == doctest::Approx(0.125));
  CHECK(LaurentSeries::zero(f2).valuation() == LaurentSeries::kInfiniteOrder);
  CHECK(LaurentSeries::zero(f2).abs_value().zero);
  CHECK_THROWS_AS(S(f2, "0 (prec 5)").valuation(), PrecisionError);
}

TEST_CASE("polynomial_part examples") {
  const Field& f = Field::get(3);
  auto [p1, r1] = S(f, "X + X^-2").polynomial_part();
  CHECK(p1 == Poly::x(f));
  CHECK(r1.to_string() == "X^-2");
  auto [p2, r2] = S(f, "2*X^3 + X").polynomial_part();
  CHECK(p2 == Poly(f, {0, 1, 0, 2}));
  CHECK(r2.is_known_zero());
  auto [p3, r3] = S(f, "X^-1").polynomial_part();
  CHECK(p3.is_zero());
  CHECK(r3.to_string() == "X^-1");
}

TEST_CASE("ultrametric inequality and multiplicativity on random series") {
  std::mt19937_64 rng(11);
  for (unsigned s : {2u, 3u, 5u}) {
    const Field& f = Field::get(s);
    for (int i = 0; i < 500; ++i) {
      const LaurentSeries a = random_series(f, rng, true), b = random_series(f, rng, true);
      const LaurentSeries sum = a + b;
      const int va = a.valuation(), vb = b.valuation();
      if (!sum.is_known_zero()) {
        CHECK(sum.valuation() >= std::min(va, vb));
        if (va != vb) CHECK(sum.valuation() == std::min(va, vb));
      }
      CHECK((a * b).valuation() == va + vb);
      auto [poly, frac] = a.polynomial_part();
      CHECK((LaurentSeries::from_poly(poly) + frac).equals(a) == Tri::True);
      if (!frac.is_known_zero()) CHECK(frac.valuation() >= 1);
    }
  }
}

TEST_CASE("text rendering round-trips") {
  std::mt19937_64 rng(5);
  const Field& f9 = Field::get(3, 2);
  for (int i = 0; i < 300; ++i) {
    const LaurentSeries a = random_series(f9, rng, i % 2 == 0);
    const LaurentSeries back = LaurentSeries::parse(f9, a.to_string());
    CHECK(back.to_string() == a.to_string());
    CHECK(back.precision() == a.precision());
  }
  CHECK_THROWS_AS(LaurentSeries::parse(Field::get(2), "3*X"), std::invalid_argument);
  CHECK_THROWS_AS(LaurentSeries::parse(Field::get(2), "X^ (prec 2)"), std::invalid_argument);
}
