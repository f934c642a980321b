#pragma once

// Exact arithmetic in F_s, F_s[X] and truncated Laurent series F_s((X^-1)).
//
// Index convention for series: a = sum_{i >= v} a_i X^{-i}. Index i is the
// exponent of X^{-1}, so polynomials live at indices <= 0, v(a) is the index of
// the first nonzero coefficient and |a| = s^{-v(a)}.

#include <climits>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ultralog {

using Elem = std::uint32_t;

/// Raised when a value cannot be decided at the available precision.
class PrecisionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Finite field F_s with s = p^e <= 2^16, elements encoded as base-p digit
/// strings of their residue modulo a fixed monic irreducible polynomial.
class Field {
 public:
  /// Returns the cached field for (p, e). Throws std::invalid_argument when p is
  /// not prime, e == 0 or p^e > 2^16.
  static const Field& get(unsigned p, unsigned e = 1);

  unsigned characteristic() const { return p_; }
  unsigned degree() const { return e_; }
  unsigned size() const { return s_; }
  /// Ascending coefficients over F_p, monic of degree e.
  const std::vector<unsigned>& modulus() const { return modulus_; }

  Elem add(Elem a, Elem b) const {
    if (e_ == 1) {
      Elem r = a + b;
      return r >= p_ ? r - p_ : r;
    }
    if (p_ == 2) return a ^ b;
    return add_digits(a, b);
  }
  Elem neg(Elem a) const {
    if (e_ == 1) return a == 0 ? 0 : p_ - a;
    if (p_ == 2) return a;
    return neg_digits(a);
  }
  Elem sub(Elem a, Elem b) const { return add(a, neg(b)); }
  Elem mul(Elem a, Elem b) const {
    if (a == 0 || b == 0) return 0;
    if (e_ == 1) return static_cast<Elem>((std::uint64_t{a} * b) % p_);
    return exp_[log_[a] + log_[b]];
  }
  Elem inv(Elem a) const;
  Elem div(Elem a, Elem b) const { return mul(a, inv(b)); }
  /// Image of an integer in the prime subfield.
  Elem from_int(long long v) const;

  bool operator==(const Field& o) const { return this == &o; }

 private:
  Field(unsigned p, unsigned e);
  Elem add_digits(Elem a, Elem b) const;
  Elem neg_digits(Elem a) const;

  unsigned p_, e_, s_;
  std::vector<unsigned> modulus_;
  std::vector<std::uint32_t> log_;  // log_[a] for a != 0
  std::vector<Elem> exp_;           // exp_[k] for k < 2(s-1)
};

bool is_prime(unsigned n);

/// Dense univariate polynomial over F_s; the zero polynomial has degree -1.
class Poly {
 public:
  Poly() = default;
  explicit Poly(const Field& f) : f_(&f) {}
  Poly(const Field& f, std::vector<Elem> ascending);
  static Poly constant(const Field& f, Elem c);
  static Poly monomial(const Field& f, Elem c, int degree);
  /// X as a polynomial.
  static Poly x(const Field& f) { return monomial(f, 1, 1); }

  const Field& field() const { return *f_; }
  bool has_field() const { return f_ != nullptr; }
  int degree() const { return static_cast<int>(c_.size()) - 1; }
  bool is_zero() const { return c_.empty(); }
  Elem operator[](int i) const {
    return i >= 0 && i < static_cast<int>(c_.size()) ? c_[i] : 0;
  }
  Elem leading() const { return c_.empty() ? 0 : c_.back(); }
  const std::vector<Elem>& coeffs() const { return c_; }

  Poly& operator+=(const Poly& o);
  Poly& operator-=(const Poly& o);
  friend Poly operator+(Poly a, const Poly& b) { return a += b; }
  friend Poly operator-(Poly a, const Poly& b) { return a -= b; }
  Poly operator-() const;
  friend Poly operator*(const Poly& a, const Poly& b);
  Poly scaled(Elem c) const;
  /// Multiplies by X^k (k >= 0).
  Poly shifted(int k) const;
  /// Same polynomial divided by its leading coefficient; zero stays zero.
  Poly monic() const;

  bool operator==(const Poly& o) const { return c_ == o.c_; }

  std::string to_string() const;

 private:
  void trim();
  const Field* f_ = nullptr;
  std::vector<Elem> c_;
};

/// Quotient and remainder with deg(rem) < deg(b). Throws std::domain_error for b = 0.
std::pair<Poly, Poly> divmod(const Poly& a, const Poly& b);
Poly gcd(Poly a, Poly b);

/// An s-power s^exponent, or the zero value.
struct SPower {
  bool zero = false;
  int exponent = 0;
  bool operator==(const SPower&) const = default;
  double value(unsigned s) const;
};

enum class Tri { False, True, Indeterminate };

/// Truncated Laurent series in X^{-1}. Coefficients with index <= precision()
/// are known exactly; an exact series is known to have no further terms.
class LaurentSeries {
 public:
  static constexpr int kInfinitePrecision = INT_MAX / 4;
  static constexpr int kInfiniteOrder = INT_MAX / 2;

  LaurentSeries() = default;
  /// Known-zero series.
  static LaurentSeries zero(const Field& f);
  static LaurentSeries from_poly(const Poly& p);
  /// c * X^{-index}, exact.
  static LaurentSeries monomial(const Field& f, Elem c, int index);
  /// Coefficients for indices first, first+1, ...; exact when precision is
  /// kInfinitePrecision, otherwise everything past `precision` is unknown.
  static LaurentSeries from_coeffs(const Field& f, int first, std::vector<Elem> coeffs,
                                   int precision = kInfinitePrecision);

  const Field& field() const { return *f_; }
  bool exact() const { return exact_; }
  int precision() const { return exact_ ? kInfinitePrecision : prec_; }
  bool is_known_zero() const { return exact_ && c_.empty(); }
  /// No nonzero coefficient inside a finite window.
  bool is_zero_in_window() const { return !exact_ && c_.empty(); }
  /// Index of the first stored nonzero coefficient, or a lower bound
  /// (precision + 1) when the window is all zero.
  int order_bound() const;
  /// Index of the last nonzero coefficient (exact or not); requires nonzero window.
  int last_index() const { return lo_ + static_cast<int>(c_.size()) - 1; }
  Elem coeff(int index) const;

  /// v(a). kInfiniteOrder for known zero; PrecisionError if zero in window.
  int valuation() const;
  /// |a| = s^{-v(a)}.
  SPower abs_value() const;

  LaurentSeries operator-() const;
  friend LaurentSeries operator+(const LaurentSeries& a, const LaurentSeries& b);
  friend LaurentSeries operator-(const LaurentSeries& a, const LaurentSeries& b);
  friend LaurentSeries operator*(const LaurentSeries& a, const LaurentSeries& b);
  LaurentSeries scaled(Elem c) const;
  /// Multiply by X^k (any sign).
  LaurentSeries shifted(int k) const;
  /// Restrict the window to indices <= n.
  LaurentSeries truncated(int n) const;
  /// Multiplicative inverse. An exact non-monomial series needs an explicit
  /// precision; an inexact one gets at most the precision its window justifies.
  LaurentSeries inverse(int precision = kInfinitePrecision) const;

  /// (terms with index <= 0, terms with index >= 1).
  std::pair<Poly, LaurentSeries> polynomial_part() const;

  /// Whether |a| <= s^{-k}, i.e. every coefficient with index < k vanishes.
  Tri norm_at_most(int k) const;
  Tri equals(const LaurentSeries& o) const;

  std::string to_string() const;
  static LaurentSeries parse(const Field& f, std::string_view text);

 private:
  void normalize();
  const Field* f_ = nullptr;
  int lo_ = 0;
  std::vector<Elem> c_;
  int prec_ = kInfinitePrecision;
  bool exact_ = true;
};

}  // namespace ultralog
