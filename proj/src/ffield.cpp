#include "ultralog/ffield.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>

namespace ultralog {

bool is_prime(unsigned n) {
  if (n < 2) return false;
  for (unsigned d = 2; d * d <= n; ++d)
    if (n % d == 0) return false;
  return true;
}

namespace {

// Helpers on polynomials over F_p stored as ascending digit vectors.
using Digits = std::vector<unsigned>;

void trim(Digits& a) {
  while (!a.empty() && a.back() == 0) a.pop_back();
}

Digits mod_poly(Digits a, const Digits& m, unsigned p) {
  trim(a);
  const unsigned lead_inv = [&] {
    for (unsigned x = 1; x < p; ++x)
      if ((x * m.back()) % p == 1) return x;
    return 1u;
  }();
  while (a.size() >= m.size()) {
    const unsigned factor = (a.back() * lead_inv) % p;
    const std::size_t shift = a.size() - m.size();
    for (std::size_t i = 0; i < m.size(); ++i)
      a[shift + i] = (a[shift + i] + p - (factor * m[i]) % p) % p;
    trim(a);
  }
  return a;
}

Digits mul_poly(const Digits& a, const Digits& b, unsigned p) {
  if (a.empty() || b.empty()) return {};
  Digits r(a.size() + b.size() - 1, 0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) r[i + j] = (r[i + j] + a[i] * b[j]) % p;
  trim(r);
  return r;
}

Digits digits_of(unsigned code, unsigned p, unsigned len) {
  Digits d(len);
  for (unsigned i = 0; i < len; ++i) {
    d[i] = code % p;
    code /= p;
  }
  return d;
}

unsigned code_of(const Digits& d, unsigned p) {
  unsigned code = 0;
  for (std::size_t i = d.size(); i-- > 0;) code = code * p + d[i];
  return code;
}

// Trial division by every monic polynomial of degree 1..deg/2.
bool irreducible(const Digits& m, unsigned p) {
  const unsigned deg = static_cast<unsigned>(m.size()) - 1;
  for (unsigned d = 1; d <= deg / 2; ++d) {
    unsigned count = 1;
    for (unsigned i = 0; i < d; ++i) count *= p;
    for (unsigned code = 0; code < count; ++code) {
      Digits f = digits_of(code, p, d);
      f.push_back(1);
      if (mod_poly(m, f, p).empty()) return false;
    }
  }
  return true;
}

}  // namespace

Field::Field(unsigned p, unsigned e) : p_(p), e_(e), s_(1) {
  for (unsigned i = 0; i < e; ++i) s_ *= p;
  if (e == 1) {
    modulus_ = {0, 1};
  } else {
    unsigned count = s_;
    for (unsigned code = 0; code < count; ++code) {
      Digits m = digits_of(code, p, e);
      m.push_back(1);
      if (m[0] != 0 && irreducible(m, p)) {
        modulus_ = m;
        break;
      }
    }
  }
  // Log/antilog tables from the smallest generator of the multiplicative group.
  const unsigned order = s_ - 1;
  auto mul_slow = [&](unsigned a, unsigned b) -> unsigned {
    if (e_ == 1) return static_cast<unsigned>((std::uint64_t{a} * b) % p_);
    return code_of(mod_poly(mul_poly(digits_of(a, p_, e_), digits_of(b, p_, e_), p_), modulus_, p_),
                   p_);
  };
  log_.assign(s_, 0);
  exp_.assign(2 * std::max(order, 1u), 1);
  for (unsigned g = 1; g < s_; ++g) {
    std::vector<char> seen(s_, 0);
    unsigned x = 1;
    unsigned k = 0;
    bool ok = true;
    for (; k < order; ++k) {
      if (seen[x]) {
        ok = false;
        break;
      }
      seen[x] = 1;
      exp_[k] = x;
      log_[x] = k;
      x = mul_slow(x, g);
    }
    if (ok) break;
  }
  for (unsigned k = order; k < exp_.size(); ++k) exp_[k] = exp_[k - order];
}

const Field& Field::get(unsigned p, unsigned e) {
  if (!is_prime(p)) throw std::invalid_argument("field characteristic " + std::to_string(p) + " is not prime");
  if (e == 0) throw std::invalid_argument("field extension degree must be >= 1");
  std::uint64_t s = 1;
  for (unsigned i = 0; i < e; ++i) {
    s *= p;
    if (s > 65536) throw std::invalid_argument("field size exceeds 2^16");
  }
  static std::mutex mu;
  static std::map<std::pair<unsigned, unsigned>, std::unique_ptr<Field>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[{p, e}];
  if (!slot) slot.reset(new Field(p, e));
  return *slot;
}

Elem Field::inv(Elem a) const {
  if (a == 0) throw std::domain_error("inverse of zero in F_s");
  const unsigned order = s_ - 1;
  return exp_[(order - log_[a]) % order];
}

Elem Field::from_int(long long v) const {
  long long r = v % static_cast<long long>(p_);
  if (r < 0) r += p_;
  return static_cast<Elem>(r);
}

Elem Field::add_digits(Elem a, Elem b) const {
  Elem r = 0, w = 1;
  for (unsigned i = 0; i < e_; ++i) {
    r += ((a % p_ + b % p_) % p_) * w;
    a /= p_;
    b /= p_;
    w *= p_;
  }
  return r;
}

Elem Field::neg_digits(Elem a) const {
  Elem r = 0, w = 1;
  for (unsigned i = 0; i < e_; ++i) {
    r += ((p_ - a % p_) % p_) * w;
    a /= p_;
    w *= p_;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Poly

Poly::Poly(const Field& f, std::vector<Elem> ascending) : f_(&f), c_(std::move(ascending)) {
  for (Elem c : c_)
    if (c >= f.size()) throw std::invalid_argument("coefficient out of range for F_s");
  trim();
}

Poly Poly::constant(const Field& f, Elem c) { return Poly(f, {c}); }

Poly Poly::monomial(const Field& f, Elem c, int degree) {
  if (degree < 0) throw std::invalid_argument("negative monomial degree");
  std::vector<Elem> v(static_cast<std::size_t>(degree) + 1, 0);
  v.back() = c;
  return Poly(f, std::move(v));
}

void Poly::trim() {
  while (!c_.empty() && c_.back() == 0) c_.pop_back();
}

Poly& Poly::operator+=(const Poly& o) {
  if (!f_) f_ = o.f_;
  if (o.c_.size() > c_.size()) c_.resize(o.c_.size(), 0);
  for (std::size_t i = 0; i < o.c_.size(); ++i) c_[i] = f_->add(c_[i], o.c_[i]);
  trim();
  return *this;
}

Poly& Poly::operator-=(const Poly& o) {
  if (!f_) f_ = o.f_;
  if (o.c_.size() > c_.size()) c_.resize(o.c_.size(), 0);
  for (std::size_t i = 0; i < o.c_.size(); ++i) c_[i] = f_->sub(c_[i], o.c_[i]);
  trim();
  return *this;
}

Poly Poly::operator-() const {
  Poly r = *this;
  for (Elem& c : r.c_) c = f_->neg(c);
  return r;
}

Poly operator*(const Poly& a, const Poly& b) {
  const Field* f = a.f_ ? a.f_ : b.f_;
  Poly r;
  r.f_ = f;
  if (a.is_zero() || b.is_zero()) return r;
  r.c_.assign(a.c_.size() + b.c_.size() - 1, 0);
  for (std::size_t i = 0; i < a.c_.size(); ++i) {
    if (a.c_[i] == 0) continue;
    for (std::size_t j = 0; j < b.c_.size(); ++j)
      r.c_[i + j] = f->add(r.c_[i + j], f->mul(a.c_[i], b.c_[j]));
  }
  r.trim();
  return r;
}

Poly Poly::scaled(Elem c) const {
  Poly r = *this;
  for (Elem& x : r.c_) x = f_->mul(x, c);
  r.trim();
  return r;
}

Poly Poly::shifted(int k) const {
  Poly r = *this;
  if (!r.c_.empty() && k > 0) r.c_.insert(r.c_.begin(), static_cast<std::size_t>(k), 0);
  return r;
}

Poly Poly::monic() const { return is_zero() ? *this : scaled(f_->inv(leading())); }

std::string Poly::to_string() const {
  return LaurentSeries::from_poly(*this).to_string();
}

std::pair<Poly, Poly> divmod(const Poly& a, const Poly& b) {
  if (b.is_zero()) throw std::domain_error("polynomial division by zero");
  const Field& f = b.field();
  Poly rem = a;
  if (!rem.has_field()) rem = Poly(f);
  std::vector<Elem> q(static_cast<std::size_t>(std::max(0, a.degree() - b.degree() + 1)), 0);
  const Elem lead_inv = f.inv(b.leading());
  while (!rem.is_zero() && rem.degree() >= b.degree()) {
    const int shift = rem.degree() - b.degree();
    const Elem factor = f.mul(rem.leading(), lead_inv);
    q[static_cast<std::size_t>(shift)] = factor;
    rem -= b.scaled(factor).shifted(shift);
  }
  return {Poly(f, std::move(q)), rem};
}

Poly gcd(Poly a, Poly b) {
  while (!b.is_zero()) {
    Poly r = divmod(a, b).second;
    a = std::move(b);
    b = std::move(r);
  }
  return a.monic();
}

double SPower::value(unsigned s) const {
  return zero ? 0.0 : std::pow(static_cast<double>(s), exponent);
}

// ---------------------------------------------------------------------------
// LaurentSeries

void LaurentSeries::normalize() {
  if (!exact_) {
    const long long keep = static_cast<long long>(prec_) - lo_ + 1;
    if (keep <= 0)
      c_.clear();
    else if (static_cast<long long>(c_.size()) > keep)
      c_.resize(static_cast<std::size_t>(keep));
  }
  std::size_t lead = 0;
  while (lead < c_.size() && c_[lead] == 0) ++lead;
  if (lead > 0) {
    c_.erase(c_.begin(), c_.begin() + static_cast<std::ptrdiff_t>(lead));
    lo_ += static_cast<int>(lead);
  }
  while (!c_.empty() && c_.back() == 0) c_.pop_back();
  if (c_.empty()) lo_ = exact_ ? 0 : prec_ + 1;
}

LaurentSeries LaurentSeries::zero(const Field& f) {
  LaurentSeries r;
  r.f_ = &f;
  return r;
}

LaurentSeries LaurentSeries::from_poly(const Poly& p) {
  LaurentSeries r;
  r.f_ = &p.field();
  r.c_.assign(p.coeffs().rbegin(), p.coeffs().rend());
  r.lo_ = -p.degree();
  r.normalize();
  return r;
}

LaurentSeries LaurentSeries::monomial(const Field& f, Elem c, int index) {
  return from_coeffs(f, index, {c});
}

LaurentSeries LaurentSeries::from_coeffs(const Field& f, int first, std::vector<Elem> coeffs,
                                         int precision) {
  for (Elem c : coeffs)
    if (c >= f.size()) throw std::invalid_argument("coefficient out of range for F_s");
  LaurentSeries r;
  r.f_ = &f;
  r.lo_ = first;
  r.c_ = std::move(coeffs);
  r.exact_ = precision >= kInfinitePrecision;
  r.prec_ = r.exact_ ? kInfinitePrecision : precision;
  r.normalize();
  return r;
}

int LaurentSeries::order_bound() const {
  if (c_.empty()) return exact_ ? kInfiniteOrder : prec_ + 1;
  return lo_;
}

Elem LaurentSeries::coeff(int index) const {
  if (!exact_ && index > prec_)
    throw PrecisionError("coefficient index " + std::to_string(index) + " beyond precision " +
                         std::to_string(prec_));
  if (c_.empty() || index < lo_ || index > last_index()) return 0;
  return c_[static_cast<std::size_t>(index - lo_)];
}

int LaurentSeries::valuation() const {
  if (is_known_zero()) return kInfiniteOrder;
  if (c_.empty())
    throw PrecisionError("valuation undetermined: series vanishes on its whole window (prec " +
                         std::to_string(prec_) + ")");
  return lo_;
}

SPower LaurentSeries::abs_value() const {
  if (is_known_zero()) return {true, 0};
  return {false, -valuation()};
}

LaurentSeries LaurentSeries::operator-() const {
  LaurentSeries r = *this;
  for (Elem& c : r.c_) c = f_->neg(c);
  return r;
}

namespace {

LaurentSeries combine(const LaurentSeries& a, const LaurentSeries& b, bool subtract) {
  const Field& f = a.field();
  const bool exact = a.exact() && b.exact();
  const int prec = std::min(a.precision(), b.precision());
  const bool a_empty = a.is_known_zero() || a.is_zero_in_window();
  const bool b_empty = b.is_known_zero() || b.is_zero_in_window();
  if (a_empty && b_empty)
    return LaurentSeries::from_coeffs(f, 0, {}, exact ? LaurentSeries::kInfinitePrecision : prec);
  int lo = std::min(a_empty ? INT_MAX : a.order_bound(), b_empty ? INT_MAX : b.order_bound());
  int hi = std::max(a_empty ? INT_MIN : a.last_index(), b_empty ? INT_MIN : b.last_index());
  if (!exact) hi = std::min(hi, prec);
  std::vector<Elem> out;
  if (hi >= lo) {
    out.resize(static_cast<std::size_t>(hi - lo + 1));
    for (int i = lo; i <= hi; ++i) {
      const Elem x = a_empty ? 0 : a.coeff(i);
      const Elem y = b_empty ? 0 : b.coeff(i);
      out[static_cast<std::size_t>(i - lo)] = subtract ? f.sub(x, y) : f.add(x, y);
    }
  }
  return LaurentSeries::from_coeffs(f, hi >= lo ? lo : 0, std::move(out),
                                    exact ? LaurentSeries::kInfinitePrecision : prec);
}

}  // namespace

LaurentSeries operator+(const LaurentSeries& a, const LaurentSeries& b) {
  return combine(a, b, false);
}

LaurentSeries operator-(const LaurentSeries& a, const LaurentSeries& b) {
  return combine(a, b, true);
}

LaurentSeries operator*(const LaurentSeries& a, const LaurentSeries& b) {
  const Field& f = a.field();
  if (a.is_known_zero() || b.is_known_zero()) return LaurentSeries::zero(f);
  const int la = a.order_bound(), lb = b.order_bound();
  const bool exact = a.exact() && b.exact();
  int prec = LaurentSeries::kInfinitePrecision;
  if (!a.exact()) prec = std::min(prec, a.precision() + lb);
  if (!b.exact()) prec = std::min(prec, b.precision() + la);
  if (a.is_zero_in_window() || b.is_zero_in_window())
    return LaurentSeries::from_coeffs(f, 0, {}, prec);
  int hi = a.last_index() + b.last_index();
  if (!exact) hi = std::min(hi, prec);
  const int lo = la + lb;
  std::vector<Elem> out;
  if (hi >= lo) {
    out.assign(static_cast<std::size_t>(hi - lo + 1), 0);
    for (int i = la; i <= a.last_index(); ++i) {
      const Elem x = a.coeff(i);
      if (x == 0) continue;
      const int jmax = std::min(b.last_index(), hi - i);
      for (int j = lb; j <= jmax; ++j) {
        const Elem y = b.coeff(j);
        if (y == 0) continue;
        Elem& slot = out[static_cast<std::size_t>(i + j - lo)];
        slot = f.add(slot, f.mul(x, y));
      }
    }
  }
  return LaurentSeries::from_coeffs(f, lo, std::move(out), exact ? LaurentSeries::kInfinitePrecision : prec);
}

LaurentSeries LaurentSeries::scaled(Elem c) const {
  LaurentSeries r = *this;
  for (Elem& x : r.c_) x = f_->mul(x, c);
  r.normalize();
  return r;
}

LaurentSeries LaurentSeries::shifted(int k) const {
  LaurentSeries r = *this;
  if (!r.c_.empty()) r.lo_ -= k;
  if (!r.exact_) {
    r.prec_ -= k;
    if (r.c_.empty()) r.lo_ = r.prec_ + 1;
  }
  return r;
}

LaurentSeries LaurentSeries::truncated(int n) const {
  if (exact_ && (c_.empty() || last_index() <= n)) return *this;
  LaurentSeries r = *this;
  r.exact_ = false;
  r.prec_ = std::min(precision(), n);
  r.normalize();
  return r;
}

LaurentSeries LaurentSeries::inverse(int precision) const {
  if (is_known_zero()) throw std::domain_error("inverse of the zero series");
  if (c_.empty())
    throw PrecisionError("cannot invert: series vanishes on its whole window (prec " +
                         std::to_string(prec_) + ")");
  const int v = lo_;
  const Elem lead_inv = f_->inv(c_[0]);
  if (exact_ && c_.size() == 1 && precision >= kInfinitePrecision)
    return monomial(*f_, lead_inv, -v);
  int target = precision;
  if (!exact_) target = std::min(target, prec_ - 2 * v);
  if (target >= kInfinitePrecision)
    throw std::invalid_argument("inverse of a non-monomial exact series needs a precision");
  const long long len = static_cast<long long>(target) + v + 1;
  if (len <= 0) throw PrecisionError("inverse window would be empty");
  std::vector<Elem> b(static_cast<std::size_t>(len), 0);
  b[0] = lead_inv;
  for (long long k = 1; k < len; ++k) {
    Elem acc = 0;
    const long long imax = std::min<long long>(k, static_cast<long long>(c_.size()) - 1);
    for (long long i = 1; i <= imax; ++i)
      acc = f_->add(acc, f_->mul(c_[static_cast<std::size_t>(i)], b[static_cast<std::size_t>(k - i)]));
    b[static_cast<std::size_t>(k)] = f_->neg(f_->mul(lead_inv, acc));
  }
  return from_coeffs(*f_, -v, std::move(b), target);
}

std::pair<Poly, LaurentSeries> LaurentSeries::polynomial_part() const {
  if (!exact_ && prec_ < 0)
    throw PrecisionError("polynomial part unknown: precision " + std::to_string(prec_) + " < 0");
  std::vector<Elem> poly;
  if (!c_.empty() && lo_ <= 0) {
    poly.assign(static_cast<std::size_t>(-lo_) + 1, 0);
    for (int i = lo_; i <= std::min(0, last_index()); ++i) poly[static_cast<std::size_t>(-i)] = coeff(i);
  }
  std::vector<Elem> frac;
  int first = 1;
  if (!c_.empty() && last_index() >= 1) {
    first = std::max(1, lo_);
    for (int i = first; i <= last_index(); ++i) frac.push_back(coeff(i));
  }
  return {Poly(*f_, std::move(poly)), from_coeffs(*f_, first, std::move(frac), precision())};
}

Tri LaurentSeries::norm_at_most(int k) const {
  if (!c_.empty() && lo_ < k) return Tri::False;
  if (exact_) return Tri::True;
  return k - 1 <= prec_ ? Tri::True : Tri::Indeterminate;
}

Tri LaurentSeries::equals(const LaurentSeries& o) const {
  const LaurentSeries d = *this - o;
  if (d.is_known_zero()) return Tri::True;
  if (!d.c_.empty()) return Tri::False;
  return Tri::Indeterminate;
}

std::string LaurentSeries::to_string() const {
  std::ostringstream os;
  if (c_.empty()) {
    os << "0";
  } else {
    bool first = true;
    for (int i = lo_; i <= last_index(); ++i) {
      const Elem c = coeff(i);
      if (c == 0) continue;
      if (!first) os << " + ";
      first = false;
      const int power = -i;
      if (power == 0) {
        os << c;
        continue;
      }
      if (c != 1) os << c << "*";
      os << "X";
      if (power != 1) os << "^" << power;
    }
  }
  if (!exact_) os << " (prec " << prec_ << ")";
  return os.str();
}

namespace {

std::string_view strip(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

long long parse_int(std::string_view s, std::string_view what) {
  s = strip(s);
  long long v = 0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  if (!s.empty() && *b == '+') ++b;
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e || b == e)
    throw std::invalid_argument("bad " + std::string(what) + " '" + std::string(s) + "'");
  return v;
}

}  // namespace

LaurentSeries LaurentSeries::parse(const Field& f, std::string_view text) {
  std::string_view body = strip(text);
  int prec = kInfinitePrecision;
  if (const auto open = body.find('('); open != std::string_view::npos) {
    const auto close = body.find(')', open);
    if (close == std::string_view::npos || strip(body.substr(close + 1)).size() != 0)
      throw std::invalid_argument("malformed precision suffix in '" + std::string(text) + "'");
    std::string_view inner = strip(body.substr(open + 1, close - open - 1));
    if (inner.substr(0, 4) != "prec")
      throw std::invalid_argument("expected '(prec N)' in '" + std::string(text) + "'");
    prec = static_cast<int>(parse_int(inner.substr(4), "precision"));
    body = strip(body.substr(0, open));
  }
  if (body.empty()) throw std::invalid_argument("empty series text");
  std::map<int, Elem> terms;
  std::size_t pos = 0;
  while (pos <= body.size()) {
    std::size_t next = body.find('+', pos);
    if (next == std::string_view::npos) next = body.size();
    std::string_view term = strip(body.substr(pos, next - pos));
    pos = next + 1;
    if (term.empty()) throw std::invalid_argument("empty term in '" + std::string(text) + "'");
    long long coef = 1;
    int power = 0;
    const auto xpos = term.find('X');
    if (xpos == std::string_view::npos) {
      coef = parse_int(term, "coefficient");
    } else {
      std::string_view head = strip(term.substr(0, xpos));
      if (!head.empty()) {
        if (head.back() != '*') throw std::invalid_argument("expected '*' before X in '" + std::string(term) + "'");
        coef = parse_int(head.substr(0, head.size() - 1), "coefficient");
      }
      std::string_view tail = strip(term.substr(xpos + 1));
      if (tail.empty())
        power = 1;
      else if (tail.front() == '^')
        power = static_cast<int>(parse_int(tail.substr(1), "exponent"));
      else
        throw std::invalid_argument("unexpected text after X in '" + std::string(term) + "'");
    }
    if (coef < 0 || coef >= static_cast<long long>(f.size()))
      throw std::invalid_argument("coefficient " + std::to_string(coef) + " not in F_" + std::to_string(f.size()));
    Elem& slot = terms[-power];
    slot = f.add(slot, static_cast<Elem>(coef));
    if (next == body.size()) break;
  }
  if (terms.empty()) return zero(f);
  const int lo = terms.begin()->first;
  const int hi = terms.rbegin()->first;
  std::vector<Elem> coeffs(static_cast<std::size_t>(hi - lo + 1), 0);
  for (auto [idx, c] : terms) coeffs[static_cast<std::size_t>(idx - lo)] = c;
  return from_coeffs(f, lo, std::move(coeffs), prec);
}

}  // namespace ultralog
