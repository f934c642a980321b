#include "ultralog/spectral.hpp"

#include <climits>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "ultralog/util.hpp"

namespace ultralog {

namespace {

constexpr int kNoNorm = INT_MIN / 2;

LaurentSeries one(const Field& f) { return LaurentSeries::monomial(f, 1, 0); }

// log_s |x| for a series known to be nonzero in its window, kNoNorm for exact 0
int norm_exp(const LaurentSeries& x) {
  if (x.is_known_zero()) return kNoNorm;
  if (x.is_zero_in_window()) throw PrecisionError("norm of a series that vanishes in its window");
  return -x.valuation();
}

// |c| <= |d|
Tri norm_le(const LaurentSeries& c, const LaurentSeries& d) {
  if (c.is_known_zero()) return Tri::True;
  if (d.is_known_zero()) return c.is_zero_in_window() ? Tri::Indeterminate : Tri::False;
  if (d.is_zero_in_window()) return Tri::Indeterminate;
  const int ed = -d.valuation();
  if (c.is_zero_in_window()) return -(c.precision() + 1) <= ed ? Tri::True : Tri::Indeterminate;
  return -c.valuation() <= ed ? Tri::True : Tri::False;
}

Rational s_power(unsigned s, int e) {
  using boost::multiprecision::cpp_int;
  if (e >= 0) return Rational(boost::multiprecision::pow(cpp_int(s), static_cast<unsigned>(e)));
  return Rational(cpp_int(1), boost::multiprecision::pow(cpp_int(s), static_cast<unsigned>(-e)));
}

// n / m, exact when both are exact and the expansion terminates within `extra`
// digits, otherwise truncated there
LaurentSeries quotient(const LaurentSeries& n, const LaurentSeries& m, int extra) {
  if (n.is_known_zero()) return n;
  const LaurentSeries u = n * m.inverse(extra - m.valuation());
  if (n.exact() && m.exact()) {
    if (u.is_zero_in_window()) return u;
    std::vector<Elem> c;
    for (int i = u.valuation(); i <= u.last_index(); ++i) c.push_back(u.coeff(i));
    const LaurentSeries ue = LaurentSeries::from_coeffs(n.field(), u.valuation(), std::move(c));
    if ((n - ue * m).is_known_zero()) return ue;
  }
  return u;
}

}  // namespace

Mat2 mat2_mul(const Mat2& x, const Mat2& y) {
  return {x[0] * y[0] + x[1] * y[2], x[0] * y[1] + x[1] * y[3], x[2] * y[0] + x[3] * y[2],
          x[2] * y[1] + x[3] * y[3]};
}

Mat2 sl2_inverse(const Mat2& x) { return {x[3], -x[1], -x[2], x[0]}; }

Mat2 sl2_identity(const Field& f) { return {one(f), LaurentSeries::zero(f), LaurentSeries::zero(f), one(f)}; }

Mat2 diag_flow(const Field& f, int t) {
  return {LaurentSeries::monomial(f, 1, -t), LaurentSeries::zero(f), LaurentSeries::zero(f),
          LaurentSeries::monomial(f, 1, t)};
}

Tri mat2_equals(const Mat2& x, const Mat2& y) {
  Tri out = Tri::True;
  for (int i = 0; i < 4; ++i) {
    const Tri e = x[i].equals(y[i]);
    if (e == Tri::False) return Tri::False;
    if (e == Tri::Indeterminate) out = Tri::Indeterminate;
  }
  return out;
}

int mat2_norm_exponent(const Mat2& x) {
  int e = kNoNorm;
  for (const auto& v : x) e = std::max(e, norm_exp(v));
  return e;
}

IwasawaFactors iwasawa(const Mat2& g, int extra_digits) {
  const Field& f = g[0].field();
  const LaurentSeries& c = g[2];
  const LaurentSeries& d = g[3];
  IwasawaFactors out;
  const Tri le = norm_le(c, d);
  if (le == Tri::Indeterminate) throw PrecisionError("iwasawa: |c| and |d| not comparable at this precision");
  if (le == Tri::True) {
    const LaurentSeries u = quotient(c, d, extra_digits);
    out.kappa = {one(f), LaurentSeries::zero(f), u, one(f)};
    out.b = mat2_mul(g, {one(f), LaurentSeries::zero(f), -u, one(f)});
  } else {
    const LaurentSeries u = quotient(d, c, extra_digits);
    out.kappa = {LaurentSeries::zero(f), -one(f), one(f), u};
    const Mat2 gw = {-g[1], g[0], -g[3], g[2]};
    out.b = mat2_mul(gw, {one(f), LaurentSeries::zero(f), u, one(f)});
  }
  out.b[2] = LaurentSeries::zero(f);  // cleared exactly by construction
  out.diagonal_valuations = {out.b[0].valuation(), out.b[3].valuation()};
  return out;
}

Mat2 kb_projection(const Mat2& x) {
  const IwasawaFactors iw = iwasawa(sl2_inverse(x));
  Mat2 p = sl2_inverse(iw.b);
  p[2] = LaurentSeries::zero(x[0].field());
  return p;
}

SPower modular_delta_b(const LaurentSeries& u) {
  if (u.is_known_zero() || u.is_zero_in_window()) throw std::invalid_argument("modular_delta_b: u must be nonzero");
  return SPower{false, -2 * u.valuation()};
}

int xi_integrand_exponent(const Mat2& x) {
  const Mat2 p = kb_projection(x);
  return p[0].valuation();
}

Rational xi_level_sum(const Mat2& g, int N, bool* resolved) {
  const Field& f = g[0].field();
  for (const auto& e : g)
    if (!e.exact()) throw std::invalid_argument("xi_exact needs exact entries");
  const unsigned q = f.size();
  int E[4];
  for (int i = 0; i < 4; ++i) E[i] = norm_exp(g[i]);
  // residue classes x mod X^{-nx}, y mod X^{-ny}; only the coordinate whose
  // unknown digits can still change the integrand is refined
  struct Cyl {
    std::vector<Elem> x, y;
  };
  std::vector<Cyl> stack;
  for (Elem a = 0; a < q; ++a)
    for (Elem b = 0; b < q; ++b)
      if (a || b) stack.push_back({{a}, {b}});
  Rational sum = 0;
  bool all = true;
  using boost::multiprecision::cpp_int;
  while (!stack.empty()) {
    Cyl cyl = std::move(stack.back());
    stack.pop_back();
    const int nx = static_cast<int>(cyl.x.size()), ny = static_cast<int>(cyl.y.size());
    const LaurentSeries X0 = LaurentSeries::from_coeffs(f, 0, cyl.x), Y0 = LaurentSeries::from_coeffs(f, 0, cyl.y);
    int A[2], P[2], px[2], py[2];
    bool det[2];
    for (int i = 0; i < 2; ++i) {
      A[i] = norm_exp(g[2 * i] * X0 + g[2 * i + 1] * Y0);
      px[i] = E[2 * i] == kNoNorm ? kNoNorm : E[2 * i] - nx;
      py[i] = E[2 * i + 1] == kNoNorm ? kNoNorm : E[2 * i + 1] - ny;
      P[i] = std::max(px[i], py[i]);
      det[i] = A[i] > P[i];
    }
    const int up0 = det[0] ? A[0] : P[0], up1 = det[1] ? A[1] : P[1];
    int value;
    bool ok = true;
    if (det[0] && A[0] >= up1) {
      value = A[0];
    } else if (det[1] && A[1] >= up0) {
      value = A[1];
    } else {
      ok = false;
      value = std::max(A[0], A[1]);
    }
    // the largest perturbation among the undecided forms picks the coordinate;
    // if neither remaining coordinate enters them the value is final
    int best = kNoNorm;
    bool refine_x = false;
    for (int i = 0; i < 2; ++i) {
      if (det[i]) continue;
      if (nx < N && px[i] > best) best = px[i], refine_x = true;
      if (ny < N && py[i] > best) best = py[i], refine_x = false;
    }
    if (ok || best == kNoNorm) {
      if (!ok) all = false;
      sum += Rational(boost::multiprecision::pow(cpp_int(q), static_cast<unsigned>(2 * N - nx - ny))) *
             s_power(q, -value);
      continue;
    }
    for (Elem a = 0; a < q; ++a) {
      Cyl child = cyl;
      (refine_x ? child.x : child.y).push_back(a);
      stack.push_back(std::move(child));
    }
  }
  if (resolved) *resolved = all;
  const cpp_int total = boost::multiprecision::pow(cpp_int(q), static_cast<unsigned>(2 * N - 2)) * (cpp_int(q) * q - 1);
  return sum / Rational(total);
}

XiExact xi_exact(const Mat2& g, int max_depth) {
  XiExact out;
  bool prev_resolved = false;
  for (int N = 1; N <= max_depth; ++N) {
    bool resolved = false;
    out.levels.push_back(xi_level_sum(g, N, &resolved));
    if (N >= 2 && prev_resolved && out.levels[N - 1] == out.levels[N - 2]) {
      out.stabilized = true;
      out.depth = N - 1;
      out.value = out.levels[N - 2];
      return out;
    }
    prev_resolved = resolved;
  }
  throw std::runtime_error("xi_exact: no stabilization up to depth " + std::to_string(max_depth));
}

Rational xi_closed_form(unsigned q, int t) {
  if (t < 0) t = -t;
  return s_power(q, -t) * (Rational(1) + Rational(2 * t * (static_cast<int>(q) - 1), static_cast<int>(q) + 1));
}

Mat2 sample_sl2_o(const Field& f, int precision, std::mt19937_64& rng) {
  auto draw = [&] {
    std::vector<Elem> c(static_cast<std::size_t>(precision + 1));
    for (auto& x : c) x = static_cast<Elem>(uniform_below(rng, f.size()));
    return c;
  };
  std::vector<Elem> a, b;
  do {
    a = draw();
    b = draw();
  } while (a[0] == 0 && b[0] == 0);
  const LaurentSeries A = LaurentSeries::from_coeffs(f, 0, a, precision);
  const LaurentSeries B = LaurentSeries::from_coeffs(f, 0, b, precision);
  LaurentSeries C = LaurentSeries::zero(f), D = LaurentSeries::zero(f);
  if (a[0] != 0)
    D = A.inverse(precision);
  else
    C = -B.inverse(precision);
  const LaurentSeries U = LaurentSeries::from_coeffs(f, 0, draw(), precision);
  return {A, B, U * A + C, U * B + D};
}

Mat2 sample_sl2_o_stratum(const Field& f, int precision, int j, bool tail, std::mt19937_64& rng) {
  const unsigned q = f.size();
  std::vector<Elem> a(static_cast<std::size_t>(precision + 1)), b(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const int idx = static_cast<int>(i);
    if (idx < j)
      a[i] = 0;
    else if (idx == j && !tail)
      a[i] = static_cast<Elem>(1 + uniform_below(rng, q - 1));
    else
      a[i] = static_cast<Elem>(uniform_below(rng, q));
  }
  for (auto& x : b) x = static_cast<Elem>(uniform_below(rng, q));
  // primitivity: B is a unit as soon as A is not
  if (j >= 1 || tail)
    while (b[0] == 0) b[0] = static_cast<Elem>(uniform_below(rng, q));
  const LaurentSeries A = LaurentSeries::from_coeffs(f, 0, a, precision);
  const LaurentSeries B = LaurentSeries::from_coeffs(f, 0, b, precision);
  LaurentSeries C = LaurentSeries::zero(f), D = LaurentSeries::zero(f);
  if (a[0] != 0)
    D = A.inverse(precision);
  else
    C = -B.inverse(precision);
  std::vector<Elem> u(a.size());
  for (auto& x : u) x = static_cast<Elem>(uniform_below(rng, q));
  const LaurentSeries U = LaurentSeries::from_coeffs(f, 0, u, precision);
  return {A, B, U * A + C, U * B + D};
}

double haar_stratum_mass(unsigned q, int j, bool tail) {
  const double Q = q;
  if (tail) return j == 0 ? 1.0 : std::pow(Q, -j) * Q / (Q + 1);
  return j == 0 ? Q / (Q + 1) : std::pow(Q, -j) * (Q - 1) / (Q + 1);
}

Mat2 cartan_right_factor(const Mat2& g, int extra_digits) {
  const Field& f = g[0].field();
  const Mat2 w = {LaurentSeries::zero(f), -one(f), one(f), LaurentSeries::zero(f)};
  int best = kNoNorm, at = 0;
  for (int i = 0; i < 4; ++i) {
    const int e = g[i].is_zero_in_window() ? kNoNorm : norm_exp(g[i]);
    if (e > best) best = e, at = i;
  }
  if (best == kNoNorm) throw PrecisionError("cartan_right_factor: no entry is known to be nonzero");
  Mat2 R = sl2_identity(f);
  if (at % 2 == 1) R = w;  // the largest entry moves to the first column
  const Mat2 h = mat2_mul(g, R);
  const int row = at / 2;
  const LaurentSeries u = quotient(h[2 * row + 1], h[2 * row], extra_digits);
  return mat2_mul(R, {one(f), -u, LaurentSeries::zero(f), one(f)});
}

XiMonteCarlo xi_monte_carlo(const Mat2& g, long samples, std::uint64_t seed, int precision, int threads,
                            const std::string& tag, int strata) {
  const Field& f = g[0].field();
  // k = R k' with g R lower triangular after a row swap: the cells of k' line up with the integrand
  const Mat2 R = strata > 0 ? cartan_right_factor(g, precision) : sl2_identity(f);
  const double s = f.size();
  std::vector<double> vals(static_cast<std::size_t>(samples));
  const long cells = strata > 0 ? strata + 1 : 1;
  if (strata > 0 && samples < 2 * cells) throw std::invalid_argument("xi_monte_carlo: fewer than 2 samples per stratum");
  parallel_for(static_cast<std::size_t>(samples), threads, [&](std::size_t i) {
    std::mt19937_64 rng = stream_rng(seed, tag, i);
    Mat2 k;
    if (strata > 0) {
      const int c = static_cast<int>(static_cast<long>(i) % cells);
      k = mat2_mul(R, sample_sl2_o_stratum(f, precision, c, c == strata, rng));
    } else {
      k = sample_sl2_o(f, precision, rng);
    }
    vals[i] = std::pow(s, xi_integrand_exponent(mat2_mul(g, k)));
  });
  XiMonteCarlo out;
  out.samples = samples;
  double mean = 0, var = 0;
  for (long c = 0; c < cells; ++c) {
    double m = 0, n = 0;
    for (long i = c; i < samples; i += cells) m += vals[static_cast<std::size_t>(i)], ++n;
    m /= n;
    double v = 0;
    for (long i = c; i < samples; i += cells) v += (vals[static_cast<std::size_t>(i)] - m) * (vals[static_cast<std::size_t>(i)] - m);
    v /= std::max(1.0, n - 1);
    const double w = strata > 0 ? haar_stratum_mass(f.size(), static_cast<int>(c), c == strata) : 1.0;
    mean += w * m;
    var += w * w * v / n;
  }
  out.mean = mean;
  out.std_error = std::sqrt(var);
  return out;
}

DecayFit decay_check(const Field& f, int t_max, long mc_samples, std::uint64_t seed, int threads) {
  DecayFit fit;
  const unsigned q = f.size();
  const double s = q;
  fit.q = q;
  for (int t = 0; t <= t_max; ++t) {
    DecayRow row;
    row.t = t;
    const XiExact ex = xi_exact(diag_flow(f, t));
    row.xi = ex.value;
    row.depth = ex.depth;
    row.xi_value = ex.value.convert_to<double>();
    row.scaled = row.xi_value * std::pow(s, t);
    if (mc_samples > 0) {
      const XiMonteCarlo mc = xi_monte_carlo(diag_flow(f, t), mc_samples, seed, 4 * t + 16, threads,
                                             "xi-mc-t" + std::to_string(t), 2 * t + 2);
      row.xi_mc = mc.mean;
      row.mc_std_error = mc.std_error;
    }
    fit.rows.push_back(row);
  }
  fit.varsigma_sigma1 = 0;
  for (const auto& r : fit.rows) fit.varsigma_sigma1 = std::max(fit.varsigma_sigma1, r.scaled);
  fit.scaled_grows = true;
  for (std::size_t i = 2; i < fit.rows.size(); ++i)
    if (!(fit.rows[i].scaled > fit.rows[i - 1].scaled)) fit.scaled_grows = false;
  {
    double mt = 0, my = 0;
    for (const auto& r : fit.rows) mt += r.t, my += r.scaled;
    mt /= static_cast<double>(fit.rows.size());
    my /= static_cast<double>(fit.rows.size());
    double sxy = 0, sxx = 0;
    for (const auto& r : fit.rows) sxy += (r.t - mt) * (r.scaled - my), sxx += (r.t - mt) * (r.t - mt);
    fit.scaled_slope = sxx > 0 ? sxy / sxx : 0;
  }
  for (int sigma = 1; sigma <= 64; ++sigma) {
    bool ok = true;
    for (int t = std::max(1, t_max / 2); t < t_max; ++t) {
      const double a = fit.rows[t].xi_value * std::pow(s, static_cast<double>(t) / sigma);
      const double b = fit.rows[t + 1].xi_value * std::pow(s, static_cast<double>(t + 1) / sigma);
      if (b > a) ok = false;
    }
    if (!ok) continue;
    fit.sigma = sigma;
    break;
  }
  if (fit.sigma == 0) throw std::runtime_error("decay_check: no sigma <= 64 found");
  fit.varsigma = 0;
  for (const auto& r : fit.rows)
    fit.varsigma = std::max(fit.varsigma, r.xi_value * std::pow(s, static_cast<double>(r.t) / fit.sigma));
  for (const auto& r : fit.rows)
    fit.residuals.push_back(std::log(r.xi_value) / std::log(s) + static_cast<double>(r.t) / fit.sigma -
                            std::log(fit.varsigma) / std::log(s));
  return fit;
}

std::string decay_csv(const DecayFit& fit) {
  std::ostringstream os;
  os.precision(17);
  os << "t,xi_exact,stabilization_depth,xi_mc,stderr\n";
  for (const auto& r : fit.rows)
    os << r.t << ',' << r.xi.str() << ',' << r.depth << ',' << r.xi_mc << ',' << r.mc_std_error << '\n';
  return os.str();
}

}  // namespace ultralog
