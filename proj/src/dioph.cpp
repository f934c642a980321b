#include "ultralog/dioph.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "ultralog/util.hpp"

namespace ultralog {

namespace {

constexpr int kUnbounded = INT_MAX / 4;

// Enumerates q in Z^n with deg q_j <= D by an F_p-digit odometer while keeping
// A q as dense rows over indices [-D, hi].
class QWalker {
 public:
  QWalker(const SeriesMatrix& a, const FlowSpec& spec, int D) : f_(spec.f()), m_(spec.m), n_(spec.n), D_(D) {
    if (a.size() != static_cast<std::size_t>(m_ * n_)) throw std::invalid_argument("A must be m x n");
    hi_ = 0;
    for (const auto& x : a) {
      if (!x.is_known_zero() && !x.is_zero_in_window() && x.valuation() < 0)
        throw std::invalid_argument("entry of A outside O: " + x.to_string());
      prec_.push_back(x.exact() ? kUnbounded : x.precision());
      if (!x.exact()) hi_ = std::max(hi_, x.precision());
      else if (!x.is_known_zero()) hi_ = std::max(hi_, x.last_index());
    }
    lo_ = -D;
    width_ = hi_ - lo_ + 1;
    const unsigned p = f_.characteristic(), e = f_.degree();
    for (int j = 0; j < n_; ++j)
      for (int k = 0; k <= D; ++k) {
        Elem unit = 1;
        for (unsigned i = 0; i < e; ++i, unit *= p) {
          Digit d{j, k, unit, std::vector<Elem>(static_cast<std::size_t>(m_ * width_), 0)};
          for (int r = 0; r < m_; ++r) {
            const LaurentSeries& x = a[static_cast<std::size_t>(r * n_ + j)];
            if (x.is_known_zero() || x.is_zero_in_window()) continue;
            const int top = x.exact() ? x.last_index() : x.precision();
            for (int idx = x.order_bound(); idx <= top; ++idx)
              d.w[static_cast<std::size_t>(r * width_ + idx - k - lo_)] = f_.mul(unit, x.coeff(idx));
          }
          digits_.push_back(std::move(d));
        }
      }
  }

  double box_size() const { return std::pow(static_cast<double>(f_.characteristic()), static_cast<double>(digits_.size())); }

  struct State {
    const std::vector<std::vector<Elem>>& q;  // codes, n x (D+1)
    const std::vector<Elem>& aq;              // m x width
  };

  template <class Visit>
  void run(Visit&& visit) {
    const unsigned p = f_.characteristic();
    std::vector<Elem> aq(static_cast<std::size_t>(m_ * width_), 0);
    std::vector<unsigned> dig(digits_.size(), 0);
    std::vector<std::vector<Elem>> q(static_cast<std::size_t>(n_), std::vector<Elem>(static_cast<std::size_t>(D_ + 1), 0));
    while (true) {
      std::size_t pos = 0;
      while (pos < digits_.size()) {
        const Digit& d = digits_[pos];
        for (std::size_t t = 0; t < aq.size(); ++t)
          if (d.w[t]) aq[t] = f_.add(aq[t], d.w[t]);
        auto& code = q[static_cast<std::size_t>(d.col)][static_cast<std::size_t>(d.k)];
        if (++dig[pos] < p) {
          code += d.unit;
          break;
        }
        dig[pos] = 0;
        code -= d.unit * (p - 1);
        ++pos;
      }
      if (pos == digits_.size()) return;
      visit(State{q, aq});
    }
  }

  int degree(const std::vector<Elem>& qj) const {
    for (int k = D_; k >= 0; --k)
      if (qj[static_cast<std::size_t>(k)]) return k;
    return -1;
  }
  int q_degree(const std::vector<std::vector<Elem>>& q) const {
    int d = -1;
    for (const auto& qj : q) d = std::max(d, degree(qj));
    return d;
  }
  // Leading coefficient of the first nonzero component equals 1.
  bool normalized(const std::vector<std::vector<Elem>>& q) const {
    for (const auto& qj : q) {
      const int d = degree(qj);
      if (d >= 0) return qj[static_cast<std::size_t>(d)] == 1;
    }
    return false;
  }

  struct Error {
    int exponent = kZeroNorm;  // log_s |{A q}| or an upper bound
    bool exact = true;
  };
  // Norm of the fractional part of A q, rows restricted to their windows.
  Error fractional_error(const std::vector<std::vector<Elem>>& q, const std::vector<Elem>& aq) const {
    Error err;
    int known = kZeroNorm, bound = kZeroNorm;
    for (int r = 0; r < m_; ++r) {
      int window = kUnbounded;
      for (int j = 0; j < n_; ++j) {
        const int dj = degree(q[static_cast<std::size_t>(j)]);
        const int pr = prec_[static_cast<std::size_t>(r * n_ + j)];
        if (dj >= 0 && pr != kUnbounded) window = std::min(window, pr - dj);
      }
      const int top = std::min(window, hi_);
      int first = kUnbounded;
      for (int idx = 1; idx <= top; ++idx)
        if (aq[static_cast<std::size_t>(r * width_ + idx - lo_)]) {
          first = idx;
          break;
        }
      if (first != kUnbounded)
        known = std::max(known, -first);
      else if (window != kUnbounded)
        bound = std::max(bound, -(window + 1));
    }
    if (bound > known) {
      err.exponent = bound;
      err.exact = false;
    } else {
      err.exponent = known;
    }
    return err;
  }

  std::vector<Poly> polys(const std::vector<std::vector<Elem>>& q) const {
    std::vector<Poly> out;
    for (const auto& qj : q) out.emplace_back(f_, qj);
    return out;
  }
  // p = -(polynomial part of A q)
  std::vector<Poly> best_p(const std::vector<Elem>& aq) const {
    std::vector<Poly> out;
    for (int r = 0; r < m_; ++r) {
      std::vector<Elem> c(static_cast<std::size_t>(D_ + 1), 0);
      for (int idx = lo_; idx <= 0; ++idx)
        c[static_cast<std::size_t>(-idx)] = f_.neg(aq[static_cast<std::size_t>(r * width_ + idx - lo_)]);
      out.emplace_back(f_, c);
    }
    return out;
  }

 private:
  struct Digit {
    int col, k;
    Elem unit;
    std::vector<Elem> w;
  };
  const Field& f_;
  int m_, n_, D_, lo_ = 0, hi_ = 0, width_ = 0;
  std::vector<int> prec_;
  std::vector<Digit> digits_;
};

// log_s psi(s^k), continued by psi(x0) below x0.
double log_psi_extended(const PsiFunction& psi, double k) { return psi.log_value(std::max(k, psi.log_x0())); }

}  // namespace

BestApprox best_integer_approx(const SeriesMatrix& a, const FlowSpec& spec, const std::vector<Poly>& q) {
  if (q.size() != static_cast<std::size_t>(spec.n)) throw std::invalid_argument("q must have n entries");
  const Field& f = spec.f();
  BestApprox out;
  int known = kZeroNorm, bound = kZeroNorm;
  for (int i = 0; i < spec.m; ++i) {
    LaurentSeries acc = LaurentSeries::zero(f);
    for (int j = 0; j < spec.n; ++j)
      acc = acc + a[static_cast<std::size_t>(i * spec.n + j)] * LaurentSeries::from_poly(q[static_cast<std::size_t>(j)]);
    auto [poly, frac] = acc.polynomial_part();
    out.p.push_back(-poly);
    if (frac.is_known_zero()) continue;
    if (frac.is_zero_in_window()) {
      bound = std::max(bound, -(frac.precision() + 1));
      continue;
    }
    known = std::max(known, -frac.valuation());
  }
  if (bound > known)
    throw PrecisionError("fractional part of A q vanishes inside the window; norm undetermined");
  out.error_exponent = known;
  return out;
}

std::vector<ApproxSolution> kg_solutions(const SeriesMatrix& a, const FlowSpec& spec, const PsiFunction& psi,
                                         int q_exp_max, std::size_t cap) {
  if (q_exp_max < 0) return {};
  QWalker walker(a, spec, q_exp_max);
  if (walker.box_size() > static_cast<double>(cap))
    throw std::length_error("kg search box of " + std::to_string(walker.box_size()) + " vectors exceeds cap");
  const double lx0 = psi.log_x0();
  std::vector<double> threshold(static_cast<std::size_t>(q_exp_max + 1));
  for (int d = 0; d <= q_exp_max; ++d)
    threshold[static_cast<std::size_t>(d)] =
        spec.n * d >= lx0 - 1e-12 ? psi.log_value(spec.n * d) : std::numeric_limits<double>::quiet_NaN();
  std::vector<ApproxSolution> out;
  walker.run([&](const QWalker::State& st) {
    if (!walker.normalized(st.q)) return;
    const int d = walker.q_degree(st.q);
    const double thr = threshold[static_cast<std::size_t>(d)];
    if (std::isnan(thr)) return;  // |q|^n below x0
    const auto err = walker.fractional_error(st.q, st.aq);
    const bool zero = err.exponent == kZeroNorm;
    const bool admit = zero || spec.m * static_cast<double>(err.exponent) < thr;
    if (!err.exact && !admit)
      throw PrecisionError("admission of q undecidable: fractional part known only to s^" +
                           std::to_string(err.exponent));
    if (!admit) return;
    out.push_back({walker.polys(st.q), walker.best_p(st.aq), err.exponent, err.exact, d});
  });
  return out;
}

KgReport kg_monte_carlo(const PsiFunction& psi, const FlowSpec& spec, int trials, int horizon, int precision,
                        std::uint64_t seed, int threads, const std::string& tag) {
  KgReport rep;
  rep.psi = psi.describe();
  rep.m = spec.m;
  rep.n = spec.n;
  rep.s = spec.f().size();
  rep.horizon = horizon;
  rep.precision = precision;
  rep.persistence_from = horizon / 2 + 1;
  rep.trials.assign(static_cast<std::size_t>(trials), {});
  parallel_for(static_cast<std::size_t>(trials), threads, [&](std::size_t i) {
    std::mt19937_64 rng = stream_rng(seed, tag, i);
    const SeriesMatrix a = sample_matrix(spec, precision, rng);
    KgTrial tr;
    tr.count_by_exponent.assign(static_cast<std::size_t>(horizon + 1), 0);
    for (const auto& sol : kg_solutions(a, spec, psi, horizon)) {
      ++tr.count_by_exponent[static_cast<std::size_t>(sol.q_exponent)];
      ++tr.total;
      if (sol.q_exponent >= rep.persistence_from) tr.persistent = true;
    }
    rep.trials[i] = std::move(tr);
  });
  long persistent = 0;
  rep.mean_cumulative.assign(static_cast<std::size_t>(horizon + 1), 0.0);
  for (const auto& tr : rep.trials) {
    persistent += tr.persistent;
    ++rep.counts_histogram[tr.total];
    long acc = 0;
    for (int d = 0; d <= horizon; ++d) {
      acc += tr.count_by_exponent[static_cast<std::size_t>(d)];
      rep.mean_cumulative[static_cast<std::size_t>(d)] += static_cast<double>(acc) / trials;
    }
  }
  rep.persistent_fraction = trials ? static_cast<double>(persistent) / trials : 0;
  return rep;
}

// ---------------------------------------------------------------- multiplicative

namespace {

bool normalized_vector(const std::vector<LaurentSeries>& v) {
  for (const auto& x : v)
    if (!x.is_known_zero()) return x.coeff(x.valuation()) == 1;
  return false;
}

}  // namespace

MultReport mult_solutions(const LatticeBasis& b, const std::function<double(int)>& log_psi, int norm_exp,
                          std::size_t cap) {
  if (b.rank() < 2) throw std::invalid_argument("multiplicative approximation needs rank >= 2");
  MultReport rep;
  for_each_short_vector(b, norm_exp, cap, [&](const std::vector<Poly>&, const std::vector<LaurentSeries>& v) {
    if (!normalized_vector(v)) return;
    ++rep.examined;
    if (std::any_of(v.begin(), v.end(), [](const LaurentSeries& x) { return x.is_known_zero(); })) {
      ++rep.degenerate;
      return;
    }
    const int norm = norm_exponent(v);
    int prod = 0;
    for (const auto& x : v) prod -= x.valuation();
    const double lp = log_psi(norm);
    if (std::isnan(lp)) {
      ++rep.out_of_domain;
      return;
    }
    if (prod <= norm + lp + 1e-12) rep.solutions.push_back({v, prod, norm});
  });
  return rep;
}

MultReport mult_solutions(const LatticeBasis& b, const PsiFunction& psi, int norm_exp, std::size_t cap) {
  return mult_solutions(
      b,
      [&psi](int k) {
        return k >= psi.log_x0() - 1e-12 ? psi.log_value(k) : std::numeric_limits<double>::quiet_NaN();
      },
      norm_exp, cap);
}

// ---------------------------------------------------------------- correspondence

namespace {

int ceil_threshold(double r) { return static_cast<int>(std::ceil(r - 1e-9)); }

}  // namespace

CorrespondenceReport correspondence_check(const SeriesMatrix& a, const FlowSpec& spec, const PsiFunction& psi,
                                          int T, int exhaustive_q_exp) {
  const RateFunction rate = psi_to_rate(psi, spec.m, spec.n);
  const Field& f = spec.f();
  const int m = spec.m, n = spec.n;
  CorrespondenceReport rep;
  TrajectoryEngine engine(a, spec);
  for (int t = 1; t <= T; ++t) {
    engine.advance();
    CorrespondenceRow row;
    row.t = t;
    const DeltaValue d = engine.delta();
    if (!d.certified) throw PrecisionError("correspondence check: Delta not certified at t = " + std::to_string(t));
    row.delta = d.value;
    const double at = static_cast<double>(m) * n * t;
    if (at < rate.a0()) {
      row.note = "mnt below a0";
      ++rep.skipped;
      rep.rows.push_back(std::move(row));
      continue;
    }
    const int R = ceil_threshold(rate.r(at));
    row.threshold = R;
    row.flagged = d.value >= R;
    if (!row.flagged) {
      rep.rows.push_back(std::move(row));
      continue;
    }
    ++rep.flagged;
    const auto w = engine.shortest();
    row.q = w.q;
    row.p = w.p;
    int q_exp = -1;
    for (const Poly& qj : w.q) q_exp = std::max(q_exp, qj.degree());
    row.q_exponent = q_exp;
    if (q_exp < 0) {
      row.note = "witness has q = 0";
      ++rep.skipped;
      rep.rows.push_back(std::move(row));
      continue;
    }
    // recompute p + A q from A itself
    bool in_window = q_exp <= m * t - R;
    int err = kZeroNorm;
    for (int i = 0; i < m; ++i) {
      LaurentSeries e = LaurentSeries::from_poly(w.p[static_cast<std::size_t>(i)]);
      for (int j = 0; j < n; ++j)
        e = e + a[static_cast<std::size_t>(i * n + j)] * LaurentSeries::from_poly(w.q[static_cast<std::size_t>(j)]);
      if (e.norm_at_most(R + n * t) != Tri::True) in_window = false;
      if (e.is_known_zero()) continue;
      err = std::max(err, e.is_zero_in_window() ? -(e.precision() + 1) : -e.valuation());
    }
    (void)f;
    row.error_exponent = err;
    const bool approx = err == kZeroNorm || m * static_cast<double>(err) <= log_psi_extended(psi, n * q_exp) + 1e-9;
    row.verified = in_window && approx;
    if (row.verified) {
      ++rep.verified;
    } else {
      ++rep.counterexamples;
      std::ostringstream os;
      os << "counterexample: |q| = s^" << q_exp << ", |p + A q| <= s^" << err << ", window q <= s^" << (m * t - R)
         << ", error <= s^" << (-R - n * t);
      row.note = os.str();
    }
    const int box = m * t - R;
    if (box >= 0 && box <= exhaustive_q_exp) {
      QWalker walker(a, spec, box);
      bool found = false;
      walker.run([&](const QWalker::State& st) {
        if (found) return;
        const auto e = walker.fractional_error(st.q, st.aq);
        if (e.exponent == kZeroNorm || e.exponent <= -R - n * t) found = true;
      });
      row.exhaustive_checked = found;
      if (!found) {
        ++rep.counterexamples;
        row.note += (row.note.empty() ? "" : "; ") + std::string("exhaustive search found no solution");
      }
    }
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

std::vector<ChamberRow> multiplicative_scan(const LatticeBasis& b, const PsiFunction& psi, int radius) {
  const int r = b.rank();
  if (r < 2) throw std::invalid_argument("multiplicative scan needs rank >= 2");
  const RateFunction rate = psi_to_rate(psi, r - 1, 1);
  std::map<std::vector<int>, ChamberRow> rows;
  std::vector<int> t(static_cast<std::size_t>(r), -radius);
  while (true) {
    if (std::accumulate(t.begin(), t.end(), 0) == 0) {
      std::vector<int> order(static_cast<std::size_t>(r));
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return t[x] < t[y]; });
      ChamberRow& row = rows[order];
      row.order = order;
      ++row.drifts;
      const DriftVector drift(t);
      const double a = drift.minus_norm();
      if (a >= rate.a0()) {
        const int R = ceil_threshold(rate.r(a));
        const LatticeBasis moved = flow_apply(b, drift);
        const ReducedBasis red = reduce(moved);
        int best = 0;
        for (int j = 1; j < r; ++j)
          if (red.column_degrees[j] < red.column_degrees[best]) best = j;
        if (red.scale - red.column_degrees[best] >= R) {
          ++row.flagged;
          std::vector<LaurentSeries> v;
          for (int i = 0; i < r; ++i)
            v.push_back(LaurentSeries::from_poly(red.matrix(i, best)).shifted(-red.scale - t[i]));
          if (std::any_of(v.begin(), v.end(), [](const LaurentSeries& x) { return x.is_known_zero(); })) {
            ++row.degenerate;
          } else {
            const int norm = norm_exponent(v);
            int prod = 0;
            for (const auto& x : v) prod -= x.valuation();
            if (prod <= norm + log_psi_extended(psi, norm) + 1e-9)
              ++row.verified;
            else
              ++row.failed;
          }
        }
      }
    }
    std::size_t i = 0;
    while (i < t.size() && ++t[i] > radius) t[i++] = -radius;
    if (i == t.size()) break;
  }
  std::vector<ChamberRow> out;
  for (auto& [k, v] : rows) out.push_back(v);
  return out;
}

ZeroBlockResult zero_block_detector(const SeriesMatrix& a, const FlowSpec& spec, int q_exp_max) {
  ZeroBlockResult res;
  QWalker walker(a, spec, q_exp_max);
  walker.run([&](const QWalker::State& st) {
    if (res.flag && res.exact) return;
    const auto err = walker.fractional_error(st.q, st.aq);
    if (err.exponent != kZeroNorm) return;
    if (!res.flag || (err.exact && !res.exact)) {
      res.flag = true;
      res.exact = err.exact;
      res.q = walker.polys(st.q);
    }
  });
  return res;
}

ZeroBlockResult zero_block_detector(const LatticeBasis& b, int m, int norm_exp) {
  ZeroBlockResult res;
  for_each_short_vector(b, norm_exp, 4'000'000, [&](const std::vector<Poly>& q, const std::vector<LaurentSeries>& v) {
    if (res.flag) return;
    bool zero = true;
    for (int i = 0; i < m; ++i) zero = zero && v[static_cast<std::size_t>(i)].is_known_zero();
    if (zero) {
      res.flag = true;
      res.q = q;
    }
  });
  return res;
}

std::string solutions_csv(const std::vector<ApproxSolution>& sols) {
  auto join = [](const std::vector<Poly>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + v[i].to_string();
    return s;
  };
  std::ostringstream os;
  os << "q,p,err_exp,q_exp\n";
  for (const auto& s : sols)
    os << '"' << join(s.q) << "\",\"" << join(s.p) << "\","
       << (s.error_exponent == kZeroNorm ? std::string("-inf") : std::to_string(s.error_exponent)) << ','
       << s.q_exponent << '\n';
  return os.str();
}

}  // namespace ultralog
