#include "ultralog/daniflow.hpp"

#include <algorithm>
#include <climits>
#include <numeric>
#include <sstream>

#include "ultralog/util.hpp"

namespace ultralog {

FlowSpec::FlowSpec(int m_, int n_, const Field& f) : m(m_), n(n_), field(&f) {
  if (m < 1 || n < 1) throw std::invalid_argument("flow needs m, n >= 1");
}

LatticeBasis unipotent_lattice(const SeriesMatrix& a, const FlowSpec& spec) {
  const int m = spec.m, n = spec.n, r = spec.rank();
  if (a.size() != static_cast<std::size_t>(m * n)) throw std::invalid_argument("A must be m x n");
  for (const auto& x : a)
    if (!x.is_known_zero() && !x.is_zero_in_window() && x.valuation() < 0)
      throw std::invalid_argument("entry of A outside O: " + x.to_string());
  const Field& f = spec.f();
  std::vector<LaurentSeries> e(static_cast<std::size_t>(r * r), LaurentSeries::zero(f));
  for (int i = 0; i < r; ++i) e[static_cast<std::size_t>(i * r + i)] = LaurentSeries::monomial(f, 1, 0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) e[static_cast<std::size_t>(i * r + m + j)] = a[static_cast<std::size_t>(i * n + j)];
  return LatticeBasis(f, r, std::move(e));
}

SeriesMatrix sample_matrix(const FlowSpec& spec, int precision, std::mt19937_64& rng) {
  const Field& f = spec.f();
  SeriesMatrix a;
  for (int k = 0; k < spec.m * spec.n; ++k) {
    std::vector<Elem> c(static_cast<std::size_t>(precision + 1));
    for (auto& x : c) x = static_cast<Elem>(uniform_below(rng, f.size()));
    a.push_back(LaurentSeries::from_coeffs(f, 0, std::move(c), precision));
  }
  return a;
}

DriftVector::DriftVector(std::vector<int> entries) : t(std::move(entries)) {
  if (std::accumulate(t.begin(), t.end(), 0) != 0) throw std::invalid_argument("drift entries must sum to 0");
}

int DriftVector::minus_norm() const {
  int out = 0;
  for (int x : t)
    if (x <= 0) out = std::max(out, -x);
  return out;
}

LatticeBasis flow_apply(const LatticeBasis& b, const FlowSpec& spec, int t) {
  if (b.rank() != spec.rank()) throw std::invalid_argument("flow rank mismatch");
  std::vector<int> ex(static_cast<std::size_t>(spec.rank()));
  for (int i = 0; i < spec.rank(); ++i) ex[static_cast<std::size_t>(i)] = i < spec.m ? spec.n * t : -spec.m * t;
  return b.diagonal_action(ex);
}

LatticeBasis flow_apply(const LatticeBasis& b, const DriftVector& drift) { return b.diagonal_action(drift.t); }

// ---------------------------------------------------------------- psi and r

namespace {

double log_s(unsigned s, double x) { return std::log(x) / std::log(static_cast<double>(s)); }

}  // namespace

PsiFunction PsiFunction::power_law(unsigned s, double c, double tau, double x0) {
  if (tau < 0) throw std::invalid_argument("power law exponent must be >= 0");
  if (x0 <= 0) throw std::invalid_argument("x0 must be positive");
  PsiFunction p;
  p.family_ = Family::PowerLaw;
  p.s_ = s;
  p.x0_ = x0;
  p.params_ = {c, tau};
  return p;
}

PsiFunction PsiFunction::log_power(unsigned s, double sigma, double x0) {
  if (x0 <= 1) throw std::invalid_argument("log-power psi needs x0 > 1");
  if (sigma < 0) throw std::invalid_argument("log-power exponent must be >= 0");
  PsiFunction p;
  p.family_ = Family::LogPower;
  p.s_ = s;
  p.x0_ = x0;
  p.params_ = {sigma};
  return p;
}

PsiFunction PsiFunction::table(unsigned s, std::vector<std::pair<double, double>> points) {
  if (points.size() < 2) throw std::invalid_argument("psi table needs at least two points");
  std::sort(points.begin(), points.end());
  PsiFunction p;
  p.family_ = Family::Table;
  p.s_ = s;
  p.x0_ = points.front().first;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto [x, y] = points[i];
    if (x <= 0 || y <= 0) throw std::invalid_argument("psi table entries must be positive");
    if (i > 0 && (x == points[i - 1].first || y > points[i - 1].second))
      throw std::invalid_argument("psi table is not non-increasing at x = " + std::to_string(x));
    p.table_.emplace_back(log_s(s, x), log_s(s, y));
  }
  return p;
}

double PsiFunction::log_value(double b) const {
  if (b < log_x0() - 1e-9) throw std::domain_error("psi evaluated below x0 at log_s x = " + std::to_string(b));
  switch (family_) {
    case Family::PowerLaw:
      return -params_[0] - params_[1] * b;
    case Family::LogPower:
      return -b - params_[0] * std::log(b) / std::log(static_cast<double>(s_));
    case Family::Table: {
      auto it = std::upper_bound(table_.begin(), table_.end(), b,
                                 [](double v, const std::pair<double, double>& e) { return v < e.first; });
      std::size_t hi = static_cast<std::size_t>(it - table_.begin());
      hi = std::clamp<std::size_t>(hi, 1, table_.size() - 1);
      const auto [x1, y1] = table_[hi - 1];
      const auto [x2, y2] = table_[hi];
      return y1 + (y2 - y1) * (b - x1) / (x2 - x1);
    }
    case Family::FromRate: {
      const double a = rate_->lambda_inverse(b);
      return -rate_->L(a);
    }
  }
  return 0;
}

double PsiFunction::operator()(double x) const {
  return std::pow(static_cast<double>(s_), log_value(log_s(s_, x)));
}

std::string PsiFunction::describe() const {
  std::ostringstream os;
  switch (family_) {
    case Family::PowerLaw:
      os << "power_law(c=" << params_[0] << ", tau=" << params_[1] << ")";
      break;
    case Family::LogPower:
      os << "log_power(sigma=" << params_[0] << ")";
      break;
    case Family::Table:
      os << "table(" << table_.size() << " points)";
      break;
    case Family::FromRate:
      os << "from_rate";
      break;
  }
  return os.str();
}

RateFunction::RateFunction(int m, int n, unsigned s, double a0, std::function<double(double)> r)
    : m_(m), n_(n), s_(s), a0_(a0), r_(std::move(r)) {
  if (m < 1 || n < 1) throw std::invalid_argument("rate function needs m, n >= 1");
}

double RateFunction::r(double a) const {
  if (a < a0_ - 1e-9) throw std::domain_error("rate evaluated below a0 at a = " + std::to_string(a));
  return r_(a);
}

double RateFunction::lambda_inverse(double b) const {
  double lo = a0_;
  if (lambda(lo) >= b) return lo;
  double width = 1;
  double hi = lo + width;
  while (lambda(hi) < b) {
    lo = hi;
    width *= 2;
    hi = lo + width;
    if (width > 1e12) throw std::runtime_error("lambda does not reach " + std::to_string(b));
  }
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    (lambda(mid) < b ? lo : hi) = mid;
  }
  return hi;
}

RateFunction psi_to_rate(const PsiFunction& psi, int m, int n) {
  const double lx0 = psi.log_x0();
  double prev = psi.log_value(lx0);
  for (double b = lx0 + 0.25; b <= lx0 + 64; b += 0.25) {
    const double v = psi.log_value(b);
    if (!std::isfinite(v) || v > prev + 1e-12)
      throw std::invalid_argument("psi is not non-increasing near log_s x = " + std::to_string(b));
    prev = v;
  }
  const double a0 = (m * lx0 - n * psi.log_value(lx0)) / (m + n);
  auto solve = [psi, m, n, lx0](double a) {
    auto f = [&](double r) { return psi.log_value(a - n * r) + a + m * r; };
    double hi = (a - lx0) / n;
    if (f(hi) <= 0) return hi;
    double lo = hi - 1, width = 1;
    while (f(lo) > 0) {
      width *= 2;
      lo = hi - width;
      if (width > 1e12) throw std::runtime_error("rate bisection bracket failed at a = " + std::to_string(a));
    }
    for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
      const double mid = 0.5 * (lo + hi);
      (f(mid) > 0 ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
  };
  return RateFunction(m, n, psi.base(), a0, solve);
}

PsiFunction rate_to_psi(const RateFunction& r) {
  PsiFunction p;
  p.family_ = PsiFunction::Family::FromRate;
  p.s_ = r.base();
  p.rate_ = std::make_shared<RateFunction>(r);
  p.x0_ = std::pow(static_cast<double>(r.base()), r.lambda(r.a0()));
  return p;
}

std::vector<Coc4Row> coc4_partial_sums(const PsiFunction& psi, const RateFunction& rate, int q,
                                       const std::vector<double>& horizons, double step) {
  const double s = psi.base(), ln_s = std::log(s);
  const int mn = rate.m() + rate.n();
  auto psi_integrand = [&](double b) { return std::pow(b, q) * std::pow(s, b + psi.log_value(b)) * ln_s; };
  auto rate_integrand = [&](double a) { return std::pow(a, q) * std::pow(s, -mn * rate.r(a)); };
  std::vector<double> hs = horizons;
  std::sort(hs.begin(), hs.end());
  std::vector<Coc4Row> out;
  double b = psi.log_x0(), a = rate.a0(), sum_psi = 0, sum_rate = 0;
  double fb = psi_integrand(b), fa = rate_integrand(a);
  for (double h : hs) {
    while (b < h) {
      const double nb = std::min(h, b + step);
      const double fnb = psi_integrand(nb);
      sum_psi += 0.5 * (fb + fnb) * (nb - b);
      b = nb;
      fb = fnb;
    }
    const double ah = rate.lambda_inverse(h);
    while (a < ah) {
      const double na = std::min(ah, a + step);
      const double fna = rate_integrand(na);
      sum_rate += 0.5 * (fa + fna) * (na - a);
      a = na;
      fa = fna;
    }
    out.push_back({h, sum_psi, sum_rate});
  }
  return out;
}

// ---------------------------------------------------------------- trajectories

namespace {
constexpr int kNone = INT_MIN;
constexpr int kInf = LaurentSeries::kInfinitePrecision;
}  // namespace

TrajectoryEngine::Dense TrajectoryEngine::to_dense(const LaurentSeries& x) {
  Dense d;
  d.exact = x.exact();
  d.prec = x.precision();
  if (x.is_known_zero()) return d;
  if (x.is_zero_in_window()) {
    d.lo = d.prec + 1;
    return d;
  }
  d.lo = x.order_bound();
  for (int i = d.lo; i <= x.last_index(); ++i) d.c.push_back(x.coeff(i));
  return d;
}

void TrajectoryEngine::sub_scaled(Dense& a, Elem c, int k, const Dense& b) const {
  const Field& f = spec_.f();
  const bool exact = a.exact && b.exact;
  int prec = kInf;
  if (!exact) {
    prec = a.exact ? kInf : a.prec;
    if (!b.exact) prec = std::min(prec, b.prec - k);
  }
  const bool a_has = !a.empty(), b_has = !b.empty();
  const int a_hi = a.lo + static_cast<int>(a.c.size()) - 1;
  const int b_lo = b.lo - k, b_hi = b.lo - k + static_cast<int>(b.c.size()) - 1;
  int lo = INT_MAX, hi = INT_MIN;
  if (a_has) lo = std::min(lo, a.lo), hi = std::max(hi, a_hi);
  if (b_has) lo = std::min(lo, b_lo), hi = std::max(hi, b_hi);
  hi = std::min(hi, prec);
  std::vector<Elem> out;
  if (hi >= lo) {
    out.assign(static_cast<std::size_t>(hi - lo + 1), 0);
    if (a_has)
      for (int i = a.lo; i <= std::min(a_hi, hi); ++i) out[static_cast<std::size_t>(i - lo)] = a.c[static_cast<std::size_t>(i - a.lo)];
    if (b_has) {
      const Elem nc = f.neg(c);
      const int top = std::min(b_hi, hi);
      const std::size_t off = static_cast<std::size_t>(b_lo - lo);
      const std::size_t len = top >= b_lo ? static_cast<std::size_t>(top - b_lo + 1) : 0;
      if (f.characteristic() == 2 && f.degree() == 1) {
        for (std::size_t i = 0; i < len; ++i) out[off + i] ^= b.c[i];
      } else {
        for (std::size_t i = 0; i < len; ++i)
          if (b.c[i]) out[off + i] = f.add(out[off + i], f.mul(nc, b.c[i]));
      }
    }
  }
  std::size_t first = 0, last = out.size();
  while (first < last && out[first] == 0) ++first;
  while (last > first && out[last - 1] == 0) --last;
  a.exact = exact;
  a.prec = prec;
  if (first == last) {
    a.c.clear();
    a.lo = exact ? 0 : prec + 1;
    return;
  }
  a.lo = lo + static_cast<int>(first);
  if (first > 0 || last < out.size()) {
    a.c.assign(out.begin() + static_cast<std::ptrdiff_t>(first), out.begin() + static_cast<std::ptrdiff_t>(last));
  } else {
    a.c = std::move(out);
  }
}

TrajectoryEngine::TrajectoryEngine(const SeriesMatrix& a, const FlowSpec& spec) : spec_(spec) {
  const int m = spec.m, n = spec.n;
  if (a.size() != static_cast<std::size_t>(m * n)) throw std::invalid_argument("A must be m x n");
  const Field& f = spec.f();
  for (const auto& x : a) {
    if (!x.is_known_zero() && !x.is_zero_in_window() && x.valuation() < 0)
      throw std::invalid_argument("entry of A outside O: " + x.to_string());
    a_.push_back(to_dense(x));
  }
  for (int j = 0; j < m; ++j) {
    Column col;
    for (int i = 0; i < m; ++i) {
      col.e.push_back(to_dense(i == j ? LaurentSeries::monomial(f, 1, 0) : LaurentSeries::zero(f)));
      col.p.push_back(i == j ? Poly::constant(f, 1) : Poly(f));
    }
    for (int i = 0; i < n; ++i) col.q.emplace_back(f);
    cols_.push_back(std::move(col));
  }
  for (int j = 0; j < n; ++j) {
    Column col;
    for (int i = 0; i < m; ++i) {
      col.e.push_back(a_[static_cast<std::size_t>(i * n + j)]);
      col.p.emplace_back(f);
    }
    for (int i = 0; i < n; ++i) col.q.push_back(i == j ? Poly::constant(f, 1) : Poly(f));
    cols_.push_back(std::move(col));
  }
  reduce();
}

void TrajectoryEngine::column_degree(const Column& col, int& deg, int& piv) const {
  deg = kNone;
  piv = -1;
  for (int i = 0; i < spec_.m; ++i) {
    const Dense& e = col.e[static_cast<std::size_t>(i)];
    if (e.empty()) continue;
    const int d = spec_.n * t_ - e.lo;
    if (d > deg) deg = d, piv = i;
  }
  for (int i = 0; i < spec_.n; ++i) {
    const Poly& q = col.q[static_cast<std::size_t>(i)];
    if (q.is_zero()) continue;
    const int d = q.degree() - spec_.m * t_;
    if (d > deg) deg = d, piv = spec_.m + i;
  }
}

void TrajectoryEngine::reduce() {
  const Field& f = spec_.f();
  const int r = spec_.rank(), m = spec_.m;
  std::vector<int> deg(static_cast<std::size_t>(r)), piv(static_cast<std::size_t>(r));
  for (int j = 0; j < r; ++j) {
    column_degree(cols_[j], deg[j], piv[j]);
    if (deg[j] == kNone) throw PrecisionError("basis column vanished inside the precision window");
  }
  while (true) {
    int target = -1, other = -1;
    for (int row = 0; row < r && target < 0; ++row) {
      int count = 0;
      for (int j = 0; j < r; ++j) count += piv[j] == row;
      if (count < 2) continue;
      for (int j = 0; j < r; ++j)
        if (piv[j] == row && (target < 0 || deg[j] >= deg[target])) target = j;
      for (int j = 0; j < r; ++j)
        if (piv[j] == row && j != target && (other < 0 || deg[j] < deg[other])) other = j;
    }
    if (target < 0) return;
    Column& ct = cols_[target];
    const Column& co = cols_[other];
    const int row = piv[target];
    auto lead = [&](const Column& c) {
      return row < m ? c.e[static_cast<std::size_t>(row)].c.front() : c.q[static_cast<std::size_t>(row - m)].leading();
    };
    const Elem c = f.div(lead(ct), lead(co));
    const int k = deg[target] - deg[other];
    for (int i = 0; i < m; ++i) {
      sub_scaled(ct.e[i], c, k, co.e[i]);
      if (!co.p[i].is_zero()) ct.p[i] -= co.p[i].scaled(c).shifted(k);
    }
    for (int i = 0; i < spec_.n; ++i)
      if (!co.q[i].is_zero()) ct.q[i] -= co.q[i].scaled(c).shifted(k);
    column_degree(ct, deg[target], piv[target]);
    // the tracked window shrinks by k per step while the true one is P - deg q
    const int u = column_uncertainty(ct);
    if (u != kNone && (deg[target] == kNone || u >= deg[target])) {
      refresh_column(ct);
      column_degree(ct, deg[target], piv[target]);
    }
    if (deg[target] == kNone) throw PrecisionError("basis column vanished inside the precision window");
  }
}

void TrajectoryEngine::advance() {
  ++t_;
  reduce();
}

void TrajectoryEngine::advance_to(int t) {
  if (t < t_) throw std::invalid_argument("trajectory engine cannot run backwards");
  while (t_ < t) advance();
}

int TrajectoryEngine::column_uncertainty(const Column& col) const {
  int u = kNone;
  for (const Dense& e : col.e)
    if (!e.exact) u = std::max(u, spec_.n * t_ - e.prec - 1);
  return u;
}

void TrajectoryEngine::refresh_column(Column& col) const {
  const Field& f = spec_.f();
  const int m = spec_.m, n = spec_.n;
  for (int i = 0; i < m; ++i) {
    Dense acc = to_dense(LaurentSeries::from_poly(col.p[i]));
    for (int j = 0; j < n; ++j) {
      const Poly& q = col.q[j];
      for (int k = 0; k <= q.degree(); ++k)
        if (q[k]) sub_scaled(acc, f.neg(q[k]), k, a_[static_cast<std::size_t>(i * n + j)]);
    }
    col.e[i] = std::move(acc);
  }
}

int TrajectoryEngine::precision_shortfall() const {
  int need = 0;
  for (const Column& col : cols_) {
    int deg, piv;
    column_degree(col, deg, piv);
    const int u = column_uncertainty(col);
    if (u != kNone) need = std::max(need, u - deg + 1);
  }
  return need;
}

DeltaValue TrajectoryEngine::delta() {
  // A reduction step can only shrink a tracked window; recomputing e = p + A q
  // restores the full window P - deg q. Repeat while that changes anything.
  for (int round = 0; round <= spec_.rank(); ++round) {
    bool refreshed = false;
    for (Column& col : cols_) {
      int deg, piv;
      column_degree(col, deg, piv);
      const int u = column_uncertainty(col);
      if (u == kNone || u < deg) continue;
      const int before = u;
      refresh_column(col);
      refreshed = refreshed || column_uncertainty(col) < before;
    }
    if (!refreshed) break;
    reduce();
  }
  DeltaValue d;
  int min_deg = INT_MAX;
  for (const Column& col : cols_) {
    int deg, piv;
    column_degree(col, deg, piv);
    min_deg = std::min(min_deg, deg);
  }
  d.value = -min_deg;
  d.certified = precision_shortfall() == 0;
  return d;
}

TrajectoryEngine::Vector TrajectoryEngine::shortest() const {
  int best = INT_MAX, which = 0;
  for (int j = 0; j < spec_.rank(); ++j) {
    int deg, piv;
    column_degree(cols_[j], deg, piv);
    if (deg < best) best = deg, which = j;
  }
  return {cols_[which].p, cols_[which].q, best};
}

std::vector<TrajectoryPoint> delta_trajectory(const SeriesMatrix& a, const FlowSpec& spec, int T) {
  int prec = kInf;
  for (const auto& x : a) prec = std::min(prec, x.precision());
  TrajectoryEngine engine(a, spec);
  std::vector<TrajectoryPoint> out;
  for (int t = 1; t <= T; ++t) {
    engine.advance();
    const DeltaValue d = engine.delta();
    if (!d.certified)
      throw PrecisionError("trajectory not certified at t = " + std::to_string(t) + ": precision " +
                           std::to_string(prec) + " needs at least " +
                           std::to_string(prec + engine.precision_shortfall()) + "; " +
                           std::to_string(trajectory_precision(spec, T)) + " suffices for T = " +
                           std::to_string(T));
    out.push_back({t, d});
  }
  return out;
}

std::string trajectory_csv(const std::vector<TrajectoryPoint>& points) {
  std::ostringstream os;
  os << "t,delta,certified\n";
  for (const auto& p : points) os << p.t << ',' << p.delta.value << ',' << (p.delta.certified ? 1 : 0) << '\n';
  return os.str();
}

// ---------------------------------------------------------------- statistics

TailTable tail_from_values(unsigned s, const std::vector<int>& deltas, int n_max, long min_hits) {
  TailTable t;
  t.s = s;
  t.samples = static_cast<long>(deltas.size());
  if (t.samples == 0) throw std::runtime_error("tail table needs samples");
  const double z = 1.959963984540054;
  for (int k = 0; k <= n_max; ++k) {
    const long h = std::count_if(deltas.begin(), deltas.end(), [k](int d) { return d >= k; });
    const double nn = static_cast<double>(t.samples), ph = static_cast<double>(h) / nn;
    const double denom = 1 + z * z / nn;
    const double centre = (ph + z * z / (2 * nn)) / denom;
    const double half = z * std::sqrt(ph * (1 - ph) / nn + z * z / (4 * nn * nn)) / denom;
    t.n.push_back(k);
    t.hits.push_back(h);
    t.phi.push_back(ph);
    t.ci_lo.push_back(std::max(0.0, centre - half));
    t.ci_hi.push_back(std::min(1.0, centre + half));
  }
  std::vector<double> xs, ys;
  for (int k = 1; k <= n_max; ++k)
    if (t.hits[static_cast<std::size_t>(k)] >= min_hits) {
      xs.push_back(k);
      ys.push_back(std::log(t.phi[static_cast<std::size_t>(k)]) / std::log(static_cast<double>(s)));
    }
  t.fit_bins = static_cast<int>(xs.size());
  if (xs.size() < 2)
    throw std::runtime_error("insufficient samples: only " + std::to_string(xs.size()) + " tail bins have " +
                             std::to_string(min_hits) + " hits");
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(ys.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  const double slope = sxy / sxx;
  t.kappa = -slope;
  t.constant = std::pow(static_cast<double>(s), my - slope * mx);
  return t;
}

TailTable tail_distribution(const SamplerSpec& sampler, int n_max, long samples) {
  std::vector<int> deltas(static_cast<std::size_t>(samples));
  const int prec = trajectory_precision(sampler.flow, sampler.burn_in);
  parallel_for(deltas.size(), sampler.threads, [&](std::size_t i) {
    std::mt19937_64 rng = stream_rng(sampler.seed, sampler.tag, i);
    TrajectoryEngine engine(sample_matrix(sampler.flow, prec, rng), sampler.flow);
    engine.advance_to(sampler.burn_in);
    const DeltaValue d = engine.delta();
    if (!d.certified) throw PrecisionError("tail sample " + std::to_string(i) + " not certified");
    deltas[i] = d.value;
  });
  return tail_from_values(sampler.flow.f().size(), deltas, n_max);
}

StrongBcResult strong_bc_experiment(const SamplerSpec& sampler, const std::function<int(int)>& threshold,
                                    const std::function<double(int)>& phi, int N, int trials, double floor,
                                    bool keep_indicators) {
  StrongBcResult res;
  res.N = N;
  res.trials = trials;
  for (int t = 1; t <= N; ++t) res.thresholds.push_back(threshold(t));
  for (int c = 1; c < N; c *= 2) res.checkpoints.push_back(c);
  res.checkpoints.push_back(N);
  {
    double acc = 0;
    std::size_t next = 0;
    for (int t = 1; t <= N; ++t) {
      acc += phi(res.thresholds[static_cast<std::size_t>(t - 1)]);
      if (next < res.checkpoints.size() && res.checkpoints[next] == t) {
        res.denominators.push_back(acc);
        ++next;
      }
    }
  }
  res.below_floor = res.denominators.back() < floor;
  res.counts.assign(static_cast<std::size_t>(trials), {});
  res.indicators.assign(keep_indicators ? static_cast<std::size_t>(trials) : 0, {});
  const int prec = trajectory_precision(sampler.flow, sampler.burn_in + N);
  parallel_for(static_cast<std::size_t>(trials), sampler.threads, [&](std::size_t i) {
    std::mt19937_64 rng = stream_rng(sampler.seed, sampler.tag, i);
    TrajectoryEngine engine(sample_matrix(sampler.flow, prec, rng), sampler.flow);
    engine.advance_to(sampler.burn_in);
    std::vector<long> counts;
    std::vector<unsigned char> ind;
    long hits = 0;
    std::size_t next = 0;
    for (int t = 1; t <= N; ++t) {
      engine.advance();
      const DeltaValue d = engine.delta();
      if (!d.certified)
        throw PrecisionError("trial " + std::to_string(i) + " not certified at t = " + std::to_string(t));
      const bool hit = d.value >= res.thresholds[static_cast<std::size_t>(t - 1)];
      hits += hit;
      if (keep_indicators) ind.push_back(hit);
      if (next < res.checkpoints.size() && res.checkpoints[next] == t) {
        counts.push_back(hits);
        ++next;
      }
    }
    res.counts[i] = std::move(counts);
    if (keep_indicators) res.indicators[i] = std::move(ind);
  });
  for (const auto& c : res.counts) res.terminal_ratios.push_back(static_cast<double>(c.back()) / res.denominators.back());
  for (double q : {0.1, 0.25, 0.5, 0.75, 0.9}) res.ratio_quantiles.push_back(quantile(res.terminal_ratios, q));
  res.median_ratio = res.ratio_quantiles[2];
  return res;
}

std::vector<double> ed_partial_sums(const FlowSpec& flow, double beta, int N) {
  const double base = std::pow(static_cast<double>(flow.f().size()), -beta * std::max(flow.m, flow.n));
  std::vector<double> out;
  for (int n = 1; n <= N; ++n) {
    // the supremum over u sits at the centre of [1, n]
    const int u = (n + 1) / 2;
    double acc = 0;
    for (int t = 1; t <= n; ++t) acc += std::pow(base, std::abs(t - u));
    out.push_back(acc);
  }
  return out;
}

DiagnosticsReport quasi_independence_report(const StrongBcResult& run, const std::function<double(int)>& phi,
                                            const FlowSpec& flow, int M, int N, double beta,
                                            const std::vector<int>& lags) {
  if (run.indicators.empty()) throw std::invalid_argument("strong BC run kept no indicators");
  if (M < 1 || N > run.N || M > N) throw std::invalid_argument("window outside the run");
  DiagnosticsReport rep;
  rep.M = M;
  rep.N = N;
  const double trials = static_cast<double>(run.indicators.size());
  auto h = [&](std::size_t x, int t) { return static_cast<double>(run.indicators[x][static_cast<std::size_t>(t - 1)]); };
  std::vector<double> mean(static_cast<std::size_t>(run.N + 1), 0.0);
  for (int t = 1; t <= run.N; ++t) {
    for (std::size_t x = 0; x < run.indicators.size(); ++x) mean[t] += h(x, t);
    mean[t] /= trials;
  }
  double s = 0, e = 0;
  for (int t = 1; t <= N; ++t) {
    s += mean[t];
    e += phi(run.thresholds[static_cast<std::size_t>(t - 1)]);
    if (t >= M) {
      rep.mean_counts.push_back(s);
      rep.expectations.push_back(e);
    }
  }
  std::vector<double> window(run.indicators.size(), 0.0);
  for (std::size_t x = 0; x < run.indicators.size(); ++x)
    for (int t = M; t <= N; ++t) window[x] += h(x, t);
  const double wm = std::accumulate(window.begin(), window.end(), 0.0) / trials;
  double var = 0;
  for (double w : window) var += (w - wm) * (w - wm);
  rep.correlation_excess = var / trials;
  rep.constant = wm > 0 ? rep.correlation_excess / wm : 0;
  for (int lag : lags) {
    if (lag < 0 || M + lag > N) continue;
    double acc = 0;
    int terms = 0;
    for (int t = M; t + lag <= N; ++t, ++terms) {
      double joint = 0;
      for (std::size_t x = 0; x < run.indicators.size(); ++x) joint += h(x, t) * h(x, t + lag);
      acc += joint / trials - mean[t] * mean[t + lag];
    }
    rep.lag_covariance.emplace_back(lag, acc / terms);
  }
  rep.ed_partial_sums = ed_partial_sums(flow, beta, N);
  return rep;
}

}  // namespace ultralog
