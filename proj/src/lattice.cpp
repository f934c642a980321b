#include "ultralog/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace ultralog {

// ---------------------------------------------------------------- PolyMatrix

PolyMatrix::PolyMatrix(const Field& f, int rows, int cols)
    : f_(&f), rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows * cols), Poly(f)) {
  if (rows < 0 || cols < 0) throw std::invalid_argument("negative matrix dimension");
}

PolyMatrix PolyMatrix::identity(const Field& f, int n) {
  PolyMatrix m(f, n, n);
  for (int i = 0; i < n; ++i) m(i, i) = Poly::constant(f, 1);
  return m;
}

int PolyMatrix::column_degree(int c) const {
  int d = -1;
  for (const Poly& p : column(c)) d = std::max(d, p.degree());
  return d;
}

PolyMatrix operator*(const PolyMatrix& a, const PolyMatrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matrix shape mismatch");
  PolyMatrix r(a.field(), a.rows(), b.cols());
  for (int j = 0; j < b.cols(); ++j)
    for (int k = 0; k < a.cols(); ++k) {
      if (b(k, j).is_zero()) continue;
      for (int i = 0; i < a.rows(); ++i)
        if (!a(i, k).is_zero()) r(i, j) += a(i, k) * b(k, j);
    }
  return r;
}

Poly determinant(const PolyMatrix& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("determinant of a non-square matrix");
  const Field& f = m.field();
  const int n = m.rows();
  if (n == 0) return Poly::constant(f, 1);
  std::vector<std::vector<Poly>> a(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a[i].push_back(m(i, j));
  bool negate = false;
  Poly prev = Poly::constant(f, 1);
  for (int k = 0; k < n - 1; ++k) {
    if (a[k][k].is_zero()) {
      int swap = -1;
      for (int i = k + 1; i < n && swap < 0; ++i)
        if (!a[i][k].is_zero()) swap = i;
      if (swap < 0) return Poly(f);
      std::swap(a[k], a[swap]);
      negate = !negate;
    }
    for (int i = k + 1; i < n; ++i)
      for (int j = k + 1; j < n; ++j)
        a[i][j] = divmod(a[k][k] * a[i][j] - a[i][k] * a[k][j], prev).first;
    prev = a[k][k];
  }
  return negate ? -a[n - 1][n - 1] : a[n - 1][n - 1];
}

// ---------------------------------------------------------------- LatticeBasis

LatticeBasis::LatticeBasis(const Field& f, int rank, std::vector<LaurentSeries> row_major)
    : f_(&f), rank_(rank), e_(std::move(row_major)) {
  if (rank <= 0 || e_.size() != static_cast<std::size_t>(rank * rank))
    throw std::invalid_argument("basis needs rank*rank entries");
  for (int c = 0; c < rank; ++c) {
    bool zero = true;
    for (int r = 0; r < rank; ++r) zero = zero && (*this)(r, c).is_known_zero();
    if (zero) throw std::invalid_argument("zero column " + std::to_string(c) + " in lattice basis");
  }
}

LatticeBasis LatticeBasis::standard(const Field& f, int rank) {
  return from_poly(PolyMatrix::identity(f, rank));
}

LatticeBasis LatticeBasis::from_poly(const PolyMatrix& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("basis must be square");
  std::vector<LaurentSeries> e;
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) e.push_back(LaurentSeries::from_poly(m(r, c)));
  return LatticeBasis(m.field(), m.rows(), std::move(e));
}

int LatticeBasis::precision() const {
  int p = LaurentSeries::kInfinitePrecision;
  for (const auto& x : e_) p = std::min(p, x.precision());
  return p;
}

bool LatticeBasis::all_exact() const {
  return std::all_of(e_.begin(), e_.end(), [](const LaurentSeries& x) { return x.exact(); });
}

bool LatticeBasis::unimodular() const {
  try {
    return determinant(*this).valuation() == 0;
  } catch (const PrecisionError&) {
    return false;
  }
}

LatticeBasis LatticeBasis::diagonal_action(std::span<const int> exponents) const {
  if (exponents.size() != static_cast<std::size_t>(rank_)) throw std::invalid_argument("diagonal size mismatch");
  std::vector<LaurentSeries> e;
  for (int r = 0; r < rank_; ++r)
    for (int c = 0; c < rank_; ++c) e.push_back((*this)(r, c).shifted(exponents[static_cast<std::size_t>(r)]));
  return LatticeBasis(*f_, rank_, std::move(e));
}

LatticeBasis LatticeBasis::scaled(int c) const {
  std::vector<int> ex(static_cast<std::size_t>(rank_), c);
  return diagonal_action(ex);
}

LatticeBasis LatticeBasis::times(const PolyMatrix& u) const {
  if (u.rows() != rank_ || u.cols() != rank_) throw std::invalid_argument("change of basis shape mismatch");
  std::vector<LaurentSeries> e;
  for (int r = 0; r < rank_; ++r)
    for (int c = 0; c < rank_; ++c) {
      LaurentSeries acc = LaurentSeries::zero(*f_);
      for (int k = 0; k < rank_; ++k)
        if (!u(k, c).is_zero()) acc = acc + (*this)(r, k) * LaurentSeries::from_poly(u(k, c));
      e.push_back(std::move(acc));
    }
  return LatticeBasis(*f_, rank_, std::move(e));
}

std::string LatticeBasis::to_text() const {
  std::ostringstream os;
  for (int r = 0; r < rank_; ++r) {
    for (int c = 0; c < rank_; ++c) os << (c ? ", " : "") << (*this)(r, c).to_string();
    os << '\n';
  }
  return os.str();
}

LatticeBasis LatticeBasis::parse(const Field& f, std::string_view text) {
  std::vector<std::vector<LaurentSeries>> rows;
  std::istringstream is{std::string(text)};
  std::string line;
  while (std::getline(is, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<LaurentSeries> row;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      row.push_back(LaurentSeries::parse(f, std::string_view(line).substr(start, comma - start)));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    rows.push_back(std::move(row));
  }
  const int n = static_cast<int>(rows.size());
  std::vector<LaurentSeries> e;
  for (auto& row : rows) {
    if (static_cast<int>(row.size()) != n)
      throw std::invalid_argument("matrix text: expected " + std::to_string(n) + " entries per row, got " +
                                  std::to_string(row.size()));
    for (auto& x : row) e.push_back(std::move(x));
  }
  return LatticeBasis(f, n, std::move(e));
}

namespace {

// Leibniz expansion over the rows/cols selected by the index lists.
LaurentSeries leibniz(const LatticeBasis& b, const std::vector<int>& rows, std::vector<int> cols) {
  const Field& f = b.field();
  LaurentSeries acc = LaurentSeries::zero(f);
  const int n = static_cast<int>(rows.size());
  if (n == 0) return LaurentSeries::monomial(f, 1, 0);
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  const Elem minus_one = f.neg(1);
  do {
    int inversions = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) inversions += perm[i] > perm[j];
    LaurentSeries term = LaurentSeries::monomial(f, inversions % 2 ? minus_one : 1, 0);
    for (int i = 0; i < n && !term.is_known_zero(); ++i) term = term * b(rows[i], cols[perm[i]]);
    acc = acc + term;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return acc;
}

}  // namespace

LaurentSeries determinant(const LatticeBasis& b) {
  if (b.rank() > 8) throw std::invalid_argument("Leibniz determinant limited to rank <= 8");
  std::vector<int> idx(static_cast<std::size_t>(b.rank()));
  std::iota(idx.begin(), idx.end(), 0);
  return leibniz(b, idx, idx);
}

// ---------------------------------------------------------------- reduction

ReducedBasis weak_popov(PolyMatrix m, bool track_transform) {
  if (m.rows() != m.cols()) throw std::invalid_argument("weak_popov expects a square matrix");
  const Field& f = m.field();
  const int n = m.cols();
  ReducedBasis out;
  if (track_transform) out.transform = PolyMatrix::identity(f, n);
  std::vector<int> deg(static_cast<std::size_t>(n)), piv(static_cast<std::size_t>(n));

  auto refresh = [&](int j) {
    int d = -1, p = -1;
    for (int i = 0; i < n; ++i) {
      const int di = m(i, j).degree();
      if (di > d) d = di, p = i;
    }
    if (d < 0) throw std::domain_error("weak_popov: columns are linearly dependent");
    deg[j] = d;
    piv[j] = p;
  };
  for (int j = 0; j < n; ++j) refresh(j);

  while (true) {
    int target = -1, other = -1;
    for (int row = 0; row < n && target < 0; ++row) {
      std::vector<int> cs;
      for (int j = 0; j < n; ++j)
        if (piv[j] == row) cs.push_back(j);
      if (cs.size() < 2) continue;
      target = cs[0];
      for (int j : cs)
        if (deg[j] >= deg[target]) target = j;
      for (int j : cs)
        if (j != target && (other < 0 || deg[j] < deg[other])) other = j;
    }
    if (target < 0) break;
    const int row = piv[target];
    const Elem c = f.div(m(row, target).leading(), m(row, other).leading());
    const int shift = deg[target] - deg[other];
    for (int i = 0; i < n; ++i)
      if (!m(i, other).is_zero()) m(i, target) -= m(i, other).scaled(c).shifted(shift);
    if (track_transform)
      for (int i = 0; i < n; ++i)
        if (!out.transform(i, other).is_zero())
          out.transform(i, target) -= out.transform(i, other).scaled(c).shifted(shift);
    refresh(target);
  }
  out.column_degrees = deg;
  out.pivot_rows = piv;
  out.matrix = std::move(m);
  return out;
}

ReducedBasis reduce(const LatticeBasis& b) {
  const Field& f = b.field();
  const int n = b.rank();
  int scale = 0;
  if (b.all_exact()) {
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c)
        if (!b(r, c).is_known_zero()) scale = std::max(scale, b(r, c).last_index());
  } else {
    scale = b.precision();
  }
  bool perturbed = !b.all_exact();
  PolyMatrix m(f, n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      auto [poly, frac] = b(r, c).shifted(scale).polynomial_part();
      if (!frac.is_known_zero()) perturbed = true;
      m(r, c) = std::move(poly);
    }
  ReducedBasis red;
  try {
    red = weak_popov(std::move(m), perturbed);
  } catch (const std::domain_error&) {
    if (perturbed) throw PrecisionError("truncated basis is singular; more precision needed");
    throw;
  }
  red.scale = scale;
  red.certified = true;
  if (perturbed) {
    for (int i = 0; i < n; ++i) {
      const int excess = red.transform.column_degree(i) - red.column_degrees[static_cast<std::size_t>(i)];
      if (excess > 0) {
        red.certified = false;
        red.precision_shortfall = std::max(red.precision_shortfall, excess);
      }
    }
  }
  return red;
}

DeltaValue delta(const LatticeBasis& b, bool require_certified) {
  const ReducedBasis red = reduce(b);
  DeltaValue d;
  d.value = red.scale - *std::min_element(red.column_degrees.begin(), red.column_degrees.end());
  d.certified = red.certified;
  if (require_certified && !d.certified)
    throw PrecisionError("delta not certified; " + std::to_string(red.precision_shortfall) +
                         " more digits of precision needed");
  return d;
}

std::vector<int> successive_minima(const LatticeBasis& b) {
  const ReducedBasis red = reduce(b);
  if (!red.certified)
    throw PrecisionError("successive minima not certified; " + std::to_string(red.precision_shortfall) +
                         " more digits of precision needed");
  std::vector<int> out;
  for (int d : red.column_degrees) out.push_back(d - red.scale);
  std::sort(out.begin(), out.end());
  return out;
}

int norm_exponent(std::span<const LaurentSeries> v) {
  int best = -LaurentSeries::kInfiniteOrder;
  for (const auto& x : v)
    if (!x.is_known_zero()) best = std::max(best, -x.valuation());
  return best;
}

// ---------------------------------------------------------------- enumeration

namespace {

// Walks every coefficient vector q with deg q_j <= bound_j by an F_p-digit
// odometer; each digit step adds one precomputed vector, so the lattice vector
// Bq is maintained incrementally in a dense index window.
struct Walker {
  const LatticeBasis& b;
  int n, p, e, lo, width;
  std::vector<int> bound;
  struct Digit {
    int col, k, i;
    std::vector<Elem> w;  // n rows x width
  };
  std::vector<Digit> digits;

  Walker(const LatticeBasis& basis, std::vector<int> bounds) : b(basis), n(basis.rank()), bound(std::move(bounds)) {
    const Field& f = b.field();
    p = static_cast<int>(f.characteristic());
    e = static_cast<int>(f.degree());
    int min_lo = INT32_MAX, max_hi = INT32_MIN, max_bound = 0;
    for (int j = 0; j < n; ++j) max_bound = std::max(max_bound, bound[j]);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c)
        if (!b(r, c).is_known_zero()) {
          min_lo = std::min(min_lo, b(r, c).order_bound());
          max_hi = std::max(max_hi, b(r, c).last_index());
        }
    lo = min_lo - max_bound;
    width = max_hi - lo + 1;
    for (int j = 0; j < n; ++j)
      for (int k = 0; k <= bound[j]; ++k) {
        Elem unit = 1;
        for (int i = 0; i < e; ++i, unit *= static_cast<Elem>(p)) {
          Digit d{j, k, i, std::vector<Elem>(static_cast<std::size_t>(n * width), 0)};
          for (int r = 0; r < n; ++r) {
            const LaurentSeries& x = b(r, j);
            if (x.is_known_zero()) continue;
            for (int idx = x.order_bound(); idx <= x.last_index(); ++idx)
              d.w[static_cast<std::size_t>(r * width + idx - k - lo)] = f.mul(unit, x.coeff(idx));
          }
          digits.push_back(std::move(d));
        }
      }
  }

  double box_size() const {
    return std::pow(static_cast<double>(p), static_cast<double>(digits.size()));
  }

  // visit(v dense, q codes) for every nonzero q; v is n rows x width.
  template <class Visit>
  void run(Visit&& visit) {
    const Field& f = b.field();
    std::vector<Elem> v(static_cast<std::size_t>(n * width), 0);
    std::vector<int> dig(digits.size(), 0);
    std::vector<std::vector<Elem>> q(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) q[j].assign(static_cast<std::size_t>(bound[j] + 1), 0);
    while (true) {
      std::size_t pos = 0;
      while (pos < digits.size()) {
        const Digit& d = digits[pos];
        for (std::size_t t = 0; t < v.size(); ++t)
          if (d.w[t]) v[t] = f.add(v[t], d.w[t]);
        Elem unit = 1;
        for (int i = 0; i < d.i; ++i) unit *= static_cast<Elem>(p);
        auto& code = q[d.col][static_cast<std::size_t>(d.k)];
        if (++dig[pos] < p) {
          code += unit;
          break;
        }
        dig[pos] = 0;
        code -= unit * static_cast<Elem>(p - 1);
        ++pos;
      }
      if (pos == digits.size()) return;
      visit(v, q);
    }
  }

  // log_s of the sup norm of a dense vector (nonzero required).
  int norm_of(const std::vector<Elem>& v) const {
    int first = INT32_MAX;
    for (int r = 0; r < n; ++r)
      for (int t = 0; t < width && t + lo < first; ++t)
        if (v[static_cast<std::size_t>(r * width + t)]) {
          first = t + lo;
          break;
        }
    return first == INT32_MAX ? INT32_MIN : -first;
  }
};

// Per-coordinate degree bounds for q = B^{-1} v with |v| <= s^b.
std::vector<int> coefficient_bounds(const LatticeBasis& b, int norm_exp) {
  if (!b.all_exact()) throw std::invalid_argument("enumeration requires exact basis entries");
  const int n = b.rank();
  if (n > 6) throw std::invalid_argument("enumeration limited to rank <= 6");
  const LaurentSeries det = determinant(b);
  if (det.is_known_zero()) throw std::domain_error("singular lattice basis");
  const int vdet = det.valuation();
  std::vector<int> bound(static_cast<std::size_t>(n), -1);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      // (B^{-1})_{ji} = (-1)^{i+j} minor(i, j) / det
      std::vector<int> rows, cols;
      for (int r = 0; r < n; ++r)
        if (r != i) rows.push_back(r);
      for (int c = 0; c < n; ++c)
        if (c != j) cols.push_back(c);
      const LaurentSeries minor = leibniz(b, rows, cols);
      if (minor.is_known_zero()) continue;
      bound[j] = std::max(bound[j], -minor.valuation() + vdet + norm_exp);
    }
  return bound;
}

}  // namespace

void for_each_short_vector(const LatticeBasis& b, int norm_exp, std::size_t cap,
                           const std::function<void(const std::vector<Poly>&, const std::vector<LaurentSeries>&)>& visit) {
  std::vector<int> bound = coefficient_bounds(b, norm_exp);
  if (std::all_of(bound.begin(), bound.end(), [](int d) { return d < 0; })) return;
  for (auto& d : bound) d = std::max(d, -1);
  Walker w(b, bound);
  if (w.box_size() > static_cast<double>(cap))
    throw std::length_error("enumeration box of " + std::to_string(w.box_size()) + " points exceeds cap " +
                            std::to_string(cap));
  const Field& f = b.field();
  const int n = b.rank();
  w.run([&](const std::vector<Elem>& v, const std::vector<std::vector<Elem>>& q) {
    if (w.norm_of(v) > norm_exp) return;
    std::vector<Poly> qs;
    for (int j = 0; j < n; ++j) qs.emplace_back(f, q[j]);
    std::vector<LaurentSeries> vs;
    for (int r = 0; r < n; ++r) {
      std::vector<Elem> row(v.begin() + r * w.width, v.begin() + (r + 1) * w.width);
      vs.push_back(LaurentSeries::from_coeffs(f, w.lo, std::move(row)));
    }
    visit(qs, vs);
  });
}

std::vector<std::vector<LaurentSeries>> enumerate_short_vectors(const LatticeBasis& b, int norm_exp,
                                                                std::size_t cap) {
  std::vector<std::vector<LaurentSeries>> out;
  for_each_short_vector(b, norm_exp, cap,
                        [&](const std::vector<Poly>&, const std::vector<LaurentSeries>& v) { out.push_back(v); });
  return out;
}

int shortest_norm_by_enumeration(const LatticeBasis& b, std::size_t cap) {
  // Every nonzero v has |v| >= 1/|B^{-1}|, so start at the smallest radius
  // whose box is nonempty and grow until a vector appears.
  std::vector<int> bound0 = coefficient_bounds(b, 0);
  int radius = -*std::max_element(bound0.begin(), bound0.end());
  for (;; ++radius) {
    std::vector<int> bound = coefficient_bounds(b, radius);
    for (auto& d : bound) d = std::max(d, -1);
    Walker w(b, bound);
    if (w.box_size() > static_cast<double>(cap))
      throw std::length_error("enumeration box exceeds cap");
    int best = INT32_MAX;
    w.run([&](const std::vector<Elem>& v, const std::vector<std::vector<Elem>>&) {
      best = std::min(best, w.norm_of(v));
    });
    if (best <= radius) return best;
  }
}

}  // namespace ultralog
