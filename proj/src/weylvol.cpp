#include "ultralog/weylvol.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace ultralog {

RootSystemSpec::RootSystemSpec(int r, Cocharacters c) : rank(r), lattice(c) {
  if (r < 1) throw std::invalid_argument("rank must be >= 1");
}

long rho_pairing(const std::vector<int>& lambda) {
  long out = 0;
  for (std::size_t i = 0; i < lambda.size(); ++i)
    for (std::size_t j = i + 1; j < lambda.size(); ++j) out += lambda[i] - lambda[j];
  return out;
}

bool is_dominant(const std::vector<int>& lambda, Cocharacters c) {
  return std::is_sorted(lambda.rbegin(), lambda.rend()) &&
         (c == Cocharacters::Adjoint || std::accumulate(lambda.begin(), lambda.end(), 0L) == 0);
}

std::vector<std::uint64_t> dominant_counts(const RootSystemSpec& spec, long l_max) {
  if (l_max < 0) return {};
  if (l_max > 10'000'000) throw std::length_error("dominant_counts: l too large");
  const int r = spec.rank, N = r + 1;
  const auto L = static_cast<std::size_t>(l_max + 1);
  std::vector<std::uint64_t> dp(L * N, 0);
  dp[0] = 1;
  for (int i = 1; i <= r; ++i) {
    const long w = static_cast<long>(i) * (N - i);
    for (long l = w; l <= l_max; ++l)
      for (int res = 0; res < N; ++res)
        dp[static_cast<std::size_t>(l) * N + (res + i) % N] += dp[static_cast<std::size_t>(l - w) * N + res];
  }
  std::vector<std::uint64_t> out(L, 0);
  for (std::size_t l = 0; l < L; ++l) {
    if (spec.lattice == Cocharacters::Coroot) {
      out[l] = dp[l * N];
    } else {
      for (int res = 0; res < N; ++res) out[l] += dp[l * N + res];
    }
  }
  return out;
}

std::uint64_t dominant_count(const RootSystemSpec& spec, long l) {
  if (l < 0) return 0;
  return dominant_counts(spec, l).back();
}

std::vector<std::vector<int>> dominant_cocharacters(const RootSystemSpec& spec, long l) {
  const int r = spec.rank, N = r + 1;
  std::vector<std::vector<int>> out;
  std::vector<long> gaps(static_cast<std::size_t>(r), 0);
  auto rec = [&](auto&& self, int i, long left) -> void {
    if (i > r) {
      if (left != 0) return;
      long moment = 0;
      for (int k = 1; k <= r; ++k) moment += k * gaps[static_cast<std::size_t>(k - 1)];
      const bool coroot = spec.lattice == Cocharacters::Coroot;
      if (coroot && moment % N) return;
      std::vector<int> lam(static_cast<std::size_t>(N));
      lam[static_cast<std::size_t>(r)] = coroot ? static_cast<int>(-moment / N) : 0;
      for (int k = r - 1; k >= 0; --k)
        lam[static_cast<std::size_t>(k)] = lam[static_cast<std::size_t>(k + 1)] + static_cast<int>(gaps[static_cast<std::size_t>(k)]);
      out.push_back(std::move(lam));
      return;
    }
    const long w = static_cast<long>(i) * (N - i);
    for (long d = 0; d * w <= left; ++d) {
      gaps[static_cast<std::size_t>(i - 1)] = d;
      self(self, i + 1, left - d * w);
    }
    gaps[static_cast<std::size_t>(i - 1)] = 0;
  };
  rec(rec, 1, l);
  return out;
}

AffineWeylElement AffineWeylElement::compose(const AffineWeylElement& o) const {
  const std::size_t n = perm.size();
  AffineWeylElement out{std::vector<int>(n), lambda};
  for (std::size_t i = 0; i < n; ++i) {
    out.perm[i] = perm[static_cast<std::size_t>(o.perm[i])];
    out.lambda[static_cast<std::size_t>(perm[i])] += o.lambda[i];
  }
  return out;
}

AffineWeylElement translation(const std::vector<int>& lambda) {
  std::vector<int> id(lambda.size());
  std::iota(id.begin(), id.end(), 0);
  return {id, lambda};
}

AffineWeylElement simple_reflection(const RootSystemSpec& spec, int i) {
  const int n = spec.dim();
  if (i < 0 || i > spec.rank) throw std::out_of_range("simple reflection index");
  AffineWeylElement s = translation(std::vector<int>(static_cast<std::size_t>(n), 0));
  if (i == 0) {
    std::swap(s.perm[0], s.perm[static_cast<std::size_t>(n - 1)]);
    s.lambda[0] = 1;
    s.lambda[static_cast<std::size_t>(n - 1)] = -1;
  } else {
    std::swap(s.perm[static_cast<std::size_t>(i - 1)], s.perm[static_cast<std::size_t>(i)]);
  }
  return s;
}

long affine_length(const AffineWeylElement& x) {
  const std::size_t n = x.perm.size();
  std::vector<int> inv(n);
  for (std::size_t i = 0; i < n; ++i) inv[static_cast<std::size_t>(x.perm[i])] = static_cast<int>(i);
  long len = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const long pair = x.lambda[i] - x.lambda[j];
      len += inv[i] < inv[j] ? std::labs(pair) : std::labs(pair - 1);
    }
  return len;
}

std::vector<FiberEntry> fiber_report(const std::vector<int>& lambda) {
  std::vector<int> mu = lambda;
  std::sort(mu.begin(), mu.end());
  std::vector<int> w(lambda.size());
  std::vector<FiberEntry> out;
  do {
    std::iota(w.begin(), w.end(), 0);
    do {
      AffineWeylElement x{w, mu};
      out.push_back({x, affine_length(x)});
    } while (std::next_permutation(w.begin(), w.end()));
  } while (std::next_permutation(mu.begin(), mu.end()));
  return out;
}

namespace {

// log of C(l + r - 1, r - 1), an upper bound for the number of dominant
// cocharacters of height l.
double log_count_bound(long l, int r) {
  return std::lgamma(static_cast<double>(l + r)) - std::lgamma(static_cast<double>(r)) -
         std::lgamma(static_cast<double>(l + 1));
}

}  // namespace

CuspTail cusp_tail(long T, const RootSystemSpec& spec, unsigned q) {
  if (T < 1) throw std::invalid_argument("cusp_tail: T must be >= 1");
  if (q < 2) throw std::invalid_argument("cusp_tail: q must be >= 2");
  const int r = spec.rank;
  const double lq = std::log(static_cast<double>(q));
  for (long L = std::max<long>(2 * T, 64);; L *= 2) {
    if (L > 1'000'000) throw std::runtime_error("cusp_tail: truncation bound not met");
    const auto counts = dominant_counts(spec, L);
    long double s = 0, c = 0;
    for (long l = L; l >= T; --l) {
      const long double w = std::exp(-static_cast<long double>(l) * lq);
      s += w * counts[static_cast<std::size_t>(l)];
      c += w * std::pow(static_cast<long double>(l), r - 1);
    }
    // terms past L: both sequences are dominated by the binomial bound, whose
    // consecutive ratio is at most (L + 1 + r) / ((L + 2) q) from L + 1 on
    const double rho = static_cast<double>(L + 1 + r) / (static_cast<double>(L + 2) * q);
    const double first = std::max(log_count_bound(L + 1, r), (r - 1) * std::log(static_cast<double>(L + 1))) -
                         static_cast<double>(L + 1) * lq;
    const double rho_c = std::pow(static_cast<double>(L + 2) / (L + 1), r - 1) / q;
    const double bound = rho < 1 && rho_c < 1 ? std::exp(first) / (1 - std::max(rho, rho_c)) : INFINITY;
    if (s > 0 && bound <= 1e-12 * static_cast<double>(std::min(s, c))) {
      CuspTail out;
      out.T = T;
      out.tail = static_cast<double>(s);
      out.comparator = static_cast<double>(c);
      out.ratio = out.tail / out.comparator;
      out.truncated_at = L;
      out.remainder_bound = bound;
      return out;
    }
  }
}

RatioBand cusp_ratio_band(const RootSystemSpec& spec, unsigned q, long t_min, long t_max) {
  RatioBand band;
  band.rank = spec.rank;
  band.q = q;
  band.t_min = t_min;
  band.t_max = t_max;
  for (long T = t_min; T <= t_max; ++T) band.rows.push_back(cusp_tail(T, spec, q));
  band.min_ratio = INFINITY;
  band.max_ratio = 0;
  for (const auto& row : band.rows) {
    band.min_ratio = std::min(band.min_ratio, row.ratio);
    band.max_ratio = std::max(band.max_ratio, row.ratio);
  }
  return band;
}

std::string cusp_tail_csv(const std::vector<CuspTail>& rows) {
  std::ostringstream os;
  os.precision(17);
  os << "T,S_T,comparator,ratio\n";
  for (const auto& r : rows) os << r.T << ',' << r.tail << ',' << r.comparator << ',' << r.ratio << '\n';
  return os.str();
}

}  // namespace ultralog
