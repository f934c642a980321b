#pragma once

// Cusp-volume combinatorics for split groups of type A_r: the pairing with
// rho (sum of positive roots), dominant cocharacters of fixed height, affine
// Weyl lengths and the tail of the Iwahori coset volumes.

#include <cstdint>
#include <string>
#include <vector>

namespace ultralog {

/// Coroot: SL_{r+1}, integer lambda with sum 0. Adjoint: PGL_{r+1}, integer
/// lambda modulo (1, ..., 1), represented with lambda_{r+1} = 0.
enum class Cocharacters { Coroot, Adjoint };

struct RootSystemSpec {
  int rank = 1;  // type A_rank, cocharacters have rank + 1 entries
  Cocharacters lattice = Cocharacters::Coroot;
  explicit RootSystemSpec(int r, Cocharacters c = Cocharacters::Coroot);
  int dim() const { return rank + 1; }
  int positive_roots() const { return rank * (rank + 1) / 2; }
  int longest_length() const { return positive_roots(); }
};

/// <rho, lambda> = sum_{i<j} (lambda_i - lambda_j).
long rho_pairing(const std::vector<int>& lambda);

/// Weakly decreasing; for the coroot lattice also sum 0.
bool is_dominant(const std::vector<int>& lambda, Cocharacters c = Cocharacters::Coroot);

/// #{lambda dominant : <rho, lambda> = l}, for l = 0..l_max. Counts gap
/// vectors d_i = lambda_i - lambda_{i+1} with sum d_i i(r+1-i) = l; for the
/// coroot lattice sum i d_i must also be divisible by r+1. Throws
/// std::length_error above 10^7.
std::vector<std::uint64_t> dominant_counts(const RootSystemSpec& spec, long l_max);
std::uint64_t dominant_count(const RootSystemSpec& spec, long l);

/// All dominant lambda with <rho, lambda> = l.
std::vector<std::vector<int>> dominant_cocharacters(const RootSystemSpec& spec, long l);

/// t^lambda w, acting on the apartment by v -> w v + lambda. w is a
/// permutation in one-line notation, w(i) = perm[i].
struct AffineWeylElement {
  std::vector<int> perm;
  std::vector<int> lambda;
  AffineWeylElement compose(const AffineWeylElement& o) const;
  bool operator==(const AffineWeylElement&) const = default;
  auto operator<=>(const AffineWeylElement&) const = default;
};

AffineWeylElement translation(const std::vector<int>& lambda);
/// Simple reflections s_0, ..., s_r with s_0 = t^theta s_theta.
AffineWeylElement simple_reflection(const RootSystemSpec& spec, int i);

/// Iwahori-Matsumoto length: sum over alpha > 0 of |<alpha, lambda>| when
/// w^{-1} alpha > 0 and |<alpha, lambda> - 1| otherwise.
long affine_length(const AffineWeylElement& x);

struct FiberEntry {
  AffineWeylElement element;
  long length;
};
/// {t^mu w : mu in W lambda, w in W} with their lengths.
std::vector<FiberEntry> fiber_report(const std::vector<int>& lambda);

struct CuspTail {
  long T = 0;
  double tail = 0;        // S(T) = sum_{<rho,lambda> >= T} q^{-<rho,lambda>}
  double comparator = 0;  // sum_{l >= T} q^{-l} l^{r-1}
  double ratio = 0;
  long truncated_at = 0;  // last l summed
  double remainder_bound = 0;
};

/// Sums to the first L with the remaining mass bound below 1e-12 of the
/// partial sum. Throws std::runtime_error when that needs L > 10^6.
CuspTail cusp_tail(long T, const RootSystemSpec& spec, unsigned q);

struct RatioBand {
  int rank = 1;
  unsigned q = 2;
  long t_min = 0, t_max = 0;
  std::vector<CuspTail> rows;
  double min_ratio = 0, max_ratio = 0;
  double spread() const { return max_ratio / min_ratio; }
};
RatioBand cusp_ratio_band(const RootSystemSpec& spec, unsigned q, long t_min, long t_max);

std::string cusp_tail_csv(const std::vector<CuspTail>& rows);

}  // namespace ultralog
