#pragma once

// Rank one: the Bruhat-Tits tree of SL_2(k), its quotient ray v_0, v_1, ...
// by SL_2(F_q[X]), the Haar masses of the ray, walks projected from the tree
// and the logarithm law for their excursions.

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ultralog/ffield.hpp"

namespace ultralog {

struct StabilizerCount {
  std::uint64_t order = 0;
  bool certified = false;  // the degree bound covers every possible stabilizer element
  std::uint64_t examined = 0;
};

/// Order of the stabilizer in SL_2(F_q[X]) of v_j = [O + X^j O] by exhaustive
/// search over matrices with entries of degree <= degree_bound. An element
/// fixes v_j iff diag(1, X^j)^{-1} g diag(1, X^j) lies in GL_2(O), which
/// forces all degrees <= j; so degree_bound >= j certifies the count.
/// With `edge`, counts the common stabilizer of v_j and v_{j+1}. Throws
/// std::length_error when more than `cap` triples (a, b, c) would be examined.
StabilizerCount stabilizer_order_oracle(const Field& f, int j, int degree_bound, bool edge = false,
                                        std::uint64_t cap = 50'000'000);

/// Closed forms: |Gamma_0| = q(q^2-1), |Gamma_j| = (q-1) q^{j+1};
/// edge (v_j, v_{j+1}) stabilizer (q-1) q^{j+1}.
double vertex_stabilizer_order(unsigned q, int j);
double edge_stabilizer_order(unsigned q, int j);

struct QuotientRay {
  unsigned q = 2;
  int j_max = 0;
  int oracle_max = -1;                 // levels whose orders were enumerated
  std::vector<double> orders;          // |Gamma_{v_j}|, j = 0..j_max
  std::vector<double> edge_orders;     // |Gamma_{(v_j, v_{j+1})}|, j = 0..j_max
  std::vector<double> masses;          // normalized over the whole ray
  double tail_mass = 0;                // mass of levels > j_max
  std::vector<int> up_index, down_index;  // neighbours of a lift projecting up / down
  double lY = 0;                       // decay exponent of mu(A(r)) in log_q units

  int up(int j) const;
  int down(int j) const;
  /// mu(A(r)) = mass of levels >= r.
  double cusp_mass(int r) const;
};

/// Builds the ray; levels <= oracle_max are enumerated and compared with the
/// closed form (std::logic_error on mismatch), the rest use the closed form.
/// oracle_max < 0 picks the largest level that enumerates quickly.
QuotientRay quotient_ray(const Field& f, int j_max, int oracle_max = -1);

/// P(Delta >= n) on SL_2(k)/SL_2(Z): unimodular lattices sit over the even
/// vertices, diag(X^n, X^-n) over v_{2n}, so this is the normalized mass of
/// {v_{2k} : k >= n}.
double delta_tail_rank2(const QuotientRay& ray, int n);

/// Walk state for the projection of a uniform non-backtracking walk.
struct TreeWalker {
  const QuotientRay* ray;
  int level = 0;
  int from = 0;  // +1 arrived from below, -1 from above, 0 at the start
  int step(std::mt19937_64& rng);
};

struct GeodesicTrace {
  std::uint64_t seed = 0;
  std::vector<int> d;  // d_1, ..., d_T
};

GeodesicTrace simulate_geodesic(const QuotientRay& ray, long T, std::uint64_t seed);
std::string trace_csv(const GeodesicTrace& trace);

/// Fraction of time spent at each level over T steps.
std::vector<double> occupation_measure(const QuotientRay& ray, long T, std::uint64_t seed);

struct RateLadder {
  double c = 1.0;  // r_t = ceil(c log_q t / l(Y)) + shift
  int shift = 0;
  int at(long t, double lY, unsigned q) const;
  /// sum_t q^{-l(Y) r_t} diverges iff c <= 1.
  bool divergent() const { return c <= 1.0; }
};

struct LoglawStats {
  unsigned q = 2;
  long T = 0;
  int trials = 0;
  double lY = 0, target = 0;          // target = 1 / l(Y)
  std::vector<double> ratios;         // max_{u <= T} d_u / log_q T per trial
  double median_ratio = 0, q25 = 0, q75 = 0;
  long excursions = 0;
  double excursion_tail_rate = 0;     // fitted q^{-slope} of P(excursion max >= r)
  bool has_ladder = false;
  RateLadder ladder;
  double last_decade_fraction = 0;    // trials with d_t >= r_t for some t in (T/10, T]
};

LoglawStats loglaw_experiment(const QuotientRay& ray, int trials, long T, std::uint64_t seed, int threads = 1,
                              const RateLadder* ladder = nullptr);

}  // namespace ultralog
