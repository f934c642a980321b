#include "doctest.h"
#include "ultralog/daniflow.hpp"
#include "ultralog/util.hpp"

#include <cmath>

using namespace ultralog;

namespace {

LaurentSeries S(const Field& f, const char* text) { return LaurentSeries::parse(f, text); }

// A truncated to an exact Laurent polynomial, so the enumeration oracle applies.
SeriesMatrix exact_truncation(const SeriesMatrix& a, int digits) {
  SeriesMatrix out;
  for (const auto& x : a) {
    std::vector<Elem> c;
    for (int i = 0; i <= digits; ++i) c.push_back(x.coeff(i));
    out.push_back(LaurentSeries::from_coeffs(x.field(), 0, c));
  }
  return out;
}

}  // namespace

TEST_CASE("unipotent_lattice examples") {
  const Field& f = Field::get(2);
  const FlowSpec spec(1, 1, f);
  const LatticeBasis z = unipotent_lattice({LaurentSeries::zero(f)}, spec);
  CHECK(z.to_text() == LatticeBasis::standard(f, 2).to_text());
  const LatticeBasis la = unipotent_lattice({S(f, "X^-1")}, spec);
  CHECK(la.to_text() == "1, X^-1\n0, 1\n");
  CHECK(la.unimodular());
  CHECK_THROWS_AS(unipotent_lattice({S(f, "X")}, spec), std::invalid_argument);

  std::mt19937_64 rng(3);
  for (int i = 0; i < 30; ++i) {
    const FlowSpec sp(1 + i % 2, 1 + (i / 2) % 2, Field::get(i % 3 == 0 ? 3 : 2));
    const SeriesMatrix a = exact_truncation(sample_matrix(sp, 6, rng), 6);
    const LatticeBasis b = unipotent_lattice(a, sp);
    CHECK(delta(b).value == 0);
    CHECK(shortest_norm_by_enumeration(b) == 0);
  }
}

TEST_CASE("flow_apply examples and group action") {
  const Field& f = Field::get(2);
  const FlowSpec spec(1, 1, f);
  const LatticeBasis z2 = LatticeBasis::standard(f, 2);
  CHECK(flow_apply(z2, spec, 0).to_text() == z2.to_text());
  CHECK(delta(flow_apply(z2, spec, 3)).value == 3);
  CHECK(flow_apply(z2, spec, 3).to_text() == "X^3, 0\n0, X^-3\n");
  CHECK(delta(flow_apply(LatticeBasis::standard(f, 3), DriftVector({1, -1, 0}))).value == 1);
  CHECK(DriftVector({3, -1, -2}).minus_norm() == 2);
  CHECK_THROWS_AS(DriftVector({1, 1}), std::invalid_argument);

  std::mt19937_64 rng(4);
  for (int i = 0; i < 20; ++i) {
    const FlowSpec sp(1 + i % 2, 1 + (i / 2) % 2, f);
    const LatticeBasis b = unipotent_lattice(exact_truncation(sample_matrix(sp, 8, rng), 8), sp);
    const int t = static_cast<int>(rng() % 4), u = static_cast<int>(rng() % 4);
    CHECK(delta(flow_apply(b, sp, t + u)).value == delta(flow_apply(flow_apply(b, sp, t), sp, u)).value);
  }
}

TEST_CASE("psi_to_rate closed forms") {
  for (unsigned s : {2u, 3u})
    for (auto [m, n] : {std::pair{1, 1}, {1, 2}, {2, 1}, {2, 2}}) {
      const RateFunction r0 = psi_to_rate(PsiFunction::power_law(s, 0, 1), m, n);
      const RateFunction rc = psi_to_rate(PsiFunction::power_law(s, 3, 1), m, n);
      for (double a = 0; a <= 60; a += 0.5) {
        CHECK(std::abs(r0.r(a)) < 1e-9);
        if (a >= rc.a0()) CHECK(std::abs(rc.r(a) - 3.0 / (m + n)) < 1e-9);
      }
    }
}

TEST_CASE("log-power rate matches a fixed-point oracle") {
  // r = log_2(4 - r), solved by plain iteration
  double x = 1;
  for (int i = 0; i < 200; ++i) x = std::log2(4 - x);
  CHECK(x == doctest::Approx(1.386).epsilon(1e-3));
  const RateFunction r = psi_to_rate(PsiFunction::log_power(2, 2, 2.0), 1, 1);
  CHECK(std::abs(r.r(4) - x) < 1e-9);
}

TEST_CASE("rate transform round trip and monotonicity") {
  const std::vector<PsiFunction> psis{
      PsiFunction::power_law(2, 0, 1), PsiFunction::power_law(3, 2, 1.5), PsiFunction::log_power(2, 2, 2.0),
      PsiFunction::log_power(3, 1, 3.0),
      PsiFunction::table(2, {{1, 1}, {4, 0.2}, {64, 0.001}, {1024, 1e-6}})};
  for (const auto& psi : psis)
    for (auto [m, n] : {std::pair{1, 1}, {2, 1}, {1, 2}}) {
      const RateFunction rate = psi_to_rate(psi, m, n);
      const PsiFunction back = rate_to_psi(rate);
      const double s = psi.base();
      for (int k = static_cast<int>(std::ceil(psi.log_x0())); k <= 40; ++k) {
        const double x = std::pow(s, k);
        CHECK(back(x) == doctest::Approx(psi(x)).epsilon(1e-9));
      }
      double prev_lambda = -1e300, prev_L = -1e300;
      for (double a = rate.a0(); a <= rate.a0() + 40; a += 0.25) {
        CHECK(rate.lambda(a) > prev_lambda);
        CHECK(rate.L(a) >= prev_L - 1e-12);
        // residual of the defining identity on the log scale
        CHECK(std::abs(psi.log_value(rate.lambda(a)) + rate.L(a)) < 1e-9);
        prev_lambda = rate.lambda(a);
        prev_L = rate.L(a);
      }
    }
  CHECK_THROWS_AS(PsiFunction::table(2, {{1, 1}, {2, 3}}), std::invalid_argument);
}

TEST_CASE("sum equivalence growth classes agree") {
  auto growth = [](const std::vector<Coc4Row>& rows, bool psi_side) {
    auto v = [&](std::size_t i) { return psi_side ? rows[i].psi_side : rows[i].rate_side; };
    return (v(3) - v(2)) / (v(2) - v(1));
  };
  for (auto [q, sigma, divergent] : {std::tuple{0, 1.0, true}, {0, 2.0, false}, {1, 2.0, true}, {1, 3.0, false}}) {
    const PsiFunction psi = PsiFunction::log_power(2, sigma, 2.0);
    const RateFunction rate = psi_to_rate(psi, 1, 1);
    const auto rows = coc4_partial_sums(psi, rate, q, {64, 128, 256, 512});
    for (bool side : {true, false}) {
      if (divergent)
        CHECK(growth(rows, side) > 0.8);
      else
        CHECK(growth(rows, side) < 0.6);
    }
  }
}

TEST_CASE("delta_trajectory examples") {
  const Field& f = Field::get(2);
  const FlowSpec spec(1, 1, f);
  const auto zero = delta_trajectory({LaurentSeries::zero(f)}, spec, 20);
  for (const auto& p : zero) CHECK(p.delta.value == p.t);
  const auto rational = delta_trajectory({S(f, "X^-1")}, spec, 20);
  for (const auto& p : rational) CHECK(p.delta.value == p.t - 1);

  std::mt19937_64 rng(9);
  for (auto [m, n] : {std::pair{1, 1}, {1, 2}, {2, 1}, {2, 2}}) {
    const FlowSpec sp(m, n, f);
    const SeriesMatrix a = sample_matrix(sp, 64, rng);
    const auto traj = delta_trajectory(a, sp, 32 / std::max(m, n) * 2 / (m + n) * std::max(m, n));
    for (const auto& p : traj) CHECK(p.delta.certified);
  }
  const SeriesMatrix a = sample_matrix(spec, 64, rng);
  const auto traj = delta_trajectory(a, spec, 32);
  CHECK(traj.size() == 32);
  CHECK_THROWS_AS(delta_trajectory(sample_matrix(spec, 10, rng), spec, 32), PrecisionError);
  CHECK(trajectory_csv({{1, {2, true}}}) == "t,delta,certified\n1,2,1\n");
}

TEST_CASE("trajectory engine agrees with generic reduction and enumeration") {
  std::mt19937_64 rng(21);
  for (unsigned s : {2u, 3u})
    for (auto [m, n] : {std::pair{1, 1}, {1, 2}, {2, 1}, {2, 2}}) {
      const FlowSpec sp(m, n, Field::get(s));
      for (int trial = 0; trial < 4; ++trial) {
        const int T = 12;
        const SeriesMatrix a = sample_matrix(sp, trajectory_precision(sp, T), rng);
        const auto traj = delta_trajectory(a, sp, T);
        int prev = 0;
        for (const auto& p : traj) {
          const DeltaValue generic = delta(flow_apply(unipotent_lattice(a, sp), sp, p.t), false);
          CHECK(generic.certified);
          CHECK(generic.value == p.delta.value);
          CHECK(std::abs(p.delta.value - prev) <= std::max(m, n));
          prev = p.delta.value;
        }
        // brute force on an exact truncation for early times
        const SeriesMatrix ae = exact_truncation(a, trajectory_precision(sp, T));
        const int brute_t = m + n == 2 ? 4 : (s == 2 && m + n == 3 ? 2 : 0);
        for (int t = 1; t <= brute_t; ++t) {
          const LatticeBasis b = flow_apply(unipotent_lattice(ae, sp), sp, t);
          CHECK(-shortest_norm_by_enumeration(b, 20'000'000) == traj[static_cast<std::size_t>(t - 1)].delta.value);
        }
      }
    }
}

TEST_CASE("the stated precision certifies long trajectories") {
  // column operations used to eat the tracked window faster than deg q grows
  std::mt19937_64 rng(99);
  const int T = 64;
  for (unsigned s : {2u, 3u, 4u})
    for (auto [m, n] : {std::pair{1, 1}, {1, 2}, {2, 1}, {2, 2}, {1, 3}}) {
      const FlowSpec sp(m, n, s == 4 ? Field::get(2, 2) : Field::get(s));
      for (int trial = 0; trial < 20; ++trial) {
        const SeriesMatrix a = sample_matrix(sp, trajectory_precision(sp, T), rng);
        std::vector<TrajectoryPoint> traj;
        REQUIRE_NOTHROW(traj = delta_trajectory(a, sp, T));
        if (trial == 0) {
          const DeltaValue generic = delta(flow_apply(unipotent_lattice(a, sp), sp, T), false);
          CHECK(generic.certified);
          CHECK(generic.value == traj.back().delta.value);
        }
      }
    }
}

TEST_CASE("tail distribution in rank 2") {
  SamplerSpec sampler;
  sampler.flow = FlowSpec(1, 1, Field::get(2));
  sampler.seed = 11;
  const TailTable t1 = tail_distribution(sampler, 6, 4000);
  CHECK(t1.phi[0] == 1.0);
  for (std::size_t k = 1; k < t1.phi.size(); ++k) {
    CHECK(t1.phi[k] <= t1.phi[k - 1]);
    CHECK(t1.ci_lo[k] <= t1.phi[k]);
    CHECK(t1.ci_hi[k] >= t1.phi[k]);
  }
  CHECK(t1.kappa >= 1.8);
  CHECK(t1.kappa <= 2.2);
  const TailTable t2 = tail_distribution(sampler, 6, 8000);
  CHECK(std::abs(t2.kappa - t1.kappa) <= 0.1 * t1.kappa);
  CHECK_THROWS_AS(tail_from_values(2, {0, 0, 1}, 3), std::runtime_error);
}

TEST_CASE("strong Borel-Cantelli bookkeeping") {
  SamplerSpec sampler;
  sampler.flow = FlowSpec(1, 1, Field::get(2));
  sampler.seed = 5;
  const auto one = strong_bc_experiment(
      sampler, [](int) { return 0; }, [](int n) { return n <= 0 ? 1.0 : std::pow(2.0, 1 - 2 * n); }, 200, 4);
  for (double r : one.terminal_ratios) CHECK(r == 1.0);
  CHECK_FALSE(one.below_floor);

  const auto conv = strong_bc_experiment(
      sampler, [](int t) { return t; }, [](int n) { return n <= 0 ? 1.0 : std::pow(2.0, 1 - 2 * n); }, 200, 4,
      3.0, true);
  CHECK(conv.below_floor);

  const DiagnosticsReport single = quasi_independence_report(
      conv, [](int n) { return n <= 0 ? 1.0 : std::pow(2.0, 1 - 2 * n); }, sampler.flow, 7, 7, 1.0, {0});
  CHECK(single.correlation_excess >= 0);
  CHECK(single.mean_counts.size() == 1);
}

TEST_CASE("correlation diagnostics and ED sums") {
  SamplerSpec sampler;
  sampler.flow = FlowSpec(1, 1, Field::get(2));
  sampler.seed = 6;
  auto phi = [](int n) { return n <= 0 ? 1.0 : std::pow(2.0, 1 - 2 * n); };
  const auto run = strong_bc_experiment(sampler, [](int) { return 1; }, phi, 400, 200, 3.0, true);
  const DiagnosticsReport rep = quasi_independence_report(run, phi, sampler.flow, 1, 400, 1.0, {0, 1, 50});
  CHECK(rep.lag_covariance[0].second > 0.1);            // variance of a Bernoulli(1/2)
  CHECK(std::abs(rep.lag_covariance[2].second) < 0.03);  // far-separated times
  for (std::size_t i = 1; i < rep.mean_counts.size(); ++i) {
    CHECK(rep.mean_counts[i] >= rep.mean_counts[i - 1]);
    CHECK(rep.expectations[i] >= rep.expectations[i - 1]);
  }
  const auto ed = ed_partial_sums(sampler.flow, 1.0, 60);
  CHECK(ed.back() == doctest::Approx(3.0).epsilon(1e-9));  // 1 + 2 sum 2^-k
  CHECK(ed[40] - ed[38] < 1e-5);
}
