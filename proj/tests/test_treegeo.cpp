#include "doctest.h"
#include "ultralog/daniflow.hpp"
#include "ultralog/treegeo.hpp"
#include "ultralog/weylvol.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

using namespace ultralog;

TEST_CASE("stabilizer_order_oracle examples") {
  CHECK(stabilizer_order_oracle(Field::get(2), 0, 0).order == 6);
  CHECK(stabilizer_order_oracle(Field::get(2), 1, 1).order == 4);
  CHECK(stabilizer_order_oracle(Field::get(3), 2, 2).order == 54);
  CHECK(stabilizer_order_oracle(Field::get(3), 2, 2).certified);
  CHECK_FALSE(stabilizer_order_oracle(Field::get(3), 2, 1).certified);
  // a larger degree bound finds nothing new
  CHECK(stabilizer_order_oracle(Field::get(2), 2, 4).order == stabilizer_order_oracle(Field::get(2), 2, 2).order);
  for (unsigned p : {2u, 3u})
    for (int j = 0; j <= (p == 2 ? 5 : 3); ++j) {
      CHECK(static_cast<double>(stabilizer_order_oracle(Field::get(p), j, j).order) == vertex_stabilizer_order(p, j));
      if (j < (p == 2 ? 5 : 3))
        CHECK(static_cast<double>(stabilizer_order_oracle(Field::get(p), j, j + 1, true).order) ==
              edge_stabilizer_order(p, j));
    }
  CHECK(stabilizer_order_oracle(Field::get(2, 2), 1, 1).order == 3 * 16);
  CHECK_THROWS_AS(stabilizer_order_oracle(Field::get(3), 8, 8), std::length_error);
}

TEST_CASE("quotient_ray structure") {
  for (unsigned p : {2u, 3u}) {
    const QuotientRay ray = quotient_ray(Field::get(p), 30);
    double total = ray.tail_mass;
    for (double m : ray.masses) total += m;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
    for (int j = 1; j < 30; ++j) CHECK(ray.masses[j + 1] < ray.masses[j]);
    for (int j = 2; j < 30; ++j) CHECK(ray.masses[j + 1] / ray.masses[j] == doctest::Approx(1.0 / p));
    for (int j = 0; j <= 40; ++j) CHECK(ray.up(j) + ray.down(j) == static_cast<int>(p + 1));
    CHECK(ray.up(0) == static_cast<int>(p + 1));
    CHECK(ray.down(0) == 0);
    CHECK(ray.lY == doctest::Approx(1.0).epsilon(1e-12));
    for (int r = 1; r < 40; ++r) CHECK(ray.cusp_mass(r + 1) < ray.cusp_mass(r));
  }
}

TEST_CASE("rank-2 Delta tail from the ray matches the sampler") {
  const QuotientRay ray = quotient_ray(Field::get(2), 40);
  for (int n = 1; n <= 10; ++n) CHECK(delta_tail_rank2(ray, n) == doctest::Approx(std::pow(2.0, 1 - 2 * n)).epsilon(1e-12));
  SamplerSpec sp;
  sp.flow = FlowSpec(1, 1, Field::get(2));
  sp.seed = 5;
  sp.threads = 4;
  const TailTable tab = tail_distribution(sp, 5, 20000);
  for (int n = 0; n <= 4; ++n) {
    const double expect = delta_tail_rank2(ray, n);
    // sampler at burn-in 8 only sees Delta <= 8; small n are unaffected
    CHECK(tab.ci_lo[n] <= expect * 1.05);
    CHECK(tab.ci_hi[n] >= expect * 0.95);
  }
}

TEST_CASE("rank-1 cusp tail agrees with the ray up to one constant") {
  for (unsigned p : {2u, 3u}) {
    const QuotientRay ray = quotient_ray(Field::get(p), 60);
    double c_sl = 0, c_adj = 0;
    for (long T = 1; T <= 30; ++T) {
      // SL_2: unimodular classes are the even vertices
      double even = 0;
      for (int j = static_cast<int>(T); j <= 60; ++j)
        if (j % 2 == 0) even += ray.masses[j];
      even += ray.tail_mass / (p + 1);  // even levels of the closed-form tail past j_max = 60
      const double r_sl = cusp_tail(T, RootSystemSpec(1), p).tail / even;
      const double r_adj = cusp_tail(T, RootSystemSpec(1, Cocharacters::Adjoint), p).tail / ray.cusp_mass(static_cast<int>(T));
      if (T == 1) {
        c_sl = r_sl;
        c_adj = r_adj;
      }
      CHECK(r_sl == doctest::Approx(c_sl).epsilon(1e-9));
      CHECK(r_adj == doctest::Approx(c_adj).epsilon(1e-9));
    }
  }
}

TEST_CASE("geodesic traces") {
  const QuotientRay ray = quotient_ray(Field::get(2), 10);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const GeodesicTrace tr = simulate_geodesic(ray, 500, seed);
    int prev = 0;
    for (int d : tr.d) {
      CHECK(std::abs(d - prev) == 1);
      CHECK(d >= 0);
      if (prev == 0) CHECK(d == 1);
      prev = d;
    }
  }
  std::ifstream golden(std::string(ULTRALOG_TEST_DATA) + "/golden/geodesic_q2_seed42_T10.csv");
  REQUIRE(golden.good());
  std::stringstream buf;
  buf << golden.rdbuf();
  CHECK(trace_csv(simulate_geodesic(ray, 10, 42)) == buf.str());
}

TEST_CASE("occupation measure converges to the ray masses") {
  const QuotientRay ray = quotient_ray(Field::get(2), 40);
  const auto occ = occupation_measure(ray, 1'000'000, 1);
  double tv = 0;
  for (int j = 0; j < 60; ++j) {
    const double a = j < static_cast<int>(occ.size()) ? occ[j] : 0;
    tv += std::fabs(a - (ray.cusp_mass(j) - ray.cusp_mass(j + 1)));
  }
  CHECK(tv / 2 < 0.02);
}

TEST_CASE("loglaw_experiment") {
  const QuotientRay ray = quotient_ray(Field::get(2), 40);
  const LoglawStats st = loglaw_experiment(ray, 40, 20000, 3, 4);
  CHECK(st.median_ratio > 0.75);
  CHECK(st.median_ratio < 1.25);
  CHECK(st.excursions >= 10000);
  CHECK(st.excursion_tail_rate == doctest::Approx(std::pow(2.0, -ray.lY)).epsilon(0.1));
  const RateLadder zero{0.0, 0};
  CHECK(loglaw_experiment(ray, 10, 2000, 3, 2, &zero).last_decade_fraction == 1.0);
  const RateLadder conv{1.5, 0};
  CHECK(loglaw_experiment(ray, 40, 20000, 3, 4, &conv).last_decade_fraction <= 0.1);
  // same seed, different thread count
  const LoglawStats again = loglaw_experiment(ray, 40, 20000, 3, 1);
  CHECK(again.ratios == st.ratios);
}
