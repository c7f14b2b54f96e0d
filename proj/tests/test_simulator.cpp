#include <algorithm>
#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "emuopt/simulator.hpp"

using namespace emuopt;

namespace {

SimParams small_params() {
  SimParams p;
  p.n_drops = 20;
  p.n_ues_per_drop = 8;
  return p;
}

}  // namespace

TEST(Pathloss, LosHandValue) {
  SimParams p;
  p.shadowing = false;
  EXPECT_NEAR(pathloss_db(100.0, 100.0, p, true), 103.3431606268444, 1e-9);
}

TEST(Pathloss, NlosHandValue) {
  SimParams p;
  p.shadowing = false;
  EXPECT_NEAR(pathloss_db(100.0, 100.0, p, false), 123.82446606758927, 1e-9);
}

TEST(Pathloss, NlosNeverBelowLos) {
  SimParams p;
  p.shadowing = false;
  for (double d = 10; d < 500; d += 7.3) {
    const double d3 = std::hypot(d, 8.5);
    EXPECT_GE(pathloss_db(d, d3, p, false), pathloss_db(d, d3, p, true));
  }
}

TEST(Pathloss, ShadowingScalesBySigma) {
  SimParams p;
  const double base = pathloss_db(50, 51, p, true, 0.0);
  EXPECT_NEAR(pathloss_db(50, 51, p, true, 1.5) - base, 1.5 * 4.0, 1e-12);
  const double nbase = pathloss_db(50, 51, p, false, 0.0);
  EXPECT_NEAR(pathloss_db(50, 51, p, false, -1.0) - nbase, -7.82, 1e-12);
}

TEST(Pathloss, RejectsBadDistances) {
  SimParams p;
  EXPECT_THROW(pathloss_db(0.0, 1.0, p, true), ValidationError);
  EXPECT_THROW(pathloss_db(10.0, 5.0, p, true), ValidationError);
}

TEST(LosProbability, HandValues) {
  EXPECT_DOUBLE_EQ(los_probability(5.0), 1.0);
  EXPECT_DOUBLE_EQ(los_probability(18.0), 1.0);
  EXPECT_NEAR(los_probability(36.0), 0.6839397205857212, 1e-15);
}

TEST(LosProbability, NonIncreasing) {
  double prev = 1.0;
  for (double d = 1; d < 1000; d += 1.0) {
    const double v = los_probability(d);
    EXPECT_LE(v, prev + 1e-15);
    prev = v;
  }
}

TEST(ThermalNoise, HandValue) { EXPECT_NEAR(thermal_noise_dbm(SimParams{}), -78.97940008672037, 1e-9); }

TEST(Percentile, TypeSevenHandValues) {
  const std::vector<double> v{1, 2, 3, 4, 5};
  EXPECT_DOUBLE_EQ(percentile_sorted(v, 0.05), 1.2);
  EXPECT_DOUBLE_EQ(percentile_sorted(v, 0.5), 3.0);
  EXPECT_DOUBLE_EQ(percentile_sorted(v, 0.95), 4.8);
  EXPECT_DOUBLE_EQ(percentile_sorted({7.0}, 0.3), 7.0);
}

TEST(Summarize, MeanIsLinearDomain) {
  const MetricVector m = summarize_sinr({0.0, 10.0});
  EXPECT_NEAR(m.sinr_mean, 7.403626894942439, 1e-12);
  EXPECT_THROW(summarize_sinr({}), ValidationError);
}

TEST(Summarize, PercentilesOrdered) {
  const MetricVector m = simulate(ArrayConfig(8, 0.5, 0.5), small_params());
  EXPECT_LE(m.sinr_p5, m.sinr_p50);
  EXPECT_LE(m.sinr_p50, m.sinr_p95);
}

// A lone UE with no interferers and no shadowing: the SNR must equal the
// textbook link budget computed here from the drop geometry.
TEST(LinkBudget, SingleUserSnr) {
  SimParams p;
  p.n_interferers = 0;
  p.shadowing = false;
  p.n_ues_per_drop = 1;
  for (std::uint64_t drop = 0; drop < 25; ++drop) {
    const Scenario s = drop_scenario(p, drop);
    const Position& ue = s.ues[0];
    const double dx = ue.x, dy = ue.y, dz = ue.z - p.bs_height;
    const double d2 = std::sqrt(dx * dx + dy * dy), d3 = std::sqrt(dx * dx + dy * dy + dz * dz);
    const double theta = std::acos(dz / d3) * 180.0 / std::numbers::pi;
    const double phi = std::atan2(dy, dx) * 180.0 / std::numbers::pi;
    const double elem = 8.0 - std::min(12 * std::pow((theta - 90) / 65, 2) + 12 * std::pow(phi / 65, 2), 30.0);
    const double f = 28.0;
    double pl = 32.4 + 21 * std::log10(d3) + 20 * std::log10(f);
    if (!s.los[0][0]) pl = std::max(pl, 35.3 * std::log10(d3) + 22.4 + 21.3 * std::log10(f));
    const double snr = 40.0 + elem + 10 * std::log10(64.0) - pl - (-174 + 10 * std::log10(400e6) + 9);
    EXPECT_GE(d2, p.min_distance_2d);
    EXPECT_NEAR(compute_link_sinr(s, ArrayConfig(8, 0.5, 0.5), p)[0], snr, 1e-9);
  }
}

// UE radius has CDF (r^2 - r0^2) / (R^2 - r0^2); one-sample KS at alpha = 0.01.
TEST(Drops, RadiusDistributionKs) {
  SimParams p;
  p.n_ues_per_drop = 50;
  std::vector<double> r;
  for (std::uint64_t d = 0; d < 40; ++d)
    for (const auto& ue : drop_scenario(p, d).ues) r.push_back(std::hypot(ue.x, ue.y));
  std::sort(r.begin(), r.end());
  const double r0 = p.min_distance_2d, rr = p.cell_radius;
  double ks = 0.0;
  const double n = static_cast<double>(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double f = (r[i] * r[i] - r0 * r0) / (rr * rr - r0 * r0);
    ks = std::max({ks, std::abs(f - i / n), std::abs(f - (i + 1) / n)});
  }
  EXPECT_LT(ks, 1.63 / std::sqrt(n));
}

TEST(Drops, UesInsideServingSector) {
  SimParams p;
  for (std::uint64_t d = 0; d < 20; ++d) {
    const Scenario s = drop_scenario(p, d);
    for (const auto& ue : s.ues) {
      const double r = std::hypot(ue.x, ue.y);
      EXPECT_GE(r, p.min_distance_2d - 1e-9);
      EXPECT_LE(r, p.cell_radius + 1e-9);
      EXPECT_LE(std::abs(std::atan2(ue.y, ue.x)) * 180 / std::numbers::pi, 60.0 + 1e-9);
      EXPECT_DOUBLE_EQ(ue.z, p.ut_height);
    }
    ASSERT_EQ(s.interferers.size(), 6u);
    for (const auto& i : s.interferers)
      EXPECT_NEAR(std::hypot(i.sector.position.x, i.sector.position.y), 2 * p.cell_radius, 1e-9);
  }
}

TEST(Drops, DeterministicPerIndex) {
  const SimParams p;
  EXPECT_EQ(drop_scenario(p, 3), drop_scenario(p, 3));
  EXPECT_FALSE(drop_scenario(p, 3) == drop_scenario(p, 4));
}

TEST(Simulate, DeterministicAndJobInvariant) {
  const SimParams p = small_params();
  const ArrayConfig c(16, 0.6, 0.4);
  const MetricVector a = simulate(c, p, 1);
  EXPECT_EQ(a, simulate(c, p, 1));
  EXPECT_EQ(a, simulate(c, p, 3));
}

TEST(Simulate, SeedChangesResult) {
  SimParams p = small_params();
  const ArrayConfig c(8, 0.5, 0.5);
  const MetricVector a = simulate(c, p);
  p.seed = 99;
  EXPECT_FALSE(a == simulate(c, p));
}

TEST(Simulate, InterferenceLowersSinr) {
  SimParams p = small_params();
  const ArrayConfig c(8, 0.5, 0.5);
  const MetricVector with = simulate(c, p);
  p.n_interferers = 0;
  const MetricVector without = simulate(c, p);
  EXPECT_LT(with.sinr_mean, without.sinr_mean);
  EXPECT_LT(with.sinr_p5, without.sinr_p5);
}

TEST(Simulate, MorePowerNeverHurts) {
  SimParams p = small_params();
  const ArrayConfig c(4, 0.5, 0.5);
  const MetricVector low = simulate(c, p);
  p.tx_power_dbm += 10;
  const MetricVector high = simulate(c, p);
  EXPECT_GE(high.sinr_p5, low.sinr_p5);
  EXPECT_GE(high.sinr_mean, low.sinr_mean);
}

TEST(SimParams, Validation) {
  SimParams p;
  p.n_drops = 0;
  EXPECT_THROW(p.validate(), ValidationError);
  p = {};
  p.bandwidth = -1;
  EXPECT_THROW(p.validate(), ValidationError);
}

TEST(Metric, NamesRoundTrip) {
  for (Metric m : kAllMetrics) EXPECT_EQ(parse_metric(metric_name(m)), m);
  EXPECT_EQ(parse_metric("sinr_p5_db"), Metric::P5);
  EXPECT_THROW(parse_metric("sinr_p7"), ValidationError);
}
