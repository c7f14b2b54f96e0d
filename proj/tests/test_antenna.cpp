#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "emuopt/antenna.hpp"
#include "oracles.hpp"

using namespace emuopt;

TEST(Divisors, OfSixtyFour) { EXPECT_EQ(divisors(64), (std::vector<int>{1, 2, 4, 8, 16, 32, 64})); }

TEST(Divisors, OfTwelve) { EXPECT_EQ(divisors(12), (std::vector<int>{1, 2, 3, 4, 6, 12})); }

TEST(ArrayConfig, DerivesNz) {
  ArrayConfig c(16, 0.5, 0.7);
  EXPECT_EQ(c.n_z, 4);
  EXPECT_EQ(c.elements(), 64);
}

TEST(ArrayConfig, RejectsNonDivisor) {
  try {
    ArrayConfig(5, 0.5, 0.5);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("divisor"), std::string::npos);
  }
}

TEST(ArrayConfig, RejectsNonPositiveSpacing) {
  EXPECT_THROW(ArrayConfig(8, 0.0, 0.5), ValidationError);
  EXPECT_THROW(ArrayConfig(8, 0.5, -1.0), ValidationError);
}

TEST(ElementPattern, HandValues) {
  EXPECT_DOUBLE_EQ(element_gain_db({90, 0}), 8.0);
  EXPECT_NEAR(element_gain_db({90, 32.5}), 5.0, 1e-12);
  EXPECT_NEAR(element_gain_db({57.5, 0}), 5.0, 1e-12);
  EXPECT_NEAR(element_gain_db({0, 0}), -15.00591715976331, 1e-12);
  EXPECT_DOUBLE_EQ(element_gain_db({90, 180}), 8.0 - 30.0);
}

TEST(ElementPattern, BoundedAndSymmetric) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> th(0, 180), ph(-180, 180);
  for (int i = 0; i < 2000; ++i) {
    const double t = th(rng), p = ph(rng);
    const double g = element_gain_db({t, p});
    EXPECT_LE(g, 8.0);
    EXPECT_GE(g, -22.0);
    EXPECT_DOUBLE_EQ(g, element_gain_db({t, -p}));
  }
}

TEST(ArrayFactor, MatchesPhasorDoubleSum) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> th(10, 170), ph(-170, 170), sp(0.2, 1.0);
  for (int ny : divisors(64)) {
    for (int trial = 0; trial < 50; ++trial) {
      const ArrayConfig c(ny, sp(rng), sp(rng));
      const Direction s(th(rng), ph(rng)), o(th(rng), ph(rng));
      const double expected = oracle::phasor_sum_power(c.n_y, c.n_z, c.d_y, c.d_z, s.theta, s.phi, o.theta, o.phi);
      EXPECT_NEAR(array_factor_power(c, s, o), expected, 1e-9 * 4096 + 1e-9 * expected);
    }
  }
}

TEST(ArrayFactor, GratingLobeAtFullPeriod) {
  // Horizontal spacing 1 lambda, steered broadside: obs at phi = 90 deg in the
  // horizontal plane sits on a grating lobe (psi_y * d_y = 1).
  const ArrayConfig c = ArrayConfig::with_shape(64, 1, 1.0, 0.5);
  EXPECT_NEAR(array_factor_power(c, {90, 0}, {90, 90}), 64.0 * 64.0, 1e-6);
}

TEST(TotalGain, SteeredPeakIsElementPlusArrayGain) {
  const double expected = 8.0 + 10.0 * std::log10(64.0);
  for (int ny : divisors(64))
    for (double dy : {0.2, 0.5, 0.73, 1.0})
      for (double dz : {0.2, 0.5, 1.0}) {
        const ArrayConfig c(ny, dy, dz);
        EXPECT_NEAR(total_gain_db(c, {90, 0}, {90, 0}), expected, 1e-9);
      }
}

TEST(TotalGain, NeverExceedsPeak) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> th(0, 180), ph(-180, 180), sp(0.2, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const ArrayConfig c(divisors(64)[i % 7], sp(rng), sp(rng));
    EXPECT_LE(total_gain_db(c, {th(rng), ph(rng)}, {th(rng), ph(rng)}), 8.0 + 10 * std::log10(64.0) + 1e-9);
  }
}

TEST(Direction, NormalizesAzimuth) {
  EXPECT_DOUBLE_EQ(Direction(90, 370).phi, 10.0);
  EXPECT_DOUBLE_EQ(Direction(90, -190).phi, 170.0);
  EXPECT_DOUBLE_EQ(Direction(-5, 0).theta, 0.0);
}
