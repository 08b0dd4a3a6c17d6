#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "sosflow/error.hpp"
#include "sosflow/sospoly.hpp"

namespace sosflow {
namespace {

SosCoeffs make(std::initializer_list<std::initializer_list<double>> rows,
               double c = 0.0) {
  SosCoeffs out;
  out.a.resize(static_cast<Eigen::Index>(rows.size()),
               static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& row : rows) {
    Eigen::Index j = 0;
    for (double v : row) out.a(i, j++) = v;
    ++i;
  }
  out.c = c;
  return out;
}

SosCoeffs random_coeffs(std::mt19937_64& rng, int k, int r) {
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  SosCoeffs out;
  out.a.resize(k, r + 1);
  for (Eigen::Index i = 0; i < out.a.size(); ++i) out.a.data()[i] = coef(rng);
  out.c = coef(rng);
  return out;
}

// Brute-force oracle: square each polynomial by schoolbook multiplication,
// sum, then integrate term by term.
std::vector<double> poly_mul(const std::vector<double>& p,
                             const std::vector<double>& q) {
  std::vector<double> out(p.size() + q.size() - 1, 0.0);
  for (size_t i = 0; i < p.size(); ++i)
    for (size_t j = 0; j < q.size(); ++j) out[i + j] += p[i] * q[j];
  return out;
}

TEST(Expand, IdentityCase) {
  const auto poly = expand(make({{1.0}}));
  ASSERT_EQ(poly.b.size(), 1);
  EXPECT_EQ(poly.b(0), 1.0);
  EXPECT_EQ(poly.c, 0.0);
}

TEST(Expand, MatchesQuadratureOfSquare) {
  const auto poly = expand(make({{1.0, 2.0}}));
  for (double z : {0.5, 1.0, 2.0}) {
    const double quad = boost::math::quadrature::gauss<double, 20>::integrate(
        [](double u) { return (1.0 + 2.0 * u) * (1.0 + 2.0 * u); }, 0.0, z);
    EXPECT_NEAR(eval(poly, z), quad, 1e-12) << "z=" << z;
    EXPECT_NEAR(eval(poly, z), z + 2 * z * z + 4.0 / 3.0 * z * z * z, 1e-12);
  }
}

TEST(Expand, AffineUniformToNormalTruncation) {
  const double mu = 0.7, sigma = 1.9;
  const auto coeffs =
      make({{std::pow(2.0 * std::numbers::pi, 0.25) * std::sqrt(sigma)}},
           mu - std::sqrt(2.0 * std::numbers::pi) * sigma / 2.0);
  const auto poly = expand(coeffs);
  for (double z : {0.0, 0.25, 0.5, 1.0})
    EXPECT_NEAR(eval(poly, z),
                mu + std::sqrt(2.0 * std::numbers::pi) * sigma * (z - 0.5),
                1e-12);
}

TEST(Expand, ConvolutionMatchesBruteForceExactly) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> coef(-5, 5);
  for (int k = 1; k <= 3; ++k)
    for (int r = 0; r <= 3; ++r)
      for (int trial = 0; trial < 20; ++trial) {
        SosCoeffs c;
        c.a.resize(k, r + 1);
        for (Eigen::Index i = 0; i < c.a.size(); ++i) c.a.data()[i] = coef(rng);
        std::vector<double> sum(2 * r + 1, 0.0);
        for (int kappa = 0; kappa < k; ++kappa) {
          std::vector<double> row(r + 1);
          for (int l = 0; l <= r; ++l) row[l] = c.a(kappa, l);
          const auto sq = poly_mul(row, row);
          for (size_t m = 0; m < sq.size(); ++m) sum[m] += sq[m];
        }
        const auto poly = expand(c);
        for (int m = 0; m <= 2 * r; ++m) EXPECT_EQ(poly.b(m), sum[m]);
      }
}

TEST(Eval, Examples) {
  EXPECT_DOUBLE_EQ(eval(expand(make({{1.0}})), 3.7), 3.7);
  EXPECT_NEAR(eval(expand(make({{1.0, 0.0}, {0.0, std::sqrt(3.0)}})), 1.0), 2.0,
              1e-15);
  EXPECT_NEAR(eval(expand(make({{1.0, 2.0}})), -1.0), -1.0 / 3.0, 1e-15);
}

TEST(Eval, OverflowGivesSignedInfinity) {
  const auto poly = expand(make({{0.0, 0.0, 1.0}}));  // z^5 / 5
  EXPECT_EQ(eval(poly, 1e300), std::numeric_limits<double>::infinity());
  EXPECT_EQ(eval(poly, -1e300), -std::numeric_limits<double>::infinity());
}

TEST(Deriv, Examples) {
  EXPECT_EQ(deriv(make({{1.0}}), -12.5), 1.0);
  EXPECT_EQ(deriv(make({{1.0, 2.0}}), 1.0), 9.0);
  EXPECT_NEAR(deriv(make({{1.0, 0.0}, {0.0, std::sqrt(3.0)}}), 2.0), 13.0,
              1e-13);
}

TEST(Deriv, LogFloorOnlyInsideLog) {
  const auto zero = make({{0.0, 0.0}});
  EXPECT_EQ(deriv(zero, 0.3), 0.0);
  EXPECT_EQ(log_deriv(zero, 0.3), std::log(kDerivFloor));
}

TEST(Invert, Examples) {
  EXPECT_NEAR(invert(make({{1.0}}), 5.0, 1e-12), 5.0, 1e-12);
  EXPECT_NEAR(invert(make({{1.0, 0.0}, {0.0, std::sqrt(3.0)}}), 2.0, 1e-12), 1.0,
              1e-12);
  const auto affine =
      make({{std::pow(2.0 * std::numbers::pi, 0.25)}},
           -std::sqrt(2.0 * std::numbers::pi) / 2.0);
  EXPECT_NEAR(invert(affine, 0.0, 1e-12), 0.5, 1e-12);
}

TEST(Invert, ConstantMapIsNotInvertible) {
  const auto zero = make({{0.0, 0.0}, {0.0, 0.0}}, 1.5);
  EXPECT_EQ(eval(expand(zero), 10.0), 1.5);
  try {
    invert(zero, 1.5, 1e-12);
    FAIL() << "expected NotInvertible";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNotInvertible);
  }
}

TEST(Invert, IterationCapRaisesNoConvergence) {
  const auto steep = make({{1.0}});
  try {
    invert(steep, 1e40, 1e-12, 10);
    FAIL() << "expected NoConvergence";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNoConvergence);
  }
}

TEST(Invert, FarTargetsBracketByDoubling) {
  const auto c = make({{0.5, 0.1}});
  const auto poly = expand(c);
  for (double x : {-1e6, -300.0, 250.0, 4e5}) {
    const double z = invert(c, poly, x, 1e-9);
    EXPECT_NEAR(eval(poly, z), x, 1e-9 * std::max(1.0, std::abs(x)));
  }
}

// Property checks over random coefficient sets.

TEST(SosProperty, Monotone) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> kd(1, 3), rd(0, 3);
  std::uniform_real_distribution<double> zd(-5.0, 5.0);
  for (int trial = 0; trial < 10000; ++trial) {
    const auto c = random_coeffs(rng, kd(rng), rd(rng));
    const auto poly = expand(c);
    double z1 = zd(rng), z2 = zd(rng);
    if (z1 > z2) std::swap(z1, z2);
    ASSERT_LE(eval(poly, z1), eval(poly, z2));
  }
}

TEST(SosProperty, DerivativeMatchesFiniteDifference) {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> kd(1, 3), rd(0, 3);
  std::uniform_real_distribution<double> zd(-5.0, 5.0);
  const double h = 1e-5;
  for (int trial = 0; trial < 10000; ++trial) {
    const auto c = random_coeffs(rng, kd(rng), rd(rng));
    const auto poly = expand(c);
    const double z = zd(rng);
    const double fd = (eval(poly, z + h) - eval(poly, z - h)) / (2 * h);
    const double exact = deriv(c, z);
    ASSERT_GE(exact, 0.0);
    // Relative error, measured against unit scale where T' itself is < 1.
    ASSERT_LE(std::abs(fd - exact) / std::max(exact, 1.0), 1e-6)
        << "z=" << z << " deriv=" << exact;
  }
}

TEST(SosProperty, Roundtrip) {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> kd(1, 3), rd(0, 3);
  std::uniform_real_distribution<double> zd(-5.0, 5.0);
  for (int trial = 0; trial < 10000; ++trial) {
    const auto c = random_coeffs(rng, kd(rng), rd(rng));
    const auto poly = expand(c);
    const double z = zd(rng);
    const double back = invert(c, poly, eval(poly, z), 1e-12);
    ASSERT_LE(std::abs(back - z), 1e-8) << "trial " << trial;
  }
}

TEST(SosProperty, DerivativeNonNegativeEverywhere) {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> zd(-50.0, 50.0);
  for (int trial = 0; trial < 5000; ++trial) {
    const auto c = random_coeffs(rng, 1 + trial % 3, trial % 4);
    ASSERT_GE(deriv(c, zd(rng)), 0.0);
  }
}

TEST(SosKernel, MatchesPublicOperations) {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> zd(-3.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 1 + trial % 3, r = trial % 4;
    const auto c = random_coeffs(rng, k, r);
    std::vector<double> block;
    for (int kappa = 0; kappa < k; ++kappa)
      for (int l = 0; l <= r; ++l) block.push_back(c.a(kappa, l));
    block.push_back(c.c);
    const double z = zd(rng);
    const auto pv = sos::forward(block, k, r, z);
    EXPECT_EQ(pv.z, eval(expand(c), z));
    EXPECT_NEAR(pv.deriv, deriv(c, z), 1e-12 * std::max(1.0, pv.deriv));
  }
}

}  // namespace
}  // namespace sosflow
