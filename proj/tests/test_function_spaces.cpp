#include <hgp/function_spaces.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "test_fields.hpp"

namespace hgp {
namespace {

using testing_fields::random_field;

TEST(SobolevNorm, GroundStateSigmaNorm) {
  const auto g = build_grid(8, 16);
  EXPECT_NEAR(sobolev_norm(CoefField::delta(g, {0, 0}), 1.0), std::sqrt(2.0), 1e-15);
}

TEST(SobolevNorm, ZeroRegularityIsL2) {
  const auto g = build_grid(12, 24);
  std::mt19937_64 rng(3);
  const CoefField c = random_field(g, rng);
  EXPECT_NEAR(sobolev_norm(c, 0.0), c.l2_norm(), 1e-12 * c.l2_norm());
}

// λ_k²|c_k|² summed equals ∫|∂₁u|²+|∂₂u|²+|x₁u|²+|x₂u|², with the integrals
// taken by quadrature of the exact node derivatives.
TEST(SobolevNorm, SigmaNormMatchesGradientAndPositionIntegrals) {
  const auto g = build_grid(16, 32);
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const CoefField c = random_field(g, rng, 2);
    const Eigen::MatrixXcd u = synthesize_values(*g, c.coef());
    const Eigen::MatrixXcd d1 = derivative_values(*g, c.coef(), 0);
    const Eigen::MatrixXcd d2 = derivative_values(*g, c.coef(), 1);
    Eigen::MatrixXd r2(g->Mq, g->Mq);
    for (int j = 0; j < g->Mq; ++j) {
      for (int i = 0; i < g->Mq; ++i) r2(i, j) = g->nodes(i) * g->nodes(i) + g->nodes(j) * g->nodes(j);
    }
    const double quad = integrate_values(*g, (d1.cwiseAbs2() + d2.cwiseAbs2() + r2.cwiseProduct(u.cwiseAbs2())).eval());
    const double exact = std::pow(sobolev_norm(c, 1.0), 2);
    EXPECT_NEAR(quad, exact, 1e-8 * exact);
  }
}

// ∫ψ₀⁴ = π^{-1}√(π/2) per axis. The integrand is not polynomial against the
// Gauss weight, so the rule needs headroom beyond Mq = 2K.
TEST(SobolevNorm, GridL4NormOfGroundState) {
  const auto g = build_grid(8, 48);
  const double per_axis = std::sqrt(std::numbers::pi / 2.0) / std::numbers::pi;
  EXPECT_NEAR(sobolev_norm(CoefField::delta(g, {0, 0}), SobolevIndex{0.0, 4.0}), std::pow(per_axis * per_axis, 0.25),
              1e-12);
}

TEST(SobolevNorm, GridSupNormOfGroundState) {
  const auto g = build_grid(8, 17);  // odd order puts a node at the origin
  EXPECT_NEAR(sobolev_norm(CoefField::delta(g, {0, 0}), SobolevIndex{0.0, SobolevIndex::infinity()}),
              1.0 / std::sqrt(std::numbers::pi), 1e-14);
  // (-H)^{1/2} scales the ground state by √2
  EXPECT_NEAR(sobolev_norm(CoefField::delta(g, {0, 0}), SobolevIndex{1.0, SobolevIndex::infinity()}),
              std::sqrt(2.0 / std::numbers::pi), 1e-14);
}

TEST(SobolevNorm, ApproximateFlagOnlyAtQTwo) {
  EXPECT_TRUE((SobolevIndex{1.0, 2.0}.is_exact()));
  EXPECT_FALSE((SobolevIndex{1.0, 4.0}.is_exact()));
  EXPECT_FALSE((SobolevIndex{1.0, SobolevIndex::infinity()}.is_exact()));
}

TEST(SobolevNorm, MonotoneInRegularity) {
  const auto g = build_grid(12, 24);
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const CoefField c = random_field(g, rng);
    double prev = sobolev_norm(c, 0.0);
    for (double s : {0.25, 0.5, 1.0, 1.5, 2.0, 3.0}) {
      const double cur = sobolev_norm(c, s);
      EXPECT_LE(prev, cur);
      prev = cur;
    }
  }
}

TEST(CutoffProfile, Shape) {
  EXPECT_EQ(cutoff_profile(0.0), 1.0);
  EXPECT_EQ(cutoff_profile(0.5), 1.0);
  EXPECT_EQ(cutoff_profile(1.0), 0.0);
  EXPECT_EQ(cutoff_profile(3.0), 0.0);
  EXPECT_NEAR(cutoff_profile(0.75), 0.5, 1e-15);  // symmetric glue
  double prev = 1.0;
  for (int i = 1; i < 200; ++i) {
    const double r = 0.5 + 0.5 * i / 200.0;
    const double v = cutoff_profile(r);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    EXPECT_LE(v, prev);
    prev = v;
  }
}

TEST(SmoothTruncate, LowModesUntouched) {
  const auto g = build_grid(16, 32);
  std::mt19937_64 rng(7);
  const CoefField c = random_field(g, rng);
  const int N = 10;
  const CoefField t = smooth_truncate(c, N);
  for (int k2 = 0; k2 < 16; ++k2) {
    for (int k1 = 0; k1 < 16; ++k1) {
      if (2.0 * (k1 + k2) + 2.0 <= N + 1.0) EXPECT_EQ(t(k1, k2), c(k1, k2));
      if (2.0 * (k1 + k2) + 2.0 >= 2.0 * N + 2.0) EXPECT_EQ(t(k1, k2), cplx(0.0));
    }
  }
}

TEST(SmoothTruncate, ComposesAsSquaredMultiplier) {
  const auto g = build_grid(16, 32);
  std::mt19937_64 rng(8);
  const CoefField c = random_field(g, rng);
  const int N = 9;
  const CoefField twice = smooth_truncate(smooth_truncate(c, N), N);
  const CoefField squared =
      apply_spectral_multiplier(c, [N](int k1, int k2) { return std::pow(truncation_weight(k1, k2, N), 2); });
  EXPECT_LT((twice - squared).l2_norm(), 1e-14);
  for (double s : {0.0, 0.5, 1.0, 2.0}) EXPECT_LE(sobolev_norm(smooth_truncate(c, N), s), sobolev_norm(c, s));
}

TEST(SmoothTruncate, GapNonincreasingAndEventuallyZero) {
  const int K = 10;
  const auto g = build_grid(K, 20);
  std::mt19937_64 rng(9);
  const CoefField c = random_field(g, rng);
  // largest retained λ_k² is 2(2K-2)+2; the gap vanishes once λ_N² ≥ 2 of that
  const int N_zero = 2 * (2 * K - 2) + 1;
  for (double s : {0.0, 1.0, 2.0}) {
    double prev = sobolev_norm(c, s);
    for (int N = 0; N <= N_zero; ++N) {
      const double gap = sobolev_norm(c - smooth_truncate(c, N), s);
      EXPECT_LE(gap, prev * (1.0 + 1e-14));
      prev = gap;
    }
    EXPECT_EQ(prev, 0.0);
  }
}

TEST(TruncationEstimates, HoldForUnitRegularityShift) {
  const auto g = build_grid(16, 32);
  std::mt19937_64 rng(12);
  for (int N : {1, 4, 7, 15}) {
    const auto r = check_truncation_estimates(random_field(g, rng), N, 1.0, 0.0);
    EXPECT_TRUE(r.pass()) << r.low_ratio << " " << r.high_ratio;
    EXPECT_LE(r.low_ratio, 1.0);
    EXPECT_LE(r.high_ratio, 1.0);
  }
}

TEST(TruncationEstimates, SingleLowModeRatio) {
  const auto g = build_grid(16, 32);
  const int N = 12;
  const MultiIndex k{2, 1};  // λ_k² = 8 ≤ λ_N²/2 = 13
  for (double s : {0.5, 1.0, 2.0}) {
    const auto r = check_truncation_estimates(CoefField::delta(g, k), N, s, 0.0);
    const double expected = std::pow(k.eigenvalue() / lambda_level_sq(N), 0.5 * s);
    EXPECT_NEAR(r.low_ratio, expected, 1e-14);
    EXPECT_LE(r.low_ratio, std::pow(2.0, -0.5 * s) + 1e-15);
  }
}

TEST(TruncationEstimates, ZeroFieldIsVacuous) {
  const auto g = build_grid(8, 16);
  const auto r = check_truncation_estimates(CoefField(g), 3, 1.0, 0.0);
  EXPECT_TRUE(r.vacuous);
  EXPECT_TRUE(r.pass());
}

TEST(TruncationEstimates, RandomizedOverRegularities) {
  const auto g = build_grid(16, 32);
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> level(0, 15);
  for (int trial = 0; trial < 40; ++trial) {
    const CoefField c = random_field(g, rng, 0, 0.5 * (trial % 5));
    const int N = level(rng);
    for (double alpha : {-1.0, 0.0, 1.0}) {
      for (double s : {0.5, 1.0, 2.0}) {
        const auto r = check_truncation_estimates(c, N, s, alpha);
        EXPECT_TRUE(r.pass()) << "N=" << N << " alpha=" << alpha << " s=" << s << " low=" << r.low_ratio
                              << " high=" << r.high_ratio;
      }
    }
  }
}

TEST(DualityBracket, Examples) {
  const auto g = build_grid(8, 16);
  const CoefField d = CoefField::delta(g, {0, 0});
  EXPECT_EQ(duality_bracket(d, d), 1.0);
  std::mt19937_64 rng(14);
  const CoefField phi = random_field(g, rng, 0, 1.0, true);
  EXPECT_NEAR(duality_bracket(cplx(0.0, 1.0) * phi, phi), 0.0, 1e-14);
}

TEST(DualityBracket, MatchesQuadrature) {
  const auto g = build_grid(12, 24);
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 10; ++trial) {
    const CoefField T = random_field(g, rng);
    const CoefField phi = random_field(g, rng);
    const Eigen::MatrixXcd a = synthesize_values(*g, T.coef());
    const Eigen::MatrixXcd b = synthesize_values(*g, phi.coef());
    const Eigen::MatrixXd re = a.cwiseProduct(b.conjugate()).real();
    EXPECT_NEAR(duality_bracket(T, phi), integrate_values(*g, re), 1e-9);
  }
}

TEST(DualityBracket, RejectsMismatchedGrids) {
  EXPECT_THROW(duality_bracket(CoefField(build_grid(4, 8)), CoefField(build_grid(5, 10))), std::invalid_argument);
}

TEST(DualityBracket, NegativeNormPairingBound) {
  const auto g = build_grid(12, 24);
  std::mt19937_64 rng(16);
  for (int trial = 0; trial < 200; ++trial) {
    const CoefField T = random_field(g, rng, 0, -1.0);
    const CoefField phi = random_field(g, rng, 0, 2.0);
    for (double s : {0.5, 1.0, 2.5}) {
      const double lhs = std::abs(duality_bracket(T, phi));
      const double rhs = sobolev_norm(T, -s) * sobolev_norm(phi, s);
      EXPECT_LE(lhs, rhs + 1e-10);
    }
  }
}

TEST(Interpolation, SingleModeIsEquality) {
  const auto g = build_grid(8, 16);
  for (double sigma : {0.3, 1.0, 1.7}) {
    const auto r = interpolation_check(CoefField::delta(g, {3, 2}, cplx(0.4, -1.1)), sigma);
    EXPECT_NEAR(r.ratio, 1.0, 1e-12);
  }
}

TEST(Interpolation, RandomFieldsNeverExceedOne) {
  const auto g = build_grid(10, 20);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> sig(0.05, 1.95);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto r = interpolation_check(random_field(g, rng, 0, 0.5 * (trial % 4)), trial % 2 ? 1.0 : sig(rng));
    EXPECT_LE(r.ratio, 1.0 + 1e-12);
  }
}

TEST(Interpolation, EndpointLimits) {
  const auto g = build_grid(10, 20);
  std::mt19937_64 rng(18);
  const CoefField c = random_field(g, rng);
  const double l2 = c.l2_norm();
  const double w22 = sobolev_norm(c, 2.0);
  const auto lo = interpolation_check(c, 1e-12);
  const auto hi = interpolation_check(c, 2.0 - 1e-12);
  EXPECT_NEAR(lo.lhs, l2, 1e-10 * l2);
  EXPECT_NEAR(lo.rhs, l2, 1e-10 * l2);
  EXPECT_NEAR(hi.lhs, w22, 1e-10 * w22);
  EXPECT_NEAR(hi.rhs, w22, 1e-10 * w22);
}

TEST(Interpolation, RejectsOutOfRangeSigma) {
  const auto g = build_grid(4, 8);
  EXPECT_THROW(interpolation_check(CoefField(g), 0.0), std::invalid_argument);
  EXPECT_THROW(interpolation_check(CoefField(g), 2.0), std::invalid_argument);
}

}  // namespace
}  // namespace hgp
