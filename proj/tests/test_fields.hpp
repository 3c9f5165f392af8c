#pragma once

// Random test fields shared by the unit suites.

#include <hgp/hermite_core.hpp>

#include <random>

namespace hgp::testing_fields {

/// Random complex field with i.i.d. normal coefficients damped by λ_k^{-decay}.
/// The last `zero_shells` rows and columns of the square are cleared, which
/// keeps ladder and derivative operators clear of the cutoff.
inline CoefField random_field(const GridPtr& g, std::mt19937_64& rng, int zero_shells = 0, double decay = 1.0,
                              bool real = false) {
  std::normal_distribution<double> n;
  const int K = g->K;
  Eigen::MatrixXcd c = Eigen::MatrixXcd::Zero(K, K);
  for (int k2 = 0; k2 < K - zero_shells; ++k2) {
    for (int k1 = 0; k1 < K - zero_shells; ++k1) {
      const double damp = std::pow(lambda_sq(k1, k2), -0.5 * decay);
      c(k1, k2) = damp * (real ? cplx(n(rng), 0.0) : cplx(n(rng), n(rng)));
    }
  }
  return CoefField(g, c, real);
}

}  // namespace hgp::testing_fields
