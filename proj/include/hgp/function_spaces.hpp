#pragma once

// Hermite–Sobolev norms, the smooth spectral truncation S_N and the
// coefficient-level inequalities attached to it.

#include <hgp/hermite_core.hpp>

#include <cmath>
#include <limits>

namespace hgp {

/// Regularity s and integrability q of W^{s,q} = {u : (-H)^{s/2} u ∈ L^q}.
/// Only q = 2 is exact; any other q is a quadrature of the band-limited
/// representative and must be labeled approximate downstream.
struct SobolevIndex {
  double s = 0.0;
  double q = 2.0;

  bool is_exact() const { return q == 2.0; }
  static constexpr double infinity() { return std::numeric_limits<double>::infinity(); }
};

/// Grid L^q norm of node values; q = ∞ is the node maximum.
template <typename Derived>
double grid_lq_norm(const SpectralGrid& g, const Eigen::MatrixBase<Derived>& values, double q) {
  if (std::isinf(q)) return values.cwiseAbs().maxCoeff();
  const Eigen::MatrixXd powq = values.cwiseAbs().array().pow(q).matrix();
  return std::pow(integrate_values(g, powq), 1.0 / q);
}

/// |c|_{W^{s,q}} = |(-H)^{s/2} c|_{L^q}.
inline double sobolev_norm(const CoefField& c, SobolevIndex idx) {
  const int K = c.K();
  if (idx.is_exact()) {
    double acc = 0.0;
    for (int k2 = 0; k2 < K; ++k2) {
      for (int k1 = 0; k1 < K; ++k1) acc += std::pow(lambda_sq(k1, k2), idx.s) * std::norm(c(k1, k2));
    }
    return std::sqrt(acc);
  }
  const CoefField lifted = apply_minus_H_power(c, 0.5 * idx.s);
  const auto& g = c.spectral_grid();
  if (c.is_real()) return grid_lq_norm(g, synthesize_values(g, lifted.coef().real().eval()), idx.q);
  return grid_lq_norm(g, synthesize_values(g, lifted.coef()), idx.q);
}

inline double sobolev_norm(const CoefField& c, double s) { return sobolev_norm(c, SobolevIndex{s, 2.0}); }

/// The fixed cutoff profile: 1 on [0, 1/2], 0 on [1, ∞), C^∞ glue between.
inline double cutoff_profile(double r) {
  r = std::abs(r);
  if (r <= 0.5) return 1.0;
  if (r >= 1.0) return 0.0;
  const auto f = [](double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; };
  const double a = f(1.0 - r);
  const double b = f(r - 0.5);
  return a / (a + b);
}

/// χ_{k,N} = χ(λ_k² / λ_N²).
inline double truncation_weight(int k1, int k2, int N) {
  return cutoff_profile(lambda_sq(k1, k2) / lambda_level_sq(N));
}

/// Weights χ_{k,N} on the K×K square.
inline Eigen::MatrixXd truncation_weights(int K, int N) {
  Eigen::MatrixXd w(K, K);
  for (int k2 = 0; k2 < K; ++k2) {
    for (int k1 = 0; k1 < K; ++k1) w(k1, k2) = truncation_weight(k1, k2, N);
  }
  return w;
}

/// S_N c.
inline CoefField smooth_truncate(const CoefField& c, int N) {
  if (N < 0) throw std::invalid_argument("smooth_truncate: N must be nonnegative");
  return apply_spectral_multiplier(c, [N](int k1, int k2) { return truncation_weight(k1, k2, N); });
}

struct TruncationReport {
  /// |S_N c|_{W^{α+s,2}} / (λ_N^s |c|_{W^{α,2}})
  double low_ratio = 0.0;
  /// |c - S_N c|_{W^{α,2}} / (λ_{⌊N/2⌋}^{-s} |c|_{W^{α+s,2}})
  double high_ratio = 0.0;
  bool vacuous = false;
  bool pass() const { return vacuous || (low_ratio <= 1.0 + 1e-12 && high_ratio <= 1.0 + 1e-12); }
};

/// Low- and high-frequency estimates of S_N with p = 2 and constant 1.
inline TruncationReport check_truncation_estimates(const CoefField& c, int N, double s, double alpha) {
  if (!(s > 0.0)) throw std::invalid_argument("check_truncation_estimates: s must be positive");
  TruncationReport r;
  const double base = sobolev_norm(c, alpha);
  const double lifted = sobolev_norm(c, alpha + s);
  if (base == 0.0 || lifted == 0.0) {
    r.vacuous = true;
    return r;
  }
  const CoefField low = smooth_truncate(c, N);
  r.low_ratio = sobolev_norm(low, alpha + s) / (std::pow(lambda_level(N), s) * base);
  r.high_ratio = sobolev_norm(c - low, alpha) / (std::pow(lambda_level(N / 2), -s) * lifted);
  return r;
}

/// Real bracket ⟨T, φ⟩ = Re ∫ T φ̄, in Parseval form.
inline double duality_bracket(const CoefField& T, const CoefField& phi) {
  if (T.K() != phi.K()) {
    throw std::invalid_argument("duality_bracket: fields live on different grids");
  }
  return (T.coef().array() * phi.coef().array().conjugate()).sum().real();
}

struct InterpolationReport {
  double lhs = 0.0;  // |c|_{W^{σ,2}}
  double rhs = 0.0;  // |c|_{W^{2,2}}^{σ/2} |c|_{L²}^{1-σ/2}
  double ratio = 0.0;
  bool vacuous = false;
  bool pass() const { return vacuous || ratio <= 1.0 + 1e-12; }
};

/// Log-convexity |c|_{W^{σ,2}} ≤ |c|_{W^{2,2}}^{σ/2} |c|_{L²}^{1-σ/2}.
inline InterpolationReport interpolation_check(const CoefField& c, double sigma) {
  if (!(sigma > 0.0 && sigma < 2.0)) throw std::invalid_argument("interpolation_check: sigma must lie in (0, 2)");
  InterpolationReport r;
  r.lhs = sobolev_norm(c, sigma);
  const double top = sobolev_norm(c, 2.0);
  const double bottom = c.l2_norm();
  r.rhs = std::pow(top, 0.5 * sigma) * std::pow(bottom, 1.0 - 0.5 * sigma);
  if (r.rhs == 0.0) {
    r.vacuous = true;
    return r;
  }
  r.ratio = r.lhs / r.rhs;
  return r;
}

}  // namespace hgp
