#pragma once

// Spatial white noise on the Hermite basis, the potential Y = (-H)^{-1} ξ and
// its truncations, the Wick counterterm C_N² = E|∇Y_N|², and the exponential
// weights e^{aY_N}.

#include <hgp/function_spaces.hpp>
#include <hgp/hermite_core.hpp>

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>
#include <tuple>

namespace hgp {

// ---------------------------------------------------------------------------
// Counter-based Gaussian stream.
//
// A realization is keyed by (seed, stream_index):
//   key = splitmix64(seed ^ splitmix64(stream_index + 0x632be59bd9b4e019))
// The coordinate ξ_k uses counters 2m and 2m+1, m = (k1+k2)(k1+k2+1)/2 + k2
// (Cantor pairing), so ξ_k does not depend on the basis cutoff K. Each counter
// is turned into a uniform on (0,1) by uniform(key, c) = (splitmix64(key +
// c·0x9e3779b97f4a7c15) >> 11 + 0.5)·2⁻⁵³, and the pair goes through the
// cosine branch of Box–Muller.

inline constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t stream_key(std::uint64_t seed, std::uint64_t stream_index) {
  return splitmix64(seed ^ splitmix64(stream_index + 0x632be59bd9b4e019ULL));
}

inline double counter_uniform(std::uint64_t key, std::uint64_t counter) {
  const std::uint64_t bits = splitmix64(key + counter * 0x9e3779b97f4a7c15ULL) >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

inline double counter_normal(std::uint64_t key, std::uint64_t index) {
  const double u1 = counter_uniform(key, 2 * index);
  const double u2 = counter_uniform(key, 2 * index + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline constexpr std::uint64_t mode_counter(int k1, int k2) {
  const auto n = static_cast<std::uint64_t>(k1 + k2);
  return n * (n + 1) / 2 + static_cast<std::uint64_t>(k2);
}

struct NoiseRealization {
  std::uint64_t seed = 0;
  std::uint64_t stream_index = 0;
  int K = 0;
  Eigen::MatrixXd xi;  // ξ_k, indexed (k1, k2)

  static NoiseRealization zero(int K) { return {0, 0, K, Eigen::MatrixXd::Zero(K, K)}; }
};

inline NoiseRealization sample_noise(std::uint64_t seed, std::uint64_t stream_index, int K) {
  if (K < 1) throw std::invalid_argument("sample_noise: K must be >= 1");
  NoiseRealization n{seed, stream_index, K, Eigen::MatrixXd(K, K)};
  const std::uint64_t key = stream_key(seed, stream_index);
  for (int k2 = 0; k2 < K; ++k2) {
    for (int k1 = 0; k1 < K; ++k1) n.xi(k1, k2) = counter_normal(key, mode_counter(k1, k2));
  }
  return n;
}

/// ξ as a field on `grid`.
inline CoefField noise_field(const NoiseRealization& noise, const GridPtr& grid) {
  if (noise.K != grid->K) throw std::invalid_argument("noise cutoff does not match grid cutoff");
  return CoefField::from_real(grid, noise.xi);
}

inline Eigen::MatrixXd inverse_eigenvalues(int K, double power) {
  Eigen::MatrixXd m(K, K);
  for (int k2 = 0; k2 < K; ++k2) {
    for (int k1 = 0; k1 < K; ++k1) m(k1, k2) = std::pow(lambda_sq(k1, k2), -power);
  }
  return m;
}

/// Y = (-H)^{-1} ξ, i.e. Y_k = ξ_k / λ_k².
inline CoefField compute_Y(const NoiseRealization& noise, const GridPtr& grid) {
  if (noise.K != grid->K) throw std::invalid_argument("compute_Y: noise cutoff does not match grid cutoff");
  return CoefField::from_real(grid, noise.xi.cwiseProduct(inverse_eigenvalues(noise.K, 1.0)));
}

/// Largest truncation level resolved by the cutoff K.
inline constexpr int max_level(int K) { return K - 1; }

inline void require_resolved(int N, int K) {
  if (N < 0) throw std::invalid_argument("truncation level must be nonnegative");
  if (N > max_level(K)) {
    throw ResolutionError("truncation level N=" + std::to_string(N) + " is not resolved by cutoff K=" +
                          std::to_string(K) + " (need N <= K-1)");
  }
}

/// Y_N = S_N Y.
inline CoefField compute_YN(const CoefField& Y, int N) {
  require_resolved(N, Y.K());
  return smooth_truncate(Y, N);
}

// ---------------------------------------------------------------------------
// Counterterm

namespace detail {

inline Eigen::MatrixXd counterterm_values(const SpectralGrid& g, int N) {
  // C_N²(x, y) = Σ_k χ_{k,N}² λ_k⁻⁴ (ψ'_{k1}(x)² ψ_{k2}(y)² + ψ_{k1}(x)² ψ'_{k2}(y)²)
  const int K = g.K;
  Eigen::MatrixXd w = truncation_weights(K, N).cwiseAbs2().cwiseProduct(inverse_eigenvalues(K, 2.0));
  const Eigen::MatrixXd p2 = g.basis.cwiseAbs2();
  const Eigen::MatrixXd d2 = g.dbasis.cwiseAbs2();
  return d2.transpose() * w * p2 + p2.transpose() * w * d2;
}

class CountertermCache {
 public:
  static CountertermCache& instance() {
    static CountertermCache cache;
    return cache;
  }

  std::shared_ptr<const Eigen::MatrixXd> get(const SpectralGrid& g, int N) {
    const auto key = std::make_tuple(N, g.K, g.Mq);
    std::shared_ptr<Entry> entry;
    {
      std::lock_guard lock(mutex_);
      auto& slot = table_[key];
      if (!slot) slot = std::make_shared<Entry>();
      entry = slot;
    }
    std::call_once(entry->once, [&] { entry->values = std::make_shared<const Eigen::MatrixXd>(counterterm_values(g, N)); });
    return entry->values;
  }

 private:
  struct Entry {
    std::once_flag once;
    std::shared_ptr<const Eigen::MatrixXd> values;
  };
  std::mutex mutex_;
  std::map<std::tuple<int, int, int>, std::shared_ptr<Entry>> table_;
};

}  // namespace detail

/// C_N² at the nodes. Deterministic; shared across realizations.
inline RealGridField compute_counterterm(int N, const GridPtr& grid) {
  require_resolved(N, grid->K);
  return RealGridField(grid, *detail::CountertermCache::instance().get(*grid, N));
}

struct WickField {
  int N = 0;
  RealGridField grad1;        // ∂₁Y_N
  RealGridField grad2;        // ∂₂Y_N
  RealGridField counterterm;  // C_N²
  RealGridField wick;         // |∇Y_N|² - C_N²

  /// |∇Y_N|² without renormalization.
  RealGridField raw_square() const {
    return RealGridField(grad1.grid, grad1.values.cwiseAbs2() + grad2.values.cwiseAbs2());
  }
};

/// Wick-renormalized |∇Y_N|² from an already computed Y.
inline WickField compute_wick(const CoefField& Y, int N) {
  const CoefField YN = compute_YN(Y, N);
  const auto& g = Y.spectral_grid();
  const Eigen::MatrixXd c = YN.coef().real();
  WickField w;
  w.N = N;
  w.grad1 = RealGridField(Y.grid(), derivative_values(g, c, 0));
  w.grad2 = RealGridField(Y.grid(), derivative_values(g, c, 1));
  w.counterterm = compute_counterterm(N, Y.grid());
  w.wick = RealGridField(Y.grid(), w.grad1.values.cwiseAbs2() + w.grad2.values.cwiseAbs2() - w.counterterm.values);
  return w;
}

inline WickField compute_wick(const NoiseRealization& noise, int N, const GridPtr& grid) {
  return compute_wick(compute_Y(noise, grid), N);
}

struct ExpWeight {
  RealGridField values;  // e^{a Y_N} at the nodes
  double max = 0.0;      // |e^{a Y_N}|_{L^∞(grid)}
  double min = 0.0;
};

inline constexpr double kExpGuard = 700.0;

/// e^{a Y} from node values of Y. Fails loudly when a·max|Y| exceeds the
/// overflow guard.
inline ExpWeight exp_weight(const RealGridField& Y_nodes, double a) {
  const double reach = std::abs(a) * Y_nodes.max_abs();
  if (reach > kExpGuard) {
    throw OverflowError("exp_weight: a*max|Y_N| = " + std::to_string(reach) + " exceeds the overflow guard");
  }
  ExpWeight e;
  e.values = RealGridField(Y_nodes.grid, (a * Y_nodes.values).array().exp().matrix());
  e.max = e.values.values.maxCoeff();
  e.min = e.values.values.minCoeff();
  return e;
}

inline ExpWeight exp_weight(const CoefField& YN, double a) { return exp_weight(synthesize_real(YN), a); }

}  // namespace hgp
