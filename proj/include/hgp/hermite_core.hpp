#pragma once

// Two-dimensional Hermite eigenbasis of -H = -Δ + |x|², Gauss–Hermite
// quadrature on the tensor grid, and the coefficient-space operators built
// on top of it.
//
// Conventions:
//   h_k(x, y) = ψ_{k1}(x) ψ_{k2}(y),   -H h_k = λ_k² h_k,   λ_k² = 2|k| + 2.
//   Coefficients live on the square {0..K-1}², grid values on the Mq×Mq
//   tensor node set. The first matrix index is always the x₁ direction.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace hgp {

using cplx = std::complex<double>;

class ResolutionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class OverflowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MultiIndex {
  int k1 = 0;
  int k2 = 0;

  constexpr int order() const { return k1 + k2; }
  constexpr double eigenvalue() const { return 2.0 * (k1 + k2) + 2.0; }
  friend constexpr bool operator==(const MultiIndex&, const MultiIndex&) = default;
};

/// λ_k² for the mode k.
constexpr double lambda_sq(int k1, int k2) { return 2.0 * (k1 + k2) + 2.0; }
/// λ_N² = λ_{(N,0)}², the truncation scale of level N.
constexpr double lambda_level_sq(int N) { return 2.0 * N + 2.0; }
inline double lambda_level(int N) { return std::sqrt(lambda_level_sq(N)); }

namespace detail {

inline constexpr double kRescale = 1e150;
inline const double kLogRescale = std::log(kRescale);

// ψ_0..ψ_{count-1}(x) by the normalized three-term recurrence. The Gaussian
// factor is kept out of the recurrence and tracked as a log scale, so values
// are accurate wherever they are representable and flush to zero otherwise.
inline void hermite_sequence(int count, double x, double* out) {
  if (count <= 0) return;
  const double log_gauss = -0.5 * x * x - 0.25 * std::log(std::numbers::pi);
  double prev = 0.0;
  double curr = 1.0;
  double log_scale = 0.0;
  out[0] = std::exp(log_gauss);
  for (int n = 0; n + 1 < count; ++n) {
    const double next = x * std::sqrt(2.0 / (n + 1)) * curr - std::sqrt(double(n) / (n + 1)) * prev;
    prev = curr;
    curr = next;
    if (std::abs(curr) > kRescale) {
      curr /= kRescale;
      prev /= kRescale;
      log_scale += kLogRescale;
    }
    const double lg = log_gauss + log_scale;
    if (lg > -700.0) {
      out[n + 1] = curr * std::exp(lg);
    } else {
      out[n + 1] = curr == 0.0 ? 0.0 : std::copysign(std::exp(std::log(std::abs(curr)) + lg), curr);
    }
  }
}

}  // namespace detail

/// L²-normalized Hermite function ψ_n(x), eigenfunction of -d²/dx² + x².
inline double hermite_1d(int n, double x) {
  if (n < 0) throw std::invalid_argument("hermite_1d: n must be nonnegative");
  std::vector<double> seq(static_cast<std::size_t>(n) + 1);
  detail::hermite_sequence(n + 1, x, seq.data());
  return seq.back();
}

/// Quadrature grid and tabulated basis for one truncation square.
///
/// `weights` are the modified weights w̃ᵢ = wᵢ e^{xᵢ²}, so that
/// ∫ f dx ≈ Σ w̃ᵢ f(xᵢ) for Gaussian-decaying f. They are obtained from the
/// Christoffel identity w̃ᵢ = 1 / Σ_{n<Mq} ψ_n(xᵢ)², which avoids the
/// underflowing eigenvector components of the Jacobi matrix.
struct SpectralGrid {
  int K = 0;
  int Mq = 0;
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
  Eigen::VectorXd log_weights;
  Eigen::MatrixXd basis;     // K×Mq, ψ_n(x_i)
  Eigen::MatrixXd dbasis;    // K×Mq, ψ_n'(x_i)
  Eigen::MatrixXd analysis;  // K×Mq, w̃_i ψ_n(x_i)
};

using GridPtr = std::shared_ptr<const SpectralGrid>;

inline GridPtr build_grid(int K, int Mq) {
  if (K < 1) throw std::invalid_argument("build_grid: K must be >= 1");
  if (Mq < 2 * K) {
    throw std::invalid_argument("build_grid: quadrature order Mq=" + std::to_string(Mq) +
                                " is below the dealiasing margin 2K=" + std::to_string(2 * K));
  }
  auto g = std::make_shared<SpectralGrid>();
  g->K = K;
  g->Mq = Mq;

  // Golub–Welsch: eigenvalues of the Jacobi matrix of the weight e^{-x²}.
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(Mq);
  Eigen::VectorXd sub(Mq - 1);
  for (int n = 1; n < Mq; ++n) sub(n - 1) = std::sqrt(0.5 * n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> jacobi;
  jacobi.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  Eigen::VectorXd x = jacobi.eigenvalues();

  // Newton polish on ψ_Mq(x) = 0, then enforce exact symmetry.
  std::vector<double> seq(static_cast<std::size_t>(Mq) + 1);
  for (int i = 0; i < Mq; ++i) {
    for (int it = 0; it < 3; ++it) {
      detail::hermite_sequence(Mq + 1, x(i), seq.data());
      const double f = seq[Mq];
      const double df = std::sqrt(2.0 * Mq) * seq[Mq - 1] - x(i) * f;
      if (df == 0.0) break;
      x(i) -= f / df;
    }
  }
  for (int i = 0; i < Mq / 2; ++i) {
    const double a = 0.5 * (x(Mq - 1 - i) - x(i));
    x(i) = -a;
    x(Mq - 1 - i) = a;
  }
  if (Mq % 2 == 1) x(Mq / 2) = 0.0;
  g->nodes = x;

  g->weights.resize(Mq);
  g->log_weights.resize(Mq);
  g->basis.resize(K, Mq);
  g->dbasis.resize(K, Mq);
  const int table = std::max(Mq, K + 1);
  seq.assign(static_cast<std::size_t>(table), 0.0);
  for (int i = 0; i < Mq; ++i) {
    detail::hermite_sequence(table, x(i), seq.data());
    double christoffel = 0.0;
    for (int n = 0; n < Mq; ++n) christoffel += seq[n] * seq[n];
    g->log_weights(i) = -std::log(christoffel);
    g->weights(i) = 1.0 / christoffel;
    for (int n = 0; n < K; ++n) {
      g->basis(n, i) = seq[n];
      const double lower = n > 0 ? std::sqrt(0.5 * n) * seq[n - 1] : 0.0;
      g->dbasis(n, i) = lower - std::sqrt(0.5 * (n + 1)) * seq[n + 1];
    }
  }
  g->analysis = g->basis * g->weights.asDiagonal();
  return g;
}

// ---------------------------------------------------------------------------
// Dense separable transforms on raw Eigen matrices. Templated on the scalar so
// that real fields (noise, potentials) skip complex arithmetic; complex inputs
// are split into real and imaginary parts against the real basis tables.

namespace detail {

template <typename Scalar>
inline constexpr bool is_complex_v = !std::is_same_v<Scalar, double>;

// left · M · right, with real left/right and M real or complex.
template <typename Derived>
auto sandwich(const Eigen::MatrixXd& left, const Eigen::MatrixBase<Derived>& m, const Eigen::MatrixXd& right) {
  using Scalar = typename Derived::Scalar;
  if constexpr (is_complex_v<Scalar>) {
    const Eigen::MatrixXd re = left * m.real() * right;
    const Eigen::MatrixXd im = left * m.imag() * right;
    Eigen::MatrixXcd out(re.rows(), re.cols());
    out.real() = re;
    out.imag() = im;
    return out;
  } else {
    return Eigen::MatrixXd(left * m * right);
  }
}

}  // namespace detail

template <typename Derived>
auto synthesize_values(const SpectralGrid& g, const Eigen::MatrixBase<Derived>& coef) {
  return detail::sandwich(g.basis.transpose(), coef, g.basis);
}

template <typename Derived>
auto analyze_values(const SpectralGrid& g, const Eigen::MatrixBase<Derived>& values) {
  return detail::sandwich(g.analysis, values, g.analysis.transpose());
}

/// Exact partial derivative of the truncated expansion at the nodes; uses the
/// tabulated ψ' so no mode is lost at the cutoff.
template <typename Derived>
auto derivative_values(const SpectralGrid& g, const Eigen::MatrixBase<Derived>& coef, int axis) {
  if (axis == 0) return detail::sandwich(g.dbasis.transpose(), coef, g.basis);
  return detail::sandwich(g.basis.transpose(), coef, g.dbasis);
}

/// Σᵢⱼ w̃ᵢ w̃ⱼ f(xᵢ, xⱼ).
template <typename Derived>
auto integrate_values(const SpectralGrid& g, const Eigen::MatrixBase<Derived>& values) {
  using Scalar = typename Derived::Scalar;
  if constexpr (detail::is_complex_v<Scalar>) {
    return cplx((g.weights.transpose() * values.real() * g.weights).value(),
                (g.weights.transpose() * values.imag() * g.weights).value());
  } else {
    return (g.weights.transpose() * values * g.weights).value();
  }
}

// ---------------------------------------------------------------------------

/// Complex field given by its Hermite coefficients on the K×K square.
class CoefField {
 public:
  CoefField() = default;
  explicit CoefField(GridPtr grid, bool real = false)
      : grid_(std::move(grid)), coef_(Eigen::MatrixXcd::Zero(grid_->K, grid_->K)), real_(real) {}
  CoefField(GridPtr grid, Eigen::MatrixXcd coef, bool real = false)
      : grid_(std::move(grid)), coef_(std::move(coef)), real_(real) {
    if (coef_.rows() != grid_->K || coef_.cols() != grid_->K) {
      throw std::invalid_argument("CoefField: coefficient matrix does not match the grid cutoff");
    }
    if (real_) coef_ = coef_.real().cast<cplx>();
  }

  static CoefField delta(GridPtr grid, MultiIndex k, cplx value = 1.0) {
    CoefField c(std::move(grid), value.imag() == 0.0);
    c.coef_(k.k1, k.k2) = value;
    return c;
  }

  static CoefField from_real(GridPtr grid, const Eigen::MatrixXd& coef) {
    return CoefField(std::move(grid), coef.cast<cplx>(), true);
  }

  const GridPtr& grid() const { return grid_; }
  const SpectralGrid& spectral_grid() const { return *grid_; }
  int K() const { return grid_->K; }
  const Eigen::MatrixXcd& coef() const { return coef_; }
  Eigen::MatrixXcd& coef() { return coef_; }
  cplx operator()(int k1, int k2) const { return coef_(k1, k2); }
  cplx& operator()(int k1, int k2) { return coef_(k1, k2); }
  bool is_real() const { return real_; }
  void set_real(bool real) { real_ = real; }

  /// Σ |c_k|², the exact L² norm squared of the truncated expansion.
  double l2_norm_sq() const { return coef_.squaredNorm(); }
  double l2_norm() const { return coef_.norm(); }

  CoefField& operator+=(const CoefField& o) {
    coef_ += o.coef_;
    real_ = real_ && o.real_;
    return *this;
  }
  CoefField& operator-=(const CoefField& o) {
    coef_ -= o.coef_;
    real_ = real_ && o.real_;
    return *this;
  }
  CoefField& operator*=(cplx a) {
    coef_ *= a;
    real_ = real_ && a.imag() == 0.0;
    return *this;
  }
  friend CoefField operator+(CoefField a, const CoefField& b) { return a += b; }
  friend CoefField operator-(CoefField a, const CoefField& b) { return a -= b; }
  friend CoefField operator*(cplx s, CoefField a) { return a *= s; }
  friend CoefField operator*(CoefField a, cplx s) { return a *= s; }

 private:
  GridPtr grid_;
  Eigen::MatrixXcd coef_;
  bool real_ = false;
};

/// Field sampled on the tensor node grid.
template <typename Scalar>
struct BasicGridField {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  GridPtr grid;
  Matrix values;

  BasicGridField() = default;
  explicit BasicGridField(GridPtr g) : grid(std::move(g)), values(Matrix::Zero(grid->Mq, grid->Mq)) {}
  BasicGridField(GridPtr g, Matrix v) : grid(std::move(g)), values(std::move(v)) {}

  double max_abs() const { return values.cwiseAbs().maxCoeff(); }
  /// Quadrature L² norm.
  double l2_norm() const {
    return std::sqrt(integrate_values(*grid, values.cwiseAbs2().eval()));
  }
};

using GridField = BasicGridField<cplx>;
using RealGridField = BasicGridField<double>;

inline CoefField analyze(const GridField& g) {
  return CoefField(g.grid, analyze_values(*g.grid, g.values));
}

inline CoefField analyze(const RealGridField& g) {
  return CoefField::from_real(g.grid, analyze_values(*g.grid, g.values));
}

inline GridField synthesize(const CoefField& c) {
  return GridField(c.grid(), synthesize_values(c.spectral_grid(), c.coef()));
}

/// Real part of the synthesized field; exact when c.is_real().
inline RealGridField synthesize_real(const CoefField& c) {
  return RealGridField(c.grid(), synthesize_values(c.spectral_grid(), c.coef().real().eval()));
}

/// Diagonal action (m·c)_k = m(k) c_k. `m` is called as m(k1, k2).
template <typename Multiplier>
CoefField apply_spectral_multiplier(const CoefField& c, Multiplier&& m) {
  CoefField out = c;
  bool stays_real = c.is_real();
  const int K = c.K();
  for (int k2 = 0; k2 < K; ++k2) {
    for (int k1 = 0; k1 < K; ++k1) {
      const auto f = m(k1, k2);
      if constexpr (std::is_convertible_v<decltype(f), double>) {
        out(k1, k2) *= static_cast<double>(f);
      } else {
        const cplx z(f);
        if (z.imag() != 0.0) stays_real = false;
        out(k1, k2) *= z;
      }
    }
  }
  out.set_real(stays_real);
  return out;
}

/// (-H)^α on coefficients: multiplies by λ_k^{2α}.
inline CoefField apply_minus_H_power(const CoefField& c, double alpha) {
  if (alpha == 0.0) return c;
  return apply_spectral_multiplier(c, [alpha](int k1, int k2) { return std::pow(lambda_sq(k1, k2), alpha); });
}

/// A_i = ∂_i + x_i (lower) and A_{-i} = -∂_i + x_i (raise).
enum class Ladder { lower_x = 1, raise_x = -1, lower_y = 2, raise_y = -2 };

/// Coefficient-space ladder action. Modes pushed past the cutoff K are
/// dropped, so the result is exact only away from the top shell k_i = K-1.
inline CoefField ladder(const CoefField& c, Ladder dir) {
  const int K = c.K();
  CoefField out(c.grid(), c.is_real());
  auto& dst = out.coef();
  const auto& src = c.coef();
  switch (dir) {
    case Ladder::lower_x:
      for (int k1 = 0; k1 + 1 < K; ++k1) dst.row(k1) = std::sqrt(2.0 * (k1 + 1)) * src.row(k1 + 1);
      break;
    case Ladder::raise_x:
      for (int k1 = 1; k1 < K; ++k1) dst.row(k1) = std::sqrt(2.0 * k1) * src.row(k1 - 1);
      break;
    case Ladder::lower_y:
      for (int k2 = 0; k2 + 1 < K; ++k2) dst.col(k2) = std::sqrt(2.0 * (k2 + 1)) * src.col(k2 + 1);
      break;
    case Ladder::raise_y:
      for (int k2 = 1; k2 < K; ++k2) dst.col(k2) = std::sqrt(2.0 * k2) * src.col(k2 - 1);
      break;
  }
  return out;
}

enum class SpatialOp { d1, d2, x1, x2 };

/// ∂_i = (A_i - A_{-i})/2 and x_i· = (A_i + A_{-i})/2 in coefficient space.
inline CoefField derivative_and_position(const CoefField& c, SpatialOp op) {
  const bool x_axis = op == SpatialOp::d1 || op == SpatialOp::x1;
  const CoefField lo = ladder(c, x_axis ? Ladder::lower_x : Ladder::lower_y);
  const CoefField hi = ladder(c, x_axis ? Ladder::raise_x : Ladder::raise_y);
  const bool derivative = op == SpatialOp::d1 || op == SpatialOp::d2;
  CoefField out = derivative ? lo - hi : lo + hi;
  out *= 0.5;
  return out;
}

/// ∂₁c and ∂₂c evaluated at the nodes without truncation loss.
inline std::pair<GridField, GridField> gradient_on_grid(const CoefField& c) {
  const auto& g = c.spectral_grid();
  return {GridField(c.grid(), derivative_values(g, c.coef(), 0)),
          GridField(c.grid(), derivative_values(g, c.coef(), 1))};
}

/// x₁·f and x₂·f on the nodes.
template <typename Scalar>
std::pair<BasicGridField<Scalar>, BasicGridField<Scalar>> position_times(const BasicGridField<Scalar>& f) {
  const auto& x = f.grid->nodes;
  using M = typename BasicGridField<Scalar>::Matrix;
  M a = x.template cast<Scalar>().asDiagonal() * f.values;
  M b = f.values * x.template cast<Scalar>().asDiagonal();
  return {BasicGridField<Scalar>(f.grid, std::move(a)), BasicGridField<Scalar>(f.grid, std::move(b))};
}

/// Quadrature L² inner product ∫ a conj(b).
inline cplx grid_inner(const GridField& a, const GridField& b) {
  return integrate_values(*a.grid, a.values.cwiseProduct(b.values.conjugate()).eval());
}

}  // namespace hgp
