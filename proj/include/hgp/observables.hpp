#pragma once

// Conserved functionals of the regularized transformed flow, Σ and W^{σ,2}
// norms, inequality audits, and the smallness event of the focusing case.

#include <hgp/function_spaces.hpp>
#include <hgp/hermite_core.hpp>
#include <hgp/noise_renorm.hpp>

#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace hgp {

/// Locale-independent shortest round-trip formatting.
inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

/// Node-wise data shared by every observable evaluated against one Y_N.
struct WeightContext {
  GridPtr grid;
  RealGridField Y;       // Y_N at the nodes
  RealGridField dY1;     // ∂₁Y_N
  RealGridField dY2;     // ∂₂Y_N
  RealGridField e2Y;     // e^{2Y_N}
  RealGridField e4Y;     // e^{4Y_N}
  RealGridField wick;    // :|∇Y_N|²: (or whatever renormalized square the flow uses)

  static WeightContext make(const CoefField& YN, const RealGridField& wick_values) {
    WeightContext c;
    c.grid = YN.grid();
    const Eigen::MatrixXd coef = YN.coef().real();
    c.Y = RealGridField(c.grid, synthesize_values(*c.grid, coef));
    c.dY1 = RealGridField(c.grid, derivative_values(*c.grid, coef, 0));
    c.dY2 = RealGridField(c.grid, derivative_values(*c.grid, coef, 1));
    c.e2Y = exp_weight(c.Y, 2.0).values;
    c.e4Y = exp_weight(c.Y, 4.0).values;
    c.wick = wick_values;
    return c;
  }
  static WeightContext make(const CoefField& YN, const WickField& w) { return make(YN, w.wick); }
};

/// A field known through its node values and exact node gradient.
struct NodeField {
  Eigen::MatrixXcd value;
  Eigen::MatrixXcd d1;
  Eigen::MatrixXcd d2;

  static NodeField from(const CoefField& c) {
    const auto& g = c.spectral_grid();
    return {synthesize_values(g, c.coef()), derivative_values(g, c.coef(), 0), derivative_values(g, c.coef(), 1)};
  }
};

/// M̃_N(v) = ∫ |v|² e^{2Y_N}.
inline double transformed_mass(const NodeField& v, const WeightContext& ctx) {
  return integrate_values(*ctx.grid, v.value.cwiseAbs2().cwiseProduct(ctx.e2Y.values).eval());
}

inline double transformed_mass(const CoefField& v, const WeightContext& ctx) {
  const Eigen::MatrixXcd vg = synthesize_values(*ctx.grid, v.coef());
  return integrate_values(*ctx.grid, vg.cwiseAbs2().cwiseProduct(ctx.e2Y.values).eval());
}

inline double transformed_mass(const CoefField& v, const CoefField& YN) {
  const Eigen::MatrixXcd vg = synthesize_values(v.spectral_grid(), v.coef());
  const auto e2Y = exp_weight(YN, 2.0);
  return integrate_values(v.spectral_grid(), vg.cwiseAbs2().cwiseProduct(e2Y.values.values).eval());
}

/// The addends of Ẽ_N(v):
///   ½∫|∇v|²e^{2Y} + ½∫|xv|²e^{2Y} − ½∫|xv|²Y e^{2Y} − ½∫:|∇Y|²:|v|²e^{2Y} − λ/4∫|v|⁴e^{4Y}.
struct EnergyParts {
  double gradient = 0.0;
  double position = 0.0;
  double potential_Y = 0.0;
  double wick = 0.0;
  double quartic = 0.0;

  double kinetic() const { return gradient + position; }
  double total() const { return gradient + position + potential_Y + wick + quartic; }
};

inline EnergyParts transformed_energy_parts(const NodeField& v, const WeightContext& ctx, double lambda) {
  const auto& g = *ctx.grid;
  const Eigen::MatrixXd v2 = v.value.cwiseAbs2();
  const Eigen::VectorXd x2 = g.nodes.cwiseAbs2();
  const Eigen::MatrixXd r2 = x2.replicate(1, g.Mq) + x2.transpose().replicate(g.Mq, 1);
  const Eigen::MatrixXd xv2 = r2.cwiseProduct(v2);
  const auto& e2 = ctx.e2Y.values;

  EnergyParts e;
  e.gradient = 0.5 * integrate_values(g, (v.d1.cwiseAbs2() + v.d2.cwiseAbs2()).cwiseProduct(e2).eval());
  e.position = 0.5 * integrate_values(g, xv2.cwiseProduct(e2).eval());
  e.potential_Y = -0.5 * integrate_values(g, xv2.cwiseProduct(ctx.Y.values).cwiseProduct(e2).eval());
  e.wick = -0.5 * integrate_values(g, ctx.wick.values.cwiseProduct(v2).cwiseProduct(e2).eval());
  e.quartic = -0.25 * lambda * integrate_values(g, v2.cwiseAbs2().cwiseProduct(ctx.e4Y.values).eval());
  return e;
}

inline EnergyParts transformed_energy_parts(const CoefField& v, const WeightContext& ctx, double lambda) {
  return transformed_energy_parts(NodeField::from(v), ctx, lambda);
}

inline EnergyParts transformed_energy_parts(const CoefField& v, const CoefField& YN, const WickField& wick,
                                            double lambda) {
  return transformed_energy_parts(v, WeightContext::make(YN, wick), lambda);
}

inline double transformed_energy(const CoefField& v, const CoefField& YN, const WickField& wick, double lambda) {
  return transformed_energy_parts(v, YN, wick, lambda).total();
}

/// |v|_Σ = |v|_{W^{1,2}}.
inline double sigma_norm(const CoefField& v) { return sobolev_norm(v, 1.0); }

struct GagliardoNirenbergReport {
  double l4_pow4 = 0.0;  // |u|⁴_{L⁴}
  double rhs = 0.0;      // ½ |u|²_{L²} |∇u|²_{L²}
  double ratio = 0.0;
  bool vacuous = false;
  bool pass() const { return vacuous || ratio <= 1.0 + 1e-8; }
};

/// |u|⁴_{L⁴} ≤ ½ |u|²_{L²} |∇u|²_{L²}, both sides by quadrature.
inline GagliardoNirenbergReport check_gagliardo_nirenberg(const CoefField& v) {
  const auto& g = v.spectral_grid();
  GagliardoNirenbergReport r;
  const Eigen::MatrixXd v2 = synthesize_values(g, v.coef()).cwiseAbs2();
  const Eigen::MatrixXcd d1 = derivative_values(g, v.coef(), 0);
  const Eigen::MatrixXcd d2 = derivative_values(g, v.coef(), 1);
  r.l4_pow4 = integrate_values(g, v2.cwiseAbs2().eval());
  const double grad = integrate_values(g, (d1.cwiseAbs2() + d2.cwiseAbs2()).eval());
  r.rhs = 0.5 * integrate_values(g, v2) * grad;
  if (r.rhs == 0.0) {
    r.vacuous = true;
    return r;
  }
  r.ratio = r.l4_pow4 / r.rhs;
  return r;
}

struct BrezisGallouetReport {
  double linf = 0.0;
  double sigma = 0.0;   // |v|_Σ
  double w_sigma = 0.0; // |v|_{W^{σ,2}}
  /// Ĉ = |v|_{L^∞} / (1 + |v|_Σ √(1 + ln(1 + |v|_{W^{σ,2}})))
  double constant = 0.0;
};

inline BrezisGallouetReport check_brezis_gallouet(const CoefField& v, double sigma) {
  if (!(sigma > 1.0)) throw std::invalid_argument("check_brezis_gallouet: sigma must exceed 1");
  BrezisGallouetReport r;
  const auto& g = v.spectral_grid();
  r.linf = synthesize_values(g, v.coef()).cwiseAbs().maxCoeff();
  r.sigma = sigma_norm(v);
  r.w_sigma = sobolev_norm(v, sigma);
  r.constant = r.linf / (1.0 + r.sigma * std::sqrt(1.0 + std::log1p(r.w_sigma)));
  return r;
}

struct FocusingReport {
  bool pass = false;
  /// λ L² |e^{-2Y}|²_∞ |e^{2Y}|_∞ |e^{4Y}|_∞
  double value = std::numeric_limits<double>::infinity();
  double margin = -std::numeric_limits<double>::infinity();  // 4 - value
  std::string diagnostic;
};

/// Smallness event of the focusing case, evaluated on the node grid.
inline FocusingReport focusing_event_predicate(const CoefField& Y_proxy, double lambda, double L) {
  if (!(lambda > 0.0) || !(L > 0.0)) throw std::invalid_argument("focusing_event_predicate: lambda and L must be positive");
  FocusingReport r;
  const RealGridField Y = synthesize_real(Y_proxy);
  // exponent of the product: 4 max(-Y) + 2 max Y + 4 max Y
  const double top = Y.values.maxCoeff();
  const double bottom = Y.values.minCoeff();
  const double log_value = std::log(lambda) + 2.0 * std::log(L) + 4.0 * (-bottom) + 6.0 * top;
  if (4.0 * std::abs(bottom) > kExpGuard || 4.0 * std::abs(top) > kExpGuard || log_value > kExpGuard) {
    r.diagnostic = "exponential weight overflow";
    return r;
  }
  r.value = lambda * L * L * std::pow(std::exp(-2.0 * bottom), 2) * std::exp(2.0 * top) * std::exp(4.0 * top);
  r.margin = 4.0 - r.value;
  r.pass = r.value < 4.0;
  return r;
}

/// Observables recorded along one trajectory, in the v-representation.
struct ObservableSeries {
  std::vector<double> times;
  std::vector<double> mass;
  std::vector<double> energy;
  std::vector<double> energy_kinetic;
  std::vector<double> energy_potY;
  std::vector<double> energy_wick;
  std::vector<double> energy_quartic;
  std::vector<double> l2;
  std::vector<double> sigma;
  std::vector<std::pair<double, std::vector<double>>> w_sigma;

  std::size_t size() const { return times.size(); }

  /// `nodes` carries v at the nodes for the integral functionals, `v` its
  /// coefficients for the spectral norms.
  void record(double t, const NodeField& nodes, const CoefField& v, const WeightContext& ctx, double lambda) {
    const EnergyParts e = transformed_energy_parts(nodes, ctx, lambda);
    times.push_back(t);
    mass.push_back(transformed_mass(nodes, ctx));
    energy.push_back(e.total());
    energy_kinetic.push_back(e.kinetic());
    energy_potY.push_back(e.potential_Y);
    energy_wick.push_back(e.wick);
    energy_quartic.push_back(e.quartic);
    l2.push_back(v.l2_norm());
    sigma.push_back(sigma_norm(v));
    for (auto& [s, values] : w_sigma) values.push_back(sobolev_norm(v, s));
  }

  void record(double t, const CoefField& v, const WeightContext& ctx, double lambda) {
    record(t, NodeField::from(v), v, ctx, lambda);
  }

  /// Largest |x(t) - x(0)| / |x(0)|.
  static double relative_drift(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    double worst = 0.0;
    for (double x : xs) worst = std::max(worst, std::abs(x - xs.front()));
    return xs.front() != 0.0 ? worst / std::abs(xs.front()) : worst;
  }
};

inline void write_csv(std::ostream& os, const ObservableSeries& s) {
  os << "t,mass,energy,energy_kinetic,energy_potY,energy_wick,energy_quartic,l2,sigma";
  for (const auto& [sig, values] : s.w_sigma) os << ",w_sigma_" << format_number(sig);
  os << '\n';
  for (std::size_t i = 0; i < s.size(); ++i) {
    os << format_number(s.times[i]) << ',' << format_number(s.mass[i]) << ',' << format_number(s.energy[i]) << ','
       << format_number(s.energy_kinetic[i]) << ',' << format_number(s.energy_potY[i]) << ','
       << format_number(s.energy_wick[i]) << ',' << format_number(s.energy_quartic[i]) << ','
       << format_number(s.l2[i]) << ',' << format_number(s.sigma[i]);
    for (const auto& [sig, values] : s.w_sigma) os << ',' << format_number(values[i]);
    os << '\n';
  }
}

}  // namespace hgp
