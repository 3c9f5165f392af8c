#pragma once

// Time integration of the regularized renormalized Gross–Pitaevskii flow.
//
// The transformed unknown v is mapped to u = v e^{Y_N}, which solves
//
//     i ∂_t u + H u + (ξ_N - C_N²) u + λ |u|² u = 0,
//
// an equation that splits into two exactly solvable flows: the Hermite phase
// c_k ↦ e^{-iλ_k²τ} c_k and the node-wise rotation u ↦ e^{iτ(V + λ|u|²)} u.
// Observables are always evaluated back in v.

#include <hgp/function_spaces.hpp>
#include <hgp/hermite_core.hpp>
#include <hgp/noise_renorm.hpp>
#include <hgp/observables.hpp>

#include <cmath>
#include <string>
#include <vector>

namespace hgp {

struct SimState {
  double t = 0.0;
  CoefField u;
  int N = 0;
  RealGridField potential;  // V_N = ξ_N - C_N²
  double lambda = 0.0;
};

struct IntegratorConfig {
  double dt = 1e-3;
  double t_final = 1.0;  // negative horizons integrate backwards
  int record_every = 10;
  std::vector<double> sigma_list;
  /// Σ-norm growth beyond this factor is reported as suspected blow-up.
  double blowup_factor = 1e6;
  /// Keep v at every record time (needed by Cauchy-in-N studies).
  bool keep_snapshots = false;
};

/// Pointwise product with node weights, projected back onto the basis.
inline CoefField multiply_and_project(const CoefField& c, const RealGridField& weight) {
  const auto& g = c.spectral_grid();
  Eigen::MatrixXcd vals = synthesize_values(g, c.coef());
  vals.array() *= weight.values.array();
  return CoefField(c.grid(), analyze_values(g, vals), c.is_real());
}

/// u = v e^{Y_N}.
inline CoefField u_from_v(const CoefField& v, const CoefField& YN) {
  return multiply_and_project(v, exp_weight(YN, 1.0).values);
}

/// v = u e^{-Y_N}.
inline CoefField v_from_u(const CoefField& u, const CoefField& YN) {
  return multiply_and_project(u, exp_weight(YN, -1.0).values);
}

/// Exact flow of i∂_t u + Hu = 0 over time tau.
inline CoefField linear_flow(const CoefField& u, double tau) {
  if (tau == 0.0) return u;
  return apply_spectral_multiplier(u, [tau](int k1, int k2) { return std::polar(1.0, -lambda_sq(k1, k2) * tau); });
}

namespace detail {

inline Eigen::MatrixXcd phase_table(int K, double tau) {
  Eigen::MatrixXcd p(K, K);
  for (int k2 = 0; k2 < K; ++k2) {
    for (int k1 = 0; k1 < K; ++k1) p(k1, k2) = std::polar(1.0, -lambda_sq(k1, k2) * tau);
  }
  return p;
}

inline void rotate_nodes(Eigen::MatrixXcd& vals, const Eigen::MatrixXd& V, double lambda, double tau) {
  for (Eigen::Index j = 0; j < vals.cols(); ++j) {
    for (Eigen::Index i = 0; i < vals.rows(); ++i) {
      const cplx z = vals(i, j);
      const double phase = tau * (V(i, j) + lambda * std::norm(z));
      vals(i, j) = z * std::polar(1.0, phase);
    }
  }
}

}  // namespace detail

/// Node-wise exact flow of i∂_t u = -(V + λ|u|²) u over time tau, then
/// re-analysis onto the basis.
inline CoefField potential_flow(const CoefField& u, const RealGridField& V, double lambda, double tau) {
  const auto& g = u.spectral_grid();
  Eigen::MatrixXcd vals = synthesize_values(g, u.coef());
  detail::rotate_nodes(vals, V.values, lambda, tau);
  return CoefField(u.grid(), analyze_values(g, vals));
}

/// `steps` Strang steps of size dt, with adjacent potential half-steps fused.
/// Differs from repeated strang_step only by the projection skipped between
/// the fused halves.
inline void strang_steps(SimState& s, double dt, int steps) {
  if (steps <= 0) return;
  const auto& g = s.u.spectral_grid();
  const Eigen::MatrixXcd phase = detail::phase_table(g.K, dt);
  Eigen::MatrixXcd coef = s.u.coef();
  for (int n = 0; n < steps; ++n) {
    Eigen::MatrixXcd vals = synthesize_values(g, coef);
    detail::rotate_nodes(vals, s.potential.values, s.lambda, n == 0 ? 0.5 * dt : dt);
    coef = analyze_values(g, vals).cwiseProduct(phase);
  }
  Eigen::MatrixXcd vals = synthesize_values(g, coef);
  detail::rotate_nodes(vals, s.potential.values, s.lambda, 0.5 * dt);
  s.u = CoefField(s.u.grid(), analyze_values(g, vals));
  s.t += steps * dt;
}

/// Half potential, full linear, half potential.
inline SimState strang_step(SimState state, double dt) {
  state.u = potential_flow(state.u, state.potential, state.lambda, 0.5 * dt);
  state.u = linear_flow(state.u, dt);
  state.u = potential_flow(state.u, state.potential, state.lambda, 0.5 * dt);
  state.t += dt;
  return state;
}

struct SimulationResult {
  ObservableSeries series;
  SimState final_state;
  std::vector<CoefField> snapshots;  // v at each record time, when requested
  bool blew_up = false;
  std::string diagnostic;
};

/// All level-dependent data of one (realization, N) pair.
class Simulator {
 public:
  /// `counterterm = false` drops C_N² from both the potential and the energy
  /// (no renormalization). With zero noise this is the deterministic flow.
  Simulator(const NoiseRealization& noise, int N, GridPtr grid, double lambda, bool counterterm = true)
      : N_(N), lambda_(lambda), counterterm_(counterterm) {
    require_resolved(N, grid->K);
    const CoefField Y = compute_Y(noise, grid);
    YN_ = compute_YN(Y, N);
    const CoefField xiN = smooth_truncate(noise_field(noise, grid), N);
    const WickField w = compute_wick(Y, N);
    potential_ = synthesize_real(xiN);
    if (counterterm_) potential_.values -= w.counterterm.values;
    ctx_ = WeightContext::make(YN_, counterterm_ ? w.wick : w.raw_square());
    to_u_ = exp_weight(ctx_.Y, 1.0).values;
    to_v_ = exp_weight(ctx_.Y, -1.0).values;
  }

  const CoefField& YN() const { return YN_; }
  const RealGridField& potential() const { return potential_; }
  const WeightContext& weights() const { return ctx_; }
  int N() const { return N_; }
  double lambda() const { return lambda_; }

  CoefField to_u(const CoefField& v) const { return multiply_and_project(v, to_u_); }
  CoefField to_v(const CoefField& u) const { return multiply_and_project(u, to_v_); }

  /// v = u e^{-Y_N} and ∇v = e^{-Y_N}(∇u - u∇Y_N) at the nodes, with no
  /// re-projection onto the basis.
  NodeField v_nodes(const CoefField& u) const {
    NodeField n = NodeField::from(u);
    n.d1 = (n.d1 - n.value.cwiseProduct(ctx_.dY1.values.cast<cplx>())).cwiseProduct(to_v_.values.cast<cplx>());
    n.d2 = (n.d2 - n.value.cwiseProduct(ctx_.dY2.values.cast<cplx>())).cwiseProduct(to_v_.values.cast<cplx>());
    n.value = n.value.cwiseProduct(to_v_.values.cast<cplx>());
    return n;
  }

  SimState initial_state(const CoefField& v0) const { return state_from_u(to_u(v0), 0.0); }

  SimState state_from_u(CoefField u, double t) const {
    SimState s;
    s.t = t;
    s.u = std::move(u);
    s.N = N_;
    s.potential = potential_;
    s.lambda = lambda_;
    return s;
  }

  SimulationResult run(const CoefField& v0, const IntegratorConfig& cfg) const { return run_from(initial_state(v0), cfg); }

  /// Integrates from `start` over cfg.t_final (relative to start.t).
  SimulationResult run_from(SimState start, const IntegratorConfig& cfg) const {
    if (!(cfg.dt > 0.0)) throw std::invalid_argument("IntegratorConfig: dt must be positive");
    if (cfg.record_every < 1) throw std::invalid_argument("IntegratorConfig: record_every must be >= 1");
    SimulationResult res;
    for (double s : cfg.sigma_list) res.series.w_sigma.emplace_back(s, std::vector<double>{});
    const long total = std::lround(std::abs(cfg.t_final) / cfg.dt);
    const double step = cfg.t_final < 0.0 ? -cfg.dt : cfg.dt;
    const double t0 = start.t;
    SimState s = std::move(start);

    double sigma0 = 0.0;
    const auto observe = [&](const SimState& st) {
      const CoefField v = to_v(st.u);
      res.series.record(st.t, v_nodes(st.u), v, ctx_, lambda_);
      if (cfg.keep_snapshots) res.snapshots.push_back(v);
      return res.series.sigma.back();
    };
    sigma0 = observe(s);

    long done = 0;
    while (done < total) {
      const int chunk = static_cast<int>(std::min<long>(cfg.record_every, total - done));
      strang_steps(s, step, chunk);
      done += chunk;
      s.t = t0 + static_cast<double>(done) * step;
      if (!s.u.coef().allFinite()) {
        res.blew_up = true;
        res.diagnostic = "non-finite state at t=" + format_number(s.t);
        break;
      }
      const double sig = observe(s);
      if (!std::isfinite(sig) || sig > cfg.blowup_factor * std::max(sigma0, 1e-300)) {
        res.blew_up = true;
        res.diagnostic = "sigma norm grew past the blow-up threshold at t=" + format_number(s.t);
        break;
      }
    }
    res.final_state = std::move(s);
    return res;
  }

 private:
  int N_;
  double lambda_;
  bool counterterm_;
  CoefField YN_;
  RealGridField potential_;
  WeightContext ctx_;
  RealGridField to_u_;
  RealGridField to_v_;
};

/// Builds V_N, maps v0 to u, integrates, and records observables in v.
/// Overflow of the exponential weights is reported as suspected blow-up.
inline SimulationResult run_simulation(const NoiseRealization& noise, int N, const CoefField& v0,
                                       const IntegratorConfig& cfg, double lambda, bool counterterm = true) {
  try {
    const Simulator sim(noise, N, v0.grid(), lambda, counterterm);
    return sim.run(v0, cfg);
  } catch (const OverflowError& e) {
    SimulationResult res;
    res.blew_up = true;
    res.diagnostic = e.what();
    return res;
  }
}

}  // namespace hgp
