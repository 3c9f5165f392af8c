#include <hgp/dynamics.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "test_fields.hpp"

namespace hgp {
namespace {

using testing_fields::random_field;

CoefField default_v0(const GridPtr& g) {
  CoefField v = CoefField::delta(g, {0, 0});
  v(1, 1) = 0.3;
  return v * cplx(1.0 / v.l2_norm());
}

NoiseRealization scaled_noise(std::uint64_t seed, std::uint64_t stream, int K, double amp) {
  NoiseRealization n = sample_noise(seed, stream, K);
  n.xi *= amp;
  return n;
}

// Right-hand side of the v-equation
//   i v_t + Hv + 2∇Y_N·∇v + |x|²Y_N v + :|∇Y_N|²: v + λ e^{2Y_N}|v|²v = 0
// evaluated pseudo-spectrally and projected on the basis.
Eigen::MatrixXcd v_equation_rhs(const SpectralGrid& g, const Eigen::MatrixXcd& c, const WeightContext& w,
                                double lambda) {
  const Eigen::MatrixXcd v = synthesize_values(g, c);
  const Eigen::MatrixXcd d1 = derivative_values(g, c, 0);
  const Eigen::MatrixXcd d2 = derivative_values(g, c, 1);
  Eigen::MatrixXd r2(g.Mq, g.Mq);
  for (int j = 0; j < g.Mq; ++j) {
    for (int i = 0; i < g.Mq; ++i) r2(i, j) = g.nodes(i) * g.nodes(i) + g.nodes(j) * g.nodes(j);
  }
  const Eigen::MatrixXcd nodes =
      2.0 * (d1.cwiseProduct(w.dY1.values.cast<cplx>()) + d2.cwiseProduct(w.dY2.values.cast<cplx>())) +
      v.cwiseProduct((r2.cwiseProduct(w.Y.values) + w.wick.values).cast<cplx>()) +
      lambda * v.cwiseProduct(v.cwiseAbs2().cwiseProduct(w.e2Y.values).cast<cplx>());
  Eigen::MatrixXcd out = analyze_values(g, nodes);
  for (int k2 = 0; k2 < g.K; ++k2) {
    for (int k1 = 0; k1 < g.K; ++k1) out(k1, k2) -= lambda_sq(k1, k2) * c(k1, k2);
  }
  return cplx(0.0, 1.0) * out;
}

Eigen::MatrixXcd rk4_v(const SpectralGrid& g, Eigen::MatrixXcd c, const WeightContext& w, double lambda, double T,
                       double h) {
  const int steps = static_cast<int>(std::lround(T / h));
  for (int s = 0; s < steps; ++s) {
    const Eigen::MatrixXcd k1 = v_equation_rhs(g, c, w, lambda);
    const Eigen::MatrixXcd k2 = v_equation_rhs(g, c + 0.5 * h * k1, w, lambda);
    const Eigen::MatrixXcd k3 = v_equation_rhs(g, c + 0.5 * h * k2, w, lambda);
    const Eigen::MatrixXcd k4 = v_equation_rhs(g, c + h * k3, w, lambda);
    c += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return c;
}

TEST(Transforms, FlatPotentialIsIdentity) {
  const auto g = build_grid(12, 24);
  std::mt19937_64 rng(1);
  const CoefField v = random_field(g, rng);
  const CoefField zero(g, true);
  EXPECT_LT((u_from_v(v, zero) - v).l2_norm(), 1e-12);
  EXPECT_LT((v_from_u(v, zero) - v).l2_norm(), 1e-12);
}

// The products with e^{±Y_N} leave the basis; at K = 80 against a level-4
// potential the lost tail is below 1e-8.
TEST(Transforms, RoundTripWithinProjectionTolerance) {
  const int K = 80;
  const auto g = build_grid(K, 2 * K);
  const CoefField YN = compute_YN(compute_Y(sample_noise(5, 1, K), g), 4);
  const CoefField v0 = default_v0(g);
  EXPECT_LT((v_from_u(u_from_v(v0, YN), YN) - v0).l2_norm(), 1e-8);
  EXPECT_LT((u_from_v(v_from_u(v0, YN), YN) - v0).l2_norm(), 1e-8);
}

TEST(Transforms, RoundTripErrorShrinksWithCutoff) {
  double prev = 1.0;
  for (int K : {16, 32, 48, 64}) {
    const auto g = build_grid(K, 2 * K);
    const CoefField YN = compute_YN(compute_Y(sample_noise(5, 1, K), g), 8);
    const CoefField v0 = default_v0(g);
    const double err = (v_from_u(u_from_v(v0, YN), YN) - v0).l2_norm();
    EXPECT_LT(err, 0.5 * prev) << "K=" << K;
    prev = err;
  }
}

TEST(Transforms, MassIdentity) {
  const int K = 48;
  const auto g = build_grid(K, 2 * K);
  const CoefField YN = compute_YN(compute_Y(sample_noise(6, 2, K), g), 4);
  const CoefField v0 = default_v0(g);
  const double mass = transformed_mass(v0, YN);
  EXPECT_NEAR(u_from_v(v0, YN).l2_norm_sq(), mass, 1e-8 * mass);
}

TEST(Transforms, WeightedGroundStateMapsToDelta) {
  const int K = 48;
  const auto g = build_grid(K, 2 * K);
  const CoefField YN = compute_YN(compute_Y(sample_noise(7, 3, K), g), 4);
  Eigen::MatrixXcd u = synthesize_values(*g, CoefField::delta(g, {0, 0}).coef());
  u.array() *= exp_weight(YN, 1.0).values.values.array();
  const CoefField v = v_from_u(CoefField(g, analyze_values(*g, u)), YN);
  EXPECT_LT((v - CoefField::delta(g, {0, 0})).l2_norm(), 1e-6);
}

TEST(LinearFlow, Examples) {
  const auto g = build_grid(10, 20);
  std::mt19937_64 rng(2);
  const CoefField c = random_field(g, rng);
  EXPECT_EQ((linear_flow(c, 0.0) - c).l2_norm(), 0.0);
  const CoefField d = linear_flow(CoefField::delta(g, {0, 0}), std::numbers::pi);
  EXPECT_NEAR(std::abs(d(0, 0) - 1.0), 0.0, 1e-12);
  const CoefField f = linear_flow(c, 0.731);
  for (double s : {0.0, 1.0, 2.0, -1.0}) EXPECT_NEAR(sobolev_norm(f, s), sobolev_norm(c, s), 1e-12 * sobolev_norm(c, s));
}

TEST(PotentialFlow, Examples) {
  const auto g = build_grid(10, 20);
  std::mt19937_64 rng(3);
  const CoefField c = random_field(g, rng);
  const RealGridField zero(g, Eigen::MatrixXd::Zero(20, 20));
  EXPECT_LT((potential_flow(c, zero, 0.0, 0.4) - c).l2_norm(), 1e-12);
  const RealGridField flat(g, Eigen::MatrixXd::Constant(20, 20, 2.5));
  const CoefField p = potential_flow(c, flat, 0.0, 0.4);
  EXPECT_LT((p - std::polar(1.0, 1.0) * c).l2_norm(), 1e-12);
  for (double s : {0.0, 1.0, 2.0}) EXPECT_NEAR(sobolev_norm(p, s), sobolev_norm(c, s), 1e-12 * sobolev_norm(c, s));
}

TEST(PotentialFlow, NodeModulusInvariantBeforeProjection) {
  const auto g = build_grid(10, 20);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::MatrixXcd vals = synthesize_values(*g, random_field(g, rng).coef());
    Eigen::MatrixXd V(20, 20);
    for (auto& x : V.reshaped()) x = 3.0 * n(rng);
    const Eigen::MatrixXcd before = vals;
    detail::rotate_nodes(vals, V, n(rng), n(rng));
    const double a = integrate_values(*g, before.cwiseAbs2().eval());
    const double b = integrate_values(*g, vals.cwiseAbs2().eval());
    EXPECT_NEAR(a, b, 1e-12 * a);
  }
}

TEST(StrangStep, LinearNoiseFreeMatchesExactFlow) {
  const auto g = build_grid(12, 24);
  std::mt19937_64 rng(5);
  const CoefField u0 = random_field(g, rng);
  SimState s;
  s.u = u0;
  s.potential = RealGridField(g, Eigen::MatrixXd::Zero(24, 24));
  SimState unfused = s;
  strang_steps(s, 1e-3, 1000);
  for (int i = 0; i < 1000; ++i) unfused = strang_step(unfused, 1e-3);
  const CoefField exact = linear_flow(u0, 1.0);
  EXPECT_LT((s.u - exact).l2_norm(), 1e-10);
  EXPECT_LT((unfused.u - exact).l2_norm(), 1e-10);
  EXPECT_NEAR(s.t, 1.0, 1e-12);
}

// Fusing two half rotations skips one projection, so the two variants agree
// up to the projection residual rather than to roundoff.
TEST(StrangStep, FusedMatchesUnfused) {
  const int K = 16;
  const auto g = build_grid(K, 2 * K);
  const Simulator sim(sample_noise(8, 0, K), 8, g, -1.0);
  SimState a = sim.initial_state(default_v0(g));
  SimState b = a;
  strang_steps(a, 1e-3, 200);
  for (int i = 0; i < 200; ++i) b = strang_step(b, 1e-3);
  EXPECT_LT((a.u - b.u).l2_norm(), 1e-6);
}

// Richardson self-comparison against a run with dt/8.
TEST(StrangStep, SecondOrderSelfConvergence) {
  const int K = 24;
  const auto g = build_grid(K, 2 * K);
  const Simulator sim(sample_noise(9, 0, K), 12, g, -1.0);
  const SimState start = sim.initial_state(default_v0(g));
  const auto run = [&](double dt) {
    SimState s = start;
    strang_steps(s, dt, static_cast<int>(std::lround(0.5 / dt)));
    return s.u;
  };
  const CoefField ref = run(0.02 / 8.0);
  const double e1 = (run(0.02) - ref).l2_norm();
  const double e2 = (run(0.01) - ref).l2_norm();
  const double order = std::log2(e1 / e2);
  EXPECT_NEAR(order, 2.0, 0.2) << e1 << " " << e2;
}

TEST(StrangStep, TimeReversal) {
  const int K = 48;
  const auto g = build_grid(K, 2 * K);
  for (double lambda : {0.0, -1.0}) {
    const Simulator sim(sample_noise(10, 1, K), 16, g, lambda);
    SimState s = sim.initial_state(default_v0(g));
    const CoefField u0 = s.u;
    strang_steps(s, 1e-3, 1000);
    strang_steps(s, -1e-3, 1000);
    EXPECT_LT((s.u - u0).l2_norm(), 1e-6) << "lambda=" << lambda;
    EXPECT_NEAR(s.t, 0.0, 1e-12);
  }
}

TEST(RunSimulation, LinearNoiseFreeGroundState) {
  const auto g = build_grid(8, 16);
  IntegratorConfig cfg;
  cfg.dt = 1e-3;
  cfg.t_final = 1.0;
  cfg.record_every = 100;
  cfg.keep_snapshots = true;
  const CoefField v0 = CoefField::delta(g, {0, 0});
  const auto res = run_simulation(NoiseRealization::zero(8), 6, v0, cfg, 0.0, false);
  ASSERT_FALSE(res.blew_up);
  ASSERT_EQ(res.snapshots.size(), 11u);
  for (std::size_t i = 0; i < res.snapshots.size(); ++i) {
    const double t = res.series.times[i];
    EXPECT_LT((res.snapshots[i] - std::polar(1.0, -2.0 * t) * v0).l2_norm(), 1e-9) << "t=" << t;
  }
}

TEST(RunSimulation, DefocusingNoiseFreeConservesMass) {
  const auto g = build_grid(24, 48);
  IntegratorConfig cfg;
  cfg.t_final = 1.0;
  cfg.record_every = 50;
  const auto res = run_simulation(NoiseRealization::zero(24), 12, default_v0(g), cfg, -1.0, false);
  ASSERT_FALSE(res.blew_up);
  EXPECT_LT(ObservableSeries::relative_drift(res.series.mass), 1e-8);
  const double sigma0 = res.series.sigma.front();
  for (double s : res.series.sigma) EXPECT_LT(s, 2.0 * sigma0);
}

TEST(RunSimulation, LinearNoisyConservesMass) {
  const int K = 48;
  const auto g = build_grid(K, 2 * K);
  IntegratorConfig cfg;
  cfg.t_final = 1.0;
  cfg.record_every = 100;
  for (std::uint64_t stream = 0; stream < 3; ++stream) {
    const auto res = run_simulation(sample_noise(11, stream, K), 12, default_v0(g), cfg, 0.0);
    ASSERT_FALSE(res.blew_up);
    EXPECT_LT(ObservableSeries::relative_drift(res.series.mass), 1e-8);
  }
}

TEST(RunSimulation, BackwardHorizon) {
  const int K = 16;
  const auto g = build_grid(K, 2 * K);
  IntegratorConfig cfg;
  cfg.t_final = -0.5;
  cfg.record_every = 100;
  const auto res = run_simulation(sample_noise(12, 0, K), 8, default_v0(g), cfg, -1.0);
  EXPECT_NEAR(res.series.times.back(), -0.5, 1e-12);
  EXPECT_NEAR(res.final_state.t, -0.5, 1e-12);
}

TEST(RunSimulation, Deterministic) {
  const int K = 16;
  const auto g = build_grid(K, 2 * K);
  IntegratorConfig cfg;
  cfg.t_final = 0.3;
  cfg.sigma_list = {1.6};
  const auto a = run_simulation(sample_noise(13, 4, K), 8, default_v0(g), cfg, -1.0);
  const auto b = run_simulation(sample_noise(13, 4, K), 8, default_v0(g), cfg, -1.0);
  EXPECT_EQ(a.series.energy, b.series.energy);
  EXPECT_EQ(a.series.mass, b.series.mass);
  EXPECT_EQ(a.series.w_sigma, b.series.w_sigma);
  EXPECT_EQ(a.final_state.u.coef(), b.final_state.u.coef());
}

TEST(RunSimulation, ResumeFromIntermediateState) {
  const int K = 16;
  const auto g = build_grid(K, 2 * K);
  const Simulator sim(sample_noise(14, 0, K), 8, g, -1.0);
  IntegratorConfig whole;
  whole.t_final = 0.4;
  whole.record_every = 50;
  IntegratorConfig half = whole;
  half.t_final = 0.2;
  const auto full = sim.run(default_v0(g), whole);
  const auto first = sim.run(default_v0(g), half);
  const auto second = sim.run_from(first.final_state, half);
  EXPECT_EQ(full.final_state.u.coef(), second.final_state.u.coef());
  EXPECT_EQ(full.series.energy.back(), second.series.energy.back());
}

TEST(RunSimulation, OverflowReportedAsBlowUp) {
  const int K = 8;
  const auto g = build_grid(K, 16);
  NoiseRealization n = NoiseRealization::zero(K);
  n.xi(0, 0) = 5000.0;
  IntegratorConfig cfg;
  cfg.t_final = 0.1;
  const auto res = run_simulation(n, 4, default_v0(g), cfg, 1.0);
  EXPECT_TRUE(res.blew_up);
  EXPECT_FALSE(res.diagnostic.empty());
}

TEST(RunSimulation, RejectsBadConfig) {
  const auto g = build_grid(8, 16);
  IntegratorConfig cfg;
  cfg.dt = 0.0;
  EXPECT_THROW(run_simulation(NoiseRealization::zero(8), 4, default_v0(g), cfg, 0.0), std::invalid_argument);
  cfg.dt = 1e-3;
  cfg.record_every = 0;
  EXPECT_THROW(run_simulation(NoiseRealization::zero(8), 4, default_v0(g), cfg, 0.0), std::invalid_argument);
  EXPECT_THROW(run_simulation(NoiseRealization::zero(8), 8, default_v0(g), IntegratorConfig{}, 0.0), ResolutionError);
}

// The u-form splitting against a brute-force RK4 in v. With the counterterm
// as the only potential both discretizations share one basis and agree to
// time-stepping accuracy.
TEST(Equivalence, CountertermOnlyMatchesVEquation) {
  const int K = 8;
  const auto g = build_grid(K, 2 * K);
  const Simulator sim(NoiseRealization::zero(K), 4, g, -1.0);
  IntegratorConfig cfg;
  cfg.dt = 1e-4;
  cfg.t_final = 0.5;
  cfg.record_every = 5000;
  const auto res = sim.run(default_v0(g), cfg);
  const Eigen::MatrixXcd v_rk4 = rk4_v(*g, default_v0(g).coef(), sim.weights(), -1.0, 0.5, 1e-3);
  const CoefField v_split = sim.to_v(res.final_state.u);
  EXPECT_LT((v_split.coef() - v_rk4).norm(), 1e-8);
  EXPECT_NEAR(transformed_mass(CoefField(g, v_rk4), sim.weights()), res.series.mass.back(), 1e-8);
}

// With noise, u and v live in different Galerkin spaces (the basis versus the
// basis times e^{Y_N}); the gap is of projection size and closes with K.
TEST(Equivalence, NoisyGapIsProjectionSized) {
  double prev = 1.0;
  for (int K : {8, 16, 32}) {
    const auto g = build_grid(K, 2 * K);
    const Simulator sim(scaled_noise(5, 1, K, 0.1), 4, g, -1.0);
    IntegratorConfig cfg;
    cfg.dt = 1e-4;
    cfg.t_final = 0.5;
    cfg.record_every = 5000;
    const CoefField v0 = default_v0(g);
    const auto res = sim.run(v0, cfg);
    const Eigen::MatrixXcd v_rk4 = rk4_v(*g, v0.coef(), sim.weights(), -1.0, 0.5, 1e-3);
    const double gap = (sim.to_v(res.final_state.u).coef() - v_rk4).norm();
    const double projection = (sim.to_v(sim.to_u(v0)) - v0).l2_norm();
    EXPECT_LT(gap, 1e-8 + 10.0 * projection) << "K=" << K;
    EXPECT_LT(gap, 0.1 * prev) << "K=" << K;
    prev = gap;
  }
}

}  // namespace
}  // namespace hgp
