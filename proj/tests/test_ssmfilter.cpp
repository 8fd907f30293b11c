#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "hfei/ssmfilter.hpp"
#include "hfei/statespace.hpp"
#include "oracles.hpp"

using namespace hfei;

namespace
{

using DenseSystem = StateSpaceSystem<DenseTransition>;

// Three states, two observables, two shocks with time-varying scales.
DenseSystem toy_system(int T)
{
  DenseSystem sys;
  Eigen::MatrixXd F(3, 3);
  F << 0.7, 0.2, 0.0,
       1.0, 0.0, 0.0,
       0.0, 0.1, 0.5;
  sys.transition = DenseTransition(F);
  sys.design.resize(2, 3);
  sys.design << 1.0, 0.5, 1.0,
                0.3, 0.3, -0.4;
  sys.shock_slots = {0, 2};
  sys.shock_sd.resize(T, 2);
  for (int t = 0; t < T; ++t) {
    sys.shock_sd(t, 0) = 0.8 + 0.1 * t;
    sys.shock_sd(t, 1) = 0.5 + 0.05 * (T - t);
  }
  sys.initial_mean = Eigen::Vector3d(0.2, -0.1, 0.0);
  sys.initial_cov = Eigen::Matrix3d::Identity() * 2.0;
  sys.initial_cov(0, 1) = sys.initial_cov(1, 0) = 0.3;
  return sys;
}

std::vector<Eigen::MatrixXd> shock_covariances(const DenseSystem& sys, int T)
{
  std::vector<Eigen::MatrixXd> Q(static_cast<std::size_t>(T), Eigen::MatrixXd::Zero(sys.states(), sys.states()));
  for (int t = 0; t < T; ++t)
    for (std::size_t k = 0; k < sys.shock_slots.size(); ++k) {
      const double sd = sys.shock_sd_at(t, static_cast<Eigen::Index>(k));
      Q[static_cast<std::size_t>(t)](sys.shock_slots[k], sys.shock_slots[k]) = sd * sd;
    }
  return Q;
}

oracle::StackedStates prior_of(const DenseSystem& sys, int T)
{
  return oracle::stacked_states(sys.transition.dense(), shock_covariances(sys, T), sys.initial_mean,
                                sys.initial_cov, T);
}

Eigen::MatrixXd toy_data(int T)
{
  Eigen::MatrixXd y(T, 2);
  y << 0.4, missing,
       missing, -0.2,
       1.1, 0.3,
       missing, missing,
       0.7, 0.1;
  return y.topRows(T);
}

Eigen::VectorXd stack(const Eigen::MatrixXd& xi) { return xi.reshaped(); }

} // namespace

TEST(KalmanFilter, AllMissingFollowsPrior)
{
  const int T = 5;
  const auto sys = toy_system(T);
  const Eigen::MatrixXd y = Eigen::MatrixXd::Constant(T, 2, missing);
  const auto r = kalman_filter(sys, y);
  EXPECT_DOUBLE_EQ(r.loglik, 0.0);
  const auto prior = prior_of(sys, T);
  for (int t = 0; t < T; ++t) {
    EXPECT_LT((r.filtered_mean.col(t) - prior.mean.segment(3 * t, 3)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((r.filtered_cov[t] - prior.cov.block(3 * t, 3 * t, 3, 3)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(KalmanFilter, ScalarUpdateByHand)
{
  DenseSystem sys;
  sys.transition = DenseTransition(Eigen::MatrixXd::Constant(1, 1, 0.5));
  sys.design = Eigen::MatrixXd::Constant(1, 1, 2.0);
  sys.shock_slots = {0};
  sys.shock_sd = Eigen::MatrixXd::Constant(1, 1, 1.0);
  sys.initial_mean = Eigen::VectorXd::Constant(1, 1.0);
  sys.initial_cov = Eigen::MatrixXd::Constant(1, 1, 4.0);
  sys.jitter = 0.0;
  Eigen::MatrixXd y(2, 1);
  y << missing, 3.0;
  const auto r = kalman_filter(sys, y);
  // Predicted at t=2: mean 0.5, variance 0.25*4+1 = 2. Observation 2x: S = 8,
  // gain 2*2/8 = 0.5, updated mean 0.5 + 0.5*(3-1) = 1.5, variance 2 - 0.5*4 = 0.
  EXPECT_NEAR(r.predicted_mean(0, 1), 0.5, 1e-14);
  EXPECT_NEAR(r.predicted_cov[1](0, 0), 2.0, 1e-14);
  EXPECT_NEAR(r.filtered_mean(0, 1), 1.5, 1e-14);
  EXPECT_NEAR(r.filtered_cov[1](0, 0), 0.0, 1e-14);
  EXPECT_NEAR(r.loglik, -0.5 * (std::log(2.0 * std::numbers::pi * 8.0) + 4.0 / 8.0), 1e-14);
}

TEST(KalmanFilter, LikelihoodMatchesJointGaussian)
{
  const int T = 5;
  const auto sys = toy_system(T);
  const auto y = toy_data(T);
  const auto c = oracle::condition(prior_of(sys, T), oracle::observation_map(sys.design, y), sys.jitter);
  EXPECT_NEAR(log_likelihood(sys, y), c.loglik, 1e-8);
  EXPECT_NEAR(kalman_filter(sys, y).loglik, c.loglik, 1e-8);
}

TEST(KalmanFilter, CompanionSystemMatchesJointGaussian)
{
  ModelSpec spec;
  spec.n_q = 1;
  spec.n_m = 1;
  spec.n_w = 1;
  spec.initial_variance = 3.0;
  const auto L = build_layout(spec);
  ModelParams p;
  p.loadings = Eigen::MatrixXd::Ones(3, 1) * 0.8;
  p.phi = Eigen::Vector2d(0.6, 0.1);
  p.rho = Eigen::MatrixXd::Constant(3, 3, 0.1);
  const int T = 16;
  Rng rng(9);
  Eigen::MatrixXd sd(T, 4);
  for (int t = 0; t < T; ++t)
    for (int k = 0; k < 4; ++k)
      sd(t, k) = 0.5 + uniform01(rng);
  const auto sys = assemble_system(spec, L, p, sd);
  Eigen::MatrixXd y = Eigen::MatrixXd::Constant(T, 3, missing);
  for (int t = 0; t < T; ++t) {
    y(t, 2) = t % 5 == 3 ? missing : standard_normal(rng);
    if (t % 4 == 3)
      y(t, 1) = standard_normal(rng);
  }
  y(11, 0) = 0.3;
  std::vector<Eigen::MatrixXd> Q(T);
  for (int t = 0; t < T; ++t)
    Q[t] = innovation_covariance(L, sd.row(t).transpose());
  const auto stacked = oracle::stacked_states(sys.transition.dense(), Q, sys.initial_mean, sys.initial_cov, T);
  const auto c = oracle::condition(stacked, oracle::observation_map(sys.design, y), sys.jitter);
  EXPECT_NEAR(log_likelihood(sys, y), c.loglik, 1e-8);
  const Eigen::MatrixXd sm = smoothed_mean(sys, y);
  EXPECT_LT((stack(sm) - c.mean).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(KalmanFilter, InvariantToSeriesOrdering)
{
  const int T = 5;
  const auto sys = toy_system(T);
  const auto y = toy_data(T);
  auto swapped = sys;
  swapped.design.row(0).swap(swapped.design.row(1));
  Eigen::MatrixXd ys = y;
  ys.col(0).swap(ys.col(1));
  EXPECT_NEAR(log_likelihood(sys, y), log_likelihood(swapped, ys), 1e-8);

  // Sequential scalar updates on the same model.
  Eigen::VectorXd a = sys.initial_mean;
  Eigen::MatrixXd P = sys.initial_cov;
  const Eigen::MatrixXd F = sys.transition.dense();
  const auto Q = shock_covariances(sys, T);
  double ll = 0.0;
  for (int t = 0; t < T; ++t) {
    if (t > 0) {
      a = F * a;
      P = F * P * F.transpose() + Q[t];
    }
    for (int i = 0; i < 2; ++i) {
      if (is_missing(y(t, i)))
        continue;
      const Eigen::RowVectorXd h = sys.design.row(i);
      const double s = h * P * h.transpose() + sys.jitter;
      const double v = y(t, i) - h.dot(a);
      const Eigen::VectorXd k = P * h.transpose() / s;
      ll += -0.5 * (std::log(2.0 * std::numbers::pi * s) + v * v / s);
      a += k * v;
      P -= k * h * P;
    }
  }
  EXPECT_NEAR(log_likelihood(sys, y), ll, 1e-8);
}

TEST(KalmanFilter, LikelihoodFallsInTail)
{
  const int T = 5;
  const auto sys = toy_system(T);
  Eigen::MatrixXd y = toy_data(T);
  double prev = log_likelihood(sys, y);
  for (double shift : {5.0, 10.0, 20.0, 40.0}) {
    y(2, 0) = 1.1 + shift;
    const double ll = log_likelihood(sys, y);
    EXPECT_LT(ll, prev);
    prev = ll;
  }
}

TEST(KalmanFilter, NonFiniteInputNamesPeriod)
{
  const int T = 5;
  const auto sys = toy_system(T);
  Eigen::MatrixXd y = toy_data(T);
  y(3, 1) = std::numeric_limits<double>::infinity();
  try {
    log_likelihood(sys, y);
    FAIL() << "expected numeric error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::numeric);
    EXPECT_NE(std::string(e.what()).find("period 3"), std::string::npos);
  }
  auto bad = sys;
  bad.shock_sd(2, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(log_likelihood(bad, toy_data(T)), Error);
}

TEST(SimulationSmoother, FullyObservedWeeklyReproducesData)
{
  ModelSpec spec;
  spec.n_w = 2;
  const auto L = build_layout(spec);
  ModelParams p;
  p.loadings = Eigen::Vector2d(1.0, 0.7);
  p.phi = Eigen::Vector2d(0.5, 0.2);
  p.rho = Eigen::MatrixXd::Constant(2, 3, 0.2);
  const int T = 40;
  const auto sys = assemble_system(spec, L, p, Eigen::MatrixXd::Constant(1, 3, 0.5));
  Rng rng(12);
  const auto [xi, y] = detail::simulate_system(sys, T, rng);
  const StateDraw draw = simulation_smoother(sys, y, rng);
  EXPECT_LT((sys.design * draw - y.transpose()).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(SimulationSmoother, MomentsMatchBruteForceConditional)
{
  const int T = 5;
  const auto sys = toy_system(T);
  const auto y = toy_data(T);
  const auto c = oracle::condition(prior_of(sys, T), oracle::observation_map(sys.design, y), sys.jitter);
  const int N = 5000;
  const Eigen::Index d = 3 * T;
  Rng rng(2024);
  Eigen::MatrixXd draws(d, N);
  double ll = 0.0;
  for (int k = 0; k < N; ++k)
    draws.col(k) = stack(simulation_smoother(sys, y, rng, &ll));
  EXPECT_NEAR(ll, c.loglik, 1e-8);

  const Eigen::VectorXd mean = draws.rowwise().mean();
  const Eigen::MatrixXd centred = draws.colwise() - mean;
  const Eigen::MatrixXd cov = centred * centred.transpose() / (N - 1);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double se = std::sqrt(std::max(c.cov(i, i), 0.0) / N);
    EXPECT_LE(std::abs(mean[i] - c.mean[i]), 3.0 * se + 1e-8) << "state " << i;
  }
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) {
      const Eigen::ArrayXd prod = centred.row(i).array() * centred.row(j).array();
      const double se = std::sqrt((prod - prod.mean()).square().sum() / (N - 1) / N);
      EXPECT_LE(std::abs(cov(i, j) - c.cov(i, j)), 3.0 * se + 1e-8) << "entry " << i << "," << j;
    }
}

TEST(SimulationSmoother, NoDataReproducesUnconditionalMoments)
{
  const int T = 4;
  const auto sys = toy_system(T);
  const auto prior = prior_of(sys, T);
  const Eigen::MatrixXd y = Eigen::MatrixXd::Constant(T, 2, missing);
  const int N = 8000;
  Rng rng(77);
  Eigen::MatrixXd draws(3 * T, N);
  for (int k = 0; k < N; ++k)
    draws.col(k) = stack(simulation_smoother(sys, y, rng));
  const Eigen::VectorXd mean = draws.rowwise().mean();
  const Eigen::MatrixXd centred = draws.colwise() - mean;
  const Eigen::MatrixXd cov = centred * centred.transpose() / (N - 1);
  for (Eigen::Index i = 0; i < 3 * T; ++i) {
    EXPECT_LE(std::abs(mean[i] - prior.mean[i]), 4.0 * std::sqrt(prior.cov(i, i) / N));
    EXPECT_NEAR(cov(i, i) / prior.cov(i, i), 1.0, 0.1);
  }
}
