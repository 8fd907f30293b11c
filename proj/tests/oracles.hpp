// Test-only reference computations. Nothing here calls into the filter or the
// samplers; each oracle works from first principles so it can check them.
#ifndef HFEI_TESTS_ORACLES_HPP
#define HFEI_TESTS_ORACLES_HPP

#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

namespace oracle
{

// Joint Gaussian of the stacked states [xi_1; ...; xi_T] for
// xi_t = F xi_{t-1} + w_t, w_t ~ N(0, Q_t), xi_1 ~ N(m0, P0).
struct StackedStates
{
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

inline StackedStates stacked_states(const Eigen::MatrixXd& F, const std::vector<Eigen::MatrixXd>& Q,
                                    const Eigen::VectorXd& m0, const Eigen::MatrixXd& P0, int T)
{
  const auto n = F.rows();
  StackedStates s;
  s.mean.resize(n * T);
  s.cov = Eigen::MatrixXd::Zero(n * T, n * T);
  Eigen::VectorXd m = m0;
  Eigen::MatrixXd P = P0;
  for (int t = 0; t < T; ++t) {
    if (t > 0) {
      m = F * m;
      P = F * P * F.transpose() + Q[t];
    }
    s.mean.segment(n * t, n) = m;
    s.cov.block(n * t, n * t, n, n) = P;
    // Cov(xi_r, xi_t) = F^{r-t} Var(xi_t) for r > t.
    Eigen::MatrixXd C = P;
    for (int r = t + 1; r < T; ++r) {
      C = F * C;
      s.cov.block(n * r, n * t, n, n) = C;
      s.cov.block(n * t, n * r, n, n) = C.transpose();
    }
  }
  return s;
}

// Selection of observed entries of y_t = H xi_t, stacked over t.
struct ObservationMap
{
  Eigen::MatrixXd A;  // rows: observed (t, i); columns: stacked states
  Eigen::VectorXd y;
};

inline ObservationMap observation_map(const Eigen::MatrixXd& H, const Eigen::MatrixXd& data)
{
  const auto n = H.cols();
  const auto T = data.rows();
  std::vector<std::pair<Eigen::Index, Eigen::Index>> obs;
  for (Eigen::Index t = 0; t < T; ++t)
    for (Eigen::Index i = 0; i < data.cols(); ++i)
      if (!std::isnan(data(t, i)))
        obs.emplace_back(t, i);
  ObservationMap m;
  m.A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(obs.size()), n * T);
  m.y.resize(static_cast<Eigen::Index>(obs.size()));
  for (std::size_t k = 0; k < obs.size(); ++k) {
    const auto [t, i] = obs[k];
    m.A.block(static_cast<Eigen::Index>(k), n * t, 1, n) = H.row(i);
    m.y[static_cast<Eigen::Index>(k)] = data(t, i);
  }
  return m;
}

inline double gaussian_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov)
{
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  const Eigen::VectorXd d = x - mean;
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < cov.rows(); ++i)
    logdet += 2.0 * std::log(llt.matrixL()(i, i));
  return -0.5 * (static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi) + logdet + d.dot(llt.solve(d)));
}

struct Conditional
{
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  double loglik = 0.0;
};

// Brute-force conditioning of the stacked states on the observed entries.
// `jitter` is added to the observation covariance exactly as the filter does.
inline Conditional condition(const StackedStates& s, const ObservationMap& m, double jitter)
{
  Conditional c;
  Eigen::MatrixXd Syy = m.A * s.cov * m.A.transpose();
  Syy.diagonal().array() += jitter;
  const Eigen::MatrixXd Sxy = s.cov * m.A.transpose();
  const Eigen::VectorXd my = m.A * s.mean;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(Syy);
  c.mean = s.mean + Sxy * ldlt.solve(m.y - my);
  c.cov = s.cov - Sxy * ldlt.solve(Sxy.transpose());
  c.loglik = gaussian_logpdf(m.y, my, Syy);
  return c;
}

// Eigenvalue moduli of an AR companion matrix built directly from coefficients.
inline double companion_spectral_radius(const Eigen::VectorXd& coefs)
{
  const auto p = coefs.size();
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(p, p);
  C.row(0) = coefs.transpose();
  for (Eigen::Index i = 1; i < p; ++i)
    C(i, i - 1) = 1.0;
  return C.eigenvalues().cwiseAbs().maxCoeff();
}

} // namespace oracle

#endif
