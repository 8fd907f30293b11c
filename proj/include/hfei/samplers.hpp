#ifndef HFEI_SAMPLERS_HPP
#define HFEI_SAMPLERS_HPP

#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hfei/error.hpp"
#include "hfei/linear_gaussian.hpp"
#include "hfei/model_spec.hpp"
#include "hfei/panel.hpp"
#include "hfei/random.hpp"
#include "hfei/ssmfilter.hpp"
#include "hfei/statespace.hpp"

namespace hfei
{

// ---------------------------------------------------------------------------
// Path helpers

// Values of a state block through time, oldest first: the `presample` lags
// held at period 0 followed by the block's current slot at every period.
// Entry k corresponds to time k - presample.
inline Eigen::VectorXd block_history(const StateDraw& xi, const StateBlock& block, Eigen::Index presample)
{
  if (presample < 0 || presample >= block.size)
    throw Error(ErrorKind::build, "presample depth exceeds the state block");
  const Eigen::Index T = xi.cols();
  Eigen::VectorXd h(T + presample);
  for (Eigen::Index k = 0; k < presample; ++k)
    h[k] = xi(block.start + presample - k, 0);
  h.tail(T) = xi.row(block.start).transpose();
  return h;
}

// Window-averaged factor regressors, T x (s+1): column l at period t is
// (1/w) sum_{j<w} f_{t-j-l}. `history` starts `presample` periods before t=0.
inline Eigen::MatrixXd aggregated_regressors(const Eigen::VectorXd& history, Eigen::Index presample, Frequency f,
                                             int s)
{
  const int w = aggregation_window(f);
  if (presample < w - 1 + s)
    throw Error(ErrorKind::build, "factor history too short for the aggregation window");
  const Eigen::Index T = history.size() - presample;
  Eigen::MatrixXd X(T, s + 1);
  for (Eigen::Index t = 0; t < T; ++t)
    for (int l = 0; l <= s; ++l) {
      double acc = 0.0;
      for (int j = 0; j < w; ++j)
        acc += history[presample + t - j - l];
      X(t, l) = acc / w;
    }
  return X;
}

// e_t = x_t - sum_j c_j x_{t-j}; the first p entries are missing.
inline Eigen::VectorXd ar_residuals(const Eigen::VectorXd& path, const Eigen::VectorXd& coefs)
{
  const auto p = coefs.size();
  Eigen::VectorXd e = Eigen::VectorXd::Constant(path.size(), missing);
  for (Eigen::Index t = p; t < path.size(); ++t) {
    double fit = 0.0;
    for (Eigen::Index j = 0; j < p; ++j)
      fit += coefs[j] * path[t - 1 - j];
    e[t] = path[t] - fit;
  }
  return e;
}

// ---------------------------------------------------------------------------
// Autoregressive coefficients

struct ArPrior
{
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
};

// Normal prior with variance shrinkage / h^2 on lag h; mean `first_lag` on
// lag 1 and zero elsewhere.
inline ArPrior minnesota_prior(int p, double first_lag, double shrinkage)
{
  ArPrior prior{Eigen::VectorXd::Zero(p), Eigen::VectorXd(p)};
  if (p > 0)
    prior.mean[0] = first_lag;
  for (int h = 1; h <= p; ++h)
    prior.variance[h - 1] = shrinkage / (h * h);
  return prior;
}

inline double companion_radius(const Eigen::VectorXd& coefs)
{
  const auto p = coefs.size();
  if (p == 0)
    return 0.0;
  if (p == 1)
    return std::abs(coefs[0]);
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(p, p);
  C.row(0) = coefs.transpose();
  C.diagonal(-1).setOnes();
  return C.eigenvalues().cwiseAbs().maxCoeff();
}

inline bool is_stationary(const Eigen::VectorXd& coefs) { return companion_radius(coefs) < 1.0; }

struct ArDraw
{
  Eigen::VectorXd coefs;
  int rejections = 0;
  bool fell_back = false;
};

// Conditional posterior of x_t = sum_j c_j x_{t-j} + sigma_t e_t for the
// targets t = p..len-1 of `path`. `sigma` is aligned with `path` or has a
// single entry. Non-stationary draws are rejected; after `max_rejections`
// the prior mean is returned.
inline ArDraw draw_ar(const Eigen::VectorXd& path, const Eigen::VectorXd& sigma, const ArPrior& prior, Rng& rng,
                      int max_rejections = 100)
{
  const auto p = prior.mean.size();
  if (path.size() < p)
    throw Error(ErrorKind::data, "autoregression needs at least " + std::to_string(p) + " values, got " +
                                     std::to_string(path.size()));
  if (sigma.size() != 1 && sigma.size() != path.size())
    throw Error(ErrorKind::build, "volatility path does not match the autoregression path");
  Eigen::MatrixXd precision = prior.variance.cwiseInverse().asDiagonal();
  Eigen::VectorXd b = prior.mean.cwiseQuotient(prior.variance);
  Eigen::VectorXd x(p);
  for (Eigen::Index t = p; t < path.size(); ++t) {
    for (Eigen::Index j = 0; j < p; ++j)
      x[j] = path[t - 1 - j];
    const double sd = sigma.size() == 1 ? sigma[0] : sigma[t];
    const double w = 1.0 / (sd * sd);
    precision.noalias() += w * x * x.transpose();
    b.noalias() += w * path[t] * x;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorKind::numeric, "autoregression posterior precision is not positive definite");
  const Eigen::VectorXd mean = llt.solve(b);
  ArDraw out;
  for (; out.rejections < max_rejections; ++out.rejections) {
    Eigen::VectorXd c = mean + llt.matrixU().solve(standard_normal_vector(p, rng));
    if (is_stationary(c)) {
      out.coefs = std::move(c);
      return out;
    }
  }
  log_warning("autoregression draw rejected " + std::to_string(max_rejections) +
              " times as non-stationary; using the prior mean");
  out.coefs = prior.mean;
  out.fell_back = true;
  return out;
}

inline ArDraw draw_ar_factor(const Eigen::VectorXd& path, const Eigen::VectorXd& sigma, int p, const Priors& priors,
                             Rng& rng)
{
  return draw_ar(path, sigma, minnesota_prior(p, priors.factor_first_lag_mean, priors.ar_shrinkage), rng);
}

inline ArDraw draw_ar_idio(const Eigen::VectorXd& path, const Eigen::VectorXd& sigma, int p, const Priors& priors,
                           Rng& rng)
{
  return draw_ar(path, sigma, minnesota_prior(p, 0.0, priors.ar_shrinkage), rng);
}

// ---------------------------------------------------------------------------
// Innovation variances

// Constant variance with inverse-gamma prior IG(dof/2, dof*scale/2);
// missing residuals are skipped.
inline double draw_variance(const Eigen::VectorXd& residuals, double dof, double scale, Rng& rng)
{
  double ssr = 0.0;
  Eigen::Index n = 0;
  for (double e : residuals)
    if (!is_missing(e)) {
      ssr += e * e;
      ++n;
    }
  return inverse_gamma(0.5 * (dof + static_cast<double>(n)), 0.5 * (dof * scale + ssr), rng);
}

// Seven-component normal mixture approximating log chi-square(1)
// (Kim, Shephard and Chib, 1998).
struct LogChi2Mixture
{
  static constexpr std::array<double, 7> prob{0.00730, 0.10556, 0.00002, 0.04395, 0.34001, 0.24566, 0.25750};
  static constexpr std::array<double, 7> mean{-10.12999 - 1.2704, -3.97281 - 1.2704, -8.56686 - 1.2704,
                                              2.77786 - 1.2704,   0.61942 - 1.2704,  1.79518 - 1.2704,
                                              -1.08819 - 1.2704};
  static constexpr std::array<double, 7> variance{5.79596, 2.61369, 5.17950, 0.16735, 0.64009, 0.34023, 1.26261};
};

// Random-walk log-variance path h_t = log sigma_t^2 and its innovation
// variance omega^2.
struct VolState
{
  Eigen::VectorXd log_var;
  double omega2 = 0.01;

  Eigen::VectorXd sd() const { return (0.5 * log_var.array()).exp().matrix(); }
};

inline constexpr double log_square_offset = 1e-6;

namespace detail
{

// Draw from N(P^{-1} b, P^{-1}) for a symmetric tridiagonal precision P with
// diagonal `d` and off-diagonal `o` (o[t] couples t and t+1).
inline Eigen::VectorXd draw_tridiagonal(Eigen::VectorXd d, Eigen::VectorXd o, const Eigen::VectorXd& b, Rng& rng)
{
  const Eigen::Index T = d.size();
  // P = L L' with L lower bidiagonal: diagonal d, sub-diagonal o.
  for (Eigen::Index t = 0; t < T; ++t) {
    if (t > 0) {
      o[t - 1] /= d[t - 1];
      d[t] -= o[t - 1] * o[t - 1];
    }
    if (!(d[t] > 0.0))
      throw Error(ErrorKind::numeric, "log-volatility precision is not positive definite");
    d[t] = std::sqrt(d[t]);
  }
  // Forward solve L u = b, then L' x = u + z.
  Eigen::VectorXd u(T);
  for (Eigen::Index t = 0; t < T; ++t)
    u[t] = (b[t] - (t > 0 ? o[t - 1] * u[t - 1] : 0.0)) / d[t];
  u += standard_normal_vector(T, rng);
  Eigen::VectorXd x(T);
  for (Eigen::Index t = T - 1; t >= 0; --t)
    x[t] = (u[t] - (t + 1 < T ? o[t] * x[t + 1] : 0.0)) / d[t];
  return x;
}

} // namespace detail

// Inverse-gamma conditional of the random-walk innovation variance.
inline double draw_rw_variance(const Eigen::VectorXd& log_var, const Priors& priors, Rng& rng)
{
  const Eigen::Index T = log_var.size();
  const double ss = T > 1 ? (log_var.tail(T - 1) - log_var.head(T - 1)).squaredNorm() : 0.0;
  return inverse_gamma(0.5 * (priors.vol_dof + static_cast<double>(T - 1)),
                       0.5 * (priors.vol_dof * priors.vol_scale + ss), rng);
}

// One Gibbs update of a log-variance path from residuals e_t (missing
// entries carry no information): mixture indicators, then the path given
// indicators, then omega^2 unless `draw_omega` is false.
inline void draw_volatility(const Eigen::VectorXd& residuals, VolState& state, const Priors& priors, Rng& rng,
                            bool draw_omega = true)
{
  using M = LogChi2Mixture;
  const Eigen::Index T = residuals.size();
  if (state.log_var.size() != T)
    throw Error(ErrorKind::build, "log-variance path does not match the residuals");
  if (!(state.omega2 > 0.0))
    throw Error(ErrorKind::numeric, "volatility innovation variance must be positive");
  const double iw = 1.0 / state.omega2;
  Eigen::VectorXd d = Eigen::VectorXd::Zero(T), o = Eigen::VectorXd::Zero(std::max<Eigen::Index>(T - 1, 0));
  Eigen::VectorXd b = Eigen::VectorXd::Zero(T);
  d[0] = 1.0 / priors.log_var_variance;
  b[0] = priors.log_var_mean / priors.log_var_variance;
  for (Eigen::Index t = 1; t < T; ++t) {
    d[t - 1] += iw;
    d[t] += iw;
    o[t - 1] = -iw;
  }
  std::array<double, 7> logw{};
  for (Eigen::Index t = 0; t < T; ++t) {
    const double e = residuals[t];
    if (is_missing(e))
      continue;
    const double ystar = std::log(e * e + log_square_offset);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < 7; ++k) {
      const double r = ystar - state.log_var[t] - M::mean[k];
      logw[k] = std::log(M::prob[k]) - 0.5 * std::log(M::variance[k]) - 0.5 * r * r / M::variance[k];
      top = std::max(top, logw[k]);
    }
    double total = 0.0;
    for (auto& lw : logw)
      total += (lw = std::exp(lw - top));
    double u = uniform01(rng) * total;
    std::size_t k = 0;
    while (k + 1 < 7 && u > logw[k]) {
      u -= logw[k];
      ++k;
    }
    d[t] += 1.0 / M::variance[k];
    b[t] += (ystar - M::mean[k]) / M::variance[k];
  }
  state.log_var = detail::draw_tridiagonal(std::move(d), std::move(o), b, rng);
  if (draw_omega)
    state.omega2 = draw_rw_variance(state.log_var, priors, rng);
}

// ---------------------------------------------------------------------------
// Loadings

// Idiosyncratic component of one series: AR block as in the full state,
// observed through its aggregation window.
struct IdioModel
{
  Frequency frequency = Frequency::Weekly;
  Eigen::Index block_size = 4;
  Eigen::VectorXd rho;
  Eigen::VectorXd sigma;  // one entry, or one per period
  double initial_variance = 1e6;
  double jitter = 1e-10;
};

inline StateSpaceSystem<CompanionTransition> idio_system(const IdioModel& m)
{
  const int w = aggregation_window(m.frequency);
  if (m.block_size < w || m.rho.size() > m.block_size)
    throw Error(ErrorKind::build, "idiosyncratic block too small for its aggregation window");
  StateSpaceSystem<CompanionTransition> sys;
  sys.transition = CompanionTransition(m.block_size, {{0, m.block_size, m.rho}});
  sys.design = Eigen::MatrixXd::Zero(1, m.block_size);
  sys.design.leftCols(w).setConstant(1.0 / w);
  sys.shock_slots = {0};
  sys.shock_sd = m.sigma;
  sys.initial_mean = Eigen::VectorXd::Zero(m.block_size);
  sys.initial_cov = m.initial_variance * Eigen::MatrixXd::Identity(m.block_size, m.block_size);
  sys.jitter = m.jitter;
  return sys;
}

// Gaussian conditional posterior of the free loadings of one series given the
// factor regressors X (T x k). The GLS weighting is the exact covariance of the
// aggregated AR idiosyncratic term, obtained from filter innovations of y and
// of each column of X. With `fix_first` the first loading is held at 1 and only
// the remaining k-1 appear. A non-finite `prior_variance` gives a flat prior.
struct LoadingPosterior
{
  Eigen::VectorXd mean;
  Eigen::MatrixXd precision;
  Eigen::VectorXd b;  // precision * mean
};

inline LoadingPosterior loading_posterior(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, const IdioModel& model,
                                          double prior_variance, bool fix_first)
{
  const Eigen::Index T = y.size();
  const Eigen::Index k = X.cols();
  if (X.rows() != T || k < 1)
    throw Error(ErrorKind::build, "regressor matrix does not match the series");
  const Eigen::Index free = fix_first ? k - 1 : k;
  LoadingPosterior post;
  if (free == 0)
    return post;
  Eigen::MatrixXd response = y;
  if (fix_first)
    for (Eigen::Index t = 0; t < T; ++t)
      if (!is_missing(y[t]))
        response(t, 0) -= X(t, 0);
  std::vector<Eigen::MatrixXd> cols;
  cols.reserve(static_cast<std::size_t>(free));
  for (Eigen::Index j = k - free; j < k; ++j)
    cols.emplace_back(X.col(j));
  std::vector<const Eigen::MatrixXd*> tracks{&response};
  for (const auto& c : cols)
    tracks.push_back(&c);
  detail::FilterWork w;
  detail::run_filter(idio_system(model), tracks, detail::keep_cross, w);
  post.precision = w.cross.bottomRightCorner(free, free);
  post.b = w.cross.col(0).tail(free);
  for (Eigen::Index j = 0; j < free; ++j)
    if (!(post.precision(j, j) > 0.0))
      throw Error(ErrorKind::data, "factor regressor has no variation over the observed sample");
  if (std::isfinite(prior_variance))
    post.precision.diagonal().array() += 1.0 / prior_variance;
  Eigen::LLT<Eigen::MatrixXd> llt(post.precision);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorKind::data, "loading posterior is degenerate");
  post.mean = llt.solve(post.b);
  return post;
}

struct LoadingDraw
{
  Eigen::VectorXd loadings;
  Eigen::MatrixXd idio;  // block_size x T, a fresh draw of the idiosyncratic block
};

// Draws the loadings of one series from loading_posterior, then redraws its
// idiosyncratic path given those loadings so the pair is a joint draw.
inline LoadingDraw draw_loadings(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, const IdioModel& model,
                                 double prior_variance, bool fix_first, Rng& rng)
{
  const Eigen::Index T = y.size();
  const Eigen::Index k = X.cols();
  const auto post = loading_posterior(y, X, model, prior_variance, fix_first);
  Eigen::VectorXd lambda(k);
  if (fix_first)
    lambda[0] = 1.0;
  if (post.mean.size() > 0)
    lambda.tail(post.mean.size()) = draw_from_precision(post.precision, post.b, rng);

  Eigen::MatrixXd resid(T, 1);
  const Eigen::VectorXd fit = X * lambda;
  for (Eigen::Index t = 0; t < T; ++t)
    resid(t, 0) = is_missing(y[t]) ? missing : y[t] - fit[t];
  return {std::move(lambda), simulation_smoother(idio_system(model), resid, rng)};
}

} // namespace hfei

#endif
