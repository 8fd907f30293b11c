#ifndef HFEI_SSMFILTER_HPP
#define HFEI_SSMFILTER_HPP

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hfei/error.hpp"
#include "hfei/linear_gaussian.hpp"
#include "hfei/random.hpp"

namespace hfei
{

struct FilterResult
{
  Eigen::MatrixXd predicted_mean;  // n_s x T, E[xi_t | y_1..y_{t-1}]
  std::vector<Eigen::MatrixXd> predicted_cov;
  Eigen::MatrixXd filtered_mean;  // n_s x T, E[xi_t | y_1..y_t]
  std::vector<Eigen::MatrixXd> filtered_cov;
  Eigen::VectorXd loglik_t;
  double loglik = 0.0;
};

// One sampled state trajectory, n_s x T.
using StateDraw = Eigen::MatrixXd;

namespace detail
{

struct StepRecord
{
  std::vector<Eigen::Index> observed;
  Eigen::MatrixXd gain;      // P H' S^{-1}, n_s x n_t
  Eigen::MatrixXd weighted;  // S^{-1} v for every track, n_t x tracks
};

enum Keep : unsigned
{
  keep_steps = 1u,
  keep_predicted_cov = 2u,
  keep_filtered = 4u,
  keep_cross = 8u
};

struct FilterWork
{
  std::vector<StepRecord> steps;
  std::vector<Eigen::MatrixXd> predicted_cov;
  std::vector<Eigen::MatrixXd> predicted_mean;  // one n_s x T matrix per track
  std::vector<Eigen::MatrixXd> filtered_mean;
  std::vector<Eigen::MatrixXd> filtered_cov;
  // Sum over t of V_t' S_t^{-1} V_t for the innovation matrix V_t (columns =
  // tracks); the GLS cross products of the tracks.
  Eigen::MatrixXd cross;
  Eigen::VectorXd loglik_t;
  double loglik = 0.0;
};

inline void symmetrize(Eigen::MatrixXd& P)
{
  for (Eigen::Index j = 0; j < P.cols(); ++j)
    for (Eigen::Index i = j + 1; i < P.rows(); ++i)
      P(i, j) = P(j, i) = 0.5 * (P(i, j) + P(j, i));
}

inline std::string period_label(Eigen::Index t) { return "period " + std::to_string(t); }

// Kalman filter run on several data tracks that share the missing-value
// pattern of tracks[0]; covariance recursions are computed once. Rows of H for
// missing entries are dropped at each period. The log-likelihood is that of
// tracks[0].
template <class Transition>
void run_filter(const StateSpaceSystem<Transition>& sys, const std::vector<const Eigen::MatrixXd*>& tracks,
                unsigned keep, FilterWork& w)
{
  const Eigen::MatrixXd& y0 = *tracks.front();
  const Eigen::Index T = y0.rows();
  const Eigen::Index n = sys.observables();
  const Eigen::Index ns = sys.states();
  const auto ntracks = static_cast<Eigen::Index>(tracks.size());
  if (T < 1)
    throw Error(ErrorKind::data, "filter needs at least one period");
  for (const auto* y : tracks)
    if (y->rows() != T || y->cols() != n)
      throw Error(ErrorKind::build, "data dimensions do not match the observation matrix");
  sys.check(T);

  w.loglik = 0.0;
  w.loglik_t = Eigen::VectorXd::Zero(T);
  if (keep & keep_steps)
    w.steps.assign(static_cast<std::size_t>(T), StepRecord{});
  if (keep & keep_predicted_cov)
    w.predicted_cov.resize(static_cast<std::size_t>(T));
  w.predicted_mean.assign(static_cast<std::size_t>(ntracks), Eigen::MatrixXd(ns, T));
  if (keep & keep_cross)
    w.cross = Eigen::MatrixXd::Zero(ntracks, ntracks);
  if (keep & keep_filtered) {
    w.filtered_mean.assign(static_cast<std::size_t>(ntracks), Eigen::MatrixXd(ns, T));
    w.filtered_cov.resize(static_cast<std::size_t>(T));
  }

  // Nonzero columns of each design row; rows are sparse for every frequency.
  std::vector<std::vector<Eigen::Index>> support(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < ns; ++j)
      if (sys.design(i, j) != 0.0)
        support[static_cast<std::size_t>(i)].push_back(j);

  std::vector<Eigen::VectorXd> a(static_cast<std::size_t>(ntracks), sys.initial_mean);
  Eigen::MatrixXd P = sys.initial_cov;
  std::vector<Eigen::Index> obs;
  obs.reserve(static_cast<std::size_t>(n));
  Eigen::MatrixXd M, HPH, S, s_inv, K, B, innovations, weighted;
  Eigen::LLT<Eigen::MatrixXd> llt;
  const double log2pi = std::log(2.0 * std::numbers::pi);

  for (Eigen::Index t = 0; t < T; ++t) {
    if (t > 0) {
      for (auto& ak : a)
        sys.transition.apply(ak);
      sys.transition.propagate(P);
      for (std::size_t k = 0; k < sys.shock_slots.size(); ++k) {
        const double sd = sys.shock_sd_at(t, static_cast<Eigen::Index>(k));
        if (!std::isfinite(sd))
          throw Error(ErrorKind::numeric, "non-finite volatility at " + period_label(t));
        P(sys.shock_slots[k], sys.shock_slots[k]) += sd * sd;
      }
      symmetrize(P);
    }
    for (Eigen::Index k = 0; k < ntracks; ++k)
      w.predicted_mean[static_cast<std::size_t>(k)].col(t) = a[static_cast<std::size_t>(k)];
    if (keep & keep_predicted_cov)
      w.predicted_cov[static_cast<std::size_t>(t)] = P;

    obs.clear();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double v = y0(t, i);
      if (std::isinf(v))
        throw Error(ErrorKind::numeric, "non-finite observation at " + period_label(t));
      if (!is_missing(v))
        obs.push_back(i);
    }
    const auto nt = static_cast<Eigen::Index>(obs.size());
    if (nt > 0) {
      // M = P H_t', HPH = H_t P H_t' from the nonzero design entries.
      M.setZero(ns, nt);
      HPH.setZero(nt, nt);
      for (Eigen::Index r = 0; r < nt; ++r)
        for (const auto j : support[static_cast<std::size_t>(obs[static_cast<std::size_t>(r)])])
          M.col(r).noalias() += sys.design(obs[static_cast<std::size_t>(r)], j) * P.col(j);
      for (Eigen::Index r = 0; r < nt; ++r)
        for (const auto j : support[static_cast<std::size_t>(obs[static_cast<std::size_t>(r)])])
          HPH.row(r).noalias() += sys.design(obs[static_cast<std::size_t>(r)], j) * M.row(j);
      S = HPH;
      S.diagonal().array() += sys.jitter;
      llt.compute(S);
      if (llt.info() != Eigen::Success)
        throw Error(ErrorKind::numeric, "innovation covariance not positive definite at " + period_label(t));
      s_inv.setIdentity(nt, nt);
      llt.solveInPlace(s_inv);
      K.noalias() = M.lazyProduct(s_inv);

      innovations.resize(nt, ntracks);
      weighted.resize(nt, ntracks);
      for (Eigen::Index k = 0; k < ntracks; ++k) {
        const Eigen::MatrixXd& y = *tracks[static_cast<std::size_t>(k)];
        auto& ak = a[static_cast<std::size_t>(k)];
        auto v = innovations.col(k);
        for (Eigen::Index r = 0; r < nt; ++r) {
          const auto i = obs[static_cast<std::size_t>(r)];
          double fit = 0.0;
          for (const auto j : support[static_cast<std::size_t>(i)])
            fit += sys.design(i, j) * ak[j];
          v[r] = y(t, i) - fit;
        }
        weighted.col(k).noalias() = s_inv.lazyProduct(v);
        ak.noalias() += K.lazyProduct(v);
        if (k == 0) {
          double logdet = 0.0;
          for (Eigen::Index r = 0; r < nt; ++r)
            logdet += 2.0 * std::log(llt.matrixLLT()(r, r));
          const double ll = -0.5 * (static_cast<double>(nt) * log2pi + logdet + v.dot(weighted.col(0)));
          if (!std::isfinite(ll))
            throw Error(ErrorKind::numeric, "non-finite log-likelihood at " + period_label(t));
          w.loglik_t[t] = ll;
          w.loglik += ll;
        }
      }
      if (keep & keep_cross)
        w.cross.noalias() += innovations.transpose().lazyProduct(weighted);

      // P - M S^-1 M' written as P - B B' with B = M L^-T, S = L L'. This is
      // the exact conditional covariance with measurement noise `jitter`.
      B = M;
      llt.matrixU().template solveInPlace<Eigen::OnTheRight>(B);
      for (Eigen::Index r = 0; r < nt; ++r)
        P.noalias() -= B.col(r) * B.col(r).transpose();
      symmetrize(P);

      if (keep & keep_steps) {
        auto& st = w.steps[static_cast<std::size_t>(t)];
        st.observed = obs;
        st.gain = K;
        st.weighted = weighted;
      }
    } else if (keep & keep_steps) {
      w.steps[static_cast<std::size_t>(t)] = StepRecord{};
    }

    if (keep & keep_filtered) {
      for (Eigen::Index k = 0; k < ntracks; ++k)
        w.filtered_mean[static_cast<std::size_t>(k)].col(t) = a[static_cast<std::size_t>(k)];
      w.filtered_cov[static_cast<std::size_t>(t)] = P;
    }
  }
}

// Fixed-interval state smoother (backward r-recursion) for the linear
// combination sum_k weights[k] * track_k of the filtered tracks.
template <class Transition>
Eigen::MatrixXd smooth_states(const StateSpaceSystem<Transition>& sys, const FilterWork& w,
                              const Eigen::VectorXd& weights)
{
  const Eigen::Index ns = sys.states();
  const auto T = static_cast<Eigen::Index>(w.steps.size());
  Eigen::MatrixXd out(ns, T);
  Eigen::VectorXd r = Eigen::VectorXd::Zero(ns);
  Eigen::VectorXd next(ns), u;
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    const auto& st = w.steps[static_cast<std::size_t>(t)];
    if (t == T - 1)
      next.setZero();
    else
      next = sys.transition.transpose_times(r);
    if (!st.observed.empty()) {
      u.noalias() = st.weighted * weights;
      u.noalias() -= st.gain.transpose() * next;
      for (std::size_t i = 0; i < st.observed.size(); ++i)
        next.noalias() += u[static_cast<Eigen::Index>(i)] * sys.design.row(st.observed[i]).transpose();
    }
    r.swap(next);
    auto col = out.col(t);
    col.noalias() = w.predicted_cov[static_cast<std::size_t>(t)] * r;
    for (std::size_t k = 0; k < w.predicted_mean.size(); ++k)
      if (weights[static_cast<Eigen::Index>(k)] != 0.0)
        col.noalias() += weights[static_cast<Eigen::Index>(k)] * w.predicted_mean[k].col(t);
  }
  return out;
}

// Unconditional draw of states (n_s x T) and observables (T x n).
template <class Transition>
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> simulate_system(const StateSpaceSystem<Transition>& sys, Eigen::Index T,
                                                            Rng& rng)
{
  const Eigen::Index ns = sys.states();
  Eigen::MatrixXd xi(ns, T);
  Eigen::LLT<Eigen::MatrixXd> llt(sys.initial_cov);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorKind::numeric, "initial state covariance not positive definite");
  Eigen::VectorXd x = sys.initial_mean + llt.matrixL() * standard_normal_vector(ns, rng);
  for (Eigen::Index t = 0; t < T; ++t) {
    if (t > 0) {
      sys.transition.apply(x);
      for (std::size_t k = 0; k < sys.shock_slots.size(); ++k)
        x[sys.shock_slots[k]] += sys.shock_sd_at(t, static_cast<Eigen::Index>(k)) * standard_normal(rng);
    }
    xi.col(t) = x;
  }
  Eigen::MatrixXd y = (sys.design * xi).transpose();
  return {std::move(xi), std::move(y)};
}

} // namespace detail

// Exact Gaussian filter with missing observations handled by row deletion.
// `data` is T x n with NaN for missing entries.
template <class Transition>
FilterResult kalman_filter(const StateSpaceSystem<Transition>& sys, const Eigen::MatrixXd& data)
{
  detail::FilterWork w;
  detail::run_filter(sys, {&data}, detail::keep_predicted_cov | detail::keep_filtered, w);
  FilterResult r;
  r.predicted_mean = std::move(w.predicted_mean.front());
  r.predicted_cov = std::move(w.predicted_cov);
  r.filtered_mean = std::move(w.filtered_mean.front());
  r.filtered_cov = std::move(w.filtered_cov);
  r.loglik_t = std::move(w.loglik_t);
  r.loglik = w.loglik;
  return r;
}

// Log-likelihood only; no per-period storage.
template <class Transition>
double log_likelihood(const StateSpaceSystem<Transition>& sys, const Eigen::MatrixXd& data)
{
  detail::FilterWork w;
  detail::run_filter(sys, {&data}, 0u, w);
  return w.loglik;
}

// E[xi_t | all observed data], n_s x T.
template <class Transition>
Eigen::MatrixXd smoothed_mean(const StateSpaceSystem<Transition>& sys, const Eigen::MatrixXd& data)
{
  detail::FilterWork w;
  detail::run_filter(sys, {&data}, detail::keep_steps | detail::keep_predicted_cov, w);
  return detail::smooth_states(sys, w, Eigen::VectorXd::Ones(1));
}

// Draw of the whole state path from p(xi_1..xi_T | y): simulate (xi+, y+) from
// the model, then correct xi+ by the smoothed mean of y - y+. The observed-data
// log-likelihood from the same filter pass is written to `loglik` when given.
template <class Transition>
StateDraw simulation_smoother(const StateSpaceSystem<Transition>& sys, const Eigen::MatrixXd& data, Rng& rng,
                              double* loglik = nullptr)
{
  const Eigen::Index T = data.rows();
  auto [xi_plus, y_plus] = detail::simulate_system(sys, T, rng);
  detail::FilterWork w;
  detail::run_filter(sys, {&data, &y_plus}, detail::keep_steps | detail::keep_predicted_cov, w);
  if (loglik)
    *loglik = w.loglik;
  Eigen::VectorXd weights(2);
  weights << 1.0, -1.0;
  return xi_plus + detail::smooth_states(sys, w, weights);
}

} // namespace hfei

#endif
