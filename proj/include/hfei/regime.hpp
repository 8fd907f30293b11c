#ifndef HFEI_REGIME_HPP
#define HFEI_REGIME_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "hfei/error.hpp"
#include "hfei/random.hpp"

namespace hfei
{

// Two-state switching mean with episode-specific levels:
// f_t = mu_{s_t, episode(t)} + e_t, e_t ~ N(0, 1/precision).
// State 1 is expansion (stays with probability p), state 0 recession (q).
struct RegimeSpec
{
  double m0 = -1.0, v0 = 1.0;  // recession episode means ~ N(m0, v0)
  double m1 = 1.0, v1 = 1.0;   // expansion episode means ~ N(m1, v1)
  double a_p = 9.0, b_p = 1.0;
  double a_q = 9.0, b_q = 1.0;
  double alpha = 1.0, beta = 1.0;  // Gamma(shape, rate) on the precision
  int iterations = 5000;
  int burn_in = 1000;
  double initial_prob = 0.5;  // P(s_1 = 1)
  bool standardize = true;    // fit on (f - mean) / sd
  bool ordered = true;        // recession means lie below every expansion mean

  void validate() const
  {
    if (!(v0 > 0.0) || !(v1 > 0.0) || !(a_p > 0.0) || !(b_p > 0.0) || !(a_q > 0.0) || !(b_q > 0.0) ||
        !(alpha > 0.0) || !(beta > 0.0))
      throw Error(ErrorKind::spec, "regime prior variances and Beta/Gamma hyperparameters must be positive");
    if (iterations <= 0 || burn_in < 0 || burn_in >= iterations)
      throw Error(ErrorKind::spec, "regime chain requires 0 <= burn_in < iterations");
    if (!(initial_prob > 0.0 && initial_prob < 1.0))
      throw Error(ErrorKind::spec, "initial regime probability must lie in (0, 1)");
  }
};

struct TransitionCounts
{
  int n11 = 0, n10 = 0, n00 = 0, n01 = 0;
};

inline TransitionCounts count_transitions(const Eigen::VectorXi& s)
{
  TransitionCounts c;
  for (Eigen::Index t = 1; t < s.size(); ++t) {
    if (s[t - 1] == 1)
      (s[t] == 1 ? c.n11 : c.n10) += 1;
    else
      (s[t] == 0 ? c.n00 : c.n01) += 1;
  }
  return c;
}

struct BetaParams
{
  double a = 1.0, b = 1.0;
};

// Conjugate Beta posteriors of p and q given a regime path.
inline std::pair<BetaParams, BetaParams> transition_posterior(const Eigen::VectorXi& s, const RegimeSpec& spec)
{
  const auto c = count_transitions(s);
  return {{spec.a_p + c.n11, spec.b_p + c.n10}, {spec.a_q + c.n00, spec.b_q + c.n01}};
}

struct Episode
{
  Eigen::Index begin = 0, end = 0;  // inclusive
  int regime = 0;
};

inline std::vector<Episode> episodes_of(const Eigen::VectorXi& s)
{
  std::vector<Episode> out;
  for (Eigen::Index t = 0; t < s.size(); ++t) {
    if (out.empty() || out.back().regime != s[t])
      out.push_back({t, t, s[t]});
    else
      out.back().end = t;
  }
  return out;
}

namespace detail
{

// Normal-mean conjugate update for a segment with n values summing to s1.
struct MeanPosterior
{
  double precision, b;
  double mean() const { return b / precision; }
};

inline MeanPosterior mean_posterior(double n, double s1, double sigma2, double m, double v)
{
  return {n / sigma2 + 1.0 / v, s1 / sigma2 + m / v};
}

// Draws a regime path given (p, q, sigma2) with every episode mean
// integrated out. back(r, t) is the log density of y_t..y_{T-1} given that an
// episode of regime r starts at t.
inline Eigen::VectorXi draw_regime_path(const Eigen::VectorXd& y, double p, double q, double sigma2,
                                        const RegimeSpec& spec, Rng& rng)
{
  const Eigen::Index T = y.size();
  Eigen::VectorXd c1(T + 1), c2(T + 1);
  c1[0] = c2[0] = 0.0;
  for (Eigen::Index t = 0; t < T; ++t) {
    c1[t + 1] = c1[t] + y[t];
    c2[t + 1] = c2[t] + y[t] * y[t];
  }
  const double stay[2] = {q, p};
  const double m[2] = {spec.m0, spec.m1}, v[2] = {spec.v0, spec.v1};
  // Parts of the segment term that depend only on the length n = 1..T.
  Eigen::MatrixXd fixed(2, T + 1), prec(2, T + 1);
  const double log_2pi_s2 = std::log(2.0 * std::numbers::pi * sigma2);
  for (int r = 0; r < 2; ++r)
    for (Eigen::Index n = 1; n <= T; ++n) {
      const double dn = static_cast<double>(n);
      fixed(r, n) = -0.5 * dn * log_2pi_s2 - 0.5 * std::log1p(dn * v[r] / sigma2) - 0.5 * m[r] * m[r] / v[r] +
                    (dn - 1.0) * std::log(stay[r]);
      prec(r, n) = dn / sigma2 + 1.0 / v[r];
    }
  const double leave[2] = {std::log1p(-q), std::log1p(-p)};
  Eigen::MatrixXd back(2, T);
  std::vector<double> w(static_cast<std::size_t>(T));
  // Fills w[0..T-a) with the log weight of each episode end e = a..T-1.
  auto terms = [&](int r, Eigen::Index a) {
    double top = -std::numeric_limits<double>::infinity();
    for (Eigen::Index e = a; e < T; ++e) {
      const Eigen::Index n = e - a + 1;
      const double b = (c1[e + 1] - c1[a]) / sigma2 + m[r] / v[r];
      double x = fixed(r, n) - 0.5 * (c2[e + 1] - c2[a]) / sigma2 + 0.5 * b * b / prec(r, n);
      if (e + 1 < T)
        x += leave[r] + back(1 - r, e + 1);
      w[static_cast<std::size_t>(n - 1)] = x;
      top = std::max(top, x);
    }
    return top;
  };
  for (Eigen::Index a = T - 1; a >= 0; --a)
    for (int r = 0; r < 2; ++r) {
      const double top = terms(r, a);
      double acc = 0.0;
      for (Eigen::Index k = 0; k < T - a; ++k)
        acc += std::exp(w[static_cast<std::size_t>(k)] - top);
      back(r, a) = top + std::log(acc);
    }

  Eigen::VectorXi s(T);
  const double l1 = std::log(spec.initial_prob) + back(1, 0);
  const double l0 = std::log1p(-spec.initial_prob) + back(0, 0);
  int r = uniform01(rng) < 1.0 / (1.0 + std::exp(l0 - l1)) ? 1 : 0;
  Eigen::Index a = 0;
  while (a < T) {
    const double top = terms(r, a);
    double total = 0.0;
    for (Eigen::Index k = 0; k < T - a; ++k)
      total += (w[static_cast<std::size_t>(k)] = std::exp(w[static_cast<std::size_t>(k)] - top));
    double u = uniform01(rng) * total;
    Eigen::Index e = a;
    for (; e + 1 < T; ++e) {
      u -= w[static_cast<std::size_t>(e - a)];
      if (u <= 0.0)
        break;
    }
    s.segment(a, e - a + 1).setConstant(r);
    a = e + 1;
    r = 1 - r;
  }
  return s;
}

} // namespace detail

struct DatedRecession
{
  Eigen::Index start = 0;                 // first index of the run above 0.5 containing the call
  Eigen::Index call = 0;                  // first index above 0.65
  std::optional<Eigen::Index> end_call;   // first index below 0.35 after the call
  std::optional<Eigen::Index> end;        // first index of the run below 0.5 containing the end call
};

// Recession dating on a probability path: called at the first value above
// 0.65, dated from the start of the surrounding run above 0.5; ended when the
// probability drops below 0.35, dated to the start of the surrounding run
// below 0.5. A recession still open at the end of the sample has no end.
inline std::vector<DatedRecession> date_recessions(const Eigen::VectorXd& prob)
{
  std::vector<DatedRecession> out;
  bool in = false;
  Eigen::Index above = -1, below = -1;  // start of the current run above / below 0.5
  for (Eigen::Index t = 0; t < prob.size(); ++t) {
    const double x = prob[t];
    if (x > 0.5) {
      if (above < 0)
        above = t;
      below = -1;
    } else if (x < 0.5) {
      if (below < 0)
        below = t;
      above = -1;
    } else {
      above = below = -1;
    }
    if (!in && x > 0.65) {
      out.push_back({above, t, std::nullopt, std::nullopt});
      in = true;
    } else if (in && x < 0.35) {
      out.back().end_call = t;
      out.back().end = below;
      in = false;
    }
  }
  return out;
}

struct RegimePosterior
{
  Eigen::VectorXd recession_prob;  // posterior mean of 1{s_t = 0}
  Eigen::VectorXd mean_path;       // posterior mean of mu_t, in input units
  Eigen::VectorXd p, q, precision;  // per kept draw (precision on the fitted scale)
  // Average episode mean of each regime per draw; a prior draw when the
  // regime is absent from the sampled path.
  Eigen::VectorXd mean0, mean1;
  Eigen::VectorXi episodes;  // number of episodes per draw
  double centre = 0.0, scale = 1.0;  // standardization applied before fitting
  std::vector<DatedRecession> recessions;
};

inline RegimePosterior fit_regime(const Eigen::VectorXd& factor, const RegimeSpec& spec, std::uint64_t seed)
{
  spec.validate();
  const Eigen::Index T = factor.size();
  if (T < 2)
    throw Error(ErrorKind::data, "regime model needs at least two periods");
  if (!factor.allFinite())
    throw Error(ErrorKind::data, "factor path contains non-finite values");
  RegimePosterior out;
  Eigen::VectorXd y = factor;
  const double mean = y.mean();
  const double sd = std::sqrt((y.array() - mean).square().sum() / (T - 1.0));
  if (spec.standardize) {
    if (!(sd > 0.0))
      throw Error(ErrorKind::data, "constant factor path cannot be standardized");
    out.centre = mean;
    out.scale = sd;
    y = ((y.array() - mean) / sd).matrix();
  }

  Rng rng(seed);
  const int K = spec.iterations - spec.burn_in;
  out.recession_prob = Eigen::VectorXd::Zero(T);
  out.mean_path = Eigen::VectorXd::Zero(T);
  out.p.resize(K);
  out.q.resize(K);
  out.precision.resize(K);
  out.mean0.resize(K);
  out.mean1.resize(K);
  out.episodes.resize(K);

  double p = 0.9, q = 0.9;
  const double var = (y.array() - y.mean()).square().sum() / (T - 1.0);
  double sigma2 = var > 0.0 ? 0.25 * var : 1.0;
  Eigen::VectorXd mu(T);
  for (int it = 0; it < spec.iterations; ++it) {
    const Eigen::VectorXi s = detail::draw_regime_path(y, p, q, sigma2, spec, rng);
    const auto eps = episodes_of(s);

    // Episode means: expansions first, recessions truncated below them.
    double lowest_expansion = std::numeric_limits<double>::infinity();
    double sum_mean[2] = {0.0, 0.0};
    int count[2] = {0, 0};
    for (int pass : {1, 0})
      for (std::size_t k = 0; k < eps.size(); ++k) {
        const auto& e = eps[k];
        if (e.regime != pass)
          continue;
        const double n = static_cast<double>(e.end - e.begin + 1);
        const auto mp = detail::mean_posterior(n, y.segment(e.begin, e.end - e.begin + 1).sum(), sigma2,
                                               pass ? spec.m1 : spec.m0, pass ? spec.v1 : spec.v0);
        const double post_sd = 1.0 / std::sqrt(mp.precision);
        double x;
        if (pass == 0 && spec.ordered && std::isfinite(lowest_expansion))
          x = truncated_normal_above(mp.mean(), post_sd, lowest_expansion, rng);
        else
          x = mp.mean() + post_sd * standard_normal(rng);
        if (pass == 1)
          lowest_expansion = std::min(lowest_expansion, x);
        mu.segment(e.begin, e.end - e.begin + 1).setConstant(x);
        sum_mean[pass] += x;
        ++count[pass];
      }

    const auto [bp, bq] = transition_posterior(s, spec);
    p = beta(bp.a, bp.b, rng);
    q = beta(bq.a, bq.b, rng);
    const double ssr = (y - mu).squaredNorm();
    sigma2 = 1.0 / gamma_rate(spec.alpha + 0.5 * T, spec.beta + 0.5 * ssr, rng);

    const int j = it - spec.burn_in;
    if (j < 0)
      continue;
    out.p[j] = p;
    out.q[j] = q;
    out.precision[j] = 1.0 / sigma2;
    out.mean1[j] = count[1] ? sum_mean[1] / count[1] : spec.m1 + std::sqrt(spec.v1) * standard_normal(rng);
    out.mean0[j] = count[0] ? sum_mean[0] / count[0] : spec.m0 + std::sqrt(spec.v0) * standard_normal(rng);
    out.episodes[j] = static_cast<int>(eps.size());
    for (Eigen::Index t = 0; t < T; ++t)
      out.recession_prob[t] += s[t] == 0;
    out.mean_path += mu;
  }
  out.recession_prob /= K;
  out.mean_path = (out.mean_path / K).array() * out.scale + out.centre;
  out.recessions = date_recessions(out.recession_prob);
  return out;
}

} // namespace hfei

#endif
