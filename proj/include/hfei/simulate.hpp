#ifndef HFEI_SIMULATE_HPP
#define HFEI_SIMULATE_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hfei/calendar.hpp"
#include "hfei/error.hpp"
#include "hfei/model_spec.hpp"
#include "hfei/panel.hpp"
#include "hfei/random.hpp"
#include "hfei/samplers.hpp"
#include "hfei/statespace.hpp"

namespace hfei
{

// Two-state Markov mean for the factor: state 1 (expansion) persists with
// probability p, state 0 (recession) with probability q.
struct RegimeTruth
{
  double mu0 = -2.0;
  double mu1 = 2.0;
  double p = 0.95;
  double q = 0.95;
};

struct TrueParams
{
  Eigen::MatrixXd loadings;  // n x (s+1)
  Eigen::VectorXd phi;       // p_f
  Eigen::MatrixXd rho;       // n x p_q
  double factor_sd = 1.0;    // initial sigma of the factor innovation
  Eigen::VectorXd idio_sd;   // n, initial sigmas (zero switches the component off)
  double factor_omega2 = 0.0;  // log-variance random-walk variance; 0 keeps it constant
  Eigen::VectorXd idio_omega2;  // n, or empty for constant
  std::optional<RegimeTruth> regime;
  // Leading periods masked per series (empty: none).
  std::vector<Eigen::Index> leading_missing;
};

struct SimulationTruth
{
  Eigen::VectorXd factor;        // T
  Eigen::MatrixXd idio;          // T x n
  Eigen::MatrixXd latent;        // T x n weekly y_w = Lambda(L) f + u
  Eigen::VectorXd factor_sd;     // T
  Eigen::MatrixXd idio_sd;       // T x n
  Eigen::VectorXi regime;        // T, 1 = expansion (empty without regimes)
  Eigen::VectorXd factor_shocks; // T, sigma_t * eps_t
};

struct SimulatedPanel
{
  GrowthPanel panel;
  SimulationTruth truth;
};

// Draws a growth panel from the model. Series follow spec ordering
// (quarterly, monthly, weekly); series 0 is named "gdp". Monthly and quarterly
// observations are exact 4- and 12-week means of the weekly latent values and
// sit at month-end and quarter-end stamps. The spine starts at `start`, which
// must be the first week of a quarter.
inline SimulatedPanel simulate_panel(const TrueParams& tp, const ModelSpec& spec, Eigen::Index T, std::uint64_t seed,
                                     PseudoWeekStamp start = {2004, 1, 1}, Eigen::Index burn_in = 200)
{
  spec.validate();
  const int n = spec.n();
  if (T < 1)
    throw Error(ErrorKind::spec, "simulation needs at least one period");
  if (start != quarter_start(start))
    throw Error(ErrorKind::spec, "simulated spine must start at a quarter start");
  if (tp.loadings.rows() != n || tp.loadings.cols() != spec.s + 1 || tp.phi.size() != spec.p_f ||
      tp.rho.rows() != n || tp.rho.cols() != spec.p_q || tp.idio_sd.size() != n ||
      (tp.idio_omega2.size() != 0 && tp.idio_omega2.size() != n))
    throw Error(ErrorKind::build, "true parameters do not match the specification");
  if (!is_stationary(tp.phi))
    throw Error(ErrorKind::spec, "factor AR coefficients are explosive");
  for (int i = 0; i < n; ++i)
    if (!is_stationary(tp.rho.row(i).transpose()))
      throw Error(ErrorKind::spec, "idiosyncratic AR coefficients of series " + std::to_string(i) + " are explosive");
  if (!(tp.factor_sd > 0.0) || (tp.idio_sd.array() < 0.0).any())
    throw Error(ErrorKind::spec, "innovation scales must be positive");

  Rng rng(seed);
  const Eigen::Index pre = burn_in + 12 + spec.s;  // periods before t = 0
  const Eigen::Index total = pre + T;

  // Factor: optional regime mean plus AR(p_f) with optional SV.
  Eigen::VectorXd h_f(total), g = Eigen::VectorXd::Zero(total), shocks = Eigen::VectorXd::Zero(total);
  h_f[0] = 2.0 * std::log(tp.factor_sd);
  for (Eigen::Index t = 1; t < total; ++t)
    h_f[t] = h_f[t - 1] + std::sqrt(tp.factor_omega2) * standard_normal(rng);
  for (Eigen::Index t = 0; t < total; ++t) {
    double v = 0.0;
    for (int j = 0; j < spec.p_f; ++j)
      if (t - 1 - j >= 0)
        v += tp.phi[j] * g[t - 1 - j];
    shocks[t] = std::exp(0.5 * h_f[t]) * standard_normal(rng);
    g[t] = v + shocks[t];
  }
  Eigen::VectorXi regime;
  Eigen::VectorXd f = g;
  if (tp.regime) {
    const auto& r = *tp.regime;
    regime.resize(total);
    regime[0] = uniform01(rng) < 0.5 ? 1 : 0;
    for (Eigen::Index t = 1; t < total; ++t) {
      const double stay = regime[t - 1] == 1 ? r.p : r.q;
      regime[t] = uniform01(rng) < stay ? regime[t - 1] : 1 - regime[t - 1];
    }
    for (Eigen::Index t = 0; t < total; ++t)
      f[t] += regime[t] == 1 ? r.mu1 : r.mu0;
  }

  // Idiosyncratic AR(p_q) components and weekly latent observables.
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(total, n), h_u(total, n), latent(total, n);
  for (int i = 0; i < n; ++i) {
    const double om = tp.idio_omega2.size() ? tp.idio_omega2[i] : 0.0;
    const bool active = tp.idio_sd[i] > 0.0;
    h_u(0, i) = active ? 2.0 * std::log(tp.idio_sd[i]) : -std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 1; t < total; ++t)
      h_u(t, i) = active ? h_u(t - 1, i) + std::sqrt(om) * standard_normal(rng) : h_u(0, i);
    for (Eigen::Index t = 0; t < total; ++t) {
      double v = 0.0;
      for (int j = 0; j < spec.p_q; ++j)
        if (t - 1 - j >= 0)
          v += tp.rho(i, j) * u(t - 1 - j, i);
      u(t, i) = v + (active ? std::exp(0.5 * h_u(t, i)) * standard_normal(rng) : 0.0);
    }
    for (Eigen::Index t = 0; t < total; ++t) {
      double v = u(t, i);
      for (int l = 0; l <= spec.s; ++l)
        v += tp.loadings(i, l) * (t - l >= 0 ? f[t - l] : 0.0);
      latent(t, i) = v;
    }
  }

  SimulatedPanel out;
  auto& P = out.panel;
  P.index = stamp_range(start, stamp_at(start, T - 1));
  P.values = Eigen::MatrixXd::Constant(T, n, missing);
  auto layout = build_layout(spec);
  for (int i = 0; i < n; ++i) {
    const Frequency freq = layout.frequency[static_cast<std::size_t>(i)];
    std::string id;
    if (i == 0)
      id = "gdp";
    else if (freq == Frequency::Quarterly)
      id = "q" + std::to_string(i);
    else if (freq == Frequency::Monthly)
      id = "m" + std::to_string(i - spec.n_q);
    else
      id = "w" + std::to_string(i - spec.n_q - spec.n_m);
    const int w = aggregation_window(freq);
    const Eigen::Index lead =
        i < static_cast<int>(tp.leading_missing.size()) ? tp.leading_missing[static_cast<std::size_t>(i)] : 0;
    for (Eigen::Index t = lead; t < T; ++t) {
      const auto& stamp = P.index[static_cast<std::size_t>(t)];
      const bool observed = freq == Frequency::Weekly || (freq == Frequency::Monthly && stamp.is_month_end()) ||
                            (freq == Frequency::Quarterly && stamp.is_quarter_end());
      if (!observed)
        continue;
      double acc = 0.0;
      for (int j = 0; j < w; ++j)
        acc += latent(pre + t - j, i);
      P.values(t, i) = acc / w;
    }
    SeriesMeta meta{id, freq, SeriesKind::Stock, {}};
    for (Eigen::Index t = 0; t < T; ++t)
      if (!is_missing(P.values(t, i))) {
        meta.first_obs = P.index[static_cast<std::size_t>(t)];
        break;
      }
    P.meta.push_back(meta);
  }

  auto& tr = out.truth;
  tr.factor = f.tail(T);
  tr.idio = u.bottomRows(T);
  tr.latent = latent.bottomRows(T);
  tr.factor_sd = (0.5 * h_f.tail(T).array()).exp().matrix();
  tr.idio_sd = (0.5 * h_u.bottomRows(T).array()).exp().matrix();
  tr.factor_shocks = shocks.tail(T);
  if (tp.regime)
    tr.regime = regime.tail(T);
  return out;
}

// Writes a growth panel as raw levels in the input format
// `series_id,date,value`, one row per observation, dated at the first day of
// the observation's pseudo-week (weekly), month (monthly) or quarter
// (quarterly). Levels are exp of cumulated growth: log level 0 throughout the
// year before the panel, then ln Y_t = ln Y_{t-48} + g_t. Stamps with missing
// growth produce no row, which also loses the growth 48 weeks later.
inline void write_levels_csv(std::ostream& os, const GrowthPanel& panel)
{
  const Eigen::Index T = panel.periods();
  const PseudoWeekStamp origin{panel.index.front().year - 1, panel.index.front().month, panel.index.front().week};
  os << "series_id,date,value\n";
  os.precision(17);
  for (Eigen::Index i = 0; i < panel.series(); ++i) {
    const auto& meta = panel.meta[static_cast<std::size_t>(i)];
    std::vector<double> log_level(static_cast<std::size_t>(T + 48), 0.0);
    std::vector<bool> present(static_cast<std::size_t>(T + 48), false);
    for (Eigen::Index t = 0; t < 48; ++t) {
      const auto s = stamp_at(origin, t);
      present[static_cast<std::size_t>(t)] = meta.frequency == Frequency::Weekly ||
                                             (meta.frequency == Frequency::Monthly && s.is_month_end()) ||
                                             (meta.frequency == Frequency::Quarterly && s.is_quarter_end());
    }
    for (Eigen::Index t = 0; t < T; ++t) {
      const double gv = panel.values(t, i);
      const auto k = static_cast<std::size_t>(t + 48);
      log_level[k] = log_level[k - 48] + (is_missing(gv) ? 0.0 : gv);
      present[k] = !is_missing(gv);
    }
    for (Eigen::Index k = 0; k < T + 48; ++k) {
      if (!present[static_cast<std::size_t>(k)])
        continue;
      const auto s = stamp_at(origin, k);
      PseudoWeekStamp day_stamp = s;
      if (meta.frequency == Frequency::Monthly)
        day_stamp.week = 1;
      else if (meta.frequency == Frequency::Quarterly)
        day_stamp = quarter_start(s);
      os << meta.id << ',' << format_date(first_day(day_stamp)) << ',' << std::exp(log_level[static_cast<std::size_t>(k)])
         << '\n';
    }
  }
}

// Metadata rows matching write_levels_csv: `series_id,frequency,kind,zero_fill`.
inline void write_metadata_csv(std::ostream& os, const GrowthPanel& panel)
{
  os << "series_id,frequency,kind,zero_fill\n";
  for (const auto& m : panel.meta)
    os << m.id << ',' << to_string(m.frequency) << ',' << to_string(m.kind) << ",0\n";
}

// Two-regime path f_t = mu_{s_t} + sigma e_t for the switching model.
struct RegimePath
{
  Eigen::VectorXd values;
  Eigen::VectorXi regime;  // 1 = expansion
};

inline RegimePath simulate_regime_path(Eigen::Index T, const RegimeTruth& r, double sigma, std::uint64_t seed)
{
  Rng rng(seed);
  RegimePath out{Eigen::VectorXd(T), Eigen::VectorXi(T)};
  for (Eigen::Index t = 0; t < T; ++t) {
    if (t == 0)
      out.regime[0] = uniform01(rng) < 0.5 ? 1 : 0;
    else {
      const double stay = out.regime[t - 1] == 1 ? r.p : r.q;
      out.regime[t] = uniform01(rng) < stay ? out.regime[t - 1] : 1 - out.regime[t - 1];
    }
    out.values[t] = (out.regime[t] == 1 ? r.mu1 : r.mu0) + sigma * standard_normal(rng);
  }
  return out;
}

} // namespace hfei

#endif
