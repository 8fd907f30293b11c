#ifndef HFEI_PANEL_HPP
#define HFEI_PANEL_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "hfei/calendar.hpp"
#include "hfei/error.hpp"

namespace hfei
{

enum class Frequency
{
  Weekly,
  Monthly,
  Quarterly
};

inline std::string_view to_string(Frequency f)
{
  switch (f) {
  case Frequency::Weekly: return "weekly";
  case Frequency::Monthly: return "monthly";
  case Frequency::Quarterly: return "quarterly";
  }
  return "unknown";
}

inline Frequency parse_frequency(std::string_view s)
{
  if (s == "weekly" || s == "w")
    return Frequency::Weekly;
  if (s == "monthly" || s == "m")
    return Frequency::Monthly;
  if (s == "quarterly" || s == "q")
    return Frequency::Quarterly;
  throw Error(ErrorKind::input, "unknown frequency '" + std::string(s) + "'");
}

inline SeriesKind parse_kind(std::string_view s)
{
  if (s == "stock")
    return SeriesKind::Stock;
  if (s == "flow")
    return SeriesKind::Flow;
  throw Error(ErrorKind::input, "unknown series kind '" + std::string(s) + "'");
}

inline std::string_view to_string(SeriesKind k) { return k == SeriesKind::Stock ? "stock" : "flow"; }

struct SeriesMeta
{
  std::string id;
  Frequency frequency = Frequency::Weekly;
  SeriesKind kind = SeriesKind::Stock;
  PseudoWeekStamp first_obs{};
};

// Columns aligned to a weekly spine. Monthly series are observed only at week 4
// of each month and quarterly series only at week 4 of quarter-ending months.
// Columns are ordered quarterly, monthly, weekly.
struct PanelData
{
  std::vector<PseudoWeekStamp> index;
  Eigen::MatrixXd values;  // spine length x series, NaN = missing
  std::vector<SeriesMeta> meta;

  Eigen::Index periods() const { return values.rows(); }
  Eigen::Index series() const { return values.cols(); }

  Eigen::Index count(Frequency f) const
  {
    return std::count_if(meta.begin(), meta.end(), [f](const SeriesMeta& m) { return m.frequency == f; });
  }

  std::optional<Eigen::Index> find(std::string_view id) const
  {
    for (std::size_t i = 0; i < meta.size(); ++i)
      if (meta[i].id == id)
        return static_cast<Eigen::Index>(i);
    return std::nullopt;
  }
};

struct MixedPanel : PanelData
{
};

// Year-over-year log growth rates on the same spine.
struct GrowthPanel : PanelData
{
};

namespace detail
{

inline int frequency_rank(Frequency f)
{
  switch (f) {
  case Frequency::Quarterly: return 0;
  case Frequency::Monthly: return 1;
  case Frequency::Weekly: return 2;
  }
  return 3;
}

} // namespace detail

inline void validate_panel(const PanelData& p)
{
  const auto T = static_cast<Eigen::Index>(p.index.size());
  if (p.values.rows() != T || p.values.cols() != static_cast<Eigen::Index>(p.meta.size()))
    throw Error(ErrorKind::input, "panel columns do not match spine length or metadata");
  for (std::size_t i = 1; i < p.index.size(); ++i)
    if (stamp_index(p.index[i], p.index[i - 1]) != 1)
      throw Error(ErrorKind::ordering, "panel spine is not a consecutive run of pseudo-weeks");
  int last_rank = -1;
  for (std::size_t j = 0; j < p.meta.size(); ++j) {
    const auto& m = p.meta[j];
    const int rank = detail::frequency_rank(m.frequency);
    if (rank < last_rank)
      throw Error(ErrorKind::input, "series must be ordered quarterly, monthly, weekly");
    last_rank = rank;
    for (Eigen::Index t = 0; t < T; ++t) {
      if (is_missing(p.values(t, j)))
        continue;
      const auto& s = p.index[static_cast<std::size_t>(t)];
      if (std::isinf(p.values(t, j)))
        throw Error(ErrorKind::numeric, "series '" + m.id + "' has a non-finite value");
      if (m.frequency == Frequency::Monthly && !s.is_month_end())
        throw Error(ErrorKind::input, "monthly series '" + m.id + "' observed off month-end");
      if (m.frequency == Frequency::Quarterly && !s.is_quarter_end())
        throw Error(ErrorKind::input, "quarterly series '" + m.id + "' observed off quarter-end");
    }
  }
}

struct SeriesInput
{
  SeriesMeta meta;
  std::map<PseudoWeekStamp, double> values;
};

// Aligns series onto a common spine running from the start of the first
// quarter with data to the end of the last one. `lead` (typically GDP) is put
// first among the quarterly series.
inline MixedPanel assemble_panel(std::vector<SeriesInput> inputs, std::string_view lead = {})
{
  if (inputs.empty())
    throw Error(ErrorKind::data, "empty panel: no series");
  std::optional<PseudoWeekStamp> lo, hi;
  for (const auto& in : inputs)
    for (const auto& [s, v] : in.values) {
      if (is_missing(v))
        continue;
      if (!lo || s < *lo)
        lo = s;
      if (!hi || s > *hi)
        hi = s;
    }
  if (!lo)
    throw Error(ErrorKind::data, "empty panel: no observations");

  std::stable_sort(inputs.begin(), inputs.end(), [&](const SeriesInput& a, const SeriesInput& b) {
    const int ra = detail::frequency_rank(a.meta.frequency);
    const int rb = detail::frequency_rank(b.meta.frequency);
    if (ra != rb)
      return ra < rb;
    return !lead.empty() && a.meta.id == lead && b.meta.id != lead;
  });

  MixedPanel p;
  const PseudoWeekStamp origin = quarter_start(*lo);
  p.index = stamp_range(origin, quarter_end(*hi));
  const auto T = static_cast<Eigen::Index>(p.index.size());
  p.values = Eigen::MatrixXd::Constant(T, static_cast<Eigen::Index>(inputs.size()), missing);
  for (std::size_t j = 0; j < inputs.size(); ++j) {
    auto meta = inputs[j].meta;
    bool seen = false;
    for (const auto& [s, v] : inputs[j].values) {
      const auto t = stamp_index(s, origin);
      p.values(t, static_cast<Eigen::Index>(j)) = v;
      if (!seen && !is_missing(v)) {
        meta.first_obs = s;
        seen = true;
      }
    }
    for (std::size_t k = 0; k < j; ++k)
      if (p.meta[k].id == meta.id)
        throw Error(ErrorKind::input, "duplicate series id '" + meta.id + "'");
    p.meta.push_back(std::move(meta));
  }
  validate_panel(p);
  return p;
}

// ln Y_t - ln Y_{t-48} on the spine. Monthly and quarterly observations sit 48
// spine positions after their same-period value of the previous year, so one
// lag serves every frequency.
inline GrowthPanel yoy_transform(const MixedPanel& panel)
{
  validate_panel(panel);
  GrowthPanel g;
  g.index = panel.index;
  g.meta = panel.meta;
  const auto T = panel.periods();
  g.values = Eigen::MatrixXd::Constant(T, panel.series(), missing);
  for (Eigen::Index j = 0; j < panel.series(); ++j) {
    for (Eigen::Index t = 0; t < T; ++t) {
      const double y = panel.values(t, j);
      if (!is_missing(y) && y <= 0.0)
        throw Error(ErrorKind::transform, "series '" + panel.meta[j].id + "' has non-positive level at " +
                                              format_date(first_day(panel.index[t])) + " (week " +
                                              std::to_string(panel.index[t].week) + ")");
    }
    for (Eigen::Index t = weeks_per_year; t < T; ++t) {
      const double y = panel.values(t, j);
      const double y0 = panel.values(t - weeks_per_year, j);
      if (!is_missing(y) && !is_missing(y0))
        g.values(t, j) = std::log(y) - std::log(y0);
    }
    auto& first = g.meta[j].first_obs;
    for (Eigen::Index t = 0; t < T; ++t)
      if (!is_missing(g.values(t, j))) {
        first = g.index[t];
        break;
      }
  }
  return g;
}

struct ImputationResult
{
  Eigen::VectorXd values;
  int month_end_filled = 0;
  int neighbor_filled = 0;
  std::vector<Eigen::Index> unresolved;  // gaps with fewer than two neighbours
};

// Fills weekly gaps: a missing week-4 value takes the month's anchor value when
// one exists; the remaining gaps take the mean of the nearest observed values
// on either side. Gaps at the series boundary stay missing.
inline ImputationResult impute_weekly_gaps(std::span<const PseudoWeekStamp> index, const Eigen::VectorXd& weekly,
                                           const Eigen::VectorXd& monthly_anchor)
{
  const auto T = weekly.size();
  if (static_cast<Eigen::Index>(index.size()) != T || (monthly_anchor.size() != 0 && monthly_anchor.size() != T))
    throw Error(ErrorKind::input, "imputation inputs are not aligned to the spine");
  ImputationResult r;
  r.values = weekly;
  if (monthly_anchor.size() == T) {
    for (Eigen::Index t = 0; t < T; ++t)
      if (index[t].is_month_end() && is_missing(r.values[t]) && !is_missing(monthly_anchor[t])) {
        r.values[t] = monthly_anchor[t];
        ++r.month_end_filled;
      }
  }
  const Eigen::VectorXd base = r.values;
  Eigen::Index prev = -1;
  for (Eigen::Index t = 0; t < T; ++t) {
    if (!is_missing(base[t])) {
      prev = t;
      continue;
    }
    Eigen::Index next = t + 1;
    while (next < T && is_missing(base[next]))
      ++next;
    if (prev < 0 || next >= T) {
      r.unresolved.push_back(t);
      continue;
    }
    r.values[t] = 0.5 * (base[prev] + base[next]);
    ++r.neighbor_filled;
  }
  return r;
}

// Fills missing target entries from the least-squares fit
//   target = a + b * proxy + c * 1{stamp >= break_stamp}
// on the pairs where both are observed (restricted to stamps >= fit_from when
// given). Observed target values pass through untouched.
inline Eigen::VectorXd proxy_interpolate(std::span<const PseudoWeekStamp> stamps, const Eigen::VectorXd& target,
                                         const Eigen::VectorXd& proxy, const PseudoWeekStamp& break_stamp,
                                         std::optional<PseudoWeekStamp> fit_from = std::nullopt)
{
  const auto n = target.size();
  if (proxy.size() != n || static_cast<Eigen::Index>(stamps.size()) != n)
    throw Error(ErrorKind::input, "proxy interpolation inputs are not aligned");
  auto in_range = [&](Eigen::Index t) { return !fit_from || !(stamps[t] < *fit_from); };

  std::vector<Eigen::Index> pairs;
  for (Eigen::Index t = 0; t < n; ++t)
    if (in_range(t) && !is_missing(target[t]) && !is_missing(proxy[t]))
      pairs.push_back(t);
  if (pairs.size() < 4)
    throw Error(ErrorKind::data, "proxy interpolation needs at least 4 observed pairs, got " +
                                     std::to_string(pairs.size()));

  int post = 0;
  for (auto t : pairs)
    post += !(stamps[t] < break_stamp);
  // A dummy that is constant over the fit sample is collinear with the constant.
  const bool use_dummy = post > 0 && post < static_cast<int>(pairs.size());
  const Eigen::Index k = use_dummy ? 3 : 2;

  Eigen::MatrixXd X(static_cast<Eigen::Index>(pairs.size()), k);
  Eigen::VectorXd y(static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto t = pairs[i];
    const auto r = static_cast<Eigen::Index>(i);
    X(r, 0) = 1.0;
    X(r, 1) = proxy[t];
    if (use_dummy)
      X(r, 2) = stamps[t] < break_stamp ? 0.0 : 1.0;
    y[r] = target[t];
  }
  const Eigen::VectorXd beta = X.colPivHouseholderQr().solve(y);

  Eigen::VectorXd out = target;
  for (Eigen::Index t = 0; t < n; ++t) {
    if (!is_missing(target[t]) || is_missing(proxy[t]) || !in_range(t))
      continue;
    double fit = beta[0] + beta[1] * proxy[t];
    if (use_dummy && !(stamps[t] < break_stamp))
      fit += beta[2];
    out[t] = fit;
  }
  return out;
}

// Subtracts each column's mean over its observed entries.
template <class Panel>
std::pair<Panel, Eigen::VectorXd> demean(const Panel& panel)
{
  Panel out = panel;
  Eigen::VectorXd means = Eigen::VectorXd::Zero(panel.series());
  for (Eigen::Index j = 0; j < panel.series(); ++j) {
    double sum = 0.0;
    int count = 0;
    for (Eigen::Index t = 0; t < panel.periods(); ++t)
      if (!is_missing(panel.values(t, j))) {
        sum += panel.values(t, j);
        ++count;
      }
    means[j] = count > 0 ? sum / count : 0.0;
    for (Eigen::Index t = 0; t < panel.periods(); ++t)
      if (!is_missing(out.values(t, j)))
        out.values(t, j) -= means[j];
  }
  return {std::move(out), std::move(means)};
}

} // namespace hfei

#endif
