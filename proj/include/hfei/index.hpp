#ifndef HFEI_INDEX_HPP
#define HFEI_INDEX_HPP

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "hfei/calendar.hpp"
#include "hfei/error.hpp"

namespace hfei
{

struct IndexSeries
{
  std::vector<PseudoWeekStamp> stamps;
  Eigen::VectorXd mean, median, p16, p84;
  // Affine map x -> gdp_mean + gdp_sd * (x - factor_mean) / factor_sd.
  double factor_mean = 0.0, factor_sd = 1.0, gdp_mean = 0.0, gdp_sd = 1.0;

  double scale(double x) const { return gdp_mean + gdp_sd * (x - factor_mean) / factor_sd; }
};

// Linear-interpolation quantile (type 7) of an unsorted sample.
inline double sample_quantile(std::vector<double> v, double prob)
{
  if (v.empty())
    throw Error(ErrorKind::data, "quantile of an empty sample");
  const double pos = prob * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(lo), v.end());
  const double a = v[lo];
  const double b = hi == lo ? a : *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(lo) + 1, v.end());
  return a + (pos - static_cast<double>(lo)) * (b - a);
}

inline std::pair<double, double> mean_and_sd(const Eigen::VectorXd& x)
{
  const double m = x.mean();
  const double sd = x.size() > 1 ? std::sqrt((x.array() - m).square().sum() / (x.size() - 1.0)) : 0.0;
  return {m, sd};
}

// Scales every factor draw (rows of K x T) with the moments of the
// posterior-mean path and of the observed GDP growth values, then summarizes
// each period across draws.
inline IndexSeries scale_index(const Eigen::MatrixXd& factor_draws, const Eigen::VectorXd& gdp_growth,
                               std::vector<PseudoWeekStamp> stamps)
{
  if (factor_draws.rows() == 0 || factor_draws.cols() == 0)
    throw Error(ErrorKind::data, "no factor draws to scale");
  if (static_cast<Eigen::Index>(stamps.size()) != factor_draws.cols())
    throw Error(ErrorKind::build, "stamps do not match the factor draws");
  std::vector<double> g;
  for (double x : gdp_growth)
    if (!is_missing(x))
      g.push_back(x);
  if (g.size() < 8)
    throw Error(ErrorKind::data, "at least 8 GDP growth observations are needed to scale the index");
  IndexSeries out;
  out.stamps = std::move(stamps);
  const Eigen::VectorXd mean_path = factor_draws.colwise().mean().transpose();
  std::tie(out.factor_mean, out.factor_sd) = mean_and_sd(mean_path);
  std::tie(out.gdp_mean, out.gdp_sd) = mean_and_sd(Eigen::Map<const Eigen::VectorXd>(g.data(), Eigen::Index(g.size())));
  if (!(out.factor_sd > 0.0))
    throw Error(ErrorKind::data, "posterior-mean factor has zero variance");

  const Eigen::Index T = factor_draws.cols();
  out.mean.resize(T);
  out.median.resize(T);
  out.p16.resize(T);
  out.p84.resize(T);
  std::vector<double> col(static_cast<std::size_t>(factor_draws.rows()));
  for (Eigen::Index t = 0; t < T; ++t) {
    for (Eigen::Index k = 0; k < factor_draws.rows(); ++k)
      col[static_cast<std::size_t>(k)] = out.scale(factor_draws(k, t));
    out.mean[t] = out.scale(mean_path[t]);
    out.median[t] = sample_quantile(col, 0.5);
    out.p16[t] = sample_quantile(col, 0.16);
    out.p84[t] = sample_quantile(col, 0.84);
  }
  return out;
}

// Decimal text with 17 significant digits, enough to read back the same double.
inline std::string format_real(double x)
{
  if (is_missing(x))
    return "";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return std::string(buf, r.ptr);
}

inline double parse_real_field(std::string_view s)
{
  if (s.empty())
    return missing;
  double x = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || p != s.data() + s.size())
    throw Error(ErrorKind::input, "'" + std::string(s) + "' is not a number");
  return x;
}

// Columns: date (first day of the pseudo-week), week (1-4), mean, median, p16, p84.
inline void write_index_csv(std::ostream& os, const IndexSeries& idx)
{
  os << "date,week,mean,median,p16,p84\n";
  for (std::size_t t = 0; t < idx.stamps.size(); ++t) {
    const auto i = static_cast<Eigen::Index>(t);
    os << format_date(first_day(idx.stamps[t])) << ',' << idx.stamps[t].week << ',' << format_real(idx.mean[i])
       << ',' << format_real(idx.median[i]) << ',' << format_real(idx.p16[i]) << ',' << format_real(idx.p84[i])
       << '\n';
  }
}

inline IndexSeries read_index_csv(std::istream& is)
{
  IndexSeries idx;
  std::string line;
  if (!std::getline(is, line) || line != "date,week,mean,median,p16,p84")
    throw Error(ErrorKind::input, "index file header not recognised");
  std::vector<std::array<double, 4>> rows;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty())
      continue;
    std::vector<std::string_view> f;
    std::string_view rest(line);
    for (;;) {
      const auto c = rest.find(',');
      f.push_back(rest.substr(0, c));
      if (c == std::string_view::npos)
        break;
      rest.remove_prefix(c + 1);
    }
    if (f.size() != 6)
      throw Error(ErrorKind::input, "index file line " + std::to_string(lineno) + ": expected 6 fields");
    idx.stamps.push_back(stamp_of_date(parse_date(f[0])));
    rows.push_back({parse_real_field(f[2]), parse_real_field(f[3]), parse_real_field(f[4]), parse_real_field(f[5])});
  }
  const auto T = static_cast<Eigen::Index>(rows.size());
  idx.mean.resize(T);
  idx.median.resize(T);
  idx.p16.resize(T);
  idx.p84.resize(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    const auto& r = rows[static_cast<std::size_t>(t)];
    idx.mean[t] = r[0];
    idx.median[t] = r[1];
    idx.p16[t] = r[2];
    idx.p84[t] = r[3];
  }
  return idx;
}

// GDP growth aligned to its quarter-end stamps: date, week, gdp.
inline void write_gdp_csv(std::ostream& os, const std::vector<PseudoWeekStamp>& stamps, const Eigen::VectorXd& gdp)
{
  os << "date,week,gdp\n";
  for (std::size_t t = 0; t < stamps.size(); ++t)
    if (!is_missing(gdp[static_cast<Eigen::Index>(t)]))
      os << format_date(first_day(stamps[t])) << ',' << stamps[t].week << ','
         << format_real(gdp[static_cast<Eigen::Index>(t)]) << '\n';
}

} // namespace hfei

#endif
