#ifndef HFEI_IO_HPP
#define HFEI_IO_HPP

// Plain-text inputs and outputs. Files are comma-separated with a header row;
// fields are not quoted, and blank lines are skipped.
//
// Raw observations:  series_id,date,value         (date as YYYY-MM-DD)
// Series metadata:   series_id,frequency,kind,zero_fill[,anchor,proxy,proxy_break,proxy_from]
//   frequency  weekly | monthly | quarterly
//   kind       stock | flow
//   zero_fill  1 if an empty bucket of a flow series means zero
//   anchor     monthly series whose value fills a missing week-4 entry
//   proxy      series used to fill gaps by regression (same frequency)
//   proxy_break, proxy_from   dates: level-shift dummy start, fit sample start
// Growth panel:      date,week,<series ids...>   (empty field = missing)
// Panel metadata:    series_id,frequency,kind

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hfei/calendar.hpp"
#include "hfei/config.hpp"
#include "hfei/error.hpp"
#include "hfei/index.hpp"
#include "hfei/panel.hpp"

namespace hfei
{

inline std::vector<std::string_view> split_fields(std::string_view line)
{
  std::vector<std::string_view> f;
  for (;;) {
    const auto c = line.find(',');
    f.push_back(trim(line.substr(0, c)));
    if (c == std::string_view::npos)
      return f;
    line.remove_prefix(c + 1);
  }
}

struct RawRecord
{
  std::string series;
  Date date;
  double value = 0.0;
  int line = 0;
};

inline std::vector<RawRecord> read_observations(std::istream& is, const std::string& source = "data")
{
  std::string line;
  if (!std::getline(is, line))
    throw Error(ErrorKind::data, "empty panel: " + source + " has no header");
  const auto head = split_fields(line);
  if (head.size() != 3 || head[0] != "series_id" || head[1] != "date" || head[2] != "value")
    throw Error(ErrorKind::input, source + " line 1: expected header series_id,date,value");
  std::vector<RawRecord> out;
  std::vector<std::string> problems;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (trim(line).empty())
      continue;
    const auto f = split_fields(line);
    try {
      if (f.size() != 3)
        throw Error(ErrorKind::input, "expected 3 fields, found " + std::to_string(f.size()));
      if (f[0].empty())
        throw Error(ErrorKind::input, "empty series id");
      const double v = parse_real_field(f[2]);
      if (!std::isfinite(v))
        throw Error(ErrorKind::input, "value is missing or not finite");
      out.push_back({std::string(f[0]), parse_date(f[1]), v, lineno});
    } catch (const Error& e) {
      problems.push_back(source + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!problems.empty()) {
    std::string msg = std::to_string(problems.size()) + " unparseable row(s)";
    for (std::size_t i = 0; i < problems.size() && i < 20; ++i)
      msg += "\n  " + problems[i];
    if (problems.size() > 20)
      msg += "\n  ...";
    throw Error(ErrorKind::input, msg);
  }
  if (out.empty())
    throw Error(ErrorKind::data, "empty panel: " + source + " has no observations");

  // (series, date) must be unique.
  std::map<std::pair<std::string, long>, std::vector<int>> seen;
  for (const auto& r : out)
    seen[{r.series, std::chrono::sys_days{r.date}.time_since_epoch().count()}].push_back(r.line);
  std::string dups;
  int ndup = 0;
  for (const auto& [key, lines] : seen)
    if (lines.size() > 1) {
      if (++ndup <= 20) {
        const Date d{std::chrono::sys_days{std::chrono::days{key.second}}};
        dups += "\n  " + key.first + " " + format_date(d) + " (lines";
        for (int l : lines)
          dups += " " + std::to_string(l);
        dups += ")";
      }
    }
  if (ndup)
    throw Error(ErrorKind::input, std::to_string(ndup) + " duplicate (series, date) pair(s):" + dups);
  return out;
}

struct SeriesSettings
{
  SeriesMeta meta;
  bool zero_fill = false;
  std::string anchor, proxy;
  std::optional<PseudoWeekStamp> proxy_break, proxy_from;
};

inline std::vector<SeriesSettings> read_metadata(std::istream& is, const std::string& source = "metadata")
{
  std::string line;
  if (!std::getline(is, line))
    throw Error(ErrorKind::input, source + " is empty");
  const auto head = split_fields(line);
  const std::vector<std::string_view> required = {"series_id", "frequency", "kind", "zero_fill"};
  const std::vector<std::string_view> optional = {"anchor", "proxy", "proxy_break", "proxy_from"};
  if (head.size() < required.size() || !std::equal(required.begin(), required.end(), head.begin()))
    throw Error(ErrorKind::input, source + " line 1: expected header series_id,frequency,kind,zero_fill[,...]");
  for (std::size_t i = required.size(); i < head.size(); ++i)
    if (std::find(optional.begin(), optional.end(), head[i]) == optional.end())
      throw Error(ErrorKind::input, source + " line 1: unknown column '" + std::string(head[i]) + "'");
  std::vector<SeriesSettings> out;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (trim(line).empty())
      continue;
    const auto f = split_fields(line);
    auto where = [&] { return source + " line " + std::to_string(lineno) + ": "; };
    if (f.size() != head.size())
      throw Error(ErrorKind::input, where() + "expected " + std::to_string(head.size()) + " fields");
    try {
      SeriesSettings s;
      s.meta.id = std::string(f[0]);
      s.meta.frequency = parse_frequency(f[1]);
      s.meta.kind = parse_kind(f[2]);
      if (f[3] != "0" && f[3] != "1")
        throw Error(ErrorKind::input, "zero_fill must be 0 or 1");
      s.zero_fill = f[3] == "1";
      for (std::size_t i = required.size(); i < head.size(); ++i) {
        if (f[i].empty())
          continue;
        if (head[i] == "anchor")
          s.anchor = std::string(f[i]);
        else if (head[i] == "proxy")
          s.proxy = std::string(f[i]);
        else if (head[i] == "proxy_break")
          s.proxy_break = stamp_of_date(parse_date(f[i]));
        else
          s.proxy_from = stamp_of_date(parse_date(f[i]));
      }
      if (std::any_of(out.begin(), out.end(), [&](const SeriesSettings& o) { return o.meta.id == s.meta.id; }))
        throw Error(ErrorKind::input, "series '" + s.meta.id + "' listed twice");
      out.push_back(std::move(s));
    } catch (const Error& e) {
      throw Error(ErrorKind::input, where() + e.what());
    }
  }
  if (out.empty())
    throw Error(ErrorKind::data, "empty panel: " + source + " lists no series");
  return out;
}

// Buckets records of a monthly or quarterly series into periods; values sit at
// the period's last pseudo-week. Stock periods average their records, flow
// periods sum them. Empty periods between the first and last are missing, or
// zero for zero-filled flows.
inline std::map<PseudoWeekStamp, double> aggregate_periodic(const std::vector<DailyRecord>& records, SeriesKind kind,
                                                            bool zero_fill, Frequency freq)
{
  if (freq == Frequency::Weekly)
    return aggregate_daily(records, kind, zero_fill);
  std::map<PseudoWeekStamp, std::pair<double, int>> acc;
  for (const auto& r : records) {
    const auto s = stamp_of_date(r.date);
    const PseudoWeekStamp end = freq == Frequency::Monthly ? PseudoWeekStamp{s.year, s.month, 4} : quarter_end(s);
    auto& slot = acc[end];
    slot.first += r.value;
    slot.second += 1;
  }
  std::map<PseudoWeekStamp, double> out;
  if (acc.empty())
    return out;
  const int step = freq == Frequency::Monthly ? weeks_per_month : weeks_per_quarter;
  const auto first = acc.begin()->first, last = acc.rbegin()->first;
  for (long k = 0; k <= stamp_index(last, first); k += step) {
    const auto s = stamp_at(first, k);
    auto it = acc.find(s);
    if (it == acc.end())
      out[s] = kind == SeriesKind::Flow && zero_fill ? 0.0 : missing;
    else
      out[s] = kind == SeriesKind::Stock ? it->second.first / it->second.second : it->second.first;
  }
  return out;
}

inline void write_panel_csv(std::ostream& os, const PanelData& p)
{
  os << "date,week";
  for (const auto& m : p.meta)
    os << ',' << m.id;
  os << '\n';
  for (Eigen::Index t = 0; t < p.periods(); ++t) {
    const auto& s = p.index[static_cast<std::size_t>(t)];
    os << format_date(first_day(s)) << ',' << s.week;
    for (Eigen::Index j = 0; j < p.series(); ++j)
      os << ',' << format_real(p.values(t, j));
    os << '\n';
  }
}

inline void write_panel_meta_csv(std::ostream& os, const PanelData& p)
{
  os << "series_id,frequency,kind\n";
  for (const auto& m : p.meta)
    os << m.id << ',' << to_string(m.frequency) << ',' << to_string(m.kind) << '\n';
}

inline GrowthPanel read_panel_csv(std::istream& values, std::istream& meta)
{
  GrowthPanel p;
  std::string line;
  if (!std::getline(meta, line) || line != "series_id,frequency,kind")
    throw Error(ErrorKind::input, "panel metadata header not recognised");
  while (std::getline(meta, line)) {
    if (trim(line).empty())
      continue;
    const auto f = split_fields(line);
    if (f.size() != 3)
      throw Error(ErrorKind::input, "panel metadata row '" + line + "' needs 3 fields");
    p.meta.push_back({std::string(f[0]), parse_frequency(f[1]), parse_kind(f[2]), {}});
  }
  if (!std::getline(values, line))
    throw Error(ErrorKind::input, "panel file is empty");
  const auto head = split_fields(line);
  if (head.size() != p.meta.size() + 2 || head[0] != "date" || head[1] != "week")
    throw Error(ErrorKind::input, "panel header does not match its metadata");
  for (std::size_t j = 0; j < p.meta.size(); ++j)
    if (head[j + 2] != p.meta[j].id)
      throw Error(ErrorKind::input, "panel column '" + std::string(head[j + 2]) + "' does not match metadata");
  std::vector<std::vector<double>> rows;
  int lineno = 1;
  while (std::getline(values, line)) {
    ++lineno;
    if (trim(line).empty())
      continue;
    const auto f = split_fields(line);
    if (f.size() != head.size())
      throw Error(ErrorKind::input, "panel line " + std::to_string(lineno) + ": wrong number of fields");
    auto stamp = stamp_of_date(parse_date(f[0]));
    if (std::to_string(stamp.week) != f[1])
      throw Error(ErrorKind::input, "panel line " + std::to_string(lineno) + ": week does not match date");
    p.index.push_back(stamp);
    std::vector<double> r;
    for (std::size_t j = 2; j < f.size(); ++j)
      r.push_back(parse_real_field(f[j]));
    rows.push_back(std::move(r));
  }
  p.values = Eigen::MatrixXd(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(p.meta.size()));
  for (std::size_t t = 0; t < rows.size(); ++t)
    for (std::size_t j = 0; j < p.meta.size(); ++j)
      p.values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) = rows[t][j];
  for (std::size_t j = 0; j < p.meta.size(); ++j)
    for (std::size_t t = 0; t < rows.size(); ++t)
      if (!is_missing(rows[t][j])) {
        p.meta[j].first_obs = p.index[t];
        break;
      }
  validate_panel(p);
  return p;
}

inline std::string read_file(const std::filesystem::path& path)
{
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw Error(ErrorKind::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text)
{
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw Error(ErrorKind::io, "cannot write " + path.string());
  os << text;
  if (!os)
    throw Error(ErrorKind::io, "failed writing " + path.string());
}

} // namespace hfei

#endif
