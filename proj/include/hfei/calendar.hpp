#ifndef HFEI_CALENDAR_HPP
#define HFEI_CALENDAR_HPP

#include <algorithm>
#include <charconv>
#include <chrono>
#include <compare>
#include <cstdio>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "hfei/error.hpp"

namespace hfei
{

using Date = std::chrono::year_month_day;

inline constexpr int weeks_per_month = 4;
inline constexpr int weeks_per_quarter = 12;
inline constexpr int weeks_per_year = 48;

// A point on the artificial 48-weeks-per-year calendar. Each month is cut into
// four buckets: days 1-7, 8-14, 15-21 and 22 through the end of the month.
struct PseudoWeekStamp
{
  int year = 0;
  int month = 1;  // 1..12
  int week = 1;   // 1..4

  auto operator<=>(const PseudoWeekStamp&) const = default;

  bool valid() const { return month >= 1 && month <= 12 && week >= 1 && week <= weeks_per_month; }
  bool is_month_end() const { return week == weeks_per_month; }
  bool is_quarter_end() const { return week == weeks_per_month && month % 3 == 0; }
};

enum class SeriesKind
{
  Stock,
  Flow
};

struct DailyRecord
{
  Date date;
  double value = 0.0;
};

inline Date make_date(int y, int m, int d)
{
  return Date{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
              std::chrono::day{static_cast<unsigned>(d)}};
}

inline PseudoWeekStamp stamp_of_date(const Date& date)
{
  if (!date.ok())
    throw Error(ErrorKind::input, "invalid calendar date");
  const unsigned day = static_cast<unsigned>(date.day());
  const int week = day <= 21 ? static_cast<int>((day - 1) / 7) + 1 : 4;
  return {static_cast<int>(date.year()), static_cast<int>(static_cast<unsigned>(date.month())), week};
}

// Number of pseudo-weeks from origin to stamp.
inline long stamp_index(const PseudoWeekStamp& stamp, const PseudoWeekStamp& origin)
{
  if (!stamp.valid() || !origin.valid())
    throw Error(ErrorKind::input, "invalid pseudo-week stamp");
  if (stamp < origin)
    throw Error(ErrorKind::ordering, "stamp precedes origin");
  return static_cast<long>(weeks_per_year) * (stamp.year - origin.year) +
         static_cast<long>(weeks_per_month) * (stamp.month - origin.month) + (stamp.week - origin.week);
}

// Inverse of stamp_index for non-negative offsets.
inline PseudoWeekStamp stamp_at(const PseudoWeekStamp& origin, long offset)
{
  if (offset < 0)
    throw Error(ErrorKind::ordering, "negative stamp offset");
  const long base = static_cast<long>(origin.year) * weeks_per_year +
                    static_cast<long>(origin.month - 1) * weeks_per_month + (origin.week - 1) + offset;
  PseudoWeekStamp s;
  s.year = static_cast<int>(base / weeks_per_year);
  const long rem = base % weeks_per_year;
  s.month = static_cast<int>(rem / weeks_per_month) + 1;
  s.week = static_cast<int>(rem % weeks_per_month) + 1;
  return s;
}

inline PseudoWeekStamp next_stamp(const PseudoWeekStamp& s) { return stamp_at(s, 1); }

inline std::vector<PseudoWeekStamp> stamp_range(const PseudoWeekStamp& first, const PseudoWeekStamp& last)
{
  std::vector<PseudoWeekStamp> out;
  if (last < first)
    return out;
  const long n = stamp_index(last, first) + 1;
  out.reserve(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i)
    out.push_back(stamp_at(first, i));
  return out;
}

// First calendar day covered by a pseudo-week.
inline Date first_day(const PseudoWeekStamp& s)
{
  return make_date(s.year, s.month, 1 + 7 * (s.week - 1));
}

// Week 1 of the first month of the quarter containing s.
inline PseudoWeekStamp quarter_start(const PseudoWeekStamp& s)
{
  return {s.year, 3 * ((s.month - 1) / 3) + 1, 1};
}

// Week 4 of the last month of the quarter containing s.
inline PseudoWeekStamp quarter_end(const PseudoWeekStamp& s)
{
  return {s.year, 3 * ((s.month - 1) / 3) + 3, weeks_per_month};
}

inline std::string format_date(const Date& d)
{
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

// Strict YYYY-MM-DD.
inline Date parse_date(std::string_view text)
{
  auto fail = [&] { return Error(ErrorKind::input, "invalid date '" + std::string(text) + "'"); };
  if (text.size() != 10 || text[4] != '-' || text[7] != '-')
    throw fail();
  int y = 0, m = 0, d = 0;
  auto field = [&](std::size_t pos, std::size_t len, int& out) {
    auto [p, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, out);
    if (ec != std::errc{} || p != text.data() + pos + len)
      throw fail();
  };
  field(0, 4, y);
  field(5, 2, m);
  field(8, 2, d);
  const Date date = make_date(y, m, d);
  if (!date.ok())
    throw fail();
  return date;
}

// Buckets irregular daily records into pseudo-weeks. Stock series average the
// records of a bucket, flow series sum them. Buckets between the first and last
// record that receive nothing are zero for zero-filled flows and missing
// otherwise.
inline std::map<PseudoWeekStamp, double> aggregate_daily(std::vector<DailyRecord> records, SeriesKind kind,
                                                         bool zero_fill)
{
  std::map<PseudoWeekStamp, double> out;
  if (records.empty())
    return out;
  std::stable_sort(records.begin(), records.end(),
                   [](const DailyRecord& a, const DailyRecord& b) { return std::chrono::sys_days{a.date} < std::chrono::sys_days{b.date}; });

  std::map<PseudoWeekStamp, std::pair<double, int>> acc;
  for (const auto& r : records) {
    auto& slot = acc[stamp_of_date(r.date)];
    slot.first += r.value;
    slot.second += 1;
  }
  const auto first = acc.begin()->first;
  const auto last = acc.rbegin()->first;
  for (const auto& s : stamp_range(first, last)) {
    auto it = acc.find(s);
    if (it == acc.end())
      out[s] = (kind == SeriesKind::Flow && zero_fill) ? 0.0 : missing;
    else
      out[s] = kind == SeriesKind::Stock ? it->second.first / it->second.second : it->second.first;
  }
  return out;
}

} // namespace hfei

#endif
