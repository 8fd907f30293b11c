#include <gtest/gtest.h>

#include <random>
#include <set>

#include "hfei/calendar.hpp"

using namespace hfei;

TEST(Calendar, StampOfDateTableRows)
{
  EXPECT_EQ(stamp_of_date(make_date(2020, 3, 5)), (PseudoWeekStamp{2020, 3, 1}));
  EXPECT_EQ(stamp_of_date(make_date(2020, 2, 29)), (PseudoWeekStamp{2020, 2, 4}));
  EXPECT_EQ(stamp_of_date(make_date(2024, 12, 21)), (PseudoWeekStamp{2024, 12, 3}));
  EXPECT_EQ(stamp_of_date(make_date(2024, 12, 22)), (PseudoWeekStamp{2024, 12, 4}));
  EXPECT_EQ(stamp_of_date(make_date(2024, 12, 8)).week, 2);
  EXPECT_EQ(stamp_of_date(make_date(2024, 12, 7)).week, 1);
}

TEST(Calendar, InvalidDateRejected)
{
  EXPECT_THROW(stamp_of_date(make_date(2021, 2, 29)), Error);
  EXPECT_THROW(parse_date("2021-13-01"), Error);
  EXPECT_THROW(parse_date("2021-1-01"), Error);
  EXPECT_EQ(parse_date("2021-01-31"), make_date(2021, 1, 31));
}

TEST(Calendar, EveryMonthSplitsIntoFourBuckets)
{
  for (int y = 2000; y <= 2030; ++y)
    for (int m = 1; m <= 12; ++m) {
      std::set<int> weeks;
      const auto last = std::chrono::year_month_day_last{std::chrono::year{y},
                                                         std::chrono::month_day_last{std::chrono::month{unsigned(m)}}};
      for (unsigned d = 1; d <= unsigned(last.day()); ++d) {
        const auto s = stamp_of_date(make_date(y, m, int(d)));
        ASSERT_EQ(s.year, y);
        ASSERT_EQ(s.month, m);
        weeks.insert(s.week);
      }
      EXPECT_EQ(weeks, (std::set<int>{1, 2, 3, 4}));
    }
}

TEST(Calendar, StampIndexExamples)
{
  const PseudoWeekStamp origin{2004, 1, 1};
  EXPECT_EQ(stamp_index(origin, origin), 0);
  EXPECT_EQ(stamp_index({2005, 1, 1}, origin), 48);
  EXPECT_EQ(stamp_index({2004, 4, 1}, origin), 12);
  EXPECT_THROW(stamp_index({2003, 12, 4}, origin), Error);
}

TEST(Calendar, StampIndexIsBijective)
{
  const PseudoWeekStamp origin{2003, 7, 3};
  PseudoWeekStamp prev = origin;
  for (long k = 0; k < 2000; ++k) {
    const auto s = stamp_at(origin, k);
    ASSERT_TRUE(s.valid());
    ASSERT_EQ(stamp_index(s, origin), k);
    if (k > 0) {
      ASSERT_LT(prev, s);
      ASSERT_EQ(stamp_index(s, prev), 1);
    }
    prev = s;
  }
}

TEST(Calendar, QuarterBoundaries)
{
  EXPECT_EQ(quarter_start({2010, 5, 3}), (PseudoWeekStamp{2010, 4, 1}));
  EXPECT_EQ(quarter_end({2010, 5, 3}), (PseudoWeekStamp{2010, 6, 4}));
  EXPECT_TRUE((PseudoWeekStamp{2010, 6, 4}).is_quarter_end());
  EXPECT_FALSE((PseudoWeekStamp{2010, 5, 4}).is_quarter_end());
  EXPECT_EQ(first_day({2010, 5, 3}), make_date(2010, 5, 15));
}

TEST(AggregateDaily, StockMeanFlowSum)
{
  std::vector<DailyRecord> r{{make_date(2020, 1, 2), 2.0}, {make_date(2020, 1, 6), 4.0}};
  EXPECT_DOUBLE_EQ(aggregate_daily(r, SeriesKind::Stock, false).at({2020, 1, 1}), 3.0);
  EXPECT_DOUBLE_EQ(aggregate_daily(r, SeriesKind::Flow, false).at({2020, 1, 1}), 6.0);
}

TEST(AggregateDaily, EmptyBuckets)
{
  std::vector<DailyRecord> r{{make_date(2020, 1, 2), 2.0}, {make_date(2020, 1, 25), 4.0}};
  const auto flow = aggregate_daily(r, SeriesKind::Flow, true);
  ASSERT_EQ(flow.size(), 4u);
  EXPECT_DOUBLE_EQ(flow.at({2020, 1, 2}), 0.0);
  EXPECT_DOUBLE_EQ(flow.at({2020, 1, 3}), 0.0);
  const auto stock = aggregate_daily(r, SeriesKind::Stock, true);
  EXPECT_TRUE(is_missing(stock.at({2020, 1, 2})));
  const auto flow_nofill = aggregate_daily(r, SeriesKind::Flow, false);
  EXPECT_TRUE(is_missing(flow_nofill.at({2020, 1, 3})));
  EXPECT_TRUE(aggregate_daily({}, SeriesKind::Flow, true).empty());
}

TEST(AggregateDaily, StockInvariantToDuplication)
{
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> day(1, 28);
  std::normal_distribution<double> val(0.0, 3.0);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<DailyRecord> r;
    for (int k = 0; k < 20; ++k)
      r.push_back({make_date(2019, 1 + rep % 12, day(rng)), val(rng)});
    auto doubled = r;
    doubled.insert(doubled.end(), r.begin(), r.end());
    const auto a = aggregate_daily(r, SeriesKind::Stock, false);
    const auto b = aggregate_daily(doubled, SeriesKind::Stock, false);
    ASSERT_EQ(a.size(), b.size());
    for (const auto& [s, v] : a) {
      if (is_missing(v))
        EXPECT_TRUE(is_missing(b.at(s)));
      else
        EXPECT_NEAR(v, b.at(s), 1e-12);
    }
  }
}

TEST(AggregateDaily, FlowIsAdditive)
{
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> day(1, 7);
  std::normal_distribution<double> val(5.0, 2.0);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<DailyRecord> left, right, all;
    for (int k = 0; k < 10; ++k) {
      DailyRecord rec{make_date(2021, 3, day(rng)), val(rng)};
      (k % 2 ? left : right).push_back(rec);
      all.push_back(rec);
    }
    const PseudoWeekStamp s{2021, 3, 1};
    const double whole = aggregate_daily(all, SeriesKind::Flow, false).at(s);
    const double parts =
        aggregate_daily(left, SeriesKind::Flow, false).at(s) + aggregate_daily(right, SeriesKind::Flow, false).at(s);
    EXPECT_NEAR(whole, parts, 1e-12);
  }
}
