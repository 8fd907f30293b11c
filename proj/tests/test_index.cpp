#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "hfei/index.hpp"
#include "hfei/random.hpp"

using namespace hfei;

namespace
{

std::vector<PseudoWeekStamp> spine(Eigen::Index T) { return stamp_range({2010, 1, 1}, stamp_at({2010, 1, 1}, T - 1)); }

Eigen::MatrixXd noisy_draws(const Eigen::VectorXd& centre, int K, double noise, Rng& rng)
{
  Eigen::MatrixXd d(K, centre.size());
  for (int k = 0; k < K; ++k)
    for (Eigen::Index t = 0; t < centre.size(); ++t)
      d(k, t) = centre[t] + noise * standard_normal(rng);
  return d;
}

Eigen::VectorXd gdp_sample(Rng& rng)
{
  Eigen::VectorXd g = Eigen::VectorXd::Constant(120, missing);
  for (Eigen::Index t = 11; t < 120; t += 12)
    g[t] = 0.03 + 0.02 * standard_normal(rng);
  return g;
}

} // namespace

TEST(Index, ScaledMeanPathMatchesGdpMoments)
{
  Rng rng(1);
  Eigen::VectorXd centre(120);
  for (Eigen::Index t = 0; t < 120; ++t)
    centre[t] = std::sin(0.1 * t) * 3.0 + 0.5;
  const auto draws = noisy_draws(centre, 400, 0.3, rng);
  const auto gdp = gdp_sample(rng);
  const auto idx = scale_index(draws, gdp, spine(120));
  std::vector<double> obs;
  for (double x : gdp)
    if (!is_missing(x))
      obs.push_back(x);
  const auto [gm, gs] = mean_and_sd(Eigen::Map<Eigen::VectorXd>(obs.data(), Eigen::Index(obs.size())));
  const auto [im, is] = mean_and_sd(idx.mean);
  EXPECT_NEAR(im, gm, 1e-10);
  EXPECT_NEAR(is, gs, 1e-10);
  for (Eigen::Index t = 0; t < 120; ++t) {
    EXPECT_LE(idx.p16[t], idx.median[t]);
    EXPECT_LE(idx.median[t], idx.p84[t]);
  }
}

TEST(Index, TroughStampIsInvariant)
{
  Rng rng(2);
  Eigen::VectorXd centre(120);
  for (Eigen::Index t = 0; t < 120; ++t)
    centre[t] = std::cos(0.07 * t) + 0.01 * t;
  const auto draws = noisy_draws(centre, 200, 0.1, rng);
  const auto idx = scale_index(draws, gdp_sample(rng), spine(120));
  Eigen::Index raw_min, scaled_min;
  draws.colwise().mean().minCoeff(&raw_min);
  idx.mean.minCoeff(&scaled_min);
  EXPECT_EQ(raw_min, scaled_min);
}

TEST(Index, FormulaOnStandardizedFactor)
{
  // GDP values with sample mean 0.03 and sd 0.02 exactly.
  Eigen::VectorXd gdp(8);
  const double h = 0.02 * std::sqrt(7.0 / 8.0);
  gdp << 0.03 + h, 0.03 - h, 0.03 + h, 0.03 - h, 0.03 + h, 0.03 - h, 0.03 + h, 0.03 - h;
  Eigen::VectorXd f = Eigen::VectorXd::LinSpaced(40, -1.0, 2.0);
  const auto [fm, fs] = mean_and_sd(f);
  f = ((f.array() - fm) / fs).matrix();
  const auto idx = scale_index(f.transpose(), gdp, spine(40));
  for (Eigen::Index t = 0; t < 40; ++t)
    EXPECT_NEAR(idx.mean[t], 0.03 + 0.02 * f[t], 1e-14);
}

TEST(Index, QuantilesAreAffineEquivariant)
{
  Rng rng(3);
  const auto draws = noisy_draws(Eigen::VectorXd::LinSpaced(30, 0, 3), 301, 1.0, rng);
  const auto idx = scale_index(draws, gdp_sample(rng), spine(30));
  for (Eigen::Index t = 0; t < 30; ++t) {
    std::vector<double> raw(draws.col(t).data(), draws.col(t).data() + draws.rows());
    EXPECT_NEAR(idx.median[t], idx.scale(sample_quantile(raw, 0.5)), 1e-12);
    EXPECT_NEAR(idx.p16[t], idx.scale(sample_quantile(raw, 0.16)), 1e-12);
    EXPECT_NEAR(idx.p84[t], idx.scale(sample_quantile(raw, 0.84)), 1e-12);
  }
}

TEST(Index, SampleQuantileInterpolates)
{
  EXPECT_DOUBLE_EQ(sample_quantile({3.0, 1.0, 2.0, 4.0}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(sample_quantile({5.0, 1.0, 3.0}, 0.25), 2.0);
  EXPECT_DOUBLE_EQ(sample_quantile({7.0}, 0.84), 7.0);
  EXPECT_THROW((void)sample_quantile({}, 0.5), Error);
}

TEST(Index, RejectsDegenerateInputs)
{
  Rng rng(4);
  EXPECT_THROW((void)scale_index(Eigen::MatrixXd::Ones(5, 120), gdp_sample(rng), spine(120)), Error);
  Eigen::VectorXd few = Eigen::VectorXd::Constant(120, missing);
  few.head(7).setConstant(0.01);
  EXPECT_THROW((void)scale_index(Eigen::MatrixXd::Random(5, 120), few, spine(120)), Error);
}

TEST(Index, ExportRoundTripsBitForBit)
{
  Rng rng(5);
  const auto draws = noisy_draws(Eigen::VectorXd::LinSpaced(96, -2, 2), 50, 0.7, rng);
  const auto idx = scale_index(draws, gdp_sample(rng), spine(96));
  std::stringstream ss;
  write_index_csv(ss, idx);
  const auto back = read_index_csv(ss);
  EXPECT_EQ(back.stamps, idx.stamps);
  EXPECT_EQ(back.mean, idx.mean);
  EXPECT_EQ(back.median, idx.median);
  EXPECT_EQ(back.p16, idx.p16);
  EXPECT_EQ(back.p84, idx.p84);
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 5e-324})
    EXPECT_EQ(parse_real_field(format_real(x)), x);
}

TEST(Index, GdpCompanionUsesQuarterEnds)
{
  Rng rng(6);
  const auto gdp = gdp_sample(rng);
  std::ostringstream os;
  write_gdp_csv(os, spine(120), gdp);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "date,week,gdp");
  int rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    EXPECT_EQ(line.substr(11, 2), "4,");
  }
  EXPECT_EQ(rows, 10);
}
