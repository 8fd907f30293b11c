#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hfei/commands.hpp"
#include "hfei/simulate.hpp"

using namespace hfei;

namespace
{

fs::path scratch(const std::string& name)
{
  const auto dir = fs::temp_directory_path() / ("hfei_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p)
{
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void dump(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

std::size_t count_lines(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

std::optional<ErrorKind> kind_of(const std::function<void()>& f)
{
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

// Writes the levels and metadata of a simulated panel and runs prepare on them.
Config prepared(const fs::path& dir, const SimulatedPanel& sim)
{
  std::ostringstream levels, meta;
  write_levels_csv(levels, sim.panel);
  write_metadata_csv(meta, sim.panel);
  dump(dir / "data.csv", levels.str());
  dump(dir / "meta.csv", meta.str());
  Config cfg{{"data", (dir / "data.csv").string()}, {"metadata", (dir / "meta.csv").string()},
             {"out", (dir / "panel").string()}};
  (void)cmd_prepare(cfg);
  return cfg;
}

SimulatedPanel small_simulation(Eigen::Index T, std::uint64_t seed, std::optional<RegimeTruth> regime = std::nullopt)
{
  ModelSpec spec;
  spec.p_f = spec.p_q = 1;
  spec.n_q = 1;
  spec.n_m = 1;
  spec.n_w = 3;
  TrueParams tp;
  tp.loadings = Eigen::MatrixXd::Ones(spec.n(), 1);
  tp.loadings(2, 0) = 0.8;
  tp.loadings(3, 0) = 1.2;
  tp.phi = Eigen::VectorXd::Constant(1, regime ? 0.3 : 0.8);
  tp.rho = Eigen::MatrixXd::Constant(spec.n(), 1, 0.3);
  tp.factor_sd = regime ? 0.3 : 0.01;
  tp.idio_sd = Eigen::VectorXd::Constant(spec.n(), regime ? 0.3 : 0.005);
  if (regime) {
    tp.regime = regime;
  }
  return simulate_panel(tp, spec, T, seed);
}

} // namespace

TEST(Prepare, DailyStockSeriesGivesWeeklyGrowth)
{
  const auto dir = scratch("daily");
  std::ostringstream data;
  data << "series_id,date,value\n";
  int rows = 0;
  for (int y = 2019; y <= 2020; ++y)
    for (int m = 1; m <= 12; ++m)
      for (int d = 1; d <= 28; d += 2) {
        data << "w," << format_date(make_date(y, m, d)) << ',' << 100.0 + y - 2019 + 0.01 * m << '\n';
        ++rows;
      }
  dump(dir / "data.csv", data.str());
  dump(dir / "meta.csv", "series_id,frequency,kind,zero_fill\nw,weekly,stock,0\n");
  const Config cfg{{"data", (dir / "data.csv").string()}, {"metadata", (dir / "meta.csv").string()},
                   {"out", (dir / "out").string()}};
  const auto rep = cmd_prepare(cfg);
  EXPECT_EQ(rep.levels.periods(), 96);
  EXPECT_EQ((rep.growth.values.col(0).array() == rep.growth.values.col(0).array()).count(), 48);
  EXPECT_NEAR(rep.growth.values(47, 0), std::log(101.12 / 100.12), 1e-12);
  const auto panel = slurp(dir / "out" / "panel.csv");
  EXPECT_EQ(rep.growth.periods(), 48);
  EXPECT_EQ(rep.growth.index.front(), (PseudoWeekStamp{2020, 1, 1}));
  EXPECT_EQ(count_lines(panel), 49u);
  EXPECT_EQ(panel.substr(0, panel.find('\n')), "date,week,w");
  const auto quality = slurp(dir / "out" / "quality.csv");
  EXPECT_NE(quality.find("\nw,weekly,stock," + std::to_string(rows) + ",2020-01-01,96,0,0,0,0,0,48\n"),
            std::string::npos)
      << quality;
}

TEST(Prepare, ReportsInputProblems)
{
  const auto dir = scratch("bad");
  dump(dir / "meta.csv", "series_id,frequency,kind,zero_fill\nw,weekly,stock,0\n");
  const Config cfg{{"data", (dir / "data.csv").string()}, {"metadata", (dir / "meta.csv").string()},
                   {"out", (dir / "out").string()}};

  dump(dir / "data.csv", "series_id,date,value\nw,2020-01-01,1\nw,2020-01-02,2\nw,2020-01-01,3\n");
  try {
    (void)cmd_prepare(cfg);
    FAIL() << "duplicates accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::input);
    EXPECT_NE(std::string(e.what()).find("(lines 2 4)"), std::string::npos) << e.what();
  }

  dump(dir / "data.csv", "series_id,date,value\n");
  EXPECT_EQ(kind_of([&] { (void)cmd_prepare(cfg); }), ErrorKind::data);

  dump(dir / "data.csv", "series_id,date,value\nw,2020-13-01,1\nw,2020-01-02,abc\n");
  EXPECT_EQ(kind_of([&] { (void)cmd_prepare(cfg); }), ErrorKind::input);

  dump(dir / "data.csv", "series_id,date,value\nv,2020-01-01,1\n");
  EXPECT_EQ(kind_of([&] { (void)cmd_prepare(cfg); }), ErrorKind::input);

  Config typo = cfg;
  typo["iteratons"] = "10";
  EXPECT_EQ(kind_of([&] { (void)cmd_prepare(typo); }), ErrorKind::input);
}

TEST(Prepare, FillsWeeklyGapsAndLogsThem)
{
  const auto dir = scratch("gaps");
  std::ostringstream data;
  data << "series_id,date,value\n";
  for (int y = 2019; y <= 2020; ++y)
    for (int m = 1; m <= 12; ++m) {
      data << "m," << format_date(make_date(y, m, 15)) << ',' << 50.0 + m << '\n';
      for (int d : {1, 8, 15, 22})
        if (!(y == 2020 && m == 3 && (d == 8 || d == 22)))
          data << "w," << format_date(make_date(y, m, d)) << ',' << 50.0 + m + 0.1 * d << '\n';
    }
  dump(dir / "data.csv", data.str());
  dump(dir / "meta.csv", "series_id,frequency,kind,zero_fill,anchor\nm,monthly,stock,0,\nw,weekly,stock,0,m\n");
  const Config cfg{{"data", (dir / "data.csv").string()}, {"metadata", (dir / "meta.csv").string()},
                   {"out", (dir / "out").string()}};
  const auto rep = cmd_prepare(cfg);
  const auto w = *rep.levels.find("w");
  const auto t_week2 = stamp_index({2020, 3, 2}, rep.levels.index.front());
  EXPECT_DOUBLE_EQ(rep.levels.values(t_week2 + 2, w), 53.0);
  EXPECT_DOUBLE_EQ(rep.levels.values(t_week2, w), 0.5 * (53.1 + 54.5));
  EXPECT_EQ(slurp(dir / "out" / "imputation_log.csv"),
            "series_id,date,week,method\nw,2020-03-08,2,neighbor\nw,2020-03-22,4,anchor\n");
}

TEST(Pipeline, EstimateIsByteIdenticalAcrossRuns)
{
  const auto dir = scratch("rerun");
  auto cfg = prepared(dir, small_simulation(192, 3));
  cfg = {{"panel", (dir / "panel").string()}, {"iterations", "60"}, {"burn_in", "20"}, {"seed", "11"},
         {"sv_factor", "1"}, {"p_f", "1"}, {"p_q", "1"}};
  auto a = cfg, b = cfg;
  a["out"] = (dir / "a").string();
  b["out"] = (dir / "b").string();
  (void)cmd_estimate(a);
  (void)cmd_estimate(b);
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "a")) {
    if (!e.is_regular_file())
      continue;
    ++files;
    const auto rel = fs::relative(e.path(), dir / "a");
    EXPECT_EQ(slurp(e.path()), slurp(dir / "b" / rel)) << rel;
  }
  EXPECT_GE(files, 10u);

  // export-index reproduces the estimate outputs from the stored draws.
  Config ex{{"draws", (dir / "a" / "draws").string()}, {"panel", (dir / "panel").string()},
            {"out", (dir / "export").string()}};
  cmd_export_index(ex);
  EXPECT_EQ(slurp(dir / "export" / "index.csv"), slurp(dir / "a" / "index.csv"));
  EXPECT_EQ(slurp(dir / "export" / "gdp.csv"), slurp(dir / "a" / "gdp.csv"));
}

TEST(Pipeline, GridWritesEightCells)
{
  const auto dir = scratch("grid");
  (void)prepared(dir, small_simulation(144, 5));
  const Config cfg{{"panel", (dir / "panel").string()}, {"iterations", "30"}, {"burn_in", "10"},
                   {"threads", "4"}, {"p_f", "1"}, {"p_q", "1"}, {"out", (dir / "grid").string()}};
  const auto cells = cmd_grid(cfg);
  ASSERT_EQ(cells.size(), 8u);
  const auto table = slurp(dir / "grid" / "dic_grid.csv");
  EXPECT_EQ(count_lines(table), 5u);
  EXPECT_EQ(table.substr(0, table.find('\n')), "volatility,s=0,s=1");
  EXPECT_EQ(count_lines(slurp(dir / "grid" / "dic_cells.csv")), 9u);
  const auto best = *best_cell(cells);
  EXPECT_EQ(slurp(dir / "grid" / "best.txt"),
            std::string(to_string(cells[best].vol)) + " s=" + std::to_string(cells[best].s) + "\n");
}

TEST(Pipeline, RegimeDatingOnSimulatedSwitchingFactor)
{
  const auto dir = scratch("regime");
  const auto sim = small_simulation(480, 21, RegimeTruth{});
  (void)prepared(dir, sim);
  const Config est{{"panel", (dir / "panel").string()}, {"iterations", "400"}, {"burn_in", "150"},
                   {"p_f", "1"}, {"p_q", "1"}, {"out", (dir / "est").string()}};
  const auto draws = cmd_estimate(est);
  const Config reg{{"draws", (dir / "est" / "draws").string()}, {"regime_iterations", "1500"},
                   {"regime_burn_in", "500"}, {"out", (dir / "reg").string()}};
  const auto post = cmd_regime(reg);
  ASSERT_EQ(draws.periods, 480);
  const Eigen::Index offset = 0;
  int hits = 0;
  for (Eigen::Index t = 0; t < 480; ++t)
    hits += (post.recession_prob[offset + t] > 0.5 ? 0 : 1) == sim.truth.regime[t];
  EXPECT_GE(hits / 480.0, 0.95);
  const auto table = slurp(dir / "reg" / "regime.csv");
  EXPECT_EQ(count_lines(table), static_cast<std::size_t>(draws.periods) + 1);
  EXPECT_EQ(count_lines(slurp(dir / "reg" / "recessions.csv")), post.recessions.size() + 1);
}

TEST(Cli, ErrorsCarryTheirKind)
{
  const auto dir = scratch("exe");
  dump(dir / "meta.csv", "series_id,frequency,kind,zero_fill\nw,weekly,stock,0\n");
  dump(dir / "data.csv", "series_id,date,value\n");
  const std::string cmd = std::string(HFEI_EXE) + " prepare --data " + (dir / "data.csv").string() + " --metadata " +
                          (dir / "meta.csv").string() + " --out " + (dir / "out").string() + " 2> " +
                          (dir / "err.txt").string();
  EXPECT_NE(std::system(cmd.c_str()), 0);
  EXPECT_EQ(slurp(dir / "err.txt").rfind("error[data]: empty panel", 0), 0u) << slurp(dir / "err.txt");

  dump(dir / "run.cfg", "# settings\nseed = 4\nbogus = 1\n");
  const std::string cmd2 = std::string(HFEI_EXE) + " estimate --config " + (dir / "run.cfg").string() + " --panel " +
                           (dir / "none").string() + " --out " + (dir / "out").string() + " 2> " +
                           (dir / "err.txt").string();
  EXPECT_NE(std::system(cmd2.c_str()), 0);
  EXPECT_EQ(slurp(dir / "err.txt"), "error[input]: unknown configuration key 'bogus'\n");
}
