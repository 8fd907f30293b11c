// Command-line front end. Settings come from an optional key=value file
// (--config) and are overridden by flags and repeated --set key=value.

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

#include "hfei/commands.hpp"

namespace
{

struct Flags
{
  std::string config, out, data, metadata, panel, draws, gdp, seed, threads;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, Flags& f)
{
  cmd->add_option("--config", f.config, "key=value settings file");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--seed", f.seed, "random seed");
  cmd->add_option("--set", f.sets, "extra setting key=value (repeatable)");
}

hfei::Config merged(const Flags& f)
{
  hfei::Config cfg;
  if (!f.config.empty()) {
    std::istringstream is(hfei::read_file(f.config));
    cfg = hfei::parse_config(is, f.config);
  }
  for (const auto& s : f.sets)
    for (auto& [k, v] : hfei::parse_inline_config(s))
      cfg[k] = v;
  auto put = [&](const char* key, const std::string& v) {
    if (!v.empty())
      cfg[key] = v;
  };
  put("out", f.out);
  put("data", f.data);
  put("metadata", f.metadata);
  put("panel", f.panel);
  put("draws", f.draws);
  put("gdp", f.gdp);
  put("seed", f.seed);
  put("threads", f.threads);
  return cfg;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Weekly economic activity index from mixed-frequency data"};
  app.require_subcommand(1);
  Flags f;

  auto* prepare = app.add_subcommand("prepare", "aggregate raw observations into a growth panel");
  add_common(prepare, f);
  prepare->add_option("--data", f.data, "observations CSV (series_id,date,value)");
  prepare->add_option("--metadata", f.metadata, "series metadata CSV");
  prepare->add_option("--gdp", f.gdp, "id of the GDP series");

  auto* estimate = app.add_subcommand("estimate", "run the Gibbs sampler on a prepared panel");
  add_common(estimate, f);
  estimate->add_option("--panel", f.panel, "directory holding panel.csv and panel_meta.csv");
  estimate->add_option("--gdp", f.gdp, "id of the GDP series");
  bool quiet = false;
  estimate->add_flag("--quiet", quiet, "no progress messages");

  auto* grid = app.add_subcommand("grid", "compare the eight volatility and lag configurations by DIC");
  add_common(grid, f);
  grid->add_option("--panel", f.panel, "directory holding panel.csv and panel_meta.csv");
  grid->add_option("--threads", f.threads, "worker threads");

  auto* regime = app.add_subcommand("regime", "date recessions from the estimated factor");
  add_common(regime, f);
  regime->add_option("--draws", f.draws, "draws directory written by estimate");

  auto* exp = app.add_subcommand("export-index", "rescale stored factor draws into the index");
  add_common(exp, f);
  exp->add_option("--draws", f.draws, "draws directory written by estimate");
  exp->add_option("--panel", f.panel, "directory holding panel.csv and panel_meta.csv");
  exp->add_option("--gdp", f.gdp, "id of the GDP series");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = merged(f);
    if (*prepare) {
      const auto rep = hfei::cmd_prepare(cfg);
      std::cerr << "prepared " << rep.growth.series() << " series over " << rep.growth.periods() << " weeks\n";
    } else if (*estimate) {
      std::function<void(int)> progress;
      if (!quiet)
        progress = [](int it) {
          if (it % 500 == 0)
            std::cerr << "iteration " << it << '\n';
        };
      const auto d = hfei::cmd_estimate(cfg, progress);
      std::cerr << "kept " << d.factor.rows() << " draws\n";
    } else if (*grid) {
      const auto cells = hfei::cmd_grid(cfg);
      const auto best = *hfei::best_cell(cells);
      std::cout << "best: " << hfei::to_string(cells[best].vol) << " s=" << cells[best].s << '\n';
    } else if (*regime) {
      const auto post = hfei::cmd_regime(cfg);
      std::cout << post.recessions.size() << " recession(s) dated\n";
    } else {
      hfei::cmd_export_index(cfg);
    }
  } catch (const hfei::Error& e) {
    std::cerr << "error[" << hfei::to_string(e.kind()) << "]: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
