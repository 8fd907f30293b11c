#ifndef HFEI_COMMANDS_HPP
#define HFEI_COMMANDS_HPP

// Batch commands behind the hfei executable. Each takes the merged run
// configuration (file values overridden by flags) and writes its outputs
// under `out`.
//
// Keys shared by all commands: out, seed (default 1), threads (default 1).
//   prepare        data, metadata, gdp (lead series id, default "gdp")
//   estimate       panel (directory written by prepare), model keys, store_idio_paths
//   grid           panel, model keys
//   regime         draws (directory written by estimate), regime_* keys
//   export-index   draws, panel
// Model keys are those of ModelSpec::canonical (p_f, p_q, s, sv_factor, ...);
// series counts come from the panel.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hfei/config.hpp"
#include "hfei/draw_store.hpp"
#include "hfei/error.hpp"
#include "hfei/estimator.hpp"
#include "hfei/index.hpp"
#include "hfei/io.hpp"
#include "hfei/panel.hpp"
#include "hfei/regime.hpp"

namespace hfei
{

namespace fs = std::filesystem;

inline const std::set<std::string>& run_keys()
{
  static const std::set<std::string> keys = {"out", "seed", "threads", "data", "metadata", "gdp",
                                             "panel", "draws", "store_idio_paths"};
  return keys;
}

inline std::set<std::string> apply_regime_config(RegimeSpec& spec, const Config& cfg)
{
  std::set<std::string> used;
  auto real = [&](const char* key, double& field) {
    if (auto it = cfg.find(key); it != cfg.end()) {
      field = parse_real(key, it->second);
      used.insert(key);
    }
  };
  auto integer = [&](const char* key, int& field) {
    if (auto it = cfg.find(key); it != cfg.end()) {
      field = static_cast<int>(parse_integer(key, it->second));
      used.insert(key);
    }
  };
  auto flag = [&](const char* key, bool& field) {
    if (auto it = cfg.find(key); it != cfg.end()) {
      field = parse_flag(key, it->second);
      used.insert(key);
    }
  };
  real("regime_m0", spec.m0);
  real("regime_v0", spec.v0);
  real("regime_m1", spec.m1);
  real("regime_v1", spec.v1);
  real("regime_a_p", spec.a_p);
  real("regime_b_p", spec.b_p);
  real("regime_a_q", spec.a_q);
  real("regime_b_q", spec.b_q);
  real("regime_alpha", spec.alpha);
  real("regime_beta", spec.beta);
  real("regime_initial_prob", spec.initial_prob);
  integer("regime_iterations", spec.iterations);
  integer("regime_burn_in", spec.burn_in);
  flag("regime_standardize", spec.standardize);
  flag("regime_ordered", spec.ordered);
  return used;
}

// Rejects keys no command understands, so typos do not pass silently.
inline void check_config_keys(const Config& cfg)
{
  ModelSpec spec;
  RegimeSpec regime;
  auto known = apply_spec_config(spec, cfg);
  known.merge(apply_regime_config(regime, cfg));
  for (const auto& [k, v] : cfg)
    if (!known.count(k) && !run_keys().count(k))
      throw Error(ErrorKind::input, "unknown configuration key '" + k + "'");
}

inline std::string require(const Config& cfg, const std::string& key)
{
  auto it = cfg.find(key);
  if (it == cfg.end() || it->second.empty())
    throw Error(ErrorKind::input, "missing required setting '" + key + "'");
  return it->second;
}

inline std::string value_or(const Config& cfg, const std::string& key, const std::string& fallback)
{
  auto it = cfg.find(key);
  return it == cfg.end() ? fallback : it->second;
}

inline std::uint64_t seed_of(const Config& cfg)
{
  const auto v = value_or(cfg, "seed", "1");
  std::uint64_t x = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size())
    throw Error(ErrorKind::input, "seed '" + v + "' is not a non-negative integer");
  return x;
}

inline fs::path output_dir(const Config& cfg)
{
  const fs::path out = require(cfg, "out");
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec)
    throw Error(ErrorKind::io, "cannot create output directory " + out.string() + ": " + ec.message());
  return out;
}

template <class F>
std::string render(F&& f)
{
  std::ostringstream os;
  f(os);
  return os.str();
}

// ---------------------------------------------------------------------------
// prepare

// Drops leading periods before the quarter holding the first growth value
// (the first year of any spine has none).
inline GrowthPanel trim_leading_gaps(GrowthPanel g)
{
  Eigen::Index first = g.periods();
  for (Eigen::Index t = 0; t < g.periods() && first == g.periods(); ++t)
    for (Eigen::Index j = 0; j < g.series(); ++j)
      if (!is_missing(g.values(t, j))) {
        first = t;
        break;
      }
  if (first == g.periods())
    throw Error(ErrorKind::data, "no series has a year-over-year growth value; at least 49 weeks of data are needed");
  first = stamp_index(quarter_start(g.index[static_cast<std::size_t>(first)]), g.index.front());
  g.index.erase(g.index.begin(), g.index.begin() + first);
  g.values = Eigen::MatrixXd(g.values.bottomRows(g.periods() - first));
  return g;
}

struct PrepareReport
{
  MixedPanel levels;
  GrowthPanel growth;
};

inline PrepareReport cmd_prepare(const Config& cfg)
{
  check_config_keys(cfg);
  const fs::path data_path = require(cfg, "data"), meta_path = require(cfg, "metadata");
  std::istringstream data_in(read_file(data_path)), meta_in(read_file(meta_path));
  const auto records = read_observations(data_in, data_path.filename().string());
  const auto settings = read_metadata(meta_in, meta_path.filename().string());
  const std::string lead = value_or(cfg, "gdp", "gdp");
  const fs::path out = output_dir(cfg);

  std::map<std::string, std::vector<DailyRecord>> by_series;
  std::map<std::string, std::size_t> record_count;
  for (const auto& r : records) {
    by_series[r.series].push_back({r.date, r.value});
    ++record_count[r.series];
  }
  for (const auto& [id, recs] : by_series)
    if (std::none_of(settings.begin(), settings.end(), [&](const SeriesSettings& s) { return s.meta.id == id; }))
      throw Error(ErrorKind::input, "series '" + id + "' has observations but no metadata row");

  std::vector<SeriesInput> inputs;
  for (const auto& s : settings) {
    auto it = by_series.find(s.meta.id);
    if (it == by_series.end())
      throw Error(ErrorKind::data, "series '" + s.meta.id + "' has no observations");
    inputs.push_back({s.meta, aggregate_periodic(it->second, s.meta.kind, s.zero_fill, s.meta.frequency)});
  }
  PrepareReport rep;
  rep.levels = assemble_panel(std::move(inputs), lead);
  auto& P = rep.levels;
  const auto T = P.periods();

  std::ostringstream log;
  log << "series_id,date,week,method\n";
  struct Quality
  {
    Eigen::Index observed = 0, gaps = 0, proxy = 0, anchor = 0, neighbor = 0, unresolved = 0;
  };
  std::map<std::string, Quality> quality;
  auto settings_of = [&](const std::string& id) -> const SeriesSettings& {
    return *std::find_if(settings.begin(), settings.end(), [&](const SeriesSettings& s) { return s.meta.id == id; });
  };
  auto column = [&](const std::string& id, const char* role, const std::string& owner) {
    const auto j = P.find(id);
    if (!j)
      throw Error(ErrorKind::input, role + std::string(" '") + id + "' of series '" + owner + "' is not in the panel");
    return *j;
  };
  auto expected = [&](const SeriesMeta& m, Eigen::Index t) {
    const auto& st = P.index[static_cast<std::size_t>(t)];
    return m.frequency == Frequency::Weekly || (m.frequency == Frequency::Monthly && st.is_month_end()) ||
           (m.frequency == Frequency::Quarterly && st.is_quarter_end());
  };
  auto span_of = [&](Eigen::Index j) {
    Eigen::Index a = 0, b = T - 1;
    while (a < T && is_missing(P.values(a, j)))
      ++a;
    while (b >= 0 && is_missing(P.values(b, j)))
      --b;
    return std::pair{a, b};
  };
  auto log_fill = [&](const std::string& id, Eigen::Index t, const char* how) {
    const auto& st = P.index[static_cast<std::size_t>(t)];
    log << id << ',' << format_date(first_day(st)) << ',' << st.week << ',' << how << '\n';
  };

  for (Eigen::Index j = 0; j < P.series(); ++j) {
    const auto& m = P.meta[static_cast<std::size_t>(j)];
    auto& q = quality[m.id];
    const auto [a, b] = span_of(j);
    for (Eigen::Index t = a; t <= b; ++t)
      if (expected(m, t)) {
        if (is_missing(P.values(t, j)))
          ++q.gaps;
        else
          ++q.observed;
      }
  }

  // Regression fills from a proxy series.
  for (Eigen::Index j = 0; j < P.series(); ++j) {
    const auto& m = P.meta[static_cast<std::size_t>(j)];
    const auto& s = settings_of(m.id);
    if (s.proxy.empty())
      continue;
    const auto k = column(s.proxy, "proxy", m.id);
    if (P.meta[static_cast<std::size_t>(k)].frequency != m.frequency)
      throw Error(ErrorKind::input, "proxy '" + s.proxy + "' of series '" + m.id + "' has a different frequency");
    const PseudoWeekStamp never = next_stamp(P.index.back());
    const Eigen::VectorXd before = P.values.col(j);
    P.values.col(j) = proxy_interpolate(P.index, before, P.values.col(k), s.proxy_break.value_or(never), s.proxy_from);
    for (Eigen::Index t = 0; t < T; ++t)
      if (is_missing(before[t]) && !is_missing(P.values(t, j))) {
        if (!expected(m, t)) {
          P.values(t, j) = missing;
          continue;
        }
        ++quality[m.id].proxy;
        log_fill(m.id, t, "proxy");
      }
  }

  // Weekly gaps inside each series' span: monthly anchor, then neighbours.
  for (Eigen::Index j = 0; j < P.series(); ++j) {
    const auto& m = P.meta[static_cast<std::size_t>(j)];
    if (m.frequency != Frequency::Weekly)
      continue;
    const auto& s = settings_of(m.id);
    Eigen::VectorXd anchor;
    if (!s.anchor.empty()) {
      const auto k = column(s.anchor, "anchor", m.id);
      if (P.meta[static_cast<std::size_t>(k)].frequency != Frequency::Monthly)
        throw Error(ErrorKind::input, "anchor '" + s.anchor + "' of series '" + m.id + "' is not monthly");
      anchor = P.values.col(k);
    }
    const auto [a, b] = span_of(j);
    if (a > b)
      continue;
    const Eigen::VectorXd before = P.values.col(j).segment(a, b - a + 1);
    const auto r = impute_weekly_gaps(std::span(P.index).subspan(static_cast<std::size_t>(a), static_cast<std::size_t>(b - a + 1)),
                                      before, anchor.size() ? Eigen::VectorXd(anchor.segment(a, b - a + 1)) : anchor);
    for (Eigen::Index t = 0; t < before.size(); ++t)
      if (is_missing(before[t]) && !is_missing(r.values[t])) {
        const bool by_anchor = P.index[static_cast<std::size_t>(a + t)].is_month_end() && anchor.size() &&
                               !is_missing(anchor[a + t]);
        log_fill(m.id, a + t, by_anchor ? "anchor" : "neighbor");
      }
    quality[m.id].anchor += r.month_end_filled;
    quality[m.id].neighbor += r.neighbor_filled;
    quality[m.id].unresolved += static_cast<Eigen::Index>(r.unresolved.size());
    P.values.col(j).segment(a, b - a + 1) = r.values;
  }

  rep.growth = trim_leading_gaps(yoy_transform(P));
  std::ostringstream qual;
  qual << "series_id,frequency,kind,records,first_growth,observed,gaps,proxy_filled,anchor_filled,neighbor_filled,"
          "unresolved,growth_values\n";
  for (Eigen::Index j = 0; j < P.series(); ++j) {
    const auto& m = rep.growth.meta[static_cast<std::size_t>(j)];
    const auto& q = quality[m.id];
    Eigen::Index defined = 0;
    for (Eigen::Index t = 0; t < rep.growth.periods(); ++t)
      defined += !is_missing(rep.growth.values(t, j));
    qual << m.id << ',' << to_string(m.frequency) << ',' << to_string(m.kind) << ',' << record_count[m.id] << ','
         << (defined ? format_date(first_day(m.first_obs)) : std::string()) << ',' << q.observed << ',' << q.gaps
         << ',' << q.proxy << ',' << q.anchor << ',' << q.neighbor << ',' << q.unresolved << ',' << defined << '\n';
  }
  write_file(out / "panel.csv", render([&](std::ostream& os) { write_panel_csv(os, rep.growth); }));
  write_file(out / "panel_meta.csv", render([&](std::ostream& os) { write_panel_meta_csv(os, rep.growth); }));
  write_file(out / "quality.csv", qual.str());
  write_file(out / "imputation_log.csv", log.str());
  return rep;
}

inline GrowthPanel load_panel(const Config& cfg)
{
  const fs::path dir = require(cfg, "panel");
  std::istringstream values(read_file(dir / "panel.csv")), meta(read_file(dir / "panel_meta.csv"));
  return read_panel_csv(values, meta);
}

inline ModelSpec spec_for_panel(const Config& cfg, const GrowthPanel& panel)
{
  ModelSpec spec;
  spec.n_q = static_cast<int>(panel.count(Frequency::Quarterly));
  spec.n_m = static_cast<int>(panel.count(Frequency::Monthly));
  spec.n_w = static_cast<int>(panel.count(Frequency::Weekly));
  apply_spec_config(spec, cfg);
  spec.validate();
  check_panel_against_spec(panel, spec);
  return spec;
}

inline Eigen::Index gdp_column(const Config& cfg, const PanelData& panel)
{
  const std::string id = value_or(cfg, "gdp", "gdp");
  const auto j = panel.find(id);
  if (!j)
    throw Error(ErrorKind::input, "GDP series '" + id + "' is not in the panel");
  return *j;
}

// Posterior summaries of the unscaled factor: identity scaling.
inline IndexSeries factor_summary(const PosteriorDraws& d, const std::vector<PseudoWeekStamp>& stamps)
{
  IndexSeries s;
  s.stamps = stamps;
  const Eigen::Index T = d.factor.cols();
  s.mean = d.factor.colwise().mean().transpose();
  s.median.resize(T);
  s.p16.resize(T);
  s.p84.resize(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    std::vector<double> col(d.factor.col(t).data(), d.factor.col(t).data() + d.factor.rows());
    s.median[t] = sample_quantile(col, 0.5);
    s.p16[t] = sample_quantile(col, 0.16);
    s.p84[t] = sample_quantile(col, 0.84);
  }
  return s;
}

inline void write_index_outputs(const fs::path& out, const PosteriorDraws& d, const GrowthPanel& panel,
                                Eigen::Index gdp)
{
  const auto idx = scale_index(d.factor, panel.values.col(gdp), panel.index);
  write_file(out / "index.csv", render([&](std::ostream& os) { write_index_csv(os, idx); }));
  write_file(out / "gdp.csv", render([&](std::ostream& os) { write_gdp_csv(os, panel.index, panel.values.col(gdp)); }));
}

inline std::string dic_row(const DicReport& r)
{
  return format_real(r.mean_deviance) + ',' + format_real(r.deviance_at_mean) + ',' + format_real(r.effective_params) +
         ',' + format_real(r.dic);
}

// ---------------------------------------------------------------------------
// estimate

inline PosteriorDraws cmd_estimate(const Config& cfg, std::function<void(int)> progress = {})
{
  check_config_keys(cfg);
  const auto panel = load_panel(cfg);
  const auto spec = spec_for_panel(cfg, panel);
  const auto gdp = gdp_column(cfg, panel);
  if (gdp != spec.normalized_series)
    throw Error(ErrorKind::spec, "GDP must be the normalized series (column " + std::to_string(spec.normalized_series) +
                                     ")");
  const fs::path out = output_dir(cfg);
  GibbsOptions opt;
  opt.store_idio_paths = parse_flag("store_idio_paths", value_or(cfg, "store_idio_paths", "0"));
  opt.progress = std::move(progress);
  const auto d = run_gibbs(spec, panel, seed_of(cfg), opt);

  std::vector<std::string> ids;
  for (const auto& m : panel.meta)
    ids.push_back(m.id);
  write_draw_store(out / "draws", d, ids, panel.index.front());
  write_file(out / "factor.csv",
             render([&](std::ostream& os) { write_index_csv(os, factor_summary(d, panel.index)); }));
  write_index_outputs(out, d, panel, gdp);
  std::ostringstream diag;
  diag << "parameter,mean,psrf\n";
  for (const auto& x : chain_diagnostics(d, ids))
    diag << x.name << ',' << format_real(x.mean) << ',' << format_real(x.psrf) << '\n';
  write_file(out / "diagnostics.csv", diag.str());
  write_file(out / "dic.csv", "mean_deviance,deviance_at_mean,p_d,dic\n" + dic_row(compute_dic(d, panel)) + '\n');
  return d;
}

// ---------------------------------------------------------------------------
// grid

inline std::vector<GridCell> cmd_grid(const Config& cfg)
{
  check_config_keys(cfg);
  const auto panel = load_panel(cfg);
  const auto spec = spec_for_panel(cfg, panel);
  const fs::path out = output_dir(cfg);
  const auto threads = static_cast<unsigned>(std::max<long long>(1, parse_integer("threads", value_or(cfg, "threads", "1"))));
  const auto cells = run_grid(panel, spec, seed_of(cfg), threads);

  std::ostringstream table, detail;
  table << "volatility,s=0,s=1\n";
  detail << "volatility,s,mean_deviance,deviance_at_mean,p_d,dic,error\n";
  for (std::size_t k = 0; k < cells.size(); k += 2) {
    table << to_string(cells[k].vol);
    for (std::size_t c = k; c < k + 2; ++c)
      table << ',' << (cells[c].report ? format_real(cells[c].report->dic) : "");
    table << '\n';
  }
  for (const auto& c : cells) {
    std::string err = c.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    detail << to_string(c.vol) << ',' << c.s << ',' << (c.report ? dic_row(*c.report) : ",,,") << ',' << err << '\n';
  }
  write_file(out / "dic_grid.csv", table.str());
  write_file(out / "dic_cells.csv", detail.str());
  if (const auto best = best_cell(cells))
    write_file(out / "best.txt", std::string(to_string(cells[*best].vol)) + " s=" + std::to_string(cells[*best].s) + '\n');
  else
    throw Error(ErrorKind::numeric, "every grid cell failed; see dic_cells.csv");
  return cells;
}

// ---------------------------------------------------------------------------
// regime

inline RegimePosterior cmd_regime(const Config& cfg)
{
  check_config_keys(cfg);
  RegimeSpec rs;
  apply_regime_config(rs, cfg);
  const auto run = read_draw_store(require(cfg, "draws"));
  const fs::path out = output_dir(cfg);
  const Eigen::VectorXd factor = posterior_mean_factor(run.draws);
  const auto post = fit_regime(factor, rs, seed_of(cfg));
  const auto stamps = stamp_range(run.first_stamp, stamp_at(run.first_stamp, run.draws.periods - 1));

  const Eigen::Index T = factor.size();
  Eigen::VectorXi episode = Eigen::VectorXi::Zero(T);
  for (std::size_t k = 0; k < post.recessions.size(); ++k) {
    const auto& r = post.recessions[k];
    const Eigen::Index last = r.end ? *r.end - 1 : T - 1;
    for (Eigen::Index t = r.start; t <= last; ++t)
      episode[t] = static_cast<int>(k + 1);
  }
  std::ostringstream tab;
  tab << "date,week,recession_prob,in_recession,episode\n";
  for (Eigen::Index t = 0; t < T; ++t) {
    const auto& s = stamps[static_cast<std::size_t>(t)];
    tab << format_date(first_day(s)) << ',' << s.week << ',' << format_real(post.recession_prob[t]) << ','
        << (episode[t] > 0) << ',' << episode[t] << '\n';
  }
  auto stamp_text = [&](std::optional<Eigen::Index> t) {
    if (!t)
      return std::string(",");
    const auto& s = stamps[static_cast<std::size_t>(*t)];
    return format_date(first_day(s)) + ',' + std::to_string(s.week);
  };
  std::ostringstream rec;
  rec << "episode,start_date,start_week,call_date,call_week,end_call_date,end_call_week,end_date,end_week\n";
  for (std::size_t k = 0; k < post.recessions.size(); ++k) {
    const auto& r = post.recessions[k];
    rec << k + 1 << ',' << stamp_text(r.start) << ',' << stamp_text(r.call) << ',' << stamp_text(r.end_call) << ','
        << stamp_text(r.end) << '\n';
  }
  std::ostringstream sum;
  sum << "parameter,mean\n"
      << "p," << format_real(post.p.mean()) << '\n'
      << "q," << format_real(post.q.mean()) << '\n'
      << "precision," << format_real(post.precision.mean()) << '\n'
      << "recession_mean," << format_real(post.mean0.mean()) << '\n'
      << "expansion_mean," << format_real(post.mean1.mean()) << '\n';
  write_file(out / "regime.csv", tab.str());
  write_file(out / "recessions.csv", rec.str());
  write_file(out / "regime_summary.csv", sum.str());
  return post;
}

// ---------------------------------------------------------------------------
// export-index

inline void cmd_export_index(const Config& cfg)
{
  check_config_keys(cfg);
  const auto run = read_draw_store(require(cfg, "draws"));
  const auto panel = load_panel(cfg);
  if (panel.periods() != run.draws.periods || panel.index.front() != run.first_stamp)
    throw Error(ErrorKind::input, "panel spine does not match the stored draws");
  write_index_outputs(output_dir(cfg), run.draws, panel, gdp_column(cfg, panel));
}

} // namespace hfei

#endif
