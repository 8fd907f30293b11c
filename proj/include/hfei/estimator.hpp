#ifndef HFEI_ESTIMATOR_HPP
#define HFEI_ESTIMATOR_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hfei/error.hpp"
#include "hfei/model_spec.hpp"
#include "hfei/panel.hpp"
#include "hfei/random.hpp"
#include "hfei/samplers.hpp"
#include "hfei/ssmfilter.hpp"
#include "hfei/statespace.hpp"

namespace hfei
{

// Kept output of one chain. Row j of every matrix belongs to kept draw j.
// Loadings are stored series-major (series i, lag l in column i*(s+1)+l) and
// rho as series i, lag j in column i*p_q+j. Volatility blocks hold standard
// deviations: one column per period with stochastic volatility, otherwise a
// single column (per series for the idiosyncratic block).
struct PosteriorDraws
{
  ModelSpec spec;
  std::uint64_t seed = 0;
  Eigen::Index periods = 0;
  Eigen::VectorXd means;  // per-series means removed before estimation

  Eigen::MatrixXd factor;     // K x T
  Eigen::MatrixXd loadings;   // K x n(s+1)
  Eigen::MatrixXd phi;        // K x p_f
  Eigen::MatrixXd rho;        // K x n p_q
  Eigen::MatrixXd factor_sd;  // K x T or K x 1
  Eigen::MatrixXd idio_sd;    // K x nT or K x n; empty when idiosyncratic paths are not stored
  Eigen::MatrixXd omega2;     // K x (n+1), NaN where volatility is constant
  Eigen::VectorXd loglik;     // log f(y | volatilities, parameters) of each kept draw
  // Posterior mean of the innovation standard deviations, rows as in the
  // filter's shock scale (T rows or one), columns factor then series.
  Eigen::MatrixXd mean_shock_sd;
  int ar_fallbacks = 0;

  Eigen::Index kept() const { return loglik.size(); }
  int n() const { return spec.n(); }
};

struct GibbsOptions
{
  // Keep every idiosyncratic volatility path (K x nT); otherwise only their
  // posterior mean is retained.
  bool store_idio_paths = false;
  // Hold innovation variances and volatility paths at their initial values.
  bool sample_variances = true;
  std::function<void(int)> progress;
};

// One Gibbs chain over (states, loadings, AR coefficients, volatilities).
// Data are T x n with NaN for missing entries, already demeaned.
class GibbsSampler
{
public:
  GibbsSampler(const ModelSpec& spec, Eigen::MatrixXd data, GibbsOptions options = {})
      : spec_(spec), data_(std::move(data)), options_(std::move(options))
  {
    spec_.validate();
    layout_ = build_layout(spec_);
    if (data_.cols() != spec_.n())
      throw Error(ErrorKind::spec, "data have " + std::to_string(data_.cols()) + " series, specification expects " +
                                       std::to_string(spec_.n()));
    T_ = data_.rows();
    if (T_ < 2)
      throw Error(ErrorKind::data, "at least two periods are required");
    initialize();
  }

  const ModelSpec& spec() const { return spec_; }
  const StateLayout& layout() const { return layout_; }
  const ModelParams& params() const { return params_; }
  const StateDraw& states() const { return xi_; }
  const Eigen::MatrixXd& data() const { return data_; }
  Eigen::Index periods() const { return T_; }
  int ar_fallbacks() const { return fallbacks_; }

  // Log-likelihood of the data at the parameters and volatilities that
  // entered the most recent state draw.
  double last_loglik() const { return loglik_; }

  void set_data(Eigen::MatrixXd data)
  {
    if (data.rows() != T_ || data.cols() != spec_.n())
      throw Error(ErrorKind::build, "replacement data must keep the panel shape");
    data_ = std::move(data);
  }

  void set_params(const ModelParams& p) { params_ = p; }

  // Innovation standard deviations as the filter expects them.
  Eigen::MatrixXd shock_sd() const
  {
    const int n = spec_.n();
    const bool paths = spec_.sv_factor || spec_.sv_idio;
    Eigen::MatrixXd sd(paths ? T_ : 1, n + 1);
    sd.col(0) = spec_.sv_factor ? factor_vol_.sd() : Eigen::VectorXd::Constant(sd.rows(), std::sqrt(factor_var_));
    for (int i = 0; i < n; ++i)
      sd.col(i + 1) = spec_.sv_idio ? idio_vol_[static_cast<std::size_t>(i)].sd()
                                    : Eigen::VectorXd::Constant(sd.rows(), std::sqrt(idio_var_[i]));
    return sd;
  }

  double factor_variance() const { return factor_var_; }
  const Eigen::VectorXd& idio_variances() const { return idio_var_; }
  const VolState& factor_vol() const { return factor_vol_; }
  const VolState& idio_vol(int i) const { return idio_vol_[static_cast<std::size_t>(i)]; }

  StateSpaceSystem<CompanionTransition> system() const
  {
    return assemble_system(spec_, layout_, params_, shock_sd());
  }

  // States, loadings (with a joint redraw of each idiosyncratic path), idio AR,
  // factor AR, then volatilities.
  void sweep(Rng& rng)
  {
    const int n = spec_.n();
    const Eigen::MatrixXd sd = shock_sd();
    xi_ = simulation_smoother(assemble_system(spec_, layout_, params_, sd), data_, rng, &loglik_);

    const Eigen::Index fpre = layout_.factor.size - 1;
    const Eigen::VectorXd fhist = block_history(xi_, layout_.factor, fpre);
    for (int i = 0; i < n; ++i) {
      const auto& blk = layout_.idio[static_cast<std::size_t>(i)];
      const Frequency freq = layout_.frequency[static_cast<std::size_t>(i)];
      IdioModel m{freq, blk.size, params_.rho.row(i).transpose(), sd.col(i + 1), spec_.initial_variance,
                  spec_.jitter};
      const auto X = aggregated_regressors(fhist, fpre, freq, spec_.s);
      auto d = draw_loadings(data_.col(i), X, m, spec_.priors.loading_variance, i == spec_.normalized_series, rng);
      params_.loadings.row(i) = d.loadings.transpose();
      xi_.middleRows(blk.start, blk.size) = d.idio;
    }

    for (int i = 0; i < n; ++i) {
      const auto path = idio_path(i);
      const auto r = draw_ar_idio(path, aligned_sigma(sd.col(i + 1), spec_.p_q), spec_.p_q, spec_.priors, rng);
      fallbacks_ += r.fell_back;
      params_.rho.row(i) = r.coefs.transpose();
    }
    {
      const auto path = factor_path();
      const auto r = draw_ar_factor(path, aligned_sigma(sd.col(0), spec_.p_f), spec_.p_f, spec_.priors, rng);
      fallbacks_ += r.fell_back;
      params_.phi = r.coefs;
    }

    if (!options_.sample_variances)
      return;
    const auto& pr = spec_.priors;
    {
      const Eigen::VectorXd e = ar_residuals(factor_path(), params_.phi).tail(T_);
      if (spec_.sv_factor)
        draw_volatility(e, factor_vol_, pr, rng);
      else
        factor_var_ = draw_variance(e, pr.variance_dof, pr.variance_scale, rng);
    }
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd e = ar_residuals(idio_path(i), params_.rho.row(i).transpose()).tail(T_);
      if (spec_.sv_idio)
        draw_volatility(e, idio_vol_[static_cast<std::size_t>(i)], pr, rng);
      else
        idio_var_[i] = draw_variance(e, pr.variance_dof, pr.variance_scale, rng);
    }
  }

  // Overrides the constant innovation variances (homoskedastic blocks).
  void set_variances(double factor_var, const Eigen::VectorXd& idio_var)
  {
    factor_var_ = factor_var;
    idio_var_ = idio_var;
    factor_vol_.log_var.setConstant(std::log(factor_var));
    for (int i = 0; i < spec_.n(); ++i)
      idio_vol_[static_cast<std::size_t>(i)].log_var.setConstant(std::log(idio_var[i]));
  }

private:
  Eigen::VectorXd factor_path() const { return block_history(xi_, layout_.factor, spec_.p_f - 1); }

  Eigen::VectorXd idio_path(int i) const
  {
    return block_history(xi_, layout_.idio[static_cast<std::size_t>(i)], spec_.p_q - 1);
  }

  // Volatility aligned with an AR path that starts p-1 periods before t=0.
  Eigen::VectorXd aligned_sigma(const Eigen::VectorXd& sd, int p) const
  {
    if (sd.size() == 1)
      return sd;
    Eigen::VectorXd out(T_ + p - 1);
    out.head(p - 1).setOnes();
    out.tail(T_) = sd;
    return out;
  }

  void initialize()
  {
    const int n = spec_.n();
    params_.loadings = Eigen::MatrixXd::Zero(n, spec_.s + 1);
    params_.loadings.col(0).setOnes();
    params_.phi = minnesota_prior(spec_.p_f, spec_.priors.factor_first_lag_mean, spec_.priors.ar_shrinkage).mean;
    params_.rho = Eigen::MatrixXd::Zero(n, spec_.p_q);
    idio_var_.resize(n);
    for (int i = 0; i < n; ++i) {
      double sum = 0.0, sq = 0.0;
      int count = 0;
      for (Eigen::Index t = 0; t < T_; ++t)
        if (!is_missing(data_(t, i))) {
          sum += data_(t, i);
          sq += data_(t, i) * data_(t, i);
          ++count;
        }
      if (count == 0)
        throw Error(ErrorKind::data, "series " + std::to_string(i) + " has no observations");
      const double var = count > 1 ? (sq - sum * sum / count) / (count - 1) : 0.0;
      idio_var_[i] = var > 0.0 ? 0.5 * var : 1.0;
    }
    const double phi1 = params_.phi[0];
    factor_var_ = std::max(1.0 - phi1 * phi1, 0.05) * idio_var_[spec_.normalized_series];
    factor_vol_ = VolState{Eigen::VectorXd::Constant(T_, std::log(factor_var_)), 0.01};
    idio_vol_.clear();
    for (int i = 0; i < n; ++i)
      idio_vol_.push_back(VolState{Eigen::VectorXd::Constant(T_, std::log(idio_var_[i])), 0.01});
    xi_ = Eigen::MatrixXd::Zero(layout_.n_s, T_);
  }

  ModelSpec spec_;
  Eigen::MatrixXd data_;
  GibbsOptions options_;
  StateLayout layout_;
  Eigen::Index T_ = 0;
  ModelParams params_;
  double factor_var_ = 1.0;
  Eigen::VectorXd idio_var_;
  VolState factor_vol_;
  std::vector<VolState> idio_vol_;
  StateDraw xi_;
  double loglik_ = std::numeric_limits<double>::quiet_NaN();
  int fallbacks_ = 0;
};

namespace detail
{

inline void record_draw(const GibbsSampler& g, PosteriorDraws& d, Eigen::Index j, const GibbsOptions& opt)
{
  const auto& spec = g.spec();
  const int n = spec.n();
  const Eigen::Index T = g.periods();
  d.factor.row(j) = g.states().row(g.layout().factor.start);
  d.loadings.row(j) = g.params().loadings.transpose().reshaped().transpose();
  d.phi.row(j) = g.params().phi.transpose();
  d.rho.row(j) = g.params().rho.transpose().reshaped().transpose();
  const Eigen::MatrixXd sd = g.shock_sd();
  if (spec.sv_factor)
    d.factor_sd.row(j) = sd.col(0).transpose();
  else
    d.factor_sd(j, 0) = sd(0, 0);
  if (!spec.sv_idio)
    d.idio_sd.row(j) = sd.row(0).tail(n);
  else if (opt.store_idio_paths)
    for (int i = 0; i < n; ++i)
      d.idio_sd.row(j).segment(i * T, T) = sd.col(i + 1).transpose();
  d.omega2(j, 0) = spec.sv_factor ? g.factor_vol().omega2 : missing;
  for (int i = 0; i < n; ++i)
    d.omega2(j, i + 1) = spec.sv_idio ? g.idio_vol(i).omega2 : missing;
  d.mean_shock_sd += sd;
}

} // namespace detail

// Full chain on demeaned T x n data. The log-likelihood of kept draw j comes
// from the filter pass of the following iteration (or a final pass).
inline PosteriorDraws run_gibbs(const ModelSpec& spec, const Eigen::MatrixXd& data, std::uint64_t seed,
                                const GibbsOptions& options = {})
{
  Rng rng(seed);
  GibbsSampler g(spec, data, options);
  const int n = spec.n();
  const Eigen::Index T = g.periods();
  const int K = spec.chain.kept();
  PosteriorDraws d;
  d.spec = spec;
  d.seed = seed;
  d.periods = T;
  d.means = Eigen::VectorXd::Zero(n);
  d.factor.resize(K, T);
  d.loadings.resize(K, n * (spec.s + 1));
  d.phi.resize(K, spec.p_f);
  d.rho.resize(K, n * spec.p_q);
  d.factor_sd.resize(K, spec.sv_factor ? T : 1);
  d.idio_sd.resize(spec.sv_idio && !options.store_idio_paths ? 0 : K, spec.sv_idio ? n * T : n);
  d.omega2.resize(K, n + 1);
  d.loglik.resize(K);
  d.mean_shock_sd = Eigen::MatrixXd::Zero(spec.sv_factor || spec.sv_idio ? T : 1, n + 1);

  for (int it = 0; it < spec.chain.iterations; ++it) {
    try {
      g.sweep(rng);
    } catch (const Error& e) {
      throw Error(e.kind(), "iteration " + std::to_string(it + 1) + ": " + e.what());
    }
    const int j = it - spec.chain.burn_in;
    if (j >= 1)
      d.loglik[j - 1] = g.last_loglik();
    if (j >= 0)
      detail::record_draw(g, d, j, options);
    if (options.progress)
      options.progress(it + 1);
  }
  try {
    d.loglik[K - 1] = log_likelihood(g.system(), g.data());
  } catch (const Error& e) {
    throw Error(e.kind(), "final likelihood pass: " + std::string(e.what()));
  }
  d.mean_shock_sd /= K;
  d.ar_fallbacks = g.ar_fallbacks();
  return d;
}

// Checks that the panel matches the specification's series counts and order.
inline void check_panel_against_spec(const GrowthPanel& panel, const ModelSpec& spec)
{
  if (panel.count(Frequency::Quarterly) != spec.n_q || panel.count(Frequency::Monthly) != spec.n_m ||
      panel.count(Frequency::Weekly) != spec.n_w)
    throw Error(ErrorKind::spec, "series counts in the specification do not match the panel");
  validate_panel(panel);
}

// Demeans the panel, runs the chain, and records the removed means.
inline PosteriorDraws run_gibbs(const ModelSpec& spec, const GrowthPanel& panel, std::uint64_t seed,
                                const GibbsOptions& options = {})
{
  check_panel_against_spec(panel, spec);
  auto [centred, means] = demean(panel);
  auto d = run_gibbs(spec, centred.values, seed, options);
  d.means = means;
  return d;
}

// Parameters of kept draw j, and the posterior mean across draws.
inline ModelParams params_of(const PosteriorDraws& d, Eigen::Index j)
{
  const int n = d.n();
  ModelParams p;
  p.loadings = d.loadings.row(j).reshaped(d.spec.s + 1, n).transpose();
  p.phi = d.phi.row(j).transpose();
  p.rho = d.rho.row(j).reshaped(d.spec.p_q, n).transpose();
  return p;
}

inline ModelParams posterior_mean_params(const PosteriorDraws& d)
{
  const int n = d.n();
  ModelParams p;
  p.loadings = d.loadings.colwise().mean().reshaped(d.spec.s + 1, n).transpose();
  p.phi = d.phi.colwise().mean().transpose();
  p.rho = d.rho.colwise().mean().reshaped(d.spec.p_q, n).transpose();
  return p;
}

// Shock scale of kept draw j; needs stored idiosyncratic paths under
// idiosyncratic stochastic volatility.
inline Eigen::MatrixXd shock_sd_of(const PosteriorDraws& d, Eigen::Index j)
{
  const int n = d.n();
  const Eigen::Index T = d.periods;
  const bool paths = d.spec.sv_factor || d.spec.sv_idio;
  if (d.spec.sv_idio && d.idio_sd.rows() == 0)
    throw Error(ErrorKind::data, "idiosyncratic volatility paths were not stored");
  Eigen::MatrixXd sd(paths ? T : 1, n + 1);
  sd.col(0) = d.spec.sv_factor ? Eigen::VectorXd(d.factor_sd.row(j).transpose())
                               : Eigen::VectorXd::Constant(sd.rows(), d.factor_sd(j, 0));
  for (int i = 0; i < n; ++i)
    sd.col(i + 1) = d.spec.sv_idio ? Eigen::VectorXd(d.idio_sd.row(j).segment(i * T, T).transpose())
                                   : Eigen::VectorXd::Constant(sd.rows(), d.idio_sd(j, i));
  return sd;
}

inline Eigen::VectorXd posterior_mean_factor(const PosteriorDraws& d) { return d.factor.colwise().mean().transpose(); }

struct DicReport
{
  double mean_deviance = 0.0;      // D-bar
  double deviance_at_mean = 0.0;   // D(theta-tilde)
  double effective_params = 0.0;   // p_D
  double dic = 0.0;
};

inline DicReport dic_from(const Eigen::VectorXd& loglik, double loglik_at_mean)
{
  if (loglik.size() == 0)
    throw Error(ErrorKind::data, "no draws to compute the DIC from");
  DicReport r;
  r.mean_deviance = -2.0 * loglik.mean();
  r.deviance_at_mean = -2.0 * loglik_at_mean;
  r.effective_params = r.mean_deviance - r.deviance_at_mean;
  r.dic = r.mean_deviance + r.effective_params;
  return r;
}

// Conditional DIC: likelihood given the volatility paths, with the plug-in
// at the posterior mean of (loadings, phi, rho) and of the volatility paths.
// `data` must be the demeaned panel the chain was run on.
inline DicReport compute_dic(const PosteriorDraws& d, const Eigen::MatrixXd& data)
{
  if (d.kept() == 0)
    throw Error(ErrorKind::data, "no draws to compute the DIC from");
  const auto layout = build_layout(d.spec);
  const auto sys = assemble_system(d.spec, layout, posterior_mean_params(d), d.mean_shock_sd);
  return dic_from(d.loglik, log_likelihood(sys, data));
}

inline DicReport compute_dic(const PosteriorDraws& d, const GrowthPanel& panel)
{
  auto centred = panel.values;
  for (Eigen::Index i = 0; i < centred.cols(); ++i)
    centred.col(i).array() -= d.means[i];
  return compute_dic(d, centred);
}

// Split-half potential scale reduction for one scalar chain.
inline double split_psrf(const Eigen::VectorXd& x)
{
  const Eigen::Index m = x.size() / 2;
  if (m < 2)
    return std::numeric_limits<double>::quiet_NaN();
  const Eigen::VectorXd a = x.head(m), b = x.segment(m, m);
  auto var = [](const Eigen::VectorXd& v) { return (v.array() - v.mean()).square().sum() / (v.size() - 1.0); };
  const double W = 0.5 * (var(a) + var(b));
  const double mean = 0.5 * (a.mean() + b.mean());
  const double B = m * ((a.mean() - mean) * (a.mean() - mean) + (b.mean() - mean) * (b.mean() - mean));
  if (!(W > 0.0))
    return B > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
  const double vplus = (m - 1.0) / m * W + B / m;
  return std::sqrt(vplus / W);
}

struct Diagnostic
{
  std::string name;
  double mean = 0.0;
  double psrf = 0.0;
};

// Split-half diagnostics for every sampled scalar parameter. Fixed loadings
// and constant-volatility omegas are skipped.
inline std::vector<Diagnostic> chain_diagnostics(const PosteriorDraws& d,
                                                 const std::vector<std::string>& series_names = {})
{
  const int n = d.n();
  auto label = [&](int i) {
    return i < static_cast<int>(series_names.size()) ? series_names[static_cast<std::size_t>(i)] : std::to_string(i);
  };
  std::vector<Diagnostic> out;
  auto add = [&](std::string name, const Eigen::VectorXd& x) {
    out.push_back({std::move(name), x.mean(), split_psrf(x)});
  };
  for (int i = 0; i < n; ++i)
    for (int l = 0; l <= d.spec.s; ++l)
      if (!(i == d.spec.normalized_series && l == 0))
        add("lambda[" + label(i) + "," + std::to_string(l) + "]", d.loadings.col(i * (d.spec.s + 1) + l));
  for (int j = 0; j < d.spec.p_f; ++j)
    add("phi[" + std::to_string(j + 1) + "]", d.phi.col(j));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d.spec.p_q; ++j)
      add("rho[" + label(i) + "," + std::to_string(j + 1) + "]", d.rho.col(i * d.spec.p_q + j));
  if (d.spec.sv_factor)
    add("omega2[factor]", d.omega2.col(0));
  else
    add("sigma2[factor]", d.factor_sd.col(0).array().square().matrix());
  for (int i = 0; i < n; ++i) {
    if (d.spec.sv_idio)
      add("omega2[" + label(i) + "]", d.omega2.col(i + 1));
    else
      add("sigma2[" + label(i) + "]", d.idio_sd.col(i).array().square().matrix());
  }
  add("loglik", d.loglik);
  return out;
}

// ---------------------------------------------------------------------------
// Specification grid

enum class VolConfig
{
  none,
  factor,
  idio,
  both
};

inline std::string_view to_string(VolConfig v)
{
  switch (v) {
  case VolConfig::none: return "homoskedastic";
  case VolConfig::factor: return "factor-sv";
  case VolConfig::idio: return "idio-sv";
  case VolConfig::both: return "full-sv";
  }
  return "unknown";
}

inline ModelSpec with_config(ModelSpec spec, VolConfig v, int s)
{
  spec.s = s;
  spec.sv_factor = v == VolConfig::factor || v == VolConfig::both;
  spec.sv_idio = v == VolConfig::idio || v == VolConfig::both;
  return spec;
}

struct GridCell
{
  VolConfig vol = VolConfig::none;
  int s = 0;
  ModelSpec spec;
  std::optional<DicReport> report;
  std::string error;
};

// All eight cells (volatility configuration x s), each run with the same seed.
// Cells are ordered row-major: volatility configuration, then s. A failing cell
// records its error and the others still run.
inline std::vector<GridCell> run_grid(const GrowthPanel& panel, const ModelSpec& base, std::uint64_t seed,
                                      unsigned threads = 1)
{
  std::vector<GridCell> cells;
  for (auto v : {VolConfig::none, VolConfig::factor, VolConfig::idio, VolConfig::both})
    for (int s = 0; s <= 1; ++s)
      cells.push_back({v, s, with_config(base, v, s), std::nullopt, {}});
  check_panel_against_spec(panel, base);
  auto [centred, means] = demean(panel);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t k = next++; k < cells.size(); k = next++) {
      auto& c = cells[k];
      try {
        const auto d = run_gibbs(c.spec, centred.values, seed);
        c.report = compute_dic(d, centred.values);
      } catch (const std::exception& e) {
        c.error = e.what();
      }
    }
  };
  const unsigned workers = std::clamp<unsigned>(threads, 1u, static_cast<unsigned>(cells.size()));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w)
    pool.emplace_back(worker);
  worker();
  for (auto& t : pool)
    t.join();
  return cells;
}

// Index of the lowest-DIC cell among those that succeeded.
inline std::optional<std::size_t> best_cell(const std::vector<GridCell>& cells)
{
  std::optional<std::size_t> best;
  for (std::size_t k = 0; k < cells.size(); ++k)
    if (cells[k].report && (!best || cells[k].report->dic < cells[*best].report->dic))
      best = k;
  return best;
}

} // namespace hfei

#endif
