#ifndef HFEI_CONFIG_HPP
#define HFEI_CONFIG_HPP

#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <string_view>

#include "hfei/error.hpp"
#include "hfei/model_spec.hpp"

namespace hfei
{

// Flat key=value configuration. Blank lines and lines starting with '#' are
// ignored; later keys override earlier ones.
using Config = std::map<std::string, std::string>;

inline std::string_view trim(std::string_view s)
{
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline Config parse_config(std::istream& is, const std::string& source = "config")
{
  Config out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#')
      continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos || trim(t.substr(0, eq)).empty())
      throw Error(ErrorKind::input, source + " line " + std::to_string(lineno) + ": expected key=value");
    out[std::string(trim(t.substr(0, eq)))] = std::string(trim(t.substr(eq + 1)));
  }
  return out;
}

// Splits "a=1;b=2" into a config.
inline Config parse_inline_config(std::string_view text)
{
  Config out;
  while (!text.empty()) {
    const auto semi = text.find(';');
    const auto item = trim(text.substr(0, semi));
    if (!item.empty()) {
      const auto eq = item.find('=');
      if (eq == std::string_view::npos)
        throw Error(ErrorKind::input, "malformed setting '" + std::string(item) + "'");
      out[std::string(trim(item.substr(0, eq)))] = std::string(trim(item.substr(eq + 1)));
    }
    if (semi == std::string_view::npos)
      break;
    text.remove_prefix(semi + 1);
  }
  return out;
}

inline long long parse_integer(const std::string& key, const std::string& v)
{
  long long x = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size())
    throw Error(ErrorKind::input, "setting '" + key + "': '" + v + "' is not an integer");
  return x;
}

inline double parse_real(const std::string& key, const std::string& v)
{
  if (v == "inf" || v == "infinity")
    return std::numeric_limits<double>::infinity();
  double x = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size())
    throw Error(ErrorKind::input, "setting '" + key + "': '" + v + "' is not a number");
  return x;
}

inline bool parse_flag(const std::string& key, const std::string& v)
{
  if (v == "1" || v == "true" || v == "yes")
    return true;
  if (v == "0" || v == "false" || v == "no")
    return false;
  throw Error(ErrorKind::input, "setting '" + key + "': '" + v + "' is not a boolean");
}

// Applies the model keys found in `cfg` (the same names ModelSpec::canonical
// writes) and returns the keys it consumed.
inline std::set<std::string> apply_spec_config(ModelSpec& spec, const Config& cfg)
{
  std::set<std::string> used;
  auto integer = [&](const char* key, int& field) {
    if (auto it = cfg.find(key); it != cfg.end()) {
      field = static_cast<int>(parse_integer(key, it->second));
      used.insert(key);
    }
  };
  auto real = [&](const char* key, double& field) {
    if (auto it = cfg.find(key); it != cfg.end()) {
      field = parse_real(key, it->second);
      used.insert(key);
    }
  };
  auto flag = [&](const char* key, bool& field) {
    if (auto it = cfg.find(key); it != cfg.end()) {
      field = parse_flag(key, it->second);
      used.insert(key);
    }
  };
  integer("p_f", spec.p_f);
  integer("p_q", spec.p_q);
  integer("s", spec.s);
  flag("sv_factor", spec.sv_factor);
  flag("sv_idio", spec.sv_idio);
  integer("n_q", spec.n_q);
  integer("n_m", spec.n_m);
  integer("n_w", spec.n_w);
  integer("normalized", spec.normalized_series);
  real("init_var", spec.initial_variance);
  real("jitter", spec.jitter);
  auto& pr = spec.priors;
  real("gamma", pr.ar_shrinkage);
  real("phi1", pr.factor_first_lag_mean);
  real("v_lambda", pr.loading_variance);
  real("vol_dof", pr.vol_dof);
  real("vol_scale", pr.vol_scale);
  real("var_dof", pr.variance_dof);
  real("var_scale", pr.variance_scale);
  real("h0_mean", pr.log_var_mean);
  real("h0_var", pr.log_var_variance);
  integer("iterations", spec.chain.iterations);
  integer("burn_in", spec.chain.burn_in);
  return used;
}

inline ModelSpec spec_from_canonical(std::string_view text)
{
  ModelSpec spec;
  const auto cfg = parse_inline_config(text);
  const auto used = apply_spec_config(spec, cfg);
  for (const auto& [k, v] : cfg)
    if (!used.count(k))
      throw Error(ErrorKind::input, "unknown model setting '" + k + "'");
  return spec;
}

} // namespace hfei

#endif
