#ifndef HFEI_DRAW_STORE_HPP
#define HFEI_DRAW_STORE_HPP

// Draw store layout: a directory holding manifest.txt and one file per array.
// Arrays are little-endian IEEE-754 float64 in row-major order, with no header.
// The manifest is line-oriented "key value":
//
//   format hfei-draws 1
//   seed <u64>
//   spec_hash <16 hex digits of FNV-1a over the spec line>
//   spec <canonical key=value;... text>
//   periods <T>
//   first_stamp <year> <month> <week>
//   series <id>,<id>,...
//   ar_fallbacks <count>
//   array <name> <rows> <cols>       (one line per array file <name>.bin)

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hfei/calendar.hpp"
#include "hfei/config.hpp"
#include "hfei/error.hpp"
#include "hfei/estimator.hpp"

namespace hfei
{

static_assert(std::endian::native == std::endian::little, "draw store assumes a little-endian host");

struct StoredRun
{
  PosteriorDraws draws;
  std::vector<std::string> series;
  PseudoWeekStamp first_stamp;
};

namespace detail
{

inline void write_array(const std::filesystem::path& file, const Eigen::MatrixXd& m)
{
  std::ofstream os(file, std::ios::binary);
  if (!os)
    throw Error(ErrorKind::io, "cannot write " + file.string());
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  os.write(reinterpret_cast<const char*>(rm.data()), static_cast<std::streamsize>(rm.size() * sizeof(double)));
  if (!os)
    throw Error(ErrorKind::io, "failed writing " + file.string());
}

inline Eigen::MatrixXd read_array(const std::filesystem::path& file, Eigen::Index rows, Eigen::Index cols)
{
  std::ifstream is(file, std::ios::binary);
  if (!is)
    throw Error(ErrorKind::io, "cannot read " + file.string());
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
  is.read(reinterpret_cast<char*>(rm.data()), static_cast<std::streamsize>(rm.size() * sizeof(double)));
  if (is.gcount() != static_cast<std::streamsize>(rm.size() * sizeof(double)) || is.peek() != EOF)
    throw Error(ErrorKind::io, file.string() + " does not hold " + std::to_string(rows) + "x" + std::to_string(cols) +
                                   " values");
  return rm;
}

inline std::string hex64(std::uint64_t x)
{
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

} // namespace detail

inline void write_draw_store(const std::filesystem::path& dir, const PosteriorDraws& d,
                             const std::vector<std::string>& series, const PseudoWeekStamp& first_stamp)
{
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw Error(ErrorKind::io, "cannot create " + dir.string() + ": " + ec.message());
  const std::vector<std::pair<std::string, const Eigen::MatrixXd*>> arrays = {
      {"factor", &d.factor},       {"loadings", &d.loadings}, {"phi", &d.phi},
      {"rho", &d.rho},             {"factor_sd", &d.factor_sd}, {"idio_sd", &d.idio_sd},
      {"omega2", &d.omega2},       {"mean_shock_sd", &d.mean_shock_sd}};
  const std::string spec = d.spec.canonical();
  std::ostringstream man;
  man << "format hfei-draws 1\n"
      << "seed " << d.seed << '\n'
      << "spec_hash " << detail::hex64(fnv1a(spec)) << '\n'
      << "spec " << spec << '\n'
      << "periods " << d.periods << '\n'
      << "first_stamp " << first_stamp.year << ' ' << first_stamp.month << ' ' << first_stamp.week << '\n'
      << "series ";
  for (std::size_t i = 0; i < series.size(); ++i)
    man << (i ? "," : "") << series[i];
  man << "\nar_fallbacks " << d.ar_fallbacks << '\n';
  auto emit = [&](const std::string& name, const Eigen::MatrixXd& m) {
    detail::write_array(dir / (name + ".bin"), m);
    man << "array " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  };
  for (const auto& [name, m] : arrays)
    emit(name, *m);
  emit("loglik", d.loglik);
  emit("means", d.means);
  std::ofstream os(dir / "manifest.txt", std::ios::binary);
  os << man.str();
  if (!os)
    throw Error(ErrorKind::io, "cannot write manifest in " + dir.string());
}

inline StoredRun read_draw_store(const std::filesystem::path& dir)
{
  std::ifstream is(dir / "manifest.txt");
  if (!is)
    throw Error(ErrorKind::io, "no draw store manifest in " + dir.string());
  StoredRun run;
  auto& d = run.draws;
  std::string line, spec_text, hash;
  std::map<std::string, std::pair<Eigen::Index, Eigen::Index>> dims;
  bool format_ok = false;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "format") {
      std::string name;
      int version = 0;
      ls >> name >> version;
      format_ok = name == "hfei-draws" && version == 1;
    } else if (key == "seed")
      ls >> d.seed;
    else if (key == "spec_hash")
      ls >> hash;
    else if (key == "spec")
      spec_text = line.substr(5);
    else if (key == "periods")
      ls >> d.periods;
    else if (key == "first_stamp")
      ls >> run.first_stamp.year >> run.first_stamp.month >> run.first_stamp.week;
    else if (key == "series") {
      std::string rest = line.size() > 7 ? line.substr(7) : "";
      std::istringstream ss(rest);
      for (std::string id; std::getline(ss, id, ',');)
        run.series.push_back(id);
    } else if (key == "ar_fallbacks")
      ls >> d.ar_fallbacks;
    else if (key == "array") {
      std::string name;
      Eigen::Index r = 0, c = 0;
      ls >> name >> r >> c;
      dims[name] = {r, c};
    }
  }
  if (!format_ok)
    throw Error(ErrorKind::io, "unrecognised draw store format in " + dir.string());
  if (detail::hex64(fnv1a(spec_text)) != hash)
    throw Error(ErrorKind::io, "draw store spec hash mismatch in " + dir.string());
  d.spec = spec_from_canonical(spec_text);
  auto load = [&](const std::string& name) {
    auto it = dims.find(name);
    if (it == dims.end())
      throw Error(ErrorKind::io, "manifest lists no array '" + name + "'");
    return detail::read_array(dir / (name + ".bin"), it->second.first, it->second.second);
  };
  d.factor = load("factor");
  d.loadings = load("loadings");
  d.phi = load("phi");
  d.rho = load("rho");
  d.factor_sd = load("factor_sd");
  d.idio_sd = load("idio_sd");
  d.omega2 = load("omega2");
  d.mean_shock_sd = load("mean_shock_sd");
  d.loglik = load("loglik");
  d.means = load("means");
  if (static_cast<int>(run.series.size()) != d.n() || d.factor.cols() != d.periods)
    throw Error(ErrorKind::io, "draw store manifest is inconsistent with its arrays");
  return run;
}

} // namespace hfei

#endif
