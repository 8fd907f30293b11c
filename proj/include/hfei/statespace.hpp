#ifndef HFEI_STATESPACE_HPP
#define HFEI_STATESPACE_HPP

#include <algorithm>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hfei/error.hpp"
#include "hfei/linear_gaussian.hpp"
#include "hfei/model_spec.hpp"
#include "hfei/panel.hpp"

namespace hfei
{

struct StateBlock
{
  Eigen::Index start = 0;
  Eigen::Index size = 0;
};

// Layout of the state vector
//   [f_t .. f_{t-11-s} | u^q blocks (12 lags) | u^m blocks (d+1) | u^w blocks (p_q+1)]
// with d = max(p_q, 4). Block 0 is the factor, block i+1 the i-th series.
class StateLayout
{
public:
  int s = 0;
  int p_f = 2;
  int p_q = 3;
  int d = 4;
  int n_q = 0;
  int n_m = 0;
  int n_w = 0;

  StateBlock factor;
  std::vector<StateBlock> idio;
  std::vector<Frequency> frequency;
  Eigen::Index n_s = 0;

  int n() const { return n_q + n_m + n_w; }
  int blocks() const { return n() + 1; }

  const StateBlock& block(int b) const { return b == 0 ? factor : idio[static_cast<std::size_t>(b - 1)]; }

  Eigen::Index position(int b, int lag) const
  {
    const auto& blk = block(b);
    if (lag < 0 || lag >= blk.size)
      throw Error(ErrorKind::build, "lag outside state block");
    return blk.start + lag;
  }

  std::pair<int, int> locate(Eigen::Index pos) const
  {
    for (int b = 0; b < blocks(); ++b) {
      const auto& blk = block(b);
      if (pos >= blk.start && pos < blk.start + blk.size)
        return {b, static_cast<int>(pos - blk.start)};
    }
    throw Error(ErrorKind::build, "state position out of range");
  }

  // Factor slot followed by the current-period slot of each idiosyncratic block.
  std::vector<Eigen::Index> shock_slots() const
  {
    std::vector<Eigen::Index> slots{factor.start};
    for (const auto& b : idio)
      slots.push_back(b.start);
    return slots;
  }
};

// Number of weekly periods averaged into one observation.
inline int aggregation_window(Frequency f)
{
  switch (f) {
  case Frequency::Quarterly: return 12;
  case Frequency::Monthly: return 4;
  case Frequency::Weekly: return 1;
  }
  return 1;
}

inline StateLayout build_layout(const ModelSpec& spec)
{
  spec.validate();
  StateLayout L;
  L.s = spec.s;
  L.p_f = spec.p_f;
  L.p_q = spec.p_q;
  L.d = std::max(spec.p_q, 4);
  L.n_q = spec.n_q;
  L.n_m = spec.n_m;
  L.n_w = spec.n_w;
  L.factor = {0, 12 + spec.s};
  Eigen::Index next = L.factor.size;
  auto add = [&](int count, Eigen::Index size, Frequency f) {
    for (int i = 0; i < count; ++i) {
      L.idio.push_back({next, size});
      L.frequency.push_back(f);
      next += size;
    }
  };
  add(spec.n_q, 12, Frequency::Quarterly);
  add(spec.n_m, L.d + 1, Frequency::Monthly);
  add(spec.n_w, spec.p_q + 1, Frequency::Weekly);
  L.n_s = next;
  return L;
}

// Observation matrix. Row i averages Lambda_i(L) f over the series' aggregation
// window (12 weeks quarterly, 4 monthly, 1 weekly) and does the same for its
// own idiosyncratic component.
inline Eigen::MatrixXd build_H(const StateLayout& L, const Eigen::MatrixXd& loadings)
{
  if (loadings.rows() != L.n() || loadings.cols() != L.s + 1)
    throw Error(ErrorKind::build, "loadings must be n x (s+1)");
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(L.n(), L.n_s);
  for (int i = 0; i < L.n(); ++i) {
    const int w = aggregation_window(L.frequency[static_cast<std::size_t>(i)]);
    const double scale = 1.0 / w;
    for (int j = 0; j < w; ++j) {
      for (int l = 0; l <= L.s; ++l)
        H(i, L.factor.start + j + l) += scale * loadings(i, l);
      H(i, L.idio[static_cast<std::size_t>(i)].start + j) = scale;
    }
  }
  return H;
}

inline CompanionTransition companion_transition(const StateLayout& L, const Eigen::VectorXd& phi,
                                                const Eigen::MatrixXd& rho)
{
  if (phi.size() != L.p_f || rho.rows() != L.n() || rho.cols() != L.p_q)
    throw Error(ErrorKind::build, "AR coefficient dimensions do not match the layout");
  std::vector<CompanionTransition::Block> blocks;
  blocks.push_back({L.factor.start, L.factor.size, phi});
  for (int i = 0; i < L.n(); ++i) {
    const auto& b = L.idio[static_cast<std::size_t>(i)];
    blocks.push_back({b.start, b.size, rho.row(i).transpose()});
  }
  return CompanionTransition(L.n_s, std::move(blocks));
}

inline Eigen::MatrixXd build_F(const StateLayout& L, const Eigen::VectorXd& phi, const Eigen::MatrixXd& rho)
{
  return companion_transition(L, phi, rho).dense();
}

// Innovation scale per shock slot: sigma_f first, then one sigma per series.
inline Eigen::VectorXd build_Rt(const StateLayout& L, double sigma_f, const Eigen::VectorXd& sigma_idio)
{
  if (sigma_idio.size() != L.n())
    throw Error(ErrorKind::build, "one idiosyncratic sigma per series required");
  if (!(sigma_f > 0.0) || !(sigma_idio.array() > 0.0).all())
    throw Error(ErrorKind::build, "innovation scales must be positive");
  Eigen::VectorXd r(L.n() + 1);
  r[0] = sigma_f;
  r.tail(L.n()) = sigma_idio;
  return r;
}

// Dense R_t R_t' for a given scale vector from build_Rt.
inline Eigen::MatrixXd innovation_covariance(const StateLayout& L, const Eigen::VectorXd& scales)
{
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(L.n_s, L.n_s);
  const auto slots = L.shock_slots();
  for (std::size_t k = 0; k < slots.size(); ++k)
    Q(slots[k], slots[k]) = scales[static_cast<Eigen::Index>(k)] * scales[static_cast<Eigen::Index>(k)];
  return Q;
}

struct ModelParams
{
  Eigen::MatrixXd loadings;  // n x (s+1)
  Eigen::VectorXd phi;       // p_f
  Eigen::MatrixXd rho;       // n x p_q
};

// Full system for the filter. `shock_sd` has columns (factor, series 1..n) and
// either one row (constant volatilities) or one row per period.
inline StateSpaceSystem<CompanionTransition> assemble_system(const ModelSpec& spec, const StateLayout& L,
                                                             const ModelParams& params,
                                                             const Eigen::MatrixXd& shock_sd)
{
  if (shock_sd.cols() != L.n() + 1)
    throw Error(ErrorKind::build, "shock scale needs n+1 columns");
  if (!(shock_sd.array() > 0.0).all())
    throw Error(ErrorKind::build, "innovation scales must be positive");
  StateSpaceSystem<CompanionTransition> sys;
  sys.transition = companion_transition(L, params.phi, params.rho);
  sys.design = build_H(L, params.loadings);
  sys.shock_slots = L.shock_slots();
  sys.shock_sd = shock_sd;
  sys.initial_mean = Eigen::VectorXd::Zero(L.n_s);
  sys.initial_cov = spec.initial_variance * Eigen::MatrixXd::Identity(L.n_s, L.n_s);
  sys.jitter = spec.jitter;
  return sys;
}

} // namespace hfei

#endif
