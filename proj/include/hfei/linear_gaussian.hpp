#ifndef HFEI_LINEAR_GAUSSIAN_HPP
#define HFEI_LINEAR_GAUSSIAN_HPP

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hfei/error.hpp"

namespace hfei
{

// Transition policies used by the filter and smoother. A policy provides
//   size()                    state dimension
//   apply(v)                  v <- F v
//   propagate(P)              P <- F P F'
//   transpose_times(r)        F' r
//   dense()                   F as a dense matrix

class DenseTransition
{
public:
  DenseTransition() = default;
  explicit DenseTransition(Eigen::MatrixXd F) : F_(std::move(F))
  {
    if (F_.rows() != F_.cols())
      throw Error(ErrorKind::build, "transition matrix must be square");
  }

  Eigen::Index size() const { return F_.rows(); }
  void apply(Eigen::VectorXd& v) const { v = F_ * v; }
  void propagate(Eigen::MatrixXd& P) const { P = F_ * P * F_.transpose(); }
  Eigen::VectorXd transpose_times(const Eigen::VectorXd& r) const { return F_.transpose() * r; }
  const Eigen::MatrixXd& dense() const { return F_; }

private:
  Eigen::MatrixXd F_;
};

// Block-diagonal stack of companion matrices. Each block has its AR
// coefficients in the first row and a unit sub-diagonal below; coefficients may
// be fewer than the block size (trailing zeros).
class CompanionTransition
{
public:
  struct Block
  {
    Eigen::Index start = 0;
    Eigen::Index size = 0;
    Eigen::VectorXd coefs;
  };

  CompanionTransition() = default;
  CompanionTransition(Eigen::Index n, std::vector<Block> blocks) : n_(n), blocks_(std::move(blocks))
  {
    Eigen::Index next = 0;
    for (const auto& b : blocks_) {
      if (b.start < next || b.size < 1 || b.start + b.size > n_ || b.coefs.size() > b.size)
        throw Error(ErrorKind::build, "invalid companion block layout");
      next = b.start + b.size;
    }
  }

  Eigen::Index size() const { return n_; }
  const std::vector<Block>& blocks() const { return blocks_; }

  void apply(Eigen::VectorXd& v) const
  {
    for (const auto& b : blocks_) {
      const double head = b.coefs.dot(v.segment(b.start, b.coefs.size()));
      for (Eigen::Index r = b.size - 1; r > 0; --r)
        v[b.start + r] = v[b.start + r - 1];
      v[b.start] = head;
    }
  }

  // X <- X F'. Column operations only, which suits column-major storage.
  void apply_right_transpose(Eigen::MatrixXd& X) const
  {
    Eigen::VectorXd head(X.rows());
    for (const auto& b : blocks_) {
      head.setZero();
      for (Eigen::Index j = 0; j < b.coefs.size(); ++j)
        if (b.coefs[j] != 0.0)
          head.noalias() += b.coefs[j] * X.col(b.start + j);
      for (Eigen::Index r = b.size - 1; r > 0; --r)
        X.col(b.start + r) = X.col(b.start + r - 1);
      X.col(b.start) = head;
    }
  }

  void propagate(Eigen::MatrixXd& P) const
  {
    // P F' then (P F')' F' = F P F'.
    apply_right_transpose(P);
    P.transposeInPlace();
    apply_right_transpose(P);
  }

  Eigen::VectorXd transpose_times(const Eigen::VectorXd& r) const
  {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n_);
    for (const auto& b : blocks_) {
      for (Eigen::Index j = 0; j < b.size; ++j) {
        double acc = j < b.coefs.size() ? b.coefs[j] * r[b.start] : 0.0;
        if (j + 1 < b.size)
          acc += r[b.start + j + 1];
        out[b.start + j] = acc;
      }
    }
    return out;
  }

  Eigen::MatrixXd dense() const
  {
    Eigen::MatrixXd F = Eigen::MatrixXd::Zero(n_, n_);
    for (const auto& b : blocks_) {
      for (Eigen::Index j = 0; j < b.coefs.size(); ++j)
        F(b.start, b.start + j) = b.coefs[j];
      for (Eigen::Index r = 1; r < b.size; ++r)
        F(b.start + r, b.start + r - 1) = 1.0;
    }
    return F;
  }

private:
  Eigen::Index n_ = 0;
  std::vector<Block> blocks_;
};

// y_t = H xi_t (no measurement noise)
// xi_t = F xi_{t-1} + sum_k shock_sd(t, k) e_{slot_k} v_{k,t},  v ~ N(0, I)
// xi_1 ~ N(initial_mean, initial_cov)
template <class Transition>
struct StateSpaceSystem
{
  Transition transition;
  Eigen::MatrixXd design;
  std::vector<Eigen::Index> shock_slots;
  // One row per period, or a single row for constant volatilities.
  Eigen::MatrixXd shock_sd;
  Eigen::VectorXd initial_mean;
  Eigen::MatrixXd initial_cov;
  double jitter = 1e-10;

  Eigen::Index states() const { return design.cols(); }
  Eigen::Index observables() const { return design.rows(); }

  double shock_sd_at(Eigen::Index t, Eigen::Index k) const
  {
    return shock_sd(shock_sd.rows() == 1 ? 0 : t, k);
  }

  void check(Eigen::Index periods) const
  {
    const auto n = states();
    if (transition.size() != n || initial_mean.size() != n || initial_cov.rows() != n || initial_cov.cols() != n)
      throw Error(ErrorKind::build, "state-space dimensions are inconsistent");
    if (shock_sd.cols() != static_cast<Eigen::Index>(shock_slots.size()) ||
        (shock_sd.rows() != 1 && shock_sd.rows() != periods))
      throw Error(ErrorKind::build, "shock scale must have one column per shock slot and 1 or T rows");
    for (auto s : shock_slots)
      if (s < 0 || s >= n)
        throw Error(ErrorKind::build, "shock slot out of range");
  }
};

} // namespace hfei

#endif
