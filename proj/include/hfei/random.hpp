#ifndef HFEI_RANDOM_HPP
#define HFEI_RANDOM_HPP

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Dense>

#include "hfei/error.hpp"

namespace hfei
{

using Rng = std::mt19937_64;

inline double standard_normal(Rng& rng) { return std::normal_distribution<double>{}(rng); }

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>{}(rng); }

inline Eigen::VectorXd standard_normal_vector(Eigen::Index n, Rng& rng)
{
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i)
    z[i] = standard_normal(rng);
  return z;
}

// Gamma with shape k and rate r (mean k / r).
inline double gamma_rate(double shape, double rate, Rng& rng)
{
  return std::gamma_distribution<double>{shape, 1.0}(rng) / rate;
}

// Inverse gamma with density proportional to x^{-shape-1} exp(-scale / x).
inline double inverse_gamma(double shape, double scale, Rng& rng)
{
  return scale / std::gamma_distribution<double>{shape, 1.0}(rng);
}

inline double beta(double a, double b, Rng& rng)
{
  const double x = std::gamma_distribution<double>{a, 1.0}(rng);
  const double y = std::gamma_distribution<double>{b, 1.0}(rng);
  return x / (x + y);
}

// Standard normal truncated to [lower, inf) (Robert, 1995).
inline double truncated_standard_normal_below(double lower, Rng& rng)
{
  if (lower <= 0.0) {
    for (;;) {
      const double z = standard_normal(rng);
      if (z >= lower)
        return z;
    }
  }
  const double alpha = 0.5 * (lower + std::sqrt(lower * lower + 4.0));
  for (;;) {
    const double z = lower - std::log(uniform01(rng)) / alpha;
    if (std::log(uniform01(rng)) <= -0.5 * (z - alpha) * (z - alpha))
      return z;
  }
}

// N(mean, sd^2) truncated to (-inf, upper].
inline double truncated_normal_above(double mean, double sd, double upper, Rng& rng)
{
  return mean - sd * truncated_standard_normal_below((mean - upper) / sd, rng);
}

// Draw from N(P^{-1} b, P^{-1}) given a precision matrix P.
inline Eigen::VectorXd draw_from_precision(const Eigen::MatrixXd& precision, const Eigen::VectorXd& b, Rng& rng)
{
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorKind::numeric, "posterior precision is not positive definite");
  const Eigen::VectorXd mean = llt.solve(b);
  return mean + llt.matrixU().solve(standard_normal_vector(b.size(), rng));
}

} // namespace hfei

#endif
