#include "kcde/kernels.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace kcde {

namespace {

double
ball_normalizer(int dim)
{
  const double d = dim;
  return std::tgamma(d / 2.0 + 1.0) * (d + 2.0) /
         (2.0 * std::pow(std::numbers::pi, d / 2.0));
}

} // namespace

EpanechnikovKernel::EpanechnikovKernel(int dim)
  : dim_(dim)
{
  if (dim < 1) {
    throw std::invalid_argument("kernel dimension must be positive, got " +
                                std::to_string(dim));
  }
  normalizer_ = ball_normalizer(dim);
}

double
EpanechnikovKernel::profile(double u) const
{
  return u < 1.0 ? normalizer_ * (1.0 - u * u) : 0.0;
}

double
EpanechnikovKernel::scaled(double distance, double h) const
{
  if (!(h > 0.0)) {
    throw std::invalid_argument("bandwidth must be positive");
  }
  return profile(distance / h) / std::pow(h, dim_);
}

std::pair<double, double>
EpanechnikovKernel::bounds(double dist_min, double dist_max, double h) const
{
  return { scaled(dist_max, h), scaled(dist_min, h) };
}

ScaledKernel::ScaledKernel(const EpanechnikovKernel& kernel, double h)
  : h_(h)
  , h_sq_(h * h)
  , inv_h_sq_(1.0 / (h * h))
  , coef_(kernel.normalizer() / std::pow(h, kernel.dim()))
{
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw std::invalid_argument("bandwidth must be positive and finite");
  }
}

double
sample_epanechnikov(Rng& rng)
{
  // Three-uniform order statistic construction.
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double u1 = unit(rng);
  const double u2 = unit(rng);
  const double u3 = unit(rng);
  if (std::abs(u3) >= std::abs(u1) && std::abs(u3) >= std::abs(u2)) {
    return u2;
  }
  return u3;
}

double
epanechnikov_cdf(double u)
{
  if (u <= -1.0)
    return 0.0;
  if (u >= 1.0)
    return 1.0;
  return 0.5 + 0.75 * u - 0.25 * u * u * u;
}

std::uint64_t
derive_seed(std::uint64_t master, std::uint64_t index)
{
  // splitmix64 over a combined state
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

} // namespace kcde
