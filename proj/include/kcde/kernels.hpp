#pragma once

#include <cstdint>
#include <random>
#include <utility>

namespace kcde {

using Rng = std::mt19937_64;

//! Radial Epanechnikov kernel c_d (1 - |u|^2) on the unit ball of R^dim.
class EpanechnikovKernel
{
public:
  explicit EpanechnikovKernel(int dim);

  int dim() const { return dim_; }

  //! Constant making the profile integrate to one over R^dim.
  double normalizer() const { return normalizer_; }

  //! Unscaled radial profile; zero for u >= 1.
  double profile(double u) const;

  //! h^-dim * profile(distance / h).
  double scaled(double distance, double h) const;

  //! (vmin, vmax) over all distances in [dist_min, dist_max].
  std::pair<double, double> bounds(double dist_min,
                                   double dist_max,
                                   double h) const;

private:
  int dim_;
  double normalizer_;
};

//! A kernel with its bandwidth folded in, evaluated on squared distances.
//!
//! This is the form used on every hot path. The support test is done on
//! squared distances so that tree bounds, brute-force sums and the
//! divergence guard all agree bit-for-bit on which pairs are inside.
class ScaledKernel
{
public:
  ScaledKernel(const EpanechnikovKernel& kernel, double h);

  double operator()(double dist_sq) const
  {
    return dist_sq < h_sq_ ? coef_ * (1.0 - dist_sq * inv_h_sq_) : 0.0;
  }

  double bandwidth() const { return h_; }
  double bandwidth_sq() const { return h_sq_; }
  //! Value at distance zero.
  double peak() const { return coef_; }

private:
  double h_;
  double h_sq_;
  double inv_h_sq_;
  double coef_;
};

//! Exact draw from the 1-d Epanechnikov density on [-1, 1].
double sample_epanechnikov(Rng& rng);

//! CDF of the 1-d Epanechnikov density.
double epanechnikov_cdf(double u);

//! Stateless 64-bit mixer used to derive independent child seeds.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

} // namespace kcde
