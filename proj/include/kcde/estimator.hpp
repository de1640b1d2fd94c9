#pragma once

#include "kcde/dataset.hpp"
#include "kcde/kernels.hpp"
#include "kcde/likelihood.hpp"

#include <span>
#include <stdexcept>
#include <vector>

namespace kcde {

//! The query x has no training point inside the x-kernel support, so the
//! conditional density is undefined there.
class UnsupportedQuery : public std::domain_error
{
public:
  using std::domain_error::domain_error;
};

struct Interval
{
  double lo;
  double hi;
};

//! Narrowest window of the sorted samples holding ceil((1 - alpha) n) of them.
//! Ties go to the lowest window. `sorted` must be ascending.
Interval
narrowest_interval(std::span<const double> sorted, double alpha);

//! What the evaluation metrics need from a fitted model. All queries are in
//! raw units and throw UnsupportedQuery when x is outside the support.
class ConditionalModel
{
public:
  virtual ~ConditionalModel() = default;

  virtual std::size_t dim() const = 0;
  virtual double density(std::span<const double> x, double y) const = 0;
  virtual double expectation(std::span<const double> x) const = 0;
  virtual Interval prediction_interval(std::span<const double> x,
                                       double alpha,
                                       std::size_t n_samples,
                                       Rng& rng) const = 0;
};

//! Double-kernel (Nadaraya-Watson) conditional density estimate.
class ConditionalDensityModel final : public ConditionalModel
{
public:
  static constexpr std::size_t default_interval_samples = 5000;

  ConditionalDensityModel(StandardizedDataset data, BandwidthPair h);

  std::size_t dim() const override { return data_.dim(); }
  std::size_t size() const { return data_.size(); }
  BandwidthPair bandwidths() const { return h_; }
  const StandardizedDataset& data() const { return data_; }

  //! Normalized x-kernel weights over the training rows.
  std::vector<double> weights(std::span<const double> x) const;

  //! f(y | x) in raw units.
  double density(std::span<const double> x, double y) const override;

  //! Mean of f(y | x); exact because every mixture component is symmetric.
  double expectation(std::span<const double> x) const override;

  std::vector<double> sample_y(std::span<const double> x,
                               std::size_t count,
                               Rng& rng) const;

  Interval prediction_interval(std::span<const double> x,
                               double alpha,
                               std::size_t n_samples,
                               Rng& rng) const override;

  //! Kernel density estimate of the predictors alone, in raw units.
  double marginal_density(std::span<const double> x) const;

  //! Expectations for a row-major block of queries, computed in parallel.
  //! Unsupported rows come back as NaN.
  std::vector<double> expectations(std::span<const double> queries) const;

private:
  // Raw x-kernel values at a standardized query, plus their sum.
  double x_kernel_values(std::span<const double> x_scaled,
                         std::vector<double>& out) const;
  std::vector<double> checked_weights(std::span<const double> x) const;

  StandardizedDataset data_;
  BandwidthPair h_;
  ScaledKernel ky_;
  ScaledKernel kx_;
};

} // namespace kcde
