#include "kcde/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace kcde {

Interval
narrowest_interval(std::span<const double> sorted, double alpha)
{
  if (sorted.empty()) {
    throw std::invalid_argument("cannot build an interval from no samples");
  }
  if (!(alpha >= 0.0) || !(alpha < 1.0)) {
    throw std::invalid_argument("alpha must lie in [0, 1)");
  }
  const std::size_t n = sorted.size();
  // The small slack keeps (1 - 0.05) * 5000 from rounding up to 4751.
  auto window = static_cast<std::size_t>(
    std::ceil((1.0 - alpha) * static_cast<double>(n) - 1e-9));
  window = std::clamp<std::size_t>(window, 1, n);
  std::size_t best = 0;
  double best_width = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + window <= n; ++i) {
    const double width = sorted[i + window - 1] - sorted[i];
    if (width < best_width) {
      best_width = width;
      best = i;
    }
  }
  return { sorted[best], sorted[best + window - 1] };
}

ConditionalDensityModel::ConditionalDensityModel(StandardizedDataset data,
                                                 BandwidthPair h)
  : data_(std::move(data))
  , h_(h)
  , ky_(EpanechnikovKernel(1), h.h1)
  , kx_(EpanechnikovKernel(static_cast<int>(data_.dim())), h.h2)
{}

double
ConditionalDensityModel::x_kernel_values(std::span<const double> x_scaled,
                                         std::vector<double>& out) const
{
  const std::size_t n = data_.size();
  out.resize(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = kx_(squared_distance(x_scaled.data(), data_.x_row(i).data(), data_.dim()));
    total += out[i];
  }
  return total;
}

std::vector<double>
ConditionalDensityModel::checked_weights(std::span<const double> x) const
{
  const auto xs = data_.scale_query(x);
  std::vector<double> w;
  const double total = x_kernel_values(xs, w);
  if (!(total > 0.0)) {
    throw UnsupportedQuery("unsupported query point: no training point within "
                           "the x-kernel bandwidth");
  }
  for (auto& v : w) {
    v /= total;
  }
  return w;
}

std::vector<double>
ConditionalDensityModel::weights(std::span<const double> x) const
{
  return checked_weights(x);
}

double
ConditionalDensityModel::density(std::span<const double> x, double y) const
{
  const auto xs = data_.scale_query(x);
  std::vector<double> kx;
  const double den = x_kernel_values(xs, kx);
  if (!(den > 0.0)) {
    throw UnsupportedQuery("unsupported query point: no training point within "
                           "the x-kernel bandwidth");
  }
  const double ys = y / data_.sigma_y();
  double num = 0.0;
  for (std::size_t i = 0; i < kx.size(); ++i) {
    if (kx[i] == 0.0) {
      continue;
    }
    const double dy = ys - data_.y(i);
    num += ky_(dy * dy) * kx[i];
  }
  return num / den / data_.sigma_y();
}

double
ConditionalDensityModel::expectation(std::span<const double> x) const
{
  const auto w = checked_weights(x);
  double mean = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    mean += w[i] * data_.y(i);
  }
  return mean * data_.sigma_y();
}

std::vector<double>
ConditionalDensityModel::sample_y(std::span<const double> x,
                                  std::size_t count,
                                  Rng& rng) const
{
  const auto w = checked_weights(x);
  std::discrete_distribution<std::size_t> component(w.begin(), w.end());
  std::vector<double> out(count);
  for (auto& v : out) {
    const std::size_t i = component(rng);
    v = (data_.y(i) + h_.h1 * sample_epanechnikov(rng)) * data_.sigma_y();
  }
  return out;
}

Interval
ConditionalDensityModel::prediction_interval(std::span<const double> x,
                                             double alpha,
                                             std::size_t n_samples,
                                             Rng& rng) const
{
  if (n_samples < 100) {
    throw std::invalid_argument("prediction intervals need at least 100 samples");
  }
  auto draws = sample_y(x, n_samples, rng);
  std::sort(draws.begin(), draws.end());
  return narrowest_interval(draws, alpha);
}

double
ConditionalDensityModel::marginal_density(std::span<const double> x) const
{
  const auto xs = data_.scale_query(x);
  std::vector<double> kx;
  const double total = x_kernel_values(xs, kx);
  double jacobian = 1.0;
  for (double s : data_.sigma_x()) {
    jacobian *= s;
  }
  return total / static_cast<double>(data_.size()) / jacobian;
}

std::vector<double>
ConditionalDensityModel::expectations(std::span<const double> queries) const
{
  const std::size_t d = data_.dim();
  if (queries.size() % d != 0) {
    throw DataError("query block is not a multiple of the predictor dimension");
  }
  const auto rows = static_cast<std::ptrdiff_t>(queries.size() / d);
  std::vector<double> out(static_cast<std::size_t>(rows));
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    try {
      out[r] = expectation(queries.subspan(static_cast<std::size_t>(r) * d, d));
    } catch (const UnsupportedQuery&) {
      out[r] = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return out;
}

} // namespace kcde
