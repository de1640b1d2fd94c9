#include "kcde/dataset.hpp"

#include <cmath>

namespace kcde {

namespace {

std::string
column_label(const std::vector<std::string>& names, std::size_t k)
{
  std::string label = "x[" + std::to_string(k) + "]";
  if (k < names.size() && !names[k].empty()) {
    label += " ('" + names[k] + "')";
  }
  return label;
}

} // namespace

RawDataset::RawDataset(std::size_t dim,
                       std::vector<double> x,
                       std::vector<double> y,
                       std::vector<std::string> x_names,
                       std::string y_name)
  : dim_(dim)
  , x_(std::move(x))
  , y_(std::move(y))
  , x_names_(std::move(x_names))
  , y_name_(std::move(y_name))
{
  if (dim_ == 0) {
    throw DataError("dataset needs at least one predictor column");
  }
  if (x_.size() != y_.size() * dim_) {
    throw DataError("predictor block has " + std::to_string(x_.size()) +
                    " values, expected " + std::to_string(y_.size() * dim_));
  }
  if (y_.size() < 2) {
    throw DataError("dataset needs at least 2 rows, got " +
                    std::to_string(y_.size()));
  }
  for (std::size_t i = 0; i < y_.size(); ++i) {
    bool finite = std::isfinite(y_[i]);
    for (std::size_t k = 0; k < dim_; ++k) {
      finite = finite && std::isfinite(x_[i * dim_ + k]);
    }
    if (!finite) {
      throw DataError("non-finite value in row " + std::to_string(i));
    }
  }
}

RawDataset
RawDataset::subset(std::span<const std::size_t> rows) const
{
  std::vector<double> x;
  std::vector<double> y;
  x.reserve(rows.size() * dim_);
  y.reserve(rows.size());
  for (auto i : rows) {
    auto row = x_row(i);
    x.insert(x.end(), row.begin(), row.end());
    y.push_back(y_[i]);
  }
  return RawDataset(dim_, std::move(x), std::move(y), x_names_, y_name_);
}

StandardizedDataset::StandardizedDataset(const RawDataset& raw,
                                         std::vector<double> sigma_x,
                                         double sigma_y)
  : dim_(raw.dim())
  , sigma_x_(std::move(sigma_x))
  , sigma_y_(sigma_y)
{
  check_scales();
  const std::size_t n = raw.size();
  x_.resize(n * dim_);
  y_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = raw.x_row(i);
    for (std::size_t k = 0; k < dim_; ++k) {
      x_[i * dim_ + k] = row[k] / sigma_x_[k];
    }
    y_[i] = raw.y(i) / sigma_y_;
  }
}

StandardizedDataset
StandardizedDataset::from_scaled(std::size_t dim,
                                 std::vector<double> x_scaled,
                                 std::vector<double> y_scaled,
                                 std::vector<double> sigma_x,
                                 double sigma_y)
{
  if (dim == 0 || y_scaled.empty() || x_scaled.size() != y_scaled.size() * dim) {
    throw DataError("standardized block has inconsistent shape");
  }
  StandardizedDataset out;
  out.dim_ = dim;
  out.x_ = std::move(x_scaled);
  out.y_ = std::move(y_scaled);
  out.sigma_x_ = std::move(sigma_x);
  out.sigma_y_ = sigma_y;
  out.check_scales();
  return out;
}

void
StandardizedDataset::check_scales() const
{
  if (sigma_x_.size() != dim_) {
    throw DataError("expected " + std::to_string(dim_) + " scale factors");
  }
  for (std::size_t k = 0; k < dim_; ++k) {
    if (!(sigma_x_[k] > 0.0) || !std::isfinite(sigma_x_[k])) {
      throw DataError("scale factor for x[" + std::to_string(k) +
                      "] must be positive");
    }
  }
  if (!(sigma_y_ > 0.0) || !std::isfinite(sigma_y_)) {
    throw DataError("scale factor for y must be positive");
  }
}

std::vector<double>
StandardizedDataset::scale_query(std::span<const double> x_raw) const
{
  if (x_raw.size() != dim_) {
    throw DataError("query has " + std::to_string(x_raw.size()) +
                    " predictors, model expects " + std::to_string(dim_));
  }
  std::vector<double> out(dim_);
  for (std::size_t k = 0; k < dim_; ++k) {
    out[k] = x_raw[k] / sigma_x_[k];
  }
  return out;
}

RawDataset
StandardizedDataset::destandardize() const
{
  const std::size_t n = size();
  std::vector<double> x(n * dim_);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < dim_; ++k) {
      x[i * dim_ + k] = x_[i * dim_ + k] * sigma_x_[k];
    }
    y[i] = y_[i] * sigma_y_;
  }
  return RawDataset(dim_, std::move(x), std::move(y));
}

double
sample_sd(std::span<const double> values)
{
  const double n = static_cast<double>(values.size());
  if (values.size() < 2) {
    return 0.0;
  }
  double mean = 0.0;
  for (double v : values) {
    mean += v;
  }
  mean /= n;
  double ss = 0.0;
  for (double v : values) {
    ss += (v - mean) * (v - mean);
  }
  return std::sqrt(ss / (n - 1.0));
}

StandardizedDataset
standardize(const RawDataset& raw)
{
  const std::size_t n = raw.size();
  const std::size_t d = raw.dim();
  std::vector<double> sigma_x(d);
  std::vector<double> column(n);
  for (std::size_t k = 0; k < d; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      column[i] = raw.x_row(i)[k];
    }
    sigma_x[k] = sample_sd(column);
    if (!(sigma_x[k] > 0.0)) {
      throw DataError("column " + column_label(raw.x_names(), k) +
                      " has zero variance");
    }
  }
  const double sigma_y = sample_sd(raw.y_data());
  if (!(sigma_y > 0.0)) {
    std::string label = "y";
    if (!raw.y_name().empty()) {
      label += " ('" + raw.y_name() + "')";
    }
    throw DataError("column " + label + " has zero variance");
  }
  return StandardizedDataset(raw, std::move(sigma_x), sigma_y);
}

} // namespace kcde
