#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace kcde {

//! Raised for malformed or degenerate input data.
class DataError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

//! n rows of (x in R^d, y in R), x stored row-major.
class RawDataset
{
public:
  RawDataset() = default;

  //! Takes ownership of row-major x (n*d values) and y (n values).
  //! Throws DataError on shape mismatch, n < 2 or non-finite values.
  RawDataset(std::size_t dim,
             std::vector<double> x,
             std::vector<double> y,
             std::vector<std::string> x_names = {},
             std::string y_name = {});

  std::size_t size() const { return y_.size(); }
  std::size_t dim() const { return dim_; }

  std::span<const double> x_row(std::size_t i) const
  {
    return { x_.data() + i * dim_, dim_ };
  }
  double y(std::size_t i) const { return y_[i]; }

  const std::vector<double>& x_data() const { return x_; }
  const std::vector<double>& y_data() const { return y_; }
  const std::vector<std::string>& x_names() const { return x_names_; }
  const std::string& y_name() const { return y_name_; }

  //! Rows selected by index, in the given order.
  RawDataset subset(std::span<const std::size_t> rows) const;

private:
  std::size_t dim_ = 0;
  std::vector<double> x_;
  std::vector<double> y_;
  std::vector<std::string> x_names_;
  std::string y_name_;
};

//! Data divided column-wise by per-column scale factors.
class StandardizedDataset
{
public:
  //! Divides raw columns by the given scales. Scales must be positive.
  StandardizedDataset(const RawDataset& raw,
                      std::vector<double> sigma_x,
                      double sigma_y);

  //! Wraps values that are already in standardized units. Unlike RawDataset
  //! this accepts a single row, which is enough to fit a model.
  static StandardizedDataset from_scaled(std::size_t dim,
                                         std::vector<double> x_scaled,
                                         std::vector<double> y_scaled,
                                         std::vector<double> sigma_x,
                                         double sigma_y);

  std::size_t size() const { return y_.size(); }
  std::size_t dim() const { return dim_; }

  std::span<const double> x_row(std::size_t i) const
  {
    return { x_.data() + i * dim_, dim_ };
  }
  double y(std::size_t i) const { return y_[i]; }

  const std::vector<double>& x_data() const { return x_; }
  const std::vector<double>& y_data() const { return y_; }
  const std::vector<double>& sigma_x() const { return sigma_x_; }
  double sigma_y() const { return sigma_y_; }

  //! Maps a raw-unit query into standardized units.
  std::vector<double> scale_query(std::span<const double> x_raw) const;

  //! Recovers the raw dataset (up to rounding).
  RawDataset destandardize() const;

private:
  StandardizedDataset() = default;
  void check_scales() const;

  std::size_t dim_ = 0;
  std::vector<double> x_;
  std::vector<double> y_;
  std::vector<double> sigma_x_;
  double sigma_y_ = 1.0;
};

//! Sample standard deviation (n - 1 denominator).
double sample_sd(std::span<const double> values);

//! Scales every column to unit sample standard deviation.
//! Throws DataError naming the first zero-variance column.
StandardizedDataset
standardize(const RawDataset& raw);

} // namespace kcde
