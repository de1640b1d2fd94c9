#pragma once

#include "kcde/bandwidth.hpp"
#include "kcde/dataset.hpp"
#include "kcde/estimator.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace kcde {

enum class Family
{
  bimodal_sine,
  uniform5d,
  decay_series
};

std::string_view to_string(Family family);
Family parse_family(std::string_view name);

//! y = s * amplitude * sin(omega * x) + N(0, noise^2), s = -1 with
//! probability flip_probability, x uniform on [x_lo, x_hi].
struct BimodalSineParams
{
  double x_lo = 0.0;
  double x_hi = 10.0;
  double amplitude = 5.0;
  double omega = 1.0;
  double noise = 1.0;
  double flip_probability = 0.2;
};

//! Independent uniforms on [0, 2^k) for k = 1..dims; y is the last (widest).
struct UniformBoxParams
{
  std::size_t dims = 5;
};

//! z_t = z_{t-k} + N(0, 1) with P(k) proportional to decay_base^k, k = 1..lags.
struct DecaySeriesParams
{
  std::size_t lags = 7;
  double decay_base = 0.5;
  std::size_t burn_in = 50;
};

struct SyntheticSpec
{
  Family family = Family::bimodal_sine;
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  BimodalSineParams sine;
  UniformBoxParams uniform;
  DecaySeriesParams decay;
};

//! True conditional density f(y | x) in raw units.
using TrueDensity = std::function<double(std::span<const double>, double)>;

struct SyntheticData
{
  RawDataset data;
  TrueDensity truth;
  //! Every generator parameter, in a fixed order, for output metadata.
  std::vector<std::pair<std::string, double>> parameters;
};

SyntheticData gen_bimodal_sine(const SyntheticSpec& spec);
SyntheticData gen_uniform5d(const SyntheticSpec& spec);
SyntheticData gen_decay_series(const SyntheticSpec& spec);
//! Dispatches on spec.family.
SyntheticData generate(const SyntheticSpec& spec);

//! Normalized lag probabilities P(1..lags).
std::vector<double> decay_weights(std::size_t lags, double base);

double normal_pdf(double y, double mean, double sd);

//! A metric averaged over the supported held-out points.
struct MetricValue
{
  double value = 0.0;
  std::size_t used = 0;
  std::size_t excluded = 0; ///< unsupported queries
};

//! Mean (f_hat(y|x) - f(y|x))^2 over held-out points.
MetricValue
ise_metric(const ConditionalModel& model, const RawDataset& heldout, const TrueDensity& truth);

//! Mean (E_hat[y|x] - y)^2 over held-out points.
MetricValue
mse_metric(const ConditionalModel& model, const RawDataset& heldout);

struct CoverageResult
{
  double coverage = 0.0;
  double mean_half_width_ratio = 0.0;
  std::size_t used = 0;
  std::size_t excluded = 0;
  std::size_t width_points = 0; ///< points with |y| large enough for the ratio
};

//! Coverage of 1 - alpha intervals and mean half-width / |y|. Each point's
//! interval uses a seed derived from (seed, row), so the result does not
//! depend on thread count. Rows with |y| < 1e-6 are left out of the ratio.
CoverageResult
coverage_and_width(const ConditionalModel& model,
                   const RawDataset& heldout,
                   double alpha,
                   std::size_t n_samples,
                   std::uint64_t seed);

struct MetricsReport
{
  std::optional<double> ise; ///< only with a known truth
  double mse = 0.0;
  double coverage = 0.0;
  double mean_half_width_ratio = 0.0;
  std::size_t excluded_points = 0;
  std::size_t evaluated_points = 0;
};

enum class Selection
{
  likelihood,
  reference
};

std::string_view to_string(Selection selection);

struct PipelineConfig
{
  Selection selection = Selection::likelihood;
  SearchConfig search;
  std::size_t leaf_size = JointKdTree::default_leaf_size;
  std::size_t folds = 10;
  double alpha = 0.05;
  std::size_t n_samples = ConditionalDensityModel::default_interval_samples;
  std::uint64_t seed = 0;
};

struct FoldReport
{
  std::size_t fold = 0;
  BandwidthPair h{ 0.0, 0.0 };
  MetricsReport metrics;
};

struct CrossValidationReport
{
  MetricsReport mean; ///< fold metrics averaged across folds
  std::vector<FoldReport> folds;
};

//! Shuffled k-way split; every row lands in exactly one fold.
std::vector<std::vector<std::size_t>>
make_folds(std::size_t n, std::size_t k, std::uint64_t seed);

//! Fits scale factors, bandwidths and the model on each training split and
//! scores the held-out split. ISE is computed only when `truth` is given.
//! Fold failures are rethrown with the fold index in the message.
CrossValidationReport
cross_validate(const RawDataset& data, const TrueDensity* truth, const PipelineConfig& cfg);

} // namespace kcde
