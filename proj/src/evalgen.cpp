#include "kcde/evalgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace kcde {

std::string_view
to_string(Family family)
{
  switch (family) {
    case Family::bimodal_sine:
      return "bimodal_sine";
    case Family::uniform5d:
      return "uniform5d";
    case Family::decay_series:
      return "decay_series";
  }
  return "unknown";
}

Family
parse_family(std::string_view name)
{
  if (name == "bimodal_sine")
    return Family::bimodal_sine;
  if (name == "uniform5d")
    return Family::uniform5d;
  if (name == "decay_series")
    return Family::decay_series;
  throw std::invalid_argument("unknown synthetic family '" + std::string(name) +
                              "' (expected bimodal_sine, uniform5d or decay_series)");
}

std::string_view
to_string(Selection selection)
{
  return selection == Selection::likelihood ? "likelihood" : "reference";
}

double
normal_pdf(double y, double mean, double sd)
{
  const double z = (y - mean) / sd;
  return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
}

namespace {

void
check_size(const SyntheticSpec& spec)
{
  if (spec.n < 20) {
    throw std::invalid_argument("synthetic datasets need n >= 20");
  }
}

} // namespace

SyntheticData
gen_bimodal_sine(const SyntheticSpec& spec)
{
  check_size(spec);
  const BimodalSineParams p = spec.sine;
  if (!(p.x_hi > p.x_lo) || !(p.noise > 0.0) || p.flip_probability < 0.0 ||
      p.flip_probability > 1.0) {
    throw std::invalid_argument("invalid bimodal_sine parameters");
  }
  Rng rng(spec.seed);
  std::uniform_real_distribution<double> ux(p.x_lo, p.x_hi);
  std::bernoulli_distribution flip(p.flip_probability);
  std::normal_distribution<double> noise(0.0, p.noise);
  std::vector<double> x(spec.n);
  std::vector<double> y(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    x[i] = ux(rng);
    const double sign = flip(rng) ? -1.0 : 1.0;
    y[i] = sign * p.amplitude * std::sin(p.omega * x[i]) + noise(rng);
  }
  TrueDensity truth = [p](std::span<const double> xq, double yq) {
    const double m = p.amplitude * std::sin(p.omega * xq[0]);
    return (1.0 - p.flip_probability) * normal_pdf(yq, m, p.noise) +
           p.flip_probability * normal_pdf(yq, -m, p.noise);
  };
  return { RawDataset(1, std::move(x), std::move(y), { "x" }, "y"),
           std::move(truth),
           { { "x_lo", p.x_lo },
             { "x_hi", p.x_hi },
             { "amplitude", p.amplitude },
             { "omega", p.omega },
             { "noise", p.noise },
             { "flip_probability", p.flip_probability } } };
}

SyntheticData
gen_uniform5d(const SyntheticSpec& spec)
{
  check_size(spec);
  const std::size_t dims = spec.uniform.dims;
  if (dims < 2) {
    throw std::invalid_argument("uniform box needs at least 2 dimensions");
  }
  Rng rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t d = dims - 1;
  std::vector<double> x(spec.n * d);
  std::vector<double> y(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    for (std::size_t k = 0; k < dims; ++k) {
      const double v = std::ldexp(unit(rng), static_cast<int>(k + 1));
      if (k < d) {
        x[i * d + k] = v;
      } else {
        y[i] = v;
      }
    }
  }
  const double y_width = std::ldexp(1.0, static_cast<int>(dims));
  TrueDensity truth = [y_width](std::span<const double>, double yq) {
    return (yq >= 0.0 && yq <= y_width) ? 1.0 / y_width : 0.0;
  };
  std::vector<std::string> names;
  for (std::size_t k = 0; k < d; ++k) {
    names.push_back("x" + std::to_string(k + 1));
  }
  return { RawDataset(d, std::move(x), std::move(y), std::move(names), "y"),
           std::move(truth),
           { { "dims", static_cast<double>(dims) }, { "y_width", y_width } } };
}

std::vector<double>
decay_weights(std::size_t lags, double base)
{
  if (lags < 1 || !(base > 0.0)) {
    throw std::invalid_argument("invalid decay weights");
  }
  std::vector<double> w(lags);
  double total = 0.0;
  for (std::size_t k = 0; k < lags; ++k) {
    w[k] = std::pow(base, static_cast<double>(k + 1));
    total += w[k];
  }
  for (auto& v : w) {
    v /= total;
  }
  return w;
}

SyntheticData
gen_decay_series(const SyntheticSpec& spec)
{
  check_size(spec);
  const DecaySeriesParams p = spec.decay;
  const auto weights = decay_weights(p.lags, p.decay_base);
  Rng rng(spec.seed);
  std::discrete_distribution<std::size_t> lag(weights.begin(), weights.end());
  std::normal_distribution<double> noise(0.0, 1.0);

  // History starts as `lags` zeros; the first burn_in steps are discarded.
  std::vector<double> z(p.lags, 0.0);
  z.reserve(p.lags + p.burn_in + spec.n);
  std::vector<double> x;
  std::vector<double> y;
  x.reserve(spec.n * p.lags);
  y.reserve(spec.n);
  const std::size_t steps = p.burn_in + spec.n;
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t t = z.size();
    const std::size_t k = lag(rng) + 1;
    const double next = z[t - k] + noise(rng);
    if (s >= p.burn_in) {
      for (std::size_t j = 1; j <= p.lags; ++j) {
        x.push_back(z[t - j]);
      }
      y.push_back(next);
    }
    z.push_back(next);
  }
  TrueDensity truth = [weights](std::span<const double> xq, double yq) {
    double f = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      f += weights[k] * normal_pdf(yq, xq[k], 1.0);
    }
    return f;
  };
  std::vector<std::string> names;
  for (std::size_t j = 1; j <= p.lags; ++j) {
    names.push_back("lag" + std::to_string(j));
  }
  return { RawDataset(p.lags, std::move(x), std::move(y), std::move(names), "y"),
           std::move(truth),
           { { "lags", static_cast<double>(p.lags) },
             { "decay_base", p.decay_base },
             { "burn_in", static_cast<double>(p.burn_in) } } };
}

SyntheticData
generate(const SyntheticSpec& spec)
{
  switch (spec.family) {
    case Family::bimodal_sine:
      return gen_bimodal_sine(spec);
    case Family::uniform5d:
      return gen_uniform5d(spec);
    case Family::decay_series:
      return gen_decay_series(spec);
  }
  throw std::logic_error("unhandled family");
}

namespace {

void
require_points(const MetricValue& m, std::string_view name)
{
  if (m.used == 0) {
    throw std::runtime_error(std::string(name) +
                             ": no held-out point is supported by the model");
  }
}

} // namespace

MetricValue
ise_metric(const ConditionalModel& model, const RawDataset& heldout, const TrueDensity& truth)
{
  MetricValue out;
  double total = 0.0;
  for (std::size_t i = 0; i < heldout.size(); ++i) {
    try {
      const double diff = model.density(heldout.x_row(i), heldout.y(i)) -
                          truth(heldout.x_row(i), heldout.y(i));
      total += diff * diff;
      ++out.used;
    } catch (const UnsupportedQuery&) {
      ++out.excluded;
    }
  }
  require_points(out, "ise");
  out.value = total / static_cast<double>(out.used);
  return out;
}

MetricValue
mse_metric(const ConditionalModel& model, const RawDataset& heldout)
{
  MetricValue out;
  double total = 0.0;
  for (std::size_t i = 0; i < heldout.size(); ++i) {
    try {
      const double diff = model.expectation(heldout.x_row(i)) - heldout.y(i);
      total += diff * diff;
      ++out.used;
    } catch (const UnsupportedQuery&) {
      ++out.excluded;
    }
  }
  require_points(out, "mse");
  out.value = total / static_cast<double>(out.used);
  return out;
}

CoverageResult
coverage_and_width(const ConditionalModel& model,
                   const RawDataset& heldout,
                   double alpha,
                   std::size_t n_samples,
                   std::uint64_t seed)
{
  constexpr double min_abs_y = 1e-6;
  if (!(alpha >= 0.0) || !(alpha < 1.0)) {
    throw std::invalid_argument("alpha must lie in [0, 1)");
  }
  if (n_samples < 100) {
    throw std::invalid_argument("prediction intervals need at least 100 samples");
  }
  const auto n = static_cast<std::ptrdiff_t>(heldout.size());
  // Per-row outcome: 0 unsupported, 1 missed, 2 covered.
  std::vector<int> status(heldout.size(), 0);
  std::vector<double> ratio(heldout.size(), 0.0);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t r = 0; r < n; ++r) {
    const auto i = static_cast<std::size_t>(r);
    Rng rng(derive_seed(seed, i));
    try {
      const Interval iv = model.prediction_interval(heldout.x_row(i), alpha, n_samples, rng);
      const double y = heldout.y(i);
      status[i] = (y >= iv.lo && y <= iv.hi) ? 2 : 1;
      ratio[i] = 0.5 * (iv.hi - iv.lo) / std::abs(y);
    } catch (const UnsupportedQuery&) {
      status[i] = 0;
    }
  }
  CoverageResult out;
  std::size_t covered = 0;
  double ratio_total = 0.0;
  for (std::size_t i = 0; i < heldout.size(); ++i) {
    if (status[i] == 0) {
      ++out.excluded;
      continue;
    }
    ++out.used;
    covered += status[i] == 2;
    if (std::abs(heldout.y(i)) >= min_abs_y) {
      ratio_total += ratio[i];
      ++out.width_points;
    }
  }
  if (out.used == 0) {
    throw std::runtime_error("coverage: no held-out point is supported by the model");
  }
  out.coverage = static_cast<double>(covered) / static_cast<double>(out.used);
  out.mean_half_width_ratio =
    out.width_points > 0 ? ratio_total / static_cast<double>(out.width_points) : 0.0;
  return out;
}

std::vector<std::vector<std::size_t>>
make_folds(std::size_t n, std::size_t k, std::uint64_t seed)
{
  if (k < 2 || n < 2 * k) {
    throw std::invalid_argument("need at least 2 folds with 2 rows each");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{ 0 });
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> folds(k);
  for (std::size_t i = 0; i < n; ++i) {
    folds[i % k].push_back(order[i]);
  }
  for (auto& f : folds) {
    std::sort(f.begin(), f.end());
  }
  return folds;
}

namespace {

FoldReport
run_fold(const RawDataset& data,
         const TrueDensity* truth,
         const PipelineConfig& cfg,
         const std::vector<std::vector<std::size_t>>& folds,
         std::size_t f)
{
  std::vector<std::size_t> train_rows;
  for (std::size_t g = 0; g < folds.size(); ++g) {
    if (g != f) {
      train_rows.insert(train_rows.end(), folds[g].begin(), folds[g].end());
    }
  }
  std::sort(train_rows.begin(), train_rows.end());
  const RawDataset train = data.subset(train_rows);
  const RawDataset heldout = data.subset(folds[f]);
  StandardizedDataset scaled = standardize(train);

  FoldReport report;
  report.fold = f;
  if (cfg.selection == Selection::likelihood) {
    const LikelihoodEvaluator evaluator(scaled, cfg.leaf_size);
    SearchConfig search = cfg.search;
    search.seed = derive_seed(cfg.seed, 2 * f);
    report.h = random_search(evaluator, search).best;
  } else {
    report.h = reference_rule(scaled);
  }
  const ConditionalDensityModel model(std::move(scaled), report.h);

  MetricsReport& m = report.metrics;
  if (truth != nullptr) {
    m.ise = ise_metric(model, heldout, *truth).value;
  }
  const MetricValue mse = mse_metric(model, heldout);
  m.mse = mse.value;
  const CoverageResult cov =
    coverage_and_width(model, heldout, cfg.alpha, cfg.n_samples, derive_seed(cfg.seed, 2 * f + 1));
  m.coverage = cov.coverage;
  m.mean_half_width_ratio = cov.mean_half_width_ratio;
  m.excluded_points = mse.excluded;
  m.evaluated_points = mse.used;
  return report;
}

} // namespace

CrossValidationReport
cross_validate(const RawDataset& data, const TrueDensity* truth, const PipelineConfig& cfg)
{
  if (data.size() < 20) {
    throw std::invalid_argument("cross-validation needs at least 20 rows");
  }
  const auto folds = make_folds(data.size(), cfg.folds, cfg.seed);
  CrossValidationReport out;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    try {
      out.folds.push_back(run_fold(data, truth, cfg, folds, f));
    } catch (const std::exception& e) {
      throw std::runtime_error("fold " + std::to_string(f) + ": " + e.what());
    }
  }
  const double k = static_cast<double>(out.folds.size());
  MetricsReport& mean = out.mean;
  if (truth != nullptr) {
    mean.ise = 0.0;
  }
  for (const auto& fr : out.folds) {
    if (mean.ise) {
      *mean.ise += *fr.metrics.ise / k;
    }
    mean.mse += fr.metrics.mse / k;
    mean.coverage += fr.metrics.coverage / k;
    mean.mean_half_width_ratio += fr.metrics.mean_half_width_ratio / k;
    mean.excluded_points += fr.metrics.excluded_points;
    mean.evaluated_points += fr.metrics.evaluated_points;
  }
  return out;
}

} // namespace kcde
