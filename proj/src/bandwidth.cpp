#include "kcde/bandwidth.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace kcde {

std::vector<BandwidthPair>
sample_candidates(double h_max, std::size_t count, std::uint64_t seed)
{
  if (!(h_max > 0.0) || !std::isfinite(h_max)) {
    throw std::invalid_argument("h_max must be positive and finite");
  }
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<BandwidthPair> out(count);
  for (auto& h : out) {
    // 1 - U maps [0, 1) onto (0, 1]
    h.h1 = h_max * (1.0 - unit(rng));
    h.h2 = h_max * (1.0 - unit(rng));
  }
  return out;
}

SearchResult
random_search(const LikelihoodEvaluator& evaluator, const SearchConfig& cfg)
{
  if (cfg.candidates < 1) {
    throw std::invalid_argument("need at least one candidate");
  }
  validate(cfg.method);
  const auto pairs = sample_candidates(cfg.h_max, cfg.candidates, cfg.seed);
  std::vector<Candidate> trace(pairs.size());

  const auto count = static_cast<std::ptrdiff_t>(pairs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t c = 0; c < count; ++c) {
    MethodConfig method = cfg.method;
    method.prob.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(c));
    const auto r = evaluator.evaluate(pairs[c], method);
    trace[c] = Candidate{ pairs[c], r.value, r.diverged };
  }

  const Candidate* best = nullptr;
  for (const auto& c : trace) {
    if (!c.diverged && (best == nullptr || c.score > best->score)) {
      best = &c;
    }
  }
  if (best == nullptr) {
    throw SearchError("all " + std::to_string(trace.size()) +
                      " candidate bandwidths diverged; try a larger h_max");
  }
  return SearchResult{ best->h, best->score, std::move(trace) };
}

double
reference_bandwidth(std::size_t n, std::size_t dim)
{
  if (n < 2) {
    throw std::invalid_argument("reference rule needs at least 2 points");
  }
  const double d = static_cast<double>(dim);
  const double gaussian =
    std::pow(4.0 / ((d + 2.0) * static_cast<double>(n)), 1.0 / (d + 4.0));
  const double c_d = EpanechnikovKernel(static_cast<int>(dim)).normalizer();
  const double canonical =
    std::pow(4.0 * c_d * (d + 4.0) * std::pow(4.0 * std::numbers::pi, d / 2.0),
             1.0 / (d + 4.0));
  return gaussian * canonical;
}

BandwidthPair
reference_rule(const StandardizedDataset& data)
{
  return { reference_bandwidth(data.size(), 1),
           reference_bandwidth(data.size(), data.dim()) };
}

} // namespace kcde
