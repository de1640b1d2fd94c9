#pragma once

#include "kcde/likelihood.hpp"

#include <cstdint>
#include <vector>

namespace kcde {

struct SearchConfig
{
  double h_max = 10.0;
  std::size_t candidates = 300;
  std::uint64_t seed = 0;
  MethodConfig method;
};

struct Candidate
{
  BandwidthPair h;
  double score;
  bool diverged;
};

struct SearchResult
{
  BandwidthPair best;
  double best_score;
  //! Every candidate in sampling order.
  std::vector<Candidate> trace;
};

//! Raised when no candidate bandwidth gives a finite likelihood.
class SearchError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

//! Candidate bandwidth pairs drawn uniformly from (0, h_max]^2.
std::vector<BandwidthPair>
sample_candidates(double h_max, std::size_t count, std::uint64_t seed);

//! Random search maximizing the cross-validated likelihood.
//!
//! Candidates are evaluated in parallel. Each probabilistic evaluation gets
//! its own seed derived from cfg.seed and the candidate index, so the trace
//! does not depend on the thread count. Ties go to the earliest candidate.
SearchResult
random_search(const LikelihoodEvaluator& evaluator, const SearchConfig& cfg);

//! Normal-reference rule-of-thumb bandwidths for the Epanechnikov kernel,
//! applied to y and x as two unconditional estimators.
BandwidthPair
reference_rule(const StandardizedDataset& data);

//! Rule-of-thumb bandwidth for a dim-dimensional Epanechnikov estimator on
//! unit-variance data with n points.
//!
//! Silverman's Gaussian rule (4 / ((d + 2) n))^(1 / (d + 4)) rescaled by the
//! ratio of canonical bandwidths, which for the unit-ball Epanechnikov kernel
//! is (4 c_d (d + 4) (4 pi)^(d / 2))^(1 / (d + 4)); 2.214 when d = 1.
double reference_bandwidth(std::size_t n, std::size_t dim);

} // namespace kcde
