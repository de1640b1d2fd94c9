#pragma once

#include "kcde/dataset.hpp"
#include "kcde/kernels.hpp"
#include "kcde/spatial.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace kcde {

//! Bandwidths in standardized units: h1 for the y-kernel, h2 for the x-kernel.
struct BandwidthPair
{
  double h1;
  double h2;

  bool operator==(const BandwidthPair&) const = default;
};

enum class Method
{
  naive,
  deterministic,
  probabilistic
};

std::string_view to_string(Method method);
//! Accepts "naive", "det"/"deterministic", "prob"/"probabilistic".
Method parse_method(std::string_view name);

//! Deterministic pruning tolerance on the absolute error of L.
//! epsilon = 0 disables approximation (only exact zero-support prunes).
struct DetConfig
{
  double epsilon = 0.1;
};

//! Bootstrap pruning settings. Defaults are m = 25, B = 10, z = 1.5.
struct ProbConfig
{
  double epsilon = 0.1;
  std::size_t m = 25;
  std::size_t bootstrap = 10;
  double z = 1.5;
  std::uint64_t seed = 0;
};

struct TraversalStats
{
  std::uint64_t node_pairs = 0;
  std::uint64_t prune_count = 0;      ///< approximate prunes
  std::uint64_t zero_prune_count = 0; ///< pairs with no kernel overlap
  std::uint64_t base_case_count = 0;  ///< leaf-leaf exhaustive pairs
  std::uint64_t kernel_evaluations = 0;
  std::uint64_t sample_count = 0; ///< node pairs that ran the bootstrap
};

struct LikelihoodResult
{
  //! (1/n) sum log A_i - log(n - 1), or -infinity when diverged.
  double value = 0.0;
  bool diverged = false;
  //! A_i in dataset row order. Empty when the divergence guard short-circuits.
  std::vector<double> accumulators;
  TraversalStats stats;
  double elapsed_seconds = 0.0;
  Method method = Method::naive;
  bool short_circuited = false;
};

//! Product of the y- and x-kernels at a fixed bandwidth pair.
class JointKernel
{
public:
  JointKernel(std::size_t x_dim, BandwidthPair h);

  double operator()(double dist_sq_x, double dist_sq_y) const
  {
    const double ky = y_(dist_sq_y);
    return ky == 0.0 ? 0.0 : ky * x_(dist_sq_x);
  }

  //! (vmin, vmax) given squared distance ranges in x and y.
  Range bounds(Range dist_sq_x, Range dist_sq_y) const
  {
    return { y_(dist_sq_y.hi) * x_(dist_sq_x.hi),
             y_(dist_sq_y.lo) * x_(dist_sq_x.lo) };
  }

  const ScaledKernel& y_kernel() const { return y_; }
  const ScaledKernel& x_kernel() const { return x_; }

private:
  ScaledKernel y_;
  ScaledKernel x_;
};

//! Deterministic relative-error prune test for a node pair whose kernel products
//! lie in [vmin, vmax] and whose j-side node holds n_r points.
//!
//! Returns the per-point contribution to add to every A_i of the i-side
//! node, or nullopt when the pair must be refined.
std::optional<double>
can_approx_det(double vmin, double vmax, std::size_t n_r, double epsilon);

//! Same test on a pair of tree nodes.
std::optional<double>
can_approx_det(const JointKdTree& tree,
               std::int32_t query_node,
               std::int32_t reference_node,
               const JointKernel& kernel,
               double epsilon);

struct RelErrorEstimate
{
  double rel_error = 0.0; ///< z * sigma_hat / v_hat
  double v_hat = 0.0;     ///< sample mean kernel product
  double sigma_hat = 0.0; ///< bootstrap sd of the mean
};

//! Standard deviation (B - 1 denominator) of B resampled means.
double
bootstrap_stdev(std::span<const double> values, std::size_t resamples, Rng& rng);

//! Samples m non-duplicate index pairs from the node pair and bootstraps
//! the relative error of the mean. Returns all zeros when every sampled
//! product vanished.
RelErrorEstimate
estimate_rel_error(const JointKdTree& tree,
                   std::int32_t query_node,
                   std::int32_t reference_node,
                   const JointKernel& kernel,
                   const ProbConfig& cfg,
                   Rng& rng);

//! Exact O(n^2) evaluation, parallel over rows.
LikelihoodResult
naive_loglik(const StandardizedDataset& data, BandwidthPair h);

//! Single-threaded reference for naive_loglik; results are bit-identical.
LikelihoodResult
naive_loglik_serial(const StandardizedDataset& data, BandwidthPair h);

//! Dual-tree evaluation with |L_hat - L| <= epsilon guaranteed.
LikelihoodResult
dualtree_loglik_det(const StandardizedDataset& data,
                    const JointKdTree& tree,
                    BandwidthPair h,
                    const DetConfig& cfg);

//! Dual-tree evaluation with bootstrap pruning. Error is controlled only in
//! probability; the result is a deterministic function of cfg.seed.
LikelihoodResult
dualtree_loglik_prob(const StandardizedDataset& data,
                     const JointKdTree& tree,
                     BandwidthPair h,
                     const ProbConfig& cfg);

//! Folds a vector of A_i into L. Exposed so callers can score accumulators
//! produced elsewhere with the same summation order.
double loglik_from_accumulators(std::span<const double> a, bool& diverged);

struct MethodConfig
{
  Method method = Method::probabilistic;
  DetConfig det;
  ProbConfig prob;
};

//! Throws std::invalid_argument for out-of-range settings of the selected
//! method. Evaluators validate on entry too; this lets callers fail before
//! entering a parallel region.
void validate(const MethodConfig& cfg);

//! Bundles a dataset with its tree and divergence guard.
//!
//! Holds a reference to `data`, which must outlive the evaluator.
class LikelihoodEvaluator
{
public:
  explicit LikelihoodEvaluator(
    const StandardizedDataset& data,
    std::size_t leaf_size = JointKdTree::default_leaf_size);

  const StandardizedDataset& data() const { return *data_; }
  const JointKdTree& tree() const { return tree_; }

  //! True when some point has no neighbour inside the kernel supports, so
  //! some A_i is exactly zero. Sound but not complete.
  bool certainly_diverges(BandwidthPair h) const;

  //! Returns -inf without a traversal when some point has no other point
  //! inside both kernel supports. That test is exact, so every method agrees
  //! on divergence; otherwise dispatches to the configured evaluator.
  LikelihoodResult evaluate(BandwidthPair h, const MethodConfig& cfg) const;

private:
  const StandardizedDataset* data_;
  JointKdTree tree_;
  double max_nn_sq_x_;
  double max_nn_sq_y_;
};

} // namespace kcde
