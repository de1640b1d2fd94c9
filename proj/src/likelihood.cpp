#include "kcde/likelihood.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace kcde {

std::string_view
to_string(Method method)
{
  switch (method) {
    case Method::naive:
      return "naive";
    case Method::deterministic:
      return "deterministic";
    case Method::probabilistic:
      return "probabilistic";
  }
  return "unknown";
}

Method
parse_method(std::string_view name)
{
  if (name == "naive")
    return Method::naive;
  if (name == "det" || name == "deterministic")
    return Method::deterministic;
  if (name == "prob" || name == "probabilistic")
    return Method::probabilistic;
  throw std::invalid_argument("unknown likelihood method '" +
                              std::string(name) +
                              "' (expected naive, det or prob)");
}

JointKernel::JointKernel(std::size_t x_dim, BandwidthPair h)
  : y_(EpanechnikovKernel(1), h.h1)
  , x_(EpanechnikovKernel(static_cast<int>(x_dim)), h.h2)
{}

std::optional<double>
can_approx_det(double vmin, double vmax, std::size_t n_r, double epsilon)
{
  if (vmax == 0.0) {
    return 0.0;
  }
  if (!(epsilon > 0.0) || !(vmin > 0.0) || n_r < 2) {
    return std::nullopt;
  }
  const double nr = static_cast<double>(n_r);
  const double threshold = 2.0 * std::exp(epsilon) - 1.0;
  if ((nr + 1.0) * vmax <= threshold * (nr - 1.0) * vmin) {
    return (nr - 1.0) * 0.5 * (vmax + vmin);
  }
  return std::nullopt;
}

std::optional<double>
can_approx_det(const JointKdTree& tree,
               std::int32_t query_node,
               std::int32_t reference_node,
               const JointKernel& kernel,
               double epsilon)
{
  const Range v = kernel.bounds(tree.node_dist_sq_x(query_node, reference_node),
                                tree.node_dist_sq_y(query_node, reference_node));
  return can_approx_det(
    v.lo, v.hi, tree.node(reference_node).count(), epsilon);
}

double
bootstrap_stdev(std::span<const double> values, std::size_t resamples, Rng& rng)
{
  if (resamples < 2) {
    throw std::invalid_argument("bootstrap needs at least 2 resamples");
  }
  if (values.empty()) {
    throw std::invalid_argument("bootstrap of an empty sample");
  }
  const std::size_t m = values.size();
  std::uniform_int_distribution<std::size_t> pick(0, m - 1);
  std::vector<double> means(resamples);
  for (auto& mean : means) {
    double s = 0.0;
    for (std::size_t t = 0; t < m; ++t) {
      s += values[pick(rng)];
    }
    mean = s / static_cast<double>(m);
  }
  double grand = 0.0;
  for (double v : means) {
    grand += v;
  }
  grand /= static_cast<double>(resamples);
  double ss = 0.0;
  for (double v : means) {
    ss += (v - grand) * (v - grand);
  }
  return std::sqrt(ss / static_cast<double>(resamples - 1));
}

RelErrorEstimate
estimate_rel_error(const JointKdTree& tree,
                   std::int32_t query_node,
                   std::int32_t reference_node,
                   const JointKernel& kernel,
                   const ProbConfig& cfg,
                   Rng& rng)
{
  const KdNode& a = tree.node(query_node);
  const KdNode& b = tree.node(reference_node);
  if (query_node == reference_node && a.count() < 2) {
    // No non-duplicate pair exists.
    return { std::numeric_limits<double>::infinity(), 0.0, 0.0 };
  }
  const std::size_t xd = tree.x_dim();
  std::uniform_int_distribution<std::size_t> pick_i(a.begin, a.end - 1);
  std::uniform_int_distribution<std::size_t> pick_j(b.begin, b.end - 1);

  std::vector<double> samples(cfg.m);
  double total = 0.0;
  for (auto& v : samples) {
    std::size_t i = 0;
    std::size_t j = 0;
    do {
      i = pick_i(rng);
      j = pick_j(rng);
    } while (i == j);
    const auto p = tree.point(i);
    const auto q = tree.point(j);
    const double dy = p[xd] - q[xd];
    v = kernel(squared_distance(p.data(), q.data(), xd), dy * dy);
    total += v;
  }
  const double v_hat = total / static_cast<double>(cfg.m);
  if (v_hat == 0.0) {
    return { 0.0, 0.0, 0.0 };
  }
  const double sigma_hat = bootstrap_stdev(samples, cfg.bootstrap, rng);
  return { cfg.z * sigma_hat / v_hat, v_hat, sigma_hat };
}

double
loglik_from_accumulators(std::span<const double> a, bool& diverged)
{
  diverged = false;
  double sum = 0.0;
  for (double v : a) {
    if (!(v > 0.0)) {
      diverged = true;
      return -std::numeric_limits<double>::infinity();
    }
    sum += std::log(v);
  }
  const double n = static_cast<double>(a.size());
  return sum / n - std::log(n - 1.0);
}

namespace {

using Clock = std::chrono::steady_clock;

double
seconds_since(Clock::time_point start)
{
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void
check_bandwidths(BandwidthPair h)
{
  if (!(h.h1 > 0.0) || !(h.h2 > 0.0) || !std::isfinite(h.h1) ||
      !std::isfinite(h.h2)) {
    throw std::invalid_argument("bandwidths must be positive and finite");
  }
}

void
check_config(const DetConfig& cfg)
{
  if (!(cfg.epsilon >= 0.0) || !std::isfinite(cfg.epsilon)) {
    throw std::invalid_argument("epsilon must be finite and non-negative");
  }
}

void
check_config(const ProbConfig& cfg)
{
  if (!(cfg.epsilon >= 0.0) || !std::isfinite(cfg.epsilon)) {
    throw std::invalid_argument("epsilon must be finite and non-negative");
  }
  if (cfg.m < 2) {
    throw std::invalid_argument("sample size m must be at least 2");
  }
  if (cfg.bootstrap < 2) {
    throw std::invalid_argument("bootstrap count B must be at least 2");
  }
  if (!(cfg.z > 0.0)) {
    throw std::invalid_argument("z must be positive");
  }
}

// Leave-one-out joint kernel sum for row i over all other rows.
inline double
naive_row(const StandardizedDataset& data, const JointKernel& kernel, std::size_t i)
{
  const std::size_t n = data.size();
  const std::size_t d = data.dim();
  const double* xi = data.x_row(i).data();
  const double yi = data.y(i);
  double acc = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == i) {
      continue;
    }
    const double dy = yi - data.y(j);
    const double ky = kernel.y_kernel()(dy * dy);
    if (ky == 0.0) {
      continue;
    }
    acc += ky * kernel.x_kernel()(squared_distance(xi, data.x_row(j).data(), d));
  }
  return acc;
}

LikelihoodResult
finish(std::vector<double> a, Method method, TraversalStats stats, Clock::time_point start)
{
  LikelihoodResult out;
  out.value = loglik_from_accumulators(a, out.diverged);
  out.accumulators = std::move(a);
  out.stats = stats;
  out.method = method;
  out.elapsed_seconds = seconds_since(start);
  return out;
}

// Generic dual-tree recursion over one tree joined with itself. The pruner
// decides whether a pair with non-zero kernel overlap can be approximated.
template<class Pruner>
class DualTreeTraversal
{
public:
  DualTreeTraversal(const JointKdTree& tree,
                    const JointKernel& kernel,
                    Pruner& pruner)
    : tree_(tree)
    , kernel_(kernel)
    , pruner_(pruner)
    , slot_sums_(tree.size(), 0.0)
    , pending_(tree.nodes().size(), 0.0)
  {}

  std::vector<double> run()
  {
    recurse(JointKdTree::root, JointKdTree::root);
    return collect();
  }

  TraversalStats stats;

private:
  void recurse(std::int32_t a, std::int32_t b)
  {
    ++stats.node_pairs;
    const Range v = kernel_.bounds(tree_.node_dist_sq_x(a, b),
                                   tree_.node_dist_sq_y(a, b));
    if (v.hi == 0.0) {
      ++stats.zero_prune_count;
      return;
    }
    if (const auto contribution = pruner_(a, b, v, stats)) {
      pending_[a] += *contribution;
      ++stats.prune_count;
      return;
    }
    const KdNode& na = tree_.node(a);
    const KdNode& nb = tree_.node(b);
    if (na.is_leaf() && nb.is_leaf()) {
      base_case(na, nb);
    } else if (na.is_leaf()) {
      recurse(a, nb.left);
      recurse(a, nb.right);
    } else if (nb.is_leaf()) {
      recurse(na.left, b);
      recurse(na.right, b);
    } else {
      recurse(na.left, nb.left);
      recurse(na.left, nb.right);
      recurse(na.right, nb.left);
      recurse(na.right, nb.right);
    }
  }

  void base_case(const KdNode& a, const KdNode& b)
  {
    ++stats.base_case_count;
    stats.kernel_evaluations += a.count() * b.count();
    const std::size_t xd = tree_.x_dim();
    for (std::size_t s = a.begin; s < a.end; ++s) {
      const double* p = tree_.point(s).data();
      double acc = 0.0;
      for (std::size_t t = b.begin; t < b.end; ++t) {
        if (s == t) {
          continue;
        }
        const double* q = tree_.point(t).data();
        const double dy = p[xd] - q[xd];
        const double ky = kernel_.y_kernel()(dy * dy);
        if (ky == 0.0) {
          continue;
        }
        acc += ky * kernel_.x_kernel()(squared_distance(p, q, xd));
      }
      slot_sums_[s] += acc;
    }
  }

  // Pushes node-level prune contributions down to points and returns A_i in
  // dataset order. Node ids are in preorder, so parents precede children.
  std::vector<double> collect()
  {
    const auto& nodes = tree_.nodes();
    for (std::size_t id = 0; id < nodes.size(); ++id) {
      const KdNode& nd = nodes[id];
      if (nd.is_leaf()) {
        for (std::size_t s = nd.begin; s < nd.end; ++s) {
          slot_sums_[s] += pending_[id];
        }
      } else {
        pending_[nd.left] += pending_[id];
        pending_[nd.right] += pending_[id];
      }
    }
    std::vector<double> a(tree_.size());
    const auto& index = tree_.point_index();
    for (std::size_t s = 0; s < a.size(); ++s) {
      a[index[s]] = slot_sums_[s];
    }
    return a;
  }

  const JointKdTree& tree_;
  const JointKernel& kernel_;
  Pruner& pruner_;
  std::vector<double> slot_sums_;
  std::vector<double> pending_;
};

struct DeterministicPruner
{
  const JointKdTree& tree;
  double epsilon;

  std::optional<double> operator()(std::int32_t, std::int32_t b, Range v, TraversalStats&)
  {
    return can_approx_det(v.lo, v.hi, tree.node(b).count(), epsilon);
  }
};

struct ProbabilisticPruner
{
  const JointKdTree& tree;
  const JointKernel& kernel;
  const ProbConfig& cfg;
  Rng rng;
  double threshold;

  std::optional<double> operator()(std::int32_t a, std::int32_t b, Range, TraversalStats& stats)
  {
    if (!(cfg.epsilon > 0.0)) {
      return std::nullopt;
    }
    const std::size_t na = tree.node(a).count();
    const std::size_t nb = tree.node(b).count();
    // Sampling costs about m * (B + 1) draws; below that, exact work is
    // cheaper than estimating it.
    if (na * nb <= cfg.m * (cfg.bootstrap + 1)) {
      return std::nullopt;
    }
    ++stats.sample_count;
    stats.kernel_evaluations += cfg.m;
    const RelErrorEstimate est = estimate_rel_error(tree, a, b, kernel, cfg, rng);
    // An all-zero sample says nothing about the unsampled pairs; pairs that
    // really are disjoint were already caught by the vmax = 0 test.
    if (est.v_hat == 0.0) {
      return std::nullopt;
    }
    if (est.rel_error <= threshold) {
      return static_cast<double>(nb) * est.v_hat;
    }
    return std::nullopt;
  }
};

void
check_tree(const StandardizedDataset& data, const JointKdTree& tree)
{
  if (tree.size() != data.size() || tree.x_dim() != data.dim()) {
    throw std::invalid_argument("tree was not built over this dataset");
  }
}

} // namespace

LikelihoodResult
naive_loglik_serial(const StandardizedDataset& data, BandwidthPair h)
{
  check_bandwidths(h);
  const auto start = Clock::now();
  const JointKernel kernel(data.dim(), h);
  const std::size_t n = data.size();
  std::vector<double> a(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = naive_row(data, kernel, i);
  }
  TraversalStats stats;
  stats.kernel_evaluations = n * (n - 1);
  return finish(std::move(a), Method::naive, stats, start);
}

LikelihoodResult
naive_loglik(const StandardizedDataset& data, BandwidthPair h)
{
  check_bandwidths(h);
  const auto start = Clock::now();
  const JointKernel kernel(data.dim(), h);
  const auto n = static_cast<std::ptrdiff_t>(data.size());
  std::vector<double> a(data.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    a[i] = naive_row(data, kernel, static_cast<std::size_t>(i));
  }
  TraversalStats stats;
  stats.kernel_evaluations = data.size() * (data.size() - 1);
  return finish(std::move(a), Method::naive, stats, start);
}

LikelihoodResult
dualtree_loglik_det(const StandardizedDataset& data,
                    const JointKdTree& tree,
                    BandwidthPair h,
                    const DetConfig& cfg)
{
  check_bandwidths(h);
  check_config(cfg);
  check_tree(data, tree);
  const auto start = Clock::now();
  const JointKernel kernel(data.dim(), h);
  DeterministicPruner pruner{ tree, cfg.epsilon };
  DualTreeTraversal traversal(tree, kernel, pruner);
  auto a = traversal.run();
  return finish(std::move(a), Method::deterministic, traversal.stats, start);
}

LikelihoodResult
dualtree_loglik_prob(const StandardizedDataset& data,
                     const JointKdTree& tree,
                     BandwidthPair h,
                     const ProbConfig& cfg)
{
  check_bandwidths(h);
  check_config(cfg);
  check_tree(data, tree);
  const auto start = Clock::now();
  const JointKernel kernel(data.dim(), h);
  ProbabilisticPruner pruner{
    tree, kernel, cfg, Rng(cfg.seed), std::expm1(cfg.epsilon)
  };
  DualTreeTraversal traversal(tree, kernel, pruner);
  auto a = traversal.run();
  return finish(std::move(a), Method::probabilistic, traversal.stats, start);
}

void
validate(const MethodConfig& cfg)
{
  switch (cfg.method) {
    case Method::naive:
      return;
    case Method::deterministic:
      check_config(cfg.det);
      return;
    case Method::probabilistic:
      check_config(cfg.prob);
      return;
  }
}

LikelihoodEvaluator::LikelihoodEvaluator(const StandardizedDataset& data,
                                         std::size_t leaf_size)
  : data_(&data)
  , tree_(data, leaf_size)
  , max_nn_sq_x_(0.0)
  , max_nn_sq_y_(0.0)
{
  if (data.size() < 2) {
    throw DataError("likelihood needs at least 2 points");
  }
  for (double v : tree_.nearest_neighbor_sq_x()) {
    max_nn_sq_x_ = std::max(max_nn_sq_x_, v);
  }
  std::vector<double> y = data.y_data();
  std::sort(y.begin(), y.end());
  for (std::size_t i = 0; i < y.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    if (i > 0) {
      const double g = y[i] - y[i - 1];
      best = std::min(best, g * g);
    }
    if (i + 1 < y.size()) {
      const double g = y[i + 1] - y[i];
      best = std::min(best, g * g);
    }
    max_nn_sq_y_ = std::max(max_nn_sq_y_, best);
  }
}

bool
LikelihoodEvaluator::certainly_diverges(BandwidthPair h) const
{
  return h.h2 * h.h2 <= max_nn_sq_x_ || h.h1 * h.h1 <= max_nn_sq_y_;
}

LikelihoodResult
LikelihoodEvaluator::evaluate(BandwidthPair h, const MethodConfig& cfg) const
{
  check_bandwidths(h);
  if (certainly_diverges(h) ||
      !tree_.all_points_have_neighbor(h.h1 * h.h1, h.h2 * h.h2)) {
    LikelihoodResult out;
    out.value = -std::numeric_limits<double>::infinity();
    out.diverged = true;
    out.short_circuited = true;
    out.method = cfg.method;
    return out;
  }
  switch (cfg.method) {
    case Method::naive:
      return naive_loglik(*data_, h);
    case Method::deterministic:
      return dualtree_loglik_det(*data_, tree_, h, cfg.det);
    case Method::probabilistic:
      return dualtree_loglik_prob(*data_, tree_, h, cfg.prob);
  }
  throw std::logic_error("unhandled likelihood method");
}

} // namespace kcde
