#include "kcde/likelihood.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace kcde;
using kcde::testing::direct_loglik;
using kcde::testing::random_standardized;

namespace {

BandwidthPair
random_pair(std::mt19937_64& rng, double lo, double hi)
{
  std::uniform_real_distribution<double> u(lo, hi);
  return { u(rng), u(rng) };
}

} // namespace

TEST_CASE("two coincident points")
{
  auto data = StandardizedDataset::from_scaled(1, { 0.0, 0.0 }, { 0.0, 0.0 }, { 1.0 }, 1.0);
  const auto r = naive_loglik(data, { 1.0, 1.0 });
  CHECK_FALSE(r.diverged);
  CHECK(r.accumulators[0] == doctest::Approx(0.5625));
  CHECK(r.accumulators[1] == doctest::Approx(0.5625));
  CHECK(r.value == doctest::Approx(std::log(0.5625)));
  CHECK(r.value == doctest::Approx(-0.5754).epsilon(1e-4));
  CHECK(r.value == doctest::Approx(direct_loglik(data, 1.0, 1.0)).epsilon(1e-14));
}

TEST_CASE("isolated point diverges")
{
  auto data = StandardizedDataset::from_scaled(1, { 0.0, 0.1, 5.0 }, { 0.0, 0.1, 0.0 }, { 1.0 }, 1.0);
  const auto r = naive_loglik(data, { 1.0, 1.0 });
  CHECK(r.diverged);
  CHECK(r.value == -std::numeric_limits<double>::infinity());
  CHECK(r.accumulators[2] == 0.0);
}

TEST_CASE("naive matches the direct leave-one-out form")
{
  std::mt19937_64 rng(1);
  for (std::size_t d : { 1, 2, 3 }) {
    auto data = random_standardized(50, d, 100 + d);
    for (int t = 0; t < 10; ++t) {
      const auto h = random_pair(rng, 0.8, 4.0);
      const auto r = naive_loglik(data, h);
      const double direct = direct_loglik(data, h.h1, h.h2);
      if (std::isinf(direct)) {
        CHECK(r.diverged);
      } else {
        CHECK(std::abs(r.value - direct) <= 1e-10);
      }
    }
  }
}

TEST_CASE("parallel naive is bit-identical to the serial reference")
{
  auto data = random_standardized(400, 2, 3);
  for (BandwidthPair h : { BandwidthPair{ 0.5, 0.5 }, BandwidthPair{ 2.0, 1.0 } }) {
    const auto a = naive_loglik(data, h);
    const auto b = naive_loglik_serial(data, h);
    CHECK(a.value == b.value);
    CHECK(a.accumulators == b.accumulators);
  }
}

TEST_CASE("deterministic pruning rule examples")
{
  CHECK(can_approx_det(0.0, 0.0, 10, 0.1) == 0.0);
  CHECK_FALSE(can_approx_det(0.9, 1.0, 10, 0.1).has_value());
  CHECK_FALSE(can_approx_det(1.0, 1.0, 10, 0.1).has_value());
  const auto c = can_approx_det(1.0, 1.0, 100, 0.1);
  REQUIRE(c.has_value());
  CHECK(*c == doctest::Approx(99.0));
  // vmin = 0 with vmax > 0 can never be certified
  CHECK_FALSE(can_approx_det(0.0, 1.0, 1000, 5.0).has_value());
  // a single-point reference node cannot be approximated
  CHECK_FALSE(can_approx_det(1.0, 1.0, 1, 5.0).has_value());
  // epsilon = 0 disables approximation
  CHECK_FALSE(can_approx_det(1.0, 1.0, 1000, 0.0).has_value());
}

TEST_CASE("approximated contribution stays within exp(+-epsilon) of the truth")
{
  // Worst cases of the midpoint estimate: all terms at vmin with the self
  // term excluded, or all at vmax with it included.
  for (double eps : { 0.01, 0.1, 0.5, 1.0, 2.0 }) {
    for (std::size_t n = 2; n < 2000; n = n * 3 / 2 + 1) {
      const double k = 2 * std::exp(eps) - 1;
      const double vmin = 1.0;
      const double vmax = k * (n - 1.0) / (n + 1.0) * (1.0 - 1e-12);
      if (vmax < vmin)
        continue;
      const auto c = can_approx_det(vmin, vmax, n, eps);
      REQUIRE(c.has_value());
      const double low_truth = (n - 1.0) * vmin;
      const double high_truth = n * vmax;
      CHECK(std::abs(std::log(*c / low_truth)) <= eps * (1 + 1e-12));
      CHECK(std::abs(std::log(*c / high_truth)) <= eps * (1 + 1e-12));
    }
  }
}

TEST_CASE("deterministic dual-tree error is bounded by epsilon")
{
  std::mt19937_64 rng(42);
  std::size_t checked = 0;
  for (std::size_t n : { 60, 150, 200 }) {
    for (std::size_t d : { 1, 2, 3 }) {
      auto data = random_standardized(n, d, n * 10 + d);
      JointKdTree tree(data, 8);
      for (int t = 0; t < 25; ++t) {
        const auto h = random_pair(rng, 0.05, 5.0);
        const auto exact = naive_loglik(data, h);
        for (double eps : { 0.01, 0.1, 0.5 }) {
          const auto approx = dualtree_loglik_det(data, tree, h, { eps });
          CHECK(approx.diverged == exact.diverged);
          if (!exact.diverged) {
            CHECK(std::abs(approx.value - exact.value) <= eps);
            ++checked;
          }
        }
      }
    }
  }
  CHECK(checked > 200);
}

TEST_CASE("full recursion reproduces naive")
{
  std::mt19937_64 rng(8);
  for (std::size_t d : { 1, 2 }) {
    auto data = random_standardized(200, d, 55 + d);
    JointKdTree tree(data, 4);
    for (int t = 0; t < 10; ++t) {
      const auto h = random_pair(rng, 0.5, 4.0);
      const auto exact = naive_loglik(data, h);
      const auto det = dualtree_loglik_det(data, tree, h, { 0.0 });
      ProbConfig pc;
      pc.epsilon = 0.0;
      const auto prob = dualtree_loglik_prob(data, tree, h, pc);
      CHECK(det.stats.prune_count == 0);
      CHECK(prob.stats.prune_count == 0);
      REQUIRE(det.diverged == exact.diverged);
      REQUIRE(prob.diverged == exact.diverged);
      if (!exact.diverged) {
        CHECK(std::abs(det.value - exact.value) <= 1e-10);
        CHECK(std::abs(prob.value - exact.value) <= 1e-10);
      }
    }
  }
}

TEST_CASE("huge bandwidths prune at the root")
{
  auto data = random_standardized(200, 2, 4);
  JointKdTree tree(data, 16);
  const auto r = dualtree_loglik_det(data, tree, { 1e4, 1e4 }, { 0.1 });
  CHECK(r.stats.base_case_count == 0);
  CHECK(r.stats.node_pairs == 1);
  const auto exact = naive_loglik(data, { 1e4, 1e4 });
  CHECK(std::abs(r.value - exact.value) <= 0.1);
}

TEST_CASE("tiny bandwidths diverge in every method")
{
  auto data = random_standardized(120, 2, 6);
  JointKdTree tree(data, 8);
  const BandwidthPair h{ 1e-3, 1e-3 };
  CHECK(naive_loglik(data, h).diverged);
  CHECK(dualtree_loglik_det(data, tree, h, { 0.1 }).diverged);
  CHECK(dualtree_loglik_prob(data, tree, h, {}).diverged);
  LikelihoodEvaluator ev(data, 8);
  CHECK(ev.certainly_diverges(h));
  const auto r = ev.evaluate(h, {});
  CHECK(r.diverged);
  CHECK(r.short_circuited);
}

TEST_CASE("divergence guard is sound")
{
  std::mt19937_64 rng(77);
  auto data = random_standardized(150, 2, 12);
  LikelihoodEvaluator ev(data, 8);
  int guarded = 0;
  for (int t = 0; t < 200; ++t) {
    const auto h = random_pair(rng, 0.01, 1.0);
    if (ev.certainly_diverges(h)) {
      ++guarded;
      CHECK(naive_loglik(data, h).diverged);
    }
  }
  CHECK(guarded > 0);
}

TEST_CASE("evaluator divergence agrees with naive for every method")
{
  std::mt19937_64 rng(91);
  auto data = random_standardized(400, 1, 4);
  LikelihoodEvaluator ev(data);
  int diverged = 0;
  for (int t = 0; t < 150; ++t) {
    const auto h = random_pair(rng, 0.005, 2.0);
    const bool exact = naive_loglik(data, h).diverged;
    diverged += exact;
    for (Method m : { Method::naive, Method::deterministic, Method::probabilistic }) {
      MethodConfig cfg;
      cfg.method = m;
      cfg.prob.seed = t;
      const auto r = ev.evaluate(h, cfg);
      CHECK(r.diverged == exact);
      CHECK(std::isinf(r.value) == exact);
    }
  }
  CHECK(diverged > 10);
  CHECK(diverged < 140);
}

TEST_CASE("base case count is non-increasing in epsilon")
{
  auto data = random_standardized(500, 2, 31);
  JointKdTree tree(data, 16);
  std::mt19937_64 rng(2);
  for (int t = 0; t < 10; ++t) {
    const auto h = random_pair(rng, 0.3, 3.0);
    std::uint64_t prev = std::numeric_limits<std::uint64_t>::max();
    for (double eps : { 0.0, 0.001, 0.01, 0.05, 0.1, 0.3, 0.5, 1.0, 2.0 }) {
      const auto r = dualtree_loglik_det(data, tree, h, { eps });
      CHECK(r.stats.base_case_count <= prev);
      prev = r.stats.base_case_count;
    }
  }
}

TEST_CASE("probabilistic evaluation is seed deterministic")
{
  auto data = random_standardized(600, 2, 5);
  JointKdTree tree(data, 16);
  ProbConfig cfg;
  cfg.seed = 99;
  const auto a = dualtree_loglik_prob(data, tree, { 1.0, 1.0 }, cfg);
  const auto b = dualtree_loglik_prob(data, tree, { 1.0, 1.0 }, cfg);
  CHECK(a.value == b.value);
  CHECK(a.accumulators == b.accumulators);
  CHECK(a.stats.prune_count == b.stats.prune_count);
}

TEST_CASE("probabilistic error is small at default settings")
{
  auto data = random_standardized(300, 2, 13);
  LikelihoodEvaluator ev(data, 16);
  std::mt19937_64 rng(3);
  double total = 0.0;
  int counted = 0;
  MethodConfig cfg;
  cfg.method = Method::probabilistic;
  for (int t = 0; t < 40; ++t) {
    const auto h = random_pair(rng, 0.0, 3.0);
    cfg.prob.seed = t;
    const auto approx = ev.evaluate(h, cfg);
    const auto exact = naive_loglik(data, h);
    if (approx.diverged || exact.diverged)
      continue;
    total += std::abs(approx.value - exact.value);
    ++counted;
  }
  REQUIRE(counted > 10);
  CHECK(total / counted <= 0.15);
}

TEST_CASE("relative error estimate reproduces a reference bootstrap")
{
  // Two leaves of 20 points; the estimate is recomputed here with the same
  // draw order: pairs (i, j) with rejection of i == j, then B resamples.
  auto data = random_standardized(40, 1, 17);
  JointKdTree tree(data, 20);
  REQUIRE(tree.nodes().size() == 3);
  const std::int32_t a = tree.node(0).left;
  const std::int32_t b = tree.node(0).right;
  const BandwidthPair h{ 3.0, 3.0 };
  const JointKernel kernel(1, h);
  ProbConfig cfg;
  cfg.m = 25;
  cfg.bootstrap = 10;
  cfg.z = 1.5;

  for (auto [qa, qb] : { std::pair{ a, b }, std::pair{ a, a } }) {
    Rng rng(123);
    const auto est = estimate_rel_error(tree, qa, qb, kernel, cfg, rng);

    Rng ref(123);
    const KdNode& na = tree.node(qa);
    const KdNode& nb = tree.node(qb);
    std::uniform_int_distribution<std::size_t> pi(na.begin, na.end - 1);
    std::uniform_int_distribution<std::size_t> pj(nb.begin, nb.end - 1);
    const EpanechnikovKernel k1(1);
    std::vector<double> v;
    for (std::size_t t = 0; t < cfg.m; ++t) {
      std::size_t i, j;
      do {
        i = pi(ref);
        j = pj(ref);
      } while (i == j);
      const auto p = tree.point(i);
      const auto q = tree.point(j);
      v.push_back(k1.scaled(std::abs(p[0] - q[0]), h.h2) * k1.scaled(std::abs(p[1] - q[1]), h.h1));
    }
    double mean = 0.0;
    for (double x : v)
      mean += x;
    mean /= v.size();
    std::uniform_int_distribution<std::size_t> pick(0, cfg.m - 1);
    std::vector<double> means;
    for (std::size_t r = 0; r < cfg.bootstrap; ++r) {
      double s = 0.0;
      for (std::size_t t = 0; t < cfg.m; ++t)
        s += v[pick(ref)];
      means.push_back(s / cfg.m);
    }
    double g = 0.0;
    for (double x : means)
      g += x;
    g /= means.size();
    double ss = 0.0;
    for (double x : means)
      ss += (x - g) * (x - g);
    const double sd = std::sqrt(ss / (means.size() - 1));

    CHECK(est.v_hat == doctest::Approx(mean).epsilon(1e-12));
    CHECK(est.sigma_hat == doctest::Approx(sd).epsilon(1e-9));
    CHECK(est.rel_error == doctest::Approx(1.5 * sd / mean).epsilon(1e-9));
  }
}

TEST_CASE("relative error edge cases")
{
  // identical points: zero variance
  auto same = StandardizedDataset::from_scaled(1, std::vector<double>(30, 0.5), std::vector<double>(30, 0.5), { 1.0 }, 1.0);
  JointKdTree t1(same, 30);
  Rng rng(1);
  const auto e1 = estimate_rel_error(t1, 0, 0, JointKernel(1, { 1.0, 1.0 }), ProbConfig{}, rng);
  CHECK(e1.rel_error == 0.0);
  CHECK(e1.v_hat > 0.0);

  // two clusters far apart: no kernel overlap
  std::vector<double> x, y;
  for (int i = 0; i < 20; ++i) {
    x.push_back(i < 10 ? 0.0 + i * 0.01 : 50.0 + i * 0.01);
    y.push_back(0.0);
  }
  auto far = StandardizedDataset::from_scaled(1, x, y, { 1.0 }, 1.0);
  JointKdTree t2(far, 10);
  const auto e2 = estimate_rel_error(t2, t2.node(0).left, t2.node(0).right, JointKernel(1, { 1.0, 1.0 }), ProbConfig{}, rng);
  CHECK(e2.rel_error == 0.0);
  CHECK(e2.v_hat == 0.0);

  CHECK_THROWS_AS(bootstrap_stdev(std::vector<double>{ 1.0, 2.0 }, 1, rng), std::invalid_argument);
}

TEST_CASE("configuration validation")
{
  auto data = random_standardized(30, 1, 1);
  JointKdTree tree(data, 4);
  CHECK_THROWS_AS(naive_loglik(data, { 0.0, 1.0 }), std::invalid_argument);
  CHECK_THROWS_AS(dualtree_loglik_det(data, tree, { 1.0, 1.0 }, { -1.0 }), std::invalid_argument);
  ProbConfig bad;
  bad.m = 1;
  CHECK_THROWS_AS(dualtree_loglik_prob(data, tree, { 1.0, 1.0 }, bad), std::invalid_argument);
  CHECK(parse_method("det") == Method::deterministic);
  CHECK(parse_method("prob") == Method::probabilistic);
  CHECK(parse_method("naive") == Method::naive);
  CHECK_THROWS_AS(parse_method("fast"), std::invalid_argument);
}
