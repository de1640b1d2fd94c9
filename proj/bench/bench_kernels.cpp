// Serial vs OpenMP naive likelihood, with the dual-tree evaluators for scale.
// Prints CSV: n,d,variant,threads,seconds,loglik,matches_serial

#include "kcde/evalgen.hpp"
#include "kcde/likelihood.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

using namespace kcde;

namespace {

double
time_best(std::size_t repeats, const std::function<double()>& f, double& value)
{
  double best = 1e300;
  for (std::size_t r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    value = f();
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    best = std::min(best, s);
  }
  return best;
}

} // namespace

int
main(int argc, char** argv)
{
  CLI::App app{ "naive likelihood: serial vs parallel" };
  std::vector<std::size_t> sizes{ 1000, 2000, 4000 };
  std::size_t dim = 3;
  std::size_t repeats = 3;
  double h1 = 1.0, h2 = 1.0;
  app.add_option("--sizes", sizes)->delimiter(',')->capture_default_str();
  app.add_option("--dim", dim)->capture_default_str();
  app.add_option("--repeats", repeats)->capture_default_str();
  app.add_option("--h1", h1)->capture_default_str();
  app.add_option("--h2", h2)->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  const int threads = omp_get_max_threads();
  std::printf("n,d,variant,threads,seconds,loglik,matches_serial\n");
  for (std::size_t n : sizes) {
    SyntheticSpec spec;
    spec.family = Family::decay_series;
    spec.decay.lags = dim;
    spec.n = n;
    spec.seed = n;
    const auto data = standardize(generate(spec).data);
    const JointKdTree tree(data);
    const BandwidthPair h{ h1, h2 };

    double serial = 0.0;
    const double ts = time_best(repeats, [&] { return naive_loglik_serial(data, h).value; }, serial);
    std::printf("%zu,%zu,naive_serial,1,%.6f,%.12g,1\n", n, dim, ts, serial);

    double par = 0.0;
    const double tp = time_best(repeats, [&] { return naive_loglik(data, h).value; }, par);
    std::printf("%zu,%zu,naive_omp,%d,%.6f,%.12g,%d\n", n, dim, threads, tp, par, int(par == serial));

    double det = 0.0;
    const double td = time_best(repeats, [&] { return dualtree_loglik_det(data, tree, h, DetConfig{}).value; }, det);
    std::printf("%zu,%zu,deterministic,1,%.6f,%.12g,0\n", n, dim, td, det);

    double prob = 0.0;
    const double tq = time_best(repeats, [&] { return dualtree_loglik_prob(data, tree, h, ProbConfig{}).value; }, prob);
    std::printf("%zu,%zu,probabilistic,1,%.6f,%.12g,0\n", n, dim, tq, prob);
  }
  return 0;
}
