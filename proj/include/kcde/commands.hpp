#pragma once

#include "kcde/bandwidth.hpp"
#include "kcde/evalgen.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace kcde::cli {

//! A metric was requested that the input cannot support (ISE on real data).
class UnsupportedMetric : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

//! Flags shared by every command.
struct CommonOptions
{
  std::uint64_t seed = 0;
  std::string method = "prob";
  double epsilon = 0.1;
  std::size_t m = 25;
  std::size_t B = 10;
  double z = 1.5;
  double h_max = 10.0;
  std::size_t candidates = 300;
  std::size_t leaf_size = JointKdTree::default_leaf_size;
  double alpha = 0.05;
  std::size_t n_samples = ConditionalDensityModel::default_interval_samples;
  std::string y_col;
};

MethodConfig method_config(const CommonOptions& o);
SearchConfig search_config(const CommonOptions& o);

struct SelectOptions
{
  std::string data;
};

struct PredictOptions
{
  std::string train;
  std::string query;
  std::optional<double> h1;
  std::optional<double> h2;
  std::string bandwidths; ///< path to a select report
  bool reference = false;
  bool expect = false;
  std::optional<double> interval;
  std::optional<double> density;
};

struct BenchOptions
{
  std::vector<std::size_t> sizes{ 500, 1000, 2000 };
  std::size_t dim = 3;
  std::string family = "decay_series";
  std::vector<std::string> methods{ "naive", "det", "prob" };
  std::size_t repeats = 1;
  std::size_t pairs = 20;
  std::size_t naive_max = 5000;
};

struct SynthOptions
{
  std::string family;
  std::size_t n = 1000;
  std::string out;
};

struct EvalOptions
{
  std::string family;
  std::string data;
  std::size_t n = 2000;
  std::string selection = "likelihood";
  bool compare = false;
  std::size_t folds = 10;
  std::vector<std::string> metrics;
};

//! One line of the benchmark table.
struct BenchRow
{
  std::size_t n = 0;
  std::size_t d = 0;
  Method method = Method::naive;
  double mean_seconds = 0.0;
  bool extrapolated = false; ///< naive time scaled up quadratically
  std::optional<double> mean_abs_error; ///< vs naive, over non-divergent pairs
  std::size_t error_pairs = 0;
  std::optional<double> speedup; ///< naive time / this time
};

//! The command's products: the manifest (without timings) and wall time.
struct Outcome
{
  nlohmann::ordered_json manifest;
  double seconds = 0.0;
};

Outcome cmd_select(const CommonOptions& c, const SelectOptions& o, std::ostream& out);
Outcome cmd_predict(const CommonOptions& c, const PredictOptions& o, std::ostream& out);
Outcome cmd_bench(const CommonOptions& c, const BenchOptions& o, std::ostream& out);
Outcome cmd_synth(const CommonOptions& c, const SynthOptions& o, std::ostream& out);
Outcome cmd_eval(const CommonOptions& c, const EvalOptions& o, std::ostream& out);

//! The benchmark behind cmd_bench, for callers that want the rows.
std::vector<BenchRow> run_bench(const CommonOptions& c, const BenchOptions& o);
void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows);

//! Rows, dimension, column names and per-column sd of a raw dataset.
nlohmann::ordered_json fingerprint(const RawDataset& data);

} // namespace kcde::cli
