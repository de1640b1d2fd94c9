#include "kcde/cli.hpp"
#include "kcde/commands.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <functional>
#include <ostream>

namespace kcde::cli {

namespace {

enum ExitCode
{
  ok = 0,
  usage = 2,
  data = 3,
  failure = 4
};

int
report_error(std::ostream& err, std::string_view kind, std::string_view message, int code)
{
  const nlohmann::ordered_json j = {
    { "error", { { "kind", kind }, { "message", message }, { "exit_code", code } } }
  };
  err << j.dump() << '\n';
  return code;
}

void
add_common(CLI::App* sub, CommonOptions& c, std::string& out_path, std::string& manifest_out)
{
  sub->add_option("--seed", c.seed, "master random seed")->capture_default_str();
  sub->add_option("--method", c.method, "likelihood evaluator")
    ->check(CLI::IsMember({ "naive", "det", "prob", "deterministic", "probabilistic" }))
    ->capture_default_str();
  sub->add_option("--epsilon", c.epsilon, "error tolerance on L")->capture_default_str();
  sub->add_option("--m", c.m, "pairs sampled per prune test")->capture_default_str();
  sub->add_option("--B", c.B, "bootstrap resamples")->capture_default_str();
  sub->add_option("--z", c.z, "normal quantile for the prune test")->capture_default_str();
  sub->add_option("--h-max", c.h_max, "upper end of the bandwidth box")->capture_default_str();
  sub->add_option("--candidates", c.candidates, "random-search candidates")->capture_default_str();
  sub->add_option("--leaf-size", c.leaf_size, "kd-tree leaf size")->capture_default_str();
  sub->add_option("--alpha", c.alpha, "interval miscoverage level")->capture_default_str();
  sub->add_option("--n-samples", c.n_samples, "draws per prediction interval")
    ->capture_default_str();
  sub->add_option("--y-col", c.y_col, "response column name or 0-based index (default: last)");
  sub->add_option("--out", out_path, "output file (default: stdout)");
  sub->add_option("--manifest-out", manifest_out, "write the run manifest with timings here");
}

} // namespace

int
run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
  CLI::App app{ "Kernel conditional density estimation with fast bandwidth selection", "kcde" };
  app.require_subcommand(1);
  app.set_version_flag("--version", tool_version);

  CommonOptions common;
  std::string out_path;
  std::string manifest_out;

  SelectOptions select;
  auto* sel = app.add_subcommand("select", "choose bandwidths by likelihood cross-validation");
  sel->add_option("data", select.data, "input CSV")->required();

  PredictOptions predict;
  auto* pred = app.add_subcommand("predict", "expectations, intervals or densities at query rows");
  pred->add_option("--train", predict.train, "training CSV")->required();
  pred->add_option("--query", predict.query, "query CSV with predictor columns")->required();
  pred->add_option("--h1", predict.h1, "y bandwidth (standardized units)");
  pred->add_option("--h2", predict.h2, "x bandwidth (standardized units)");
  pred->add_option("--bandwidths", predict.bandwidths, "select report to take bandwidths from");
  pred->add_flag("--reference", predict.reference, "use reference-rule bandwidths");
  pred->add_flag("--expect", predict.expect, "conditional expectation");
  pred->add_option("--interval", predict.interval, "narrowest 1 - alpha interval at this alpha");
  pred->add_option("--density", predict.density, "conditional density at this y");

  BenchOptions bench;
  auto* ben = app.add_subcommand("bench", "time naive, deterministic and probabilistic selection");
  ben->add_option("--sizes", bench.sizes, "comma-separated sample sizes")
    ->delimiter(',')
    ->capture_default_str();
  ben->add_option("--dim", bench.dim, "predictor dimension")->capture_default_str();
  ben->add_option("--family", bench.family, "synthetic family")->capture_default_str();
  ben->add_option("--methods", bench.methods, "comma-separated methods")
    ->delimiter(',')
    ->capture_default_str();
  ben->add_option("--repeats", bench.repeats, "timed selections per cell")->capture_default_str();
  ben->add_option("--pairs", bench.pairs, "bandwidth pairs for the error column")
    ->capture_default_str();
  ben->add_option("--naive-max", bench.naive_max, "largest n where naive runs")
    ->capture_default_str();

  SynthOptions synth;
  auto* syn = app.add_subcommand("synth", "write a synthetic dataset and its metadata");
  syn->add_option("family", synth.family, "bimodal_sine, uniform5d or decay_series")->required();
  syn->add_option("--n", synth.n, "rows")->capture_default_str();

  EvalOptions eval;
  auto* ev = app.add_subcommand("eval", "cross-validated ISE, MSE, coverage and width");
  ev->add_option("--family", eval.family, "synthetic family with known truth");
  ev->add_option("--data", eval.data, "real-data CSV");
  ev->add_option("--n", eval.n, "rows to generate for --family")->capture_default_str();
  ev->add_option("--selection", eval.selection, "likelihood or reference")
    ->check(CLI::IsMember({ "likelihood", "reference" }))
    ->capture_default_str();
  ev->add_flag("--compare", eval.compare, "report likelihood and reference side by side");
  ev->add_option("--folds", eval.folds, "cross-validation folds")->capture_default_str();
  ev->add_option("--metrics", eval.metrics, "subset of ise,mse,coverage,width")->delimiter(',');

  for (auto* sub : { sel, pred, ben, syn, ev }) {
    add_common(sub, common, out_path, manifest_out);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return ok;
  } catch (const CLI::CallForVersion&) {
    out << tool_version << '\n';
    return ok;
  } catch (const CLI::ParseError& e) {
    return report_error(err, "usage", e.what(), usage);
  }

  try {
    std::function<Outcome(std::ostream&)> command;
    if (sel->parsed()) {
      command = [&](std::ostream& o) { return cmd_select(common, select, o); };
    } else if (pred->parsed()) {
      command = [&](std::ostream& o) { return cmd_predict(common, predict, o); };
    } else if (ben->parsed()) {
      command = [&](std::ostream& o) { return cmd_bench(common, bench, o); };
    } else if (syn->parsed()) {
      if (out_path.empty()) {
        throw std::invalid_argument("synth needs --out");
      }
      synth.out = out_path;
      command = [&](std::ostream& o) { return cmd_synth(common, synth, o); };
    } else {
      command = [&](std::ostream& o) { return cmd_eval(common, eval, o); };
    }

    Outcome outcome;
    if (out_path.empty()) {
      outcome = command(out);
    } else {
      std::ofstream file(out_path);
      if (!file) {
        throw DataError("cannot write '" + out_path + "'");
      }
      outcome = command(file);
    }
    if (syn->parsed()) {
      std::ofstream meta(out_path + ".meta.json");
      meta << outcome.manifest.dump(2) << '\n';
    }
    if (!manifest_out.empty()) {
      auto m = outcome.manifest;
      m["timings"] = { { "total_seconds", outcome.seconds } };
      std::ofstream file(manifest_out);
      if (!file) {
        throw DataError("cannot write '" + manifest_out + "'");
      }
      file << m.dump(2) << '\n';
    }
    return ok;
  } catch (const DataError& e) {
    return report_error(err, "data", e.what(), data);
  } catch (const UnsupportedMetric& e) {
    return report_error(err, "unsupported_metric", e.what(), usage);
  } catch (const SearchError& e) {
    return report_error(err, "search", e.what(), failure);
  } catch (const std::invalid_argument& e) {
    return report_error(err, "usage", e.what(), usage);
  } catch (const std::exception& e) {
    return report_error(err, "failure", e.what(), failure);
  }
}

} // namespace kcde::cli
