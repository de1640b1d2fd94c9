#include "kcde/commands.hpp"

#include "kcde/cli.hpp"
#include "kcde/csv.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>

namespace kcde::cli {

using json = nlohmann::ordered_json;

namespace {

using Clock = std::chrono::steady_clock;

double
seconds_since(Clock::time_point t0)
{
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Scores of -inf have no JSON spelling; they become null.
json
score_json(double v)
{
  return std::isfinite(v) ? json(v) : json(nullptr);
}

json
common_json(const CommonOptions& c)
{
  return { { "method", c.method },     { "epsilon", c.epsilon },       { "m", c.m },
           { "B", c.B },               { "z", c.z },                   { "h_max", c.h_max },
           { "candidates", c.candidates }, { "leaf_size", c.leaf_size }, { "alpha", c.alpha },
           { "n_samples", c.n_samples }, { "y_col", c.y_col } };
}

json
manifest(std::string_view command, const CommonOptions& c, json extra)
{
  json params = common_json(c);
  for (auto& [k, v] : extra.items()) {
    params[k] = v;
  }
  return { { "tool", "kcde" },
           { "version", tool_version },
           { "command", command },
           { "seed", c.seed },
           { "parameters", std::move(params) } };
}

json
metrics_json(const MetricsReport& m, const std::vector<std::string>& wanted)
{
  json j = json::object();
  const auto want = [&](const char* name) {
    return std::find(wanted.begin(), wanted.end(), name) != wanted.end();
  };
  if (want("ise")) {
    j["ise"] = *m.ise;
  }
  if (want("mse")) {
    j["mse"] = m.mse;
  }
  if (want("coverage")) {
    j["coverage"] = m.coverage;
  }
  if (want("width")) {
    j["mean_half_width_ratio"] = m.mean_half_width_ratio;
  }
  j["evaluated_points"] = m.evaluated_points;
  j["excluded_points"] = m.excluded_points;
  return j;
}

// Picks the query columns: by training names when all are present,
// otherwise positionally when the width matches.
std::vector<std::size_t>
query_columns(const csv::Table& q, const RawDataset& train)
{
  std::vector<std::size_t> cols;
  for (const auto& name : train.x_names()) {
    const auto it = std::find(q.header.begin(), q.header.end(), name);
    if (it == q.header.end()) {
      cols.clear();
      break;
    }
    cols.push_back(static_cast<std::size_t>(it - q.header.begin()));
  }
  if (!cols.empty()) {
    return cols;
  }
  if (q.header.size() != train.dim()) {
    throw DataError("query has " + std::to_string(q.header.size()) +
                    " columns but the model has " + std::to_string(train.dim()) +
                    " predictors");
  }
  cols.resize(train.dim());
  for (std::size_t k = 0; k < cols.size(); ++k) {
    cols[k] = k;
  }
  return cols;
}

StandardizedDataset
bench_data(const CommonOptions& c, const BenchOptions& o, std::size_t n)
{
  SyntheticSpec spec;
  spec.family = parse_family(o.family);
  spec.n = n;
  spec.seed = derive_seed(c.seed, n);
  switch (spec.family) {
    case Family::bimodal_sine:
      if (o.dim != 1) {
        throw std::invalid_argument("bimodal_sine has exactly one predictor");
      }
      break;
    case Family::uniform5d:
      spec.uniform.dims = o.dim + 1;
      break;
    case Family::decay_series:
      spec.decay.lags = o.dim;
      break;
  }
  return standardize(generate(spec).data);
}

} // namespace

MethodConfig
method_config(const CommonOptions& o)
{
  MethodConfig m;
  m.method = parse_method(o.method);
  m.det.epsilon = o.epsilon;
  m.prob.epsilon = o.epsilon;
  m.prob.m = o.m;
  m.prob.bootstrap = o.B;
  m.prob.z = o.z;
  m.prob.seed = o.seed;
  validate(m);
  return m;
}

SearchConfig
search_config(const CommonOptions& o)
{
  SearchConfig s;
  s.h_max = o.h_max;
  s.candidates = o.candidates;
  s.seed = o.seed;
  s.method = method_config(o);
  return s;
}

json
fingerprint(const RawDataset& data)
{
  std::vector<double> sd_x(data.dim());
  std::vector<double> col(data.size());
  for (std::size_t k = 0; k < data.dim(); ++k) {
    for (std::size_t i = 0; i < data.size(); ++i) {
      col[i] = data.x_row(i)[k];
    }
    sd_x[k] = sample_sd(col);
  }
  return { { "rows", data.size() },
           { "dim", data.dim() },
           { "x_columns", data.x_names() },
           { "y_column", data.y_name() },
           { "sd_x", sd_x },
           { "sd_y", sample_sd(data.y_data()) } };
}

Outcome
cmd_select(const CommonOptions& c, const SelectOptions& o, std::ostream& out)
{
  const auto t0 = Clock::now();
  const RawDataset raw = csv::to_dataset(csv::read_file(o.data), c.y_col);
  const StandardizedDataset data = standardize(raw);
  const SearchConfig cfg = search_config(c);
  const LikelihoodEvaluator evaluator(data, c.leaf_size);
  const SearchResult r = random_search(evaluator, cfg);

  json effective_x = json::array();
  for (double s : data.sigma_x()) {
    effective_x.push_back(r.best.h2 * s);
  }
  json trace = json::array();
  for (const auto& cand : r.trace) {
    trace.push_back({ { "h1", cand.h.h1 },
                      { "h2", cand.h.h2 },
                      { "score", score_json(cand.score) },
                      { "diverged", cand.diverged } });
  }
  Outcome outcome;
  outcome.manifest = manifest("select", c, { { "data", o.data } });
  outcome.manifest["dataset"] = fingerprint(raw);
  const json report = {
    { "best", { { "h1", r.best.h1 }, { "h2", r.best.h2 }, { "score", score_json(r.best_score) } } },
    { "effective_bandwidths", { { "y", r.best.h1 * data.sigma_y() }, { "x", effective_x } } },
    { "trace", trace },
    { "manifest", outcome.manifest },
  };
  out << report.dump(2) << '\n';
  outcome.seconds = seconds_since(t0);
  return outcome;
}

Outcome
cmd_predict(const CommonOptions& c, const PredictOptions& o, std::ostream& out)
{
  const auto t0 = Clock::now();
  const int modes = int(o.expect) + int(o.interval.has_value()) + int(o.density.has_value());
  if (modes != 1) {
    throw std::invalid_argument("predict needs exactly one of --expect, --interval, --density");
  }
  if (o.h1.has_value() != o.h2.has_value()) {
    throw std::invalid_argument("--h1 and --h2 must be given together");
  }
  const RawDataset raw = csv::to_dataset(csv::read_file(o.train), c.y_col);
  StandardizedDataset data = standardize(raw);

  BandwidthPair h{ 0.0, 0.0 };
  std::string source;
  if (o.h1) {
    h = { *o.h1, *o.h2 };
    source = "flags";
  } else if (!o.bandwidths.empty()) {
    std::ifstream in(o.bandwidths);
    if (!in) {
      throw DataError("cannot open '" + o.bandwidths + "'");
    }
    const auto report = json::parse(in, nullptr, false);
    if (report.is_discarded() || !report.contains("best")) {
      throw DataError("'" + o.bandwidths + "' is not a select report");
    }
    h = { report["best"]["h1"].get<double>(), report["best"]["h2"].get<double>() };
    source = "report";
  } else if (o.reference) {
    h = reference_rule(data);
    source = "reference";
  } else {
    const LikelihoodEvaluator evaluator(data, c.leaf_size);
    h = random_search(evaluator, search_config(c)).best;
    source = "search";
  }
  if (!(h.h1 > 0.0) || !(h.h2 > 0.0) || !std::isfinite(h.h1) || !std::isfinite(h.h2)) {
    throw std::invalid_argument("bandwidths must be positive and finite");
  }
  const ConditionalDensityModel model(std::move(data), h);

  const csv::Table q = csv::read_file(o.query);
  const auto cols = query_columns(q, raw);
  const std::size_t d = raw.dim();
  std::vector<double> block(q.rows.size() * d);
  for (std::size_t r = 0; r < q.rows.size(); ++r) {
    for (std::size_t k = 0; k < d; ++k) {
      block[r * d + k] = q.rows[r][cols[k]];
    }
  }
  const auto row_x = [&](std::size_t r) {
    return std::span<const double>(block).subspan(r * d, d);
  };

  if (o.expect) {
    csv::write_row(out, { "row", "expectation", "supported" });
    const auto e = model.expectations(block);
    for (std::size_t r = 0; r < e.size(); ++r) {
      const bool ok = !std::isnan(e[r]);
      csv::write_row(out, { std::to_string(r), ok ? csv::format(e[r]) : "", ok ? "1" : "0" });
    }
  } else if (o.interval) {
    csv::write_row(out, { "row", "lo", "hi", "supported" });
    for (std::size_t r = 0; r < q.rows.size(); ++r) {
      Rng rng(derive_seed(c.seed, r));
      try {
        const auto iv = model.prediction_interval(row_x(r), *o.interval, c.n_samples, rng);
        csv::write_row(out, { std::to_string(r), csv::format(iv.lo), csv::format(iv.hi), "1" });
      } catch (const UnsupportedQuery&) {
        csv::write_row(out, { std::to_string(r), "", "", "0" });
      }
    }
  } else {
    csv::write_row(out, { "row", "y", "density", "supported" });
    for (std::size_t r = 0; r < q.rows.size(); ++r) {
      try {
        const double f = model.density(row_x(r), *o.density);
        csv::write_row(out, { std::to_string(r), csv::format(*o.density), csv::format(f), "1" });
      } catch (const UnsupportedQuery&) {
        csv::write_row(out, { std::to_string(r), csv::format(*o.density), "", "0" });
      }
    }
  }

  json mode;
  if (o.expect) {
    mode = { { "expect", true } };
  } else if (o.interval) {
    mode = { { "interval", *o.interval } };
  } else {
    mode = { { "density", *o.density } };
  }
  Outcome outcome;
  outcome.manifest = manifest("predict", c, { { "train", o.train }, { "query", o.query } });
  outcome.manifest["mode"] = mode;
  outcome.manifest["bandwidths"] = { { "h1", h.h1 }, { "h2", h.h2 }, { "source", source } };
  outcome.manifest["dataset"] = fingerprint(raw);
  outcome.seconds = seconds_since(t0);
  return outcome;
}

std::vector<BenchRow>
run_bench(const CommonOptions& c, const BenchOptions& o)
{
  if (o.sizes.empty() || o.methods.empty() || o.repeats < 1) {
    throw std::invalid_argument("bench needs sizes, methods and repeats >= 1");
  }
  std::vector<Method> methods;
  for (const auto& name : o.methods) {
    methods.push_back(parse_method(name));
  }
  SearchConfig search = search_config(c);
  const auto pairs = sample_candidates(c.h_max, o.pairs, derive_seed(c.seed, 1));

  std::vector<BenchRow> rows;
  // Largest size with a measured naive time, for quadratic extrapolation.
  std::optional<std::pair<std::size_t, double>> naive_ref;
  auto sizes = o.sizes;
  std::sort(sizes.begin(), sizes.end());
  for (std::size_t n : sizes) {
    const StandardizedDataset data = bench_data(c, o, n);
    const LikelihoodEvaluator evaluator(data, c.leaf_size);
    const bool naive_runs = n <= o.naive_max;

    std::vector<double> exact;
    if (naive_runs) {
      for (const auto& h : pairs) {
        exact.push_back(naive_loglik(data, h).value);
      }
    }

    std::vector<BenchRow> block;
    for (Method m : methods) {
      BenchRow row;
      row.n = n;
      row.d = data.dim();
      row.method = m;
      if (m == Method::naive && !naive_runs) {
        if (naive_ref) {
          const double ratio = static_cast<double>(n) / static_cast<double>(naive_ref->first);
          row.mean_seconds = naive_ref->second * ratio * ratio;
          row.extrapolated = true;
        }
        block.push_back(row);
        continue;
      }
      search.method.method = m;
      double total = 0.0;
      for (std::size_t rep = 0; rep < o.repeats; ++rep) {
        const auto t0 = Clock::now();
        random_search(evaluator, search);
        total += seconds_since(t0);
      }
      row.mean_seconds = total / static_cast<double>(o.repeats);
      if (naive_runs) {
        double err = 0.0;
        std::size_t used = 0;
        MethodConfig mc = search.method;
        for (std::size_t p = 0; p < pairs.size(); ++p) {
          if (!std::isfinite(exact[p])) {
            continue; // divergent pairs are left out of the averages
          }
          mc.prob.seed = derive_seed(c.seed, 1000 + p);
          const double v = evaluator.evaluate(pairs[p], mc).value;
          if (!std::isfinite(v)) {
            continue;
          }
          err += std::abs(v - exact[p]);
          ++used;
        }
        row.error_pairs = used;
        if (used > 0) {
          row.mean_abs_error = err / static_cast<double>(used);
        }
      }
      if (m == Method::naive) {
        naive_ref = { n, row.mean_seconds };
      }
      block.push_back(row);
    }

    std::optional<double> naive_time;
    bool extrapolated = false;
    for (const auto& r : block) {
      if (r.method == Method::naive && (r.mean_seconds > 0.0)) {
        naive_time = r.mean_seconds;
        extrapolated = r.extrapolated;
      }
    }
    for (auto& r : block) {
      if (naive_time && r.mean_seconds > 0.0) {
        r.speedup = *naive_time / r.mean_seconds;
        r.extrapolated = extrapolated;
      }
      rows.push_back(r);
    }
  }
  return rows;
}

void
write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows)
{
  csv::write_row(out,
                 { "n", "d", "method", "mean_seconds", "mean_abs_error_vs_naive", "error_pairs",
                   "speedup_vs_naive", "naive_extrapolated" });
  for (const auto& r : rows) {
    const bool timed = r.mean_seconds > 0.0;
    csv::write_row(out,
                   { std::to_string(r.n),
                     std::to_string(r.d),
                     std::string(to_string(r.method)),
                     timed ? csv::format(r.mean_seconds) : "",
                     r.mean_abs_error ? csv::format(*r.mean_abs_error) : "",
                     std::to_string(r.error_pairs),
                     r.speedup ? csv::format(*r.speedup) : "",
                     r.extrapolated ? "1" : "0" });
  }
}

Outcome
cmd_bench(const CommonOptions& c, const BenchOptions& o, std::ostream& out)
{
  const auto t0 = Clock::now();
  const auto rows = run_bench(c, o);
  write_bench_csv(out, rows);
  Outcome outcome;
  outcome.manifest = manifest("bench",
                              c,
                              { { "sizes", o.sizes },
                                { "dim", o.dim },
                                { "family", o.family },
                                { "methods", o.methods },
                                { "repeats", o.repeats },
                                { "pairs", o.pairs },
                                { "naive_max", o.naive_max } });
  outcome.seconds = seconds_since(t0);
  return outcome;
}

Outcome
cmd_synth(const CommonOptions& c, const SynthOptions& o, std::ostream& out)
{
  const auto t0 = Clock::now();
  SyntheticSpec spec;
  spec.family = parse_family(o.family);
  spec.n = o.n;
  spec.seed = c.seed;
  const SyntheticData s = generate(spec);
  const RawDataset& d = s.data;

  std::vector<std::string> header = d.x_names();
  header.push_back(d.y_name());
  csv::write_row(out, header);
  std::vector<std::string> fields(header.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t k = 0; k < d.dim(); ++k) {
      fields[k] = csv::format(d.x_row(i)[k]);
    }
    fields.back() = csv::format(d.y(i));
    csv::write_row(out, fields);
  }

  json params = json::object();
  for (const auto& [name, value] : s.parameters) {
    params[name] = value;
  }
  Outcome outcome;
  outcome.manifest = json{ { "tool", "kcde" },
                           { "version", tool_version },
                           { "command", "synth" },
                           { "seed", c.seed },
                           { "family", o.family },
                           { "n", o.n },
                           { "generator", params },
                           { "dataset", fingerprint(d) } };
  outcome.seconds = seconds_since(t0);
  return outcome;
}

Outcome
cmd_eval(const CommonOptions& c, const EvalOptions& o, std::ostream& out)
{
  const auto t0 = Clock::now();
  if (o.family.empty() == o.data.empty()) {
    throw std::invalid_argument("eval needs exactly one of --family or --data");
  }
  std::optional<SyntheticData> synthetic;
  std::optional<RawDataset> real;
  if (!o.family.empty()) {
    SyntheticSpec spec;
    spec.family = parse_family(o.family);
    spec.n = o.n;
    spec.seed = c.seed;
    synthetic = generate(spec);
  } else {
    real = csv::to_dataset(csv::read_file(o.data), c.y_col);
  }
  const RawDataset& data = synthetic ? synthetic->data : *real;
  const TrueDensity* truth = synthetic ? &synthetic->truth : nullptr;

  std::vector<std::string> metrics = o.metrics;
  if (metrics.empty()) {
    metrics = { "mse", "coverage", "width" };
    if (truth) {
      metrics.insert(metrics.begin(), "ise");
    }
  }
  for (const auto& m : metrics) {
    if (m != "ise" && m != "mse" && m != "coverage" && m != "width") {
      throw std::invalid_argument("unknown metric '" + m + "' (ise, mse, coverage, width)");
    }
    if (m == "ise" && !truth) {
      throw UnsupportedMetric("ise needs a known true density; it is unavailable for --data");
    }
  }

  std::vector<Selection> selections;
  if (o.compare) {
    selections = { Selection::likelihood, Selection::reference };
  } else if (o.selection == "likelihood") {
    selections = { Selection::likelihood };
  } else if (o.selection == "reference") {
    selections = { Selection::reference };
  } else {
    throw std::invalid_argument("unknown selection '" + o.selection + "'");
  }

  PipelineConfig cfg;
  cfg.search = search_config(c);
  cfg.leaf_size = c.leaf_size;
  cfg.folds = o.folds;
  cfg.alpha = c.alpha;
  cfg.n_samples = c.n_samples;
  cfg.seed = c.seed;

  json results = json::object();
  std::vector<MetricsReport> means;
  for (Selection sel : selections) {
    cfg.selection = sel;
    const auto report = cross_validate(data, truth, cfg);
    json folds = json::array();
    for (const auto& f : report.folds) {
      json fj = { { "fold", f.fold }, { "h1", f.h.h1 }, { "h2", f.h.h2 } };
      fj.update(metrics_json(f.metrics, metrics));
      folds.push_back(std::move(fj));
    }
    results[std::string(to_string(sel))] = { { "mean", metrics_json(report.mean, metrics) },
                                             { "folds", std::move(folds) } };
    means.push_back(report.mean);
  }

  Outcome outcome;
  outcome.manifest = manifest("eval",
                              c,
                              { { "family", o.family },
                                { "data", o.data },
                                { "n", o.n },
                                { "selection", o.compare ? "both" : o.selection },
                                { "folds", o.folds },
                                { "metrics", metrics } });
  outcome.manifest["dataset"] = fingerprint(data);
  if (synthetic) {
    json params = json::object();
    for (const auto& [name, value] : synthetic->parameters) {
      params[name] = value;
    }
    outcome.manifest["generator"] = params;
  }
  json report = { { "results", results } };
  if (o.compare) {
    // Likelihood and reference side by side, one row per metric.
    json table = json::array();
    const auto l = metrics_json(means[0], metrics);
    const auto r = metrics_json(means[1], metrics);
    for (const auto& [key, value] : l.items()) {
      table.push_back({ { "metric", key }, { "likelihood", value }, { "reference", r[key] } });
    }
    report["comparison"] = std::move(table);
  }
  report["manifest"] = outcome.manifest;
  out << report.dump(2) << '\n';
  outcome.seconds = seconds_since(t0);
  return outcome;
}

} // namespace kcde::cli
