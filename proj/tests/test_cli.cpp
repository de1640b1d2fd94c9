#include "kcde/cli.hpp"
#include "kcde/csv.hpp"
#include "kcde/estimator.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

using namespace kcde;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run
{
  int code;
  std::string out;
  std::string err;
};

Run
kcde_run(std::vector<std::string> args)
{
  args.insert(args.begin(), "kcde");
  std::vector<const char*> argv;
  for (const auto& a : args)
    argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return { code, out.str(), err.str() };
}

std::string
slurp(const fs::path& p)
{
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void
spit(const fs::path& p, const std::string& text)
{
  std::ofstream(p) << text;
}

struct TempDir
{
  fs::path path;
  TempDir()
  {
    path = fs::temp_directory_path() / ("kcde_cli_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

csv::Table
table(const std::string& text)
{
  std::istringstream in(text);
  return csv::parse(in);
}

} // namespace

TEST_CASE("csv parsing")
{
  const auto t = table("a, b ,c\n1,2,3\n\n4.5,-1e3,7\n");
  CHECK(t.header == std::vector<std::string>{ "a", "b", "c" });
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[1][1] == -1000.0);

  try {
    table("a,b\n1,2\n3\n");
    FAIL("expected an error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }
  try {
    table("a,b\n1,2\n3,x\n");
    FAIL("expected an error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
    CHECK(std::string(e.what()).find("'x'") != std::string::npos);
  }
  CHECK_THROWS_AS(table(""), DataError);

  const auto d = csv::to_dataset(table("p,q,r\n1,2,3\n4,6,5\n"), "q");
  CHECK(d.dim() == 2);
  CHECK(d.y_name() == "q");
  CHECK(d.y(1) == 6.0);
  CHECK(d.x_row(1)[1] == 5.0);
  CHECK(csv::to_dataset(table("p,q,r\n1,2,3\n4,6,5\n"), "0").y(1) == 4.0);
  CHECK(csv::to_dataset(table("p,q,r\n1,2,3\n4,6,5\n"), "").y(1) == 5.0);
  CHECK_THROWS_AS(csv::to_dataset(table("p,q\n1,2\n3,4\n"), "zz"), DataError);

  for (double v : { 0.1, -3.0, 1e-300, 123456789.123456789 }) {
    CHECK(std::stod(csv::format(v)) == v);
  }
}

TEST_CASE("synth writes data and metadata reproducibly")
{
  TempDir dir;
  const auto a = kcde_run({ "synth", "decay_series", "--n", "120", "--seed", "4", "--out", dir / "a.csv" });
  REQUIRE(a.code == 0);
  const auto b = kcde_run({ "synth", "decay_series", "--n", "120", "--seed", "4", "--out", dir / "b.csv" });
  REQUIRE(b.code == 0);
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  CHECK(slurp(dir / "a.csv.meta.json") == slurp(dir / "b.csv.meta.json"));

  const auto t = csv::read_file(dir / "a.csv");
  CHECK(t.rows.size() == 120);
  CHECK(t.header.size() == 8);
  const auto meta = json::parse(slurp(dir / "a.csv.meta.json"));
  CHECK(meta["generator"]["lags"] == 7);
  CHECK(meta["generator"]["decay_base"] == 0.5);
  CHECK(meta["generator"]["burn_in"] == 50);

  CHECK(kcde_run({ "synth", "spiral", "--out", dir / "c.csv" }).code != 0);
  CHECK(kcde_run({ "synth", "uniform5d" }).code != 0);
}

TEST_CASE("select report")
{
  TempDir dir;
  REQUIRE(kcde_run({ "synth", "bimodal_sine", "--n", "100", "--seed", "1", "--out", dir / "d.csv" }).code == 0);
  const auto r = kcde_run({ "select", dir / "d.csv", "--candidates", "30", "--h-max", "2", "--seed", "3" });
  REQUIRE(r.code == 0);
  const auto j = json::parse(r.out);
  CHECK(std::isfinite(j["best"]["score"].get<double>()));
  CHECK(j["best"]["h1"].get<double>() > 0.0);
  CHECK(j["best"]["h2"].get<double>() > 0.0);
  CHECK(j["effective_bandwidths"]["x"].size() == 1);
  CHECK(j["trace"].size() == 30);
  CHECK(j["manifest"]["parameters"]["candidates"] == 30);
  CHECK(j["manifest"]["dataset"]["rows"] == 100);
  CHECK_FALSE(j["manifest"].contains("timings"));
  const double sd_x = j["manifest"]["dataset"]["sd_x"][0].get<double>();
  CHECK(j["effective_bandwidths"]["x"][0].get<double>() ==
        doctest::Approx(j["best"]["h2"].get<double>() * sd_x).epsilon(1e-14));

  const auto once = kcde_run({ "select", dir / "d.csv", "--candidates", "1", "--seed", "7" });
  const auto twice = kcde_run({ "select", dir / "d.csv", "--candidates", "1", "--seed", "7" });
  CHECK(once.out == twice.out);

  REQUIRE(kcde_run({ "select", dir / "d.csv", "--candidates", "5", "--manifest-out", dir / "m.json" }).code == 0);
  CHECK(json::parse(slurp(dir / "m.json"))["timings"]["total_seconds"].get<double>() >= 0.0);
}

TEST_CASE("deterministic and naive selection agree within epsilon")
{
  TempDir dir;
  REQUIRE(kcde_run({ "synth", "bimodal_sine", "--n", "300", "--seed", "2", "--out", dir / "d.csv" }).code == 0);
  std::vector<double> best;
  for (const char* m : { "naive", "det" }) {
    const auto r = kcde_run({ "select", dir / "d.csv", "--method", m, "--candidates", "60", "--h-max", "2", "--epsilon", "0.1" });
    REQUIRE(r.code == 0);
    best.push_back(json::parse(r.out)["best"]["score"].get<double>());
  }
  CHECK(std::abs(best[0] - best[1]) <= 0.1);
}

TEST_CASE("select errors")
{
  TempDir dir;
  spit(dir / "bad.csv", "x,y\n1,2\n3,4\n5\n");
  auto r = kcde_run({ "select", dir / "bad.csv" });
  CHECK(r.code == 3);
  const auto e = json::parse(r.err);
  CHECK(e["error"]["kind"] == "data");
  CHECK(e["error"]["message"].get<std::string>().find(":4:") != std::string::npos);

  spit(dir / "flat.csv", "flat,y\n1,2\n1,4\n1,5\n");
  r = kcde_run({ "select", dir / "flat.csv" });
  CHECK(r.code == 3);
  CHECK(json::parse(r.err)["error"]["message"] == "column x[0] ('flat') has zero variance");

  CHECK(kcde_run({ "select", dir / "flat.csv", "--method", "magic" }).code == 2);
  CHECK(kcde_run({ "select", dir / "flat.csv", "--epsilon", "-1" }).code != 0);
  spit(dir / "ok.csv", "x,y\n1,2\n2,4\n3,5\n4,1\n");
  r = kcde_run({ "select", dir / "ok.csv", "--h-max", "1e-9", "--candidates", "3" });
  CHECK(r.code == 4);
  CHECK(json::parse(r.err)["error"]["kind"] == "search");
}

TEST_CASE("predict modes")
{
  TempDir dir;
  spit(dir / "t.csv", "u,v,y\n0,0,1\n1,0,2\n0,1,3\n1,1,4\n0.5,0.5,2.5\n");
  spit(dir / "q.csv", "u,v\n0,0\n1,0\n0,1\n1,1\n0.5,0.5\n90,90\n");
  const std::vector<std::string> base{ "predict", "--train", dir / "t.csv", "--query", dir / "q.csv", "--h1", "0.8", "--h2", "2.0" };

  auto args = base;
  args.push_back("--expect");
  auto r = kcde_run(args);
  REQUIRE(r.code == 0);
  CHECK(r.out.ends_with("5,,0\n"));
  auto t = table(r.out.substr(0, r.out.find("5,,0")));
  REQUIRE(t.rows.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(std::isfinite(t.rows[i][1]));
    CHECK(t.rows[i][2] == 1.0);
  }

  args = base;
  args.insert(args.end(), { "--interval", "0.05", "--seed", "9" });
  r = kcde_run(args);
  REQUIRE(r.code == 0);
  std::istringstream lines(r.out);
  std::string line;
  std::getline(lines, line);
  int supported = 0;
  while (std::getline(lines, line)) {
    if (line.ends_with(",1")) {
      const auto f = table("r,lo,hi,s\n" + line + "\n").rows[0];
      CHECK(f[1] <= f[2]);
      ++supported;
    }
  }
  CHECK(supported == 5);
  CHECK(kcde_run(args).out == r.out);

  args = base;
  args.insert(args.end(), { "--density", "2.2" });
  r = kcde_run(args);
  REQUIRE(r.code == 0);
  t = table(r.out.substr(0, r.out.find("5,2.2,,0")));
  const auto train = standardize(csv::to_dataset(csv::read_file(dir / "t.csv"), ""));
  const ConditionalDensityModel model(train, { 0.8, 2.0 });
  const auto q = csv::read_file(dir / "q.csv");
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(t.rows[i][2] == model.density(q.rows[i], 2.2));
  }

  spit(dir / "wide.csv", "a,b,c\n1,2,3\n");
  args = { "predict", "--train", dir / "t.csv", "--query", dir / "wide.csv", "--h1", "1", "--h2", "1", "--expect" };
  r = kcde_run(args);
  CHECK(r.code == 3);
  CHECK(json::parse(r.err)["error"]["message"].get<std::string>().find("predictors") != std::string::npos);

  args = base;
  CHECK(kcde_run(args).code == 2); // no mode
  args.insert(args.end(), { "--expect", "--density", "1" });
  CHECK(kcde_run(args).code == 2); // two modes
}

TEST_CASE("predict takes bandwidths from a select report")
{
  TempDir dir;
  REQUIRE(kcde_run({ "synth", "bimodal_sine", "--n", "80", "--seed", "5", "--out", dir / "d.csv" }).code == 0);
  REQUIRE(kcde_run({ "select", dir / "d.csv", "--candidates", "10", "--h-max", "2", "--out", dir / "s.json" }).code == 0);
  spit(dir / "q.csv", "x\n2.0\n");
  const auto best = json::parse(slurp(dir / "s.json"))["best"];
  const auto a = kcde_run({ "predict", "--train", dir / "d.csv", "--query", dir / "q.csv", "--bandwidths", dir / "s.json", "--expect" });
  const auto b = kcde_run({ "predict", "--train", dir / "d.csv", "--query", dir / "q.csv",
                            "--h1", csv::format(best["h1"].get<double>()), "--h2", csv::format(best["h2"].get<double>()), "--expect" });
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
}

TEST_CASE("bench table shape and deterministic error")
{
  const auto r = kcde_run({ "bench", "--sizes", "150,300", "--dim", "2", "--candidates", "10", "--h-max", "2", "--pairs", "15", "--epsilon", "0.05" });
  REQUIRE(r.code == 0);
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  CHECK(line == "n,d,method,mean_seconds,mean_abs_error_vs_naive,error_pairs,speedup_vs_naive,naive_extrapolated");
  std::vector<std::string> rows;
  while (std::getline(in, line))
    rows.push_back(line);
  REQUIRE(rows.size() == 6);
  for (const auto& row : rows) {
    if (row.find(",deterministic,") != std::string::npos) {
      std::vector<std::string> f;
      std::stringstream ss(row);
      std::string cell;
      while (std::getline(ss, cell, ','))
        f.push_back(cell);
      CHECK(std::stod(f[4]) <= 0.05);
    }
  }

  const auto x = kcde_run({ "bench", "--sizes", "150,300", "--methods", "naive,prob", "--naive-max", "150", "--candidates", "5" });
  REQUIRE(x.code == 0);
  CHECK(x.out.find("300,3,naive,") != std::string::npos);
  CHECK(x.out.find(",1\n") != std::string::npos); // extrapolated rows are labelled
}

TEST_CASE("eval reports")
{
  TempDir dir;
  const std::vector<std::string> small{ "--n", "100", "--candidates", "10", "--h-max", "2", "--n-samples", "300" };
  auto args = std::vector<std::string>{ "eval", "--family", "bimodal_sine" };
  args.insert(args.end(), small.begin(), small.end());
  const auto r = kcde_run(args);
  REQUIRE(r.code == 0);
  const auto j = json::parse(r.out);
  const auto& mean = j["results"]["likelihood"]["mean"];
  for (const char* k : { "ise", "mse", "coverage", "mean_half_width_ratio" }) {
    CHECK(mean.contains(k));
  }
  CHECK(j["results"]["likelihood"]["folds"].size() == 10);
  CHECK(kcde_run(args).out == r.out);

  args.push_back("--compare");
  const auto c = json::parse(kcde_run(args).out);
  CHECK(c["results"].contains("reference"));
  CHECK(c["comparison"][0]["metric"] == "ise");
  CHECK(c["comparison"][0].contains("likelihood"));
  CHECK(c["comparison"][0].contains("reference"));

  REQUIRE(kcde_run({ "synth", "bimodal_sine", "--n", "100", "--out", dir / "real.csv" }).code == 0);
  args = { "eval", "--data", dir / "real.csv", "--candidates", "10", "--h-max", "2", "--n-samples", "300" };
  const auto real = kcde_run(args);
  REQUIRE(real.code == 0);
  CHECK_FALSE(json::parse(real.out)["results"]["likelihood"]["mean"].contains("ise"));
  args.insert(args.end(), { "--metrics", "ise,mse" });
  const auto bad = kcde_run(args);
  CHECK(bad.code == 2);
  CHECK(json::parse(bad.err)["error"]["kind"] == "unsupported_metric");

  CHECK(kcde_run({ "eval" }).code == 2);
}

TEST_CASE("help and version")
{
  CHECK(kcde_run({ "--help" }).code == 0);
  CHECK(kcde_run({ "--version" }).out == std::string(cli::tool_version) + "\n");
  CHECK(kcde_run({}).code == 2);
}
