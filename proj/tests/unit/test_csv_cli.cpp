#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>
#include <json.hpp>

#include "cli.hpp"
#include "cspt/csv.hpp"

using namespace cspt;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "cspt");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

CsvTable parse(const std::string& text) {
  std::istringstream in(text);
  return read_csv(in);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::filesystem::path scratch(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("cspt_test_" + name);
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("doubles round-trip through text") {
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, (i % 40) - 20);
    CHECK(parse_double(format_double(v)) == v);
  }
  CHECK(format_double(INFINITY) == "inf");
  CHECK(format_double(-INFINITY) == "-inf");
  CHECK(format_double(NAN) == "nan");
  CHECK(std::isnan(parse_double("nan")));
  CHECK(parse_double("inf") == INFINITY);
  CHECK_THROWS_AS(parse_double("1.5x"), std::invalid_argument);
}

TEST_CASE("CSV files re-emit byte for byte") {
  PhaseBoundary b{Norm::L1, BoundaryMethod::worst_case, {}};
  b.points = {{0.0002, 0.1234567890123, true}, {0.001, std::nullopt, false}};
  std::ostringstream first;
  write_csv(first, boundary_table(b));
  std::ostringstream second;
  write_csv(second, parse(first.str()));
  CHECK(first.str() == second.str());
  CHECK(first.str() == "rho,alpha_c,at_valid\n0.0002,0.1234567890123,true\n0.001,nan,false\n");

  const auto points = boundary_points(parse(first.str()));
  REQUIRE(points.size() == 2);
  CHECK(*points[0].alpha_c == 0.1234567890123);
  CHECK_FALSE(points[1].alpha_c.has_value());

  const std::vector<TrialOutcome> outs{{10, 0.5, 8, 3, 18446744073709551615ull}, {12, 0.5, 11, 2, 7}};
  std::ostringstream t1, t2;
  write_csv(t1, trials_table(outs));
  const auto back = trial_outcomes(parse(t1.str()));
  write_csv(t2, trials_table(back));
  CHECK(t1.str() == t2.str());
  CHECK(back[0].seed == 18446744073709551615ull);
  CHECK(back[1].p_critical == 11);
}

TEST_CASE("grid syntax") {
  const auto g = cli::parse_rho_grid("0.1:0.9:17");
  REQUIRE(g.size() == 17);
  CHECK(g.front() == 0.1);
  CHECK(g.back() == 0.9);
  CHECK(g[8] == doctest::Approx(0.5));
  CHECK(cli::parse_n_list("10:2:30").size() == 11);
  CHECK(cli::parse_n_list("10:4:20") == std::vector<int>{10, 14, 18});
  CHECK(cli::parse_n_list("8,12,16") == std::vector<int>{8, 12, 16});
}

TEST_CASE("boundary command") {
  const Run l1 = invoke({"boundary", "--norm", "l1", "--rho", "0.1:0.9:17"});
  CHECK(l1.code == 0);
  const CsvTable t = parse(l1.out);
  CHECK(t.header == std::vector<std::string>{"rho", "alpha_c", "at_valid"});
  REQUIRE(t.rows.size() == 17);
  for (std::size_t i = 1; i < t.rows.size(); ++i) CHECK(parse_double(t.rows[i][1]) > parse_double(t.rows[i - 1][1]));

  const Run l2 = invoke({"boundary", "--norm", "l2", "--rho", "0.1:0.9:5"});
  CHECK(l2.code == 0);
  for (const auto& row : parse(l2.out).rows) CHECK(parse_double(row[1]) == 1.0);

  const Run wc = invoke({"boundary", "--norm", "l1", "--method", "worst-case", "--rho", "0.0005:0.01:20"});
  CHECK(wc.code == 0);
  const CsvTable w = parse(wc.out);
  CHECK(w.rows.front()[1] != "nan");
  CHECK(w.rows.back()[1] == "nan");

  const auto path = scratch("boundary.csv");
  CHECK(invoke({"boundary", "--norm", "l0", "--rho", "0.2:0.8:4", "--out", path.string()}).code == 0);
  CHECK(slurp(path) == "rho,alpha_c,at_valid\n0.2,0.2,false\n0.4,0.4,false\n0.6,0.6,false\n0.8,0.8,false\n");
  std::filesystem::remove(path);
}

TEST_CASE("solve command") {
  const Run above = invoke({"solve", "--alpha", "0.9", "--rho", "0.5", "--norm", "l1"});
  CHECK(above.code == 0);
  const json a = json::parse(above.out);
  CHECK(a["is_success"] == true);
  CHECK(a["mse"].get<double>() < 1e-8);
  CHECK(a["qhat"] == "inf");
  for (const char* key : {"Q", "chi", "m", "qhat", "chihat", "mhat", "free_energy", "mse", "is_success",
                          "at_stable", "residual"})
    CHECK(a.contains(key));

  const json b = json::parse(invoke({"solve", "--alpha", "0.7", "--rho", "0.5", "--norm", "l1"}).out);
  CHECK(b["is_success"] == false);

  const json c = json::parse(invoke({"solve", "--alpha", "1.5", "--rho", "1.0", "--norm", "l2"}).out);
  CHECK(c["is_success"] == true);
  CHECK(c["Q"].is_number());
  CHECK(c["chi"].is_number());
  CHECK(c["m"].is_number());
  CHECK(c["free_energy"].is_number());

  const Run stuck = invoke({"solve", "--alpha", "0.7", "--rho", "0.5", "--max-iter", "5"});
  CHECK(stuck.code == 2);
  CHECK(json::parse(stuck.out).contains("error"));
}

TEST_CASE("usage errors") {
  CHECK(invoke({}).code == 1);
  CHECK(invoke({"boundary"}).code == 1);
  CHECK(invoke({"boundary", "--rho", "0.5:0.1:3"}).code == 1);
  CHECK(invoke({"boundary", "--rho", "0.1:0.5:1"}).code == 1);
  CHECK(invoke({"boundary", "--rho", "0.1:0.5:3", "--norm", "l7"}).code == 1);
  CHECK(invoke({"boundary", "--rho", "0.1:0.5:3", "--norm", "l2", "--method", "worst-case"}).code == 1);
  CHECK(invoke({"solve", "--alpha", "0", "--rho", "0.5"}).code == 1);
  CHECK(invoke({"solve", "--alpha", "0.5", "--rho", "2"}).code == 1);
  CHECK(invoke({"experiment", "--rho", "0.5", "--n", "10:2:12"}).code == 1);
  CHECK(invoke({"experiment", "--rho", "0.5", "--n", "10:2:14", "--ensemble", "rotinv:values:-1"}).code == 1);
  const Run help = invoke({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("boundary") != std::string::npos);
  CHECK(invoke({"boundary", "--help"}).out.find("min:max:count") != std::string::npos);
}

TEST_CASE("experiment command") {
  const auto csv1 = scratch("trials1.csv"), csv2 = scratch("trials2.csv"), summary = scratch("summary.json");
  const std::vector<std::string> base{"experiment", "--rho", "0.5", "--n", "8:2:12", "--trials", "10", "--seed", "7"};
  auto with = [&](std::vector<std::string> extra) {
    std::vector<std::string> args = base;
    args.insert(args.end(), extra.begin(), extra.end());
    return invoke(args);
  };
  const Run r1 = with({"--workers", "1", "--out", csv1.string(), "--summary", summary.string()});
  const Run r2 = with({"--workers", "2", "--out", csv2.string()});
  CHECK(r1.code == 0);
  CHECK(r2.code == 0);
  CHECK(slurp(csv1) == slurp(csv2));
  CHECK(slurp(summary) == r1.out);

  const CsvTable t = parse(slurp(csv1));
  CHECK(t.header == std::vector<std::string>{"N", "rho", "P_c", "seed"});
  CHECK(t.rows.size() == 30);

  const json s = json::parse(r1.out);
  CHECK(s["per_n"].size() == 3);
  CHECK(s["fit"]["coeffs"].size() == 3);
  CHECK(s["extrapolated_alpha_c"].is_number());
  CHECK(s["theoretical_l1_alpha_c"].get<double>() == doctest::Approx(0.83129).epsilon(1e-4));
  CHECK(s["failures"].empty());
  CHECK(s["ensemble"] == "gaussian");

  const json rot = json::parse(with({"--ensemble", "rotinv:unit"}).out);
  CHECK(rot["ensemble"] == "rotinv:unit");

  for (const auto& p : {csv1, csv2, summary}) std::filesystem::remove(p);
}

}  // TEST_SUITE
