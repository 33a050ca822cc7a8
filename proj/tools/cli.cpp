#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <ostream>
#include <set>
#include <stdexcept>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "cspt/csv.hpp"
#include "cspt/experiment.hpp"
#include "cspt/replica.hpp"

namespace cspt::cli {

namespace {

using json = nlohmann::ordered_json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = text.find(sep, start);
    parts.push_back(text.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return parts;
}

int parse_int(const std::string& text) {
  int value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw UsageError("not an integer: '" + text + "'");
  return value;
}

// JSON has no infinity or NaN; those become strings.
json number(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

int default_workers() {
  if (const char* env = std::getenv("CSPT_WORKERS")) {
    try {
      const int w = parse_int(env);
      if (w >= 1) return w;
    } catch (const UsageError&) {
    }
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open " + path + " for writing");
  file << text;
  if (!file) throw std::runtime_error("write failed: " + path);
}

struct BoundaryArgs {
  std::string norm = "l1";
  std::string method = "typical";
  std::string rho;
  double tol = 1e-6;
  std::string out;
};

int cmd_boundary(const BoundaryArgs& args, std::ostream& out, std::ostream& err) {
  const Norm norm = parse_norm(args.norm);
  const BoundaryMethod method =
      args.method == "worst-case" ? BoundaryMethod::worst_case : BoundaryMethod::typical_rs;
  if (method == BoundaryMethod::worst_case && norm != Norm::L1)
    throw UsageError("--method worst-case requires --norm l1");
  if (!(args.tol > 0.0)) throw UsageError("--tol must be positive");
  const std::vector<double> grid = parse_rho_grid(args.rho);

  PhaseBoundary boundary;
  int status = kOk;
  try {
    boundary = trace_boundary(norm, method, grid, args.tol);
  } catch (const BoundaryError&) {
    // Redo point by point so one bad density only blanks its own row.
    boundary = PhaseBoundary{norm, method, {}};
    for (double rho : grid) {
      try {
        boundary.points.push_back(trace_boundary(norm, method, std::span(&rho, 1), args.tol).points[0]);
      } catch (const BoundaryError& e) {
        err << "boundary: rho=" << format_double(rho) << ": " << e.what() << '\n';
        boundary.points.push_back({rho, std::nullopt, false});
        status = kFailure;
      }
    }
  }

  std::ostringstream text;
  write_csv(text, boundary_table(boundary));
  if (args.out.empty()) out << text.str();
  else write_file(args.out, text.str());
  return status;
}

struct SolveArgs {
  double alpha = 0.0;
  double rho = 0.0;
  std::string norm = "l1";
  double tol = 1e-10;
  int max_iter = 100000;
};

json theta_json(const OrderParameters& t) {
  return json{{"Q", number(t.Q)},         {"chi", number(t.chi)},       {"m", number(t.m)},
              {"qhat", number(t.qhat)},   {"chihat", number(t.chihat)}, {"mhat", number(t.mhat)}};
}

int cmd_solve(const SolveArgs& args, std::ostream& out) {
  const ModelParams params{args.alpha, args.rho, parse_norm(args.norm)};
  try {
    params.validate();
  } catch (const std::domain_error& e) {
    throw UsageError(e.what());
  }
  if (!(args.tol > 0.0)) throw UsageError("--tol must be positive");
  SolverOptions options;
  options.tolerance = args.tol;
  if (args.max_iter < 1) throw UsageError("--max-iter must be positive");
  options.max_iterations = args.max_iter;
  const QuadratureRule rule = gauss_hermite();
  try {
    const SaddleSolution sol = solve_saddle(params, default_init(params), rule, options);
    json j = theta_json(sol.theta);
    j["free_energy"] = number(sol.free_energy);
    j["mse"] = number(sol.mse);
    j["is_success"] = sol.is_success;
    j["at_stable"] = sol.at_stable;
    j["residual"] = number(sol.residual);
    j["iterations"] = sol.iterations;
    out << j.dump(2) << '\n';
    return kOk;
  } catch (const NonconvergenceError& e) {
    json j{{"error", e.what()}, {"last_residual", number(e.last_residual())},
           {"last_theta", theta_json(e.last_theta())}};
    out << j.dump(2) << '\n';
    return kFailure;
  }
}

struct ExperimentArgs {
  double rho = 0.5;
  std::string n;
  int trials = 100;
  std::string ensemble = "gaussian";
  std::uint64_t seed = 0;
  int workers = 0;
  std::string out;
  std::string summary;
  bool redraw = false;
  double recovery_tol = 1e-4;
  std::string signal = "gaussian";
};

int cmd_experiment(const ExperimentArgs& args, std::ostream& out, std::ostream& err) {
  if (!(args.rho > 0.0 && args.rho <= 1.0)) throw UsageError("--rho must lie in (0, 1]");
  const std::vector<int> n_list = parse_n_list(args.n);
  if (std::set<int>(n_list.begin(), n_list.end()).size() < 3)
    throw UsageError("--n must list at least 3 distinct sizes for the 1/N extrapolation");
  if (args.trials < 1) throw UsageError("--trials must be at least 1");
  if (!(args.recovery_tol > 0.0)) throw UsageError("--recovery-tol must be positive");
  EnsembleKind kind;
  try {
    kind = EnsembleKind::parse(args.ensemble);
  } catch (const std::logic_error& e) {
    throw UsageError(e.what());
  }
  const int workers = args.workers > 0 ? args.workers : default_workers();

  TrialOptions options;
  options.redraw = args.redraw;
  options.recovery_tol = args.recovery_tol;
  options.signal = args.signal == "uniform" ? SignalDistribution::uniform : SignalDistribution::gaussian;

  const TrialBatch batch = run_trials(args.rho, n_list, args.trials, kind, options, args.seed, workers);

  if (!args.out.empty()) {
    std::ostringstream text;
    write_csv(text, trials_table(batch.outcomes));
    write_file(args.out, text.str());
  }

  json summary{{"rho", args.rho},
               {"ensemble", kind.to_string()},
               {"signal", args.signal},
               {"redraw", args.redraw},
               {"recovery_tol", args.recovery_tol},
               {"seed", args.seed},
               {"trials_per_n", args.trials},
               {"attempted", batch.attempted},
               {"theoretical_l1_alpha_c", l1_alpha_c(args.rho, 1e-9)}};
  json failures = json::array();
  for (const auto& f : batch.failures)
    failures.push_back({{"N", f.n}, {"seed", f.seed}, {"message", f.message}});
  summary["failures"] = failures;

  int status = kOk;
  try {
    const CriticalEstimate est = aggregate(args.rho, batch.outcomes);
    json per_n = json::array();
    for (const auto& e : est.per_n)
      per_n.push_back({{"N", e.n}, {"mean", e.alpha_hat}, {"stderr", e.std_error}, {"trials", e.trials}});
    summary["per_n"] = per_n;
    summary["fit"] = {{"coeffs", est.fit_coeffs}, {"residual", est.fit_residual}};
    summary["extrapolated_alpha_c"] = number(est.extrapolated_alpha_c);
  } catch (const std::domain_error& e) {
    err << "experiment: " << e.what() << '\n';
    summary["per_n"] = json::array();
    summary["fit"] = nullptr;
    summary["extrapolated_alpha_c"] = nullptr;
    status = kFailure;
  }

  if (batch.failures.size() * 1000 > batch.attempted) {
    err << "experiment: " << batch.failures.size() << " of " << batch.attempted << " trials aborted\n";
    status = kFailure;
  }

  const std::string text = summary.dump(2) + "\n";
  if (!args.summary.empty()) write_file(args.summary, text);
  out << text;
  return status;
}

}  // namespace

std::vector<double> parse_rho_grid(const std::string& text) {
  const auto parts = split(text, ':');
  if (parts.size() != 3) throw UsageError("grid must be min:max:count, got '" + text + "'");
  double lo = 0.0, hi = 0.0;
  try {
    lo = parse_double(parts[0]);
    hi = parse_double(parts[1]);
  } catch (const std::invalid_argument&) {
    throw UsageError("grid bounds must be numbers, got '" + text + "'");
  }
  const int count = parse_int(parts[2]);
  if (!(lo > 0.0 && lo < hi && hi <= 1.0)) throw UsageError("grid needs 0 < min < max <= 1");
  if (count < 2) throw UsageError("grid count must be at least 2");
  std::vector<double> grid(count);
  for (int i = 0; i < count; ++i) {
    const double v = (lo * (count - 1 - i) + hi * i) / (count - 1);
    // Snap rounding noise so 0.2:0.8:4 yields 0.4, not 0.4000000000000001.
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    const double tidy = std::strtod(buf, nullptr);
    grid[i] = std::abs(tidy - v) <= 4 * std::numeric_limits<double>::epsilon() * v ? tidy : v;
  }
  grid.back() = hi;
  return grid;
}

std::vector<int> parse_n_list(const std::string& text) {
  const auto parts = split(text, ':');
  if (parts.size() == 1) {
    std::vector<int> list;
    for (const auto& p : split(text, ',')) list.push_back(parse_int(p));
    for (int n : list)
      if (n < 1) throw UsageError("sizes must be positive");
    return list;
  }
  if (parts.size() != 3) throw UsageError("sizes must be start:step:stop or a comma list");
  const int start = parse_int(parts[0]);
  const int step = parse_int(parts[1]);
  const int stop = parse_int(parts[2]);
  if (start < 1 || step < 1 || stop < start) throw UsageError("sizes need 1 <= start <= stop and step >= 1");
  std::vector<int> list;
  for (int n = start; n <= stop; n += step) list.push_back(n);
  return list;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Phase boundaries of L0/L1/L2 compressed-sensing reconstruction", "cspt"};
  app.require_subcommand(1);

  BoundaryArgs b;
  auto* boundary = app.add_subcommand("boundary", "critical compression rate alpha_c over a grid of rho (CSV)");
  boundary->add_option("--norm", b.norm, "l0, l1 or l2")->check(CLI::IsMember({"l0", "l1", "l2"}, CLI::ignore_case));
  boundary->add_option("--method", b.method, "typical or worst-case (l1 only)")
      ->check(CLI::IsMember({"typical", "worst-case"}));
  boundary->add_option("--rho", b.rho, "grid min:max:count, endpoints included")->required();
  boundary->add_option("--tol", b.tol, "bisection tolerance on alpha");
  boundary->add_option("--out", b.out, "CSV path (stdout if omitted)");

  SolveArgs s;
  auto* solve = app.add_subcommand("solve", "one saddle point of the RS free energy (JSON)");
  solve->add_option("--alpha", s.alpha, "compression rate P/N")->required();
  solve->add_option("--rho", s.rho, "signal density")->required();
  solve->add_option("--norm", s.norm, "l0, l1 or l2")->check(CLI::IsMember({"l0", "l1", "l2"}, CLI::ignore_case));
  solve->add_option("--tol", s.tol, "stationarity tolerance");
  solve->add_option("--max-iter", s.max_iter, "iteration cap of the saddle-point solver");

  ExperimentArgs e;
  e.workers = 0;
  auto* experiment = app.add_subcommand("experiment", "Monte Carlo estimate of the L1 critical rate");
  experiment->add_option("--rho", e.rho, "signal density")->required();
  experiment->add_option("--n", e.n, "sizes as start:step:stop (stop included) or a comma list")->required();
  experiment->add_option("--trials", e.trials, "trials per size");
  experiment->add_option("--ensemble", e.ensemble,
                         "gaussian, rotinv:unit, rotinv:const:<c>, rotinv:uniform:<lo>:<hi> or "
                         "rotinv:values:<v1>,<v2>,...");
  experiment->add_option("--seed", e.seed, "base seed");
  experiment->add_option("--workers", e.workers, "worker threads (default $CSPT_WORKERS or all cores)");
  experiment->add_option("--out", e.out, "per-trial CSV path");
  experiment->add_option("--summary", e.summary, "summary JSON path (also printed to stdout)");
  experiment->add_flag("--redraw", e.redraw, "fresh matrix for every P instead of nested rows");
  experiment->add_option("--recovery-tol", e.recovery_tol, "L1 error below which recovery counts");
  experiment->add_option("--signal", e.signal, "gaussian or uniform non-zero values")
      ->check(CLI::IsMember({"gaussian", "uniform"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& pe) {
    const int code = app.exit(pe, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*boundary) return cmd_boundary(b, out, err);
    if (*solve) return cmd_solve(s, out);
    return cmd_experiment(e, out, err);
  } catch (const UsageError& ue) {
    err << "error: " << ue.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& ia) {
    err << "error: " << ia.what() << '\n';
    return kUsage;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kFailure;
  }
}

}  // namespace cspt::cli
