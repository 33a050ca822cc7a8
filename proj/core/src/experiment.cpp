#include "cspt/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <thread>

namespace cspt {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string part;
  std::istringstream in(text);
  while (std::getline(in, part, sep)) parts.push_back(part);
  return parts;
}

double parse_number(const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("not a number: '" + text + "'");
  }
  if (used != text.size()) throw std::invalid_argument("not a number: '" + text + "'");
  return v;
}

}  // namespace

void Spectrum::validate() const {
  switch (kind) {
    case Kind::unit: return;
    case Kind::constant:
      if (!(lo > 0.0) || !std::isfinite(lo)) throw std::domain_error("spectrum values must be positive");
      return;
    case Kind::uniform:
      if (!(lo > 0.0) || !(hi >= lo) || !std::isfinite(hi))
        throw std::domain_error("uniform spectrum needs 0 < lo <= hi");
      return;
    case Kind::values:
      if (values.empty()) throw std::domain_error("empty spectrum");
      for (double v : values)
        if (!(v > 0.0) || !std::isfinite(v)) throw std::domain_error("spectrum values must be positive");
      return;
  }
}

std::vector<double> Spectrum::sample(int p, std::mt19937_64& rng) const {
  validate();
  std::vector<double> out(p, 1.0);
  switch (kind) {
    case Kind::unit: break;
    case Kind::constant: std::fill(out.begin(), out.end(), lo); break;
    case Kind::uniform: {
      std::uniform_real_distribution<double> dist(lo, hi);
      for (auto& v : out) v = dist(rng);
      break;
    }
    case Kind::values:
      if (static_cast<int>(values.size()) < p) throw std::domain_error("spectrum has fewer values than rows");
      std::copy_n(values.begin(), p, out.begin());
      break;
  }
  return out;
}

EnsembleKind EnsembleKind::parse(const std::string& text) {
  EnsembleKind kind;
  if (text == "gaussian" || text == "gaussian_iid") return kind;
  const auto parts = split(text, ':');
  if (parts.size() < 2 || (parts[0] != "rotinv" && parts[0] != "rotationally_invariant"))
    throw std::invalid_argument("unknown ensemble '" + text + "'");
  kind.tag = Tag::rotationally_invariant;
  const std::string& name = parts[1];
  if (name == "unit" && parts.size() == 2) {
    kind.spectrum.kind = Spectrum::Kind::unit;
  } else if (name == "const" && parts.size() == 3) {
    kind.spectrum.kind = Spectrum::Kind::constant;
    kind.spectrum.lo = parse_number(parts[2]);
  } else if (name == "uniform" && parts.size() == 4) {
    kind.spectrum.kind = Spectrum::Kind::uniform;
    kind.spectrum.lo = parse_number(parts[2]);
    kind.spectrum.hi = parse_number(parts[3]);
  } else if (name == "values" && parts.size() == 3) {
    kind.spectrum.kind = Spectrum::Kind::values;
    for (const auto& v : split(parts[2], ',')) kind.spectrum.values.push_back(parse_number(v));
  } else {
    throw std::invalid_argument("unknown spectrum in '" + text + "'");
  }
  kind.spectrum.validate();
  return kind;
}

std::string EnsembleKind::to_string() const {
  if (tag == Tag::gaussian_iid) return "gaussian";
  std::ostringstream out;
  out.precision(17);
  switch (spectrum.kind) {
    case Spectrum::Kind::unit: out << "rotinv:unit"; break;
    case Spectrum::Kind::constant: out << "rotinv:const:" << spectrum.lo; break;
    case Spectrum::Kind::uniform: out << "rotinv:uniform:" << spectrum.lo << ':' << spectrum.hi; break;
    case Spectrum::Kind::values: {
      out << "rotinv:values:";
      for (std::size_t i = 0; i < spectrum.values.size(); ++i) out << (i ? "," : "") << spectrum.values[i];
      break;
    }
  }
  return out.str();
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = splitmix64(base);
  x = splitmix64(x ^ (a * 0xD1B54A32D192ED03ull));
  x = splitmix64(x ^ (b * 0x8CB92BA72F3D8DD7ull));
  return x;
}

int support_size(int n, double rho) { return static_cast<int>(std::lround(rho * n)); }

VectorXd sample_signal(int n, double rho, std::mt19937_64& rng, SignalDistribution dist) {
  if (n < 1) throw std::domain_error("signal length must be positive");
  if (!(rho > 0.0 && rho <= 1.0)) throw std::domain_error("signal density rho must lie in (0, 1]");
  const int s = support_size(n, rho);
  if (s < 1) throw std::domain_error("round(rho n) is zero: no non-zero entries");

  std::vector<int> index(n);
  std::iota(index.begin(), index.end(), 0);
  // Partial Fisher-Yates: the first s entries form a uniform s-subset.
  for (int i = 0; i < s; ++i) {
    std::uniform_int_distribution<int> pick(i, n - 1);
    std::swap(index[i], index[pick(rng)]);
  }
  VectorXd x = VectorXd::Zero(n);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> flat(-std::sqrt(3.0), std::sqrt(3.0));
  for (int i = 0; i < s; ++i) {
    double v = 0.0;
    // Exact zeros would shrink the support.
    do {
      v = dist == SignalDistribution::gaussian ? gauss(rng) : flat(rng);
    } while (v == 0.0);
    x[index[i]] = v;
  }
  return x;
}

MatrixXd haar_orthogonal(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  MatrixXd g(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) g(i, j) = gauss(rng);
  Eigen::HouseholderQR<MatrixXd> qr(g);
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(n, n);
  const MatrixXd& r = qr.matrixQR();
  for (Eigen::Index j = 0; j < n; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

MatrixXd sample_matrix(int p, int n, const EnsembleKind& kind, std::mt19937_64& rng) {
  if (p < 1 || n < 1 || p > n) throw std::domain_error("matrix shape must satisfy 1 <= p <= n");
  if (kind.tag == EnsembleKind::Tag::gaussian_iid) {
    std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(n)));
    MatrixXd f(p, n);
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < p; ++i) f(i, j) = gauss(rng);
    return f;
  }
  const std::vector<double> lambda = kind.spectrum.sample(p, rng);
  const MatrixXd u = haar_orthogonal(p, rng);
  const MatrixXd o = haar_orthogonal(n, rng);
  Eigen::VectorXd root(p);
  for (int i = 0; i < p; ++i) root[i] = std::sqrt(lambda[i]);
  // U diag(sqrt lambda) [I 0] O^T
  return u * root.asDiagonal() * o.leftCols(p).transpose();
}

ProblemInstance make_instance(int p, int n, double rho, const EnsembleKind& kind, std::uint64_t seed,
                              SignalDistribution dist) {
  std::mt19937_64 rng(seed);
  ProblemInstance inst;
  inst.seed = seed;
  inst.signal = sample_signal(n, rho, rng, dist);
  inst.support_size = support_size(n, rho);
  inst.matrix = sample_matrix(p, n, kind, rng);
  inst.measurement = inst.matrix * inst.signal;
  return inst;
}

namespace {

// Throws TrialAborted unless the solve is certified optimal.
bool recovered(const MatrixXd& f, const VectorXd& x0, const TrialOptions& options, int n,
               std::uint64_t seed) {
  EqualityConstrainedL1Problem problem{f, f * x0};
  const LpSolution sol = solve_basis_pursuit(problem, options.lp);
  if (sol.status != LpStatus::optimal) {
    std::ostringstream msg;
    msg << "basis pursuit " << to_string(sol.status) << " at P=" << f.rows() << " after "
        << sol.iterations << " iterations";
    throw TrialAborted(msg.str(), n, seed);
  }
  return (sol.x - x0).lpNorm<1>() <= options.recovery_tol;
}

}  // namespace

bool recovers(const ProblemInstance& instance, const TrialOptions& options) {
  return recovered(instance.matrix, instance.signal, options,
                   static_cast<int>(instance.signal.size()), instance.seed);
}

TrialOutcome run_trial(int n, double rho, const EnsembleKind& kind, const TrialOptions& options,
                       std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const VectorXd x0 = sample_signal(n, rho, rng, options.signal);
  const int s = support_size(n, rho);
  const int floor_p = std::max(1, static_cast<int>(std::ceil(rho * n - 1e-12)) - 1);

  TrialOutcome out;
  out.n = n;
  out.rho = rho;
  out.seed = seed;

  MatrixXd nested;
  if (!options.redraw) nested = sample_matrix(n, n, kind, rng);

  for (int p = n; p >= floor_p; --p) {
    bool ok = false;
    if (p >= s) {
      const MatrixXd f = options.redraw ? sample_matrix(p, n, kind, rng) : MatrixXd(nested.topRows(p));
      ok = recovered(f, x0, options, n, seed);
      ++out.solves;
    }
    if (!ok) {
      out.p_critical = p + 1;
      return out;
    }
  }
  out.p_critical = floor_p;
  return out;
}

TrialBatch run_trials(double rho, std::span<const int> n_list, int trials_per_n,
                      const EnsembleKind& kind, const TrialOptions& options, std::uint64_t seed,
                      int workers) {
  if (trials_per_n < 1) throw std::domain_error("trials per N must be positive");
  struct Task {
    int n;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (int n : n_list) {
    if (n < 1) throw std::domain_error("system sizes must be positive");
    for (int t = 0; t < trials_per_n; ++t)
      tasks.push_back({n, derive_seed(seed, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(t))});
  }

  std::vector<std::optional<TrialOutcome>> results(tasks.size());
  std::vector<std::optional<TrialFailure>> failures(tasks.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr fatal;

  auto worker = [&]() {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      try {
        results[i] = run_trial(tasks[i].n, rho, kind, options, tasks[i].seed);
      } catch (const TrialAborted& e) {
        failures[i] = TrialFailure{e.n(), e.seed(), e.what()};
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!fatal) fatal = std::current_exception();
        next = tasks.size();
      }
    }
  };

  const int count = std::max(1, std::min<int>(workers, static_cast<int>(tasks.size())));
  if (count == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < count; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (fatal) std::rethrow_exception(fatal);

  TrialBatch batch;
  batch.attempted = tasks.size();
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (results[i]) batch.outcomes.push_back(*results[i]);
    if (failures[i]) batch.failures.push_back(*failures[i]);
  }
  return batch;
}

FitResult fit_inverse_quadratic(std::span<const int> n_values, std::span<const double> values) {
  if (n_values.size() != values.size()) throw std::invalid_argument("fit input lengths differ");
  std::vector<int> distinct(n_values.begin(), n_values.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 3) throw std::domain_error("quadratic fit in 1/N needs at least 3 distinct N");

  const auto m = static_cast<Eigen::Index>(values.size());
  MatrixXd design(m, 3);
  VectorXd rhs(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double inv = 1.0 / n_values[i];
    design(i, 0) = 1.0;
    design(i, 1) = inv;
    design(i, 2) = inv * inv;
    rhs[i] = values[i];
  }
  const VectorXd coef = design.colPivHouseholderQr().solve(rhs);
  FitResult fit;
  fit.coeffs = {coef[0], coef[1], coef[2]};
  fit.residual = (design * coef - rhs).norm();
  return fit;
}

CriticalEstimate aggregate(double rho, std::span<const TrialOutcome> outcomes) {
  std::map<int, std::vector<double>> by_n;
  for (const auto& o : outcomes) by_n[o.n].push_back(static_cast<double>(o.p_critical) / o.n);
  if (by_n.size() < 3) throw std::domain_error("extrapolation needs at least 3 distinct N");

  CriticalEstimate est;
  est.rho = rho;
  std::vector<int> ns;
  std::vector<double> means;
  for (const auto& [n, ratios] : by_n) {
    const double count = static_cast<double>(ratios.size());
    const double mean = std::accumulate(ratios.begin(), ratios.end(), 0.0) / count;
    double ss = 0.0;
    for (double r : ratios) ss += (r - mean) * (r - mean);
    const double sd = ratios.size() > 1 ? std::sqrt(ss / (count - 1.0)) : 0.0;
    est.per_n.push_back({n, mean, sd / std::sqrt(count), static_cast<int>(ratios.size())});
    ns.push_back(n);
    means.push_back(mean);
  }
  const FitResult fit = fit_inverse_quadratic(ns, means);
  est.fit_coeffs = fit.coeffs;
  est.extrapolated_alpha_c = fit.coeffs[0];
  est.fit_residual = fit.residual;
  return est;
}

CriticalEstimate estimate_alpha_c(double rho, std::span<const int> n_list, int trials_per_n,
                                  const EnsembleKind& kind, std::uint64_t seed,
                                  const TrialOptions& options, int workers) {
  std::vector<int> distinct(n_list.begin(), n_list.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 3) throw std::domain_error("extrapolation needs at least 3 distinct N");
  const TrialBatch batch = run_trials(rho, n_list, trials_per_n, kind, options, seed, workers);
  return aggregate(rho, batch.outcomes);
}

}  // namespace cspt
