#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cspt/linprog.hpp"

namespace cspt {

/// Eigenvalue spectrum of F F^T for the rotationally invariant ensemble.
struct Spectrum {
  enum class Kind { unit, constant, uniform, values };
  Kind kind = Kind::unit;
  double lo = 1.0;  ///< constant value, or lower end of the uniform range
  double hi = 1.0;  ///< upper end of the uniform range
  std::vector<double> values;

  void validate() const;
  /// p eigenvalues; `values` must then hold at least p entries.
  std::vector<double> sample(int p, std::mt19937_64& rng) const;
};

struct EnsembleKind {
  enum class Tag { gaussian_iid, rotationally_invariant };
  Tag tag = Tag::gaussian_iid;
  Spectrum spectrum;

  /// "gaussian", "rotinv:unit", "rotinv:const:<c>", "rotinv:uniform:<lo>:<hi>",
  /// "rotinv:values:<v1>,<v2>,...". Malformed text throws std::invalid_argument;
  /// a non-positive spectrum value throws std::domain_error.
  static EnsembleKind parse(const std::string& text);
  std::string to_string() const;
};

enum class SignalDistribution { gaussian, uniform };

/// Stream seed for one work unit, mixed from a base seed and two indices.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

/// Number of non-zeros for density rho: round(rho n).
int support_size(int n, double rho);

/// Exactly support_size(n, rho) non-zeros on a uniformly random support.
/// Gaussian values have unit variance; uniform values lie in [-sqrt 3, sqrt 3].
Eigen::VectorXd sample_signal(int n, double rho, std::mt19937_64& rng,
                              SignalDistribution dist = SignalDistribution::gaussian);

/// Haar-distributed n x n orthogonal matrix (QR of a Gaussian matrix, sign-fixed).
Eigen::MatrixXd haar_orthogonal(int n, std::mt19937_64& rng);

/// gaussian_iid: entries N(0, 1/n). rotationally_invariant: U S O^T.
Eigen::MatrixXd sample_matrix(int p, int n, const EnsembleKind& kind, std::mt19937_64& rng);

struct ProblemInstance {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd signal;
  Eigen::VectorXd measurement;
  int support_size = 0;
  std::uint64_t seed = 0;
};

ProblemInstance make_instance(int p, int n, double rho, const EnsembleKind& kind, std::uint64_t seed,
                              SignalDistribution dist = SignalDistribution::gaussian);

struct TrialOptions {
  double recovery_tol = 1e-4;
  /// Draw a fresh matrix for every P instead of dropping rows of one matrix.
  bool redraw = false;
  SignalDistribution signal = SignalDistribution::gaussian;
  LpOptions lp;
};

struct TrialOutcome {
  int n = 0;
  double rho = 0.0;
  int p_critical = 0;
  int solves = 0;
  std::uint64_t seed = 0;
};

class TrialAborted : public std::runtime_error {
 public:
  TrialAborted(const std::string& what, int n, std::uint64_t seed)
      : std::runtime_error(what), n_(n), seed_(seed) {}
  int n() const { return n_; }
  std::uint64_t seed() const { return seed_; }

 private:
  int n_;
  std::uint64_t seed_;
};

/// L1-recovers x0 from P = n, n-1, ... rows until ||x_hat - x0||_1 exceeds
/// the tolerance and records P_c = P + 1. Stops at P = max(1, ceil(rho n) - 1).
TrialOutcome run_trial(int n, double rho, const EnsembleKind& kind, const TrialOptions& options,
                       std::uint64_t seed);

/// Whether basis pursuit recovers x0 on one instance with p rows.
bool recovers(const ProblemInstance& instance, const TrialOptions& options);

struct TrialFailure {
  int n = 0;
  std::uint64_t seed = 0;
  std::string message;
};

struct TrialBatch {
  std::vector<TrialOutcome> outcomes;  ///< grouped by N in input order, then trial index
  std::vector<TrialFailure> failures;
  std::size_t attempted = 0;
};

/// Runs trials_per_n trials for each N on `workers` threads. Output does
/// not depend on the worker count.
TrialBatch run_trials(double rho, std::span<const int> n_list, int trials_per_n,
                      const EnsembleKind& kind, const TrialOptions& options, std::uint64_t seed,
                      int workers = 1);

struct FitResult {
  std::array<double, 3> coeffs{};  ///< a + b / N + c / N^2
  double residual = 0.0;           ///< root of the summed squared residuals
};

/// Least-squares fit of values against 1/N up to second order.
FitResult fit_inverse_quadratic(std::span<const int> n_values, std::span<const double> values);

struct PerSizeEstimate {
  int n = 0;
  double alpha_hat = 0.0;
  double std_error = 0.0;
  int trials = 0;
};

struct CriticalEstimate {
  double rho = 0.0;
  std::vector<PerSizeEstimate> per_n;  ///< sorted by N
  double extrapolated_alpha_c = 0.0;
  std::array<double, 3> fit_coeffs{};
  double fit_residual = 0.0;
};

/// Per-N mean and standard error of P_c / N, and the 1/N extrapolation.
/// Throws std::domain_error with fewer than 3 distinct N.
CriticalEstimate aggregate(double rho, std::span<const TrialOutcome> outcomes);

CriticalEstimate estimate_alpha_c(double rho, std::span<const int> n_list, int trials_per_n,
                                  const EnsembleKind& kind, std::uint64_t seed,
                                  const TrialOptions& options = {}, int workers = 1);

}  // namespace cspt
