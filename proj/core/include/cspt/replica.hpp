#pragma once

#include <array>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cspt/scalar_maps.hpp"

namespace cspt {

/// Compression rate alpha = P/N, signal density rho, and the reconstruction norm.
struct ModelParams {
  double alpha = 0.5;
  double rho = 0.1;
  Norm norm = Norm::L1;

  /// Throws std::domain_error unless alpha > 0 and 0 < rho <= 1. Rates above
  /// one (more measurements than unknowns) are accepted here.
  void validate() const;
};

/// Replica-symmetric order parameters and their conjugates. At the success
/// solution qhat and mhat (and chihat for L0) are +infinity and chi is 0.
struct OrderParameters {
  double Q = 0.0;
  double chi = 0.0;
  double m = 0.0;
  double qhat = 0.0;
  double chihat = 0.0;
  double mhat = 0.0;

  bool finite() const;
};

/// Partial derivatives of the free-energy extremand, ordered as
/// (Q, chi, m, qhat, chihat, mhat).
using Residuals = std::array<double, 6>;

struct SaddleSolution {
  ModelParams params;
  OrderParameters theta;
  double free_energy = 0.0;
  double mse = 0.0;
  bool is_success = false;
  bool at_stable = false;
  double residual = 0.0;
  int iterations = 0;
};

class NonconvergenceError : public std::runtime_error {
 public:
  NonconvergenceError(const std::string& what, OrderParameters last, double residual)
      : std::runtime_error(what), last_(last), residual_(residual) {}
  const OrderParameters& last_theta() const { return last_; }
  double last_residual() const { return residual_; }

 private:
  OrderParameters last_;
  double residual_;
};

struct SolverOptions {
  double tolerance = 1e-10;
  int max_iterations = 100000;
  double damping = 0.5;
  /// mse below which a diverging iterate is taken to be the success branch.
  double success_mse = 1e-8;
  /// qhat beyond which the iterate is treated as diverging.
  double divergence_cap = 1e8;
  /// Try a Newton step on the reduced map once the iterate is close.
  bool newton_polish = true;
};

/// Gaussian averages of single-site quantities for the field h = scale * z.
struct SiteAverages {
  double phi = 0.0;       ///< E[phi(h)]
  double x2 = 0.0;        ///< E[x_star(h)^2]
  double response = 0.0;  ///< E[z x_star(h)] / scale, i.e. E[d x_star/dh] including jumps
  double slope2 = 0.0;    ///< E[x_star_slope(h)^2], pointwise slope
};

SiteAverages site_averages(double scale, double qhat, Norm norm, const QuadratureRule& rule);

/// Extremand of the RS free energy at theta (not extremized).
double free_energy(const OrderParameters& theta, const ModelParams& params,
                   const QuadratureRule& rule);

Residuals stationarity_residuals(const OrderParameters& theta, const ModelParams& params,
                                 const QuadratureRule& rule);

/// (Q, chi, m) = (rho, 1, rho/2) with unit conjugates.
OrderParameters default_init(const ModelParams& params);

/// Stationary point of the RS free energy. When the success branch is
/// stable it is returned directly; otherwise a damped fixed-point iteration
/// with Newton polishing finds the finite failure solution. An iterate that
/// runs off to chi -> infinity (L0 with alpha <= rho) yields a failure with
/// infinite Q, chi and mse. Throws NonconvergenceError at the iteration cap.
SaddleSolution solve_saddle(const ModelParams& params, const OrderParameters& init,
                            const QuadratureRule& rule, const SolverOptions& options = {});

/// Whether the perfect-reconstruction branch is locally stable at params.
/// Ties at the critical rate count as unstable, except L2 where alpha = 1 is stable.
bool success_branch_stable(const ModelParams& params);

/// The analytic success branch (Q = m = rho, chi = 0, diverging conjugates).
/// Throws std::domain_error for L1 when the branch does not exist (alpha too small).
SaddleSolution success_solution(const ModelParams& params);

/// Smallest positive fixed point chihat of the L1 success-branch equation.
/// Throws std::domain_error if none exists.
double l1_success_chihat(const ModelParams& params);

/// Right-hand side of the L1 success-branch equation minus alpha * chihat.
double l1_chihat_equation(double chihat, double alpha, double rho);

/// 2 (1 - rho) H(chihat^{-1/2}) + rho, the L1 success-branch stability threshold.
double l1_stability_rate(double chihat, double rho);

/// Critical compression rate of L1 reconstruction, bisected on alpha to `tol`.
/// `lower_hint` may seed the lower bracket (it is validated before use).
double l1_alpha_c(double rho, double tol = 1e-6, std::optional<double> lower_hint = {});

/// Inverse of l1_alpha_c: the density at which L1 recovery fails for a given alpha.
double l1_rho_c(double alpha, double tol = 1e-9);

struct CriticalRate {
  double alpha_c = 0.0;
  bool at_valid = false;
};

CriticalRate alpha_c(double rho, Norm norm, double tol = 1e-6);

/// Left-hand side of the de Almeida-Thouless condition; RS is unstable above 1.
/// L0 returns +infinity: the jump in x_star makes the squared slope non-integrable.
double at_condition(const SaddleSolution& solution, const QuadratureRule& rule);

/// Both large-N worst-case sufficient conditions for L1 at (alpha, rho).
bool worst_case_holds(double alpha, double rho);

/// Smallest alpha in (0, 1] meeting the worst-case conditions, or none.
std::optional<double> worst_case_alpha(double rho, double tol = 1e-6,
                                       std::optional<double> lower_hint = {});

enum class BoundaryMethod { typical_rs, worst_case };

struct BoundaryPoint {
  double rho = 0.0;
  std::optional<double> alpha_c;
  bool at_valid = false;
};

struct PhaseBoundary {
  Norm norm = Norm::L1;
  BoundaryMethod method = BoundaryMethod::typical_rs;
  std::vector<BoundaryPoint> points;
};

class BoundaryError : public std::runtime_error {
 public:
  BoundaryError(const std::string& what, double rho) : std::runtime_error(what), rho_(rho) {}
  double rho() const { return rho_; }

 private:
  double rho_;
};

/// Evaluates the boundary on a strictly increasing grid, seeding each
/// bisection from the previous point. Worst-case is defined for L1 only.
PhaseBoundary trace_boundary(Norm norm, BoundaryMethod method, std::span<const double> rho_grid,
                             double tol = 1e-6);

}  // namespace cspt
