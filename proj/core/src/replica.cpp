#include "cspt/replica.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <Eigen/Dense>

namespace cspt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Marginal stability: the L1 failure branch sits at exactly 1.
constexpr double kAtSlack = 1e-8;

void check_rho(double rho) {
  if (!(rho > 0.0 && rho <= 1.0)) throw std::domain_error("signal density rho must lie in (0, 1]");
}

void check_alpha_unit(double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw std::domain_error("compression rate alpha must lie in (0, 1]");
}

void check_finite_theta(const OrderParameters& theta) {
  if (!theta.finite()) throw std::domain_error("order parameters must be finite");
  if (!(theta.chi > 0.0)) throw std::domain_error("chi must be positive");
  if (!(theta.qhat > 0.0)) throw std::domain_error("qhat must be positive");
  if (theta.chihat < 0.0) throw std::domain_error("chihat must be non-negative");
}

// (Q, chi, m); the conjugates follow from these in closed form.
using Reduced = Eigen::Vector3d;

struct Bracket {
  SiteAverages zero;    // field sqrt(chihat) z, unsigned coordinates
  SiteAverages signal;  // field sqrt(chihat + mhat^2) z, signal coordinates
};

Bracket averages(const OrderParameters& theta, const ModelParams& params,
                 const QuadratureRule& rule) {
  Bracket out;
  if (params.rho < 1.0) out.zero = site_averages(std::sqrt(theta.chihat), theta.qhat, params.norm, rule);
  out.signal = site_averages(std::sqrt(theta.chihat + theta.mhat * theta.mhat), theta.qhat,
                             params.norm, rule);
  return out;
}

OrderParameters complete(const Reduced& x, const ModelParams& params) {
  OrderParameters theta;
  theta.Q = x[0];
  theta.chi = x[1];
  theta.m = x[2];
  const double mse = std::max(0.0, x[0] - 2.0 * x[2] + params.rho);
  theta.qhat = params.alpha / x[1];
  theta.mhat = params.alpha / x[1];
  theta.chihat = params.alpha * mse / (x[1] * x[1]);
  return theta;
}

bool admissible(const Reduced& x, const ModelParams& params) {
  return x.allFinite() && x[1] > 0.0 && x[0] >= 0.0 &&
         x[0] - 2.0 * x[2] + params.rho >= -1e-14;
}

struct MapResult {
  Reduced next;
  double residual = kInf;
};

// One application of the stationarity conditions for (Q, chi, m) with
// the conjugates eliminated. The residual is the largest partial
// derivative of the extremand at the completed point.
MapResult apply_map(const Reduced& x, const ModelParams& params, const QuadratureRule& rule) {
  const OrderParameters theta = complete(x, params);
  const Bracket avg = averages(theta, params, rule);
  const double rho = params.rho;
  MapResult r;
  r.next[0] = (1.0 - rho) * avg.zero.x2 + rho * avg.signal.x2;
  r.next[1] = (1.0 - rho) * avg.zero.response + rho * avg.signal.response;
  r.next[2] = rho * theta.mhat * avg.signal.response;
  const Reduced step = r.next - x;
  r.residual = std::max({0.5 * std::abs(step[0]), 0.5 * std::abs(step[1]), std::abs(step[2])});
  if (!r.next.allFinite()) r.residual = kInf;
  return r;
}

double success_free_energy(const ModelParams& params) {
  switch (params.norm) {
    case Norm::L0: return params.rho;
    case Norm::L1: return params.rho * std::sqrt(2.0 / std::numbers::pi);
    case Norm::L2: return params.rho;
  }
  return params.rho;
}

// Smallest u with H(u) <= target, for target in (0, 1/2).
double inverse_gauss_tail(double target) {
  double lo = 0.0, hi = 40.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (gauss_tail(mid) > target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// chihat at which the success-branch equation is stationary in chihat
// (where l1_stability_rate equals alpha), or +inf when alpha >= 1.
double l1_turning_point(double alpha, double rho) {
  if (alpha >= 1.0 || rho >= 1.0) return kInf;
  const double target = (alpha - rho) / (2.0 * (1.0 - rho));
  if (target <= 0.0) return 0.0;
  const double u = inverse_gauss_tail(target);
  return 1.0 / (u * u);
}

bool l1_success_exists(double alpha, double rho) {
  if (alpha <= rho) return false;
  const double turn = l1_turning_point(alpha, rho);
  if (std::isinf(turn)) return !(rho >= 1.0 && alpha <= 1.0);
  return l1_chihat_equation(turn, alpha, rho) <= 0.0;
}

}  // namespace

void ModelParams::validate() const {
  // alpha > 1 is admitted for the solver (overdetermined regime); boundary
  // computations restrict it to (0, 1] themselves.
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::domain_error("compression rate alpha must be positive");
  check_rho(rho);
}

bool OrderParameters::finite() const {
  return std::isfinite(Q) && std::isfinite(chi) && std::isfinite(m) && std::isfinite(qhat) &&
         std::isfinite(chihat) && std::isfinite(mhat);
}

SiteAverages site_averages(double scale, double qhat, Norm norm, const QuadratureRule& rule) {
  SiteAverages out;
  const CavityField origin{0.0, qhat};
  if (!(scale > 1e-300)) {
    const double s = x_star_slope(origin, norm);
    out.response = s;
    out.slope2 = s * s;
    return out;
  }

  const auto edge = dead_zone_edge(qhat, norm);
  QuadratureRule split;
  const QuadratureRule* use = &rule;
  if (rule.kinks == KinkHandling::split || rule.nodes.empty()) {
    std::vector<double> cuts;
    if (edge) cuts = {-*edge / scale, *edge / scale};
    split = split_gaussian_rule(cuts);
    use = &split;
  }

  for (std::size_t i = 0; i < use->nodes.size(); ++i) {
    const double z = use->nodes[i];
    const double w = use->weights[i];
    const CavityField field{scale * z, qhat};
    const double x = x_star(field, norm);
    const double s = x_star_slope(field, norm);
    out.phi += w * phi(field, norm);
    out.x2 += w * x * x;
    out.response += w * z * x;
    out.slope2 += w * s * s;
  }
  out.response /= scale;
  return out;
}

double free_energy(const OrderParameters& theta, const ModelParams& params,
                   const QuadratureRule& rule) {
  params.validate();
  check_finite_theta(theta);
  const double rho = params.rho;
  const Bracket avg = averages(theta, params, rule);
  return params.alpha * (theta.Q - 2.0 * theta.m + rho) / (2.0 * theta.chi) +
         theta.mhat * theta.m - 0.5 * theta.qhat * theta.Q + 0.5 * theta.chihat * theta.chi +
         (1.0 - rho) * avg.zero.phi + rho * avg.signal.phi;
}

Residuals stationarity_residuals(const OrderParameters& theta, const ModelParams& params,
                                 const QuadratureRule& rule) {
  params.validate();
  check_finite_theta(theta);
  const double rho = params.rho;
  const double alpha = params.alpha;
  const double chi = theta.chi;
  const Bracket avg = averages(theta, params, rule);
  Residuals r{};
  r[0] = alpha / (2.0 * chi) - 0.5 * theta.qhat;
  r[1] = -alpha * (theta.Q - 2.0 * theta.m + rho) / (2.0 * chi * chi) + 0.5 * theta.chihat;
  r[2] = -alpha / chi + theta.mhat;
  r[3] = -0.5 * theta.Q + 0.5 * ((1.0 - rho) * avg.zero.x2 + rho * avg.signal.x2);
  r[4] = 0.5 * chi - 0.5 * ((1.0 - rho) * avg.zero.response + rho * avg.signal.response);
  r[5] = theta.m - rho * theta.mhat * avg.signal.response;
  return r;
}

OrderParameters default_init(const ModelParams& params) {
  return OrderParameters{params.rho, 1.0, 0.5 * params.rho, 1.0, 1.0, 1.0};
}

double l1_stability_rate(double chihat, double rho) {
  if (!(chihat > 0.0)) return rho;
  if (std::isinf(chihat)) return 1.0;
  return 2.0 * (1.0 - rho) * gauss_tail(1.0 / std::sqrt(chihat)) + rho;
}

double l1_chihat_equation(double chihat, double alpha, double rho) {
  if (!(chihat > 0.0)) return rho;
  const double root = std::sqrt(chihat);
  const double u = 1.0 / root;
  const double zero_part = (chihat + 1.0) * gauss_tail(u) - root * gauss_density(u);
  return 2.0 * (1.0 - rho) * zero_part + rho * (chihat + 1.0) - alpha * chihat;
}

double l1_success_chihat(const ModelParams& params) {
  const double alpha = params.alpha;
  const double rho = params.rho;
  check_rho(rho);
  if (!l1_success_exists(alpha, rho))
    throw std::domain_error("no L1 success branch: compression rate below the critical rate");

  // l1_chihat_equation is convex in chihat, equals rho at 0, and is
  // minimal at the turning point; the smallest root lies below it.
  double hi = l1_turning_point(alpha, rho);
  if (std::isinf(hi)) {
    hi = 1.0;
    while (l1_chihat_equation(hi, alpha, rho) > 0.0) {
      hi *= 2.0;
      if (hi > 1e300) throw std::domain_error("L1 success-branch equation has no finite root");
    }
  }
  double lo = 0.0;
  for (int i = 0; i < 400 && hi - lo > 1e-13 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (l1_chihat_equation(mid, alpha, rho) > 0.0 ? lo : hi) = mid;
  }
  return hi;
}

double l1_alpha_c(double rho, double tol, std::optional<double> lower_hint) {
  check_rho(rho);
  if (rho >= 1.0) return 1.0;
  double lo = rho, hi = 1.0;
  if (lower_hint && *lower_hint > lo && *lower_hint < hi && !l1_success_exists(*lower_hint, rho))
    lo = *lower_hint;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (l1_success_exists(mid, rho) ? hi : lo) = mid;
  }
  return hi;
}

double l1_rho_c(double alpha, double tol) {
  check_alpha_unit(alpha);
  if (alpha >= 1.0) return 1.0;
  double lo = 0.0, hi = alpha;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (l1_success_exists(alpha, mid) ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

CriticalRate alpha_c(double rho, Norm norm, double tol) {
  check_rho(rho);
  switch (norm) {
    case Norm::L0: return {rho, false};
    case Norm::L1: return {l1_alpha_c(rho, tol), true};
    case Norm::L2: return {1.0, true};
  }
  throw std::logic_error("unhandled norm");
}

bool success_branch_stable(const ModelParams& params) {
  params.validate();
  switch (params.norm) {
    case Norm::L0: return params.alpha > params.rho;
    case Norm::L1: {
      if (!l1_success_exists(params.alpha, params.rho)) return false;
      const double chihat = l1_success_chihat(params);
      return params.alpha > l1_stability_rate(chihat, params.rho);
    }
    case Norm::L2: return params.alpha >= 1.0;
  }
  return false;
}

SaddleSolution success_solution(const ModelParams& params) {
  params.validate();
  SaddleSolution sol;
  sol.params = params;
  sol.theta.Q = params.rho;
  sol.theta.m = params.rho;
  sol.theta.chi = 0.0;
  sol.theta.qhat = kInf;
  sol.theta.mhat = kInf;
  switch (params.norm) {
    case Norm::L0: sol.theta.chihat = kInf; break;
    case Norm::L1: {
      sol.theta.chihat = l1_success_chihat(params);
      sol.residual =
          std::abs(l1_chihat_equation(sol.theta.chihat, params.alpha, params.rho)) / params.alpha;
      break;
    }
    case Norm::L2:
      // Scaled error of the linear estimator: chihat (alpha - 1) = 4 rho.
      sol.theta.chihat = params.alpha > 1.0 ? 4.0 * params.rho / (params.alpha - 1.0) : kInf;
      break;
  }
  sol.mse = sol.theta.Q - 2.0 * sol.theta.m + params.rho;
  sol.free_energy = success_free_energy(params);
  sol.is_success = true;
  sol.at_stable = at_condition(sol, QuadratureRule{}) <= 1.0 + kAtSlack;
  return sol;
}

double at_condition(const SaddleSolution& solution, const QuadratureRule& rule) {
  const ModelParams& params = solution.params;
  const OrderParameters& theta = solution.theta;
  params.validate();
  if (params.norm == Norm::L0) return kInf;

  if (solution.is_success && !theta.finite()) {
    // chi -> 0 with qhat = alpha / chi: the prefactor alpha / (chi qhat)^2
    // becomes 1 / alpha and the slope probabilities take their limits.
    if (params.norm == Norm::L1) return l1_stability_rate(theta.chihat, params.rho) / params.alpha;
    return 1.0 / params.alpha;
  }

  check_finite_theta(theta);
  const Bracket avg = averages(theta, params, rule);
  const double rho = params.rho;
  return params.alpha / (theta.chi * theta.chi) *
         ((1.0 - rho) * avg.zero.slope2 + rho * avg.signal.slope2);
}

static SaddleSolution degenerate_failure(const ModelParams& params, const OrderParameters& last,
                                         int iterations) {
  SaddleSolution sol;
  sol.params = params;
  sol.theta = last;
  sol.theta.Q = kInf;
  sol.theta.chi = kInf;
  sol.theta.qhat = 0.0;
  sol.theta.mhat = 0.0;
  sol.theta.chihat = 0.0;
  sol.mse = kInf;
  // Sparsest solutions of an underdetermined system carry P non-zeros.
  sol.free_energy = params.norm == Norm::L0 ? params.alpha : kInf;
  sol.is_success = false;
  sol.at_stable = false;
  sol.residual = kInf;
  sol.iterations = iterations;
  return sol;
}

SaddleSolution solve_saddle(const ModelParams& params, const OrderParameters& init,
                            const QuadratureRule& rule, const SolverOptions& options) {
  params.validate();
  if (!std::isfinite(init.Q) || !std::isfinite(init.chi) || !std::isfinite(init.m))
    throw std::domain_error("initial order parameters must be finite");

  // Only one stable solution exists: when the perfect-reconstruction branch
  // is stable the iteration would merely diverge towards it, arbitrarily
  // slowly near the critical rate.
  if (success_branch_stable(params)) return success_solution(params);

  Reduced x(init.Q, init.chi, init.m);
  if (!admissible(x, params)) x = Reduced(params.rho, 1.0, 0.5 * params.rho);

  double damping = options.damping;
  double last_residual = kInf;
  Reduced last_step = Reduced::Zero();
  MapResult current = apply_map(x, params, rule);

  auto finish = [&](const Reduced& at, double residual, int iterations) {
    SaddleSolution sol;
    sol.params = params;
    sol.theta = complete(at, params);
    sol.mse = sol.theta.Q - 2.0 * sol.theta.m + params.rho;
    sol.free_energy = free_energy(sol.theta, params, rule);
    sol.residual = residual;
    sol.iterations = iterations;
    sol.is_success = sol.mse < options.success_mse;
    sol.at_stable = at_condition(sol, rule) <= 1.0 + kAtSlack;
    return sol;
  };

  for (int it = 0; it < options.max_iterations; ++it) {
    // A vanishing chi also shrinks the absolute residual, so stationarity
    // is only accepted once chi itself has settled.
    if (current.residual < options.tolerance &&
        std::abs(current.next[1] - x[1]) <= 1e-6 * x[1])
      return finish(x, current.residual, it);

    const double qhat = params.alpha / x[1];
    const double mse = x[0] - 2.0 * x[2] + params.rho;
    if (qhat > options.divergence_cap && mse < options.success_mse) {
      SaddleSolution sol = success_solution(params);
      sol.iterations = it;
      return sol;
    }
    if (qhat < 1.0 / options.divergence_cap || x[0] > options.divergence_cap)
      return degenerate_failure(params, complete(x, params), it);

    if (options.newton_polish && it > 0 && it % 20 == 0 && current.residual < 1e-3 && mse > 0.0) {
      // Newton on G = T(x) - x in (log mse, log chi, m): near the critical
      // rate both mse and chi are small and the map is steep in them.
      auto to_x = [&](const Eigen::Vector3d& y) {
        const double m = y[2];
        return Reduced(std::exp(y[0]) - params.rho + 2.0 * m, std::exp(y[1]), m);
      };
      const Eigen::Vector3d y0(std::log(mse), std::log(x[1]), x[2]);
      const Reduced g = current.next - x;
      Eigen::Matrix3d jac;
      bool ok = true;
      for (int j = 0; j < 3 && ok; ++j) {
        const double h = 1e-6 * std::max(std::abs(y0[j]), 1e-3);
        Eigen::Vector3d yp = y0, ym = y0;
        yp[j] += h;
        ym[j] -= h;
        const Reduced xp = to_x(yp), xm = to_x(ym);
        if (!admissible(xp, params) || !admissible(xm, params)) { ok = false; break; }
        const MapResult mp = apply_map(xp, params, rule);
        const MapResult mm = apply_map(xm, params, rule);
        ok = std::isfinite(mp.residual) && std::isfinite(mm.residual);
        jac.col(j) = ((mp.next - xp) - (mm.next - xm)) / (2.0 * h);
      }
      if (ok) {
        const Eigen::Vector3d dy = jac.partialPivLu().solve(-g);
        bool accepted = false;
        for (double t = 1.0; t > 1e-3 && dy.allFinite(); t *= 0.5) {
          const Reduced candidate = to_x(y0 + t * dy);
          if (!admissible(candidate, params)) continue;
          const MapResult trial = apply_map(candidate, params, rule);
          if (trial.residual < current.residual) {
            x = candidate;
            last_residual = current.residual;
            current = trial;
            accepted = true;
            break;
          }
        }
        if (accepted) continue;
      }
    }

    // Shrink only on oscillation; a monotone drift (towards either
    // branch's limit) must be allowed to run its course.
    const Reduced step = current.next - x;
    if (current.residual > last_residual && step.dot(last_step) < 0.0)
      damping = std::max(0.5 * damping, 1e-4);
    else
      damping = std::min(options.damping, damping * 1.05);
    last_step = step;

    Reduced next = x + damping * (current.next - x);
    double shrink = damping;
    while (!admissible(next, params) && shrink > 1e-12) {
      shrink *= 0.5;
      next = x + shrink * (current.next - x);
    }
    last_residual = current.residual;
    x = next;
    current = apply_map(x, params, rule);
  }

  std::ostringstream msg;
  msg << "saddle-point iteration did not converge in " << options.max_iterations
      << " iterations (residual " << current.residual << ")";
  throw NonconvergenceError(msg.str(), complete(x, params), current.residual);
}

bool worst_case_holds(double alpha, double rho) {
  const double k = std::pow(2.0, 0.25) - 1.0;
  const double margin = k - std::sqrt(2.0 * rho / alpha);
  if (!(margin > 0.0)) return false;
  const double entropy = 2.0 * rho * std::log(1.0 / (2.0 * rho)) + 2.0 * rho;
  return entropy - 0.5 * alpha * margin * margin < 0.0;
}

std::optional<double> worst_case_alpha(double rho, double tol, std::optional<double> lower_hint) {
  check_rho(rho);
  if (!worst_case_holds(1.0, rho)) return std::nullopt;
  const double k = std::pow(2.0, 0.25) - 1.0;
  double lo = std::min(1.0, 2.0 * rho / (k * k));
  double hi = 1.0;
  if (lower_hint && *lower_hint > lo && *lower_hint < hi && !worst_case_holds(*lower_hint, rho))
    lo = *lower_hint;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (worst_case_holds(mid, rho) ? hi : lo) = mid;
  }
  return hi;
}

PhaseBoundary trace_boundary(Norm norm, BoundaryMethod method, std::span<const double> rho_grid,
                             double tol) {
  for (std::size_t i = 0; i < rho_grid.size(); ++i) {
    const double rho = rho_grid[i];
    if (!(rho > 0.0 && rho <= 1.0)) throw BoundaryError("grid value outside (0, 1]", rho);
    if (i > 0 && !(rho > rho_grid[i - 1])) throw BoundaryError("grid not strictly increasing", rho);
  }
  if (method == BoundaryMethod::worst_case && norm != Norm::L1)
    throw std::invalid_argument("the worst-case bound is defined for L1 only");

  PhaseBoundary boundary{norm, method, {}};
  boundary.points.reserve(rho_grid.size());
  std::optional<double> seed;
  for (double rho : rho_grid) {
    BoundaryPoint point{rho, std::nullopt, false};
    try {
      if (method == BoundaryMethod::worst_case) {
        point.alpha_c = worst_case_alpha(rho, tol, seed);
        point.at_valid = point.alpha_c.has_value();
      } else if (norm == Norm::L1) {
        point.alpha_c = l1_alpha_c(rho, tol, seed);
        point.at_valid = true;
      } else {
        const CriticalRate rate = alpha_c(rho, norm, tol);
        point.alpha_c = rate.alpha_c;
        point.at_valid = rate.at_valid;
      }
    } catch (const std::exception& e) {
      throw BoundaryError(e.what(), rho);
    }
    if (point.alpha_c) seed = point.alpha_c;
    boundary.points.push_back(point);
  }
  return boundary;
}

}  // namespace cspt
