#include "cspt/scalar_maps.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace cspt {

namespace {

void check_qhat(double qhat) {
  if (!(qhat > 0.0) || !std::isfinite(qhat))
    throw std::domain_error("cavity field curvature must be positive and finite");
}

}  // namespace

std::string_view to_string(Norm norm) {
  switch (norm) {
    case Norm::L0: return "l0";
    case Norm::L1: return "l1";
    case Norm::L2: return "l2";
  }
  return "?";
}

Norm parse_norm(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "l0") return Norm::L0;
  if (lower == "l1") return Norm::L1;
  if (lower == "l2") return Norm::L2;
  throw std::invalid_argument("unknown norm '" + std::string(text) + "' (expected l0, l1 or l2)");
}

double phi(const CavityField& field, Norm norm) {
  check_qhat(field.qhat);
  const double h = field.h;
  const double q = field.qhat;
  switch (norm) {
    case Norm::L0: return std::abs(h) <= std::sqrt(2.0 * q) ? 0.0 : 1.0 - h * h / (2.0 * q);
    case Norm::L1: {
      const double excess = std::abs(h) - 1.0;
      return excess <= 0.0 ? 0.0 : -excess * excess / (2.0 * q);
    }
    case Norm::L2: return -h * h / (2.0 * (q + 2.0));
  }
  throw std::logic_error("unhandled norm");
}

double x_star(const CavityField& field, Norm norm) {
  check_qhat(field.qhat);
  const double h = field.h;
  const double q = field.qhat;
  switch (norm) {
    case Norm::L0: return std::abs(h) > std::sqrt(2.0 * q) ? h / q : 0.0;
    case Norm::L1:
      if (h > 1.0) return (h - 1.0) / q;
      if (h < -1.0) return (h + 1.0) / q;
      return 0.0;
    case Norm::L2: return h / (q + 2.0);
  }
  throw std::logic_error("unhandled norm");
}

double x_star_slope(const CavityField& field, Norm norm) {
  check_qhat(field.qhat);
  const double a = std::abs(field.h);
  const double q = field.qhat;
  switch (norm) {
    case Norm::L0: return a > std::sqrt(2.0 * q) ? 1.0 / q : 0.0;
    case Norm::L1: return a > 1.0 ? 1.0 / q : 0.0;
    case Norm::L2: return 1.0 / (q + 2.0);
  }
  throw std::logic_error("unhandled norm");
}

std::optional<double> dead_zone_edge(double qhat, Norm norm) {
  check_qhat(qhat);
  switch (norm) {
    case Norm::L0: return std::sqrt(2.0 * qhat);
    case Norm::L1: return 1.0;
    case Norm::L2: return std::nullopt;
  }
  throw std::logic_error("unhandled norm");
}

double gauss_tail(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

double gauss_density(double x) {
  static const double kNorm = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  return kNorm * std::exp(-0.5 * x * x);
}

QuadratureRule gauss_hermite(int order) {
  if (order < 1) throw std::domain_error("quadrature order must be positive");
  const auto n = static_cast<Eigen::Index>(order);
  // Jacobi matrix of the monic probabilists' Hermite recurrence.
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sub(std::max<Eigen::Index>(n - 1, 0));
  for (Eigen::Index k = 0; k + 1 < n; ++k) sub[k] = std::sqrt(static_cast<double>(k + 1));

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) throw std::runtime_error("Golub-Welsch eigensolve failed");

  QuadratureRule rule;
  rule.order = order;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  for (Eigen::Index i = 0; i < n; ++i) {
    rule.nodes[i] = solver.eigenvalues()[i];
    const double v0 = solver.eigenvectors()(0, i);
    rule.weights[i] = v0 * v0;
  }
  // Eigenvalues come back ascending; enforce exact symmetry about 0.
  for (int i = 0, j = order - 1; i <= j; ++i, --j) {
    const double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
    const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
    rule.nodes[i] = -x;
    rule.nodes[j] = x;
    rule.weights[i] = rule.weights[j] = w;
  }
  if (order % 2 == 1) rule.nodes[order / 2] = 0.0;
  const double total = std::accumulate(rule.weights.begin(), rule.weights.end(), 0.0);
  for (auto& w : rule.weights) w /= total;
  return rule;
}

void gauss_legendre(int order, std::vector<double>& nodes, std::vector<double>& weights) {
  if (order < 1) throw std::domain_error("quadrature order must be positive");
  nodes.assign(order, 0.0);
  weights.assign(order, 0.0);
  // Newton on P_n with Chebyshev starting guesses.
  for (int i = 0; i < (order + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= order; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (order == 1) p0 = 1.0;
      dp = order * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    if (order == 1) {
      x = 0.0;
      dp = 1.0;
    }
    nodes[i] = -x;
    nodes[order - 1 - i] = x;
    weights[i] = weights[order - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
}

QuadratureRule split_gaussian_rule(std::span<const double> breakpoints, int panel_order,
                                   double max_panel_width, double span) {
  static thread_local int cached_order = -1;
  static thread_local std::vector<double> gl_nodes, gl_weights;
  if (cached_order != panel_order) {
    gauss_legendre(panel_order, gl_nodes, gl_weights);
    cached_order = panel_order;
  }

  std::vector<double> cuts{-span, span};
  for (double b : breakpoints)
    if (std::isfinite(b) && std::abs(b) < span) cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  QuadratureRule rule;
  rule.order = panel_order;
  rule.kinks = KinkHandling::split;
  for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
    const double lo = cuts[c];
    const double hi = cuts[c + 1];
    const int panels = std::max(1, static_cast<int>(std::ceil((hi - lo) / max_panel_width)));
    const double width = (hi - lo) / panels;
    for (int p = 0; p < panels; ++p) {
      const double a = lo + p * width;
      const double half = 0.5 * width;
      const double mid = a + half;
      for (int k = 0; k < panel_order; ++k) {
        const double z = mid + half * gl_nodes[k];
        rule.nodes.push_back(z);
        rule.weights.push_back(half * gl_weights[k] * gauss_density(z));
      }
    }
  }
  return rule;
}

}  // namespace cspt
