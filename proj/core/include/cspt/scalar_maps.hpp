#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cspt {

/// Reconstruction cost ||x||_p for p in {0, 1, 2}. L0 counts non-zero entries.
enum class Norm { L0, L1, L2 };

std::string_view to_string(Norm norm);
/// Accepts "l0", "l1", "l2" (case-insensitive). Throws std::invalid_argument.
Norm parse_norm(std::string_view text);

/// Effective field acting on a single coordinate: the site minimizes
///   qhat/2 x^2 - h x + |x|^p.
struct CavityField {
  double h = 0.0;
  double qhat = 1.0;
};

/// Minimum value of the single-site cost. Throws std::domain_error if qhat <= 0.
double phi(const CavityField& field, Norm norm);

/// Minimizer of the single-site cost. Odd in h; equals -d(phi)/dh.
double x_star(const CavityField& field, Norm norm);

/// d(x_star)/dh. At a threshold point the dead-zone value is returned.
double x_star_slope(const CavityField& field, Norm norm);

/// |h| at which x_star leaves zero: sqrt(2 qhat) for L0, 1 for L1, none for L2.
std::optional<double> dead_zone_edge(double qhat, Norm norm);

/// Whether x_star jumps (rather than bends) at the dead-zone edge.
constexpr bool has_jump(Norm norm) { return norm == Norm::L0; }

/// Gaussian tail H(x) = P(z > x) for a standard normal z.
double gauss_tail(double x);

/// Standard normal density.
double gauss_density(double x);

enum class KinkHandling { none, split };

/// Nodes and weights for averages over the standard Gaussian measure Dz.
/// Weights already include the density and sum to one.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  int order = 0;
  /// How averages of piecewise-smooth integrands are computed by the
  /// replica solver. With `split`, the real line is cut at the kinks and
  /// integrated with Gauss-Legendre panels instead of these nodes.
  KinkHandling kinks = KinkHandling::split;
};

inline constexpr int kDefaultHermiteOrder = 201;
inline constexpr int kDefaultPanelOrder = 20;

/// Gauss-Hermite rule for the probabilists' weight, via Golub-Welsch.
QuadratureRule gauss_hermite(int order = kDefaultHermiteOrder);

/// Composite Gauss-Legendre rule for Dz on [-span, span] cut at `breakpoints`
/// and subdivided so no panel is wider than `max_panel_width`.
/// Mass outside |z| > span (default 13) is below 1e-37 and dropped.
QuadratureRule split_gaussian_rule(std::span<const double> breakpoints,
                                   int panel_order = kDefaultPanelOrder,
                                   double max_panel_width = 1.0,
                                   double span = 13.0);

/// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int order, std::vector<double>& nodes, std::vector<double>& weights);

template <typename F>
double expect_dz(F&& f, const QuadratureRule& rule) {
  double sum = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) sum += rule.weights[i] * f(rule.nodes[i]);
  return sum;
}

}  // namespace cspt
