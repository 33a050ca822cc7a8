#pragma once

#include <stdexcept>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace cspt {

/// minimize ||x||_1 subject to matrix * x = rhs.
struct EqualityConstrainedL1Problem {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd rhs;

  /// Throws std::invalid_argument on shape mismatch, P > N, non-finite
  /// entries or an all-zero row.
  void validate() const;
};

enum class LpStatus { optimal, infeasible, numerical_failure };

std::string_view to_string(LpStatus status);

struct LpSolution {
  Eigen::VectorXd x;
  double objective = 0.0;
  LpStatus status = LpStatus::numerical_failure;
  int iterations = 0;
  double max_eq_violation = 0.0;
  /// Dual vector nu with |F^T nu|_inf <= 1 and nu^T y = objective at optimum.
  Eigen::VectorXd dual;
  double duality_gap = 0.0;
};

struct LpOptions {
  int max_iterations = 500;
  double feasibility_tol = 1e-9;
  double gap_tol = 1e-10;
};

/// Basis pursuit via the split x = u - v, u, v >= 0, solved with a
/// primal-dual (Mehrotra predictor-corrector) interior-point method.
LpSolution solve_basis_pursuit(const EqualityConstrainedL1Problem& problem,
                               const LpOptions& options = {});

struct CertificateCheck {
  double dual_infeasibility = 0.0;  ///< max(0, |F^T nu|_inf - 1)
  double objective_gap = 0.0;       ///< |nu^T y - objective|
};

CertificateCheck check_certificate(const EqualityConstrainedL1Problem& problem,
                                   const LpSolution& solution);

class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sparsest solution by exhaustive search over supports of increasing size,
/// lexicographic within a size. Requires N <= max_n <= 20.
Eigen::VectorXd l0_oracle(const EqualityConstrainedL1Problem& problem, int max_n = 20);

}  // namespace cspt
