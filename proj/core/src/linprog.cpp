#include "cspt/linprog.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cspt {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void EqualityConstrainedL1Problem::validate() const {
  if (matrix.rows() != rhs.size()) throw std::invalid_argument("rhs length must equal the row count");
  if (matrix.rows() > matrix.cols()) throw std::invalid_argument("more constraints than unknowns");
  if (!matrix.allFinite() || !rhs.allFinite()) throw std::invalid_argument("non-finite problem data");
  for (Eigen::Index r = 0; r < matrix.rows(); ++r)
    if (matrix.row(r).cwiseAbs().maxCoeff() == 0.0) throw std::invalid_argument("all-zero constraint row");
}

std::string_view to_string(LpStatus status) {
  switch (status) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::numerical_failure: return "numerical_failure";
  }
  return "?";
}

namespace {

struct StandardLpResult {
  VectorXd z;
  VectorXd lambda;
  int iterations = 0;
  bool converged = false;
};

double max_step(const VectorXd& v, const VectorXd& dv) {
  double step = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (dv[i] < 0.0) step = std::min(step, -v[i] / dv[i]);
  return step;
}

// min c^T z  s.t.  A z = b, z >= 0, with A of full row rank.
StandardLpResult solve_standard_lp(const MatrixXd& A, const VectorXd& b, const VectorXd& c,
                                   const LpOptions& options) {
  const Eigen::Index n = A.cols();
  StandardLpResult out;

  // Mehrotra's starting point.
  Eigen::LDLT<MatrixXd> aat(A * A.transpose());
  VectorXd z = A.transpose() * aat.solve(b);
  VectorXd lambda = aat.solve(A * c);
  VectorXd s = c - A.transpose() * lambda;
  const double dz = std::max(-1.5 * z.minCoeff(), 0.0);
  const double ds = std::max(-1.5 * s.minCoeff(), 0.0);
  z.array() += dz;
  s.array() += ds;
  const double zs = z.dot(s);
  z.array() += 0.5 * zs / s.sum();
  s.array() += 0.5 * zs / z.sum();
  if (!(z.minCoeff() > 0.0) || !(s.minCoeff() > 0.0)) {
    z.setOnes();
    s.setOnes();
  }

  const double b_scale = 1.0 + b.cwiseAbs().maxCoeff();
  const double c_scale = 1.0 + c.cwiseAbs().maxCoeff();

  // Best iterate seen, by the worst of the three scaled optimality errors
  // relative to their tolerances.
  double best_merit = std::numeric_limits<double>::infinity();
  VectorXd best_z = z, best_lambda = lambda;

  for (int it = 0; it < options.max_iterations; ++it) {
    const VectorXd rp = b - A * z;
    const VectorXd rd = c - A.transpose() * lambda - s;
    const double primal = c.dot(z);
    const double dual = b.dot(lambda);
    out.iterations = it;
    if (!z.allFinite() || !s.allFinite() || !lambda.allFinite()) break;
    const double merit = std::max({rp.cwiseAbs().maxCoeff() / (options.feasibility_tol * b_scale),
                                   rd.cwiseAbs().maxCoeff() / (options.feasibility_tol * c_scale),
                                   std::abs(primal - dual) / (options.gap_tol * (1.0 + std::abs(primal)))});
    if (merit < best_merit) {
      best_merit = merit;
      best_z = z;
      best_lambda = lambda;
    }
    if (merit <= 1.0) {
      out.converged = true;
      break;
    }

    const double mu = z.dot(s) / static_cast<double>(n);
    // Complementarity has underflowed; further steps only amplify the
    // rounding in the normal equations.
    if (mu < 1e-20 * (1.0 + std::abs(primal))) break;
    const VectorXd d = z.cwiseQuotient(s);
    MatrixXd normal = A * d.asDiagonal() * A.transpose();
    Eigen::LDLT<MatrixXd> factor(normal);
    // Near the optimum z/s spans many decades; a tiny diagonal shift keeps
    // the factorization definite without moving the converged point.
    for (double shift = 1e-14 * normal.diagonal().maxCoeff();
         factor.info() != Eigen::Success && shift < 1e-4 * normal.diagonal().maxCoeff(); shift *= 100.0) {
      normal.diagonal().array() += shift;
      factor.compute(normal);
    }
    if (factor.info() != Eigen::Success) break;

    // Solves the Newton system for a complementarity right-hand side rc.
    auto direction = [&](const VectorXd& rc, VectorXd& dz_out, VectorXd& dl_out, VectorXd& ds_out) {
      const VectorXd tmp = (rc - z.cwiseProduct(rd)).cwiseQuotient(s);
      dl_out = factor.solve(rp - A * tmp);
      dz_out = d.cwiseProduct(A.transpose() * dl_out) + tmp;
      ds_out = rd - A.transpose() * dl_out;
    };

    VectorXd dz_aff, dl_aff, ds_aff;
    direction(-z.cwiseProduct(s), dz_aff, dl_aff, ds_aff);
    const double ap_aff = max_step(z, dz_aff);
    const double ad_aff = max_step(s, ds_aff);
    const double mu_aff =
        (z + ap_aff * dz_aff).dot(s + ad_aff * ds_aff) / static_cast<double>(n);
    const double sigma = std::pow(mu_aff / mu, 3.0);

    VectorXd rc = -z.cwiseProduct(s) - dz_aff.cwiseProduct(ds_aff);
    rc.array() += sigma * mu;
    VectorXd dzv, dlv, dsv;
    direction(rc, dzv, dlv, dsv);

    const double ap = std::min(1.0, 0.995 * max_step(z, dzv));
    const double ad = std::min(1.0, 0.995 * max_step(s, dsv));
    z += ap * dzv;
    lambda += ad * dlv;
    s += ad * dsv;
  }
  if (out.converged) {
    out.z = std::move(z);
    out.lambda = std::move(lambda);
  } else {
    // A stalled run whose best point is within a hundredfold of the
    // tolerances is close enough for the equality polish that follows.
    out.converged = best_merit <= 100.0;
    out.z = std::move(best_z);
    out.lambda = std::move(best_lambda);
  }
  return out;
}

}  // namespace

LpSolution solve_basis_pursuit(const EqualityConstrainedL1Problem& problem, const LpOptions& options) {
  problem.validate();
  const MatrixXd& F = problem.matrix;
  const VectorXd& y = problem.rhs;
  const Eigen::Index p = F.rows();
  const Eigen::Index n = F.cols();

  LpSolution sol;
  sol.x = VectorXd::Zero(n);
  sol.dual = VectorXd::Zero(p);
  const double y_scale = 1.0 + (p > 0 ? y.cwiseAbs().maxCoeff() : 0.0);

  // Rank-revealing factorization of F^T selects independent rows and
  // tells inconsistent systems apart from merely redundant ones.
  Eigen::ColPivHouseholderQR<MatrixXd> rows_qr(F.transpose());
  rows_qr.setThreshold(1e-12);
  const Eigen::Index rank = rows_qr.rank();
  if (rank < p) {
    const VectorXd ls = F.completeOrthogonalDecomposition().solve(y);
    if ((F * ls - y).cwiseAbs().maxCoeff() > options.feasibility_tol * y_scale) {
      sol.status = LpStatus::infeasible;
      return sol;
    }
  }
  std::vector<Eigen::Index> keep(rank);
  for (Eigen::Index i = 0; i < rank; ++i) keep[i] = rows_qr.colsPermutation().indices()[i];
  std::sort(keep.begin(), keep.end());

  if (rank == 0) {
    sol.status = LpStatus::optimal;
    return sol;
  }

  MatrixXd Fr(rank, n);
  VectorXd yr(rank);
  for (Eigen::Index i = 0; i < rank; ++i) {
    Fr.row(i) = F.row(keep[i]);
    yr[i] = y[keep[i]];
  }

  MatrixXd A(rank, 2 * n);
  A << Fr, -Fr;
  const VectorXd c = VectorXd::Ones(2 * n);
  StandardLpResult lp = solve_standard_lp(A, yr, c, options);
  sol.iterations = lp.iterations;
  if (!lp.converged) {
    sol.status = LpStatus::numerical_failure;
    return sol;
  }

  VectorXd x = lp.z.head(n) - lp.z.tail(n);
  // Minimum-norm correction onto the affine constraint set.
  const VectorXd violation = yr - Fr * x;
  x += Fr.transpose() * (Fr * Fr.transpose()).ldlt().solve(violation);

  // Scale the dual into the feasible box; the gap absorbs the change.
  VectorXd nu_r = lp.lambda;
  const double box = (Fr.transpose() * nu_r).cwiseAbs().maxCoeff();
  if (box > 1.0) nu_r /= box;
  for (Eigen::Index i = 0; i < rank; ++i) sol.dual[keep[i]] = nu_r[i];

  sol.x = std::move(x);
  sol.objective = sol.x.cwiseAbs().sum();
  sol.max_eq_violation = (F * sol.x - y).cwiseAbs().maxCoeff();
  sol.duality_gap = std::abs(sol.objective - y.dot(sol.dual));
  sol.status = sol.max_eq_violation < options.feasibility_tol * y_scale ? LpStatus::optimal
                                                                         : LpStatus::numerical_failure;
  return sol;
}

CertificateCheck check_certificate(const EqualityConstrainedL1Problem& problem,
                                   const LpSolution& solution) {
  CertificateCheck check;
  const double box = (problem.matrix.transpose() * solution.dual).cwiseAbs().maxCoeff();
  check.dual_infeasibility = std::max(0.0, box - 1.0);
  check.objective_gap = std::abs(problem.rhs.dot(solution.dual) - solution.objective);
  return check;
}

Eigen::VectorXd l0_oracle(const EqualityConstrainedL1Problem& problem, int max_n) {
  problem.validate();
  const auto n = static_cast<int>(problem.matrix.cols());
  if (max_n > 20 || n > max_n) throw std::invalid_argument("l0_oracle requires N <= max_n <= 20");
  const MatrixXd& F = problem.matrix;
  const VectorXd& y = problem.rhs;
  const double tol = 1e-9 * (1.0 + (y.size() ? y.cwiseAbs().maxCoeff() : 0.0));

  if (y.size() == 0 || y.cwiseAbs().maxCoeff() <= tol) return VectorXd::Zero(n);

  std::vector<int> support;
  for (int k = 1; k <= n; ++k) {
    support.resize(k);
    for (int i = 0; i < k; ++i) support[i] = i;
    while (true) {
      MatrixXd cols(F.rows(), k);
      for (int i = 0; i < k; ++i) cols.col(i) = F.col(support[i]);
      const VectorXd coef = cols.colPivHouseholderQr().solve(y);
      if ((cols * coef - y).cwiseAbs().maxCoeff() < tol) {
        VectorXd x = VectorXd::Zero(n);
        for (int i = 0; i < k; ++i) x[support[i]] = coef[i];
        return x;
      }
      // Next combination in lexicographic order.
      int i = k - 1;
      while (i >= 0 && support[i] == n - k + i) --i;
      if (i < 0) break;
      ++support[i];
      for (int j = i + 1; j < k; ++j) support[j] = support[j - 1] + 1;
    }
  }
  throw InfeasibleError("no support reproduces the measurements");
}

}  // namespace cspt
