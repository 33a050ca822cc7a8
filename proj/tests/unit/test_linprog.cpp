#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include <doctest.h>

#include "cspt/linprog.hpp"

using namespace cspt;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd gaussian(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = n(rng);
  return m;
}

// Minimum L1 norm over basic solutions: every support of size rank(F)
// whose columns are independent, solved exactly.
double basic_solution_oracle(const MatrixXd& F, const VectorXd& y) {
  const int n = static_cast<int>(F.cols());
  const int p = static_cast<int>(F.rows());
  double best = std::numeric_limits<double>::infinity();
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (std::popcount(mask) != p) continue;
    MatrixXd cols(p, p);
    std::vector<int> idx;
    for (int j = 0; j < n; ++j)
      if (mask & (1u << j)) {
        cols.col(static_cast<int>(idx.size())) = F.col(j);
        idx.push_back(j);
      }
    Eigen::FullPivLU<MatrixXd> lu(cols);
    if (!lu.isInvertible()) continue;
    best = std::min(best, lu.solve(y).lpNorm<1>());
  }
  return best;
}

void check_certified(const EqualityConstrainedL1Problem& pr, const LpSolution& sol) {
  REQUIRE(sol.status == LpStatus::optimal);
  const double scale = 1.0 + pr.rhs.cwiseAbs().maxCoeff();
  CHECK(sol.max_eq_violation < 1e-9 * scale);
  CHECK(std::abs(sol.objective - sol.x.lpNorm<1>()) < 1e-12);
  const CertificateCheck cert = check_certificate(pr, sol);
  CHECK(cert.dual_infeasibility <= 1e-8);
  CHECK(cert.objective_gap <= 1e-8);
}

}  // namespace

TEST_SUITE("linprog") {

TEST_CASE("one equation, two unknowns") {
  EqualityConstrainedL1Problem pr{MatrixXd{{1.0, 2.0}}, VectorXd{{2.0}}};
  const LpSolution sol = solve_basis_pursuit(pr);
  check_certified(pr, sol);
  CHECK(std::abs(sol.x[0]) < 1e-9);
  CHECK(sol.x[1] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(sol.objective == doctest::Approx(1.0).epsilon(1e-9));

  // Grid oracle over the line x1 + 2 x2 = 2.
  double best = INFINITY;
  for (double x1 = -3.0; x1 <= 3.0; x1 += 1e-4) best = std::min(best, std::abs(x1) + std::abs((2 - x1) / 2));
  CHECK(sol.objective == doctest::Approx(best).epsilon(1e-6));
}

TEST_CASE("identity system returns the right-hand side") {
  std::mt19937_64 rng(31);
  const VectorXd y = gaussian(7, 1, rng);
  EqualityConstrainedL1Problem pr{MatrixXd::Identity(7, 7), y};
  const LpSolution sol = solve_basis_pursuit(pr);
  check_certified(pr, sol);
  CHECK((sol.x - y).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("single-spike recovery at N=6, P=4") {
  std::mt19937_64 rng(32);
  int recovered = 0;
  for (int trial = 0; trial < 20; ++trial) {
    VectorXd x0 = VectorXd::Zero(6);
    x0[trial % 6] = 1.5 - 0.07 * trial;
    const MatrixXd F = gaussian(4, 6, rng);
    EqualityConstrainedL1Problem pr{F, F * x0};
    const LpSolution sol = solve_basis_pursuit(pr);
    check_certified(pr, sol);
    const double best = basic_solution_oracle(F, pr.rhs);
    CHECK(sol.objective == doctest::Approx(best).epsilon(1e-9));
    // Recovery is only guaranteed when the spike is the unique L1 minimizer.
    if (x0.lpNorm<1>() < best + 1e-9) {
      ++recovered;
      CHECK((sol.x - x0).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
  CHECK(recovered >= 15);
}

TEST_CASE("objective matches the basic-solution oracle") {
  std::mt19937_64 rng(33);
  std::uniform_int_distribution<int> ndist(2, 8);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = ndist(rng);
    const int p = std::uniform_int_distribution<int>(1, n)(rng);
    const MatrixXd F = gaussian(p, n, rng);
    const VectorXd y = gaussian(p, 1, rng);
    EqualityConstrainedL1Problem pr{F, y};
    const LpSolution sol = solve_basis_pursuit(pr);
    check_certified(pr, sol);
    CHECK(std::abs(sol.objective - basic_solution_oracle(F, y)) < 1e-8);
  }
}

TEST_CASE("scale and permutation equivariance") {
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 20; ++trial) {
    const MatrixXd F = gaussian(5, 9, rng);
    VectorXd x0 = VectorXd::Zero(9);
    x0[1] = 0.7;
    x0[6] = -1.2;
    const VectorXd y = F * x0 + 0.3 * gaussian(5, 1, rng);
    const LpSolution base = solve_basis_pursuit({F, y});

    for (double c : {1e-3, 7.0, 250.0}) {
      const LpSolution scaled = solve_basis_pursuit({c * F, c * y});
      CHECK((scaled.x - base.x).cwiseAbs().maxCoeff() < 1e-9);
    }

    std::vector<int> perm(9);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    MatrixXd Fp(5, 9);
    for (int j = 0; j < 9; ++j) Fp.col(j) = F.col(perm[j]);
    const LpSolution permuted = solve_basis_pursuit({Fp, y});
    for (int j = 0; j < 9; ++j) CHECK(std::abs(permuted.x[j] - base.x[perm[j]]) < 1e-9);
  }
}

TEST_CASE("redundant and inconsistent constraints") {
  MatrixXd F{{1.0, 1.0, 0.0}, {2.0, 2.0, 0.0}};
  EqualityConstrainedL1Problem consistent{F, VectorXd{{1.0, 2.0}}};
  const LpSolution ok = solve_basis_pursuit(consistent);
  check_certified(consistent, ok);
  CHECK(ok.objective == doctest::Approx(1.0).epsilon(1e-9));

  EqualityConstrainedL1Problem inconsistent{F, VectorXd{{1.0, 3.0}}};
  CHECK(solve_basis_pursuit(inconsistent).status == LpStatus::infeasible);
}

TEST_CASE("problem validation") {
  CHECK_THROWS_AS(solve_basis_pursuit({MatrixXd::Ones(3, 2), VectorXd::Ones(3)}), std::invalid_argument);
  CHECK_THROWS_AS(solve_basis_pursuit({MatrixXd::Ones(1, 2), VectorXd::Ones(2)}), std::invalid_argument);
  CHECK_THROWS_AS(solve_basis_pursuit({MatrixXd{{0.0, 0.0}}, VectorXd{{1.0}}}), std::invalid_argument);
  CHECK_THROWS_AS(solve_basis_pursuit({MatrixXd{{NAN, 1.0}}, VectorXd{{1.0}}}), std::invalid_argument);
}

TEST_CASE("zero right-hand side") {
  std::mt19937_64 rng(35);
  EqualityConstrainedL1Problem pr{gaussian(3, 6, rng), VectorXd::Zero(3)};
  const LpSolution sol = solve_basis_pursuit(pr);
  check_certified(pr, sol);
  CHECK(sol.x.cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("l0 oracle") {
  EqualityConstrainedL1Problem tie{MatrixXd{{1.0, 2.0}}, VectorXd{{2.0}}};
  const VectorXd x = l0_oracle(tie);
  CHECK(x[0] == doctest::Approx(2.0));
  CHECK(x[1] == 0.0);

  std::mt19937_64 rng(36);
  EqualityConstrainedL1Problem zero{gaussian(3, 5, rng), VectorXd::Zero(3)};
  CHECK(l0_oracle(zero).isZero());

  for (int trial = 0; trial < 10; ++trial) {
    const MatrixXd F = gaussian(6, 8, rng);
    VectorXd x0 = VectorXd::Zero(8);
    x0[trial % 8] = 1.0;
    x0[(trial + 3) % 8] = -0.5;
    EqualityConstrainedL1Problem pr{F, F * x0};
    CHECK((l0_oracle(pr) - x0).cwiseAbs().maxCoeff() < 1e-9);
  }

  CHECK_THROWS_AS(l0_oracle({gaussian(2, 21, rng), VectorXd::Ones(2)}, 21), std::invalid_argument);
  MatrixXd rank_one{{1.0, 1.0}, {1.0, 1.0}};
  CHECK_THROWS_AS(l0_oracle({rank_one, VectorXd{{1.0, 2.0}}}), InfeasibleError);
}

}  // TEST_SUITE
