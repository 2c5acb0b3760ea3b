#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace segtask {

enum class Nonlinearity { Tanh, Identity };

// One task family: u_i(s) = sum_{j in I_i} C[i][j] * sigma(s_j). The mixing
// matrix plays the role of the (linear) map from latents to observations; the
// unmixing objective itself is posed in the latent basis, where the two
// problems differ only by a constant.
struct IdentInstance {
  int d_s = 0;
  int d_g = 0;
  std::vector<std::vector<int>> supports;  // I_i, 1-based latent indices, sorted
  Eigen::MatrixXd coeffs;                  // d_g x d_s, nonzero exactly on supports
  Eigen::MatrixXd mixing;                  // invertible d_s x d_s, condition <= 1e3
  Nonlinearity sigma = Nonlinearity::Tanh;
  std::uint64_t seed = 0;

  std::vector<int> relevant_union() const;
  std::vector<int> irrelevant_latents() const;
};

// Coefficients are signed magnitudes from [0.5, 1.5]; the mixing matrix is
// redrawn until its condition number is at most 1e3. Distinct tasks must have
// distinct supports; overlap is fine.
IdentInstance make_instance(int d_s, const std::vector<std::vector<int>>& supports,
                            std::uint64_t seed);

// count x d_s, independent standard normal entries.
Eigen::MatrixXd sample_latents(const IdentInstance& inst, int count, std::uint64_t seed);

Eigen::VectorXd task_values(const IdentInstance& inst, const Eigen::VectorXd& s);

// Entry (i, j) = C[i][j] * sigma'(s_j); support equals the support of C at
// generic s.
Eigen::MatrixXd task_jacobian(const IdentInstance& inst, const Eigen::VectorXd& s);

struct SpanCondition {
  std::vector<bool> row_holds;             // per task
  std::vector<std::vector<int>> witnesses; // row indices into points, |I_i| each on success
  Eigen::MatrixXd points;                  // sample_count x d_s
};

// For each task row, greedily searches the sampled points for |I_i| points
// whose Jacobian rows are linearly independent (smallest singular value of the
// stack > 1e-8 times the largest).
SpanCondition check_span_condition(const IdentInstance& inst, int sample_count,
                                   std::uint64_t seed);

struct SupersetRow {
  int estimated_support = 0;  // support count of the row of J_u(s) * Q
  int true_support = 0;       // support count of the row of J_u(s)
  bool holds = false;         // estimated >= true
};

// Row supports are counted across all supplied points; an entry is nonzero if
// its magnitude exceeds zero_tol relative to the largest magnitude seen for
// the respective matrix family.
std::vector<SupersetRow> superset_property(const IdentInstance& inst, const Eigen::MatrixXd& Q,
                                           const Eigen::MatrixXd& points, double zero_tol = 1e-6);

// The point set a sparse_unmix call with the same arguments evaluates on.
Eigen::MatrixXd unmix_points(const IdentInstance& inst, int n_points, std::uint64_t seed);

// (lambda/n) * sum over points and entries of phi_eps((J_l Q)[r][c]) minus
// mu * log|det Q|, with phi_eps(x) = sqrt(x^2 + eps^2) - eps. epsilon = 0
// gives the exact objective.
double unmix_objective(const std::vector<Eigen::MatrixXd>& jacobians, const Eigen::MatrixXd& Q,
                       double lambda, double mu, double epsilon);
Eigen::MatrixXd unmix_gradient(const std::vector<Eigen::MatrixXd>& jacobians,
                               const Eigen::MatrixXd& Q, double lambda, double mu,
                               double epsilon);

// Greedy maximum-magnitude matching: pi[j-1] is the row of the composite
// paired with true latent j. Ties break toward the lowest row-major index.
std::vector<int> extract_permutation(const Eigen::MatrixXd& composite);

struct BlockReport {
  std::vector<bool> verdict;  // per task
  double off_block_max = 0.0;
  Eigen::MatrixXd composite;  // Q_hat^{-1}, rows scaled to unit max, small entries zeroed
  std::vector<int> pi;
};

// Verdict for task k: rows pi(I_k) of the composite vanish outside columns
// I_k, rows I_k of Q_hat vanish outside columns pi(I_k), and the
// pi(I_k) x I_k block of the composite is invertible. Entries below 1e-6 of
// the row maximum are treated as zero; a surviving off-block entry fails the
// verdict at pass_tol.
BlockReport evaluate_blocks(const std::vector<std::vector<int>>& supports,
                            const Eigen::MatrixXd& Q_hat, double pass_tol = 1e-4);

struct UnmixResult {
  Eigen::MatrixXd Q_hat;
  std::vector<int> pi;
  std::vector<bool> block_verdict;
  std::vector<double> objective_trace;  // exact objective after each annealing stage
  double off_block_max = 0.0;
  Eigen::MatrixXd composite;
  int restarts = 0;
};

// Minimizes unmix_objective over invertible Q by gradient descent with Armijo
// backtracking from Q = identity, annealing the smoothing from 1e-1 down past
// 1e-9 (halved per stage, iterations split evenly). A determinant collapse
// below 1e-12 restarts from a jittered identity; after 5 restarts it throws.
UnmixResult sparse_unmix(const IdentInstance& inst, int n_points = 512, double lambda = 1.0,
                         double mu = 0.1, int iters = 5000, std::uint64_t seed = 0);

// Mean coefficient of determination, with intercept, clipped to [0, 1]:
// first predicting each coordinate of s_{I_k} from s_hat_{pi(I_k)}, then
// predicting each complement coordinate from the same predictors. An empty
// complement scores 0.
std::pair<double, double> group_r2(const Eigen::MatrixXd& s, const Eigen::MatrixXd& s_hat,
                                   const std::vector<int>& I_k, const std::vector<int>& pi);

}  // namespace segtask
