#include "segtask/ident.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>
#include <string>

#include "segtask/random.hpp"

namespace segtask {

namespace {

[[noreturn]] void fail_arg(const std::string& what) { throw std::invalid_argument(what); }

constexpr std::uint64_t kInstanceStream = 0x1d37ULL;
constexpr std::uint64_t kPointStream = 0x901eULL;
constexpr std::uint64_t kRestartStream = 0xbad0ULL;

constexpr double kInitialStep = 1e-2;
constexpr double kArmijoSlope = 1e-4;
constexpr double kDetFloor = 1e-12;
constexpr double kZeroTol = 1e-6;
constexpr double kBlockDetTol = 1e-6;
constexpr int kMaxRestarts = 5;

double sigma_value(Nonlinearity sigma, double x) {
  return sigma == Nonlinearity::Tanh ? std::tanh(x) : x;
}

double sigma_slope(Nonlinearity sigma, double x) {
  if (sigma == Nonlinearity::Identity) return 1.0;
  const double t = std::tanh(x);
  return 1.0 - t * t;
}

std::vector<std::vector<int>> normalized_supports(int d_s,
                                                  const std::vector<std::vector<int>>& supports) {
  if (d_s < 1) fail_arg("d_s must be at least 1");
  if (supports.empty()) fail_arg("at least one task support is required");
  std::vector<std::vector<int>> out;
  out.reserve(supports.size());
  for (const auto& support : supports) {
    if (support.empty()) fail_arg("empty task support");
    std::vector<int> sorted = support;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t p = 0; p < sorted.size(); ++p) {
      if (sorted[p] < 1 || sorted[p] > d_s) fail_arg("support index outside 1..d_s");
      if (p > 0 && sorted[p] == sorted[p - 1]) fail_arg("duplicate index inside a support");
    }
    out.push_back(std::move(sorted));
  }
  std::set<std::vector<int>> distinct(out.begin(), out.end());
  if (distinct.size() != out.size()) fail_arg("distinct tasks must have distinct supports");
  return out;
}

double condition_number(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  if (sv(sv.size() - 1) <= 0.0) return std::numeric_limits<double>::infinity();
  return sv(0) / sv(sv.size() - 1);
}

Eigen::MatrixXd stack_jacobians(const std::vector<Eigen::MatrixXd>& jacobians) {
  if (jacobians.empty()) fail_arg("at least one Jacobian is required");
  const Eigen::Index rows_each = jacobians.front().rows();
  const Eigen::Index cols = jacobians.front().cols();
  Eigen::MatrixXd stacked(rows_each * static_cast<Eigen::Index>(jacobians.size()), cols);
  for (std::size_t l = 0; l < jacobians.size(); ++l) {
    if (jacobians[l].rows() != rows_each || jacobians[l].cols() != cols)
      fail_arg("Jacobians must share one shape");
    stacked.middleRows(static_cast<Eigen::Index>(l) * rows_each, rows_each) = jacobians[l];
  }
  return stacked;
}

double smoothed_abs_sum(const Eigen::MatrixXd& m, double epsilon) {
  if (epsilon == 0.0) return m.cwiseAbs().sum();
  const double e2 = epsilon * epsilon;
  double total = 0.0;
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      total += std::sqrt(m(r, c) * m(r, c) + e2) - epsilon;
  return total;
}

Eigen::MatrixXd smoothed_abs_slope(const Eigen::MatrixXd& m, double epsilon) {
  if (epsilon == 0.0) return m.unaryExpr([](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
  const double e2 = epsilon * epsilon;
  return m.unaryExpr([e2](double x) { return x / std::sqrt(x * x + e2); });
}

// Shared by the public entry points and the optimizer, which keeps the
// stacked form across iterations.
double objective_stacked(const Eigen::MatrixXd& stacked, int n_points, const Eigen::MatrixXd& Q,
                         double lambda, double mu, double epsilon) {
  const double det = Q.determinant();
  if (std::abs(det) < kDetFloor) return std::numeric_limits<double>::infinity();
  return lambda / n_points * smoothed_abs_sum(stacked * Q, epsilon) - mu * std::log(std::abs(det));
}

Eigen::MatrixXd gradient_stacked(const Eigen::MatrixXd& stacked, int n_points,
                                 const Eigen::MatrixXd& Q, double lambda, double mu,
                                 double epsilon) {
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(Q);
  if (std::abs(lu.determinant()) < kDetFloor) fail_arg("gradient at a singular point");
  return lambda / n_points * stacked.transpose() * smoothed_abs_slope(stacked * Q, epsilon) -
         mu * lu.inverse().transpose();
}

std::vector<double> annealing_schedule() {
  std::vector<double> stages;
  for (double eps = 1e-1; eps >= 1e-9; eps *= 0.5) stages.push_back(eps);
  return stages;
}

Eigen::MatrixXd row_normalized(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd out = m;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double peak = out.row(r).cwiseAbs().maxCoeff();
    if (peak > 0.0) out.row(r) /= peak;
  }
  return out;
}

void zero_small_entries(Eigen::MatrixXd& m, double tol) {
  m = m.unaryExpr([tol](double x) { return std::abs(x) < tol ? 0.0 : x; });
}

}  // namespace

std::vector<int> IdentInstance::relevant_union() const {
  std::set<int> seen;
  for (const auto& support : supports) seen.insert(support.begin(), support.end());
  return {seen.begin(), seen.end()};
}

std::vector<int> IdentInstance::irrelevant_latents() const {
  const auto relevant = relevant_union();
  std::vector<int> out;
  for (int j = 1; j <= d_s; ++j)
    if (!std::binary_search(relevant.begin(), relevant.end(), j)) out.push_back(j);
  return out;
}

IdentInstance make_instance(int d_s, const std::vector<std::vector<int>>& supports,
                            std::uint64_t seed) {
  IdentInstance inst;
  inst.d_s = d_s;
  inst.supports = normalized_supports(d_s, supports);
  inst.d_g = static_cast<int>(inst.supports.size());
  inst.seed = seed;

  Rng rng(derive_seed(seed, kInstanceStream));
  inst.coeffs = Eigen::MatrixXd::Zero(inst.d_g, d_s);
  for (int i = 0; i < inst.d_g; ++i)
    for (int j : inst.supports[i]) inst.coeffs(i, j - 1) = rng.signed_coefficient(0.5, 1.5);

  inst.mixing.resize(d_s, d_s);
  do {
    for (Eigen::Index r = 0; r < d_s; ++r)
      for (Eigen::Index c = 0; c < d_s; ++c) inst.mixing(r, c) = rng.normal();
  } while (condition_number(inst.mixing) > 1e3);
  return inst;
}

Eigen::MatrixXd sample_latents(const IdentInstance& inst, int count, std::uint64_t seed) {
  if (count < 1) fail_arg("count must be positive");
  Eigen::MatrixXd points(count, inst.d_s);
  for (int r = 0; r < count; ++r) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
    for (int c = 0; c < inst.d_s; ++c) points(r, c) = rng.normal();
  }
  return points;
}

Eigen::VectorXd task_values(const IdentInstance& inst, const Eigen::VectorXd& s) {
  if (s.size() != inst.d_s) fail_arg("latent dimension mismatch");
  Eigen::VectorXd activated(inst.d_s);
  for (int j = 0; j < inst.d_s; ++j) activated(j) = sigma_value(inst.sigma, s(j));
  return inst.coeffs * activated;
}

Eigen::MatrixXd task_jacobian(const IdentInstance& inst, const Eigen::VectorXd& s) {
  if (s.size() != inst.d_s) fail_arg("latent dimension mismatch");
  Eigen::MatrixXd jac = inst.coeffs;
  for (int j = 0; j < inst.d_s; ++j) jac.col(j) *= sigma_slope(inst.sigma, s(j));
  return jac;
}

SpanCondition check_span_condition(const IdentInstance& inst, int sample_count,
                                   std::uint64_t seed) {
  std::size_t largest = 0;
  for (const auto& support : inst.supports) largest = std::max(largest, support.size());
  if (sample_count < static_cast<int>(largest))
    fail_arg("sample_count below the largest support size");

  SpanCondition result;
  result.points = sample_latents(inst, sample_count, derive_seed(seed, kPointStream));
  std::vector<Eigen::MatrixXd> jacobians;
  jacobians.reserve(sample_count);
  for (int l = 0; l < sample_count; ++l)
    jacobians.push_back(task_jacobian(inst, result.points.row(l).transpose()));

  for (int i = 0; i < inst.d_g; ++i) {
    const int needed = static_cast<int>(inst.supports[i].size());
    std::vector<int> chosen;
    Eigen::MatrixXd stack(needed, inst.d_s);
    for (int l = 0; l < sample_count && static_cast<int>(chosen.size()) < needed; ++l) {
      stack.row(chosen.size()) = jacobians[l].row(i);
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(stack.topRows(chosen.size() + 1));
      const auto& sv = svd.singularValues();
      if (sv(sv.size() - 1) > 1e-8 * sv(0)) chosen.push_back(l);
    }
    result.row_holds.push_back(static_cast<int>(chosen.size()) == needed);
    result.witnesses.push_back(std::move(chosen));
  }
  return result;
}

std::vector<SupersetRow> superset_property(const IdentInstance& inst, const Eigen::MatrixXd& Q,
                                           const Eigen::MatrixXd& points, double zero_tol) {
  if (Q.rows() != inst.d_s || Q.cols() != inst.d_s) fail_arg("Q must be d_s x d_s");
  if (!Eigen::FullPivLU<Eigen::MatrixXd>(Q).isInvertible()) fail_arg("singular Q");
  if (points.rows() < 1 || points.cols() != inst.d_s) fail_arg("points must be n x d_s");

  std::vector<Eigen::MatrixXd> plain, transformed;
  double plain_peak = 0.0, transformed_peak = 0.0;
  for (Eigen::Index l = 0; l < points.rows(); ++l) {
    plain.push_back(task_jacobian(inst, points.row(l).transpose()));
    transformed.push_back(plain.back() * Q);
    plain_peak = std::max(plain_peak, plain.back().cwiseAbs().maxCoeff());
    transformed_peak = std::max(transformed_peak, transformed.back().cwiseAbs().maxCoeff());
  }

  const auto row_support = [&](const std::vector<Eigen::MatrixXd>& family, int row, double peak) {
    int count = 0;
    for (int c = 0; c < inst.d_s; ++c) {
      for (const auto& m : family) {
        if (std::abs(m(row, c)) > zero_tol * peak) {
          ++count;
          break;
        }
      }
    }
    return count;
  };

  std::vector<SupersetRow> rows;
  for (int i = 0; i < inst.d_g; ++i) {
    SupersetRow row;
    row.true_support = row_support(plain, i, plain_peak);
    row.estimated_support = row_support(transformed, i, transformed_peak);
    row.holds = row.estimated_support >= row.true_support;
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd unmix_points(const IdentInstance& inst, int n_points, std::uint64_t seed) {
  return sample_latents(inst, n_points, derive_seed(seed, kPointStream));
}

double unmix_objective(const std::vector<Eigen::MatrixXd>& jacobians, const Eigen::MatrixXd& Q,
                       double lambda, double mu, double epsilon) {
  return objective_stacked(stack_jacobians(jacobians), static_cast<int>(jacobians.size()), Q,
                           lambda, mu, epsilon);
}

Eigen::MatrixXd unmix_gradient(const std::vector<Eigen::MatrixXd>& jacobians,
                               const Eigen::MatrixXd& Q, double lambda, double mu,
                               double epsilon) {
  return gradient_stacked(stack_jacobians(jacobians), static_cast<int>(jacobians.size()), Q,
                          lambda, mu, epsilon);
}

std::vector<int> extract_permutation(const Eigen::MatrixXd& composite) {
  const int d = static_cast<int>(composite.rows());
  if (composite.cols() != d) fail_arg("composite must be square");
  std::vector<int> pi(d, 0);
  std::vector<bool> row_used(d, false), col_used(d, false);
  for (int round = 0; round < d; ++round) {
    int best_r = -1, best_c = -1;
    double best = -1.0;
    for (int r = 0; r < d; ++r) {
      if (row_used[r]) continue;
      for (int c = 0; c < d; ++c) {
        if (col_used[c]) continue;
        if (std::abs(composite(r, c)) > best) {
          best = std::abs(composite(r, c));
          best_r = r;
          best_c = c;
        }
      }
    }
    row_used[best_r] = true;
    col_used[best_c] = true;
    pi[best_c] = best_r + 1;
  }
  return pi;
}

namespace {

// Worst off-block magnitude across all tasks under one pairing.
double off_block_under(const std::vector<std::vector<int>>& supports,
                       const Eigen::MatrixXd& composite, const Eigen::MatrixXd& inverse_side,
                       const std::vector<int>& pi) {
  const int d = static_cast<int>(composite.rows());
  double off = 0.0;
  for (const auto& support : supports) {
    std::vector<bool> in_support(d + 1, false), in_image(d + 1, false);
    for (int j : support) {
      if (j < 1 || j > d) fail_arg("support index outside the composite");
      in_support[j] = true;
      in_image[pi[j - 1]] = true;
    }
    for (int j : support) {
      for (int c = 1; c <= d; ++c) {
        if (!in_support[c]) off = std::max(off, std::abs(composite(pi[j - 1] - 1, c - 1)));
        if (!in_image[c]) off = std::max(off, std::abs(inverse_side(j - 1, c - 1)));
      }
    }
  }
  return off;
}

}  // namespace

BlockReport evaluate_blocks(const std::vector<std::vector<int>>& supports,
                            const Eigen::MatrixXd& Q_hat, double pass_tol) {
  const int d = static_cast<int>(Q_hat.rows());
  if (Q_hat.cols() != d) fail_arg("Q_hat must be square");
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(Q_hat);
  if (std::abs(lu.determinant()) < kDetFloor) fail_arg("Q_hat is numerically singular");

  BlockReport report;
  report.composite = row_normalized(lu.inverse());
  zero_small_entries(report.composite, kZeroTol);
  Eigen::MatrixXd inverse_side = row_normalized(Q_hat);
  zero_small_entries(inverse_side, kZeroTol);

  // The claim is existential over pairings. Greedy matching is the fast path;
  // when supports overlap or nest it can pair within-block coordinates the
  // wrong way round, so a leaky greedy verdict falls back to the best of all
  // d! pairings (d is small here).
  report.pi = extract_permutation(report.composite);
  double off = off_block_under(supports, report.composite, inverse_side, report.pi);
  if (off >= pass_tol && d <= 8) {
    std::vector<int> rows(d);
    for (int r = 0; r < d; ++r) rows[r] = r + 1;
    do {
      if (off_block_under(supports, report.composite, inverse_side, rows) < off) {
        report.pi = rows;
        off = off_block_under(supports, report.composite, inverse_side, rows);
      }
    } while (std::next_permutation(rows.begin(), rows.end()) && off >= pass_tol);
  }

  report.off_block_max = off;
  for (const auto& support : supports) {
    double task_off = off_block_under({support}, report.composite, inverse_side, report.pi);
    Eigen::MatrixXd block(support.size(), support.size());
    for (std::size_t r = 0; r < support.size(); ++r)
      for (std::size_t c = 0; c < support.size(); ++c)
        block(r, c) = report.composite(report.pi[support[r] - 1] - 1, support[c] - 1);
    report.verdict.push_back(task_off < pass_tol &&
                             std::abs(block.determinant()) > kBlockDetTol);
  }
  return report;
}

UnmixResult sparse_unmix(const IdentInstance& inst, int n_points, double lambda, double mu,
                         int iters, std::uint64_t seed) {
  if (lambda <= 0.0) fail_arg("lambda must be positive");
  if (mu <= 0.0) fail_arg("mu must be positive");
  if (iters < 1) fail_arg("iters must be at least 1");

  const Eigen::MatrixXd points = unmix_points(inst, n_points, seed);
  std::vector<Eigen::MatrixXd> jacobians;
  jacobians.reserve(n_points);
  for (int l = 0; l < n_points; ++l)
    jacobians.push_back(task_jacobian(inst, points.row(l).transpose()));
  const Eigen::MatrixXd stacked = stack_jacobians(jacobians);

  const auto stages = annealing_schedule();
  const int per_stage = std::max(1, iters / static_cast<int>(stages.size()));

  for (int attempt = 0; attempt <= kMaxRestarts; ++attempt) {
    Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(inst.d_s, inst.d_s);
    if (attempt > 0) {
      Rng rng(derive_seed(seed, kRestartStream + static_cast<std::uint64_t>(attempt)));
      for (int r = 0; r < inst.d_s; ++r)
        for (int c = 0; c < inst.d_s; ++c) Q(r, c) += 0.01 * rng.normal();
    }

    bool collapsed = false;
    std::vector<double> trace;
    for (double eps : stages) {
      double value = objective_stacked(stacked, n_points, Q, lambda, mu, eps);
      if (!std::isfinite(value)) {
        collapsed = true;
        break;
      }
      for (int it = 0; it < per_stage; ++it) {
        const Eigen::MatrixXd grad = gradient_stacked(stacked, n_points, Q, lambda, mu, eps);
        const double slope = grad.squaredNorm();
        if (slope < 1e-24) break;
        double step = kInitialStep;
        bool accepted = false;
        for (int halve = 0; halve < 60; ++halve) {
          const Eigen::MatrixXd candidate = Q - step * grad;
          const double trial = objective_stacked(stacked, n_points, candidate, lambda, mu, eps);
          if (trial <= value - kArmijoSlope * step * slope) {
            Q = candidate;
            value = trial;
            accepted = true;
            break;
          }
          step *= 0.5;
        }
        if (!accepted) break;
      }
      trace.push_back(objective_stacked(stacked, n_points, Q, lambda, mu, 0.0));
    }
    if (collapsed || std::abs(Q.determinant()) < kDetFloor) continue;

    UnmixResult result;
    result.Q_hat = Q;
    result.objective_trace = std::move(trace);
    result.restarts = attempt;
    auto report = evaluate_blocks(inst.supports, Q);
    result.pi = std::move(report.pi);
    result.block_verdict = std::move(report.verdict);
    result.off_block_max = report.off_block_max;
    result.composite = std::move(report.composite);
    return result;
  }
  throw std::runtime_error("unmixing determinant collapsed after 5 restarts");
}

std::pair<double, double> group_r2(const Eigen::MatrixXd& s, const Eigen::MatrixXd& s_hat,
                                   const std::vector<int>& I_k, const std::vector<int>& pi) {
  const Eigen::Index n = s.rows();
  const int d = static_cast<int>(s.cols());
  if (s_hat.rows() != n || s_hat.cols() != d) fail_arg("sample shapes must match");
  if (static_cast<int>(pi.size()) != d) fail_arg("pi must cover every latent");
  if (I_k.empty()) fail_arg("empty task support");
  for (int j : I_k)
    if (j < 1 || j > d) fail_arg("support index outside 1..d_s");
  if (n <= static_cast<Eigen::Index>(I_k.size()) + 1) fail_arg("fewer samples than regressors");

  Eigen::MatrixXd design(n, I_k.size() + 1);
  design.col(0).setOnes();
  for (std::size_t p = 0; p < I_k.size(); ++p) design.col(p + 1) = s_hat.col(pi[I_k[p] - 1] - 1);
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);

  const auto mean_r2 = [&](const std::vector<int>& targets) {
    if (targets.empty()) return 0.0;
    double total = 0.0;
    for (int j : targets) {
      const Eigen::VectorXd y = s.col(j - 1);
      const double sst = (y.array() - y.mean()).square().sum();
      if (sst == 0.0) continue;
      const double ssr = (y - design * qr.solve(y)).squaredNorm();
      total += std::clamp(1.0 - ssr / sst, 0.0, 1.0);
    }
    return total / targets.size();
  };

  std::vector<int> complement;
  for (int j = 1; j <= d; ++j)
    if (std::find(I_k.begin(), I_k.end(), j) == I_k.end()) complement.push_back(j);
  return {mean_r2(I_k), mean_r2(complement)};
}

}  // namespace segtask
