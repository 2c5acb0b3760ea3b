#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "segtask/graph.hpp"
#include "segtask/scm.hpp"

namespace segtask {

// Partial correlation of coordinates x and y given the coordinates in cond,
// computed from the precision matrix of the correlation-normalized
// submatrix. Throws if the submatrix is singular.
double partial_correlation(const Eigen::MatrixXd& cov, int x, int y,
                           const std::vector<int>& cond);

struct CiResult {
  bool dependent = false;
  // Backend-specific evidence: reachability verdict (0/1), largest absolute
  // partial correlation, or largest Fisher statistic over coordinate pairs.
  double statistic = 0.0;
  std::optional<double> p_value;  // absent for the reachability backend
  int n_eff = 0;                  // samples backing the verdict; 0 if exact
};

// z = atanh(r), statistic sqrt(n - cond_size - 3) |z|, two-sided normal
// p-value; dependent iff p < alpha. r is clamped away from +-1.
CiResult fisher_z_test(double r, int n, int cond_size, double alpha = 0.05);

// One conditional-independence engine with three interchangeable backends:
//   reachability  verdicts straight from the graph
//   analytic      exact covariance, dependent iff max |pcor| > atol
//   fisher        finite-sample covariance, per-pair Fisher z tests with a
//                 Bonferroni correction across coordinate pairs
class CiContext {
 public:
  static CiContext reachability(const TemporalGraph& g);
  static CiContext analytic(const Eigen::MatrixXd& cov, const VariableLayout& layout,
                            double atol = 1e-8);
  static CiContext fisher(const Eigen::MatrixXd& data, const VariableLayout& layout,
                          double alpha = 0.05);

  CiResult query(NodeId x, NodeId y, const ConditioningSet& z) const;

  const VariableLayout& layout() const { return layout_; }

 private:
  enum class Backend { Reachability, Analytic, Fisher };

  CiContext() = default;

  Backend backend_ = Backend::Reachability;
  TemporalGraph graph_;
  VariableLayout layout_;
  Eigen::MatrixXd cov_;
  double atol_ = 1e-8;
  double alpha_ = 0.05;
  int n_ = 0;
};

inline CiResult ci_query(const CiContext& ctx, NodeId x, NodeId y, const ConditioningSet& z) {
  return ctx.query(x, y, z);
}

}  // namespace segtask
