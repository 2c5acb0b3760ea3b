#include "segtask/ci.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace segtask {

namespace {

[[noreturn]] void fail_arg(const std::string& msg) { throw std::invalid_argument(msg); }

// Coordinate indices of a node's block.
std::vector<int> coords_of(const VariableLayout& layout, NodeId node) {
  std::vector<int> out;
  const int off = layout.offset_of(node);
  for (int j = 0; j < layout.dim_of(node); ++j) out.push_back(off + j);
  return out;
}

std::vector<int> coords_of(const VariableLayout& layout, const ConditioningSet& z) {
  std::vector<int> out;
  for (const auto& node : z) {
    const auto block = coords_of(layout, node);
    out.insert(out.end(), block.begin(), block.end());
  }
  return out;
}

}  // namespace

double partial_correlation(const Eigen::MatrixXd& cov, int x, int y,
                           const std::vector<int>& cond) {
  if (cov.rows() != cov.cols()) fail_arg("covariance must be square");
  std::vector<int> idx = {x, y};
  for (int c : cond) {
    if (c == x || c == y) fail_arg("conditioning coordinate equals an endpoint");
    idx.push_back(c);
  }
  const int k = static_cast<int>(idx.size());
  for (int i : idx)
    if (i < 0 || i >= cov.rows()) fail_arg("coordinate out of range");

  Eigen::MatrixXd sub(k, k);
  for (int r = 0; r < k; ++r)
    for (int c = 0; c < k; ++c) sub(r, c) = cov(idx[r], idx[c]);
  // Normalize to a correlation matrix for scale-free conditioning.
  Eigen::VectorXd d = sub.diagonal().cwiseSqrt();
  for (int i = 0; i < k; ++i)
    if (!(d(i) > 0)) throw std::runtime_error("degenerate variance in partial correlation");
  sub = d.cwiseInverse().asDiagonal() * sub * d.cwiseInverse().asDiagonal();

  Eigen::FullPivLU<Eigen::MatrixXd> lu(sub);
  if (!lu.isInvertible()) throw std::runtime_error("singular matrix in partial correlation");
  const Eigen::MatrixXd theta = lu.inverse();
  const double r = -theta(0, 1) / std::sqrt(theta(0, 0) * theta(1, 1));
  return std::clamp(r, -1.0, 1.0);
}

CiResult fisher_z_test(double r, int n, int cond_size, double alpha) {
  if (n - cond_size - 3 <= 0) fail_arg("sample too small for the conditioning set");
  if (alpha <= 0 || alpha >= 1) fail_arg("alpha must be in (0, 1)");
  constexpr double kCap = 1.0 - 1e-12;
  const double z = std::atanh(std::clamp(r, -kCap, kCap));
  const double stat = std::sqrt(static_cast<double>(n - cond_size - 3)) * std::abs(z);
  const double p = std::erfc(stat / std::sqrt(2.0));
  CiResult res;
  res.dependent = p < alpha;
  res.statistic = stat;
  res.p_value = p;
  res.n_eff = n;
  return res;
}

CiContext CiContext::reachability(const TemporalGraph& g) {
  CiContext ctx;
  ctx.backend_ = Backend::Reachability;
  ctx.graph_ = g;
  ctx.layout_ = VariableLayout(g.T(), g.M(), 1, 1, 1);
  return ctx;
}

CiContext CiContext::analytic(const Eigen::MatrixXd& cov, const VariableLayout& layout,
                              double atol) {
  if (cov.rows() != layout.total_dim() || cov.cols() != layout.total_dim())
    fail_arg("covariance does not match the layout");
  if (atol <= 0) fail_arg("atol must be positive");
  CiContext ctx;
  ctx.backend_ = Backend::Analytic;
  ctx.layout_ = layout;
  ctx.cov_ = cov;
  ctx.atol_ = atol;
  return ctx;
}

CiContext CiContext::fisher(const Eigen::MatrixXd& data, const VariableLayout& layout,
                            double alpha) {
  if (data.cols() != layout.total_dim()) fail_arg("data does not match the layout");
  if (alpha <= 0 || alpha >= 1) fail_arg("alpha must be in (0, 1)");
  CiContext ctx;
  ctx.backend_ = Backend::Fisher;
  ctx.layout_ = layout;
  ctx.cov_ = sample_covariance(data);
  ctx.alpha_ = alpha;
  ctx.n_ = static_cast<int>(data.rows());
  return ctx;
}

CiResult CiContext::query(NodeId x, NodeId y, const ConditioningSet& z) const {
  if (x == y) fail_arg("query endpoints must differ");
  if (z.contains(x) || z.contains(y)) fail_arg("query endpoints must not be conditioned on");

  if (backend_ == Backend::Reachability) {
    CiResult res;
    res.dependent = !d_separated(graph_, x, y, z);
    res.statistic = res.dependent ? 1.0 : 0.0;
    return res;
  }

  const auto xs = coords_of(layout_, x);
  const auto ys = coords_of(layout_, y);
  const auto cond = coords_of(layout_, z);

  if (backend_ == Backend::Analytic) {
    CiResult res;
    for (int cx : xs)
      for (int cy : ys)
        res.statistic = std::max(res.statistic,
                                 std::abs(partial_correlation(cov_, cx, cy, cond)));
    res.dependent = res.statistic > atol_;
    res.p_value = res.dependent ? 0.0 : 1.0;
    return res;
  }

  CiResult res;
  res.n_eff = n_;
  double min_p = 1.0;
  for (int cx : xs) {
    for (int cy : ys) {
      const double r = partial_correlation(cov_, cx, cy, cond);
      const auto pair = fisher_z_test(r, n_, static_cast<int>(cond.size()), alpha_);
      res.statistic = std::max(res.statistic, pair.statistic);
      min_p = std::min(min_p, *pair.p_value);
    }
  }
  const double pairs = static_cast<double>(xs.size() * ys.size());
  res.p_value = std::min(1.0, pairs * min_p);
  res.dependent = *res.p_value < alpha_;
  return res;
}

}  // namespace segtask
