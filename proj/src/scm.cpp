#include "segtask/scm.hpp"

#include <stdexcept>

#include "segtask/random.hpp"

namespace segtask {

namespace {

[[noreturn]] void fail_arg(const std::string& msg) { throw std::invalid_argument(msg); }

Eigen::MatrixXd draw_matrix(Rng& rng, int rows, int cols, double lo, double hi) {
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = rng.signed_coefficient(lo, hi);
  return m;
}

void check_params(const TemporalGraph& g, const ScmParams& p) {
  if (static_cast<int>(p.action_from_state.size()) != g.T() ||
      static_cast<int>(p.state_from_state.size()) != g.T() - 1 ||
      static_cast<int>(p.state_from_action.size()) != g.T() - 1 ||
      static_cast<int>(p.task_from_action.size()) != g.T())
    fail_arg("parameter table sizes do not match the graph");
  for (const auto& row : p.task_from_action)
    if (static_cast<int>(row.size()) != g.M())
      fail_arg("parameter table sizes do not match the graph");
}

double noise_std_of(const ScmParams& p, NodeKind kind) {
  switch (kind) {
    case NodeKind::State: return p.noise.state;
    case NodeKind::Action: return p.noise.action;
    case NodeKind::Task: return p.noise.task;
  }
  return 1.0;
}

// Coefficient block of `child` with respect to parent `parent`; empty when
// the graph has no such edge.
Eigen::MatrixXd coefficient(const TemporalGraph& g, const ScmParams& p, NodeId child,
                            NodeId parent) {
  if (!g.has_edge(parent, child)) return {};
  const int t = parent.index;
  switch (child.kind) {
    case NodeKind::Action: return p.action_from_state[child.index - 1];
    case NodeKind::State:
      return parent.kind == NodeKind::State ? p.state_from_state[t - 1]
                                            : p.state_from_action[t - 1];
    case NodeKind::Task: return p.task_from_action[t - 1][child.index - 1];
  }
  return {};
}

}  // namespace

VariableLayout::VariableLayout(int T, int M, int d_s, int d_a, int d_g)
    : T_(T), M_(M), ds_(d_s), da_(d_a), dg_(d_g) {
  if (T < 1 || M < 0 || d_s < 1 || d_a < 1 || d_g < 1) fail_arg("bad layout dimensions");
}

int VariableLayout::offset_of(NodeId node) const {
  switch (node.kind) {
    case NodeKind::State:
      if (node.index < 1 || node.index > T_) fail_arg("layout: state out of range");
      return (node.index - 1) * (ds_ + da_);
    case NodeKind::Action:
      if (node.index < 1 || node.index > T_) fail_arg("layout: action out of range");
      return (node.index - 1) * (ds_ + da_) + ds_;
    case NodeKind::Task:
      if (node.index < 1 || node.index > M_) fail_arg("layout: task out of range");
      return T_ * (ds_ + da_) + (node.index - 1) * dg_;
  }
  fail_arg("layout: bad node kind");
}

int VariableLayout::dim_of(NodeId node) const {
  switch (node.kind) {
    case NodeKind::State: return ds_;
    case NodeKind::Action: return da_;
    case NodeKind::Task: return dg_;
  }
  fail_arg("layout: bad node kind");
}

std::vector<NodeId> VariableLayout::order() const {
  std::vector<NodeId> out;
  out.reserve(2 * T_ + M_);
  for (int t = 1; t <= T_; ++t) {
    out.push_back(NodeId::state(t));
    out.push_back(NodeId::action(t));
  }
  for (int i = 1; i <= M_; ++i) out.push_back(NodeId::task(i));
  return out;
}

std::vector<std::string> VariableLayout::labels() const {
  std::vector<std::string> out;
  out.reserve(total_dim());
  for (const auto& node : order())
    for (int j = 0; j < dim_of(node); ++j)
      out.push_back(to_string(node) + "." + std::to_string(j));
  return out;
}

ScmParams parameterize(const TemporalGraph& g, const ScmOptions& opt, std::uint64_t seed) {
  if (opt.d_s < 1 || opt.d_a < 1 || opt.d_g < 1) fail_arg("dimensions must be positive");
  if (opt.coeff_min <= 0 || opt.coeff_max < opt.coeff_min) fail_arg("bad coefficient range");
  Rng rng(derive_seed(seed, 0xc0efULL));
  ScmParams p;
  p.d_s = opt.d_s;
  p.d_a = opt.d_a;
  p.d_g = opt.d_g;
  p.noise = opt.noise;
  p.action_from_state.resize(g.T());
  p.state_from_state.resize(g.T() - 1);
  p.state_from_action.resize(g.T() - 1);
  p.task_from_action.assign(g.T(), std::vector<Eigen::MatrixXd>(g.M()));
  for (int t = 1; t <= g.T(); ++t)
    p.action_from_state[t - 1] = draw_matrix(rng, opt.d_a, opt.d_s, opt.coeff_min, opt.coeff_max);
  for (int t = 1; t < g.T(); ++t) {
    if (!g.boundary_connected(t)) continue;
    p.state_from_state[t - 1] = draw_matrix(rng, opt.d_s, opt.d_s, opt.coeff_min, opt.coeff_max);
    p.state_from_action[t - 1] = draw_matrix(rng, opt.d_s, opt.d_a, opt.coeff_min, opt.coeff_max);
  }
  for (int t = 1; t <= g.T(); ++t)
    for (int i = 1; i <= g.M(); ++i)
      if (g.incidence().at(g.segment_of(t), i))
        p.task_from_action[t - 1][i - 1] =
            draw_matrix(rng, opt.d_g, opt.d_a, opt.coeff_min, opt.coeff_max);
  return p;
}

VariableLayout layout_for(const TemporalGraph& g, const ScmParams& params) {
  return VariableLayout(g.T(), g.M(), params.d_s, params.d_a, params.d_g);
}

Eigen::MatrixXd sample(const TemporalGraph& g, const ScmParams& params, int n,
                       std::uint64_t seed) {
  if (n < 1) fail_arg("need at least one sample");
  check_params(g, params);
  const auto layout = layout_for(g, params);
  const int D = layout.total_dim();
  Eigen::MatrixXd data(n, D);
  for (int r = 0; r < n; ++r) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
    Eigen::VectorXd row(D);
    auto block = [&](NodeId node) {
      return row.segment(layout.offset_of(node), layout.dim_of(node));
    };
    auto noise_into = [&](NodeId node) {
      const double sd = noise_std_of(params, node.kind);
      auto seg = block(node);
      for (int j = 0; j < seg.size(); ++j) seg(j) = sd * rng.normal();
    };
    for (int t = 1; t <= g.T(); ++t) {
      noise_into(NodeId::state(t));
      if (t > 1 && g.boundary_connected(t - 1))
        block(NodeId::state(t)) += params.state_from_state[t - 2] * block(NodeId::state(t - 1)) +
                                   params.state_from_action[t - 2] * block(NodeId::action(t - 1));
      noise_into(NodeId::action(t));
      block(NodeId::action(t)) += params.action_from_state[t - 1] * block(NodeId::state(t));
    }
    for (int i = 1; i <= g.M(); ++i) {
      noise_into(NodeId::task(i));
      for (int t = 1; t <= g.T(); ++t)
        if (g.incidence().at(g.segment_of(t), i))
          block(NodeId::task(i)) += params.task_from_action[t - 1][i - 1] * block(NodeId::action(t));
    }
    data.row(r) = row.transpose();
  }
  return data;
}

Eigen::MatrixXd joint_covariance(const TemporalGraph& g, const ScmParams& params) {
  check_params(g, params);
  const auto layout = layout_for(g, params);
  const int D = layout.total_dim();
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(D, D);
  Eigen::VectorXd omega(D);
  for (const auto& child : layout.order()) {
    const int off = layout.offset_of(child);
    const int dim = layout.dim_of(child);
    const double sd = noise_std_of(params, child.kind);
    omega.segment(off, dim).setConstant(sd * sd);
    for (const auto& parent : g.parents(child)) {
      const auto coef = coefficient(g, params, child, parent);
      if (coef.size() == 0) fail_arg("missing coefficient for an edge of the graph");
      W.block(off, layout.offset_of(parent), dim, layout.dim_of(parent)) = coef;
    }
  }
  const Eigen::MatrixXd ImW = Eigen::MatrixXd::Identity(D, D) - W;
  const Eigen::MatrixXd inv = ImW.partialPivLu().solve(Eigen::MatrixXd::Identity(D, D));
  const Eigen::MatrixXd sigma = inv * omega.asDiagonal() * inv.transpose();
  // Exact symmetry despite rounding in the solve.
  return 0.5 * (sigma + sigma.transpose());
}

Eigen::MatrixXd covariance_from_structure(const TemporalGraph& g, const ScmParams& params) {
  check_params(g, params);
  const auto layout = layout_for(g, params);
  const int D = layout.total_dim();
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(D, D);
  std::vector<NodeId> done;
  for (const auto& child : layout.order()) {
    const int off = layout.offset_of(child);
    const int dim = layout.dim_of(child);
    struct Edge {
      int off;
      int dim;
      Eigen::MatrixXd coef;
    };
    std::vector<Edge> in;
    for (const auto& parent : g.parents(child))
      in.push_back({layout.offset_of(parent), layout.dim_of(parent),
                    coefficient(g, params, child, parent)});
    // Cross-covariance with every block already placed.
    for (const auto& prev : done) {
      const int poff = layout.offset_of(prev);
      const int pdim = layout.dim_of(prev);
      Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(dim, pdim);
      for (const auto& e : in) cross += e.coef * sigma.block(e.off, poff, e.dim, pdim);
      sigma.block(off, poff, dim, pdim) = cross;
      sigma.block(poff, off, pdim, dim) = cross.transpose();
    }
    // Own covariance: propagated part plus fresh noise.
    const double sd = noise_std_of(params, child.kind);
    Eigen::MatrixXd own = Eigen::MatrixXd::Identity(dim, dim) * (sd * sd);
    for (const auto& e : in)
      for (const auto& f : in)
        own += e.coef * sigma.block(e.off, f.off, e.dim, f.dim) * f.coef.transpose();
    sigma.block(off, off, dim, dim) = own;
    done.push_back(child);
  }
  return sigma;
}

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& data) {
  if (data.rows() < 2) fail_arg("need at least two rows");
  const Eigen::RowVectorXd mean = data.colwise().mean();
  const Eigen::MatrixXd centered = data.rowwise() - mean;
  return centered.transpose() * centered / static_cast<double>(data.rows() - 1);
}

std::vector<Eigen::MatrixXd> draw_observation_maps(int T, int d_s, std::uint64_t seed,
                                                   double cond_limit) {
  if (T < 1 || d_s < 1) fail_arg("bad observation dimensions");
  if (cond_limit < 1.0) fail_arg("condition limit must be at least 1");
  Rng rng(derive_seed(seed, 0x0b5eULL));
  std::vector<Eigen::MatrixXd> maps;
  maps.reserve(T);
  for (int t = 0; t < T; ++t) {
    Eigen::MatrixXd m;
    while (true) {
      m = draw_matrix(rng, d_s, d_s, 0.5, 1.5);
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
      const double smin = svd.singularValues().minCoeff();
      if (smin > 0 && svd.singularValues().maxCoeff() / smin <= cond_limit) break;
    }
    maps.push_back(std::move(m));
  }
  return maps;
}

Eigen::MatrixXd observation_jacobian(const VariableLayout& layout,
                                     const std::vector<Eigen::MatrixXd>& maps) {
  if (static_cast<int>(maps.size()) != layout.T()) fail_arg("one map per step required");
  const int D = layout.total_dim();
  Eigen::MatrixXd J = Eigen::MatrixXd::Identity(D, D);
  for (int t = 1; t <= layout.T(); ++t) {
    const auto& m = maps[t - 1];
    if (m.rows() != layout.d_s() || m.cols() != layout.d_s())
      fail_arg("observation map has the wrong shape");
    const int off = layout.offset_of(NodeId::state(t));
    J.block(off, off, layout.d_s(), layout.d_s()) = m;
  }
  return J;
}

Eigen::MatrixXd apply_observation(const Eigen::MatrixXd& data, const VariableLayout& layout,
                                  const std::vector<Eigen::MatrixXd>& maps) {
  if (data.cols() != layout.total_dim()) fail_arg("data does not match the layout");
  if (static_cast<int>(maps.size()) != layout.T()) fail_arg("one map per step required");
  Eigen::MatrixXd out = data;
  for (int t = 1; t <= layout.T(); ++t) {
    const int off = layout.offset_of(NodeId::state(t));
    out.middleCols(off, layout.d_s()) =
        data.middleCols(off, layout.d_s()) * maps[t - 1].transpose();
  }
  return out;
}

Eigen::MatrixXd transformed_covariance(const Eigen::MatrixXd& cov, const VariableLayout& layout,
                                       const std::vector<Eigen::MatrixXd>& maps) {
  if (cov.rows() != layout.total_dim() || cov.cols() != layout.total_dim())
    fail_arg("covariance does not match the layout");
  const Eigen::MatrixXd J = observation_jacobian(layout, maps);
  return J * cov * J.transpose();
}

}  // namespace segtask
