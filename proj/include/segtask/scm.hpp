#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "segtask/graph.hpp"

namespace segtask {

struct NoiseStds {
  double action = 1.0;
  double state = 1.0;
  double task = 1.0;
};

struct ScmOptions {
  int d_s = 1;  // coordinates per state
  int d_a = 1;  // coordinates per action
  int d_g = 1;  // coordinates per task sink
  NoiseStds noise;
  // Every drawn coefficient entry has magnitude in [coeff_min, coeff_max]
  // and an independent random sign.
  double coeff_min = 0.5;
  double coeff_max = 1.5;
};

// Flat coordinate layout of one trajectory:
//   s_1, a_1, s_2, a_2, ..., s_T, a_T, g_1, ..., g_M
// with d_s/d_a/d_g coordinates per block.
class VariableLayout {
 public:
  VariableLayout() = default;
  VariableLayout(int T, int M, int d_s, int d_a, int d_g);

  int T() const { return T_; }
  int M() const { return M_; }
  int d_s() const { return ds_; }
  int d_a() const { return da_; }
  int d_g() const { return dg_; }
  int total_dim() const { return T_ * (ds_ + da_) + M_ * dg_; }

  int offset_of(NodeId node) const;
  int dim_of(NodeId node) const;
  // Blocks in layout order.
  std::vector<NodeId> order() const;
  // One label per coordinate: "s[1].0", "s[1].1", ..., "g[2].0".
  std::vector<std::string> labels() const;

  friend bool operator==(const VariableLayout&, const VariableLayout&) = default;

 private:
  int T_ = 0;
  int M_ = 0;
  int ds_ = 1;
  int da_ = 1;
  int dg_ = 1;
};

// Linear coefficients of the structural model. Unused slots (disconnected
// boundaries, segment/task pairs without an edge) hold empty matrices.
//   a_t     = action_from_state[t-1] s_t + eta_t
//   s_{t+1} = state_from_state[t-1] s_t + state_from_action[t-1] a_t + xi_t
//   g_i     = sum_t task_from_action[t-1][i-1] a_t + eps_i
//   s_1     = xi_1
struct ScmParams {
  int d_s = 1;
  int d_a = 1;
  int d_g = 1;
  NoiseStds noise;
  std::vector<Eigen::MatrixXd> action_from_state;               // size T
  std::vector<Eigen::MatrixXd> state_from_state;                // size T-1
  std::vector<Eigen::MatrixXd> state_from_action;               // size T-1
  std::vector<std::vector<Eigen::MatrixXd>> task_from_action;   // size T x M
};

// Draws coefficients for every edge of the graph; deterministic in seed.
ScmParams parameterize(const TemporalGraph& g, const ScmOptions& opt, std::uint64_t seed);

VariableLayout layout_for(const TemporalGraph& g, const ScmParams& params);

// n i.i.d. trajectories, one per row, columns in layout order. Row r is
// generated from its own stream derived from (seed, r), so any prefix of
// the sample is reproducible independently of n.
Eigen::MatrixXd sample(const TemporalGraph& g, const ScmParams& params, int n,
                       std::uint64_t seed);

// Exact joint covariance by inverting the linear system: with W the strictly
// lower block-triangular weight matrix and Omega the diagonal of noise
// variances, Sigma = (I - W)^-1 Omega (I - W)^-T.
Eigen::MatrixXd joint_covariance(const TemporalGraph& g, const ScmParams& params);

// Exact joint covariance by forward recursion over blocks in layout order;
// independent of joint_covariance's solve and used to cross-check it.
Eigen::MatrixXd covariance_from_structure(const TemporalGraph& g, const ScmParams& params);

// Empirical covariance with the n-1 denominator.
Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& data);

// Per-step invertible square maps for the state blocks; each is redrawn
// until its condition number is at most cond_limit.
std::vector<Eigen::MatrixXd> draw_observation_maps(int T, int d_s, std::uint64_t seed,
                                                   double cond_limit = 100.0);

// Block-diagonal Jacobian of the observation: maps[t-1] on the s_t block,
// identity on actions and tasks.
Eigen::MatrixXd observation_jacobian(const VariableLayout& layout,
                                     const std::vector<Eigen::MatrixXd>& maps);

// Replaces every state block s_t by maps[t-1] s_t, row by row.
Eigen::MatrixXd apply_observation(const Eigen::MatrixXd& data, const VariableLayout& layout,
                                  const std::vector<Eigen::MatrixXd>& maps);

// Covariance of the observed vector: J Sigma J^T.
Eigen::MatrixXd transformed_covariance(const Eigen::MatrixXd& cov, const VariableLayout& layout,
                                       const std::vector<Eigen::MatrixXd>& maps);

}  // namespace segtask
