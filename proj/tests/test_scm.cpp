#include <doctest.h>

#include <Eigen/Dense>
#include <vector>

#include "segtask/graph.hpp"
#include "segtask/random.hpp"
#include "segtask/scm.hpp"

using namespace segtask;

namespace {

Eigen::MatrixXd mat1(double v) {
  Eigen::MatrixXd m(1, 1);
  m(0, 0) = v;
  return m;
}

// Partial correlation of coordinates x, y given the coordinates in cond,
// straight from the precision matrix of the submatrix.
double pcor_of(const Eigen::MatrixXd& cov, int x, int y, const std::vector<int>& cond) {
  std::vector<int> idx = {x, y};
  idx.insert(idx.end(), cond.begin(), cond.end());
  const int k = static_cast<int>(idx.size());
  Eigen::MatrixXd sub(k, k);
  for (int r = 0; r < k; ++r)
    for (int c = 0; c < k; ++c) sub(r, c) = cov(idx[r], idx[c]);
  const Eigen::MatrixXd theta = sub.inverse();
  return -theta(0, 1) / std::sqrt(theta(0, 0) * theta(1, 1));
}

TemporalGraph two_step_graph() {
  return build_graph(2, 2, 0, TaskIncidence(1, 0), {true});
}

// T=2 parameters with explicit scalar coefficients.
ScmParams two_step_params(double p1, double p2, double a1, double b1) {
  ScmParams p;
  p.action_from_state = {mat1(p1), mat1(p2)};
  p.state_from_state = {mat1(a1)};
  p.state_from_action = {mat1(b1)};
  p.task_from_action = {{}, {}};
  return p;
}

TemporalGraph six_step_graph() {
  return build_graph(6, 2, 1, TaskIncidence::from_pairs(3, 1, {{1, 1}, {3, 1}}),
                     std::vector<bool>(5, true));
}

}  // namespace

TEST_SUITE("scm") {

TEST_CASE("layout interleaves states and actions with sinks at the end") {
  VariableLayout lay(4, 1, 1, 1, 1);
  CHECK(lay.total_dim() == 9);
  CHECK(lay.offset_of(NodeId::state(1)) == 0);
  CHECK(lay.offset_of(NodeId::action(1)) == 1);
  CHECK(lay.offset_of(NodeId::state(3)) == 4);
  CHECK(lay.offset_of(NodeId::action(4)) == 7);
  CHECK(lay.offset_of(NodeId::task(1)) == 8);
  const auto labels = lay.labels();
  REQUIRE(labels.size() == 9);
  CHECK(labels[0] == "s[1].0");
  CHECK(labels[1] == "a[1].0");
  CHECK(labels[2] == "s[2].0");
  CHECK(labels[8] == "g[1].0");

  VariableLayout wide(4, 2, 2, 1, 3);
  CHECK(wide.total_dim() == 4 * 3 + 2 * 3);
  CHECK(wide.offset_of(NodeId::state(2)) == 3);
  CHECK(wide.offset_of(NodeId::action(2)) == 5);
  CHECK(wide.offset_of(NodeId::task(1)) == 12);
  CHECK(wide.offset_of(NodeId::task(2)) == 15);
  CHECK(wide.dim_of(NodeId::state(1)) == 2);
  CHECK(wide.dim_of(NodeId::task(2)) == 3);
  CHECK(wide.labels()[3] == "s[2].0");
  CHECK(wide.labels()[17] == "g[2].2");
  CHECK_THROWS_AS(wide.offset_of(NodeId::state(5)), std::invalid_argument);
  CHECK_THROWS_AS(wide.offset_of(NodeId::task(3)), std::invalid_argument);
  CHECK_THROWS_AS(VariableLayout(0, 1, 1, 1, 1), std::invalid_argument);
}

TEST_CASE("hand-computed covariance of the two-step chain") {
  auto g = two_step_graph();

  // a_t pure noise, s_2 = s_1 + noise.
  auto p = two_step_params(0.0, 0.0, 1.0, 0.0);
  Eigen::MatrixXd expected(4, 4);
  expected << 1, 0, 1, 0,  //
      0, 1, 0, 0,          //
      1, 0, 2, 0,          //
      0, 0, 0, 1;
  CHECK((joint_covariance(g, p) - expected).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((covariance_from_structure(g, p) - expected).cwiseAbs().maxCoeff() < 1e-12);

  // a_1 = s_1 + noise, s_2 = s_1 + a_1 + noise.
  p = two_step_params(1.0, 0.0, 1.0, 1.0);
  expected << 1, 1, 2, 0,  //
      1, 2, 3, 0,          //
      2, 3, 6, 0,          //
      0, 0, 0, 1;
  CHECK((joint_covariance(g, p) - expected).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((covariance_from_structure(g, p) - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("hand-computed covariance of a pure task accumulator") {
  // All boundaries cut, actions are pure noise, g = a1 + 2 a2 + 3 a3 + 4 a4 + noise.
  auto g = build_graph(4, 2, 1, TaskIncidence::from_pairs(2, 1, {{1, 1}, {2, 1}}),
                       std::vector<bool>(3, false));
  ScmParams p;
  p.action_from_state = {mat1(0), mat1(0), mat1(0), mat1(0)};
  p.state_from_state.resize(3);
  p.state_from_action.resize(3);
  p.task_from_action = {{mat1(1)}, {mat1(2)}, {mat1(3)}, {mat1(4)}};

  const auto layout = layout_for(g, p);
  const int gi = layout.offset_of(NodeId::task(1));
  for (const auto* route : {"solve", "recursion"}) {
    const Eigen::MatrixXd cov = std::string(route) == "solve" ? joint_covariance(g, p)
                                                              : covariance_from_structure(g, p);
    INFO(route);
    CHECK(cov(gi, gi) == doctest::Approx(31.0).epsilon(1e-12));
    for (int t = 1; t <= 4; ++t) {
      CHECK(cov(layout.offset_of(NodeId::action(t)), gi) == doctest::Approx(t).epsilon(1e-12));
      CHECK(cov(layout.offset_of(NodeId::state(t)), gi) == doctest::Approx(0.0).epsilon(1e-12));
    }
    // Cut boundaries leave distinct steps uncorrelated.
    CHECK(cov(layout.offset_of(NodeId::state(1)), layout.offset_of(NodeId::state(2))) ==
          doctest::Approx(0.0).epsilon(1e-12));
    CHECK(cov(layout.offset_of(NodeId::action(1)), layout.offset_of(NodeId::state(2))) ==
          doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("drawn coefficients respect the magnitude window and the graph") {
  auto g = build_graph(6, 2, 1, TaskIncidence::from_pairs(3, 1, {{1, 1}, {3, 1}}),
                       {true, true, false, true, true});
  ScmOptions opt;
  const auto p = parameterize(g, opt, 11);
  REQUIRE(p.action_from_state.size() == 6);
  REQUIRE(p.state_from_state.size() == 5);
  REQUIRE(p.task_from_action.size() == 6);
  for (const auto& m : p.action_from_state) {
    REQUIRE(m.size() == 1);
    CHECK(std::abs(m(0, 0)) >= 0.5);
    CHECK(std::abs(m(0, 0)) <= 1.5);
  }
  for (int t = 1; t <= 5; ++t) {
    const bool connected = t != 3;
    CHECK((p.state_from_state[t - 1].size() != 0) == connected);
    CHECK((p.state_from_action[t - 1].size() != 0) == connected);
  }
  for (int t = 1; t <= 6; ++t) {
    const bool relevant = t <= 2 || t >= 5;
    CHECK((p.task_from_action[t - 1][0].size() != 0) == relevant);
  }

  const auto q = parameterize(g, opt, 11);
  CHECK(q.action_from_state[3] == p.action_from_state[3]);
  const auto r = parameterize(g, opt, 12);
  CHECK(r.action_from_state[3] != p.action_from_state[3]);

  ScmOptions wide;
  wide.d_s = 2;
  wide.d_a = 3;
  wide.d_g = 2;
  const auto w = parameterize(g, wide, 5);
  CHECK(w.action_from_state[0].rows() == 3);
  CHECK(w.action_from_state[0].cols() == 2);
  CHECK(w.state_from_action[0].rows() == 2);
  CHECK(w.state_from_action[0].cols() == 3);
  CHECK(w.task_from_action[0][0].rows() == 2);
  CHECK(w.task_from_action[0][0].cols() == 3);
}

TEST_CASE("the solve and the recursion agree on random instances") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    RandomGraphSpec spec;
    spec.T = 12;
    spec.L = seed % 2 == 0 ? 2 : 3;
    spec.M = 2;
    spec.seed = seed;
    auto g = random_graph(spec);
    ScmOptions opt;
    if (seed >= 6) {
      opt.d_s = 2;
      opt.d_a = 2;
      opt.d_g = 2;
      opt.noise.action = 0.7;
      opt.noise.task = 1.3;
    }
    const auto p = parameterize(g, opt, derive_seed(99, seed));
    const auto a = joint_covariance(g, p);
    const auto b = covariance_from_structure(g, p);
    INFO("seed=", seed);
    REQUIRE(a.rows() == b.rows());
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-9 * std::max(1.0, a.cwiseAbs().maxCoeff()));
    // Symmetric positive semi-definite.
    CHECK((a - a.transpose()).cwiseAbs().maxCoeff() < 1e-9);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    CHECK(es.eigenvalues().minCoeff() > -1e-9 * a.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("sampling matches the analytic covariance") {
  auto g = six_step_graph();
  ScmOptions opt;
  const auto p = parameterize(g, opt, 5);
  const auto ana = joint_covariance(g, p);
  const auto data = sample(g, p, 200000, 17);
  REQUIRE(data.rows() == 200000);
  REQUIRE(data.cols() == ana.rows());
  const auto emp = sample_covariance(data);
  double worst = 0;
  for (int r = 0; r < ana.rows(); ++r)
    for (int c = 0; c < ana.cols(); ++c)
      worst = std::max(worst,
                       std::abs(emp(r, c) - ana(r, c)) / std::sqrt(ana(r, r) * ana(c, c)));
  CHECK(worst < 0.02);
  // Sample means are near zero on the same normalized scale.
  const Eigen::RowVectorXd mean = data.colwise().mean();
  for (int c = 0; c < ana.cols(); ++c)
    CHECK(std::abs(mean(c)) / std::sqrt(ana(c, c)) < 0.02);
}

TEST_CASE("sampling matches the analytic covariance with wide blocks") {
  auto g = build_graph(4, 2, 1, TaskIncidence::from_pairs(2, 1, {{1, 1}, {2, 1}}),
                       std::vector<bool>(3, true));
  ScmOptions opt;
  opt.d_s = 2;
  opt.d_a = 1;
  opt.d_g = 2;
  const auto p = parameterize(g, opt, 8);
  const auto ana = joint_covariance(g, p);
  const auto emp = sample_covariance(sample(g, p, 50000, 23));
  double worst = 0;
  for (int r = 0; r < ana.rows(); ++r)
    for (int c = 0; c < ana.cols(); ++c)
      worst = std::max(worst,
                       std::abs(emp(r, c) - ana(r, c)) / std::sqrt(ana(r, r) * ana(c, c)));
  CHECK(worst < 0.04);
}

TEST_CASE("sampled rows depend only on the seed and the row index") {
  auto g = six_step_graph();
  const auto p = parameterize(g, ScmOptions{}, 5);
  const auto big = sample(g, p, 8, 101);
  const auto small = sample(g, p, 5, 101);
  CHECK((big.topRows(5) - small).cwiseAbs().maxCoeff() == 0.0);
  const auto again = sample(g, p, 8, 101);
  CHECK((big - again).cwiseAbs().maxCoeff() == 0.0);
  const auto other = sample(g, p, 8, 102);
  CHECK((big - other).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("the analytic covariance is Markov for the graph") {
  auto g = six_step_graph();
  const auto p = parameterize(g, ScmOptions{}, 5);
  const auto cov = joint_covariance(g, p);
  const auto lay = layout_for(g, p);
  const int s1 = lay.offset_of(NodeId::state(1));
  const int s2 = lay.offset_of(NodeId::state(2));
  const int s3 = lay.offset_of(NodeId::state(3));
  const int a2 = lay.offset_of(NodeId::action(2));

  // Conditioning on the parents of s_3 cuts it off from the past.
  CHECK(std::abs(pcor_of(cov, s1, s3, {s2, a2})) < 1e-8);
  // Adjacent states stay strongly dependent.
  CHECK(std::abs(pcor_of(cov, s1, s2, {})) > 0.1);
}

TEST_CASE("separated pairs have zero partial correlation, connected pairs do not") {
  auto g = build_graph(10, 2, 1, TaskIncidence::from_pairs(5, 1, {{2, 1}, {4, 1}}),
                       std::vector<bool>(9, true));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto p = parameterize(g, ScmOptions{}, derive_seed(1000, seed));
    const auto cov = joint_covariance(g, p);
    const auto lay = layout_for(g, p);
    for (int k = 1; k < 5; ++k) {
      for (int v = k + 1; v <= 5; ++v) {
        const auto z = band_set(k, v, 1, 2, 10);
        std::vector<int> cond;
        for (const auto& n : z) cond.push_back(lay.offset_of(n));
        const double r = pcor_of(cov, lay.offset_of(NodeId::state(2 * k)),
                                 lay.offset_of(NodeId::state(2 * v)), cond);
        INFO("seed=", seed, " k=", k, " v=", v, " pcor=", r);
        if (k == 2 && v == 4)
          CHECK(std::abs(r) > 1e-6);
        else
          CHECK(std::abs(r) < 1e-8);
      }
    }
  }
}

TEST_CASE("observation maps are invertible, bounded and reproducible") {
  const auto maps = draw_observation_maps(6, 3, 77);
  REQUIRE(maps.size() == 6);
  for (const auto& m : maps) {
    REQUIRE(m.rows() == 3);
    REQUIRE(m.cols() == 3);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const double cond = svd.singularValues().maxCoeff() / svd.singularValues().minCoeff();
    CHECK(cond <= 100.0);
  }
  const auto again = draw_observation_maps(6, 3, 77);
  for (std::size_t i = 0; i < maps.size(); ++i) CHECK(maps[i] == again[i]);

  const auto scalars = draw_observation_maps(4, 1, 3);
  for (const auto& m : scalars) {
    CHECK(std::abs(m(0, 0)) >= 0.5);
    CHECK(std::abs(m(0, 0)) <= 1.5);
  }
}

TEST_CASE("observation transforms data and covariance consistently") {
  auto g = six_step_graph();
  ScmOptions opt;
  opt.d_s = 2;
  const auto p = parameterize(g, opt, 21);
  const auto lay = layout_for(g, p);
  const auto maps = draw_observation_maps(6, 2, 9);
  const auto data = sample(g, p, 500, 33);

  const auto J = observation_jacobian(lay, maps);
  const auto direct = apply_observation(data, lay, maps);
  CHECK((direct - data * J.transpose()).cwiseAbs().maxCoeff() < 1e-12);

  // Identity blocks everywhere except the state slots.
  const int a1 = lay.offset_of(NodeId::action(1));
  CHECK(J(a1, a1) == 1.0);
  const int gi = lay.offset_of(NodeId::task(1));
  CHECK(J(gi, gi) == 1.0);
  CHECK(J.row(a1).sum() == 1.0);

  const auto emp = sample_covariance(data);
  const auto lhs = transformed_covariance(emp, lay, maps);
  const auto rhs = sample_covariance(direct);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-9 * std::max(1.0, rhs.cwiseAbs().maxCoeff()));
}

TEST_CASE("invertible per-step maps preserve conditional independence") {
  auto g = six_step_graph();
  const auto p = parameterize(g, ScmOptions{}, 5);
  const auto lay = layout_for(g, p);
  const auto cov = transformed_covariance(joint_covariance(g, p), lay,
                                          draw_observation_maps(6, 1, 55));
  const int s1 = lay.offset_of(NodeId::state(1));
  const int s2 = lay.offset_of(NodeId::state(2));
  const int s3 = lay.offset_of(NodeId::state(3));
  const int a2 = lay.offset_of(NodeId::action(2));
  CHECK(std::abs(pcor_of(cov, s1, s3, {s2, a2})) < 1e-8);
  CHECK(std::abs(pcor_of(cov, s1, s2, {})) > 0.1);
}

}  // TEST_SUITE
