#include "segtask/discovery.hpp"

#include <stdexcept>

#include "segtask/random.hpp"

namespace segtask {

namespace {

[[noreturn]] void fail_arg(const std::string& msg) { throw std::invalid_argument(msg); }

void check_shape(int T, int L, int M) {
  if (L < 2) fail_arg("segment length L must be at least 2");
  if (T < 2 * L || T % L != 0) fail_arg("T must be a multiple of L with at least two segments");
  if (M < 0) fail_arg("task count must be non-negative");
}

std::vector<std::vector<int>> labels_from(const TaskIncidence& inc, int T, int L) {
  std::vector<std::vector<int>> labels(T);
  for (int t = 1; t <= T; ++t) {
    const int segment = (t - 1) / L + 1;
    for (int i = 1; i <= inc.tasks(); ++i)
      if (inc.at(segment, i)) labels[t - 1].push_back(i);
  }
  return labels;
}

}  // namespace

DiscoveryResult discover_structure(int T, int L, int M, const QueryFn& query) {
  check_shape(T, L, M);
  const int N = T / L;
  DiscoveryResult result;
  result.incidence = TaskIncidence(N, M);
  for (int i = 1; i <= M; ++i) {
    for (int k = 1; k < N; ++k) {
      for (int v = k + 1; v <= N; ++v) {
        const CiResult verdict = query(k, v, i);
        result.queries.push_back(
            {k, v, i, verdict.statistic, verdict.p_value, verdict.dependent});
        if (verdict.dependent) {
          result.incidence.set(k, i, true);
          result.incidence.set(v, i, true);
        }
      }
    }
  }
  result.step_labels = labels_from(result.incidence, T, L);
  return result;
}

DiscoveryResult discover_structure(const CiContext& ctx, int L) {
  const int T = ctx.layout().T();
  const int M = ctx.layout().M();
  check_shape(T, L, M);
  return discover_structure(T, L, M, [&](int k, int v, int i) {
    return ctx.query(NodeId::state(k * L), NodeId::state(v * L), band_set(k, v, i, L, T));
  });
}

std::vector<int> representatives(int T, int L, const RepRule& rule) {
  check_shape(T, L, 0);
  const int N = T / L;
  std::vector<int> reps(N);
  for (int k = 1; k <= N; ++k) {
    const int lo = (k - 1) * L + 2;  // first safe step of the segment
    const int hi = k * L;
    switch (rule.kind) {
      case RepRule::Kind::RightBoundary: reps[k - 1] = hi; break;
      case RepRule::Kind::MidSegment: reps[k - 1] = (k - 1) * L + 1 + L / 2; break;
      case RepRule::Kind::RandomInterior: {
        Rng rng(derive_seed(rule.seed, static_cast<std::uint64_t>(k)));
        reps[k - 1] = rng.uniform_int(lo, hi);
        break;
      }
    }
  }
  return reps;
}

DiscoveryResult discover_with_representatives(const CiContext& ctx, int L, const RepRule& rule) {
  const int T = ctx.layout().T();
  const int M = ctx.layout().M();
  check_shape(T, L, M);
  const auto reps = representatives(T, L, rule);
  return discover_structure(T, L, M, [&](int k, int v, int i) {
    const int j = reps[k - 1];
    const int q = reps[v - 1];
    return ctx.query(NodeId::state(j), NodeId::state(q), local_band_set(j, q, i, T));
  });
}

bool verify_exact_recovery(const DiscoveryResult& result, const TaskIncidence& truth) {
  return result.incidence == truth;
}

RecoveryReport verify_recovery(const DiscoveryResult& result, const TaskIncidence& truth) {
  if (result.incidence.segments() != truth.segments() || result.incidence.tasks() != truth.tasks())
    fail_arg("estimate and truth have different shapes");
  RecoveryReport report;
  report.total_cells = truth.segments() * truth.tasks();
  for (int k = 1; k <= truth.segments(); ++k) {
    for (int i = 1; i <= truth.tasks(); ++i) {
      if (result.incidence.at(k, i) == truth.at(k, i))
        ++report.correct_cells;
      else
        report.mismatches.emplace_back(k, i);
    }
  }
  return report;
}

}  // namespace segtask
