#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "segtask/ci.hpp"
#include "segtask/graph.hpp"

namespace segtask {

struct QueryRecord {
  int k = 0;  // earlier segment
  int v = 0;  // later segment
  int i = 0;  // task
  double statistic = 0.0;
  std::optional<double> p_value;
  bool dependent = false;
};

struct DiscoveryResult {
  TaskIncidence incidence;
  // step_labels[t-1] lists the tasks attached to the segment of step t.
  std::vector<std::vector<int>> step_labels;
  std::vector<QueryRecord> queries;
};

// Verdict provider for one segment-pair query; lets tests inject corrupted
// answers without faking a data backend.
using QueryFn = std::function<CiResult(int k, int v, int i)>;

// Runs every query (i, k, v) in lexicographic order, i outermost: a task is
// attached to segments k and v exactly when the pair tests dependent.
// Exactly M * N(N-1)/2 queries for N = T/L segments.
DiscoveryResult discover_structure(int T, int L, int M, const QueryFn& query);

// Same loop with verdicts from the engine: x = s_{kL}, y = s_{vL},
// conditioning on the band set of (k, v, i).
DiscoveryResult discover_structure(const CiContext& ctx, int L);

// How to pick the representative step of each segment for the
// representative-based variant. Steps below the second step of a segment are
// never picked: the step before a segment-first representative belongs to
// the previous segment and leaks its task edges into the query.
struct RepRule {
  enum class Kind { RightBoundary, MidSegment, RandomInterior };
  Kind kind = Kind::RightBoundary;
  std::uint64_t seed = 0;

  static RepRule right_boundary() { return {Kind::RightBoundary, 0}; }
  static RepRule mid_segment() { return {Kind::MidSegment, 0}; }
  static RepRule random_interior(std::uint64_t seed) { return {Kind::RandomInterior, seed}; }
};

// Representative step of every segment, in segment order. All rules pick
// from [(k-1)L + 2, kL].
std::vector<int> representatives(int T, int L, const RepRule& rule);

// Discovery with per-segment representatives j_k instead of the boundary
// steps: x = s_{j_k}, y = s_{j_v}, conditioning on the local band set.
DiscoveryResult discover_with_representatives(const CiContext& ctx, int L, const RepRule& rule);

bool verify_exact_recovery(const DiscoveryResult& result, const TaskIncidence& truth);

struct RecoveryReport {
  int correct_cells = 0;
  int total_cells = 0;
  // (segment, task) cells where the estimate disagrees with the truth.
  std::vector<std::pair<int, int>> mismatches;
};

RecoveryReport verify_recovery(const DiscoveryResult& result, const TaskIncidence& truth);

}  // namespace segtask
