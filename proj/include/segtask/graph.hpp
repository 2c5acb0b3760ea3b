#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace segtask {

// Node kinds of the temporal model: per-step states s_t and actions a_t,
// plus sink task nodes g_i that collect actions from the segments they
// depend on. Enumerator order fixes the canonical node order.
enum class NodeKind : std::uint8_t { State = 0, Action = 1, Task = 2 };

struct NodeId {
  NodeKind kind = NodeKind::State;
  int index = 0;  // time step for State/Action, task id for Task; 1-based

  static NodeId state(int t) { return {NodeKind::State, t}; }
  static NodeId action(int t) { return {NodeKind::Action, t}; }
  static NodeId task(int i) { return {NodeKind::Task, i}; }

  friend constexpr auto operator<=>(const NodeId&, const NodeId&) = default;
};

// "s[4]", "a[3]", "g[1]"
std::string to_string(const NodeId& node);
std::optional<NodeId> parse_node(const std::string& text);

// Segment-by-task boolean incidence: entry (k, i) says segment k feeds
// task i. Rows are segments 1..N, columns tasks 1..M.
class TaskIncidence {
 public:
  TaskIncidence() = default;
  TaskIncidence(int segments, int tasks);
  static TaskIncidence from_pairs(int segments, int tasks,
                                  const std::vector<std::pair<int, int>>& segment_task_pairs);

  bool at(int segment, int task) const;
  void set(int segment, int task, bool value);
  int segments() const { return segments_; }
  int tasks() const { return tasks_; }
  int segments_of_task(int task) const;  // how many segments feed the task
  // (segment, task) pairs of true cells, row-major order.
  std::vector<std::pair<int, int>> true_cells() const;

  friend bool operator==(const TaskIncidence&, const TaskIncidence&) = default;

 private:
  int segments_ = 0;
  int tasks_ = 0;
  std::vector<char> cells_;
};

// Ordered set of nodes used to condition an independence query.
// Duplicates are rejected; iteration order is insertion order.
class ConditioningSet {
 public:
  ConditioningSet() = default;
  ConditioningSet(std::initializer_list<NodeId> nodes);
  explicit ConditioningSet(const std::vector<NodeId>& nodes);

  // False (and no change) if the node is already present.
  bool insert(NodeId node);
  bool contains(NodeId node) const;
  bool erase(NodeId node);
  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  auto begin() const { return nodes_.begin(); }
  auto end() const { return nodes_.end(); }
  const std::vector<NodeId>& nodes() const { return nodes_; }
  std::string to_string() const;

  friend bool operator==(const ConditioningSet&, const ConditioningSet&) = default;

 private:
  std::vector<NodeId> nodes_;
};

// Directed acyclic graph over T states, T actions and M task sinks.
//   s_t -> a_t                   always
//   s_t -> s_{t+1}, a_t -> s_{t+1}   iff boundary t is connected
//   a_t -> g_i                   iff the segment containing t feeds task i
// Steps 1..T split into N = T/L segments of length L; tasks never have
// outgoing edges.
class TemporalGraph {
 public:
  TemporalGraph() = default;
  TemporalGraph(int T, int L, const TaskIncidence& incidence,
                const std::vector<bool>& connected_boundaries);

  int T() const { return T_; }
  int L() const { return L_; }
  int M() const { return incidence_.tasks(); }
  int segment_count() const { return incidence_.segments(); }
  int segment_of(int t) const;  // 1-based step -> 1-based segment
  const TaskIncidence& incidence() const { return incidence_; }
  // Boundary t sits between steps t and t+1; t in 1..T-1.
  bool boundary_connected(int t) const;
  const std::vector<bool>& boundaries() const { return connected_; }

  bool contains(NodeId node) const;
  bool has_edge(NodeId from, NodeId to) const;
  const std::vector<NodeId>& parents(NodeId node) const;
  const std::vector<NodeId>& children(NodeId node) const;
  std::vector<NodeId> nodes() const;  // canonical order: states, actions, tasks
  int node_count() const { return 2 * T_ + M(); }

  // Dense 0-based index in canonical order; inverse of nodes()[i].
  int node_ordinal(NodeId node) const;
  NodeId node_at(int ordinal) const;

  friend bool operator==(const TemporalGraph&, const TemporalGraph&) = default;

 private:
  void check_node(NodeId node) const;

  int T_ = 0;
  int L_ = 0;
  TaskIncidence incidence_;
  std::vector<bool> connected_;
  std::vector<std::vector<NodeId>> parents_;
  std::vector<std::vector<NodeId>> children_;
};

// Validating constructor wrapper: L >= 2, L | T, every task attached to at
// least two segments, boundary list of length T-1.
TemporalGraph build_graph(int T, int L, int M, const TaskIncidence& incidence,
                          const std::vector<bool>& connected_boundaries);

// Conditioning set for the segment-boundary query on (k, v, i):
// {s_{kL-1}, s_{kL+1}, s_{vL-1}, s_{vL+1}} clipped to 1..T, plus g_i.
// States come first in ascending time order, the task node last.
ConditioningSet band_set(int k, int v, int i, int L, int T);

// Same construction around arbitrary in-segment representatives j < q:
// {s_{j-1}, s_{j+1}, s_{q-1}, s_{q+1}} clipped to 1..T, plus g_i.
ConditioningSet local_band_set(int j, int q, int i, int T);

// Classic d-separation via typed reachability. x != y, neither in z.
bool d_separated(const TemporalGraph& g, NodeId x, NodeId y, const ConditioningSet& z);

// Task ids attached to a segment, ascending.
std::vector<int> relevant_tasks(const TemporalGraph& g, int segment);

struct TaggedPath {
  std::vector<NodeId> nodes;
  std::vector<bool> is_collider;  // parallel to nodes; endpoints false
  int length() const { return static_cast<int>(nodes.size()) - 1; }
};

// All simple paths between x and y of at most max_len edges that are
// d-connecting given z. Deterministic order (DFS over canonically sorted
// neighbourhoods). max_len must be >= 4.
std::vector<TaggedPath> enumerate_connecting_paths(const TemporalGraph& g, NodeId x, NodeId y,
                                                   const ConditioningSet& z, int max_len = 8);

// Structure of a connecting path between in-segment states s_j and s_q
// under a band-style conditioning set. The path always bridges through the
// conditioned task; each end attaches to the task in one of three ways:
//   OwnAction        s_j -> a_j -> g            (mirrored on the right)
//   PrecedingAction  s_j <- a_{j-1} -> g
//   BoundaryCollider s_j -> s_{j+1} <- a_j -> g   (opened conditioned collider)
// The first two give the classic length-4 shapes; the third appears when
// the boundary after j (resp. q) is connected and adds one edge.
enum class PathAttachment { OwnAction, PrecedingAction, BoundaryCollider };

struct PathShape {
  PathAttachment left;
  PathAttachment right;
  // True for the four length-4 shapes (no boundary-collider detour).
  bool canonical() const {
    return left != PathAttachment::BoundaryCollider && right != PathAttachment::BoundaryCollider;
  }
};

// Classifies a path from s_j to s_q bridging task i; nullopt if the node
// sequence does not match any of the nine shapes.
std::optional<PathShape> classify_connecting_path(const TaggedPath& path, int j, int q, int i);

// Random instances used by property tests and sweeps. Boundaries inside a
// segment stay connected; each boundary between consecutive segments is cut
// with probability disconnect_prob (both incoming edges of s_{t+1} drop).
// Incidence cells are Bernoulli(incidence_density), then columns are padded
// with uniformly chosen extra segments until each task has at least two.
struct RandomGraphSpec {
  int T = 10;
  int L = 2;
  int M = 2;
  double disconnect_prob = 0.2;
  double incidence_density = 0.5;
  std::uint64_t seed = 0;
};

TemporalGraph random_graph(const RandomGraphSpec& spec);

}  // namespace segtask
