#include "segtask/graph.hpp"

#include <algorithm>
#include <cstdio>
#include <deque>
#include <stdexcept>

#include "segtask/random.hpp"

namespace segtask {

namespace {

[[noreturn]] void fail_arg(const std::string& msg) { throw std::invalid_argument(msg); }

}  // namespace

std::string to_string(const NodeId& node) {
  char buf[32];
  const char* prefix = node.kind == NodeKind::State ? "s" : node.kind == NodeKind::Action ? "a" : "g";
  std::snprintf(buf, sizeof(buf), "%s[%d]", prefix, node.index);
  return buf;
}

std::optional<NodeId> parse_node(const std::string& text) {
  if (text.size() < 4 || text[1] != '[' || text.back() != ']') return std::nullopt;
  NodeKind kind;
  switch (text[0]) {
    case 's': kind = NodeKind::State; break;
    case 'a': kind = NodeKind::Action; break;
    case 'g': kind = NodeKind::Task; break;
    default: return std::nullopt;
  }
  int index = 0;
  for (std::size_t p = 2; p + 1 < text.size(); ++p) {
    if (text[p] < '0' || text[p] > '9') return std::nullopt;
    index = index * 10 + (text[p] - '0');
  }
  if (index <= 0) return std::nullopt;
  return NodeId{kind, index};
}

TaskIncidence::TaskIncidence(int segments, int tasks) : segments_(segments), tasks_(tasks) {
  if (segments < 0 || tasks < 0) fail_arg("incidence dimensions must be non-negative");
  cells_.assign(static_cast<std::size_t>(segments) * static_cast<std::size_t>(tasks), 0);
}

TaskIncidence TaskIncidence::from_pairs(int segments, int tasks,
                                        const std::vector<std::pair<int, int>>& pairs) {
  TaskIncidence inc(segments, tasks);
  for (const auto& [segment, task] : pairs) inc.set(segment, task, true);
  return inc;
}

bool TaskIncidence::at(int segment, int task) const {
  if (segment < 1 || segment > segments_ || task < 1 || task > tasks_)
    fail_arg("incidence index out of range");
  return cells_[static_cast<std::size_t>(segment - 1) * tasks_ + (task - 1)] != 0;
}

void TaskIncidence::set(int segment, int task, bool value) {
  if (segment < 1 || segment > segments_ || task < 1 || task > tasks_)
    fail_arg("incidence index out of range");
  cells_[static_cast<std::size_t>(segment - 1) * tasks_ + (task - 1)] = value ? 1 : 0;
}

int TaskIncidence::segments_of_task(int task) const {
  int count = 0;
  for (int k = 1; k <= segments_; ++k) count += at(k, task) ? 1 : 0;
  return count;
}

std::vector<std::pair<int, int>> TaskIncidence::true_cells() const {
  std::vector<std::pair<int, int>> cells;
  for (int k = 1; k <= segments_; ++k)
    for (int i = 1; i <= tasks_; ++i)
      if (at(k, i)) cells.emplace_back(k, i);
  return cells;
}

ConditioningSet::ConditioningSet(std::initializer_list<NodeId> nodes) {
  for (const auto& n : nodes)
    if (!insert(n)) fail_arg("duplicate node in conditioning set: " + segtask::to_string(n));
}

ConditioningSet::ConditioningSet(const std::vector<NodeId>& nodes) {
  for (const auto& n : nodes)
    if (!insert(n)) fail_arg("duplicate node in conditioning set: " + segtask::to_string(n));
}

bool ConditioningSet::insert(NodeId node) {
  if (contains(node)) return false;
  nodes_.push_back(node);
  return true;
}

bool ConditioningSet::contains(NodeId node) const {
  return std::find(nodes_.begin(), nodes_.end(), node) != nodes_.end();
}

bool ConditioningSet::erase(NodeId node) {
  auto it = std::find(nodes_.begin(), nodes_.end(), node);
  if (it == nodes_.end()) return false;
  nodes_.erase(it);
  return true;
}

std::string ConditioningSet::to_string() const {
  std::string out = "{";
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (i) out += ", ";
    out += segtask::to_string(nodes_[i]);
  }
  return out + "}";
}

TemporalGraph::TemporalGraph(int T, int L, const TaskIncidence& incidence,
                             const std::vector<bool>& connected_boundaries)
    : T_(T), L_(L), incidence_(incidence), connected_(connected_boundaries) {
  if (T < 2) fail_arg("T must be at least 2");
  if (L < 2) fail_arg("segment length L must be at least 2");
  if (T % L != 0) fail_arg("T must be a multiple of the segment length L");
  const int N = T / L;
  if (incidence.segments() != N)
    fail_arg("incidence has " + std::to_string(incidence.segments()) + " segment rows, expected " +
             std::to_string(N));
  if (static_cast<int>(connected_boundaries.size()) != T - 1)
    fail_arg("boundary list must have T-1 entries");
  for (int i = 1; i <= incidence.tasks(); ++i)
    if (incidence.segments_of_task(i) < 2)
      fail_arg("task " + std::to_string(i) + " must be attached to at least two segments");

  const int n = node_count();
  parents_.assign(n, {});
  children_.assign(n, {});
  auto add_edge = [&](NodeId from, NodeId to) {
    children_[node_ordinal(from)].push_back(to);
    parents_[node_ordinal(to)].push_back(from);
  };
  for (int t = 1; t <= T_; ++t) {
    add_edge(NodeId::state(t), NodeId::action(t));
    if (t < T_ && boundary_connected(t)) {
      add_edge(NodeId::state(t), NodeId::state(t + 1));
      add_edge(NodeId::action(t), NodeId::state(t + 1));
    }
  }
  for (int t = 1; t <= T_; ++t)
    for (int i = 1; i <= M(); ++i)
      if (incidence_.at(segment_of(t), i)) add_edge(NodeId::action(t), NodeId::task(i));
  for (auto& list : parents_) std::sort(list.begin(), list.end());
  for (auto& list : children_) std::sort(list.begin(), list.end());
}

int TemporalGraph::segment_of(int t) const {
  if (t < 1 || t > T_) fail_arg("time step out of range");
  return (t - 1) / L_ + 1;
}

bool TemporalGraph::boundary_connected(int t) const {
  if (t < 1 || t >= T_) fail_arg("boundary index out of range");
  return connected_[t - 1];
}

bool TemporalGraph::contains(NodeId node) const {
  switch (node.kind) {
    case NodeKind::State:
    case NodeKind::Action: return node.index >= 1 && node.index <= T_;
    case NodeKind::Task: return node.index >= 1 && node.index <= M();
  }
  return false;
}

void TemporalGraph::check_node(NodeId node) const {
  if (!contains(node)) fail_arg("unknown node " + segtask::to_string(node));
}

bool TemporalGraph::has_edge(NodeId from, NodeId to) const {
  check_node(from);
  check_node(to);
  const auto& ch = children_[node_ordinal(from)];
  return std::binary_search(ch.begin(), ch.end(), to);
}

const std::vector<NodeId>& TemporalGraph::parents(NodeId node) const {
  check_node(node);
  return parents_[node_ordinal(node)];
}

const std::vector<NodeId>& TemporalGraph::children(NodeId node) const {
  check_node(node);
  return children_[node_ordinal(node)];
}

std::vector<NodeId> TemporalGraph::nodes() const {
  std::vector<NodeId> all;
  all.reserve(node_count());
  for (int t = 1; t <= T_; ++t) all.push_back(NodeId::state(t));
  for (int t = 1; t <= T_; ++t) all.push_back(NodeId::action(t));
  for (int i = 1; i <= M(); ++i) all.push_back(NodeId::task(i));
  return all;
}

int TemporalGraph::node_ordinal(NodeId node) const {
  switch (node.kind) {
    case NodeKind::State: return node.index - 1;
    case NodeKind::Action: return T_ + node.index - 1;
    case NodeKind::Task: return 2 * T_ + node.index - 1;
  }
  return -1;
}

NodeId TemporalGraph::node_at(int ordinal) const {
  if (ordinal < T_) return NodeId::state(ordinal + 1);
  if (ordinal < 2 * T_) return NodeId::action(ordinal - T_ + 1);
  return NodeId::task(ordinal - 2 * T_ + 1);
}

TemporalGraph build_graph(int T, int L, int M, const TaskIncidence& incidence,
                          const std::vector<bool>& connected_boundaries) {
  if (incidence.tasks() != M)
    fail_arg("incidence has " + std::to_string(incidence.tasks()) + " task columns, expected " +
             std::to_string(M));
  return TemporalGraph(T, L, incidence, connected_boundaries);
}

ConditioningSet band_set(int k, int v, int i, int L, int T) {
  if (L < 2) fail_arg("segment length L must be at least 2");
  if (T % L != 0) fail_arg("T must be a multiple of the segment length L");
  const int N = T / L;
  if (k < 1 || v > N || k >= v) fail_arg("need 1 <= k < v <= N");
  if (i < 1) fail_arg("task id must be positive");
  return local_band_set(k * L, v * L, i, T);
}

ConditioningSet local_band_set(int j, int q, int i, int T) {
  if (j < 1 || q > T || j >= q) fail_arg("need 1 <= j < q <= T");
  if (i < 1) fail_arg("task id must be positive");
  ConditioningSet z;
  int candidates[4] = {j - 1, j + 1, q - 1, q + 1};
  std::sort(std::begin(candidates), std::end(candidates));
  for (int t : candidates)
    if (t >= 1 && t <= T) z.insert(NodeId::state(t));
  z.insert(NodeId::task(i));
  return z;
}

bool d_separated(const TemporalGraph& g, NodeId x, NodeId y, const ConditioningSet& z) {
  if (!g.contains(x)) fail_arg("unknown node " + to_string(x));
  if (!g.contains(y)) fail_arg("unknown node " + to_string(y));
  if (x == y) fail_arg("query endpoints must differ");
  for (const auto& n : z)
    if (!g.contains(n)) fail_arg("unknown node " + to_string(n));
  if (z.contains(x) || z.contains(y)) fail_arg("query endpoints must not be conditioned on");

  const int n = g.node_count();
  std::vector<char> in_z(n, 0);
  for (const auto& node : z) in_z[g.node_ordinal(node)] = 1;

  // Nodes with a descendant in z (z itself included): exactly the colliders
  // that conditioning opens. Walk parent edges upward from z.
  std::vector<char> openable(n, 0);
  {
    std::deque<int> queue;
    for (const auto& node : z) {
      const int o = g.node_ordinal(node);
      if (!openable[o]) {
        openable[o] = 1;
        queue.push_back(o);
      }
    }
    while (!queue.empty()) {
      const int o = queue.front();
      queue.pop_front();
      for (const auto& p : g.parents(g.node_at(o))) {
        const int po = g.node_ordinal(p);
        if (!openable[po]) {
          openable[po] = 1;
          queue.push_back(po);
        }
      }
    }
  }

  // Reachability over (node, arrival) pairs. arrival_into = the trail's last
  // edge points into the node; continuing through an in-edge then makes it a
  // collider (needs openable), any other combination a non-collider (blocked
  // exactly when conditioned).
  struct State {
    int node;
    bool arrival_into;
  };
  std::vector<std::array<char, 2>> seen(n, {0, 0});
  std::deque<State> frontier;
  const int yo = g.node_ordinal(y);

  auto push = [&](NodeId node, bool arrival_into) {
    const int o = g.node_ordinal(node);
    if (seen[o][arrival_into ? 1 : 0]) return;
    seen[o][arrival_into ? 1 : 0] = 1;
    frontier.push_back({o, arrival_into});
  };

  for (const auto& c : g.children(x)) push(c, true);
  for (const auto& p : g.parents(x)) push(p, false);

  while (!frontier.empty()) {
    const State s = frontier.front();
    frontier.pop_front();
    if (s.node == yo) return false;
    const NodeId node = g.node_at(s.node);
    if (s.arrival_into) {
      if (!in_z[s.node])
        for (const auto& c : g.children(node)) push(c, true);
      if (openable[s.node])
        for (const auto& p : g.parents(node)) push(p, false);
    } else {
      if (!in_z[s.node]) {
        for (const auto& c : g.children(node)) push(c, true);
        for (const auto& p : g.parents(node)) push(p, false);
      }
    }
  }
  return true;
}

std::vector<int> relevant_tasks(const TemporalGraph& g, int segment) {
  if (segment < 1 || segment > g.segment_count()) fail_arg("segment out of range");
  std::vector<int> tasks;
  for (int i = 1; i <= g.M(); ++i)
    if (g.incidence().at(segment, i)) tasks.push_back(i);
  return tasks;
}

namespace {

struct PathSearch {
  const TemporalGraph& g;
  const ConditioningSet& z;
  int max_len;
  NodeId target;
  std::vector<char> in_z;
  std::vector<char> openable;
  std::vector<char> on_path;
  std::vector<NodeId> nodes;
  std::vector<bool> arrived_into;  // parallel to nodes, [0] unused
  std::vector<TaggedPath> out;

  bool blocked_interior(int position, bool leave_into) const {
    // Node at `position` has both incident path edges fixed once we pick the
    // next hop: entered with arrived_into[position], left via an edge that
    // points into it iff leave_into.
    const bool collider = arrived_into[position] && leave_into;
    const int o = g.node_ordinal(nodes[position]);
    if (collider) return !openable[o];
    return in_z[o] != 0;
  }

  void emit() {
    TaggedPath path;
    path.nodes = nodes;
    path.is_collider.assign(nodes.size(), false);
    // Interior node p is a collider iff both incident path edges point into
    // it: entered via an in-edge and the hop to p+1 was traversed backwards.
    for (std::size_t p = 1; p + 1 < nodes.size(); ++p)
      path.is_collider[p] = arrived_into[p] && !arrived_into[p + 1];
    out.push_back(std::move(path));
  }

  void extend(NodeId next, bool into_next) {
    const int o = g.node_ordinal(next);
    if (on_path[o]) return;
    if (static_cast<int>(nodes.size()) > max_len && next != target) return;
    // Check the node we are leaving now that both its edges are known; the
    // exit edge points into it exactly when the hop is against direction.
    if (nodes.size() > 1 && blocked_interior(static_cast<int>(nodes.size()) - 1, !into_next))
      return;
    nodes.push_back(next);
    arrived_into.push_back(into_next);
    on_path[o] = 1;
    if (next == target) {
      emit();
    } else {
      grow();
    }
    on_path[o] = 0;
    nodes.pop_back();
    arrived_into.pop_back();
  }

  void grow() {
    if (static_cast<int>(nodes.size()) > max_len) return;
    const NodeId tip = nodes.back();
    for (const auto& c : g.children(tip)) extend(c, true);
    for (const auto& p : g.parents(tip)) extend(p, false);
  }
};

}  // namespace

std::vector<TaggedPath> enumerate_connecting_paths(const TemporalGraph& g, NodeId x, NodeId y,
                                                   const ConditioningSet& z, int max_len) {
  if (max_len < 4) fail_arg("max_len must be at least 4");
  if (!g.contains(x)) fail_arg("unknown node " + to_string(x));
  if (!g.contains(y)) fail_arg("unknown node " + to_string(y));
  if (x == y) fail_arg("query endpoints must differ");
  if (z.contains(x) || z.contains(y)) fail_arg("query endpoints must not be conditioned on");

  const int n = g.node_count();
  PathSearch search{g, z, max_len, y, std::vector<char>(n, 0), std::vector<char>(n, 0),
                    std::vector<char>(n, 0), {}, {}, {}};
  for (const auto& node : z) search.in_z[g.node_ordinal(node)] = 1;
  {
    std::deque<int> queue;
    for (const auto& node : z) {
      const int o = g.node_ordinal(node);
      if (!search.openable[o]) {
        search.openable[o] = 1;
        queue.push_back(o);
      }
    }
    while (!queue.empty()) {
      const int o = queue.front();
      queue.pop_front();
      for (const auto& p : g.parents(g.node_at(o))) {
        const int po = g.node_ordinal(p);
        if (!search.openable[po]) {
          search.openable[po] = 1;
          queue.push_back(po);
        }
      }
    }
  }
  search.nodes.push_back(x);
  search.arrived_into.push_back(false);
  search.on_path[g.node_ordinal(x)] = 1;
  search.grow();
  return std::move(search.out);
}

std::optional<PathShape> classify_connecting_path(const TaggedPath& path, int j, int q, int i) {
  const auto& n = path.nodes;
  if (n.size() < 5 || n.size() > 7) return std::nullopt;
  if (n.front() != NodeId::state(j) || n.back() != NodeId::state(q)) return std::nullopt;

  const NodeId task = NodeId::task(i);
  // Locate the unique task node.
  int task_pos = -1;
  for (std::size_t p = 0; p < n.size(); ++p) {
    if (n[p].kind == NodeKind::Task) {
      if (n[p] != task || task_pos != -1) return std::nullopt;
      task_pos = static_cast<int>(p);
    }
  }
  if (task_pos == -1) return std::nullopt;

  PathShape shape{};
  const int left_len = task_pos;                                    // edges from s_j to task
  const int right_len = static_cast<int>(n.size()) - 1 - task_pos;  // edges from task to s_q

  if (left_len == 2) {
    if (n[1] == NodeId::action(j))
      shape.left = PathAttachment::OwnAction;
    else if (n[1] == NodeId::action(j - 1))
      shape.left = PathAttachment::PrecedingAction;
    else
      return std::nullopt;
  } else if (left_len == 3) {
    if (n[1] != NodeId::state(j + 1) || n[2] != NodeId::action(j)) return std::nullopt;
    shape.left = PathAttachment::BoundaryCollider;
  } else {
    return std::nullopt;
  }

  const auto& r1 = n[task_pos + 1];
  if (right_len == 2) {
    if (r1 == NodeId::action(q))
      shape.right = PathAttachment::OwnAction;
    else if (r1 == NodeId::action(q - 1))
      shape.right = PathAttachment::PrecedingAction;
    else
      return std::nullopt;
  } else if (right_len == 3) {
    if (r1 != NodeId::action(q) || n[task_pos + 2] != NodeId::state(q + 1)) return std::nullopt;
    shape.right = PathAttachment::BoundaryCollider;
  } else {
    return std::nullopt;
  }
  return shape;
}

TemporalGraph random_graph(const RandomGraphSpec& spec) {
  if (spec.T < 2 * spec.L) fail_arg("random graphs need at least two segments");
  if (spec.L < 2) fail_arg("segment length L must be at least 2");
  if (spec.T % spec.L != 0) fail_arg("T must be a multiple of the segment length L");
  if (spec.M < 1) fail_arg("random graphs need at least one task");
  Rng rng(derive_seed(spec.seed, 0xfeedULL));
  const int N = spec.T / spec.L;

  std::vector<bool> connected(spec.T - 1, true);
  for (int k = 1; k < N; ++k)
    if (rng.bernoulli(spec.disconnect_prob)) connected[k * spec.L - 1] = false;

  TaskIncidence inc(N, spec.M);
  for (int k = 1; k <= N; ++k)
    for (int i = 1; i <= spec.M; ++i)
      if (rng.bernoulli(spec.incidence_density)) inc.set(k, i, true);
  for (int i = 1; i <= spec.M; ++i) {
    while (inc.segments_of_task(i) < 2) {
      const int k = rng.uniform_int(1, N);
      if (!inc.at(k, i)) inc.set(k, i, true);
    }
  }
  return build_graph(spec.T, spec.L, spec.M, inc, connected);
}

}  // namespace segtask
