#pragma once

// Feedforward sigmoid networks with AND/OR-tagged nodes. Networks carry the
// symbolic residue of the theory they came from (node kinds, provenance
// tags); structure-editing operations preserve acyclicity and return new
// values rather than mutating in place.
//
// Conventions used throughout:
//   - net input of a node = sum of incoming weight * activation + bias
//   - activation = sigmoid(net input)
//   - level of a node = longest directed path from it to an output node;
//     output nodes sit at level 0, nodes with no path to an output sink to
//     1 + the deepest level that has one.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "regent/rng.hpp"

namespace regent {

using NodeId = std::uint32_t;

enum class NodeKind { Input, Output, And, Or };

// AND/OR semantics of a node. Hidden nodes mirror their kind; output nodes
// keep the gate of the rule they house.
enum class Gate { And, Or };

struct Node {
  NodeId id = 0;
  NodeKind kind = NodeKind::Input;
  Gate gate = Gate::And;
  double bias = 0.0;              // unused for inputs
  std::string provenance;         // rule symbol, or "added"

  bool operator==(const Node&) const = default;
};

struct Link {
  NodeId source = 0;
  NodeId target = 0;
  double weight = 0.0;

  bool operator==(const Link&) const = default;
};

class NetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Network {
  std::vector<Node> nodes;   // stable creation order
  std::vector<Link> links;   // stable creation order
  std::vector<std::string> feature_names;  // parallel to input_ids
  std::vector<std::string> output_names;   // parallel to output_ids
  std::vector<NodeId> input_ids;
  std::vector<NodeId> output_ids;
  NodeId next_id = 0;

  NodeId add_node(NodeKind kind, Gate gate, double bias,
                  std::string provenance) {
    NodeId id = next_id++;
    nodes.push_back({id, kind, gate, bias, std::move(provenance)});
    return id;
  }

  void add_link(NodeId source, NodeId target, double weight) {
    links.push_back({source, target, weight});
  }

  std::size_t hidden_count() const {
    std::size_t n = 0;
    for (const auto& nd : nodes)
      n += (nd.kind == NodeKind::And || nd.kind == NodeKind::Or) ? 1 : 0;
    return n;
  }

  bool operator==(const Network&) const = default;
};

inline Gate gate_of(const Node& n) {
  switch (n.kind) {
    case NodeKind::And: return Gate::And;
    case NodeKind::Or: return Gate::Or;
    default: return n.gate;
  }
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// ---------------------------------------------------------------------------
// indexing helpers

inline std::unordered_map<NodeId, std::size_t> node_index(const Network& net) {
  std::unordered_map<NodeId, std::size_t> idx;
  idx.reserve(net.nodes.size());
  for (std::size_t i = 0; i < net.nodes.size(); ++i) {
    if (!idx.emplace(net.nodes[i].id, i).second)
      throw NetError("duplicate node id " + std::to_string(net.nodes[i].id));
  }
  return idx;
}

// Node positions in dependency order (sources before targets). Iteration is
// a function of the stored node/link order only, so it is deterministic.
// Throws on cycles and dangling link endpoints.
inline std::vector<std::size_t> topo_order(const Network& net) {
  auto idx = node_index(net);
  std::vector<std::vector<std::size_t>> incoming(net.nodes.size());
  for (const auto& l : net.links) {
    auto s = idx.find(l.source), t = idx.find(l.target);
    if (s == idx.end() || t == idx.end())
      throw NetError("link references missing node");
    incoming[t->second].push_back(s->second);
  }
  std::vector<std::size_t> order;
  order.reserve(net.nodes.size());
  std::vector<int> state(net.nodes.size(), 0);  // 0 new, 1 active, 2 done
  auto visit = [&](auto&& self, std::size_t i) -> void {
    if (state[i] == 2) return;
    if (state[i] == 1) throw NetError("network contains a cycle");
    state[i] = 1;
    for (std::size_t s : incoming[i]) self(self, s);
    state[i] = 2;
    order.push_back(i);
  };
  for (std::size_t i = 0; i < net.nodes.size(); ++i) visit(visit, i);
  return order;
}

// Longest path to an output, per node (parallel to net.nodes).
inline std::vector<int> compute_levels(const Network& net) {
  auto idx = node_index(net);
  auto order = topo_order(net);
  std::vector<std::vector<std::size_t>> targets(net.nodes.size());
  for (const auto& l : net.links)
    targets[idx.at(l.source)].push_back(idx.at(l.target));

  constexpr int kUnreachable = -1;
  std::vector<int> level(net.nodes.size(), kUnreachable);
  // walk targets-first so every target level is final before its sources
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    std::size_t i = *it;
    if (net.nodes[i].kind == NodeKind::Output) {
      level[i] = 0;
      continue;
    }
    for (std::size_t t : targets[i])
      if (level[t] != kUnreachable) level[i] = std::max(level[i], level[t] + 1);
  }
  int deepest = 0;
  for (int l : level) deepest = std::max(deepest, l);
  for (int& l : level)
    if (l == kUnreachable) l = deepest + 1;
  return level;
}

// ---------------------------------------------------------------------------
// forward pass

// Activations for every node (parallel to net.nodes); features are given in
// feature_names order.
inline std::vector<double> forward(const Network& net,
                                   const std::vector<double>& features) {
  if (features.size() != net.input_ids.size())
    throw NetError("feature vector size does not match input count");
  auto idx = node_index(net);
  auto order = topo_order(net);
  std::vector<std::vector<std::pair<std::size_t, double>>> incoming(
      net.nodes.size());
  for (const auto& l : net.links)
    incoming[idx.at(l.target)].push_back({idx.at(l.source), l.weight});

  std::vector<double> act(net.nodes.size(), 0.0);
  for (std::size_t i = 0; i < net.input_ids.size(); ++i)
    act[idx.at(net.input_ids[i])] = features[i];
  for (std::size_t i : order) {
    if (net.nodes[i].kind == NodeKind::Input) continue;
    double x = net.nodes[i].bias;
    for (const auto& [s, w] : incoming[i]) x += w * act[s];
    act[i] = sigmoid(x);
  }
  return act;
}

// Predicted class index. A single output reads as the positive class (index
// 1) when its activation reaches 0.5; multiple outputs take the argmax, ties
// to the lowest output index.
inline int predict(const Network& net, const std::vector<double>& features) {
  auto act = forward(net, features);
  auto idx = node_index(net);
  if (net.output_ids.empty()) throw NetError("network has no outputs");
  if (net.output_ids.size() == 1)
    return act[idx.at(net.output_ids[0])] >= 0.5 ? 1 : 0;
  std::size_t best = 0;
  double best_act = act[idx.at(net.output_ids[0])];
  for (std::size_t o = 1; o < net.output_ids.size(); ++o) {
    double a = act[idx.at(net.output_ids[o])];
    if (a > best_act) {
      best = o;
      best_act = a;
    }
  }
  return static_cast<int>(best);
}

// ---------------------------------------------------------------------------
// structural edits

namespace detail {

inline std::uint64_t link_key(NodeId s, NodeId t) {
  return (static_cast<std::uint64_t>(s) << 32) | t;
}

}  // namespace detail

// Knits neighboring levels together with low-weight links, the way a freshly
// translated theory network is prepared for refinement:
//   (1) every hidden or output node at level L gains a link from every
//       non-output node at level L+1 it is not already linked from;
//   (2) every hidden node additionally gains a link from every input node it
//       is not already linked from.
// New weights are uniform in [-eps, eps]; existing links are untouched and
// no addition may create a cycle or a duplicate.
inline Network add_cross_links(const Network& net, double eps, Rng& rng) {
  Network out = net;
  auto levels = compute_levels(out);
  auto idx = node_index(out);

  std::unordered_set<std::uint64_t> linked;
  std::unordered_map<NodeId, std::vector<NodeId>> adj;
  linked.reserve(out.links.size() * 2);
  for (const auto& l : out.links) {
    linked.insert(detail::link_key(l.source, l.target));
    adj[l.source].push_back(l.target);
  }

  // Nodes with a path to an output. The level ordering already rules out
  // cycles except for links sourced at stranded hidden nodes (their level is
  // the sunk one), so only those need a real path check.
  std::unordered_set<NodeId> reaches_output;
  {
    std::unordered_map<NodeId, std::vector<NodeId>> radj;
    for (const auto& l : out.links) radj[l.target].push_back(l.source);
    std::vector<NodeId> stack(out.output_ids.begin(), out.output_ids.end());
    reaches_output.insert(out.output_ids.begin(), out.output_ids.end());
    while (!stack.empty()) {
      NodeId n = stack.back();
      stack.pop_back();
      for (NodeId s : radj[n])
        if (reaches_output.insert(s).second) stack.push_back(s);
    }
  }

  auto path_exists = [&](NodeId from, NodeId to) {
    std::vector<NodeId> stack{from};
    std::unordered_set<NodeId> seen{from};
    while (!stack.empty()) {
      NodeId n = stack.back();
      stack.pop_back();
      if (n == to) return true;
      for (NodeId t : adj[n])
        if (seen.insert(t).second) stack.push_back(t);
    }
    return false;
  };

  auto try_add = [&](const Node& src, const Node& dst) {
    if (src.id == dst.id) return;
    if (linked.count(detail::link_key(src.id, dst.id))) return;
    bool stranded_src =
        (src.kind == NodeKind::And || src.kind == NodeKind::Or) &&
        !reaches_output.count(src.id);
    if (stranded_src && path_exists(dst.id, src.id)) return;
    out.add_link(src.id, dst.id, rng.uniform(-eps, eps));
    linked.insert(detail::link_key(src.id, dst.id));
    adj[src.id].push_back(dst.id);
  };

  for (const auto& dst : net.nodes) {
    if (dst.kind == NodeKind::Input) continue;
    int want = levels[idx.at(dst.id)] + 1;
    for (const auto& src : net.nodes) {
      if (src.kind == NodeKind::Output) continue;
      if (levels[idx.at(src.id)] != want) continue;
      try_add(src, dst);
    }
  }
  for (const auto& dst : net.nodes) {
    if (dst.kind != NodeKind::And && dst.kind != NodeKind::Or) continue;
    for (NodeId in_id : net.input_ids)
      try_add(net.nodes[idx.at(in_id)], dst);
  }
  return out;
}

// Removes a hidden node and its incident links. If that disconnects an
// output from every input, reachability is restored with low-weight links
// from each input to the stranded output.
inline Network delete_node(const Network& net, NodeId id, double eps,
                           Rng& rng) {
  auto idx = node_index(net);
  auto it = idx.find(id);
  if (it == idx.end()) throw NetError("delete_node: no such node");
  const Node& victim = net.nodes[it->second];
  if (victim.kind != NodeKind::And && victim.kind != NodeKind::Or)
    throw NetError("delete_node: only hidden nodes can be removed");

  Network out = net;
  out.nodes.erase(out.nodes.begin() + static_cast<std::ptrdiff_t>(it->second));
  std::erase_if(out.links,
                [&](const Link& l) { return l.source == id || l.target == id; });

  // reachability check: outputs must still see some input
  std::unordered_map<NodeId, std::vector<NodeId>> adj;
  for (const auto& l : out.links) adj[l.source].push_back(l.target);
  std::unordered_set<NodeId> seen;
  std::vector<NodeId> stack;
  for (NodeId in_id : out.input_ids) {
    seen.insert(in_id);
    stack.push_back(in_id);
  }
  while (!stack.empty()) {
    NodeId n = stack.back();
    stack.pop_back();
    for (NodeId t : adj[n])
      if (seen.insert(t).second) stack.push_back(t);
  }
  std::unordered_set<std::uint64_t> linked;
  for (const auto& l : out.links)
    linked.insert(detail::link_key(l.source, l.target));
  for (NodeId out_id : out.output_ids) {
    if (seen.count(out_id)) continue;
    for (NodeId in_id : out.input_ids)
      if (!linked.count(detail::link_key(in_id, out_id)))
        out.add_link(in_id, out_id, rng.uniform(-eps, eps));
  }
  return out;
}

}  // namespace regent
