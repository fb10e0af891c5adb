#pragma once

// TopGen: heuristic topology search seeded by a translated (or otherwise
// constructed) network. Misclassifications are blamed on individual nodes by
// walking heavy links from the offending outputs; the search expands the
// best candidate so far by adding a node where the blame is concentrated,
// retrains each child, and keeps going until the trained-network budget runs
// out.
//
// Blame semantics per misclassified example: a false negative at a node
// means its activation should have been higher; crossing a positive link
// keeps the sense, crossing a negative link flips it. Only links with
// |weight| >= tau are followed, only hidden sources are descended into, and
// each (node, sense) pair is counted at most once per example.
//
// Node additions (omega is the rule weight, eps the low-weight scale; a
// fresh node is an And over low links from every input, bias +omega/2 so it
// starts near true and training can carve out a meaning):
//   false negative at an Or: new conjunction feeding it with weight +omega;
//   false negative at an And: splice an Or above it, the node and a fresh
//     sibling become its disjuncts;
//   false positive at an And: new conjunct child, parent bias -= omega;
//   false positive at an Or: splice an And above it with a fresh second
//     conjunct.
// A splice at an output hands the output role to the new top node.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

#include "regent/candidate.hpp"
#include "regent/example.hpp"
#include "regent/network.hpp"
#include "regent/rng.hpp"
#include "regent/train.hpp"

namespace regent {

enum class ErrorKind { FalseNegative, FalsePositive };

struct NodeErrorStats {
  std::vector<int> fn;  // parallel to net.nodes
  std::vector<int> fp;
};

inline NodeErrorStats attribute_errors(const Network& net,
                                       const Examples& examples,
                                       double tau = 1.0) {
  NodeErrorStats stats;
  stats.fn.assign(net.nodes.size(), 0);
  stats.fp.assign(net.nodes.size(), 0);
  auto idx = node_index(net);

  std::vector<std::vector<std::pair<std::size_t, double>>> incoming(
      net.nodes.size());
  for (const auto& l : net.links)
    incoming[idx.at(l.target)].push_back({idx.at(l.source), l.weight});

  std::vector<std::size_t> out_pos;
  for (NodeId oid : net.output_ids) out_pos.push_back(idx.at(oid));
  bool single = out_pos.size() == 1;

  std::vector<char> seen(2 * net.nodes.size());
  std::vector<std::pair<std::size_t, bool>> stack;  // (node index, is FN)
  for (const auto& ex : examples) {
    auto act = forward(net, ex.features);
    int pred;
    if (single) {
      pred = act[out_pos[0]] >= 0.5 ? 1 : 0;
    } else {
      std::size_t best = 0;
      for (std::size_t o = 1; o < out_pos.size(); ++o)
        if (act[out_pos[o]] > act[out_pos[best]]) best = o;
      pred = static_cast<int>(best);
    }
    if (pred == ex.label) continue;

    std::fill(seen.begin(), seen.end(), 0);
    stack.clear();
    if (single) {
      stack.push_back({out_pos[0], ex.label == 1});
    } else {
      if (ex.label < 0 || static_cast<std::size_t>(ex.label) >= out_pos.size())
        throw NetError("example label out of range for this network");
      stack.push_back({out_pos[static_cast<std::size_t>(ex.label)], true});
      stack.push_back({out_pos[static_cast<std::size_t>(pred)], false});
    }
    while (!stack.empty()) {
      auto [i, is_fn] = stack.back();
      stack.pop_back();
      char& mark = seen[2 * i + (is_fn ? 1 : 0)];
      if (mark) continue;
      mark = 1;
      (is_fn ? stats.fn : stats.fp)[i] += 1;
      for (auto [src, w] : incoming[i]) {
        NodeKind k = net.nodes[src].kind;
        if (k != NodeKind::And && k != NodeKind::Or) continue;
        if (w < tau && w > -tau) continue;
        stack.push_back({src, (w > 0) == is_fn});
      }
    }
  }
  return stats;
}

struct TopGenParams {
  double omega = 4.0;
  double low_weight = 0.05;
  double tau = 1.0;
  int children_per_expansion = 4;
  std::size_t budget = 20;  // total networks trained, seed included
  TrainParams train;
  std::uint64_t seed = 0;

  void validate() const {
    if (omega <= 0.0) throw std::invalid_argument("omega must be positive");
    if (tau < 0.0) throw std::invalid_argument("tau must be non-negative");
    if (children_per_expansion < 1)
      throw std::invalid_argument("children_per_expansion must be at least 1");
    if (budget < 1) throw std::invalid_argument("budget must be at least 1");
  }
};

namespace detail {

inline NodeId fresh_conjunction(Network& net, double omega, double eps,
                                Rng& rng) {
  NodeId id = net.add_node(NodeKind::And, Gate::And, omega / 2.0, "added");
  for (NodeId in : net.input_ids)
    net.add_link(in, id, rng.uniform(-eps, eps));
  return id;
}

// Reroutes every link out of `at` to `top`, wires `at` and a fresh sibling
// into `top`, and transfers the output role when `at` is an output.
inline void splice_above(Network& net, NodeId at, NodeKind top_kind,
                         double top_bias, double omega, double eps, Rng& rng) {
  Gate top_gate = top_kind == NodeKind::Or ? Gate::Or : Gate::And;
  NodeId top = net.add_node(top_kind, top_gate, top_bias, "added");
  for (auto& l : net.links)
    if (l.source == at && l.target != top) l.source = top;
  std::size_t at_i = 0, top_i = 0;
  for (std::size_t i = 0; i < net.nodes.size(); ++i) {
    if (net.nodes[i].id == at) at_i = i;
    if (net.nodes[i].id == top) top_i = i;
  }
  Node& atn = net.nodes[at_i];
  Node& topn = net.nodes[top_i];
  if (atn.kind == NodeKind::Output) {
    topn.kind = NodeKind::Output;
    atn.kind = atn.gate == Gate::Or ? NodeKind::Or : NodeKind::And;
    for (auto& oid : net.output_ids)
      if (oid == at) oid = top;
  }
  net.add_link(at, top, omega);
  NodeId sibling = fresh_conjunction(net, omega, eps, rng);
  net.add_link(sibling, top, omega);
}

}  // namespace detail

// Applies one corrective addition at `at` and re-randomizes cross links.
inline void add_node_for_error(Network& net, NodeId at, ErrorKind kind,
                               double omega, double eps, Rng& rng) {
  Gate g = gate_of(net.nodes[node_index(net).at(at)]);
  double om = omega;
  if (kind == ErrorKind::FalseNegative) {
    if (g == Gate::Or) {
      NodeId child = detail::fresh_conjunction(net, om, eps, rng);
      net.add_link(child, at, om);
    } else {
      detail::splice_above(net, at, NodeKind::Or, -om / 2.0, om, eps, rng);
    }
  } else {
    if (g == Gate::And) {
      NodeId child = detail::fresh_conjunction(net, om, eps, rng);
      net.add_link(child, at, om);
      for (auto& n : net.nodes)
        if (n.id == at) n.bias -= om;
    } else {
      detail::splice_above(net, at, NodeKind::And, -1.5 * om, om, eps, rng);
    }
  }
  add_cross_links(net, eps, rng);
}

// Uniformly chosen addition: random non-input node, random error sense.
inline void random_addition(Network& net, double omega, double eps, Rng& rng) {
  std::vector<NodeId> eligible;
  for (const auto& n : net.nodes)
    if (n.kind != NodeKind::Input) eligible.push_back(n.id);
  if (eligible.empty()) throw NetError("no node eligible for an addition");
  NodeId at = eligible[static_cast<std::size_t>(rng.below(eligible.size()))];
  ErrorKind kind =
      rng.coin() ? ErrorKind::FalseNegative : ErrorKind::FalsePositive;
  add_node_for_error(net, at, kind, omega, eps, rng);
}

// Planned child expansions for one network: nodes ranked by false-negative
// and false-positive blame, picks alternating between the two rankings
// (FN first), zero-blame nodes skipped, duplicates allowed only across
// kinds.
inline std::vector<std::pair<NodeId, ErrorKind>> plan_expansion(
    const Network& net, const NodeErrorStats& stats, int children) {
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < net.nodes.size(); ++i)
    if (net.nodes[i].kind != NodeKind::Input) eligible.push_back(i);

  auto ranked = [&](const std::vector<int>& count) {
    std::vector<std::size_t> r = eligible;
    std::stable_sort(r.begin(), r.end(), [&](std::size_t a, std::size_t b) {
      return count[a] > count[b];
    });
    std::erase_if(r, [&](std::size_t i) { return count[i] == 0; });
    return r;
  };
  auto fn_rank = ranked(stats.fn);
  auto fp_rank = ranked(stats.fp);

  std::vector<std::pair<NodeId, ErrorKind>> plan;
  std::size_t fi = 0, pi = 0;
  bool want_fn = true;
  while (static_cast<int>(plan.size()) < children &&
         (fi < fn_rank.size() || pi < fp_rank.size())) {
    if (want_fn && fi < fn_rank.size())
      plan.push_back({net.nodes[fn_rank[fi++]].id, ErrorKind::FalseNegative});
    else if (!want_fn && pi < fp_rank.size())
      plan.push_back({net.nodes[fp_rank[pi++]].id, ErrorKind::FalsePositive});
    else if (fi < fn_rank.size())
      plan.push_back({net.nodes[fn_rank[fi++]].id, ErrorKind::FalseNegative});
    else
      plan.push_back({net.nodes[fp_rank[pi++]].id, ErrorKind::FalsePositive});
    want_fn = !want_fn;
  }
  return plan;
}

struct TopGenResult {
  Candidate best;
  std::size_t networks_trained = 0;
};

struct SearchHooks {
  // called whenever the incumbent best changes, after the count update
  std::function<void(const Candidate&, std::size_t networks_trained)> on_best;
};

inline TopGenResult topgen_search(const Network& start, const Examples& train_set,
                                  const Examples& val_set,
                                  const TopGenParams& params,
                                  const SearchHooks& hooks = {}) {
  params.validate();
  if (train_set.empty()) throw NetError("topgen needs training examples");
  Rng rng(params.seed);
  std::uint64_t births = 0;

  auto make_candidate = [&](Network net) {
    Candidate c;
    c.net = train(net, train_set, {params.train.learning_rate,
                                   params.train.momentum, params.train.epochs,
                                   rng.derive_seed()});
    c.train_error = score(c.net, train_set).error();
    c.val_error = score(c.net, val_set).error();
    c.birth = births++;
    return c;
  };

  TopGenResult result;
  Candidate seed_cand = make_candidate(start);
  result.networks_trained = 1;
  result.best = seed_cand;
  if (hooks.on_best) hooks.on_best(result.best, result.networks_trained);

  // lower val error first, then fewer hidden nodes, then older
  auto queue_order = [](const Candidate& a, const Candidate& b) {
    if (a.val_error != b.val_error) return a.val_error < b.val_error;
    if (a.hidden() != b.hidden()) return a.hidden() < b.hidden();
    return a.birth < b.birth;
  };
  std::vector<Candidate> queue{std::move(seed_cand)};

  while (result.networks_trained < params.budget && !queue.empty()) {
    auto it = std::min_element(queue.begin(), queue.end(), queue_order);
    Candidate parent = std::move(*it);
    queue.erase(it);

    auto stats = attribute_errors(parent.net, train_set, params.tau);
    auto plan =
        plan_expansion(parent.net, stats, params.children_per_expansion);
    if (plan.empty()) continue;  // nothing misclassified; leaf
    for (auto [at, kind] : plan) {
      if (result.networks_trained >= params.budget) break;
      Network child = parent.net;
      add_node_for_error(child, at, kind, params.omega, params.low_weight, rng);
      Candidate c = make_candidate(std::move(child));
      result.networks_trained += 1;
      if (improves_on(c, result.best)) {
        result.best = c;
        if (hooks.on_best) hooks.on_best(result.best, result.networks_trained);
      }
      queue.push_back(std::move(c));
    }
  }
  return result;
}

}  // namespace regent
