#pragma once

// Compiles a rule set into a network whose initial behavior matches the
// theory's negation-as-failure semantics:
//
//   - a consequent with k > 1 rules becomes an OR node with one AND child
//     per rule; a single-rule consequent becomes that rule's AND node;
//   - positive antecedents link in with weight +omega, negated ones with
//     -omega; an AND node's bias is -omega * (P - 0.5) where P counts its
//     positive heavy antecedents, an OR node's bias is -omega / 2;
//   - output consequents keep NodeKind::Output and record their AND/OR role
//     in the gate tag; an output with no rules is an empty disjunction
//     (OR gate, bias -omega/2), i.e. false by failure;
//   - finally the network is knitted with low-weight cross links so that
//     gradient descent has somewhere to grow new dependencies.

#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "regent/network.hpp"
#include "regent/rng.hpp"
#include "regent/rules.hpp"

namespace regent {

struct TranslationParams {
  double omega = 4.0;       // heavy weight magnitude
  double low_weight = 0.05; // cross-link magnitude cap
  std::uint64_t seed = 0;

  void validate() const {
    if (omega <= 0.0) throw std::invalid_argument("omega must be positive");
    if (low_weight < 0.0 || low_weight >= omega / 10.0)
      throw std::invalid_argument("low_weight must sit in [0, omega/10)");
  }
};

// feature_names defines the input layer; every rule-set input must name one
// of its entries (a theory may reference a subset of a wider feature space).
inline Network translate(const RuleSet& rs,
                         const std::vector<std::string>& feature_names,
                         const TranslationParams& params) {
  params.validate();
  const double omega = params.omega;

  Network net;
  net.feature_names = feature_names;
  std::unordered_map<std::string, NodeId> symbol_node;
  for (const auto& f : feature_names) {
    NodeId id = net.add_node(NodeKind::Input, Gate::And, 0.0, f);
    net.input_ids.push_back(id);
    if (!symbol_node.emplace(f, id).second)
      throw NetError("duplicate feature name '" + f + "'");
  }
  for (const auto& in : rs.inputs)
    if (!symbol_node.count(in))
      throw NetError("theory input '" + in + "' is not a dataset feature");

  // representative node per consequent, outputs included
  auto consequents = rs.consequents();
  for (const auto& out_sym : rs.outputs)
    if (rs.rules_for(out_sym).empty()) consequents.push_back(out_sym);

  struct RepInfo {
    NodeId id;
    std::size_t rule_count;
  };
  std::unordered_map<std::string, RepInfo> reps;
  for (const auto& sym : consequents) {
    std::size_t k = rs.rules_for(sym).size();
    bool is_out = rs.is_output(sym);
    Gate gate = (k == 1) ? Gate::And : Gate::Or;  // k == 0 or k > 1: OR
    NodeKind kind = is_out ? NodeKind::Output
                           : (gate == Gate::And ? NodeKind::And : NodeKind::Or);
    NodeId id = net.add_node(kind, gate, 0.0, sym);
    reps[sym] = {id, k};
    symbol_node[sym] = id;
    if (is_out) {
      net.output_ids.push_back(id);
      net.output_names.push_back(sym);
    }
  }
  // keep output order aligned with the rule set's declaration order
  {
    std::vector<NodeId> ids;
    std::vector<std::string> names;
    for (const auto& sym : rs.outputs) {
      ids.push_back(reps.at(sym).id);
      names.push_back(sym);
    }
    net.output_ids = ids;
    net.output_names = names;
  }

  auto and_bias = [omega](std::size_t positives) {
    return -omega * (static_cast<double>(positives) - 0.5);
  };

  auto wire_rule = [&](const Rule& r, NodeId target) {
    std::size_t positives = 0;
    for (const auto& lit : r.antecedents) {
      auto it = symbol_node.find(lit.symbol);
      if (it == symbol_node.end())
        throw NetError("rule references unknown symbol '" + lit.symbol + "'");
      net.add_link(it->second, target, lit.negated ? -omega : omega);
      if (!lit.negated) ++positives;
    }
    return positives;
  };

  auto node_ref = [&](NodeId id) -> Node& {
    for (auto& n : net.nodes)
      if (n.id == id) return n;
    throw NetError("internal: node lookup failed");
  };

  for (const auto& sym : consequents) {
    const RepInfo& rep = reps.at(sym);
    auto rule_ids = rs.rules_for(sym);
    if (rep.rule_count == 1) {
      std::size_t p = wire_rule(rs.rules[rule_ids[0]], rep.id);
      node_ref(rep.id).bias = and_bias(p);
    } else {
      node_ref(rep.id).bias = -omega / 2.0;  // empty disjunction stays false
      for (std::size_t ri : rule_ids) {
        NodeId child = net.add_node(NodeKind::And, Gate::And, 0.0, sym);
        std::size_t p = wire_rule(rs.rules[ri], child);
        node_ref(child).bias = and_bias(p);
        net.add_link(child, rep.id, omega);
      }
    }
  }

  Rng rng(params.seed);
  return add_cross_links(net, params.low_weight, rng);
}

inline Network translate(const RuleSet& rs, const TranslationParams& params) {
  return translate(rs, rs.inputs, params);
}

}  // namespace regent
