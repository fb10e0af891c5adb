#pragma once

// Network documents: JSON with explicit node/link/feature/output sections.
// Doubles survive a round trip bit-exactly (shortest round-trip printing),
// which the checkpoint format depends on.

#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "regent/network.hpp"

namespace regent {

inline const char* kind_name(NodeKind k) {
  switch (k) {
    case NodeKind::Input: return "input";
    case NodeKind::Output: return "output";
    case NodeKind::And: return "and";
    case NodeKind::Or: return "or";
  }
  return "?";
}

inline NodeKind kind_from_name(const std::string& s) {
  if (s == "input") return NodeKind::Input;
  if (s == "output") return NodeKind::Output;
  if (s == "and") return NodeKind::And;
  if (s == "or") return NodeKind::Or;
  throw NetError("unknown node kind '" + s + "'");
}

inline nlohmann::json to_json(const Network& net) {
  nlohmann::json j;
  j["format"] = "regent-network";
  j["version"] = 1;
  j["features"] = net.feature_names;
  j["outputs"] = net.output_names;
  j["input_ids"] = net.input_ids;
  j["output_ids"] = net.output_ids;
  j["next_id"] = net.next_id;
  auto& nodes = j["nodes"] = nlohmann::json::array();
  for (const auto& n : net.nodes) {
    nlohmann::json nj;
    nj["id"] = n.id;
    nj["kind"] = kind_name(n.kind);
    nj["gate"] = (gate_of(n) == Gate::And) ? "and" : "or";
    nj["bias"] = n.bias;
    nj["provenance"] = n.provenance;
    nodes.push_back(std::move(nj));
  }
  auto& links = j["links"] = nlohmann::json::array();
  for (const auto& l : net.links)
    links.push_back({{"from", l.source}, {"to", l.target}, {"w", l.weight}});
  return j;
}

inline Network network_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("format", "") != "regent-network")
    throw NetError("not a network document");
  Network net;
  net.feature_names = j.at("features").get<std::vector<std::string>>();
  net.output_names = j.at("outputs").get<std::vector<std::string>>();
  net.input_ids = j.at("input_ids").get<std::vector<NodeId>>();
  net.output_ids = j.at("output_ids").get<std::vector<NodeId>>();
  net.next_id = j.at("next_id").get<NodeId>();
  for (const auto& nj : j.at("nodes")) {
    Node n;
    n.id = nj.at("id").get<NodeId>();
    n.kind = kind_from_name(nj.at("kind").get<std::string>());
    n.gate = nj.at("gate").get<std::string>() == "or" ? Gate::Or : Gate::And;
    n.bias = nj.at("bias").get<double>();
    n.provenance = nj.at("provenance").get<std::string>();
    net.nodes.push_back(std::move(n));
  }
  for (const auto& lj : j.at("links"))
    net.links.push_back({lj.at("from").get<NodeId>(), lj.at("to").get<NodeId>(),
                         lj.at("w").get<double>()});

  // structural validation: ids unique, endpoints and role lists resolve
  auto idx = node_index(net);
  for (const auto& l : net.links)
    if (!idx.count(l.source) || !idx.count(l.target))
      throw NetError("link references missing node id");
  if (net.input_ids.size() != net.feature_names.size() ||
      net.output_ids.size() != net.output_names.size())
    throw NetError("role lists out of step with their name lists");
  for (NodeId id : net.input_ids)
    if (!idx.count(id) || net.nodes[idx.at(id)].kind != NodeKind::Input)
      throw NetError("input_ids entry is not an input node");
  for (NodeId id : net.output_ids)
    if (!idx.count(id) || net.nodes[idx.at(id)].kind != NodeKind::Output)
      throw NetError("output_ids entry is not an output node");
  for (const auto& n : net.nodes)
    if (n.id >= net.next_id) throw NetError("node id beyond next_id");
  return net;
}

inline std::string serialize(const Network& net) { return to_json(net).dump(2); }

inline Network deserialize(const std::string& text) {
  return network_from_json(nlohmann::json::parse(text));
}

inline void save_network(const Network& net, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw NetError("cannot open '" + path + "' for writing");
  f << serialize(net) << "\n";
}

inline Network load_network(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw NetError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return deserialize(ss.str());
}

}  // namespace regent
