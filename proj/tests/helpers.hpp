#pragma once

// Shared fixtures: the four-input demo theory used across the suite and a
// brute-force network evaluator kept independent from the library's forward
// pass so the two can audit each other.

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <regent/network.hpp>
#include <regent/rules.hpp>

namespace fixtures {

// Demo theory: a true iff d, e, f, g satisfy (d and not e) and (f and g),
// plus an alternate first disjunct (e and not f) that f = 1 masks.
inline const char* kDemoRules =
    "a :- b, c.\n"
    "b :- e, not f.\n"
    "b :- d, not e.\n"
    "c :- f, g.\n";

// The demo theory plus one more b disjunct; used by the missing-rule study.
// a becomes (d xor e) and f and g.
inline const char* kTargetRules =
    "a :- b, c.\n"
    "b :- e, not f.\n"
    "b :- d, not e.\n"
    "b :- not d, e, g.\n"
    "c :- f, g.\n";

inline const std::vector<std::string> kDemoInputs = {"d", "e", "f", "g"};

// Reference forward pass: plain recursion over links, no topo order, no
// shared code with Network::forward's Plan.
inline std::vector<double> naive_forward(const regent::Network& net,
                                         const std::vector<double>& features) {
  std::map<regent::NodeId, double> act;
  for (std::size_t i = 0; i < net.input_ids.size(); ++i)
    act[net.input_ids[i]] = features[i];
  std::map<regent::NodeId, const regent::Node*> by_id;
  for (const auto& n : net.nodes) by_id[n.id] = &n;

  auto eval = [&](auto&& self, regent::NodeId id) -> double {
    if (auto it = act.find(id); it != act.end()) return it->second;
    double x = by_id.at(id)->bias;
    for (const auto& l : net.links)
      if (l.target == id) x += l.weight * self(self, l.source);
    double a = 1.0 / (1.0 + std::exp(-x));
    act[id] = a;
    return a;
  };
  std::vector<double> out;
  for (regent::NodeId id : net.output_ids) out.push_back(eval(eval, id));
  return out;
}

}  // namespace fixtures
