#pragma once

// A trained network plus its scores and lineage, as handled by the topology
// searchers.

#include <cstdint>

#include "regent/network.hpp"

namespace regent {

// how a candidate came to exist
enum class Origin {
  Seed,       // unperturbed translated theory
  Perturbed,  // translated theory plus random structural perturbations
  Random,     // generated without the theory
  Mutation,
  Crossover,
};

struct Candidate {
  Network net;
  double train_error = 1.0;
  double val_error = 1.0;
  std::uint64_t birth = 0;  // global creation sequence number, doubles as age
  Origin origin = Origin::Seed;
  std::size_t parent_hidden = 0;  // mutation only: parent's hidden count

  // fitness is validation-set correctness
  double fitness() const { return 1.0 - val_error; }
  std::size_t hidden() const { return net.hidden_count(); }
  std::size_t link_count() const { return net.links.size(); }
};

// Strict "a is a better final answer than b": lower validation error, then
// fewer hidden nodes, then fewer links, then created earlier.
inline bool improves_on(const Candidate& a, const Candidate& b) {
  if (a.val_error != b.val_error) return a.val_error < b.val_error;
  if (a.hidden() != b.hidden()) return a.hidden() < b.hidden();
  if (a.link_count() != b.link_count()) return a.link_count() < b.link_count();
  return a.birth < b.birth;
}

}  // namespace regent
