#pragma once

// REGENT: steady-state genetic search over knowledge-based network
// topologies. The population is seeded from the translated theory (plus
// perturbed and random members), parents are picked by roulette on
// validation correctness, crossover splits each parent's hidden nodes into
// two sets that respect strong-weight clusters, mutation applies an
// error-directed TopGen addition, and children replace the worst member.
// The whole run is deterministic from its seed, reports a monotone
// best-so-far, and can checkpoint and resume bit-exactly.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "regent/candidate.hpp"
#include "regent/example.hpp"
#include "regent/network.hpp"
#include "regent/rng.hpp"
#include "regent/rules.hpp"
#include "regent/topgen.hpp"
#include "regent/train.hpp"
#include "regent/translate.hpp"

namespace regent {

enum class CrossoverMode { RulePreserving, RandomNodes };

struct RegentConfig {
  std::size_t population_size = 20;
  double mutation_fraction = 0.5;   // else crossover
  double knn_seed_fraction = 1.0;   // share of the population derived from the theory
  std::size_t budget = 500;         // total networks trained, population included
  IntRange perturbations_per_member{1, 3};
  double deletion_prob = 0.25;      // per perturbation: delete vs add
  CrossoverMode crossover_mode = CrossoverMode::RulePreserving;
  double validation_fraction = 0.10;  // 0 scores fitness on the training set
  std::size_t checkpoint_cycles = 10;  // 0 disables periodic checkpoints
  TrainParams train;
  TranslationParams translation;
  std::uint64_t seed = 0;

  void validate() const {
    if (population_size < 1)
      throw std::invalid_argument("population_size must be at least 1");
    if (mutation_fraction < 0.0 || mutation_fraction > 1.0)
      throw std::invalid_argument("mutation_fraction outside [0,1]");
    if (knn_seed_fraction < 0.0 || knn_seed_fraction > 1.0)
      throw std::invalid_argument("knn_seed_fraction outside [0,1]");
    if (deletion_prob < 0.0 || deletion_prob > 1.0)
      throw std::invalid_argument("deletion_prob outside [0,1]");
    if (validation_fraction < 0.0 || validation_fraction >= 1.0)
      throw std::invalid_argument("validation_fraction outside [0,1)");
    if (budget < 1) throw std::invalid_argument("budget must be at least 1");
    if (perturbations_per_member.lo < 1 ||
        perturbations_per_member.hi < perturbations_per_member.lo)
      throw std::invalid_argument("bad perturbations_per_member range");
    translation.validate();
  }
};

// ---------------------------------------------------------------------------
// config identity

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace detail {

inline std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline std::string canonical_config_string(const RegentConfig& c) {
  std::string s;
  s += "population_size=" + std::to_string(c.population_size);
  s += ";mutation_fraction=" + detail::num(c.mutation_fraction);
  s += ";knn_seed_fraction=" + detail::num(c.knn_seed_fraction);
  s += ";budget=" + std::to_string(c.budget);
  s += ";perturbations=" + std::to_string(c.perturbations_per_member.lo) +
       ".." + std::to_string(c.perturbations_per_member.hi);
  s += ";deletion_prob=" + detail::num(c.deletion_prob);
  s += ";crossover_mode=";
  s += c.crossover_mode == CrossoverMode::RulePreserving ? "rule_preserving"
                                                         : "random_nodes";
  s += ";validation_fraction=" + detail::num(c.validation_fraction);
  s += ";checkpoint_cycles=" + std::to_string(c.checkpoint_cycles);
  s += ";lr=" + detail::num(c.train.learning_rate);
  s += ";momentum=" + detail::num(c.train.momentum);
  s += ";epochs=" + std::to_string(c.train.epochs);
  s += ";omega=" + detail::num(c.translation.omega);
  s += ";low_weight=" + detail::num(c.translation.low_weight);
  s += ";translation_seed=" + std::to_string(c.translation.seed);
  s += ";seed=" + std::to_string(c.seed);
  return s;
}

inline std::string config_digest(const RegentConfig& c) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(
                    fnv1a64(canonical_config_string(c))));
  return buf;
}

// ---------------------------------------------------------------------------
// crossover machinery

struct NodePartition {
  std::vector<NodeId> set_a, set_b;
};

namespace detail {

// probability that `node` joins set A, given its absolute link weight into
// already-assigned nodes; no such links -> 0.5
inline double assignment_probability(
    const std::vector<std::pair<std::size_t, double>>& outgoing,
    const std::vector<char>& in_a, const std::vector<char>& in_b) {
  double sa = 0.0, sb = 0.0;
  for (auto [t, w] : outgoing) {
    if (in_a[t]) sa += std::abs(w);
    if (in_b[t]) sb += std::abs(w);
  }
  if (sa + sb == 0.0) return 0.5;
  return sa / (sa + sb);
}

}  // namespace detail

inline double eq1_probability(const Network& parent, NodeId node,
                              const NodePartition& part) {
  auto idx = node_index(parent);
  auto it = idx.find(node);
  if (it == idx.end()) throw NetError("eq1_probability: unknown node");
  std::unordered_set<NodeId> a(part.set_a.begin(), part.set_a.end());
  std::unordered_set<NodeId> b(part.set_b.begin(), part.set_b.end());
  if (a.count(node) || b.count(node))
    throw NetError("eq1_probability: node already assigned");
  double sa = 0.0, sb = 0.0;
  for (const auto& l : parent.links) {
    if (l.source != node) continue;
    if (a.count(l.target)) sa += std::abs(l.weight);
    if (b.count(l.target)) sb += std::abs(l.weight);
  }
  if (sa + sb == 0.0) return 0.5;
  return sa / (sa + sb);
}

// Divides the parent's hidden nodes into two sets. Nodes become assignable
// once all their outgoing links point at assigned or output nodes; each
// batch is assigned by fair coin while either set is empty (or always, in
// RandomNodes mode), otherwise by the strong-weight assignment probability
// evaluated against the sets as of the batch start.
inline NodePartition divide_nodes(const Network& parent, CrossoverMode mode,
                                  Rng& rng) {
  auto idx = node_index(parent);
  std::vector<std::size_t> hidden;
  std::vector<char> is_hidden(parent.nodes.size(), 0);
  for (std::size_t i = 0; i < parent.nodes.size(); ++i) {
    NodeKind k = parent.nodes[i].kind;
    if (k == NodeKind::And || k == NodeKind::Or) {
      hidden.push_back(i);
      is_hidden[i] = 1;
    }
  }
  std::vector<std::vector<std::pair<std::size_t, double>>> outgoing(
      parent.nodes.size());
  for (const auto& l : parent.links)
    outgoing[idx.at(l.source)].push_back({idx.at(l.target), l.weight});

  NodePartition part;
  std::vector<char> in_a(parent.nodes.size(), 0), in_b(parent.nodes.size(), 0);
  std::vector<std::size_t> unassigned = hidden;
  while (!unassigned.empty()) {
    std::vector<std::size_t> batch;
    for (std::size_t i : unassigned) {
      bool ready = true;
      for (auto [t, w] : outgoing[i]) {
        (void)w;
        if (is_hidden[t] && !in_a[t] && !in_b[t]) {
          ready = false;
          break;
        }
      }
      if (ready) batch.push_back(i);
    }
    if (batch.empty()) batch = unassigned;  // unreachable for acyclic nets

    bool coin_mode = mode == CrossoverMode::RandomNodes ||
                     part.set_a.empty() || part.set_b.empty();
    std::vector<double> probs;
    if (!coin_mode) {
      probs.reserve(batch.size());
      for (std::size_t i : batch)
        probs.push_back(
            detail::assignment_probability(outgoing[i], in_a, in_b));
    }
    for (std::size_t bi = 0; bi < batch.size(); ++bi) {
      std::size_t i = batch[bi];
      bool to_a = coin_mode ? rng.coin() : rng.bernoulli(probs[bi]);
      (to_a ? part.set_a : part.set_b).push_back(parent.nodes[i].id);
      (to_a ? in_a : in_b)[i] = 1;
    }
    std::erase_if(unassigned,
                  [&](std::size_t i) { return in_a[i] || in_b[i]; });
  }
  return part;
}

// a parent link severed by the partition, remembered for bias repair
struct SeveredLink {
  NodeId target = 0;          // id in the child
  double weight = 0.0;
  double source_mean = 0.0;   // source's mean activation in its origin parent
};

// Bias repair for severed incoming links: a lost positive link into an And
// raises the bias by weight x mean activation (the conjunction no longer
// waits on that source); a lost negative link into an Or lowers it by the
// analogous amount. Other cases are left untouched.
inline void adjust_biases(Network& child,
                          const std::vector<SeveredLink>& removed) {
  auto idx = node_index(child);
  for (const auto& s : removed) {
    auto it = idx.find(s.target);
    if (it == idx.end()) throw NetError("adjust_biases: target not in child");
    Node& n = child.nodes[it->second];
    Gate g = gate_of(n);
    if (s.weight > 0.0 && g == Gate::And)
      n.bias += s.weight * s.source_mean;
    else if (s.weight < 0.0 && g == Gate::Or)
      n.bias -= -s.weight * s.source_mean;
  }
}

struct CrossoverOutcome {
  Network child1, child2;
  NodePartition part1, part2;
};

namespace detail {

// Builds one child from the kept hidden sets of both parents. Inputs and
// outputs are recreated fresh (output gate and bias from the fitter
// parent); kept hidden nodes keep their links whose other endpoint also
// survives or is an input/output; input->output links collide in favor of
// the fitter parent; severed links feed bias repair.
inline Network assemble_child(const Network& p1,
                              const std::unordered_set<NodeId>& keep1,
                              const std::vector<double>& mean1,
                              const Network& p2,
                              const std::unordered_set<NodeId>& keep2,
                              const std::vector<double>& mean2,
                              bool fitter_is_p2) {
  Network child;
  child.feature_names = p1.feature_names;
  child.output_names = p1.output_names;
  for (const auto& f : child.feature_names)
    child.input_ids.push_back(child.add_node(NodeKind::Input, Gate::And, 0.0, f));

  const Network& fitter = fitter_is_p2 ? p2 : p1;
  auto fitter_idx = node_index(fitter);
  for (std::size_t o = 0; o < child.output_names.size(); ++o) {
    const Node& fo = fitter.nodes[fitter_idx.at(fitter.output_ids[o])];
    child.output_ids.push_back(
        child.add_node(NodeKind::Output, fo.gate, fo.bias, fo.provenance));
  }

  std::vector<SeveredLink> severed;
  // (feature index, output index) -> inherited weight; ordered so the
  // child's link order is deterministic
  std::map<std::uint64_t, double> io_weights;

  auto absorb = [&](const Network& p, const std::unordered_set<NodeId>& keep,
                    const std::vector<double>& mean, bool is_fitter) {
    auto idx = node_index(p);
    std::unordered_map<NodeId, std::size_t> in_pos, out_pos;
    for (std::size_t f = 0; f < p.input_ids.size(); ++f)
      in_pos[p.input_ids[f]] = f;
    for (std::size_t o = 0; o < p.output_ids.size(); ++o)
      out_pos[p.output_ids[o]] = o;

    std::unordered_map<NodeId, NodeId> map;
    for (const auto& n : p.nodes) {
      if (n.kind != NodeKind::And && n.kind != NodeKind::Or) continue;
      if (!keep.count(n.id)) continue;
      map[n.id] = child.add_node(n.kind, n.gate, n.bias, n.provenance);
    }

    for (const auto& l : p.links) {
      const Node& sn = p.nodes[idx.at(l.source)];
      const Node& tn = p.nodes[idx.at(l.target)];
      NodeId t_new;
      bool target_output = tn.kind == NodeKind::Output;
      if (target_output) {
        t_new = child.output_ids[out_pos.at(tn.id)];
      } else {
        auto mt = map.find(tn.id);
        if (mt == map.end()) continue;
        t_new = mt->second;
      }
      if (sn.kind == NodeKind::Input) {
        std::size_t f = in_pos.at(sn.id);
        if (target_output) {
          std::uint64_t key =
              (static_cast<std::uint64_t>(f) << 32) | out_pos.at(tn.id);
          auto [it, fresh] = io_weights.try_emplace(key, l.weight);
          if (!fresh && is_fitter) it->second = l.weight;
        } else {
          child.add_link(child.input_ids[f], t_new, l.weight);
        }
      } else {
        auto ms = map.find(sn.id);
        if (ms != map.end()) {
          child.add_link(ms->second, t_new, l.weight);
        } else if (!target_output || is_fitter) {
          severed.push_back({t_new, l.weight, mean[idx.at(sn.id)]});
        }
      }
    }
  };

  // less-fit first so the fitter parent's input->output weights win
  if (fitter_is_p2) {
    absorb(p1, keep1, mean1, false);
    absorb(p2, keep2, mean2, true);
  } else {
    absorb(p2, keep2, mean2, false);
    absorb(p1, keep1, mean1, true);
  }
  for (const auto& [key, w] : io_weights)
    child.add_link(child.input_ids[key >> 32],
                   child.output_ids[key & 0xffffffffu], w);
  adjust_biases(child, severed);
  return child;
}

}  // namespace detail

// Rule-preserving crossover. Both parents are partitioned independently;
// child 1 unites the two A sets, child 2 the two B sets. The combined
// hidden multiset of the children equals that of the parents.
inline CrossoverOutcome crossover(const Candidate& p1, const Candidate& p2,
                                  const Examples& train_examples,
                                  const RegentConfig& cfg, Rng& rng) {
  if (p1.net.feature_names != p2.net.feature_names ||
      p1.net.output_names != p2.net.output_names)
    throw NetError("crossover: parents have incompatible spaces");
  CrossoverOutcome out;
  out.part1 = divide_nodes(p1.net, cfg.crossover_mode, rng);
  out.part2 = divide_nodes(p2.net, cfg.crossover_mode, rng);
  std::vector<double> mean1 = mean_activations(p1.net, train_examples);
  std::vector<double> mean2 = mean_activations(p2.net, train_examples);
  bool fitter_is_p2 = p2.val_error < p1.val_error;

  auto set_of = [](const std::vector<NodeId>& v) {
    return std::unordered_set<NodeId>(v.begin(), v.end());
  };
  out.child1 = detail::assemble_child(p1.net, set_of(out.part1.set_a), mean1,
                                      p2.net, set_of(out.part2.set_a), mean2,
                                      fitter_is_p2);
  out.child2 = detail::assemble_child(p1.net, set_of(out.part1.set_b), mean1,
                                      p2.net, set_of(out.part2.set_b), mean2,
                                      fitter_is_p2);
  double eps = cfg.translation.low_weight;
  add_cross_links(out.child1, eps, rng);
  add_cross_links(out.child2, eps, rng);
  return out;
}

// ---------------------------------------------------------------------------
// mutation and selection

// One error-directed addition: the site is drawn proportional to the node's
// combined blame (uniform when the parent makes no errors), broadening where
// false negatives dominate and constraining otherwise.
inline Network mutate(const Candidate& parent, const Examples& train_examples,
                      const RegentConfig& cfg, Rng& rng) {
  auto stats = attribute_errors(parent.net, train_examples);
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < parent.net.nodes.size(); ++i)
    if (parent.net.nodes[i].kind != NodeKind::Input) eligible.push_back(i);
  if (eligible.empty()) throw NetError("mutate: no eligible node");

  double total = 0.0;
  for (std::size_t i : eligible) total += stats.fn[i] + stats.fp[i];
  std::size_t pick = eligible.back();
  if (total == 0.0) {
    pick = eligible[static_cast<std::size_t>(rng.below(eligible.size()))];
  } else {
    double r = rng.uniform() * total, acc = 0.0;
    for (std::size_t i : eligible) {
      acc += stats.fn[i] + stats.fp[i];
      if (r < acc) {
        pick = i;
        break;
      }
    }
  }
  ErrorKind kind = stats.fn[pick] >= stats.fp[pick]
                       ? ErrorKind::FalseNegative
                       : ErrorKind::FalsePositive;
  Network child = parent.net;
  add_node_for_error(child, parent.net.nodes[pick].id, kind,
                     cfg.translation.omega, cfg.translation.low_weight, rng);
  return child;
}

struct Population {
  std::size_t capacity = 20;
  std::vector<Candidate> members;
};

// roulette on validation correctness; all-zero fitness degenerates to uniform
inline std::size_t select_parent(const Population& pop, Rng& rng) {
  if (pop.members.empty()) throw NetError("select_parent: empty population");
  double total = 0.0;
  for (const auto& m : pop.members) total += m.fitness();
  if (total == 0.0)
    return static_cast<std::size_t>(rng.below(pop.members.size()));
  double r = rng.uniform() * total, acc = 0.0;
  for (std::size_t i = 0; i < pop.members.size(); ++i) {
    acc += pop.members[i].fitness();
    if (r < acc) return i;
  }
  return pop.members.size() - 1;
}

// Steady-state replacement: below capacity, append; at capacity, a candidate
// enters only if its fitness reaches the current minimum, replacing the
// minimum-fitness member (ties broken toward the oldest).
inline bool insert(Population& pop, Candidate cand) {
  if (pop.members.size() < pop.capacity) {
    pop.members.push_back(std::move(cand));
    return true;
  }
  std::size_t victim = 0;
  for (std::size_t i = 1; i < pop.members.size(); ++i) {
    const Candidate& v = pop.members[victim];
    const Candidate& m = pop.members[i];
    if (m.fitness() < v.fitness() ||
        (m.fitness() == v.fitness() && m.birth < v.birth))
      victim = i;
  }
  if (cand.fitness() < pop.members[victim].fitness()) return false;
  pop.members.erase(pop.members.begin() +
                    static_cast<std::ptrdiff_t>(victim));
  pop.members.push_back(std::move(cand));
  return true;
}

// Random member for population seeding: an empty-theory network grown to a
// drawn hidden count by uniformly chosen additions.
inline Network generate_random_network(
    const std::vector<std::string>& feature_names,
    const std::vector<std::string>& output_names, std::size_t h_max,
    double omega, double eps, Rng& rng) {
  if (output_names.empty())
    throw NetError("generate_random_network: no outputs");
  Network net;
  net.feature_names = feature_names;
  net.output_names = output_names;
  for (const auto& f : feature_names)
    net.input_ids.push_back(net.add_node(NodeKind::Input, Gate::And, 0.0, f));
  for (const auto& o : output_names)
    net.output_ids.push_back(
        net.add_node(NodeKind::Output, Gate::Or, -omega / 2.0, o));
  add_cross_links(net, eps, rng);
  std::size_t h = static_cast<std::size_t>(
      rng.range(1, static_cast<std::int64_t>(std::max<std::size_t>(1, h_max))));
  while (net.hidden_count() < h) random_addition(net, omega, eps, rng);
  return net;
}

// ---------------------------------------------------------------------------
// the run loop

struct TraceRow {
  std::uint64_t cycle = 0;
  std::uint64_t networks_trained = 0;
  double best_val_error = 1.0;
  std::uint64_t best_hidden = 0;
  std::uint64_t best_links = 0;
  char event = 'C';  // 'I' init complete, 'B' best improved, 'C' cycle summary
  char op = '-';     // 'P' population init, 'M' mutation, 'X' crossover

  bool operator==(const TraceRow&) const = default;
};

struct Checkpoint {
  std::string config_digest;
  std::uint64_t networks_trained = 0;
  std::uint64_t cycle = 0;
  std::uint64_t births = 0;
  std::string rng_state;
  std::vector<Candidate> population;
  Candidate best;
  std::vector<TraceRow> trace;
};

struct RunHooks {
  // fires when the best-so-far changes (and once after population init)
  std::function<void(const Candidate&, std::size_t networks_trained)> on_best;
  // fires for every trained candidate, in deterministic order
  std::function<void(const Candidate&)> on_child;
  // fires every checkpoint_cycles cycles and once at the end of the run
  std::function<void(const Checkpoint&)> on_checkpoint;
};

struct RegentResult {
  Candidate best;
  std::vector<TraceRow> trace;
  std::uint64_t networks_trained = 0;
  Population population;
  Checkpoint final_checkpoint;
};

namespace detail {

inline std::vector<Network> train_many(std::vector<Network> nets,
                                       const std::vector<std::uint64_t>& seeds,
                                       const Examples& examples,
                                       const TrainParams& base, int jobs) {
  std::vector<Network> out(nets.size());
  auto work = [&](std::size_t i) {
    TrainParams p = base;
    p.seed = seeds[i];
    out[i] = train(nets[i], examples, p);
  };
  if (jobs <= 1 || nets.size() <= 1) {
    for (std::size_t i = 0; i < nets.size(); ++i) work(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(jobs), nets.size());
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w)
    threads.emplace_back([&] {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= out.size()) return;
        work(i);
      }
    });
  for (auto& t : threads) t.join();
  return out;
}

}  // namespace detail

// Runs REGENT on `examples` (internally split into train/validation parts)
// until `budget` networks have been trained, or continues from `resume`.
// Training seeds are pre-drawn on the coordinating thread, so results do not
// depend on `jobs`.
inline RegentResult regent_run(const RuleSet& rules,
                               const std::vector<std::string>& feature_names,
                               const Examples& examples,
                               const RegentConfig& cfg,
                               const RunHooks& hooks = {}, int jobs = 1,
                               const std::optional<Checkpoint>& resume = {}) {
  cfg.validate();
  if (rules.outputs.empty()) throw NetError("theory declares no outputs");
  if (cfg.budget < cfg.population_size)
    throw NetError("budget is smaller than the population size");
  if (examples.empty()) throw NetError("no examples");
  const std::string digest = config_digest(cfg);

  Examples train_part, val_part;
  if (cfg.validation_fraction == 0.0) {
    train_part = examples;
    val_part = examples;
  } else {
    auto sv = split_validation(examples, cfg.validation_fraction,
                               mix_seed(cfg.seed, 0x53504c4954ULL));
    train_part = std::move(sv.train);
    val_part = std::move(sv.validation);
    if (val_part.empty()) val_part = train_part;
  }
  const double omega = cfg.translation.omega;
  const double eps = cfg.translation.low_weight;

  Rng rng(cfg.seed);
  Population pop{cfg.population_size, {}};
  std::uint64_t births = 0, cycle = 0, trained_count = 0;
  Candidate best;
  std::vector<TraceRow> trace;

  auto push_row = [&](char event, char op) {
    trace.push_back({cycle, trained_count, best.val_error,
                     static_cast<std::uint64_t>(best.hidden()),
                     static_cast<std::uint64_t>(best.link_count()), event, op});
  };
  auto make_checkpoint = [&]() {
    Checkpoint ck;
    ck.config_digest = digest;
    ck.networks_trained = trained_count;
    ck.cycle = cycle;
    ck.births = births;
    ck.rng_state = rng.save_state();
    ck.population = pop.members;
    ck.best = best;
    ck.trace = trace;
    return ck;
  };

  if (resume) {
    if (resume->config_digest != digest)
      throw NetError("checkpoint does not match this configuration");
    pop.members = resume->population;
    births = resume->births;
    cycle = resume->cycle;
    trained_count = resume->networks_trained;
    best = resume->best;
    trace = resume->trace;
    rng.load_state(resume->rng_state);
  } else {
    // population init: member 0 is the unperturbed translated theory, a
    // knn_seed_fraction share of the remaining slots are perturbed copies,
    // the rest are random networks (fraction 0 drops the theory entirely)
    std::vector<Network> nets;
    std::vector<Origin> origins;
    Network base = translate(rules, feature_names, cfg.translation);
    std::size_t n = cfg.population_size;
    std::size_t perturbed = 0;
    bool with_seed = cfg.knn_seed_fraction > 0.0;
    if (with_seed && n > 1) {
      perturbed = static_cast<std::size_t>(
          std::llround(cfg.knn_seed_fraction * static_cast<double>(n - 1)));
      perturbed = std::min(perturbed, n - 1);
    }
    std::size_t h_max =
        rules.rules.empty() ? 16 : std::max<std::size_t>(1, base.hidden_count());
    if (with_seed) {
      nets.push_back(base);
      origins.push_back(Origin::Seed);
    }
    for (std::size_t i = 0; i < perturbed; ++i) {
      Network m = base;
      std::int64_t k = rng.range(cfg.perturbations_per_member.lo,
                                 cfg.perturbations_per_member.hi);
      for (std::int64_t p = 0; p < k; ++p) {
        bool del = rng.bernoulli(cfg.deletion_prob);
        if (del && m.hidden_count() > 0) {
          std::vector<NodeId> hidden;
          for (const auto& nd : m.nodes)
            if (nd.kind == NodeKind::And || nd.kind == NodeKind::Or)
              hidden.push_back(nd.id);
          NodeId victim =
              hidden[static_cast<std::size_t>(rng.below(hidden.size()))];
          delete_node(m, victim, eps, rng);
        } else {
          random_addition(m, omega, eps, rng);
        }
      }
      nets.push_back(std::move(m));
      origins.push_back(Origin::Perturbed);
    }
    while (nets.size() < n) {
      nets.push_back(generate_random_network(feature_names, rules.outputs,
                                             h_max, omega, eps, rng));
      origins.push_back(Origin::Random);
    }
    std::vector<std::uint64_t> seeds;
    for (std::size_t i = 0; i < nets.size(); ++i)
      seeds.push_back(rng.derive_seed());
    auto trained =
        detail::train_many(std::move(nets), seeds, train_part, cfg.train, jobs);
    for (std::size_t i = 0; i < trained.size(); ++i) {
      Candidate c;
      c.net = std::move(trained[i]);
      c.train_error = score(c.net, train_part).error();
      c.val_error = score(c.net, val_part).error();
      c.birth = births++;
      c.origin = origins[i];
      trained_count += 1;
      if (i == 0 || improves_on(c, best)) best = c;
      if (hooks.on_child) hooks.on_child(c);
      pop.members.push_back(std::move(c));
    }
    push_row('I', 'P');
    if (hooks.on_best) hooks.on_best(best, trained_count);
  }

  while (trained_count < cfg.budget) {
    ++cycle;
    char op = '-';
    std::vector<Network> nets;
    std::vector<std::size_t> parent_hidden;
    Origin child_origin = Origin::Mutation;
    if (rng.bernoulli(cfg.mutation_fraction)) {
      op = 'M';
      child_origin = Origin::Mutation;
      std::size_t pi = select_parent(pop, rng);
      parent_hidden.push_back(pop.members[pi].hidden());
      nets.push_back(mutate(pop.members[pi], train_part, cfg, rng));
    } else {
      op = 'X';
      child_origin = Origin::Crossover;
      std::size_t i1 = select_parent(pop, rng);
      std::size_t i2 = select_parent(pop, rng);
      if (i1 == i2) i2 = select_parent(pop, rng);  // resample once, then allow
      auto xo =
          crossover(pop.members[i1], pop.members[i2], train_part, cfg, rng);
      nets.push_back(std::move(xo.child1));
      nets.push_back(std::move(xo.child2));
      parent_hidden.assign(2, 0);
    }
    std::vector<std::uint64_t> seeds;
    for (std::size_t i = 0; i < nets.size(); ++i)
      seeds.push_back(rng.derive_seed());
    auto trained =
        detail::train_many(std::move(nets), seeds, train_part, cfg.train, jobs);
    for (std::size_t i = 0; i < trained.size(); ++i) {
      Candidate c;
      c.net = std::move(trained[i]);
      c.train_error = score(c.net, train_part).error();
      c.val_error = score(c.net, val_part).error();
      c.birth = births++;
      c.origin = child_origin;
      c.parent_hidden = parent_hidden[i];
      trained_count += 1;
      bool better = improves_on(c, best);
      if (better) best = c;
      if (hooks.on_child) hooks.on_child(c);
      insert(pop, std::move(c));
      if (better) {
        push_row('B', op);
        if (hooks.on_best) hooks.on_best(best, trained_count);
      }
    }
    push_row('C', op);
    if (cfg.checkpoint_cycles > 0 && cycle % cfg.checkpoint_cycles == 0 &&
        hooks.on_checkpoint)
      hooks.on_checkpoint(make_checkpoint());
  }

  RegentResult result;
  result.best = best;
  result.trace = std::move(trace);
  result.networks_trained = trained_count;
  result.population = std::move(pop);
  result.final_checkpoint = [&] {
    Checkpoint ck;
    ck.config_digest = digest;
    ck.networks_trained = trained_count;
    ck.cycle = cycle;
    ck.births = births;
    ck.rng_state = rng.save_state();
    ck.population = result.population.members;
    ck.best = result.best;
    ck.trace = result.trace;
    return ck;
  }();
  if (hooks.on_checkpoint) hooks.on_checkpoint(result.final_checkpoint);
  return result;
}

}  // namespace regent
