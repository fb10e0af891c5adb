#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <regent/evolve.hpp>
#include <regent/rules.hpp>
#include <regent/synth.hpp>
#include <regent/translate.hpp>

#include "helpers.hpp"

using namespace regent;

namespace {

Network demo_net(std::uint64_t seed = 5) {
  RuleSet rs = parse_rules(fixtures::kDemoRules);
  TranslationParams tp;
  tp.seed = seed;
  return translate(rs, rs.inputs, tp);
}

NodeId id_of(const Network& net, const std::string& provenance) {
  for (const auto& n : net.nodes)
    if (n.provenance == provenance) return n.id;
  throw std::runtime_error("no node " + provenance);
}

double link_weight(const Network& net, NodeId s, NodeId t) {
  for (const auto& l : net.links)
    if (l.source == s && l.target == t) return l.weight;
  throw std::runtime_error("no such link");
}

// hidden nodes as a multiset of (kind, gate, provenance); biases shift
// under severed-link repair so they are compared separately
std::multiset<std::tuple<int, int, std::string>> hidden_profile(
    const Network& net) {
  std::multiset<std::tuple<int, int, std::string>> out;
  for (const auto& n : net.nodes)
    if (n.kind == NodeKind::And || n.kind == NodeKind::Or)
      out.insert({static_cast<int>(n.kind), static_cast<int>(n.gate),
                  n.provenance});
  return out;
}

std::multiset<std::tuple<int, int, std::string>> merged(
    const Network& a, const Network& b) {
  auto out = hidden_profile(a);
  auto more = hidden_profile(b);
  out.insert(more.begin(), more.end());
  return out;
}

RegentConfig fast_config() {
  RegentConfig cfg;
  cfg.population_size = 6;
  cfg.budget = 20;
  cfg.train.epochs = 5;
  cfg.validation_fraction = 0.0;
  cfg.seed = 7;
  return cfg;
}

}  // namespace

TEST_CASE("config digests are stable and sensitive to every knob") {
  RegentConfig a;
  CHECK(config_digest(a) == config_digest(a));
  CHECK(config_digest(a).size() == 16);

  RegentConfig b = a;
  b.budget = 501;
  CHECK(config_digest(b) != config_digest(a));
  b = a;
  b.mutation_fraction = 0.25;
  CHECK(config_digest(b) != config_digest(a));
  b = a;
  b.crossover_mode = CrossoverMode::RandomNodes;
  CHECK(config_digest(b) != config_digest(a));
  b = a;
  b.train.epochs = 21;
  CHECK(config_digest(b) != config_digest(a));
  b = a;
  b.translation.omega = 4.5;
  CHECK(config_digest(b) != config_digest(a));
  b = a;
  b.seed = 1;
  CHECK(config_digest(b) != config_digest(a));

  std::string canon = canonical_config_string(a);
  CHECK(canon.find("population_size=20") != std::string::npos);
  CHECK(canon.find("crossover_mode=rule_preserving") != std::string::npos);
}

TEST_CASE("the assignment probability weighs absolute link strength") {
  Network net;
  NodeId n = net.add_node(NodeKind::And, Gate::And, 0.0, "n");
  NodeId t1 = net.add_node(NodeKind::And, Gate::And, 0.0, "t1");
  NodeId t2 = net.add_node(NodeKind::Or, Gate::Or, 0.0, "t2");
  NodeId t3 = net.add_node(NodeKind::And, Gate::And, 0.0, "t3");
  net.add_link(n, t1, 3.0);
  net.add_link(n, t2, -1.0);
  net.add_link(n, t3, 10.0);  // t3 unassigned: does not count

  CHECK(eq1_probability(net, n, {{t1}, {t2}}) == 0.75);
  CHECK(eq1_probability(net, n, {{t1, t2}, {}}) == 1.0);
  CHECK(eq1_probability(net, n, {{}, {t1, t2}}) == 0.0);
  CHECK(eq1_probability(net, n, {{}, {}}) == 0.5);      // nothing assigned
  CHECK(eq1_probability(net, t3, {{t1}, {t2}}) == 0.5); // no outgoing links

  // zero-weight links carry no pull in either direction
  Network zn;
  NodeId z = zn.add_node(NodeKind::And, Gate::And, 0.0, "z");
  NodeId zt = zn.add_node(NodeKind::And, Gate::And, 0.0, "zt");
  zn.add_link(z, zt, 0.0);
  CHECK(eq1_probability(zn, z, {{zt}, {}}) == 0.5);

  CHECK_THROWS_AS(eq1_probability(net, 99, {{t1}, {t2}}), NetError);
  CHECK_THROWS_AS(eq1_probability(net, t1, {{t1}, {t2}}), NetError);
}

TEST_CASE("node division partitions the hidden nodes exactly") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    SynthesisParams sp;
    sp.seed = seed;
    auto [target, impov] = synthesize_theory(sp);
    TranslationParams tp;
    tp.seed = seed;
    Network net = translate(target, target.inputs, tp);
    std::set<NodeId> hidden;
    for (const auto& n : net.nodes)
      if (n.kind == NodeKind::And || n.kind == NodeKind::Or)
        hidden.insert(n.id);

    for (auto mode : {CrossoverMode::RulePreserving, CrossoverMode::RandomNodes}) {
      Rng rng(seed * 2 + (mode == CrossoverMode::RandomNodes));
      NodePartition part = divide_nodes(net, mode, rng);
      CHECK(part.set_a.size() + part.set_b.size() == hidden.size());
      std::set<NodeId> all(part.set_a.begin(), part.set_a.end());
      for (NodeId id : part.set_b) CHECK(all.insert(id).second);  // disjoint
      CHECK(all == hidden);
    }
  }
}

TEST_CASE("strong links pull a node after its cluster, coins do not") {
  // in the translated demo net b1 feeds b heavily and c only lightly, so
  // whenever b and c land in different sets, b1 should follow b
  Network net = demo_net();
  NodeId b = id_of(net, "b"), c = id_of(net, "c");
  NodeId b1 = net.nodes[node_index(net).at(id_of(net, "b"))].id;
  // the two conjunction children of b share its provenance; find them by
  // their heavy link into b
  std::vector<NodeId> b_children;
  for (const auto& l : net.links)
    if (l.target == b && l.weight == 4.0) b_children.push_back(l.source);
  REQUIRE(b_children.size() == 2);
  b1 = b_children[0];

  auto run = [&](CrossoverMode mode, int trials) {
    int split = 0, followed = 0;
    Rng rng(99);
    for (int t = 0; t < trials; ++t) {
      NodePartition part = divide_nodes(net, mode, rng);
      auto in = [](const std::vector<NodeId>& v, NodeId id) {
        return std::count(v.begin(), v.end(), id) > 0;
      };
      bool b_in_a = in(part.set_a, b), c_in_a = in(part.set_a, c);
      if (b_in_a == c_in_a) continue;  // same set: coin mode persisted
      ++split;
      if (in(part.set_a, b1) == b_in_a) ++followed;
    }
    return std::pair{split, followed};
  };

  auto [split_rp, follow_rp] = run(CrossoverMode::RulePreserving, 1000);
  REQUIRE(split_rp > 300);
  CHECK(static_cast<double>(follow_rp) / split_rp > 0.9);

  auto [split_rn, follow_rn] = run(CrossoverMode::RandomNodes, 1000);
  REQUIRE(split_rn > 300);
  double f = static_cast<double>(follow_rn) / split_rn;
  CHECK(f > 0.35);
  CHECK(f < 0.65);
}

TEST_CASE("bias repair compensates severed links by gate") {
  Network net;
  NodeId andn = net.add_node(NodeKind::And, Gate::And, 1.0, "a");
  NodeId orn = net.add_node(NodeKind::Or, Gate::Or, -1.0, "o");

  adjust_biases(net, {{andn, 2.0, 0.7}});   // positive into And: bias rises
  CHECK(net.nodes[0].bias == Catch::Approx(1.0 + 2.0 * 0.7));
  adjust_biases(net, {{orn, -3.0, 0.5}});   // negative into Or: bias falls
  CHECK(net.nodes[1].bias == Catch::Approx(-1.0 - 3.0 * 0.5));

  double and_bias = net.nodes[0].bias, or_bias = net.nodes[1].bias;
  adjust_biases(net, {{andn, -2.0, 0.7}});  // negative into And: untouched
  adjust_biases(net, {{orn, 2.0, 0.5}});    // positive into Or: untouched
  CHECK(net.nodes[0].bias == and_bias);
  CHECK(net.nodes[1].bias == or_bias);

  CHECK_THROWS_AS(adjust_biases(net, {{42, 1.0, 0.5}}), NetError);
}

TEST_CASE("crossover conserves the combined hidden multiset") {
  RuleSet rs = parse_rules(fixtures::kDemoRules);
  Examples ex = exhaustive_dataset(parse_rules(fixtures::kTargetRules)).examples;
  RegentConfig cfg;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Candidate p1{demo_net(seed), 0.2, 0.2, 0};
    Candidate p2{demo_net(seed + 100), 0.1, 0.1, 1};
    Rng mut_rng(seed);
    random_addition(p2.net, 4.0, 0.05, mut_rng);  // parents differ in shape

    Rng rng(seed);
    CrossoverOutcome out = crossover(p1, p2, ex, cfg, rng);

    CHECK(merged(out.child1, out.child2) == merged(p1.net, p2.net));
    for (const Network* ch : {&out.child1, &out.child2}) {
      CHECK(ch->feature_names == p1.net.feature_names);
      CHECK(ch->output_names == p1.net.output_names);
      CHECK_NOTHROW(topo_order(*ch));
      auto idx = node_index(*ch);
      for (const auto& l : ch->links) {
        CHECK(idx.count(l.source) == 1);
        CHECK(idx.count(l.target) == 1);
      }
      // children must accept the training examples as-is
      CHECK_NOTHROW(forward(*ch, ex.front().features));
    }
  }
}

TEST_CASE("the fitter parent supplies outputs and colliding links") {
  // two hidden-free parents so every inherited link is input -> output
  auto bare = [](double w0, bool with_w1, double bias) {
    Network net;
    NodeId i0 = net.add_node(NodeKind::Input, Gate::And, 0.0, "i0");
    NodeId i1 = net.add_node(NodeKind::Input, Gate::And, 0.0, "i1");
    NodeId o = net.add_node(NodeKind::Output, Gate::Or, bias, "o");
    net.input_ids = {i0, i1};
    net.output_ids = {o};
    net.feature_names = {"i0", "i1"};
    net.output_names = {"o"};
    net.add_link(i0, o, w0);
    if (with_w1) net.add_link(i1, o, 0.2);
    return net;
  };
  Candidate p1{bare(0.9, true, -1.0), 0.4, 0.4, 0};
  Candidate p2{bare(-0.7, true, -3.0), 0.1, 0.1, 1};

  RegentConfig cfg;
  Rng rng(5);
  Examples ex = {{{1.0, 0.0}, 1}};
  CrossoverOutcome out = crossover(p1, p2, ex, cfg, rng);
  for (const Network* ch : {&out.child1, &out.child2}) {
    const Node& o = ch->nodes[node_index(*ch).at(ch->output_ids[0])];
    CHECK(o.bias == -3.0);  // p2 is fitter
    CHECK(o.gate == Gate::Or);
    CHECK(link_weight(*ch, ch->input_ids[0], ch->output_ids[0]) == -0.7);
    CHECK(link_weight(*ch, ch->input_ids[1], ch->output_ids[0]) == 0.2);
  }

  // ties resolve toward the first parent
  p2.val_error = 0.4;
  Rng rng2(5);
  CrossoverOutcome tie = crossover(p1, p2, ex, cfg, rng2);
  const Network& ch = tie.child1;
  CHECK(ch.nodes[node_index(ch).at(ch.output_ids[0])].bias == -1.0);
  CHECK(link_weight(ch, ch.input_ids[0], ch.output_ids[0]) == 0.9);

  Candidate alien{demo_net(), 0.1, 0.1, 2};
  Rng rng3(5);
  CHECK_THROWS_AS(crossover(p1, alien, ex, cfg, rng3), NetError);
}

TEST_CASE("mutation strictly grows its parent") {
  RuleSet target = parse_rules(fixtures::kTargetRules);
  Examples ex = exhaustive_dataset(target).examples;
  RegentConfig cfg;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Candidate parent{demo_net(seed), 0.2, 0.2, 0};
    Rng rng(seed);
    Network child = mutate(parent, ex, cfg, rng);
    CHECK(child.hidden_count() > parent.net.hidden_count());
    CHECK_NOTHROW(topo_order(child));

    Rng rng2(seed);
    CHECK(mutate(parent, ex, cfg, rng2) == child);
  }

  // an error-free parent still mutates (uniform site)
  Examples easy = {{{1.0, 1.0, 1.0, 1.0}, 1}};
  Network strong = demo_net();
  for (auto& n : strong.nodes)
    if (n.kind == NodeKind::Output) n.bias = 100.0;
  Candidate perfect{strong, 0.0, 0.0, 0};
  Rng rng(1);
  Network grown = mutate(perfect, easy, cfg, rng);
  CHECK(grown.hidden_count() > strong.hidden_count());
}

TEST_CASE("roulette selection follows fitness mass") {
  Population pop;
  pop.capacity = 3;
  Network net = demo_net();
  pop.members.push_back({net, 1.0, 1.0, 0});  // fitness 0
  pop.members.push_back({net, 1.0, 1.0, 1});  // fitness 0
  pop.members.push_back({net, 0.0, 0.0, 2});  // fitness 1
  Rng rng(3);
  for (int t = 0; t < 50; ++t) CHECK(select_parent(pop, rng) == 2);

  for (auto& m : pop.members) m.val_error = 1.0;  // all-zero: uniform
  std::set<std::size_t> seen;
  for (int t = 0; t < 100; ++t) seen.insert(select_parent(pop, rng));
  CHECK(seen == std::set<std::size_t>{0, 1, 2});

  Population empty;
  CHECK_THROWS_AS(select_parent(empty, rng), NetError);
}

TEST_CASE("steady-state insertion replaces the weakest oldest member") {
  Network net = demo_net();
  Population pop;
  pop.capacity = 3;
  CHECK(insert(pop, {net, 0.0, 0.3, 0}));
  CHECK(insert(pop, {net, 0.0, 0.5, 1}));
  CHECK(insert(pop, {net, 0.0, 0.5, 2}));
  REQUIRE(pop.members.size() == 3);

  // weaker than the minimum fitness: rejected
  CHECK_FALSE(insert(pop, {net, 0.0, 0.9, 3}));
  REQUIRE(pop.members.size() == 3);
  CHECK(pop.members[1].birth == 1);

  // ties on fitness evict the older of the two 0.5-error members
  CHECK(insert(pop, {net, 0.0, 0.4, 4}));
  std::multiset<std::uint64_t> births;
  for (const auto& m : pop.members) births.insert(m.birth);
  CHECK(births == std::multiset<std::uint64_t>{0, 2, 4});

  // equal fitness still enters, displacing the now-oldest weakest
  CHECK(insert(pop, {net, 0.0, 0.5, 5}));
  births.clear();
  for (const auto& m : pop.members) births.insert(m.birth);
  CHECK(births == std::multiset<std::uint64_t>{0, 4, 5});
}

TEST_CASE("random networks are legal and sized by the draw") {
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    Rng rng(seed);
    Network net = generate_random_network({"d", "e", "f", "g"}, {"a"}, 4, 4.0,
                                          0.05, rng);
    CHECK(net.feature_names == std::vector<std::string>{"d", "e", "f", "g"});
    CHECK(net.output_names == std::vector<std::string>{"a"});
    const Node& out = net.nodes[node_index(net).at(net.output_ids[0])];
    if (out.provenance == "a") {  // no splice reached the output
      CHECK(out.gate == Gate::Or);
      CHECK(out.bias == -2.0);
    } else {
      CHECK(out.provenance == "added");  // growth handed the role onward
    }
    CHECK(net.hidden_count() >= 1);
    CHECK(net.hidden_count() <= 5);  // a splice can overshoot the draw by one
    CHECK_NOTHROW(topo_order(net));
  }
  Rng rng(0);
  CHECK_THROWS_AS(generate_random_network({"x"}, {}, 3, 4.0, 0.05, rng),
                  NetError);
}

TEST_CASE("population seeding honors the theory fraction") {
  RuleSet rs = parse_rules(fixtures::kDemoRules);
  Examples ex = exhaustive_dataset(parse_rules(fixtures::kTargetRules)).examples;

  auto origins_with = [&](double fraction) {
    RegentConfig cfg = fast_config();
    cfg.knn_seed_fraction = fraction;
    cfg.budget = cfg.population_size;  // init only
    RegentResult res = regent_run(rs, rs.inputs, ex, cfg);
    std::vector<Origin> origins;
    for (const auto& m : res.population.members) origins.push_back(m.origin);
    return origins;
  };

  auto full = origins_with(1.0);  // 1 seed + 5 perturbed
  REQUIRE(full.size() == 6);
  CHECK(full[0] == Origin::Seed);
  CHECK(std::count(full.begin(), full.end(), Origin::Perturbed) == 5);

  auto mixed = origins_with(0.4);  // 1 seed + 2 perturbed + 3 random
  CHECK(mixed[0] == Origin::Seed);
  CHECK(std::count(mixed.begin(), mixed.end(), Origin::Perturbed) == 2);
  CHECK(std::count(mixed.begin(), mixed.end(), Origin::Random) == 3);

  auto none = origins_with(0.0);  // theory dropped entirely
  CHECK(std::count(none.begin(), none.end(), Origin::Random) == 6);
}

TEST_CASE("the run respects its budget and reports a monotone best") {
  RuleSet rs = parse_rules(fixtures::kDemoRules);
  Examples ex = exhaustive_dataset(parse_rules(fixtures::kTargetRules)).examples;
  RegentConfig cfg = fast_config();

  std::vector<Candidate> children;
  std::vector<double> bests;
  RunHooks hooks;
  hooks.on_child = [&](const Candidate& c) { children.push_back(c); };
  hooks.on_best = [&](const Candidate& c, std::size_t) {
    bests.push_back(c.val_error);
  };
  RegentResult res = regent_run(rs, rs.inputs, ex, cfg, hooks);

  // crossover cycles train two children, so one overshoot is allowed
  CHECK(res.networks_trained >= cfg.budget);
  CHECK(res.networks_trained <= cfg.budget + 1);
  CHECK(children.size() == res.networks_trained);
  for (std::size_t i = 1; i < bests.size(); ++i) CHECK(bests[i] <= bests[i - 1]);
  CHECK(res.best.val_error == bests.back());

  // the reported best is the best candidate ever trained
  for (const auto& c : children) CHECK_FALSE(improves_on(c, res.best));

  // trace: init row first, then monotone best and non-decreasing counts
  REQUIRE_FALSE(res.trace.empty());
  CHECK(res.trace.front().event == 'I');
  CHECK(res.trace.front().op == 'P');
  for (std::size_t i = 1; i < res.trace.size(); ++i) {
    CHECK(res.trace[i].best_val_error <= res.trace[i - 1].best_val_error);
    CHECK(res.trace[i].networks_trained >= res.trace[i - 1].networks_trained);
  }
  CHECK(res.final_checkpoint.config_digest == config_digest(cfg));
  CHECK(res.final_checkpoint.networks_trained == res.networks_trained);

  // validation_fraction 0 scores fitness on the training set
  for (const auto& m : res.population.members)
    CHECK(m.train_error == m.val_error);

  // bit-identical rerun, also under a thread pool
  RegentResult again = regent_run(rs, rs.inputs, ex, cfg, {}, 3);
  CHECK(again.best.net == res.best.net);
  CHECK(again.trace == res.trace);
  CHECK(again.networks_trained == res.networks_trained);
}

TEST_CASE("a pure-mutation run does no crossover and lands on budget") {
  RuleSet rs = parse_rules(fixtures::kDemoRules);
  Examples ex = exhaustive_dataset(parse_rules(fixtures::kTargetRules)).examples;
  RegentConfig cfg = fast_config();
  cfg.mutation_fraction = 1.0;
  cfg.budget = cfg.population_size + 7;

  std::vector<Candidate> children;
  RunHooks hooks;
  hooks.on_child = [&](const Candidate& c) { children.push_back(c); };
  RegentResult res = regent_run(rs, rs.inputs, ex, cfg, hooks);

  CHECK(res.networks_trained == cfg.budget);  // one child per cycle: exact
  for (const auto& row : res.trace)
    if (row.event == 'C') CHECK(row.op == 'M');
  for (const auto& c : children) {
    CHECK(c.origin != Origin::Crossover);
    if (c.origin == Origin::Mutation)
      CHECK(c.hidden() > c.parent_hidden);  // mutation only ever grows
  }

  cfg.mutation_fraction = 0.0;  // all crossover: every cycle trains a pair
  cfg.budget = cfg.population_size + 1;
  RegentResult xo = regent_run(rs, rs.inputs, ex, cfg);
  CHECK(xo.networks_trained == cfg.budget + 1);
}

TEST_CASE("run preconditions are enforced") {
  RuleSet rs = parse_rules(fixtures::kDemoRules);
  Examples ex = exhaustive_dataset(parse_rules(fixtures::kTargetRules)).examples;
  RegentConfig cfg = fast_config();

  cfg.budget = cfg.population_size - 1;
  CHECK_THROWS_AS(regent_run(rs, rs.inputs, ex, cfg), NetError);
  cfg = fast_config();
  CHECK_THROWS_AS(regent_run(rs, rs.inputs, {}, cfg), NetError);
  cfg = fast_config();
  cfg.mutation_fraction = 1.5;
  CHECK_THROWS_AS(regent_run(rs, rs.inputs, ex, cfg), std::invalid_argument);
  cfg = fast_config();
  cfg.population_size = 0;
  CHECK_THROWS_AS(regent_run(rs, rs.inputs, ex, cfg), std::invalid_argument);

  RuleSet no_out;
  no_out.inputs = {"d", "e", "f", "g"};
  cfg = fast_config();
  CHECK_THROWS_AS(regent_run(no_out, no_out.inputs, ex, cfg), NetError);
}
