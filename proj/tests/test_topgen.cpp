#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <vector>

#include <regent/rules.hpp>
#include <regent/synth.hpp>
#include <regent/topgen.hpp>
#include <regent/translate.hpp>

#include "helpers.hpp"

using namespace regent;

namespace {

// i0, i1 -> h (Or), g (And), q (And) -> o; o's bias forces the prediction
struct BlameNet {
  Network net;
  std::size_t i0, i1, h, g, q, o;  // node indices
};

BlameNet blame_net(double out_bias) {
  BlameNet b;
  Network& net = b.net;
  NodeId i0 = net.add_node(NodeKind::Input, Gate::And, 0.0, "i0");
  NodeId i1 = net.add_node(NodeKind::Input, Gate::And, 0.0, "i1");
  NodeId q = net.add_node(NodeKind::And, Gate::And, 0.0, "q");
  NodeId h = net.add_node(NodeKind::Or, Gate::Or, 0.0, "h");
  NodeId g = net.add_node(NodeKind::And, Gate::And, 0.0, "g");
  NodeId o = net.add_node(NodeKind::Output, Gate::And, out_bias, "o");
  net.input_ids = {i0, i1};
  net.output_ids = {o};
  net.feature_names = {"i0", "i1"};
  net.output_names = {"o"};
  net.add_link(i0, q, 4.0);
  net.add_link(q, h, 4.0);
  net.add_link(q, g, 4.0);
  net.add_link(h, o, 4.0);
  net.add_link(g, o, -4.0);
  net.add_link(i1, o, 0.5);  // below tau
  b.i0 = 0, b.i1 = 1, b.q = 2, b.h = 3, b.g = 4, b.o = 5;
  return b;
}

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

const Node& node_of(const Network& net, NodeId id) {
  return net.nodes[node_index(net).at(id)];
}

double link_weight(const Network& net, NodeId s, NodeId t) {
  for (const auto& l : net.links)
    if (l.source == s && l.target == t) return l.weight;
  throw std::runtime_error("no such link");
}

bool has_link(const Network& net, NodeId s, NodeId t) {
  for (const auto& l : net.links)
    if (l.source == s && l.target == t) return true;
  return false;
}

}  // namespace

TEST_CASE("blame flips sense across negative links and skips light ones") {
  // output stuck low: a positive example is a false negative at o
  BlameNet b = blame_net(-100.0);
  Examples ex = {{{1.0, 1.0}, 1}, {{0.0, 0.0}, 0}};  // second is correct
  NodeErrorStats st = attribute_errors(b.net, ex, 1.0);
  CHECK(st.fn[b.o] == 1);
  CHECK(st.fn[b.h] == 1);  // +4 into o keeps the FN sense
  CHECK(st.fp[b.g] == 1);  // -4 into o flips it
  CHECK(st.fn[b.q] == 1);  // via h
  CHECK(st.fp[b.q] == 1);  // via g: both senses, each once
  CHECK(st.fp[b.o] == 0);
  CHECK(st.fn[b.g] == 0);
  CHECK(st.fp[b.h] == 0);
  CHECK(st.fn[b.i0] + st.fp[b.i0] == 0);  // inputs never blamed
  CHECK(st.fn[b.i1] + st.fp[b.i1] == 0);  // light link not followed either

  // output stuck high: mirrored senses
  BlameNet c = blame_net(100.0);
  NodeErrorStats st2 = attribute_errors(c.net, {{{1.0, 1.0}, 0}}, 1.0);
  CHECK(st2.fp[c.o] == 1);
  CHECK(st2.fp[c.h] == 1);
  CHECK(st2.fn[c.g] == 1);
  CHECK(st2.fp[c.q] == 1);
  CHECK(st2.fn[c.q] == 1);

  // a high tau strands the walk at the output
  NodeErrorStats st3 = attribute_errors(b.net, ex, 5.0);
  CHECK(st3.fn[b.o] == 1);
  CHECK(st3.fn[b.h] + st3.fp[b.g] + st3.fn[b.q] + st3.fp[b.q] == 0);

  // two misclassified copies count twice at the output
  NodeErrorStats st4 = attribute_errors(b.net, {{{1, 1}, 1}, {{1, 1}, 1}}, 1.0);
  CHECK(st4.fn[b.o] == 2);
}

TEST_CASE("multi-output blame walks the wanted and the predicted output") {
  Network net;
  NodeId i = net.add_node(NodeKind::Input, Gate::And, 0.0, "i");
  NodeId h0 = net.add_node(NodeKind::And, Gate::And, 0.0, "h0");
  NodeId h1 = net.add_node(NodeKind::And, Gate::And, 0.0, "h1");
  NodeId o0 = net.add_node(NodeKind::Output, Gate::And, 10.0, "o0");
  NodeId o1 = net.add_node(NodeKind::Output, Gate::And, -10.0, "o1");
  net.input_ids = {i};
  net.output_ids = {o0, o1};
  net.feature_names = {"i"};
  net.output_names = {"o0", "o1"};
  net.add_link(i, h0, 4.0);
  net.add_link(i, h1, 4.0);
  net.add_link(h0, o0, 4.0);
  net.add_link(h1, o1, 4.0);

  // predicted 0, wanted 1
  NodeErrorStats st = attribute_errors(net, {{{1.0}, 1}}, 1.0);
  auto idx = node_index(net);
  CHECK(st.fn[idx.at(o1)] == 1);
  CHECK(st.fn[idx.at(h1)] == 1);
  CHECK(st.fp[idx.at(o0)] == 1);
  CHECK(st.fp[idx.at(h0)] == 1);
  CHECK(st.fn[idx.at(o0)] + st.fp[idx.at(o1)] == 0);

  CHECK_THROWS_AS(attribute_errors(net, {{{1.0}, 7}}, 1.0), NetError);
}

TEST_CASE("expansion plans alternate between blame rankings") {
  Network net;
  net.add_node(NodeKind::Input, Gate::And, 0.0, "i");
  NodeId a = net.add_node(NodeKind::And, Gate::And, 0.0, "a");
  NodeId b = net.add_node(NodeKind::And, Gate::And, 0.0, "b");
  NodeId o = net.add_node(NodeKind::Output, Gate::And, 0.0, "o");
  net.input_ids = {net.nodes[0].id};
  net.output_ids = {o};

  NodeErrorStats st;
  st.fn = {9, 3, 0, 1};  // ranking: a, o (input and zero-blame b skipped)
  st.fp = {9, 0, 2, 5};  // ranking: o, b

  auto plan = plan_expansion(net, st, 4);
  REQUIRE(plan.size() == 4);
  CHECK(plan[0] == std::pair{a, ErrorKind::FalseNegative});
  CHECK(plan[1] == std::pair{o, ErrorKind::FalsePositive});
  CHECK(plan[2] == std::pair{o, ErrorKind::FalseNegative});  // dup across kinds
  CHECK(plan[3] == std::pair{b, ErrorKind::FalsePositive});

  // a short plan stops early; an exhausted ranking falls through to the other
  CHECK(plan_expansion(net, st, 2).size() == 2);
  NodeErrorStats fn_only;
  fn_only.fn = {0, 4, 2, 1};
  fn_only.fp = {0, 0, 0, 0};
  auto p2 = plan_expansion(net, fn_only, 4);
  REQUIRE(p2.size() == 3);
  CHECK(p2[0].first == a);
  CHECK(p2[1].first == b);
  CHECK(p2[2].first == o);
  for (const auto& [id, kind] : p2) CHECK(kind == ErrorKind::FalseNegative);

  NodeErrorStats clean;
  clean.fn = {0, 0, 0, 0};
  clean.fp = {0, 0, 0, 0};
  CHECK(plan_expansion(net, clean, 4).empty());
}

TEST_CASE("a false negative at an Or gains a fresh conjunction child") {
  Network net = demo_net();
  NodeId b = id_of(net, "b");
  std::size_t nodes_before = net.nodes.size();
  Rng rng(3);
  add_node_for_error(net, b, ErrorKind::FalseNegative, 4.0, 0.05, rng);

  REQUIRE(net.nodes.size() == nodes_before + 1);
  const Node& fresh = net.nodes.back();
  CHECK(fresh.kind == NodeKind::And);
  CHECK(fresh.provenance == "added");
  CHECK(fresh.bias == 2.0);  // omega / 2
  CHECK(link_weight(net, fresh.id, b) == 4.0);
  for (NodeId in : net.input_ids) {
    CHECK(std::abs(link_weight(net, in, fresh.id)) <= 0.05);
  }
  CHECK(node_of(net, b).bias == -2.0);  // untouched
  CHECK_NOTHROW(topo_order(net));
}

TEST_CASE("a false negative at an And splices a disjunction above it") {
  Network net = demo_net();
  NodeId c = id_of(net, "c");
  NodeId a = id_of(net, "a");
  double c_to_a = link_weight(net, c, a);
  std::size_t nodes_before = net.nodes.size();
  Rng rng(3);
  add_node_for_error(net, c, ErrorKind::FalseNegative, 4.0, 0.05, rng);

  REQUIRE(net.nodes.size() == nodes_before + 2);
  const Node& top = net.nodes[nodes_before];
  const Node& sibling = net.nodes[nodes_before + 1];
  CHECK(top.kind == NodeKind::Or);
  CHECK(top.bias == -2.0);  // -omega / 2
  CHECK(sibling.kind == NodeKind::And);
  CHECK(sibling.bias == 2.0);
  CHECK_FALSE(has_link(net, c, a));  // rerouted through the splice
  CHECK(link_weight(net, top.id, a) == c_to_a);
  CHECK(link_weight(net, c, top.id) == 4.0);
  CHECK(link_weight(net, sibling.id, top.id) == 4.0);
  CHECK(node_of(net, c).kind == NodeKind::And);
  CHECK_NOTHROW(topo_order(net));
}

TEST_CASE("a false positive at an And adds a conjunct and tightens the bias") {
  Network net = demo_net();
  NodeId c = id_of(net, "c");
  double bias_before = node_of(net, c).bias;
  Rng rng(3);
  add_node_for_error(net, c, ErrorKind::FalsePositive, 4.0, 0.05, rng);

  const Node& fresh = net.nodes.back();
  CHECK(fresh.kind == NodeKind::And);
  CHECK(link_weight(net, fresh.id, c) == 4.0);
  CHECK(node_of(net, c).bias == bias_before - 4.0);
  CHECK_NOTHROW(topo_order(net));
}

TEST_CASE("a false positive at an Or splices a conjunction above it") {
  Network net = demo_net();
  NodeId b = id_of(net, "b");
  NodeId a = id_of(net, "a");
  double b_to_a = link_weight(net, b, a);
  std::size_t nodes_before = net.nodes.size();
  Rng rng(3);
  add_node_for_error(net, b, ErrorKind::FalsePositive, 4.0, 0.05, rng);

  const Node& top = net.nodes[nodes_before];
  CHECK(top.kind == NodeKind::And);
  CHECK(top.bias == -6.0);  // -1.5 omega
  CHECK_FALSE(has_link(net, b, a));
  CHECK(link_weight(net, top.id, a) == b_to_a);
  CHECK(link_weight(net, b, top.id) == 4.0);
  CHECK(node_of(net, b).kind == NodeKind::Or);
  CHECK_NOTHROW(topo_order(net));
}

TEST_CASE("splicing at an output hands over the output role") {
  Network net = demo_net();
  NodeId a = id_of(net, "a");
  std::size_t nodes_before = net.nodes.size();
  Rng rng(3);
  // output a houses an And rule, so an FN splices an Or above it
  add_node_for_error(net, a, ErrorKind::FalseNegative, 4.0, 0.05, rng);

  const Node& top = net.nodes[nodes_before];
  CHECK(top.kind == NodeKind::Output);
  CHECK(top.gate == Gate::Or);
  CHECK(top.bias == -2.0);
  CHECK(node_of(net, a).kind == NodeKind::And);  // demoted to hidden
  CHECK(net.output_ids == std::vector<NodeId>{top.id});
  CHECK(link_weight(net, a, top.id) == 4.0);
  CHECK_NOTHROW(topo_order(net));

  // the same output takes a conjunct (no splice) on a false positive
  Network net2 = demo_net();
  NodeId a2 = id_of(net2, "a");
  double bias_before = node_of(net2, a2).bias;
  Rng rng2(3);
  add_node_for_error(net2, a2, ErrorKind::FalsePositive, 4.0, 0.05, rng2);
  CHECK(node_of(net2, a2).kind == NodeKind::Output);
  CHECK(node_of(net2, a2).bias == bias_before - 4.0);
  CHECK(net2.output_ids == std::vector<NodeId>{a2});
}

TEST_CASE("random additions grow legal networks deterministically") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Network net = demo_net();
    std::size_t before = net.nodes.size();
    Rng rng(seed);
    random_addition(net, 4.0, 0.05, rng);
    CHECK(net.nodes.size() >= before + 1);
    CHECK_NOTHROW(topo_order(net));

    Network again = demo_net();
    Rng rng2(seed);
    random_addition(again, 4.0, 0.05, rng2);
    CHECK(net == again);
  }
}

TEST_CASE("the search trains exactly as many networks as the budget allows") {
  RuleSet impov = parse_rules(fixtures::kDemoRules);
  RuleSet target = parse_rules(fixtures::kTargetRules);
  Examples ex = exhaustive_dataset(target).examples;
  // a contradictory duplicate keeps at least one error alive forever,
  // so the search can never run out of nodes to blame
  Example twin = ex.front();
  twin.label = 1 - twin.label;
  ex.push_back(twin);
  TranslationParams tp;
  tp.seed = 1;
  Network start = translate(impov, impov.inputs, tp);

  TopGenParams params;
  params.seed = 2;
  params.train.epochs = 8;

  params.budget = 1;
  TopGenResult only_seed = topgen_search(start, ex, ex, params);
  CHECK(only_seed.networks_trained == 1);
  CHECK(only_seed.best.net.hidden_count() == start.hidden_count());

  params.budget = 9;
  std::vector<std::size_t> counts;
  std::vector<Candidate> bests;
  SearchHooks hooks;
  hooks.on_best = [&](const Candidate& c, std::size_t n) {
    bests.push_back(c);
    counts.push_back(n);
  };
  TopGenResult res = topgen_search(start, ex, ex, params, hooks);
  CHECK(res.networks_trained == 9);
  REQUIRE_FALSE(bests.empty());
  CHECK(counts.front() == 1);  // the seed reports first
  for (std::size_t i = 1; i < bests.size(); ++i) {
    CHECK(counts[i] > counts[i - 1]);
    CHECK(improves_on(bests[i], bests[i - 1]));
  }
  CHECK(res.best.val_error == bests.back().val_error);
  CHECK(res.best.net == bests.back().net);
  CHECK(res.best.val_error <= only_seed.best.val_error);

  TopGenResult again = topgen_search(start, ex, ex, params);
  CHECK(again.networks_trained == res.networks_trained);
  CHECK(again.best.net == res.best.net);
}

TEST_CASE("a perfect seed ends the search with the budget unspent") {
  RuleSet target = parse_rules(fixtures::kTargetRules);
  Examples ex = exhaustive_dataset(target).examples;
  TranslationParams tp;
  tp.seed = 1;
  Network start = translate(target, target.inputs, tp);
  TopGenParams params;
  params.budget = 10;
  params.seed = 2;
  TopGenResult res = topgen_search(start, ex, ex, params);
  CHECK(res.networks_trained == 1);
  CHECK(res.best.train_error == 0.0);
}

TEST_CASE("search input validation") {
  Network start = demo_net();
  TopGenParams params;
  CHECK_THROWS_AS(topgen_search(start, {}, {}, params), NetError);
  params.budget = 0;
  Examples one = {{{0, 0, 0, 0}, 0}};
  CHECK_THROWS_AS(topgen_search(start, one, one, params),
                  std::invalid_argument);
  params = {};
  params.omega = 0.0;
  CHECK_THROWS_AS(topgen_search(start, one, one, params),
                  std::invalid_argument);
  params = {};
  params.children_per_expansion = 0;
  CHECK_THROWS_AS(topgen_search(start, one, one, params),
                  std::invalid_argument);
  params = {};
  params.tau = -1.0;
  CHECK_THROWS_AS(topgen_search(start, one, one, params),
                  std::invalid_argument);
}

TEST_CASE("candidate comparison breaks ties in order") {
  Network small = demo_net();
  Network big = demo_net();
  Rng rng(1);
  random_addition(big, 4.0, 0.05, rng);

  Candidate a{small, 0.1, 0.2, 3};
  Candidate b{small, 0.3, 0.4, 2};
  CHECK(improves_on(a, b));  // val error first
  CHECK_FALSE(improves_on(b, a));

  Candidate c{big, 0.1, 0.2, 1};
  CHECK(improves_on(a, c));  // then hidden count
  Candidate d{small, 0.1, 0.2, 2};
  CHECK(improves_on(d, a));  // then age
  CHECK_FALSE(improves_on(a, a));  // strict

  CHECK(a.fitness() == Catch::Approx(0.8));
  CHECK(a.hidden() == small.hidden_count());
  CHECK(a.link_count() == small.links.size());
}
