#pragma once

// Synthetic theory generation for studies and stress tests. Produces a
// target rule set plus an impoverished variant (rules dropped, antecedents
// dropped or added) that plays the role of an approximately-correct domain
// theory, and samples labeled datasets from a theory's truth table.
//
// Structural guarantees of the generator (inputs x0.., intermediates h0..,
// single output y):
//   - intermediates sit on two levels: level-1 bodies use inputs only,
//     level-2 intermediates have a single rule that may chain one level-1
//     intermediate;
//   - every rule body references at most one intermediate;
//   - a multi-rule output's bodies only reference single-rule level-1
//     intermediates; a single-rule output may chain any intermediate.
// These keep translated networks faithful to the theory at depth 3 for
// reasonable weight settings, which the translation fidelity suite leans on.

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "regent/dataset.hpp"
#include "regent/rng.hpp"
#include "regent/rules.hpp"

namespace regent {

struct SynthesisParams {
  int input_count = 8;
  int intermediate_count = 3;
  IntRange rules_per_consequent{1, 2};
  IntRange antecedents_per_rule{1, 3};
  double negation_prob = 0.0;
  double drop_rule_prob = 0.0;        // corruption: whole rule removed
  double drop_antecedent_prob = 0.0;  // corruption: literal removed
  double add_antecedent_prob = 0.0;   // corruption: spurious input literal
  std::uint64_t seed = 0;
  int max_retries = 100;

  void validate() const {
    if (input_count < 1) throw std::invalid_argument("need at least one input");
    if (intermediate_count < 0)
      throw std::invalid_argument("negative intermediate count");
    if (rules_per_consequent.lo < 1 ||
        rules_per_consequent.hi < rules_per_consequent.lo)
      throw std::invalid_argument("bad rules_per_consequent range");
    if (antecedents_per_rule.lo < 1 ||
        antecedents_per_rule.hi < antecedents_per_rule.lo)
      throw std::invalid_argument("bad antecedents_per_rule range");
  }
};

namespace detail {

// drop definitions of intermediates that nothing references (keeps the
// output set stable under a print/parse round trip)
inline void prune_dead_rules(RuleSet& rs) {
  for (;;) {
    std::unordered_set<std::string> referenced(rs.outputs.begin(),
                                               rs.outputs.end());
    for (const auto& r : rs.rules)
      for (const auto& l : r.antecedents) referenced.insert(l.symbol);
    std::size_t before = rs.rules.size();
    std::erase_if(rs.rules,
                  [&](const Rule& r) { return !referenced.count(r.consequent); });
    if (rs.rules.size() == before) return;
  }
}

// remove literals whose symbol is neither an input nor a surviving
// consequent; rules emptied by this (or emptied by corruption) are dropped,
// cascading until stable
inline void cascade_undefined(RuleSet& rs) {
  for (;;) {
    std::unordered_set<std::string> defined(rs.inputs.begin(), rs.inputs.end());
    for (const auto& r : rs.rules) defined.insert(r.consequent);
    bool changed = false;
    for (auto& r : rs.rules) {
      std::size_t before = r.antecedents.size();
      std::erase_if(r.antecedents, [&](const Literal& l) {
        return !defined.count(l.symbol);
      });
      changed = changed || r.antecedents.size() != before;
    }
    std::size_t before = rs.rules.size();
    std::erase_if(rs.rules, [](const Rule& r) { return r.antecedents.empty(); });
    changed = changed || rs.rules.size() != before;
    if (!changed) return;
  }
}

}  // namespace detail

// Returns (target, impoverished). Both share the full declared input space
// and the single output "y"; the impoverished set is guaranteed to keep at
// least one rule for the output.
inline std::pair<RuleSet, RuleSet> synthesize_theory(
    const SynthesisParams& params) {
  params.validate();
  Rng rng(params.seed);

  std::vector<std::string> inputs;
  for (int i = 0; i < params.input_count; ++i)
    inputs.push_back("x" + std::to_string(i));

  auto draw_count = [&](const IntRange& r) {
    return static_cast<int>(rng.range(r.lo, r.hi));
  };

  for (int attempt = 0; attempt < params.max_retries; ++attempt) {
    RuleSet target;
    target.inputs = inputs;
    target.outputs = {"y"};

    int level1 = (params.intermediate_count + 1) / 2;
    std::vector<std::string> l1_single, l1_any, l2;
    auto make_body = [&](const std::vector<std::string>& int_pool,
                         double int_prob) {
      std::vector<Literal> body;
      int want = draw_count(params.antecedents_per_rule);
      bool use_int = !int_pool.empty() && rng.bernoulli(int_prob);
      if (use_int) {
        const std::string& h =
            int_pool[static_cast<std::size_t>(rng.below(int_pool.size()))];
        body.push_back({h, rng.bernoulli(params.negation_prob)});
      }
      std::vector<std::size_t> pool(inputs.size());
      for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
      rng.shuffle(pool);
      for (std::size_t i = 0;
           body.size() < static_cast<std::size_t>(want) && i < pool.size(); ++i)
        body.push_back(
            {inputs[pool[i]], rng.bernoulli(params.negation_prob)});
      return body;
    };

    for (int j = 0; j < params.intermediate_count; ++j) {
      std::string name = "h" + std::to_string(j);
      if (j < level1) {
        int k = draw_count(params.rules_per_consequent);
        for (int r = 0; r < k; ++r)
          target.rules.push_back({name, make_body({}, 0.0)});
        if (k == 1) l1_single.push_back(name);
        l1_any.push_back(name);
      } else {
        std::vector<std::string> pool = l1_any;
        target.rules.push_back({name, make_body(pool, 0.5)});
        l2.push_back(name);
      }
    }

    int k_out = draw_count(params.rules_per_consequent);
    if (k_out == 1) {
      std::vector<std::string> pool = l1_any;
      pool.insert(pool.end(), l2.begin(), l2.end());
      target.rules.push_back({"y", make_body(pool, 0.75)});
    } else {
      for (int r = 0; r < k_out; ++r)
        target.rules.push_back({"y", make_body(l1_single, 0.75)});
    }
    detail::prune_dead_rules(target);
    if (target.rules_for("y").empty()) continue;

    // impoverish a copy
    RuleSet impov = target;
    std::erase_if(impov.rules,
                  [&](const Rule&) { return rng.bernoulli(params.drop_rule_prob); });
    for (auto& r : impov.rules) {
      std::erase_if(r.antecedents, [&](const Literal&) {
        return rng.bernoulli(params.drop_antecedent_prob);
      });
      if (!r.antecedents.empty() && rng.bernoulli(params.add_antecedent_prob)) {
        std::unordered_set<std::string> present;
        for (const auto& l : r.antecedents) present.insert(l.symbol);
        std::vector<std::string> candidates;
        for (const auto& in : inputs)
          if (!present.count(in)) candidates.push_back(in);
        if (!candidates.empty()) {
          const std::string& pick =
              candidates[static_cast<std::size_t>(rng.below(candidates.size()))];
          r.antecedents.push_back({pick, rng.bernoulli(params.negation_prob)});
        }
      }
    }
    std::erase_if(impov.rules, [](const Rule& r) { return r.antecedents.empty(); });
    detail::cascade_undefined(impov);
    detail::prune_dead_rules(impov);
    if (impov.rules_for("y").empty()) continue;

    return {std::move(target), std::move(impov)};
  }
  throw RuleError("synthesize_theory: retry budget exhausted");
}

// Samples `count` distinct input assignments labeled by the theory's first
// output (class 1 = true). Classes are ["neg", "pos"].
inline Dataset dataset_from_theory(const RuleSet& rs, std::size_t count,
                                   std::uint64_t seed) {
  std::size_t d = rs.inputs.size();
  if (d == 0) throw RuleError("theory has no inputs");
  if (d > 62) throw RuleError("too many inputs to sample assignments");
  Rng rng(seed);

  std::vector<std::uint64_t> picks;
  if (d <= 20) {
    std::uint64_t total = 1ULL << d;
    if (count > total)
      throw RuleError("asked for more distinct assignments than exist");
    std::vector<std::uint64_t> all(total);
    for (std::uint64_t i = 0; i < total; ++i) all[i] = i;
    rng.shuffle(all);
    picks.assign(all.begin(),
                 all.begin() + static_cast<std::ptrdiff_t>(count));
  } else {
    std::unordered_set<std::uint64_t> seen;
    while (seen.size() < count) seen.insert(rng.raw() >> (64 - d));
    picks.assign(seen.begin(), seen.end());
    std::sort(picks.begin(), picks.end());
    rng.shuffle(picks);
  }

  Dataset ds;
  for (const auto& in : rs.inputs) ds.space.features.push_back({in, {}});
  ds.space.classes = {"neg", "pos"};
  ds.encoded_names = encoded_feature_names(ds.space);
  std::vector<bool> bits(d);
  for (std::uint64_t p : picks) {
    Example ex;
    ex.features.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
      bits[i] = (p >> i) & 1;
      ex.features[i] = bits[i] ? 1.0 : 0.0;
    }
    ex.label = evaluate_output(rs, bits) ? 1 : 0;
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

// Every assignment over the theory's inputs, labeled; inputs capped at 16.
inline Dataset exhaustive_dataset(const RuleSet& rs) {
  std::size_t d = rs.inputs.size();
  if (d > 16) throw RuleError("exhaustive dataset capped at 16 inputs");
  Dataset ds;
  for (const auto& in : rs.inputs) ds.space.features.push_back({in, {}});
  ds.space.classes = {"neg", "pos"};
  ds.encoded_names = encoded_feature_names(ds.space);
  std::vector<bool> bits(d);
  for (std::uint64_t p = 0; p < (1ULL << d); ++p) {
    Example ex;
    ex.features.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
      bits[i] = (p >> i) & 1;
      ex.features[i] = bits[i] ? 1.0 : 0.0;
    }
    ex.label = evaluate_output(rs, bits) ? 1 : 0;
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

}  // namespace regent
