#pragma once

// Online backpropagation with momentum over the DAG networks. Training never
// changes topology: it returns a copy of the network with updated weights
// and biases, which is what lets refined weights ride along through the
// genetic operators (Lamarckian inheritance).
//
// Loss per example is the sum of squared output errors against 0/1 targets;
// the single labeled output (or the only output) targets 1, the rest 0.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

#include "regent/example.hpp"
#include "regent/network.hpp"
#include "regent/rng.hpp"

namespace regent {

struct TrainParams {
  double learning_rate = 0.10;
  double momentum = 0.9;
  int epochs = 20;
  std::uint64_t seed = 0;
};

struct ScoreReport {
  double correctness = 0.0;
  std::vector<std::vector<int>> confusion;  // [true label][predicted]
  int total = 0;

  double error() const { return 1.0 - correctness; }
};

namespace detail {

// Flattened view of a network for the inner loops: topologically ordered
// node slots with contiguous weight/bias arrays that map 1:1 back onto the
// Network's link and node vectors.
struct Plan {
  std::vector<std::size_t> order;  // non-input node indices, topo order
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>>
      incoming;  // per node index: (source node index, link index)
  std::vector<std::size_t> input_pos;   // node indices of inputs
  std::vector<std::size_t> output_pos;  // node indices of outputs
  std::vector<double> weights;          // parallel to net.links
  std::vector<double> biases;           // parallel to net.nodes

  explicit Plan(const Network& net) {
    auto idx = node_index(net);
    auto topo = topo_order(net);
    incoming.resize(net.nodes.size());
    for (std::size_t li = 0; li < net.links.size(); ++li) {
      const Link& l = net.links[li];
      incoming[idx.at(l.target)].push_back({idx.at(l.source), li});
    }
    for (std::size_t i : topo)
      if (net.nodes[i].kind != NodeKind::Input) order.push_back(i);
    for (NodeId id : net.input_ids) input_pos.push_back(idx.at(id));
    for (NodeId id : net.output_ids) output_pos.push_back(idx.at(id));
    weights.reserve(net.links.size());
    for (const auto& l : net.links) weights.push_back(l.weight);
    biases.resize(net.nodes.size());
    for (std::size_t i = 0; i < net.nodes.size(); ++i)
      biases[i] = net.nodes[i].bias;
  }

  void forward(const std::vector<double>& features,
               std::vector<double>& act) const {
    act.assign(biases.size(), 0.0);
    for (std::size_t i = 0; i < input_pos.size(); ++i)
      act[input_pos[i]] = features[i];
    for (std::size_t i : order) {
      double x = biases[i];
      for (const auto& [s, li] : incoming[i]) x += weights[li] * act[s];
      act[i] = sigmoid(x);
    }
  }

  // 0/1 targets for an example under the labeling convention
  void targets(int label, std::vector<double>& t) const {
    t.assign(output_pos.size(), 0.0);
    if (output_pos.size() == 1) {
      t[0] = (label == 1) ? 1.0 : 0.0;
    } else {
      if (label < 0 || static_cast<std::size_t>(label) >= output_pos.size())
        throw std::invalid_argument("label out of range for output count");
      t[static_cast<std::size_t>(label)] = 1.0;
    }
  }

  // Backward pass for one example; accumulates dLoss/dw and dLoss/dbias.
  // Loss = sum over outputs of (activation - target)^2.
  void backward(const std::vector<double>& act, const std::vector<double>& t,
                std::vector<double>& delta, std::vector<double>& grad_w,
                std::vector<double>& grad_b) const {
    delta.assign(biases.size(), 0.0);
    for (std::size_t o = 0; o < output_pos.size(); ++o) {
      std::size_t i = output_pos[o];
      double a = act[i];
      delta[i] = 2.0 * (a - t[o]) * a * (1.0 - a);
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      std::size_t i = *it;
      if (delta[i] == 0.0) continue;
      for (const auto& [s, li] : incoming[i]) {
        grad_w[li] += delta[i] * act[s];
        delta[s] += delta[i] * weights[li] * act[s] * (1.0 - act[s]);
      }
      grad_b[i] += delta[i];
    }
  }
};

}  // namespace detail

// Gradient of the total loss over a batch; exposed so the analytic gradient
// can be audited against finite differences. Returns (loss, dL/dweights
// parallel to net.links, dL/dbiases parallel to net.nodes).
struct LossGradient {
  double loss = 0.0;
  std::vector<double> weight_grad;
  std::vector<double> bias_grad;
};

inline LossGradient loss_and_gradient(const Network& net,
                                      const Examples& examples) {
  detail::Plan plan(net);
  LossGradient out;
  out.weight_grad.assign(net.links.size(), 0.0);
  out.bias_grad.assign(net.nodes.size(), 0.0);
  std::vector<double> act, t, delta;
  for (const auto& ex : examples) {
    plan.forward(ex.features, act);
    plan.targets(ex.label, t);
    for (std::size_t o = 0; o < plan.output_pos.size(); ++o) {
      double d = act[plan.output_pos[o]] - t[o];
      out.loss += d * d;
    }
    plan.backward(act, t, delta, out.weight_grad, out.bias_grad);
  }
  return out;
}

// Online gradient descent: one weight update per example, momentum carried
// across updates, example order reshuffled each epoch from params.seed.
inline Network train(const Network& net, const Examples& examples,
                     const TrainParams& params) {
  if (params.epochs < 0) throw std::invalid_argument("negative epoch count");
  Network out = net;
  if (params.epochs == 0 || examples.empty()) return out;

  detail::Plan plan(out);
  for (const auto& ex : examples)
    if (ex.features.size() != plan.input_pos.size())
      throw std::invalid_argument("example width != network input count");

  std::vector<double> vel_w(plan.weights.size(), 0.0);
  std::vector<double> vel_b(plan.biases.size(), 0.0);
  std::vector<double> grad_w(plan.weights.size());
  std::vector<double> grad_b(plan.biases.size());
  std::vector<double> act, t, delta;
  std::vector<std::size_t> visit(examples.size());
  for (std::size_t i = 0; i < visit.size(); ++i) visit[i] = i;

  Rng rng(params.seed);
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    rng.shuffle(visit);
    for (std::size_t ei : visit) {
      const Example& ex = examples[ei];
      plan.forward(ex.features, act);
      plan.targets(ex.label, t);
      grad_w.assign(grad_w.size(), 0.0);
      grad_b.assign(grad_b.size(), 0.0);
      plan.backward(act, t, delta, grad_w, grad_b);
      for (std::size_t i = 0; i < plan.weights.size(); ++i) {
        vel_w[i] = params.momentum * vel_w[i] - params.learning_rate * grad_w[i];
        plan.weights[i] += vel_w[i];
      }
      for (std::size_t i : plan.order) {
        vel_b[i] = params.momentum * vel_b[i] - params.learning_rate * grad_b[i];
        plan.biases[i] += vel_b[i];
      }
    }
  }

  for (std::size_t i = 0; i < out.links.size(); ++i)
    out.links[i].weight = plan.weights[i];
  for (std::size_t i = 0; i < out.nodes.size(); ++i)
    out.nodes[i].bias = plan.biases[i];
  return out;
}

// Correctness plus confusion counts. Binary single-output networks use the
// "active output = class 1" convention; otherwise argmax against the label.
inline ScoreReport score(const Network& net, const Examples& examples) {
  detail::Plan plan(net);
  std::size_t classes =
      plan.output_pos.size() == 1 ? 2 : plan.output_pos.size();
  ScoreReport rep;
  rep.confusion.assign(classes, std::vector<int>(classes, 0));
  rep.total = static_cast<int>(examples.size());
  if (examples.empty()) {
    rep.correctness = 0.0;
    return rep;
  }
  std::vector<double> act;
  int hits = 0;
  for (const auto& ex : examples) {
    plan.forward(ex.features, act);
    int pred;
    if (plan.output_pos.size() == 1) {
      pred = act[plan.output_pos[0]] >= 0.5 ? 1 : 0;
    } else {
      std::size_t best = 0;
      for (std::size_t o = 1; o < plan.output_pos.size(); ++o)
        if (act[plan.output_pos[o]] > act[plan.output_pos[best]]) best = o;
      pred = static_cast<int>(best);
    }
    if (ex.label < 0 || static_cast<std::size_t>(ex.label) >= classes)
      throw std::invalid_argument("label out of range");
    rep.confusion[static_cast<std::size_t>(ex.label)]
                 [static_cast<std::size_t>(pred)] += 1;
    hits += (pred == ex.label) ? 1 : 0;
  }
  rep.correctness = static_cast<double>(hits) / static_cast<double>(rep.total);
  return rep;
}

// Mean activation per node over a batch (parallel to net.nodes). Feeds the
// crossover bias repair.
inline std::vector<double> mean_activations(const Network& net,
                                            const Examples& examples) {
  detail::Plan plan(net);
  std::vector<double> sum(net.nodes.size(), 0.0);
  if (examples.empty()) return sum;
  std::vector<double> act;
  for (const auto& ex : examples) {
    plan.forward(ex.features, act);
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += act[i];
  }
  for (double& s : sum) s /= static_cast<double>(examples.size());
  return sum;
}

struct SplitResult {
  Examples train;
  Examples validation;
  bool stratified = true;  // false if some class could not appear in both
};

// Stratified validation split: roughly `fraction` of each class, and every
// class lands in both parts when it has at least two members. Original
// relative order is preserved inside each part.
inline SplitResult split_validation(const Examples& examples, double fraction,
                                    std::uint64_t seed) {
  if (fraction < 0.0 || fraction >= 1.0)
    throw std::invalid_argument("fraction must sit in [0, 1)");
  SplitResult res;
  if (fraction == 0.0 || examples.empty()) {
    res.train = examples;
    return res;
  }

  std::unordered_map<int, std::vector<std::size_t>> by_class;
  std::vector<int> class_order;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    auto [it, fresh] = by_class.try_emplace(examples[i].label);
    if (fresh) class_order.push_back(examples[i].label);
    it->second.push_back(i);
  }

  Rng rng(seed);
  std::vector<char> in_val(examples.size(), 0);
  for (int label : class_order) {
    auto& members = by_class[label];
    std::size_t n = members.size();
    if (n < 2) {
      res.stratified = false;  // lone example stays in the training part
      continue;
    }
    auto picks = members;
    rng.shuffle(picks);
    auto want = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(n)));
    want = std::max<std::size_t>(want, 1);
    want = std::min(want, n - 1);
    for (std::size_t i = 0; i < want; ++i) in_val[picks[i]] = 1;
  }
  for (std::size_t i = 0; i < examples.size(); ++i)
    (in_val[i] ? res.validation : res.train).push_back(examples[i]);
  if (res.validation.empty() && examples.size() >= 2) {
    // all classes degenerate: fall back to an unstratified cut
    res.stratified = false;
    std::vector<std::size_t> all(examples.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    rng.shuffle(all);
    auto want = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(examples.size())));
    want = std::min(std::max<std::size_t>(want, 1), examples.size() - 1);
    std::vector<char> pick(examples.size(), 0);
    for (std::size_t i = 0; i < want; ++i) pick[all[i]] = 1;
    res.train.clear();
    for (std::size_t i = 0; i < examples.size(); ++i)
      (pick[i] ? res.validation : res.train).push_back(examples[i]);
  }
  return res;
}

}  // namespace regent
