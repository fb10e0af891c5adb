#pragma once

// Checkpoint persistence for REGENT runs: the whole population, RNG state,
// counters, best-so-far and trace, as one JSON document. Writes go to a
// temporary file in the target directory followed by a rename, so an
// interrupted write leaves the previous checkpoint intact.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "regent/evolve.hpp"
#include "regent/netio.hpp"

namespace regent {

inline const char* origin_name(Origin o) {
  switch (o) {
    case Origin::Seed: return "seed";
    case Origin::Perturbed: return "perturbed";
    case Origin::Random: return "random";
    case Origin::Mutation: return "mutation";
    case Origin::Crossover: return "crossover";
  }
  return "?";
}

inline Origin origin_from_name(const std::string& s) {
  if (s == "seed") return Origin::Seed;
  if (s == "perturbed") return Origin::Perturbed;
  if (s == "random") return Origin::Random;
  if (s == "mutation") return Origin::Mutation;
  if (s == "crossover") return Origin::Crossover;
  throw NetError("unknown candidate origin: " + s);
}

inline nlohmann::json candidate_to_json(const Candidate& c) {
  return {{"network", to_json(c.net)},
          {"train_error", c.train_error},
          {"val_error", c.val_error},
          {"birth", c.birth},
          {"origin", origin_name(c.origin)},
          {"parent_hidden", c.parent_hidden}};
}

inline Candidate candidate_from_json(const nlohmann::json& j) {
  Candidate c;
  c.net = network_from_json(j.at("network"));
  c.train_error = j.at("train_error").get<double>();
  c.val_error = j.at("val_error").get<double>();
  c.birth = j.at("birth").get<std::uint64_t>();
  c.origin = origin_from_name(j.at("origin").get<std::string>());
  c.parent_hidden = j.at("parent_hidden").get<std::size_t>();
  return c;
}

inline nlohmann::json trace_row_to_json(const TraceRow& r) {
  return {{"cycle", r.cycle},
          {"networks_trained", r.networks_trained},
          {"best_val_error", r.best_val_error},
          {"best_hidden", r.best_hidden},
          {"best_links", r.best_links},
          {"event", std::string(1, r.event)},
          {"op", std::string(1, r.op)}};
}

inline TraceRow trace_row_from_json(const nlohmann::json& j) {
  TraceRow r;
  r.cycle = j.at("cycle").get<std::uint64_t>();
  r.networks_trained = j.at("networks_trained").get<std::uint64_t>();
  r.best_val_error = j.at("best_val_error").get<double>();
  r.best_hidden = j.at("best_hidden").get<std::uint64_t>();
  r.best_links = j.at("best_links").get<std::uint64_t>();
  r.event = j.at("event").get<std::string>().at(0);
  r.op = j.at("op").get<std::string>().at(0);
  return r;
}

inline nlohmann::json checkpoint_to_json(const Checkpoint& ck) {
  nlohmann::json members = nlohmann::json::array();
  for (const auto& m : ck.population) members.push_back(candidate_to_json(m));
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& r : ck.trace) trace.push_back(trace_row_to_json(r));
  return {{"format", "regent-checkpoint"},
          {"version", 1},
          {"config_digest", ck.config_digest},
          {"networks_trained", ck.networks_trained},
          {"cycle", ck.cycle},
          {"births", ck.births},
          {"rng_state", ck.rng_state},
          {"population", std::move(members)},
          {"best", candidate_to_json(ck.best)},
          {"trace", std::move(trace)}};
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("format", "") != "regent-checkpoint")
    throw NetError("not a checkpoint document");
  if (j.at("version").get<int>() != 1)
    throw NetError("unsupported checkpoint version");
  Checkpoint ck;
  ck.config_digest = j.at("config_digest").get<std::string>();
  ck.networks_trained = j.at("networks_trained").get<std::uint64_t>();
  ck.cycle = j.at("cycle").get<std::uint64_t>();
  ck.births = j.at("births").get<std::uint64_t>();
  ck.rng_state = j.at("rng_state").get<std::string>();
  for (const auto& m : j.at("population"))
    ck.population.push_back(candidate_from_json(m));
  ck.best = candidate_from_json(j.at("best"));
  for (const auto& r : j.at("trace"))
    ck.trace.push_back(trace_row_from_json(r));
  return ck;
}

// write-temp-then-rename; a crash mid-write never corrupts `path`
inline void save_checkpoint(const Checkpoint& ck,
                            const std::filesystem::path& path) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw NetError("cannot write " + tmp.string());
    os << checkpoint_to_json(ck).dump(2) << '\n';
    os.flush();
    if (!os) throw NetError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw NetError("cannot read " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw NetError("malformed checkpoint " + path.string() + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace regent
