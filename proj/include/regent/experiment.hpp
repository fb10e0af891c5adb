#pragma once

// Cross-validation harness. Runs one algorithm arm (kbann, topgen, or
// regent) over stratified folds and writes, per run directory:
//   config.json          the fully resolved config echo
//   trace_fold<i>.csv    anytime curve: networks_trained, best_val_error,
//                        test_error_of_best, best_hidden_count, wall_seconds
//   best_fold<i>.json    the best network found on that fold
//   checkpoint_fold<i>.json  (regent arm, when checkpointing is enabled)
//   summary.csv          per-fold test error / sizes plus mean and stdev rows
//   status.json          written last; "complete": false flags partial output
//
// Seed discipline: everything derives from ExperimentConfig::seed. Fold
// splitting uses one derived seed; each fold then derives translation and
// search seeds from (seed, fold). The top-level train and translation
// sections are the settings for every arm; the topgen and regent sections
// carry only their own knobs and get train/translation copied in at run
// time, so the config echo plus this resolution rule reproduces a run
// bit-exactly in deterministic mode. Wall-clock columns are informational
// and excluded from that guarantee (summary.csv carries none).

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "checkpoint.hpp"
#include "csv.hpp"
#include "dataset.hpp"
#include "evolve.hpp"
#include "netio.hpp"
#include "rng.hpp"
#include "rules.hpp"
#include "topgen.hpp"
#include "train.hpp"
#include "translate.hpp"

namespace regent {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Algorithm { Kbann, Topgen, Regent };

inline const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::Kbann: return "kbann";
    case Algorithm::Topgen: return "topgen";
    default: return "regent";
  }
}

inline Algorithm algorithm_from_name(const std::string& s) {
  if (s == "kbann") return Algorithm::Kbann;
  if (s == "topgen") return Algorithm::Topgen;
  if (s == "regent") return Algorithm::Regent;
  throw ConfigError("unknown algorithm '" + s + "' (kbann|topgen|regent)");
}

inline const char* crossover_mode_name(CrossoverMode m) {
  return m == CrossoverMode::RulePreserving ? "rule_preserving"
                                            : "random_nodes";
}

inline CrossoverMode crossover_mode_from_name(const std::string& s) {
  if (s == "rule_preserving") return CrossoverMode::RulePreserving;
  if (s == "random_nodes") return CrossoverMode::RandomNodes;
  throw ConfigError("unknown crossover_mode '" + s +
                    "' (rule_preserving|random_nodes)");
}

struct ExperimentPaths {
  std::string rules;
  std::string dataset;
  std::string output_dir = "run";
  std::string checkpoint;  // regent/resume subcommands; unused by folds
};

struct ExperimentConfig {
  ExperimentPaths paths;
  Algorithm algorithm = Algorithm::Regent;
  TranslationParams translation;
  TrainParams train;
  TopGenParams topgen;
  RegentConfig regent;
  int k = 10;
  std::uint64_t seed = 0;

  void validate() const {
    if (k < 2) throw ConfigError("k must be at least 2");
    try {
      translation.validate();
      topgen.validate();
      regent.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (train.epochs < 0) throw ConfigError("negative epoch count");
    if (paths.rules.empty()) throw ConfigError("paths.rules is required");
    if (paths.dataset.empty()) throw ConfigError("paths.dataset is required");
  }
};

namespace detail {

inline void expect_keys(const nlohmann::json& j,
                        std::initializer_list<const char*> keys,
                        const char* where) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : keys)
      if (item.key() == k) known = true;
    if (!known)
      throw ConfigError(std::string("unknown config key '") + item.key() +
                        "' in " + where);
  }
}

template <typename T>
inline void maybe(const nlohmann::json& j, const char* key, T& slot) {
  if (!j.contains(key)) return;
  try {
    slot = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("bad value for config key '") + key + "'");
  }
}

}  // namespace detail

inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["paths"] = {{"rules", cfg.paths.rules},
                {"dataset", cfg.paths.dataset},
                {"output_dir", cfg.paths.output_dir},
                {"checkpoint", cfg.paths.checkpoint}};
  j["algorithm"] = algorithm_name(cfg.algorithm);
  j["k"] = cfg.k;
  j["seed"] = cfg.seed;
  j["translation"] = {{"omega", cfg.translation.omega},
                      {"low_weight", cfg.translation.low_weight},
                      {"seed", cfg.translation.seed}};
  j["train"] = {{"learning_rate", cfg.train.learning_rate},
                {"momentum", cfg.train.momentum},
                {"epochs", cfg.train.epochs},
                {"seed", cfg.train.seed}};
  j["topgen"] = {{"omega", cfg.topgen.omega},
                 {"low_weight", cfg.topgen.low_weight},
                 {"tau", cfg.topgen.tau},
                 {"children_per_expansion", cfg.topgen.children_per_expansion},
                 {"budget", cfg.topgen.budget},
                 {"seed", cfg.topgen.seed}};
  j["regent"] = {
      {"population_size", cfg.regent.population_size},
      {"mutation_fraction", cfg.regent.mutation_fraction},
      {"knn_seed_fraction", cfg.regent.knn_seed_fraction},
      {"budget", cfg.regent.budget},
      {"perturbations_per_member",
       {{"lo", cfg.regent.perturbations_per_member.lo},
        {"hi", cfg.regent.perturbations_per_member.hi}}},
      {"deletion_prob", cfg.regent.deletion_prob},
      {"crossover_mode", crossover_mode_name(cfg.regent.crossover_mode)},
      {"validation_fraction", cfg.regent.validation_fraction},
      {"checkpoint_cycles", cfg.regent.checkpoint_cycles},
      {"seed", cfg.regent.seed}};
  return j;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  using detail::expect_keys;
  using detail::maybe;
  if (!j.is_object()) throw ConfigError("config root must be an object");
  expect_keys(j,
              {"paths", "algorithm", "k", "seed", "translation", "train",
               "topgen", "regent"},
              "config root");
  ExperimentConfig cfg;
  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    expect_keys(p, {"rules", "dataset", "output_dir", "checkpoint"}, "paths");
    maybe(p, "rules", cfg.paths.rules);
    maybe(p, "dataset", cfg.paths.dataset);
    maybe(p, "output_dir", cfg.paths.output_dir);
    maybe(p, "checkpoint", cfg.paths.checkpoint);
  }
  if (j.contains("algorithm"))
    cfg.algorithm = algorithm_from_name(j.at("algorithm").get<std::string>());
  maybe(j, "k", cfg.k);
  maybe(j, "seed", cfg.seed);
  if (j.contains("translation")) {
    const auto& t = j.at("translation");
    expect_keys(t, {"omega", "low_weight", "seed"}, "translation");
    maybe(t, "omega", cfg.translation.omega);
    maybe(t, "low_weight", cfg.translation.low_weight);
    maybe(t, "seed", cfg.translation.seed);
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    expect_keys(t, {"learning_rate", "momentum", "epochs", "seed"}, "train");
    maybe(t, "learning_rate", cfg.train.learning_rate);
    maybe(t, "momentum", cfg.train.momentum);
    maybe(t, "epochs", cfg.train.epochs);
    maybe(t, "seed", cfg.train.seed);
  }
  if (j.contains("topgen")) {
    const auto& t = j.at("topgen");
    expect_keys(t,
                {"omega", "low_weight", "tau", "children_per_expansion",
                 "budget", "seed"},
                "topgen");
    maybe(t, "omega", cfg.topgen.omega);
    maybe(t, "low_weight", cfg.topgen.low_weight);
    maybe(t, "tau", cfg.topgen.tau);
    maybe(t, "children_per_expansion", cfg.topgen.children_per_expansion);
    maybe(t, "budget", cfg.topgen.budget);
    maybe(t, "seed", cfg.topgen.seed);
  }
  if (j.contains("regent")) {
    const auto& r = j.at("regent");
    expect_keys(r,
                {"population_size", "mutation_fraction", "knn_seed_fraction",
                 "budget", "perturbations_per_member", "deletion_prob",
                 "crossover_mode", "validation_fraction", "checkpoint_cycles",
                 "seed"},
                "regent");
    maybe(r, "population_size", cfg.regent.population_size);
    maybe(r, "mutation_fraction", cfg.regent.mutation_fraction);
    maybe(r, "knn_seed_fraction", cfg.regent.knn_seed_fraction);
    maybe(r, "budget", cfg.regent.budget);
    if (r.contains("perturbations_per_member")) {
      const auto& p = r.at("perturbations_per_member");
      expect_keys(p, {"lo", "hi"}, "perturbations_per_member");
      maybe(p, "lo", cfg.regent.perturbations_per_member.lo);
      maybe(p, "hi", cfg.regent.perturbations_per_member.hi);
    }
    maybe(r, "deletion_prob", cfg.regent.deletion_prob);
    if (r.contains("crossover_mode"))
      cfg.regent.crossover_mode =
          crossover_mode_from_name(r.at("crossover_mode").get<std::string>());
    maybe(r, "validation_fraction", cfg.regent.validation_fraction);
    maybe(r, "checkpoint_cycles", cfg.regent.checkpoint_cycles);
    maybe(r, "seed", cfg.regent.seed);
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  return config_from_json(j);
}

// Picks the loader from the file extension: ".dna" rows are label+sequence,
// anything else is read as a feature file.
inline Dataset load_any_dataset(const std::string& path) {
  if (std::filesystem::path(path).extension() == ".dna")
    return load_dna(path);
  return load_features(path);
}

struct FoldOutcome {
  int fold = 0;
  double test_error = 0.0;
  std::uint64_t best_hidden = 0;
  std::uint64_t best_links = 0;
  std::uint64_t networks_trained = 0;
  double wall_seconds = 0.0;
};

struct ExperimentResult {
  std::vector<FoldOutcome> folds;
  double mean_test_error = 0.0;
  double stdev_test_error = 0.0;
  double mean_hidden = 0.0;
  double stdev_hidden = 0.0;
};

namespace detail {

struct TracePoint {
  std::uint64_t networks_trained = 0;
  double best_val_error = 0.0;
  double test_error_of_best = 0.0;
  std::uint64_t best_hidden = 0;
  double wall_seconds = 0.0;
};

// Keeps networks_trained strictly increasing: a better network at an
// already-recorded count overwrites that row.
inline void push_point(std::vector<TracePoint>& pts, TracePoint p) {
  if (!pts.empty() && pts.back().networks_trained == p.networks_trained)
    pts.back() = p;
  else
    pts.push_back(p);
}

inline void write_trace(const std::filesystem::path& path,
                        const std::vector<TracePoint>& pts) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  csv::write_row(out, {"networks_trained", "best_val_error",
                       "test_error_of_best", "best_hidden_count",
                       "wall_seconds"});
  char wall[32];
  for (const auto& p : pts) {
    std::snprintf(wall, sizeof wall, "%.3f", p.wall_seconds);
    csv::write_row(out, {csv::number(p.networks_trained),
                         csv::number(p.best_val_error),
                         csv::number(p.test_error_of_best),
                         csv::number(p.best_hidden), wall});
  }
}

inline std::pair<double, double> mean_stdev(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

}  // namespace detail

// Runs the configured arm over k stratified folds, writing artifacts as it
// goes. Throws on any module error after recording a failed status.json.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                       int jobs = 1) {
  namespace fs = std::filesystem;
  cfg.validate();
  RuleSet rules = parse_rules_file(cfg.paths.rules);
  Dataset ds = load_any_dataset(cfg.paths.dataset);

  fs::path dir(cfg.paths.output_dir);
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "config.json", std::ios::trunc);
    if (!out) throw DataError("cannot write config echo");
    out << config_to_json(cfg).dump(2) << '\n';
  }

  auto status = [&](bool complete, int folds_done, const std::string& err) {
    nlohmann::json s = {{"complete", complete}, {"folds_completed", folds_done}};
    if (!err.empty()) s["error"] = err;
    std::ofstream out(dir / "status.json", std::ios::trunc);
    out << s.dump(2) << '\n';
  };

  ExperimentResult result;
  int folds_done = 0;
  try {
    auto folds =
        kfold(ds.examples, cfg.k, mix_seed(cfg.seed, 0x4b464f4c44ULL));
    for (int fold = 0; fold < cfg.k; ++fold) {
      const Examples& fold_train = folds[fold].first;
      const Examples& fold_test = folds[fold].second;
      std::uint64_t fold_seed =
          mix_seed(cfg.seed, static_cast<std::uint64_t>(fold));
      auto t0 = std::chrono::steady_clock::now();
      auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                             t0)
            .count();
      };

      std::vector<detail::TracePoint> pts;
      Candidate best;
      std::uint64_t trained = 0;
      auto record = [&](const Candidate& c, std::size_t count) {
        best = c;
        trained = count;
        detail::push_point(
            pts, {count, c.val_error, score(c.net, fold_test).error(),
                  static_cast<std::uint64_t>(c.hidden()), elapsed()});
      };

      if (cfg.algorithm == Algorithm::Kbann) {
        TranslationParams tp = cfg.translation;
        tp.seed = mix_seed(fold_seed, 1);
        Network net = translate(rules, ds.encoded_names, tp);
        TrainParams trp = cfg.train;
        trp.seed = mix_seed(fold_seed, 2);
        Network fit = train(net, fold_train, trp);
        Candidate c;
        c.net = std::move(fit);
        c.train_error = score(c.net, fold_train).error();
        c.val_error = c.train_error;  // no held-out split for one network
        record(c, 1);
      } else if (cfg.algorithm == Algorithm::Topgen) {
        TranslationParams tp = cfg.translation;
        tp.seed = mix_seed(fold_seed, 1);
        Network start = translate(rules, ds.encoded_names, tp);
        Examples tr = fold_train, va;
        if (cfg.regent.validation_fraction > 0.0) {
          auto sv = split_validation(fold_train, cfg.regent.validation_fraction,
                                     mix_seed(fold_seed, 0x53504c4954ULL));
          tr = std::move(sv.train);
          va = std::move(sv.validation);
        }
        if (va.empty()) va = tr;
        TopGenParams pp = cfg.topgen;
        pp.train = cfg.train;
        pp.seed = mix_seed(fold_seed, 2);
        SearchHooks hooks;
        hooks.on_best = record;
        trained = topgen_search(start, tr, va, pp, hooks).networks_trained;
      } else {
        RegentConfig rc = cfg.regent;
        rc.train = cfg.train;
        rc.translation = cfg.translation;
        rc.seed = mix_seed(fold_seed, 2);
        RunHooks hooks;
        hooks.on_best = record;
        if (rc.checkpoint_cycles > 0) {
          fs::path cp = dir / ("checkpoint_fold" + std::to_string(fold) +
                               ".json");
          hooks.on_checkpoint = [cp](const Checkpoint& c) {
            save_checkpoint(c, cp.string());
          };
        }
        trained =
            regent_run(rules, ds.encoded_names, fold_train, rc, hooks, jobs)
                .networks_trained;
      }

      detail::write_trace(
          dir / ("trace_fold" + std::to_string(fold) + ".csv"), pts);
      save_network(best.net,
                   (dir / ("best_fold" + std::to_string(fold) + ".json"))
                       .string());
      FoldOutcome fo;
      fo.fold = fold;
      fo.test_error = pts.back().test_error_of_best;
      fo.best_hidden = static_cast<std::uint64_t>(best.hidden());
      fo.best_links = static_cast<std::uint64_t>(best.link_count());
      fo.networks_trained = trained;
      fo.wall_seconds = elapsed();
      result.folds.push_back(fo);
      ++folds_done;
    }
  } catch (const std::exception& e) {
    status(false, folds_done, e.what());
    throw;
  }

  std::vector<double> errs, hiddens;
  for (const auto& fo : result.folds) {
    errs.push_back(fo.test_error);
    hiddens.push_back(static_cast<double>(fo.best_hidden));
  }
  auto [em, es] = detail::mean_stdev(errs);
  auto [hm, hs] = detail::mean_stdev(hiddens);
  result.mean_test_error = em;
  result.stdev_test_error = es;
  result.mean_hidden = hm;
  result.stdev_hidden = hs;

  {
    std::ofstream out(dir / "summary.csv", std::ios::trunc);
    if (!out) throw DataError("cannot write summary");
    csv::write_row(out, {"fold", "test_error", "best_hidden_count",
                         "best_link_count", "networks_trained"});
    for (const auto& fo : result.folds)
      csv::write_row(out, {csv::number(fo.fold), csv::number(fo.test_error),
                           csv::number(fo.best_hidden),
                           csv::number(fo.best_links),
                           csv::number(fo.networks_trained)});
    csv::write_row(out, {"mean", csv::number(result.mean_test_error),
                         csv::number(result.mean_hidden), "", ""});
    csv::write_row(out, {"stdev", csv::number(result.stdev_test_error),
                         csv::number(result.stdev_hidden), "", ""});
  }
  status(true, folds_done, "");
  return result;
}

}  // namespace regent
