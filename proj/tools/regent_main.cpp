// Command-line front end for the theory-refinement pipeline.
//
// Subcommands: parse, translate, train, eval, kbann, topgen, regent, resume,
// synth, experiment. `experiment` drives k-fold cross validation from a JSON
// config; the others wrap single pipeline stages. Exit codes: 0 success,
// 1 usage error, 2 data error, 3 internal error.

#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <regent/checkpoint.hpp>
#include <regent/csv.hpp>
#include <regent/dataset.hpp>
#include <regent/evolve.hpp>
#include <regent/experiment.hpp>
#include <regent/netio.hpp>
#include <regent/rules.hpp>
#include <regent/synth.hpp>
#include <regent/topgen.hpp>
#include <regent/train.hpp>
#include <regent/translate.hpp>

namespace {

using namespace regent;

void print_score(const ScoreReport& rep, const std::vector<std::string>& classes) {
  std::printf("correctness %.6f  (%d/%d)\n", rep.correctness,
              static_cast<int>(rep.correctness * rep.total + 0.5), rep.total);
  if (rep.confusion.empty()) return;
  std::printf("confusion (rows = true class):\n");
  for (std::size_t t = 0; t < rep.confusion.size(); ++t) {
    std::string name = t < classes.size() ? classes[t] : std::to_string(t);
    std::printf("  %-12s", name.c_str());
    for (int n : rep.confusion[t]) std::printf(" %6d", n);
    std::printf("\n");
  }
}

void write_network_or_print(const Network& net, const std::string& out) {
  if (out.empty())
    std::cout << serialize(net) << "\n";
  else
    save_network(net, out);
}

struct AnytimeTrace {
  std::vector<std::vector<std::string>> rows;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

  void add(const Candidate& c, std::size_t trained) {
    double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", wall);
    std::vector<std::string> row = {
        csv::number(static_cast<std::uint64_t>(trained)),
        csv::number(c.val_error),
        csv::number(static_cast<std::uint64_t>(c.hidden())), buf};
    if (!rows.empty() && rows.back()[0] == row[0])
      rows.back() = row;
    else
      rows.push_back(row);
  }

  void write(const std::string& path) const {
    if (path.empty()) return;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path + "'");
    csv::write_row(out, {"networks_trained", "best_val_error",
                         "best_hidden_count", "wall_seconds"});
    for (const auto& r : rows) csv::write_row(out, r);
  }
};

// A resumable run document: the config needed to rebuild the search plus the
// library checkpoint itself.
nlohmann::json run_document(const ExperimentConfig& cfg, const Checkpoint& cp) {
  nlohmann::json j;
  j["format"] = "regent-run";
  j["version"] = 1;
  j["config"] = config_to_json(cfg);
  j["checkpoint"] = checkpoint_to_json(cp);
  return j;
}

void save_run_document(const ExperimentConfig& cfg, const Checkpoint& cp,
                       const std::string& path) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp + "'");
    out << run_document(cfg, cp).dump(2) << '\n';
    out.flush();
    if (!out) throw DataError("write failed for '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

RegentConfig resolve_regent(const ExperimentConfig& cfg) {
  RegentConfig rc = cfg.regent;
  rc.train = cfg.train;
  rc.translation = cfg.translation;
  rc.seed = cfg.seed;
  return rc;
}

int run_regent_search(const ExperimentConfig& cfg, int jobs,
                      const std::string& out, const std::string& trace_path,
                      const std::string& checkpoint_path,
                      std::optional<Checkpoint> resume_from) {
  RuleSet rules = parse_rules_file(cfg.paths.rules);
  Dataset ds = load_any_dataset(cfg.paths.dataset);
  RegentConfig rc = resolve_regent(cfg);

  AnytimeTrace trace;
  RunHooks hooks;
  hooks.on_best = [&](const Candidate& c, std::size_t trained) {
    trace.add(c, trained);
  };
  if (!checkpoint_path.empty())
    hooks.on_checkpoint = [&](const Checkpoint& cp) {
      save_run_document(cfg, cp, checkpoint_path);
    };

  RegentResult res = regent_run(rules, ds.encoded_names, ds.examples, rc,
                                hooks, jobs, resume_from);
  trace.write(trace_path);
  write_network_or_print(res.best.net, out);
  std::fprintf(stderr,
               "trained %llu networks; best validation error %.6f "
               "(%zu hidden, %zu links)\n",
               static_cast<unsigned long long>(res.networks_trained),
               res.best.val_error, res.best.hidden(), res.best.link_count());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Theory-refinement pipeline: rule translation, backprop "
               "training, and topology search"};
  app.require_subcommand(1);
  int jobs = 1;
  app.add_option("--jobs", jobs, "max concurrent candidate trainings")
      ->capture_default_str();

  ExperimentConfig cfg;  // shared defaults for the single-stage commands
  std::string out, trace_path, checkpoint_path;

  auto* parse_cmd = app.add_subcommand("parse", "validate a rules file and "
                                                "print its canonical form");
  parse_cmd->add_option("rules", cfg.paths.rules, "rules file")->required();

  auto* translate_cmd =
      app.add_subcommand("translate", "compile rules into a network document");
  translate_cmd->add_option("rules", cfg.paths.rules, "rules file")->required();
  translate_cmd->add_option("--omega", cfg.translation.omega, "heavy weight");
  translate_cmd->add_option("--low-weight", cfg.translation.low_weight,
                            "cross-link magnitude cap");
  translate_cmd->add_option("--seed", cfg.translation.seed, "rng seed");
  translate_cmd->add_option("-o,--out", out, "output path (default stdout)");

  auto* train_cmd =
      app.add_subcommand("train", "backprop-train a network document");
  train_cmd->add_option("network", cfg.paths.checkpoint, "network document")
      ->required();
  train_cmd->add_option("dataset", cfg.paths.dataset, "dataset file")
      ->required();
  train_cmd->add_option("--lr", cfg.train.learning_rate, "learning rate");
  train_cmd->add_option("--momentum", cfg.train.momentum, "momentum term");
  train_cmd->add_option("--epochs", cfg.train.epochs, "training epochs");
  train_cmd->add_option("--seed", cfg.train.seed, "shuffle seed");
  train_cmd->add_option("-o,--out", out, "output path (default stdout)");

  auto* eval_cmd =
      app.add_subcommand("eval", "score a network document on a dataset");
  eval_cmd->add_option("network", cfg.paths.checkpoint, "network document")
      ->required();
  eval_cmd->add_option("dataset", cfg.paths.dataset, "dataset file")
      ->required();

  auto* kbann_cmd = app.add_subcommand(
      "kbann", "translate rules and train the fixed topology");
  kbann_cmd->add_option("rules", cfg.paths.rules, "rules file")->required();
  kbann_cmd->add_option("dataset", cfg.paths.dataset, "dataset file")
      ->required();
  kbann_cmd->add_option("--omega", cfg.translation.omega, "heavy weight");
  kbann_cmd->add_option("--low-weight", cfg.translation.low_weight,
                        "cross-link magnitude cap");
  kbann_cmd->add_option("--lr", cfg.train.learning_rate, "learning rate");
  kbann_cmd->add_option("--momentum", cfg.train.momentum, "momentum term");
  kbann_cmd->add_option("--epochs", cfg.train.epochs, "training epochs");
  kbann_cmd->add_option("--seed", cfg.seed, "master seed");
  kbann_cmd->add_option("-o,--out", out, "output path (default stdout)");

  auto* topgen_cmd = app.add_subcommand(
      "topgen", "heuristic topology search from a rules seed network");
  topgen_cmd->add_option("rules", cfg.paths.rules, "rules file")->required();
  topgen_cmd->add_option("dataset", cfg.paths.dataset, "dataset file")
      ->required();
  topgen_cmd->add_option("--budget", cfg.topgen.budget,
                         "total networks trained");
  topgen_cmd->add_option("--children", cfg.topgen.children_per_expansion,
                         "children per expansion");
  topgen_cmd->add_option("--tau", cfg.topgen.tau,
                         "error-attribution weight threshold");
  topgen_cmd->add_option("--omega", cfg.topgen.omega, "heavy weight");
  topgen_cmd->add_option("--low-weight", cfg.topgen.low_weight,
                         "fresh-link magnitude cap");
  topgen_cmd->add_option("--validation-fraction",
                         cfg.regent.validation_fraction,
                         "held-out share for scoring (0 = score on train)");
  topgen_cmd->add_option("--lr", cfg.train.learning_rate, "learning rate");
  topgen_cmd->add_option("--momentum", cfg.train.momentum, "momentum term");
  topgen_cmd->add_option("--epochs", cfg.train.epochs, "epochs per candidate");
  topgen_cmd->add_option("--seed", cfg.seed, "master seed");
  topgen_cmd->add_option("-o,--out", out, "best-network path (default stdout)");
  topgen_cmd->add_option("--trace", trace_path, "anytime trace CSV path");

  auto* regent_cmd = app.add_subcommand(
      "regent", "genetic topology search seeded from the rules");
  regent_cmd->add_option("rules", cfg.paths.rules, "rules file")->required();
  regent_cmd->add_option("dataset", cfg.paths.dataset, "dataset file")
      ->required();
  regent_cmd->add_option("--population", cfg.regent.population_size,
                         "population size");
  regent_cmd->add_option("--budget", cfg.regent.budget,
                         "total networks trained");
  regent_cmd->add_option("--mutation-fraction", cfg.regent.mutation_fraction,
                         "share of cycles that mutate");
  regent_cmd->add_option("--knn-seed-fraction", cfg.regent.knn_seed_fraction,
                         "share of the population seeded from the theory");
  regent_cmd->add_option("--deletion-prob", cfg.regent.deletion_prob,
                         "per-perturbation deletion probability");
  std::string mode_name = "rule_preserving";
  regent_cmd->add_option("--crossover-mode", mode_name,
                         "rule_preserving|random_nodes");
  regent_cmd->add_option("--validation-fraction",
                         cfg.regent.validation_fraction,
                         "held-out share for fitness (0 = fit on train)");
  regent_cmd->add_option("--checkpoint-cycles", cfg.regent.checkpoint_cycles,
                         "cycles between checkpoints (0 = off)");
  regent_cmd->add_option("--omega", cfg.translation.omega, "heavy weight");
  regent_cmd->add_option("--low-weight", cfg.translation.low_weight,
                         "cross-link magnitude cap");
  regent_cmd->add_option("--lr", cfg.train.learning_rate, "learning rate");
  regent_cmd->add_option("--momentum", cfg.train.momentum, "momentum term");
  regent_cmd->add_option("--epochs", cfg.train.epochs, "epochs per candidate");
  regent_cmd->add_option("--seed", cfg.seed, "master seed");
  regent_cmd->add_option("-o,--out", out, "best-network path (default stdout)");
  regent_cmd->add_option("--trace", trace_path, "anytime trace CSV path");
  regent_cmd->add_option("--checkpoint", checkpoint_path,
                         "resumable run document path");

  std::string resume_path;
  auto* resume_cmd = app.add_subcommand(
      "resume", "continue a genetic search from a run document");
  resume_cmd->add_option("run", resume_path, "run document written by "
                                             "`regent --checkpoint`")
      ->required();
  resume_cmd->add_option("-o,--out", out, "best-network path (default stdout)");
  resume_cmd->add_option("--trace", trace_path, "anytime trace CSV path");
  resume_cmd->add_option("--checkpoint", checkpoint_path,
                         "where to keep checkpointing (default: same file)");

  SynthesisParams sp;
  std::size_t synth_count = 200;
  std::string synth_dir = "synth";
  auto* synth_cmd = app.add_subcommand(
      "synth", "emit a synthetic target/impoverished theory pair and dataset");
  synth_cmd->add_option("--inputs", sp.input_count, "input feature count");
  synth_cmd->add_option("--intermediates", sp.intermediate_count,
                        "intermediate symbol count");
  synth_cmd->add_option("--negation-prob", sp.negation_prob,
                        "negated-literal probability");
  synth_cmd->add_option("--drop-rule-prob", sp.drop_rule_prob,
                        "corruption: whole-rule removal probability");
  synth_cmd->add_option("--drop-antecedent-prob", sp.drop_antecedent_prob,
                        "corruption: literal removal probability");
  synth_cmd->add_option("--add-antecedent-prob", sp.add_antecedent_prob,
                        "corruption: spurious literal probability");
  synth_cmd->add_option("--count", synth_count, "dataset size");
  synth_cmd->add_option("--seed", sp.seed, "rng seed");
  synth_cmd->add_option("--out-dir", synth_dir, "output directory");

  std::string config_path;
  auto* exp_cmd = app.add_subcommand(
      "experiment", "k-fold cross validation from a JSON config");
  exp_cmd->add_option("config", config_path, "experiment config JSON")
      ->required();
  std::string ov_algorithm, ov_output;
  int ov_k = 0;
  std::uint64_t ov_seed = 0;
  bool have_seed = false;
  exp_cmd->add_option("--algorithm", ov_algorithm,
                      "override: kbann|topgen|regent");
  exp_cmd->add_option("--k", ov_k, "override: fold count");
  exp_cmd->add_option("--output-dir", ov_output, "override: run directory");
  exp_cmd->add_option("--seed", ov_seed, "override: master seed")
      ->each([&](const std::string&) { have_seed = true; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*parse_cmd) {
      RuleSet rs = parse_rules_file(cfg.paths.rules);
      std::cout << print_rules(rs);
      std::fprintf(stderr, "%zu rules, %zu inputs, %zu outputs\n",
                   rs.rules.size(), rs.inputs.size(), rs.outputs.size());
    } else if (*translate_cmd) {
      RuleSet rs = parse_rules_file(cfg.paths.rules);
      Network net = translate(rs, rs.inputs, cfg.translation);
      write_network_or_print(net, out);
      std::fprintf(stderr, "%zu hidden nodes, %zu links\n",
                   net.nodes.size() - net.input_ids.size() -
                       net.output_ids.size(),
                   net.links.size());
    } else if (*train_cmd) {
      Network net = load_network(cfg.paths.checkpoint);
      Dataset ds = load_any_dataset(cfg.paths.dataset);
      Network fit = train(net, ds.examples, cfg.train);
      write_network_or_print(fit, out);
      print_score(score(fit, ds.examples), ds.space.classes);
    } else if (*eval_cmd) {
      Network net = load_network(cfg.paths.checkpoint);
      Dataset ds = load_any_dataset(cfg.paths.dataset);
      print_score(score(net, ds.examples), ds.space.classes);
    } else if (*kbann_cmd) {
      RuleSet rs = parse_rules_file(cfg.paths.rules);
      Dataset ds = load_any_dataset(cfg.paths.dataset);
      TranslationParams tp = cfg.translation;
      tp.seed = mix_seed(cfg.seed, 1);
      TrainParams trp = cfg.train;
      trp.seed = mix_seed(cfg.seed, 2);
      Network fit = train(translate(rs, ds.encoded_names, tp), ds.examples,
                          trp);
      write_network_or_print(fit, out);
      print_score(score(fit, ds.examples), ds.space.classes);
    } else if (*topgen_cmd) {
      RuleSet rs = parse_rules_file(cfg.paths.rules);
      Dataset ds = load_any_dataset(cfg.paths.dataset);
      TranslationParams tp = cfg.translation;
      tp.omega = cfg.topgen.omega;
      tp.low_weight = cfg.topgen.low_weight;
      tp.seed = mix_seed(cfg.seed, 1);
      Network start = translate(rs, ds.encoded_names, tp);
      Examples tr = ds.examples, va;
      if (cfg.regent.validation_fraction > 0.0) {
        auto sv = split_validation(ds.examples, cfg.regent.validation_fraction,
                                   mix_seed(cfg.seed, 0x53504c4954ULL));
        tr = std::move(sv.train);
        va = std::move(sv.validation);
      }
      if (va.empty()) va = tr;
      TopGenParams pp = cfg.topgen;
      pp.train = cfg.train;
      pp.seed = mix_seed(cfg.seed, 2);
      AnytimeTrace trace;
      SearchHooks hooks;
      hooks.on_best = [&](const Candidate& c, std::size_t trained) {
        trace.add(c, trained);
      };
      TopGenResult res = topgen_search(start, tr, va, pp, hooks);
      trace.write(trace_path);
      write_network_or_print(res.best.net, out);
      std::fprintf(stderr,
                   "trained %llu networks; best validation error %.6f "
                   "(%zu hidden, %zu links)\n",
                   static_cast<unsigned long long>(res.networks_trained),
                   res.best.val_error, res.best.hidden(),
                   res.best.link_count());
    } else if (*regent_cmd) {
      cfg.regent.crossover_mode = crossover_mode_from_name(mode_name);
      return run_regent_search(cfg, jobs, out, trace_path, checkpoint_path,
                               std::nullopt);
    } else if (*resume_cmd) {
      std::ifstream f(resume_path);
      if (!f) throw DataError("cannot open '" + resume_path + "'");
      nlohmann::json j;
      try {
        f >> j;
      } catch (const nlohmann::json::exception& e) {
        throw DataError("run document '" + resume_path + "': " + e.what());
      }
      if (j.value("format", "") != "regent-run")
        throw DataError("'" + resume_path + "' is not a run document");
      ExperimentConfig stored = config_from_json(j.at("config"));
      Checkpoint cp = checkpoint_from_json(j.at("checkpoint"));
      if (checkpoint_path.empty()) checkpoint_path = resume_path;
      return run_regent_search(stored, jobs, out, trace_path, checkpoint_path,
                               cp);
    } else if (*synth_cmd) {
      auto [target, impoverished] = synthesize_theory(sp);
      Dataset ds = dataset_from_theory(target, synth_count, sp.seed);
      std::filesystem::create_directories(synth_dir);
      auto put = [&](const std::string& name, const std::string& text) {
        std::ofstream o(std::filesystem::path(synth_dir) / name,
                        std::ios::trunc);
        if (!o) throw DataError("cannot write into '" + synth_dir + "'");
        o << text;
      };
      put("target.rules", print_rules(target));
      put("impoverished.rules", print_rules(impoverished));
      save_features(ds,
                    (std::filesystem::path(synth_dir) / "task.data").string());
      int pos = 0;
      for (const auto& e : ds.examples) pos += e.label;
      std::fprintf(stderr,
                   "wrote %s/{target.rules,impoverished.rules,task.data}; "
                   "%zu examples, %d positive\n",
                   synth_dir.c_str(), ds.examples.size(), pos);
    } else if (*exp_cmd) {
      ExperimentConfig ec = load_config(config_path);
      if (!ov_algorithm.empty())
        ec.algorithm = algorithm_from_name(ov_algorithm);
      if (ov_k > 0) ec.k = ov_k;
      if (!ov_output.empty()) ec.paths.output_dir = ov_output;
      if (have_seed) ec.seed = ov_seed;
      ExperimentResult res = run_experiment(ec, jobs);
      std::printf("%s over %d folds: test error %.4f +/- %.4f, "
                  "hidden %.2f +/- %.2f\n",
                  algorithm_name(ec.algorithm), ec.k, res.mean_test_error,
                  res.stdev_test_error, res.mean_hidden, res.stdev_hidden);
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const RuleError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const DataError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 3;
  }
  return 0;
}
