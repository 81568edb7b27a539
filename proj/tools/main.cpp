// Command-line front end. Everything goes through the C API in
// flowcast/flowcast.h; this translation unit never touches the C++ core
// directly.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "flowcast/flowcast.h"

namespace {

int exit_code_for(fc_status status) {
  switch (status) {
    case FC_OK: return 0;
    case FC_ERROR_PARSE:
    case FC_ERROR_VALIDATION:
    case FC_ERROR_DATA:
    case FC_ERROR_IO: return 3;
    case FC_ERROR_CONFIG:
    case FC_ERROR_PARAM: return 4;
    default: return 1;
  }
}

[[nodiscard]] int fail(fc_status status) {
  std::cerr << "error: " << fc_last_error() << "\n";
  return exit_code_for(status);
}

#define CHECK(call)                        \
  do {                                     \
    const fc_status st_ = (call);          \
    if (st_ != FC_OK) return fail(st_);    \
  } while (0)

template <typename T, void (*FreeFn)(T*)>
struct Handle {
  T* ptr = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() {
    if (ptr) FreeFn(ptr);
  }
  T** out() { return &ptr; }
  operator T*() const { return ptr; }
};

using CorpusHandle = Handle<fc_corpus, fc_corpus_free>;
using GraphsHandle = Handle<fc_graphset, fc_graphset_free>;
using ModelHandle = Handle<fc_model, fc_model_free>;
using ReportHandle = Handle<fc_report, fc_report_free>;
using PricingHandle = Handle<fc_pricing, fc_pricing_free>;

struct OwnedString {
  char* ptr = nullptr;
  ~OwnedString() { fc_string_free(ptr); }
  char** out() { return &ptr; }
  std::string str() const { return ptr ? std::string(ptr) : std::string(); }
};

int criterion_from_name(const std::string& name) {
  if (name == "lc1") return 1;
  if (name == "lc3") return 3;
  if (name == "lc5") return 5;
  return -1;
}

// --pricing beats the FLOWCAST_PRICING environment variable; neither set
// means uniform prices.
int resolve_pricing(const std::string& flag_value, PricingHandle& pricing) {
  std::string path = flag_value;
  if (path.empty()) {
    if (const char* env = std::getenv("FLOWCAST_PRICING")) path = env;
  }
  if (path.empty()) {
    CHECK(fc_pricing_uniform(pricing.out()));
  } else {
    CHECK(fc_pricing_load(path.c_str(), pricing.out()));
  }
  return 0;
}

int write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) {
    std::cerr << "error: cannot write '" << path << "'\n";
    return 3;
  }
  out << text;
  if (!out) {
    std::cerr << "error: write failed for '" << path << "'\n";
    return 3;
  }
  return 0;
}

int emit_report(const fc_report* report, bool as_table, const std::string& out_path) {
  if (!out_path.empty()) CHECK(fc_report_save(report, out_path.c_str()));
  OwnedString text;
  if (as_table) {
    CHECK(fc_report_table(report, text.out()));
    std::cout << text.str();
  } else {
    CHECK(fc_report_json(report, text.out()));
    std::cout << text.str() << "\n";
  }
  return 0;
}

// "none" | "parallel:K" | "sequential:K"
bool parse_truncate(const std::string& text, std::string& mode, int& k) {
  if (text == "none") {
    mode = "none";
    k = 0;
    return true;
  }
  const std::size_t colon = text.find(':');
  if (colon == std::string::npos) return false;
  mode = text.substr(0, colon);
  if (mode != "parallel" && mode != "sequential") return false;
  try {
    std::size_t used = 0;
    k = std::stoi(text.substr(colon + 1), &used);
    if (used != text.size() - colon - 1 || k < 1) return false;
  } catch (const std::exception&) {
    return false;
  }
  return true;
}

struct BuildFlags {
  std::string mode = "exact";
  double assignment_threshold = 0.99;
  double merge_threshold = 0.99;
  std::string truncate = "none";
  bool binarize = false;
  std::string variant = "full";
  int arg_dim = 300;
  int ngram_min = 3;
  int ngram_max = 6;
  std::uint64_t hash_buckets = 1ULL << 20;
  std::uint64_t embed_seed = 0x5eedf00dULL;
  std::string vector_file;
  int jobs = 0;

  // Returns false on a malformed --truncate value.
  bool fill(fc_build_options& options, std::string& truncation_mode_storage) const {
    fc_build_options_init(&options);
    int k = 0;
    if (!parse_truncate(truncate, truncation_mode_storage, k)) return false;
    options.mode = mode.c_str();
    options.assignment_threshold = assignment_threshold;
    options.merge_threshold = merge_threshold;
    options.truncation_mode = truncation_mode_storage.c_str();
    options.truncation_k = k;
    options.binarize_adjacency = binarize ? 1 : 0;
    options.variant = variant.c_str();
    options.arg_dim = arg_dim;
    options.ngram_min = ngram_min;
    options.ngram_max = ngram_max;
    options.hash_buckets = hash_buckets;
    options.embed_seed = embed_seed;
    options.vector_file = vector_file.empty() ? nullptr : vector_file.c_str();
    options.jobs = jobs;
    return true;
  }
};

void add_build_flags(CLI::App* cmd, BuildFlags& flags, bool with_truncate, bool with_variant,
                     bool seed_is_embed_seed) {
  cmd->add_option("--mode", flags.mode, "graph construction mode")
      ->check(CLI::IsMember({"exact", "cluster"}));
  cmd->add_option("--assign-th", flags.assignment_threshold,
                  "cosine similarity needed to join an existing cluster");
  cmd->add_option("--merge-th", flags.merge_threshold, "cosine similarity needed to merge two clusters");
  if (with_truncate)
    cmd->add_option("--truncate", flags.truncate,
                    "observe only a prefix of each task: none, parallel:K (steps) or sequential:K (runs)");
  cmd->add_flag("--binarize-adjacency", flags.binarize, "clamp edge weights to 1 before normalization");
  if (with_variant)
    cmd->add_option("--variant", flags.variant, "feature ablation variant")
        ->check(CLI::IsMember({"full", "no-semantics", "no-arguments", "no-functions"}));
  cmd->add_option("--arg-dim", flags.arg_dim, "argument embedding width");
  cmd->add_option("--ngram-min", flags.ngram_min, "smallest character n-gram");
  cmd->add_option("--ngram-max", flags.ngram_max, "largest character n-gram");
  cmd->add_option("--hash-buckets", flags.hash_buckets, "n-gram hash space size");
  cmd->add_option(seed_is_embed_seed ? "--seed,--embed-seed" : "--embed-seed", flags.embed_seed,
                  "seed for the hashed embedding vectors");
  cmd->add_option("--vectors", flags.vector_file, "word2vec text file for in-vocabulary tokens");
  cmd->add_option("--jobs", flags.jobs, "worker threads for graph building (0 = all cores)");
}

struct TrainFlags {
  double learning_rate = 1e-3;
  int batch_size = 32;
  int hidden_dim = 32;
  double dropout = 0.8;
  int epochs = 200;
  int folds = 5;
  std::uint64_t seed = 7;
  double positive_weight = 1.0;
  std::string criterion = "lc1";

  void fill(fc_train_options& options) const {
    fc_train_options_init(&options);
    options.learning_rate = learning_rate;
    options.batch_size = batch_size;
    options.hidden_dim = hidden_dim;
    options.dropout_rate = dropout;
    options.epochs = epochs;
    options.folds = folds;
    options.seed = seed;
    options.positive_weight = positive_weight;
    options.criterion_n = criterion_from_name(criterion);
  }
};

void add_train_flags(CLI::App* cmd, TrainFlags& flags) {
  cmd->add_option("--lr", flags.learning_rate, "Adam learning rate");
  cmd->add_option("--batch-size", flags.batch_size, "graphs per gradient step");
  cmd->add_option("--hidden", flags.hidden_dim, "hidden width of the three conv layers");
  cmd->add_option("--dropout", flags.dropout, "probability of zeroing an activation while training");
  cmd->add_option("--epochs", flags.epochs, "training epochs per fold");
  cmd->add_option("--folds", flags.folds, "cross-validation folds");
  cmd->add_option("--seed", flags.seed, "seed for folds, init, shuffling and dropout");
  cmd->add_option("--positive-weight", flags.positive_weight, "loss weight on the failure class");
  cmd->add_option("--criterion", flags.criterion, "success criterion (top-n vote / at-least-n plausible)")
      ->check(CLI::IsMember({"lc1", "lc3", "lc5"}));
}

// "A:B" or a single "K"; returns false on malformed input.
bool parse_k_range(const std::string& text, int& k_min, int& k_max) {
  const std::size_t colon = text.find(':');
  try {
    if (colon == std::string::npos) {
      k_min = k_max = std::stoi(text);
    } else {
      k_min = std::stoi(text.substr(0, colon));
      k_max = std::stoi(text.substr(colon + 1));
    }
  } catch (const std::exception&) {
    return false;
  }
  return k_min >= 1 && k_max >= k_min;
}

// "START:STOP:STEP" or a comma-separated list; empty → built-in default.
bool parse_threshold_range(const std::string& text, std::string& csv) {
  if (text.empty()) {
    csv.clear();
    return true;
  }
  if (text.find(':') == std::string::npos) {
    csv = text;
    return true;
  }
  double start = 0, stop = 0, step = 0;
  if (std::sscanf(text.c_str(), "%lf:%lf:%lf", &start, &stop, &step) != 3) return false;
  if (step <= 0 || stop < start) return false;
  std::ostringstream out;
  bool first = true;
  for (double t = start; t <= stop + 1e-12; t += step) {
    if (!first) out << ",";
    out << t;
    first = false;
  }
  csv = out.str();
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"failure prediction and replay for multi-sample agent trajectory logs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(fc_version()));

  // ---- synth ----
  struct {
    std::string out, target_out, pricing_out, source_model, target_model;
    int tasks = 100, runs = 10, budget = 10;
    std::uint64_t seed = 1;
    double signal = 1.0, failure_rate = 0.4, rescue_rate = 0.7;
  } synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic trajectory log");
  synth_cmd->add_option("--out", synth.out, "source log path (JSONL)")->required();
  synth_cmd->add_option("--target-out", synth.target_out, "paired target-model log path");
  synth_cmd->add_option("--pricing-out", synth.pricing_out, "write a pricing file for the generated models");
  synth_cmd->add_option("--tasks", synth.tasks, "number of tasks");
  synth_cmd->add_option("--runs", synth.runs, "runs per task (r)");
  synth_cmd->add_option("--budget", synth.budget, "step budget per run (n)");
  synth_cmd->add_option("--seed", synth.seed, "generator seed");
  synth_cmd->add_option("--signal-strength", synth.signal, "fraction of failing tasks walking the failure motif");
  synth_cmd->add_option("--failure-rate", synth.failure_rate, "fraction of tasks failing on the source model");
  synth_cmd->add_option("--rescue-rate", synth.rescue_rate, "fraction of failing tasks the target model solves");
  synth_cmd->add_option("--source-model", synth.source_model, "source model id");
  synth_cmd->add_option("--target-model", synth.target_model, "target model id");

  // ---- build-graphs ----
  struct {
    std::string logs, out;
    BuildFlags build;
  } build_graphs;
  CLI::App* build_cmd = app.add_subcommand("build-graphs", "turn a trajectory log into semantic flow graphs");
  build_cmd->add_option("--logs", build_graphs.logs, "trajectory log (JSONL)")->required();
  build_cmd->add_option("--out", build_graphs.out, "graph set output path")->required();
  add_build_flags(build_cmd, build_graphs.build, true, true, true);

  // ---- train ----
  struct {
    std::string graphs, out, report_out;
    bool table = false;
    TrainFlags train;
  } train;
  CLI::App* train_cmd = app.add_subcommand("train", "cross-validate a failure classifier on a graph set");
  train_cmd->add_option("--graphs", train.graphs, "graph set from build-graphs")->required();
  train_cmd->add_option("--out,--model-out", train.out, "checkpoint output path")->required();
  train_cmd->add_option("--report-out", train.report_out, "write the fold report JSON here");
  train_cmd->add_flag("--table", train.table, "print an aligned text table instead of JSON");
  add_train_flags(train_cmd, train.train);

  // ---- evaluate ----
  struct {
    std::string graphs, model, criterion = "lc1", out;
    double threshold = 0.5;
    bool table = false;
  } evaluate;
  CLI::App* eval_cmd = app.add_subcommand("evaluate", "score a graph set with a trained model");
  eval_cmd->add_option("--graphs", evaluate.graphs, "graph set to score")->required();
  eval_cmd->add_option("--model", evaluate.model, "trained checkpoint")->required();
  eval_cmd->add_option("--criterion", evaluate.criterion, "success criterion")
      ->check(CLI::IsMember({"lc1", "lc3", "lc5"}));
  eval_cmd->add_option("--threshold", evaluate.threshold, "probability above which a task counts as failing");
  eval_cmd->add_option("--out", evaluate.out, "write the report JSON here");
  eval_cmd->add_flag("--table", evaluate.table, "print an aligned text table instead of JSON");

  // ---- baseline ----
  struct {
    std::string logs, kind = "majority", criterion = "lc1", out;
    std::uint64_t seed = 7;
    bool table = false;
  } baseline;
  CLI::App* baseline_cmd = app.add_subcommand("baseline", "label-only baselines for comparison");
  baseline_cmd->add_option("--logs", baseline.logs, "trajectory log (JSONL)")->required();
  baseline_cmd->add_option("--kind", baseline.kind, "baseline kind")
      ->check(CLI::IsMember({"majority", "confidence"}));
  baseline_cmd->add_option("--criterion", baseline.criterion, "success criterion")
      ->check(CLI::IsMember({"lc1", "lc3", "lc5"}));
  baseline_cmd->add_option("--seed", baseline.seed, "validation/test split seed (confidence)");
  baseline_cmd->add_option("--out", baseline.out, "write the report JSON here");
  baseline_cmd->add_flag("--table", baseline.table, "print an aligned text table instead of JSON");

  // ---- simulate-hotswap ----
  struct {
    std::string source_logs, target_logs, continuations, model, mode = "sequential", criterion = "lc1", pricing, out;
    int k = 1;
    double threshold = 0.5;
    bool table = false;
  } hotswap;
  CLI::App* hotswap_cmd = app.add_subcommand("simulate-hotswap", "replay a model hotswap policy over paired logs");
  hotswap_cmd->add_option("--source-logs", hotswap.source_logs, "source model log")->required();
  hotswap_cmd->add_option("--target-logs", hotswap.target_logs, "target model log")->required();
  hotswap_cmd->add_option("--continuations", hotswap.continuations,
                          "target continuations of truncated source runs (parallel mode)");
  hotswap_cmd->add_option("--model", hotswap.model, "trained checkpoint")->required();
  hotswap_cmd->add_option("--mode", hotswap.mode, "swap policy")->check(CLI::IsMember({"sequential", "parallel"}));
  hotswap_cmd->add_option("--k", hotswap.k, "swap point (runs for sequential, steps for parallel)");
  hotswap_cmd->add_option("--threshold", hotswap.threshold, "failure probability that triggers the swap");
  hotswap_cmd->add_option("--criterion", hotswap.criterion, "success criterion")
      ->check(CLI::IsMember({"lc1", "lc3", "lc5"}));
  hotswap_cmd->add_option("--pricing", hotswap.pricing, "pricing file (default: $FLOWCAST_PRICING, else uniform)");
  hotswap_cmd->add_option("--out", hotswap.out, "write the report JSON here");
  hotswap_cmd->add_flag("--table", hotswap.table, "print an aligned text table instead of JSON");

  // ---- sweep ----
  struct {
    std::string logs, mode = "parallel", k_range, threshold_range, pricing, model, out;
    BuildFlags build;
    TrainFlags train;
  } sweep;
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "trade-off grid: termination threshold and truncation point");
  sweep_cmd->add_option("--logs", sweep.logs, "trajectory log (JSONL)")->required();
  sweep_cmd->add_option("--sweep-mode", sweep.mode, "truncation axis for the sweep")
      ->check(CLI::IsMember({"parallel", "sequential"}));
  sweep_cmd->add_option("--k-range", sweep.k_range, "truncation points, MIN:MAX or a single K");
  sweep_cmd->add_option("--threshold-range", sweep.threshold_range,
                        "thresholds, START:STOP:STEP or a comma list (default 0.1..0.9)");
  sweep_cmd->add_option("--pricing", sweep.pricing, "pricing file (default: $FLOWCAST_PRICING, else uniform)");
  sweep_cmd->add_option("--model", sweep.model, "score with this fixed checkpoint instead of retraining per k");
  sweep_cmd->add_option("--out", sweep.out, "CSV output path (default stdout)");
  add_build_flags(sweep_cmd, sweep.build, false, true, false);
  add_train_flags(sweep_cmd, sweep.train);

  // ---- ablate ----
  struct {
    std::string logs, out;
    std::vector<std::string> variants;
    bool table = false;
    BuildFlags build;
    TrainFlags train;
  } ablate;
  CLI::App* ablate_cmd = app.add_subcommand("ablate", "compare feature variants on the same log");
  ablate_cmd->add_option("--logs", ablate.logs, "trajectory log (JSONL)")->required();
  ablate_cmd->add_option("--variant", ablate.variants, "variant to train; repeatable (default: all four)")
      ->check(CLI::IsMember({"full", "no-semantics", "no-arguments", "no-functions"}));
  ablate_cmd->add_option("--out", ablate.out, "write the comparison JSON here");
  ablate_cmd->add_flag("--table", ablate.table, "print an aligned text table instead of JSON");
  add_build_flags(ablate_cmd, ablate.build, true, false, false);
  add_train_flags(ablate_cmd, ablate.train);

  // ---- export-dot ----
  struct {
    std::string graphs, task_id, out;
  } exportdot;
  CLI::App* dot_cmd = app.add_subcommand("export-dot", "render one semantic flow graph as DOT");
  dot_cmd->add_option("--graphs", exportdot.graphs, "graph set from build-graphs")->required();
  dot_cmd->add_option("--task-id", exportdot.task_id, "task to render (default: first in the set)");
  dot_cmd->add_option("--out", exportdot.out, "output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (synth_cmd->parsed()) {
    fc_synth_options options;
    fc_synth_options_init(&options);
    options.tasks = synth.tasks;
    options.runs = synth.runs;
    options.budget = synth.budget;
    options.seed = synth.seed;
    options.signal_strength = synth.signal;
    options.failure_rate = synth.failure_rate;
    options.rescue_rate = synth.rescue_rate;
    if (!synth.source_model.empty()) options.source_model = synth.source_model.c_str();
    if (!synth.target_model.empty()) options.target_model = synth.target_model.c_str();
    CHECK(fc_synth(&options, synth.out.c_str(), synth.target_out.empty() ? nullptr : synth.target_out.c_str(),
                   synth.pricing_out.empty() ? nullptr : synth.pricing_out.c_str()));
    std::cout << "wrote " << synth.out;
    if (!synth.target_out.empty()) std::cout << " and " << synth.target_out;
    std::cout << "\n";
    return 0;
  }

  if (build_cmd->parsed()) {
    CorpusHandle corpus;
    CHECK(fc_corpus_load(build_graphs.logs.c_str(), corpus.out()));
    fc_build_options options;
    std::string mode_storage;
    if (!build_graphs.build.fill(options, mode_storage)) {
      std::cerr << "error: --truncate wants none, parallel:K or sequential:K\n";
      return 2;
    }
    GraphsHandle graphs;
    CHECK(fc_graphset_build(corpus, &options, graphs.out()));
    CHECK(fc_graphset_save(graphs, build_graphs.out.c_str()));
    std::cout << "built " << fc_graphset_size(graphs) << " graphs from " << fc_corpus_size(corpus) << " tasks\n";
    return 0;
  }

  if (train_cmd->parsed()) {
    GraphsHandle graphs;
    CHECK(fc_graphset_load(train.graphs.c_str(), graphs.out()));
    fc_train_options options;
    train.train.fill(options);
    ModelHandle model;
    ReportHandle report;
    CHECK(fc_train(graphs, &options, model.out(), report.out()));
    CHECK(fc_model_save(model, train.out.c_str()));
    if (!train.report_out.empty()) CHECK(fc_report_save(report, train.report_out.c_str()));
    const int rc = emit_report(report, train.table, "");
    if (rc) return rc;
    std::cerr << "saved model to " << train.out << "\n";
    return 0;
  }

  if (eval_cmd->parsed()) {
    GraphsHandle graphs;
    CHECK(fc_graphset_load(evaluate.graphs.c_str(), graphs.out()));
    ModelHandle model;
    CHECK(fc_model_load(evaluate.model.c_str(), model.out()));
    ReportHandle report;
    CHECK(fc_evaluate(model, graphs, criterion_from_name(evaluate.criterion), evaluate.threshold, report.out()));
    return emit_report(report, evaluate.table, evaluate.out);
  }

  if (baseline_cmd->parsed()) {
    CorpusHandle corpus;
    CHECK(fc_corpus_load(baseline.logs.c_str(), corpus.out()));
    ReportHandle report;
    if (baseline.kind == "majority") {
      CHECK(fc_baseline_majority(corpus, criterion_from_name(baseline.criterion), report.out()));
    } else {
      CHECK(fc_baseline_confidence(corpus, criterion_from_name(baseline.criterion), baseline.seed, report.out()));
    }
    return emit_report(report, baseline.table, baseline.out);
  }

  if (hotswap_cmd->parsed()) {
    CorpusHandle source, target, continuations;
    CHECK(fc_corpus_load(hotswap.source_logs.c_str(), source.out()));
    CHECK(fc_corpus_load(hotswap.target_logs.c_str(), target.out()));
    if (!hotswap.continuations.empty())
      CHECK(fc_corpus_load(hotswap.continuations.c_str(), continuations.out()));
    ModelHandle model;
    CHECK(fc_model_load(hotswap.model.c_str(), model.out()));
    PricingHandle pricing;
    if (const int rc = resolve_pricing(hotswap.pricing, pricing)) return rc;
    ReportHandle report;
    CHECK(fc_simulate_hotswap(source, target, continuations.ptr ? continuations.ptr : nullptr, model, pricing,
                              hotswap.mode.c_str(), hotswap.k, hotswap.threshold,
                              criterion_from_name(hotswap.criterion), report.out()));
    return emit_report(report, hotswap.table, hotswap.out);
  }

  if (sweep_cmd->parsed()) {
    CorpusHandle corpus;
    CHECK(fc_corpus_load(sweep.logs.c_str(), corpus.out()));
    PricingHandle pricing;
    if (const int rc = resolve_pricing(sweep.pricing, pricing)) return rc;
    ModelHandle model;
    if (!sweep.model.empty()) CHECK(fc_model_load(sweep.model.c_str(), model.out()));
    fc_sweep_options options;
    fc_sweep_options_init(&options);
    options.truncation_mode = sweep_cmd->count("--sweep-mode") ? sweep.mode.c_str() : nullptr;
    options.k_min = 0;
    options.k_max = 0;
    if (!sweep.k_range.empty() && !parse_k_range(sweep.k_range, options.k_min, options.k_max)) {
      std::cerr << "error: --k-range wants MIN:MAX or a single K, with 1 <= MIN <= MAX\n";
      return 2;
    }
    std::string thresholds_csv;
    if (!parse_threshold_range(sweep.threshold_range, thresholds_csv)) {
      std::cerr << "error: --threshold-range wants START:STOP:STEP or a comma list\n";
      return 2;
    }
    options.thresholds = thresholds_csv.empty() ? nullptr : thresholds_csv.c_str();
    options.criterion_n = criterion_from_name(sweep.train.criterion);
    std::string mode_storage;
    sweep.build.fill(options.build, mode_storage);
    sweep.train.fill(options.train);
    OwnedString csv;
    CHECK(fc_sweep(corpus, &options, model.ptr ? model.ptr : nullptr, pricing, csv.out()));
    if (!sweep.out.empty()) {
      if (const int rc = write_text(sweep.out, csv.str())) return rc;
      std::cerr << "wrote " << sweep.out << "\n";
    } else {
      std::cout << csv.str();
    }
    return 0;
  }

  if (ablate_cmd->parsed()) {
    CorpusHandle corpus;
    CHECK(fc_corpus_load(ablate.logs.c_str(), corpus.out()));
    std::vector<std::string> variants = ablate.variants;
    if (variants.empty()) variants = {"full", "no-semantics", "no-arguments", "no-functions"};
    nlohmann::json rows = nlohmann::json::array();
    double full_auroc = 0.0;
    bool have_full = false;
    std::ostringstream table;
    table << "variant        auroc     accuracy  delta-auroc-vs-full\n";
    for (const std::string& variant : variants) {
      fc_build_options build;
      std::string mode_storage;
      if (!ablate.build.fill(build, mode_storage)) {
        std::cerr << "error: --truncate wants none, parallel:K or sequential:K\n";
        return 2;
      }
      build.variant = variant.c_str();
      GraphsHandle graphs;
      CHECK(fc_graphset_build(corpus, &build, graphs.out()));
      fc_train_options topts;
      ablate.train.fill(topts);
      ReportHandle report;
      CHECK(fc_train(graphs, &topts, nullptr, report.out()));
      OwnedString json_text;
      CHECK(fc_report_json(report, json_text.out()));
      const nlohmann::json doc = nlohmann::json::parse(json_text.str());
      const nlohmann::json& agg = doc.at("aggregated_test");
      const double auroc = agg.at("auroc").is_null() ? 0.0 : agg.at("auroc").get<double>();
      const double accuracy = agg.at("accuracy").get<double>();
      if (variant == "full") {
        full_auroc = auroc;
        have_full = true;
      }
      rows.push_back(nlohmann::json{{"variant", variant}, {"auroc", auroc}, {"accuracy", accuracy}});
      std::string name = variant;
      name.resize(15, ' ');
      char buf[96];
      if (have_full) {
        std::snprintf(buf, sizeof(buf), "%-10.4f%-10.4f%+.4f", auroc, accuracy, auroc - full_auroc);
      } else {
        std::snprintf(buf, sizeof(buf), "%-10.4f%-10.4f", auroc, accuracy);
      }
      table << name << buf << "\n";
    }
    const nlohmann::json doc{{"criterion", ablate.train.criterion}, {"variants", rows}};
    if (!ablate.out.empty()) {
      if (const int rc = write_text(ablate.out, doc.dump(2) + "\n")) return rc;
    }
    if (ablate.table) {
      std::cout << table.str();
    } else {
      std::cout << doc.dump(2) << "\n";
    }
    return 0;
  }

  if (dot_cmd->parsed()) {
    GraphsHandle graphs;
    CHECK(fc_graphset_load(exportdot.graphs.c_str(), graphs.out()));
    OwnedString dot;
    CHECK(fc_graphset_export_dot(graphs, exportdot.task_id.empty() ? nullptr : exportdot.task_id.c_str(), dot.out()));
    if (!exportdot.out.empty()) return write_text(exportdot.out, dot.str());
    std::cout << dot.str();
    return 0;
  }

  return 0;
}
