#include "flowcast/flowcast.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "flowcast/common.hpp"
#include "flowcast/gcn.hpp"
#include "flowcast/graph.hpp"
#include "flowcast/hotswap.hpp"
#include "flowcast/metrics.hpp"
#include "flowcast/synth.hpp"
#include "flowcast/trajectory.hpp"

using namespace flowcast;
using nlohmann::json;

struct fc_corpus {
  std::vector<TaskRecord> records;
};

struct fc_graphset {
  GraphSet set;
};

struct fc_model {
  Checkpoint checkpoint;
};

struct fc_report {
  json doc;
  std::string table;
};

struct fc_pricing {
  PricingTable table = PricingTable::uniform();
};

namespace {

thread_local std::string g_last_error = "no error";

fc_status status_for(errc code) {
  switch (code) {
    case errc::parse: return FC_ERROR_PARSE;
    case errc::validation: return FC_ERROR_VALIDATION;
    case errc::config: return FC_ERROR_CONFIG;
    case errc::data: return FC_ERROR_DATA;
    case errc::param: return FC_ERROR_PARAM;
    case errc::io: return FC_ERROR_IO;
    case errc::internal: return FC_ERROR_INTERNAL;
  }
  return FC_ERROR_INTERNAL;
}

template <typename Fn>
fc_status guarded(Fn&& fn) {
  try {
    fn();
    return FC_OK;
  } catch (const error& e) {
    g_last_error = e.what();
    return status_for(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return FC_ERROR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return FC_ERROR_INTERNAL;
  }
}

void require_arg(const void* p, const char* name) {
  if (p == nullptr) throw_param(std::string(name) + " must not be null");
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

PipelineConfig pipeline_from_options(const fc_build_options& options) {
  PipelineConfig pipeline;
  const std::string mode = options.mode ? options.mode : "exact";
  if (mode == "exact") {
    pipeline.mode = BuildMode::exact;
  } else if (mode == "cluster") {
    pipeline.mode = BuildMode::cluster;
  } else {
    throw_config("unknown build mode '" + mode + "'");
  }
  pipeline.cluster.assignment_threshold = options.assignment_threshold;
  pipeline.cluster.merge_threshold = options.merge_threshold;
  pipeline.truncation.mode = truncation_mode_from_name(options.truncation_mode ? options.truncation_mode : "none");
  pipeline.truncation.k = options.truncation_k;
  if (pipeline.truncation.mode != TruncationMode::none && pipeline.truncation.k < 1)
    throw_config("truncation requires k >= 1");
  pipeline.binarize = options.binarize_adjacency != 0;
  pipeline.variant = variant_from_name(options.variant ? options.variant : "full");
  pipeline.embedder.arg_dim = options.arg_dim;
  pipeline.embedder.ngram_min = options.ngram_min;
  pipeline.embedder.ngram_max = options.ngram_max;
  pipeline.embedder.hash_buckets = options.hash_buckets;
  pipeline.embedder.seed = options.embed_seed;
  if (options.vector_file) pipeline.embedder.external_vectors = options.vector_file;
  return pipeline;
}

TrainConfig train_config_from_options(const fc_train_options& options) {
  TrainConfig config;
  config.learning_rate = options.learning_rate;
  config.batch_size = options.batch_size;
  config.hidden_dim = options.hidden_dim;
  config.dropout_rate = options.dropout_rate;
  config.epochs = options.epochs;
  config.folds = options.folds;
  config.seed = options.seed;
  config.positive_weight = options.positive_weight;
  return config;
}

LabelCriterion criterion_from(int n) {
  if (n < 1) throw_param("criterion n must be >= 1");
  return LabelCriterion{n};
}

std::string early_term_table(const EarlyTermReport& report) {
  std::ostringstream out;
  out << "early termination, " << truncation_mode_name(report.truncation.mode) << " k=" << report.truncation.k
      << ", threshold=" << report.threshold << ", criterion n=" << report.criterion_n << "\n";
  out << "full cost:      " << report.full_cost.usd() << "\n";
  out << "charged cost:   " << report.charged_cost.usd() << "\n";
  out << "cost saving:    " << report.cost_saving_rate << "\n";
  out << "successes:      " << report.successes_after << "/" << report.successes_before << " retained ("
      << report.success_retention_rate << ")\n";
  return out.str();
}

}  // namespace

extern "C" {

const char* fc_last_error(void) { return g_last_error.c_str(); }

const char* fc_version(void) { return "0.1.0"; }

void fc_string_free(char* s) { std::free(s); }

/* ---- corpus ---- */

fc_status fc_corpus_load(const char* path, fc_corpus** out) {
  return guarded([&] {
    require_arg(path, "path");
    require_arg(out, "out");
    auto corpus = std::make_unique<fc_corpus>();
    corpus->records = parse_log(path);
    *out = corpus.release();
  });
}

fc_status fc_corpus_save(const fc_corpus* corpus, const char* path) {
  return guarded([&] {
    require_arg(corpus, "corpus");
    require_arg(path, "path");
    write_log(corpus->records, path);
  });
}

size_t fc_corpus_size(const fc_corpus* corpus) { return corpus ? corpus->records.size() : 0; }

void fc_corpus_free(fc_corpus* corpus) { delete corpus; }

/* ---- synth ---- */

void fc_synth_options_init(fc_synth_options* options) {
  if (!options) return;
  const SynthConfig defaults;
  options->tasks = defaults.tasks;
  options->runs = defaults.runs;
  options->budget = defaults.budget;
  options->seed = defaults.seed;
  options->signal_strength = defaults.signal_strength;
  options->failure_rate = defaults.failure_rate;
  options->rescue_rate = defaults.rescue_rate;
  options->source_model = nullptr;
  options->target_model = nullptr;
}

fc_status fc_synth(const fc_synth_options* options, const char* source_path, const char* target_path,
                   const char* pricing_path) {
  return guarded([&] {
    require_arg(options, "options");
    require_arg(source_path, "source_path");
    SynthConfig config;
    config.tasks = options->tasks;
    config.runs = options->runs;
    config.budget = options->budget;
    config.seed = options->seed;
    config.signal_strength = options->signal_strength;
    config.failure_rate = options->failure_rate;
    config.rescue_rate = options->rescue_rate;
    if (options->source_model) config.source_model = options->source_model;
    if (options->target_model) config.target_model = options->target_model;
    const SynthResult result = synthesize(config);
    write_log(result.source, source_path);
    if (target_path) write_log(result.target, target_path);
    if (pricing_path) {
      std::ofstream out(pricing_path);
      if (!out) throw_io(std::string("cannot write pricing file '") + pricing_path + "'");
      out << synth_pricing_json(config);
    }
  });
}

/* ---- graphs ---- */

void fc_build_options_init(fc_build_options* options) {
  if (!options) return;
  const EmbedderConfig embed_defaults;
  const ClusterConfig cluster_defaults;
  options->mode = "exact";
  options->assignment_threshold = cluster_defaults.assignment_threshold;
  options->merge_threshold = cluster_defaults.merge_threshold;
  options->truncation_mode = "none";
  options->truncation_k = 0;
  options->binarize_adjacency = 0;
  options->variant = "full";
  options->arg_dim = embed_defaults.arg_dim;
  options->ngram_min = embed_defaults.ngram_min;
  options->ngram_max = embed_defaults.ngram_max;
  options->hash_buckets = embed_defaults.hash_buckets;
  options->embed_seed = embed_defaults.seed;
  options->vector_file = nullptr;
  options->jobs = 0; /* one worker per core */
}

fc_status fc_graphset_build(const fc_corpus* corpus, const fc_build_options* options, fc_graphset** out) {
  return guarded([&] {
    require_arg(corpus, "corpus");
    require_arg(options, "options");
    require_arg(out, "out");
    auto graphs = std::make_unique<fc_graphset>();
    graphs->set = build_graphset(corpus->records, pipeline_from_options(*options), options->jobs);
    *out = graphs.release();
  });
}

fc_status fc_graphset_save(const fc_graphset* graphs, const char* path) {
  return guarded([&] {
    require_arg(graphs, "graphs");
    require_arg(path, "path");
    save_graphset(graphs->set, path);
  });
}

fc_status fc_graphset_load(const char* path, fc_graphset** out) {
  return guarded([&] {
    require_arg(path, "path");
    require_arg(out, "out");
    auto graphs = std::make_unique<fc_graphset>();
    graphs->set = load_graphset(path);
    *out = graphs.release();
  });
}

size_t fc_graphset_size(const fc_graphset* graphs) { return graphs ? graphs->set.items.size() : 0; }

void fc_graphset_free(fc_graphset* graphs) { delete graphs; }

fc_status fc_graphset_export_dot(const fc_graphset* graphs, const char* task_id, char** out) {
  return guarded([&] {
    require_arg(graphs, "graphs");
    require_arg(out, "out");
    if (graphs->set.items.empty()) throw_data("graph set is empty");
    const SemanticFlowGraph* graph = nullptr;
    if (task_id == nullptr) {
      graph = &graphs->set.items.front().graph;
    } else {
      for (const auto& item : graphs->set.items) {
        if (item.graph.task_id == task_id) {
          graph = &item.graph;
          break;
        }
      }
      if (!graph) throw_data("graph set has no task '" + std::string(task_id) + "'");
    }
    *out = copy_string(to_dot(*graph));
  });
}

/* ---- reports ---- */

fc_status fc_report_json(const fc_report* report, char** out) {
  return guarded([&] {
    require_arg(report, "report");
    require_arg(out, "out");
    *out = copy_string(report->doc.dump(2));
  });
}

fc_status fc_report_table(const fc_report* report, char** out) {
  return guarded([&] {
    require_arg(report, "report");
    require_arg(out, "out");
    *out = copy_string(report->table);
  });
}

fc_status fc_report_save(const fc_report* report, const char* path) {
  return guarded([&] {
    require_arg(report, "report");
    require_arg(path, "path");
    std::ofstream out(path);
    if (!out) throw_io(std::string("cannot write report '") + path + "'");
    out << report->doc.dump(2) << "\n";
    if (!out) throw_io(std::string("write failed for '") + path + "'");
  });
}

void fc_report_free(fc_report* report) { delete report; }

/* ---- training ---- */

void fc_train_options_init(fc_train_options* options) {
  if (!options) return;
  const TrainConfig defaults;
  options->learning_rate = defaults.learning_rate;
  options->batch_size = defaults.batch_size;
  options->hidden_dim = defaults.hidden_dim;
  options->dropout_rate = defaults.dropout_rate;
  options->epochs = defaults.epochs;
  options->folds = defaults.folds;
  options->seed = defaults.seed;
  options->criterion_n = 1;
  options->positive_weight = defaults.positive_weight;
}

fc_status fc_train(const fc_graphset* graphs, const fc_train_options* options, fc_model** model_out,
                   fc_report** report_out) {
  return guarded([&] {
    require_arg(graphs, "graphs");
    require_arg(options, "options");
    const LabelCriterion criterion = criterion_from(options->criterion_n);
    const TrainOutcome outcome = train_model(graphs->set, train_config_from_options(*options), criterion);
    if (model_out) {
      auto model = std::make_unique<fc_model>();
      model->checkpoint = outcome.folds[static_cast<std::size_t>(outcome.best_fold)].checkpoint;
      *model_out = model.release();
    }
    if (report_out) {
      auto report = std::make_unique<fc_report>();
      report->doc = cv_report_json(outcome, criterion);
      report->table = eval_report_table(outcome.aggregated_report);
      *report_out = report.release();
    }
  });
}

fc_status fc_model_save(const fc_model* model, const char* path) {
  return guarded([&] {
    require_arg(model, "model");
    require_arg(path, "path");
    save_checkpoint(model->checkpoint, path);
  });
}

fc_status fc_model_load(const char* path, fc_model** out) {
  return guarded([&] {
    require_arg(path, "path");
    require_arg(out, "out");
    auto model = std::make_unique<fc_model>();
    model->checkpoint = load_checkpoint(path);
    *out = model.release();
  });
}

void fc_model_free(fc_model* model) { delete model; }

fc_status fc_evaluate(const fc_model* model, const fc_graphset* graphs, int criterion_n, double threshold,
                      fc_report** out) {
  return guarded([&] {
    require_arg(model, "model");
    require_arg(graphs, "graphs");
    require_arg(out, "out");
    const std::string fingerprint = pipeline_fingerprint(graphs->set.pipeline);
    if (fingerprint != model->checkpoint.fingerprint)
      throw_config("graph set pipeline (" + fingerprint + ") does not match the model's (" +
                   model->checkpoint.fingerprint + "); rebuild the graphs with the model's settings");
    const LabelCriterion criterion = criterion_from(criterion_n);
    const std::vector<ScoredExample> scores = score_graphset(graphs->set, model->checkpoint, criterion);
    const EvalReport eval = evaluate_scores(scores, threshold);
    auto report = std::make_unique<fc_report>();
    json scored = json::array();
    for (const auto& e : scores)
      scored.push_back(json{{"task_id", e.task_id}, {"p_failure", e.score}, {"label", e.y}});
    report->doc = json{{"criterion_n", criterion_n},
                       {"report", eval_report_to_json(eval)},
                       {"scores", std::move(scored)}};
    report->table = eval_report_table(eval);
    *out = report.release();
  });
}

/* ---- baselines ---- */

fc_status fc_baseline_majority(const fc_corpus* corpus, int criterion_n, fc_report** out) {
  return guarded([&] {
    require_arg(corpus, "corpus");
    require_arg(out, "out");
    const LabelCriterion criterion = criterion_from(criterion_n);
    std::vector<int> labels;
    labels.reserve(corpus->records.size());
    for (const auto& record : corpus->records) labels.push_back(label_task(record, criterion).y);
    const EvalReport eval = majority_baseline(labels);
    auto report = std::make_unique<fc_report>();
    report->doc = json{{"baseline", "majority"}, {"criterion_n", criterion_n}, {"report", eval_report_to_json(eval)}};
    report->table = eval_report_table(eval);
    *out = report.release();
  });
}

fc_status fc_baseline_confidence(const fc_corpus* corpus, int criterion_n, uint64_t seed, fc_report** out) {
  return guarded([&] {
    require_arg(corpus, "corpus");
    require_arg(out, "out");
    const LabelCriterion criterion = criterion_from(criterion_n);
    const ConfidenceBaselineResult result = confidence_baseline(corpus->records, criterion, seed);
    auto report = std::make_unique<fc_report>();
    report->doc = json{{"baseline", "confidence"},
                       {"criterion_n", criterion_n},
                       {"tau", result.tau},
                       {"validation", eval_report_to_json(result.validation)},
                       {"test", eval_report_to_json(result.test)}};
    report->table = "tau=" + std::to_string(result.tau) + " (picked on validation)\n\n" +
                    eval_report_table(result.test);
    *out = report.release();
  });
}

/* ---- pricing ---- */

fc_status fc_pricing_load(const char* path, fc_pricing** out) {
  return guarded([&] {
    require_arg(path, "path");
    require_arg(out, "out");
    auto pricing = std::make_unique<fc_pricing>();
    pricing->table = PricingTable::load(path);
    *out = pricing.release();
  });
}

fc_status fc_pricing_uniform(fc_pricing** out) {
  return guarded([&] {
    require_arg(out, "out");
    auto pricing = std::make_unique<fc_pricing>();
    pricing->table = PricingTable::uniform();
    *out = pricing.release();
  });
}

void fc_pricing_free(fc_pricing* pricing) { delete pricing; }

/* ---- simulations ---- */

fc_status fc_simulate_hotswap(const fc_corpus* source, const fc_corpus* target, const fc_corpus* continuations,
                              const fc_model* model, const fc_pricing* pricing, const char* mode, int k,
                              double threshold, int criterion_n, fc_report** out) {
  return guarded([&] {
    require_arg(source, "source");
    require_arg(target, "target");
    require_arg(model, "model");
    require_arg(pricing, "pricing");
    require_arg(mode, "mode");
    require_arg(out, "out");
    const LabelCriterion criterion = criterion_from(criterion_n);
    HotswapPlan plan;
    plan.k = k;
    plan.threshold = threshold;
    HotswapReport result;
    if (std::string(mode) == "sequential") {
      plan.mode = HotswapMode::sequential;
      result = simulate_sequential_hotswap(source->records, target->records, model->checkpoint, plan, criterion,
                                           pricing->table);
    } else if (std::string(mode) == "parallel") {
      plan.mode = HotswapMode::parallel;
      result = simulate_parallel_hotswap(source->records, target->records,
                                         continuations ? &continuations->records : nullptr, model->checkpoint,
                                         plan, criterion, pricing->table);
    } else {
      throw_config("unknown hotswap mode '" + std::string(mode) + "'");
    }
    auto report = std::make_unique<fc_report>();
    report->doc = hotswap_report_json(result);
    report->table = hotswap_report_table(result);
    *out = report.release();
  });
}

fc_status fc_simulate_early_termination(const fc_corpus* corpus, const fc_model* model, const fc_pricing* pricing,
                                        double threshold, int criterion_n, fc_report** out) {
  return guarded([&] {
    require_arg(corpus, "corpus");
    require_arg(model, "model");
    require_arg(pricing, "pricing");
    require_arg(out, "out");
    const LabelCriterion criterion = criterion_from(criterion_n);
    const EarlyTermReport result =
        simulate_early_termination(corpus->records, model->checkpoint, threshold, criterion, pricing->table);
    auto report = std::make_unique<fc_report>();
    report->doc = early_term_report_json(result);
    report->table = early_term_table(result);
    *out = report.release();
  });
}

/* ---- sweep ---- */

void fc_sweep_options_init(fc_sweep_options* options) {
  if (!options) return;
  options->truncation_mode = "parallel";
  options->k_min = 0;
  options->k_max = 0;
  options->thresholds = nullptr;
  options->criterion_n = 1;
  fc_build_options_init(&options->build);
  fc_train_options_init(&options->train);
}

fc_status fc_sweep(const fc_corpus* corpus, const fc_sweep_options* options, const fc_model* model,
                   const fc_pricing* pricing, char** csv_out) {
  return guarded([&] {
    require_arg(corpus, "corpus");
    require_arg(options, "options");
    require_arg(pricing, "pricing");
    require_arg(csv_out, "csv_out");

    std::vector<double> thresholds;
    if (options->thresholds == nullptr || std::string(options->thresholds).empty()) {
      for (int t = 1; t <= 9; ++t) thresholds.push_back(static_cast<double>(t) / 10.0);
    } else {
      std::istringstream in(options->thresholds);
      std::string field;
      while (std::getline(in, field, ',')) {
        try {
          thresholds.push_back(std::stod(trim(field)));
        } catch (const std::exception&) {
          throw_config("bad threshold '" + field + "'");
        }
      }
      if (thresholds.empty()) throw_config("threshold list is empty");
    }
    const LabelCriterion criterion = criterion_from(options->criterion_n);

    std::vector<TradeoffPoint> points;
    if (model) {
      const TruncationSpec trunc = model->checkpoint.pipeline.truncation;
      if (trunc.mode == TruncationMode::none)
        throw_config("sweep with a fixed model needs a model trained at a truncation point");
      if (options->k_min != 0 && (options->k_min != trunc.k || options->k_max != trunc.k))
        throw_config("k range conflicts with the model's truncation k=" + std::to_string(trunc.k));
      if (options->truncation_mode != nullptr &&
          std::string(options->truncation_mode) != truncation_mode_name(trunc.mode))
        throw_config(std::string("truncation mode conflicts with the model's (") + truncation_mode_name(trunc.mode) +
                     ")");
      const std::vector<ScoredExample> scored = score_records(corpus->records, model->checkpoint, criterion);
      std::vector<double> failure_scores(scored.size());
      for (std::size_t i = 0; i < scored.size(); ++i) failure_scores[i] = scored[i].score;
      for (double threshold : thresholds) {
        const EarlyTermReport report = simulate_early_termination_scored(corpus->records, failure_scores, trunc,
                                                                         threshold, criterion, pricing->table);
        points.push_back({threshold, trunc.k, report.cost_saving_rate, report.success_retention_rate});
      }
    } else {
      if (options->k_min < 1 || options->k_max < options->k_min)
        throw_config("sweep needs 1 <= k_min <= k_max");
      const TruncationMode mode = truncation_mode_from_name(options->truncation_mode ? options->truncation_mode
                                                                                     : "parallel");
      if (mode == TruncationMode::none) throw_config("sweep needs a parallel or sequential truncation mode");
      std::unordered_map<std::string, const TaskRecord*> by_id;
      for (const auto& record : corpus->records) by_id[record.task_id] = &record;
      for (int k = options->k_min; k <= options->k_max; ++k) {
        fc_build_options build = options->build;
        build.truncation_mode = truncation_mode_name(mode);
        build.truncation_k = k;
        const GraphSet graphs = build_graphset(corpus->records, pipeline_from_options(build), build.jobs);
        fc_train_options train = options->train;
        train.criterion_n = options->criterion_n;
        const TrainOutcome outcome = train_model(graphs, train_config_from_options(train), criterion);
        // Replay only the out-of-fold test half, where scores are honest.
        std::vector<TaskRecord> subset;
        std::vector<double> failure_scores;
        subset.reserve(outcome.aggregated_test.size());
        for (const auto& e : outcome.aggregated_test) {
          auto it = by_id.find(e.task_id);
          if (it == by_id.end()) throw error(errc::internal, "scored task missing from corpus: " + e.task_id);
          subset.push_back(*it->second);
          failure_scores.push_back(e.score);
        }
        const TruncationSpec trunc{mode, k};
        for (double threshold : thresholds) {
          const EarlyTermReport report =
              simulate_early_termination_scored(subset, failure_scores, trunc, threshold, criterion, pricing->table);
          points.push_back({threshold, k, report.cost_saving_rate, report.success_retention_rate});
        }
      }
    }
    *csv_out = copy_string(tradeoff_csv(points));
  });
}

}  // extern "C"
