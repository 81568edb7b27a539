#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowcast/trajectory.hpp"

namespace flowcast {

// One scored task: higher score = more failure-like. y = 1 means the
// task actually failed.
struct ScoredExample {
  std::string task_id;
  double score = 0.0;
  int y = 0;
};

struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t tn = 0;
  std::int64_t fn = 0;
};

// score >= threshold predicts failure (boundary counts as positive).
ConfusionCounts confusion_at(const std::vector<ScoredExample>& examples, double threshold);
double accuracy(const std::vector<ScoredExample>& examples, double threshold = 0.5);

// Rank-based (Mann-Whitney) AUROC; ties contribute 1/2. Throws
// error(errc::param) when a class is missing or the input is empty.
double auroc(const std::vector<ScoredExample>& examples);
std::optional<double> auroc_if_defined(const std::vector<ScoredExample>& examples);

// Step-wise area under the precision-recall curve, thresholds descending
// with tied scores grouped. Positives are failures.
double aupr(const std::vector<ScoredExample>& examples);
std::optional<double> aupr_if_defined(const std::vector<ScoredExample>& examples);

// Lowest false-positive rate among thresholds reaching TPR >= target.
double fpr_at_tpr(const std::vector<ScoredExample>& examples, double target_tpr = 0.95);
std::optional<double> fpr_at_tpr_if_defined(const std::vector<ScoredExample>& examples, double target_tpr = 0.95);

double mean_bce_loss(const std::vector<ScoredExample>& examples);

struct EvalReport {
  int n = 0;
  int n_pos = 0;
  int n_neg = 0;
  double threshold = 0.5;
  double accuracy = 0.0;
  ConfusionCounts confusion;
  // Absent when the scores cannot support the metric (single class or a
  // constant predictor with no ranking).
  std::optional<double> auroc;
  std::optional<double> aupr;
  std::optional<double> fpr_at_95;
};

EvalReport evaluate_scores(const std::vector<ScoredExample>& examples, double threshold = 0.5);

nlohmann::json eval_report_to_json(const EvalReport& report);
std::string eval_report_table(const EvalReport& report);

// Predicts the majority class of `labels` for everything; ties predict
// success. Ranking metrics are undefined for a constant predictor.
EvalReport majority_baseline(const std::vector<int>& labels);

// Failure score = 1 - (top votes / completed runs). The decision rule
// "failure iff confidence < tau" picks tau on a validation half
// (maximum accuracy, ties to the smaller tau) and reports on the rest.
struct ConfidenceBaselineResult {
  double tau = 0.5;
  EvalReport validation;
  EvalReport test;
};

ConfidenceBaselineResult confidence_baseline(const std::vector<TaskRecord>& records, LabelCriterion criterion,
                                             std::uint64_t seed);

}  // namespace flowcast
