#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowcast/gcn.hpp"
#include "flowcast/graph.hpp"
#include "flowcast/trajectory.hpp"

namespace flowcast {

// Currency in integer micro-dollars; every per-step charge rounds half
// up once, so totals never depend on summation order.
struct Money {
  std::int64_t micros = 0;

  Money() = default;
  explicit Money(std::int64_t m) : micros(m) {}

  Money& operator+=(Money o) {
    micros += o.micros;
    return *this;
  }
  friend Money operator+(Money a, Money b) { return Money(a.micros + b.micros); }
  friend bool operator==(Money a, Money b) { return a.micros == b.micros; }
  friend bool operator<(Money a, Money b) { return a.micros < b.micros; }

  double usd() const { return static_cast<double>(micros) / 1e6; }
  static Money from_usd(double usd);
};

struct ModelPrice {
  Money input_per_1m;   // per 1,000,000 input tokens
  Money output_per_1m;  // per 1,000,000 output tokens
};

class PricingTable {
 public:
  // Every model priced at 1.0 USD per 1M tokens in and out; lets cost
  // accounting double as token accounting when no file is given.
  static PricingTable uniform();
  static PricingTable load(const std::string& path);

  const ModelPrice& price_for(const std::string& model_id) const;
  Money step_cost(const std::string& model_id, std::int64_t in_tok, std::int64_t out_tok) const;
  Money trajectory_cost(const Trajectory& traj) const;
  Money record_cost(const TaskRecord& record) const;
  // Cost of replaying `tokens` of context as input to `model_id`.
  Money input_cost(const std::string& model_id, std::int64_t tokens) const;

  const std::string& source() const { return source_; }

 private:
  std::map<std::string, ModelPrice> prices_;
  bool uniform_ = false;
  std::string source_;
};

// Outcome of the swap decision against the source and final labels.
enum class OutcomeCategory {
  retained_success,    // no swap, task was fine
  missed_opportunity,  // no swap, task failed anyway
  rescued_failure,     // swap turned a failure into a success
  unresolved_failure,  // swap, still failed
  redundant_swap,      // swap, but the source would have succeeded (and still does)
  destructive_swap,    // swap broke a task the source had solved
};

const char* outcome_category_name(OutcomeCategory category);
OutcomeCategory categorize_outcome(int source_y, bool swapped, int final_y);

enum class HotswapMode { sequential, parallel };

struct HotswapPlan {
  HotswapMode mode = HotswapMode::sequential;
  int k = 1;
  double threshold = 0.5;
};

struct TaskOutcome {
  std::string task_id;
  double p_failure = 0.0;
  bool swapped = false;
  OutcomeCategory category = OutcomeCategory::retained_success;
  int source_y = 0;
  int final_y = 0;
  Money source_cost;  // spent on source-model runs (including sunk work)
  Money target_cost;  // spent on target-model runs / splices / migration
  Money total_cost;
};

// Aggregate cost and success counts for one strategy row; successes are
// under the lc-style criteria n = 1, 3, 5.
struct StrategyRow {
  Money cost;
  int tasks = 0;
  int successes_n1 = 0;
  int successes_n3 = 0;
  int successes_n5 = 0;
};

struct HotswapReport {
  HotswapPlan plan;
  int criterion_n = 1;
  bool approximate_continuations = false;  // degenerate parallel replay
  std::string pricing_source;
  std::vector<TaskOutcome> tasks;
  std::map<std::string, int> category_counts;
  StrategyRow source_only;
  StrategyRow policy;
  StrategyRow target_only;
};

// Three-row cost/success table with ratios against the target row, the
// shape used to compare "always source", "policy", "always target".
nlohmann::json strategy_table_json(const StrategyRow& source, const StrategyRow& policy, const StrategyRow& target);
std::string strategy_table_text(const StrategyRow& source, const StrategyRow& policy, const StrategyRow& target);

nlohmann::json hotswap_report_json(const HotswapReport& report);
std::string hotswap_report_table(const HotswapReport& report);

// Replay of the sequential policy: watch the first k runs, and when the
// model fires, vote with source runs 0..k-2 plus the first r-k+1 target
// runs. The prediction run k-1 is sunk cost either way.
HotswapReport simulate_sequential_hotswap(const std::vector<TaskRecord>& source,
                                          const std::vector<TaskRecord>& target, const Checkpoint& checkpoint,
                                          const HotswapPlan& plan, LabelCriterion criterion,
                                          const PricingTable& pricing, int jobs = 1);

// Replay of the parallel policy: predict after k steps of every run;
// runs still active (more than k steps) continue on the target model.
// `continuations` supplies the target-side completions per task/run;
// without them the replay substitutes full target runs and marks the
// report approximate.
HotswapReport simulate_parallel_hotswap(const std::vector<TaskRecord>& source,
                                        const std::vector<TaskRecord>& target,
                                        const std::vector<TaskRecord>* continuations, const Checkpoint& checkpoint,
                                        const HotswapPlan& plan, LabelCriterion criterion,
                                        const PricingTable& pricing, int jobs = 1);

// Early termination: when the model fires at the truncation point the
// task stops (counted as failed) and only the observed prefix is paid
// for.
struct EarlyTermTask {
  std::string task_id;
  double p_failure = 0.0;
  bool terminated = false;
  int original_y = 0;
  Money full_cost;
  Money charged_cost;
};

struct EarlyTermReport {
  TruncationSpec truncation;
  double threshold = 0.5;
  int criterion_n = 1;
  std::string pricing_source;
  std::vector<EarlyTermTask> tasks;
  Money full_cost;
  Money charged_cost;
  double cost_saving_rate = 0.0;       // 1 - charged/full
  int successes_before = 0;
  int successes_after = 0;
  double success_retention_rate = 1.0;  // surviving successes / original successes
};

EarlyTermReport simulate_early_termination(const std::vector<TaskRecord>& records, const Checkpoint& checkpoint,
                                           double threshold, LabelCriterion criterion, const PricingTable& pricing,
                                           int jobs = 1);

// Same replay, but from externally supplied failure scores (index-aligned
// with `records`). Lets sweeps reuse out-of-fold predictions.
EarlyTermReport simulate_early_termination_scored(const std::vector<TaskRecord>& records,
                                                  const std::vector<double>& failure_scores, TruncationSpec truncation,
                                                  double threshold, LabelCriterion criterion,
                                                  const PricingTable& pricing);

nlohmann::json early_term_report_json(const EarlyTermReport& report);

struct TradeoffPoint {
  double threshold = 0.0;
  int k = 0;
  double cost_saving_rate = 0.0;
  double success_retention_rate = 0.0;
};

std::string tradeoff_csv(const std::vector<TradeoffPoint>& points);

}  // namespace flowcast
