#include "flowcast/hotswap.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <unordered_map>

namespace flowcast {

using nlohmann::json;

// ---- money & pricing ---------------------------------------------------

Money Money::from_usd(double usd) {
  return Money(static_cast<std::int64_t>(std::llround(usd * 1e6)));
}

PricingTable PricingTable::uniform() {
  PricingTable table;
  table.uniform_ = true;
  table.source_ = "uniform";
  return table;
}

PricingTable PricingTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_io("cannot open pricing file '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw_parse(path + ": invalid JSON: " + e.what());
  }
  PricingTable table;
  table.source_ = path;
  try {
    if (!doc.is_object()) throw_parse(path + ": pricing file must be a JSON object keyed by model id");
    for (const auto& [model, entry] : doc.items()) {
      ModelPrice price;
      price.input_per_1m = Money::from_usd(entry.at("in_per_1m").get<double>());
      price.output_per_1m = Money::from_usd(entry.at("out_per_1m").get<double>());
      if (price.input_per_1m.micros < 0 || price.output_per_1m.micros < 0)
        throw_config(path + ": negative price for model '" + model + "'");
      table.prices_[model] = price;
    }
  } catch (const json::exception& e) {
    throw_parse(path + ": bad pricing file: " + e.what());
  }
  if (table.prices_.empty()) throw_config(path + ": pricing file lists no models");
  return table;
}

const ModelPrice& PricingTable::price_for(const std::string& model_id) const {
  static const ModelPrice kUniform{Money(1000000), Money(1000000)};
  if (uniform_) return kUniform;
  auto it = prices_.find(model_id);
  if (it == prices_.end()) throw_config("pricing table '" + source_ + "' has no entry for model '" + model_id + "'");
  return it->second;
}

namespace {

// One rounding per charge: half-up on the combined micro value.
std::int64_t rounded_micros(std::int64_t tokens_in, std::int64_t price_in, std::int64_t tokens_out,
                            std::int64_t price_out) {
  const std::int64_t raw = tokens_in * price_in + tokens_out * price_out;
  return (raw + 500000) / 1000000;
}

}  // namespace

Money PricingTable::step_cost(const std::string& model_id, std::int64_t in_tok, std::int64_t out_tok) const {
  const ModelPrice& price = price_for(model_id);
  return Money(rounded_micros(in_tok, price.input_per_1m.micros, out_tok, price.output_per_1m.micros));
}

Money PricingTable::input_cost(const std::string& model_id, std::int64_t tokens) const {
  const ModelPrice& price = price_for(model_id);
  return Money(rounded_micros(tokens, price.input_per_1m.micros, 0, 0));
}

Money PricingTable::trajectory_cost(const Trajectory& traj) const {
  Money total;
  for (const auto& step : traj.steps) total += step_cost(traj.model_id, step.in_tok, step.out_tok);
  return total;
}

Money PricingTable::record_cost(const TaskRecord& record) const {
  Money total;
  for (const auto& traj : record.trajectories) total += trajectory_cost(traj);
  return total;
}

// ---- outcome classification --------------------------------------------

const char* outcome_category_name(OutcomeCategory category) {
  switch (category) {
    case OutcomeCategory::retained_success: return "retained_success";
    case OutcomeCategory::missed_opportunity: return "missed_opportunity";
    case OutcomeCategory::rescued_failure: return "rescued_failure";
    case OutcomeCategory::unresolved_failure: return "unresolved_failure";
    case OutcomeCategory::redundant_swap: return "redundant_swap";
    case OutcomeCategory::destructive_swap: return "destructive_swap";
  }
  return "retained_success";
}

OutcomeCategory categorize_outcome(int source_y, bool swapped, int final_y) {
  if (!swapped) return source_y == 0 ? OutcomeCategory::retained_success : OutcomeCategory::missed_opportunity;
  if (source_y == 1) return final_y == 0 ? OutcomeCategory::rescued_failure : OutcomeCategory::unresolved_failure;
  return final_y == 0 ? OutcomeCategory::redundant_swap : OutcomeCategory::destructive_swap;
}

// ---- shared replay plumbing ---------------------------------------------

namespace {

std::unordered_map<std::string, const TaskRecord*> index_by_task(const std::vector<TaskRecord>& records) {
  std::unordered_map<std::string, const TaskRecord*> index;
  for (const auto& record : records) index[record.task_id] = &record;
  return index;
}

const TaskRecord& matching_record(const std::unordered_map<std::string, const TaskRecord*>& index,
                                  const std::string& task_id, const char* what) {
  auto it = index.find(task_id);
  if (it == index.end()) throw_data(std::string(what) + " missing task '" + task_id + "'");
  return *it->second;
}

void add_successes(StrategyRow& row, const LabelBasis& basis) {
  row.tasks += 1;
  if (label_from_basis(basis, LabelCriterion{1}).y == 0) row.successes_n1 += 1;
  if (label_from_basis(basis, LabelCriterion{3}).y == 0) row.successes_n3 += 1;
  if (label_from_basis(basis, LabelCriterion{5}).y == 0) row.successes_n5 += 1;
}

void require_pipeline_truncation(const Checkpoint& checkpoint, TruncationMode mode, int k) {
  const TruncationSpec& t = checkpoint.pipeline.truncation;
  if (t.mode != mode || t.k != k)
    throw_config(std::string("model expects truncation ") + truncation_mode_name(t.mode) + " k=" +
                 std::to_string(t.k) + ", replay wants " + truncation_mode_name(mode) + " k=" + std::to_string(k));
}

// Kept prefix of the parallel policy: the first k-1 steps survive the
// swap, the target regenerates from position k.
std::int64_t prefix_tokens(const Trajectory& traj, int k) {
  std::int64_t total = 0;
  const std::size_t keep = static_cast<std::size_t>(std::max(0, k - 1));
  for (std::size_t i = 0; i < traj.steps.size() && i < keep; ++i)
    total += traj.steps[i].in_tok + traj.steps[i].out_tok;
  return total;
}

Money prefix_cost(const PricingTable& pricing, const Trajectory& traj, int k) {
  Money total;
  const std::size_t keep = static_cast<std::size_t>(std::max(0, k - 1));
  for (std::size_t i = 0; i < traj.steps.size() && i < keep; ++i)
    total += pricing.step_cost(traj.model_id, traj.steps[i].in_tok, traj.steps[i].out_tok);
  return total;
}

Money steps_cost(const PricingTable& pricing, const std::string& model_id, const std::vector<ReasoningStep>& steps) {
  Money total;
  for (const auto& step : steps) total += pricing.step_cost(model_id, step.in_tok, step.out_tok);
  return total;
}

void finalize_report(HotswapReport& report) {
  for (const auto& task : report.tasks) report.category_counts[outcome_category_name(task.category)] += 1;
}

}  // namespace

// ---- sequential replay ---------------------------------------------------

HotswapReport simulate_sequential_hotswap(const std::vector<TaskRecord>& source,
                                          const std::vector<TaskRecord>& target, const Checkpoint& checkpoint,
                                          const HotswapPlan& plan, LabelCriterion criterion,
                                          const PricingTable& pricing, int jobs) {
  if (plan.mode != HotswapMode::sequential) throw_param("sequential replay called with a parallel plan");
  if (plan.k < 1) throw_param("sequential replay requires k >= 1");
  require_pipeline_truncation(checkpoint, TruncationMode::sequential, plan.k);
  const auto target_index = index_by_task(target);
  const std::vector<ScoredExample> scores = score_records(source, checkpoint, criterion, jobs);

  HotswapReport report;
  report.plan = plan;
  report.criterion_n = criterion.n;
  report.pricing_source = pricing.source();

  for (std::size_t i = 0; i < source.size(); ++i) {
    const TaskRecord& src = source[i];
    const TaskRecord& tgt = matching_record(target_index, src.task_id, "target logs");
    if (src.sample_size_r < plan.k)
      throw_data("task '" + src.task_id + "' has r=" + std::to_string(src.sample_size_r) +
                 " runs, sequential replay needs k <= r (k=" + std::to_string(plan.k) + ")");

    const LabelBasis source_basis = label_basis(src);
    const LabelBasis target_basis = label_basis(tgt);

    TaskOutcome outcome;
    outcome.task_id = src.task_id;
    outcome.p_failure = scores[i].score;
    outcome.source_y = label_from_basis(source_basis, criterion).y;
    outcome.swapped = scores[i].score >= plan.threshold;

    LabelBasis final_basis = source_basis;
    if (outcome.swapped) {
      // Votes come from source runs 0..k-2 plus the first r-k+1 target
      // runs; the prediction run k-1 is paid for but discarded.
      const int keep_source = plan.k - 1;
      const int need_target = src.sample_size_r - plan.k + 1;
      if (static_cast<int>(tgt.trajectories.size()) < need_target)
        throw_data("task '" + src.task_id + "': target log has " + std::to_string(tgt.trajectories.size()) +
                   " runs, sequential replay needs " + std::to_string(need_target));
      TaskRecord combined = src;
      combined.trajectories.assign(src.trajectories.begin(), src.trajectories.begin() + keep_source);
      combined.trajectories.insert(combined.trajectories.end(), tgt.trajectories.begin(),
                                   tgt.trajectories.begin() + need_target);
      for (std::size_t r = 0; r < combined.trajectories.size(); ++r)
        combined.trajectories[r].run_index = static_cast<int>(r);
      if (src.agent_kind == AgentKind::patch_count) {
        combined.plausible.assign(src.plausible.begin(), src.plausible.begin() + keep_source);
        combined.plausible.insert(combined.plausible.end(), tgt.plausible.begin(),
                                  tgt.plausible.begin() + need_target);
      }
      final_basis = label_basis(combined);

      for (int r = 0; r < plan.k; ++r) outcome.source_cost += pricing.trajectory_cost(src.trajectories[r]);
      for (int r = 0; r < need_target; ++r) outcome.target_cost += pricing.trajectory_cost(tgt.trajectories[r]);
    } else {
      outcome.source_cost = pricing.record_cost(src);
    }
    outcome.final_y = label_from_basis(final_basis, criterion).y;
    outcome.total_cost = outcome.source_cost + outcome.target_cost;
    outcome.category = categorize_outcome(outcome.source_y, outcome.swapped, outcome.final_y);

    report.source_only.cost += pricing.record_cost(src);
    report.policy.cost += outcome.total_cost;
    report.target_only.cost += pricing.record_cost(tgt);
    add_successes(report.source_only, source_basis);
    add_successes(report.policy, final_basis);
    add_successes(report.target_only, target_basis);
    report.tasks.push_back(std::move(outcome));
  }
  finalize_report(report);
  return report;
}

// ---- parallel replay ------------------------------------------------------

HotswapReport simulate_parallel_hotswap(const std::vector<TaskRecord>& source,
                                        const std::vector<TaskRecord>& target,
                                        const std::vector<TaskRecord>* continuations, const Checkpoint& checkpoint,
                                        const HotswapPlan& plan, LabelCriterion criterion,
                                        const PricingTable& pricing, int jobs) {
  if (plan.mode != HotswapMode::parallel) throw_param("parallel replay called with a sequential plan");
  if (plan.k < 1) throw_param("parallel replay requires k >= 1");
  require_pipeline_truncation(checkpoint, TruncationMode::parallel, plan.k);
  const auto target_index = index_by_task(target);
  std::unordered_map<std::string, const TaskRecord*> continuation_index;
  if (continuations) continuation_index = index_by_task(*continuations);
  const std::vector<ScoredExample> scores = score_records(source, checkpoint, criterion, jobs);

  HotswapReport report;
  report.plan = plan;
  report.criterion_n = criterion.n;
  report.approximate_continuations = continuations == nullptr;
  report.pricing_source = pricing.source();

  for (std::size_t i = 0; i < source.size(); ++i) {
    const TaskRecord& src = source[i];
    const TaskRecord& tgt = matching_record(target_index, src.task_id, "target logs");

    const LabelBasis source_basis = label_basis(src);
    const LabelBasis target_basis = label_basis(tgt);

    TaskOutcome outcome;
    outcome.task_id = src.task_id;
    outcome.p_failure = scores[i].score;
    outcome.source_y = label_from_basis(source_basis, criterion).y;
    outcome.swapped = scores[i].score >= plan.threshold;

    LabelBasis final_basis = source_basis;
    if (outcome.swapped) {
      TaskRecord combined = src;
      const TaskRecord* cont_record = nullptr;
      if (continuations) {
        cont_record = &matching_record(continuation_index, src.task_id, "continuation logs");
      }
      for (std::size_t r = 0; r < src.trajectories.size(); ++r) {
        const Trajectory& run = src.trajectories[r];
        const bool active = static_cast<int>(run.steps.size()) > plan.k;
        if (!active) {
          // Finished within k steps: answer and cost stay on the source.
          outcome.source_cost += pricing.trajectory_cost(run);
          continue;
        }
        outcome.source_cost += prefix_cost(pricing, run, plan.k);

        Trajectory& spliced = combined.trajectories[r];
        const std::size_t keep = static_cast<std::size_t>(plan.k - 1);
        spliced.steps.resize(keep);
        if (cont_record) {
          if (static_cast<int>(cont_record->trajectories.size()) <= static_cast<int>(r))
            throw_data("task '" + src.task_id + "': continuation log has no run " + std::to_string(r));
          const Trajectory& cont = cont_record->trajectories[r];
          outcome.target_cost += pricing.input_cost(cont.model_id, prefix_tokens(run, plan.k));
          outcome.target_cost += steps_cost(pricing, cont.model_id, cont.steps);
          spliced.steps.insert(spliced.steps.end(), cont.steps.begin(), cont.steps.end());
          spliced.final_answer = cont.final_answer;
          spliced.completed = cont.completed;
          spliced.model_id = cont.model_id;
          if (src.agent_kind == AgentKind::patch_count) {
            if (cont_record->plausible.size() <= r)
              throw_data("task '" + src.task_id + "': continuation log lacks plausibility for run " +
                         std::to_string(r));
            combined.plausible[r] = cont_record->plausible[r];
          }
        } else {
          // No continuation data: substitute the full target run. The
          // report is flagged approximate.
          if (tgt.trajectories.size() <= r)
            throw_data("task '" + src.task_id + "': target log has no run " + std::to_string(r) +
                       " to substitute for the missing continuation");
          const Trajectory& replacement = tgt.trajectories[r];
          outcome.target_cost += pricing.input_cost(replacement.model_id, prefix_tokens(run, plan.k));
          outcome.target_cost += pricing.trajectory_cost(replacement);
          spliced.steps.insert(spliced.steps.end(), replacement.steps.begin(), replacement.steps.end());
          spliced.final_answer = replacement.final_answer;
          spliced.completed = replacement.completed;
          spliced.model_id = replacement.model_id;
          if (src.agent_kind == AgentKind::patch_count) combined.plausible[r] = tgt.plausible[r];
        }
      }
      final_basis = label_basis(combined);
    } else {
      outcome.source_cost = pricing.record_cost(src);
    }
    outcome.final_y = label_from_basis(final_basis, criterion).y;
    outcome.total_cost = outcome.source_cost + outcome.target_cost;
    outcome.category = categorize_outcome(outcome.source_y, outcome.swapped, outcome.final_y);

    report.source_only.cost += pricing.record_cost(src);
    report.policy.cost += outcome.total_cost;
    report.target_only.cost += pricing.record_cost(tgt);
    add_successes(report.source_only, source_basis);
    add_successes(report.policy, final_basis);
    add_successes(report.target_only, target_basis);
    report.tasks.push_back(std::move(outcome));
  }
  finalize_report(report);
  return report;
}

// ---- early termination ------------------------------------------------------

EarlyTermReport simulate_early_termination_scored(const std::vector<TaskRecord>& records,
                                                  const std::vector<double>& failure_scores, TruncationSpec truncation,
                                                  double threshold, LabelCriterion criterion,
                                                  const PricingTable& pricing) {
  if (records.size() != failure_scores.size()) throw_param("one failure score per record required");
  EarlyTermReport report;
  report.truncation = truncation;
  report.threshold = threshold;
  report.criterion_n = criterion.n;
  report.pricing_source = pricing.source();

  for (std::size_t i = 0; i < records.size(); ++i) {
    const TaskRecord& record = records[i];
    EarlyTermTask task;
    task.task_id = record.task_id;
    task.p_failure = failure_scores[i];
    task.original_y = label_task(record, criterion).y;
    task.terminated = failure_scores[i] >= threshold;
    task.full_cost = pricing.record_cost(record);
    task.charged_cost =
        task.terminated ? pricing.record_cost(apply_truncation(record, truncation)) : task.full_cost;

    report.full_cost += task.full_cost;
    report.charged_cost += task.charged_cost;
    if (task.original_y == 0) {
      report.successes_before += 1;
      if (!task.terminated) report.successes_after += 1;
    }
    report.tasks.push_back(std::move(task));
  }
  report.cost_saving_rate =
      report.full_cost.micros == 0
          ? 0.0
          : 1.0 - static_cast<double>(report.charged_cost.micros) / static_cast<double>(report.full_cost.micros);
  report.success_retention_rate =
      report.successes_before == 0
          ? 1.0
          : static_cast<double>(report.successes_after) / static_cast<double>(report.successes_before);
  return report;
}

EarlyTermReport simulate_early_termination(const std::vector<TaskRecord>& records, const Checkpoint& checkpoint,
                                           double threshold, LabelCriterion criterion, const PricingTable& pricing,
                                           int jobs) {
  const std::vector<ScoredExample> scores = score_records(records, checkpoint, criterion, jobs);
  std::vector<double> failure_scores(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) failure_scores[i] = scores[i].score;
  return simulate_early_termination_scored(records, failure_scores, checkpoint.pipeline.truncation, threshold,
                                           criterion, pricing);
}

// ---- rendering ---------------------------------------------------------------

namespace {

json row_ratio(double value, double target) {
  if (target == 0.0) return nullptr;
  return value / target * 100.0;
}

json strategy_row_json(const char* name, const StrategyRow& row, const StrategyRow& target) {
  return json{{"strategy", name},
              {"cost_usd", row.cost.usd()},
              {"cost_pct_of_target", row_ratio(row.cost.usd(), target.cost.usd())},
              {"tasks", row.tasks},
              {"successes_n1", row.successes_n1},
              {"successes_n1_pct_of_target", row_ratio(row.successes_n1, target.successes_n1)},
              {"successes_n3", row.successes_n3},
              {"successes_n3_pct_of_target", row_ratio(row.successes_n3, target.successes_n3)},
              {"successes_n5", row.successes_n5},
              {"successes_n5_pct_of_target", row_ratio(row.successes_n5, target.successes_n5)}};
}

std::string fmt2(double v) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2) << v;
  return out.str();
}

std::string cell(double value, double target) {
  std::string out = fmt2(value);
  if (target != 0.0) out += " (" + fmt2(value / target * 100.0) + "%)";
  return out;
}

std::string count_cell(int value, int target) {
  std::string out = std::to_string(value);
  if (target != 0) out += " (" + fmt2(static_cast<double>(value) / static_cast<double>(target) * 100.0) + "%)";
  return out;
}

void pad(std::string& s, std::size_t width) {
  while (s.size() < width) s.push_back(' ');
}

}  // namespace

json strategy_table_json(const StrategyRow& source, const StrategyRow& policy, const StrategyRow& target) {
  return json::array({strategy_row_json("source-only", source, target), strategy_row_json("policy", policy, target),
                      strategy_row_json("target-only", target, target)});
}

std::string strategy_table_text(const StrategyRow& source, const StrategyRow& policy, const StrategyRow& target) {
  const std::array<const char*, 3> names = {"source-only", "policy", "target-only"};
  const std::array<const StrategyRow*, 3> rows = {&source, &policy, &target};
  std::vector<std::vector<std::string>> cells;
  cells.push_back({"strategy", "cost", "n=1", "n=3", "n=5"});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    cells.push_back({names[r], cell(rows[r]->cost.usd(), target.cost.usd()),
                     count_cell(rows[r]->successes_n1, target.successes_n1),
                     count_cell(rows[r]->successes_n3, target.successes_n3),
                     count_cell(rows[r]->successes_n5, target.successes_n5)});
  }
  std::array<std::size_t, 5> widths{};
  for (const auto& row : cells)
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
  std::ostringstream out;
  for (const auto& row : cells) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      std::string field = row[c];
      pad(field, widths[c] + 2);
      line += field;
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out << line << "\n";
  }
  return out.str();
}

json hotswap_report_json(const HotswapReport& report) {
  json tasks = json::array();
  for (const auto& task : report.tasks) {
    tasks.push_back(json{{"task_id", task.task_id},
                         {"p_failure", task.p_failure},
                         {"swapped", task.swapped},
                         {"category", outcome_category_name(task.category)},
                         {"source_label", task.source_y},
                         {"final_label", task.final_y},
                         {"source_cost_usd", task.source_cost.usd()},
                         {"target_cost_usd", task.target_cost.usd()},
                         {"total_cost_usd", task.total_cost.usd()}});
  }
  return json{{"mode", report.plan.mode == HotswapMode::sequential ? "sequential" : "parallel"},
              {"k", report.plan.k},
              {"threshold", report.plan.threshold},
              {"criterion_n", report.criterion_n},
              {"approximate_continuations", report.approximate_continuations},
              {"pricing", report.pricing_source},
              {"categories", report.category_counts},
              {"strategies", strategy_table_json(report.source_only, report.policy, report.target_only)},
              {"tasks", std::move(tasks)}};
}

std::string hotswap_report_table(const HotswapReport& report) {
  std::ostringstream out;
  out << (report.plan.mode == HotswapMode::sequential ? "sequential" : "parallel") << " hotswap, k=" << report.plan.k
      << ", threshold=" << fmt2(report.plan.threshold) << ", criterion n=" << report.criterion_n << "\n";
  if (report.approximate_continuations && report.plan.mode == HotswapMode::parallel)
    out << "note: no continuation logs; swapped runs were replaced by full target runs (approximate)\n";
  out << "\n" << strategy_table_text(report.source_only, report.policy, report.target_only) << "\n";
  out << "outcomes:\n";
  for (const auto& [name, count] : report.category_counts) out << "  " << name << ": " << count << "\n";
  return out.str();
}

json early_term_report_json(const EarlyTermReport& report) {
  json tasks = json::array();
  for (const auto& task : report.tasks) {
    tasks.push_back(json{{"task_id", task.task_id},
                         {"p_failure", task.p_failure},
                         {"terminated", task.terminated},
                         {"original_label", task.original_y},
                         {"full_cost_usd", task.full_cost.usd()},
                         {"charged_cost_usd", task.charged_cost.usd()}});
  }
  return json{{"truncation", json{{"mode", truncation_mode_name(report.truncation.mode)}, {"k", report.truncation.k}}},
              {"threshold", report.threshold},
              {"criterion_n", report.criterion_n},
              {"pricing", report.pricing_source},
              {"full_cost_usd", report.full_cost.usd()},
              {"charged_cost_usd", report.charged_cost.usd()},
              {"cost_saving_rate", report.cost_saving_rate},
              {"successes_before", report.successes_before},
              {"successes_after", report.successes_after},
              {"success_retention_rate", report.success_retention_rate},
              {"tasks", std::move(tasks)}};
}

std::string tradeoff_csv(const std::vector<TradeoffPoint>& points) {
  std::ostringstream out;
  out << "threshold,k,cost_saving_rate,success_retention_rate\n";
  for (const auto& point : points) {
    out << point.threshold << "," << point.k << "," << point.cost_saving_rate << ","
        << point.success_retention_rate << "\n";
  }
  return out.str();
}

}  // namespace flowcast
