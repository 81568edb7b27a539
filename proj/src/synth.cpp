#include "flowcast/synth.hpp"

#include <array>

#include "flowcast/common.hpp"

namespace flowcast {

namespace {

// Identifier fragments. Pool B only appears in the failure motif, which
// is what makes arguments informative; the tool sequence alone carries a
// weaker version of the same signal (run_probe below).
const std::array<const char*, 8> kModules = {"core", "data", "sync", "auth", "cache", "index", "route", "parse"};
const std::array<const char*, 8> kClasses = {"Resolver", "Planner", "Broker", "Codec", "Ledger", "Mapper", "Gate", "Probe"};
const std::array<const char*, 8> kMembersA = {"resolve", "bind", "load", "merge", "collect", "attach", "scan", "fold"};
const std::array<const char*, 8> kMembersB = {"fallback", "retry", "spin", "flush", "evict", "stall", "abort", "drain"};

template <std::size_t N>
const char* pick(Rng& rng, const std::array<const char*, N>& pool) {
  return pool[rng.next_below(N)];
}

std::string make_class_path(Rng& rng) {
  return std::string(pick(rng, kModules)) + "." + pick(rng, kModules) + "." + pick(rng, kClasses);
}

std::string make_member(Rng& rng, const std::string& class_path, bool flavor_b) {
  const char* verb = flavor_b ? pick(rng, kMembersB) : pick(rng, kMembersA);
  return class_path + "." + verb + "_" + std::to_string(rng.next_below(40));
}

ReasoningStep make_step(Rng& rng, const std::string& tool, std::vector<std::string> args, int position) {
  ReasoningStep step;
  step.tool = tool;
  step.args = std::move(args);
  step.in_tok = 600 + 140 * static_cast<std::int64_t>(position) + static_cast<std::int64_t>(rng.next_below(90));
  step.out_tok = 70 + static_cast<std::int64_t>(rng.next_below(50));
  return step;
}

struct RunPlan {
  bool motif_b = false;       // failure-flavored walk
  double consensus_prob = 0.9;
  std::string consensus_answer;
};

Trajectory make_run(Rng& rng, const std::string& model_id, int run_index,
                    const std::string& class_path, const RunPlan& plan, int min_len, int max_len) {
  Trajectory traj;
  traj.run_index = run_index;
  traj.model_id = model_id;

  const int tail_len = min_len + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(max_len - min_len + 1)));
  std::vector<ReasoningStep> steps;
  steps.push_back(make_step(rng, "list_failing_checks", {class_path + "_suite"}, 0));
  steps.push_back(make_step(rng, "inspect_coverage", {class_path}, 1));
  for (int s = 0; s < tail_len; ++s) {
    const int position = 2 + s;
    if (plan.motif_b) {
      // The failure walk leans on run_probe occasionally and always uses
      // flavor-B member names.
      const bool probe = rng.bernoulli(0.3);
      const std::string member = make_member(rng, class_path, true);
      steps.push_back(make_step(rng, probe ? "run_probe" : (s % 2 == 0 ? "fetch_source" : "fetch_docs"),
                                {member}, position));
    } else {
      const std::string member = make_member(rng, class_path, false);
      steps.push_back(make_step(rng, s % 2 == 0 ? "fetch_source" : "fetch_docs", {member}, position));
    }
  }

  // Occasional abnormal step: a tool call that failed to parse.
  if (rng.bernoulli(0.05)) {
    ReasoningStep bad;
    bad.tool = kAbnormalTool;
    bad.abnormal = true;
    bad.args = {"unparsed output " + std::to_string(rng.next_below(1000))};
    bad.in_tok = 500 + static_cast<std::int64_t>(rng.next_below(200));
    bad.out_tok = 40 + static_cast<std::int64_t>(rng.next_below(40));
    const std::size_t at = 1 + rng.next_below(steps.size() - 1);
    steps.insert(steps.begin() + static_cast<std::ptrdiff_t>(at), std::move(bad));
  }

  // A few runs crash before answering; label-independent.
  if (rng.bernoulli(0.05)) {
    const std::size_t cut = 1 + rng.next_below(steps.size());
    steps.resize(cut);
    traj.steps = std::move(steps);
    traj.completed = false;
    return traj;
  }

  std::string answer;
  if (rng.bernoulli(plan.consensus_prob)) {
    answer = plan.consensus_answer;
  } else {
    answer = class_path + ".alt_run" + std::to_string(run_index) + "_" + std::to_string(rng.next_below(1000));
  }
  ReasoningStep final_step;
  final_step.tool = kFinalAnswerTool;
  final_step.args = {answer};
  final_step.in_tok = 600 + 140 * static_cast<std::int64_t>(steps.size()) + static_cast<std::int64_t>(rng.next_below(90));
  final_step.out_tok = 30 + static_cast<std::int64_t>(rng.next_below(20));
  steps.push_back(std::move(final_step));

  traj.steps = std::move(steps);
  traj.completed = true;
  traj.final_answer = std::vector<std::string>{answer};
  return traj;
}

}  // namespace

SynthResult synthesize(const SynthConfig& config) {
  if (config.tasks < 10) throw_config("synthesis needs at least 10 tasks");
  if (config.runs < 1) throw_config("synthesis needs at least 1 run per task");
  if (config.budget < 6) throw_config("synthesis needs a step budget of at least 6");
  if (config.signal_strength < 0.0 || config.signal_strength > 1.0)
    throw_config("signal strength must be in [0, 1]");
  if (config.failure_rate < 0.0 || config.failure_rate > 1.0) throw_config("failure rate must be in [0, 1]");
  if (config.rescue_rate < 0.0 || config.rescue_rate > 1.0) throw_config("rescue rate must be in [0, 1]");
  if (config.source_model.empty() || config.target_model.empty()) throw_config("model names must be non-empty");

  SynthResult result;
  for (int t = 0; t < config.tasks; ++t) {
    Rng rng(derive_seed(config.seed, 0x7a5c0000ULL + static_cast<std::uint64_t>(t)));

    const std::string class_path = make_class_path(rng);
    const std::string truth = make_member(rng, class_path, false);
    // Wrong consensus answers come from the same member-name distribution
    // as the truth: the answer text alone must carry no signal that
    // generalizes across tasks.
    auto draw_wrong = [&] {
      for (;;) {
        std::string candidate = make_member(rng, class_path, false);
        if (candidate != truth) return candidate;
      }
    };
    const std::string wrong = draw_wrong();
    const std::string wrong_target = draw_wrong();

    const bool failing = rng.bernoulli(config.failure_rate);
    const bool planted = failing && rng.bernoulli(config.signal_strength);

    TaskRecord src;
    src.task_id = "task-" + std::to_string(100000 + t);
    src.agent_kind = AgentKind::voting;
    src.budget_n = config.budget;
    src.sample_size_r = config.runs;
    src.ground_truth_answers = {truth};

    RunPlan plan;
    plan.motif_b = planted;
    plan.consensus_answer = failing ? wrong : truth;
    // Planted failures scatter their votes; unplanted ones mirror the
    // success distribution exactly so zero signal stays zero.
    plan.consensus_prob = planted ? 0.55 : 0.9;

    // Tail length in [3, budget-2] keeps total steps within budget with
    // room for the answer step and an occasional abnormal insertion.
    const int min_len = 3;
    const int max_len = config.budget - 3;
    for (int r = 0; r < config.runs; ++r)
      src.trajectories.push_back(make_run(rng, config.source_model, r, class_path, plan, min_len, max_len));
    result.source.push_back(std::move(src));

    // Target runs for the same tasks: shorter, steadier, usually right.
    TaskRecord tgt;
    tgt.task_id = result.source.back().task_id;
    tgt.agent_kind = AgentKind::voting;
    tgt.budget_n = config.budget;
    tgt.sample_size_r = config.runs;
    tgt.ground_truth_answers = {truth};
    const bool rescued = !failing || rng.bernoulli(config.rescue_rate);
    RunPlan tgt_plan;
    tgt_plan.motif_b = false;
    tgt_plan.consensus_answer = rescued ? truth : wrong_target;
    tgt_plan.consensus_prob = 0.92;
    const int tgt_max_len = std::max(min_len, config.budget - 4);
    for (int r = 0; r < config.runs; ++r)
      tgt.trajectories.push_back(make_run(rng, config.target_model, r, class_path, tgt_plan, min_len, tgt_max_len));
    result.target.push_back(std::move(tgt));
  }
  return result;
}

std::string synth_pricing_json(const SynthConfig& config) {
  nlohmann::json doc{{config.source_model, {{"in_per_1m", 0.15}, {"out_per_1m", 0.60}}},
                     {config.target_model, {{"in_per_1m", 3.00}, {"out_per_1m", 15.00}}}};
  return doc.dump(2) + "\n";
}

}  // namespace flowcast
