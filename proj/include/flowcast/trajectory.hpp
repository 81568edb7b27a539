#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowcast/common.hpp"

namespace flowcast {

// Reserved pseudo-tool names. A trailing answer step uses the first one;
// steps whose tool call failed to parse use the second and carry the raw
// text as their single argument.
inline constexpr const char* kFinalAnswerTool = "__final_answer__";
inline constexpr const char* kAbnormalTool = "__abnormal__";

enum class AgentKind { voting, patch_count };

struct ReasoningStep {
  std::string tool;
  std::vector<std::string> args;
  bool abnormal = false;
  std::int64_t in_tok = 0;
  std::int64_t out_tok = 0;
};

struct Trajectory {
  int run_index = 0;
  std::string model_id;
  bool completed = false;
  std::vector<ReasoningStep> steps;
  // Present only when the run produced an answer. VOTING agents may emit
  // several answer strings per run (e.g. multiple suspicious methods).
  std::optional<std::vector<std::string>> final_answer;
};

struct TaskRecord {
  std::string task_id;
  AgentKind agent_kind = AgentKind::voting;
  int budget_n = 0;     // max reasoning steps per run
  int sample_size_r = 0;  // independent runs sampled
  std::vector<Trajectory> trajectories;
  // Exactly one of these is meaningful, keyed by agent_kind:
  std::vector<std::string> ground_truth_answers;  // voting
  std::vector<bool> plausible;                    // patch_count, one flag per run
};

// Success criterion: VOTING tasks succeed when a ground-truth answer is
// among the top `n` vote getters; PATCH_COUNT tasks succeed when at
// least `n` runs produced a plausible patch.
struct LabelCriterion {
  int n = 1;
};

// y = 1 means the task failed under the criterion.
struct Label {
  int y = 0;
};

// Ranked vote tally: (answer, votes), descending votes, ties broken by
// ascending answer string. One vote per distinct trimmed answer per run.
std::vector<std::pair<std::string, int>> majority_vote(const TaskRecord& record);

Label label_task(const TaskRecord& record, LabelCriterion criterion);

// The inputs label_task needs, decoupled from the raw trajectories so a
// graph cache can re-label under a different criterion without the logs.
struct LabelBasis {
  AgentKind agent_kind = AgentKind::voting;
  std::vector<std::pair<std::string, int>> votes;  // ranked as majority_vote
  std::vector<std::string> ground_truth_answers;
  int plausible_count = 0;
  int completed_runs = 0;  // denominator for vote confidence
};

LabelBasis label_basis(const TaskRecord& record);
Label label_from_basis(const LabelBasis& basis, LabelCriterion criterion);

// Fraction of completed runs that voted for the top answer; 0 when no
// run completed. Drives the vote-confidence baseline.
double vote_confidence(const LabelBasis& basis);

std::string trim(const std::string& s);

// Throws error(errc::validation) with the task id in the message.
void validate_record(const TaskRecord& record);

nlohmann::json record_to_json(const TaskRecord& record);
TaskRecord record_from_json(const nlohmann::json& j, const std::string& where);

// One JSON object per line. Parse errors carry file:line context.
std::vector<TaskRecord> parse_log(const std::string& path);
std::vector<TaskRecord> parse_log(std::istream& in, const std::string& origin);
void write_log(const std::vector<TaskRecord>& records, const std::string& path);

const char* agent_kind_name(AgentKind kind);
AgentKind agent_kind_from_name(const std::string& name, const std::string& where);

}  // namespace flowcast
