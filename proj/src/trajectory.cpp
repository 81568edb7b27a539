#include "flowcast/trajectory.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace flowcast {

namespace {

using nlohmann::json;

[[noreturn]] void fail_parse(const std::string& where, const std::string& what) {
  throw_parse(where + ": " + what);
}

const json& require(const json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) fail_parse(where, std::string("missing field '") + key + "'");
  return *it;
}

std::string as_string(const json& j, const char* key, const std::string& where) {
  const json& v = require(j, key, where);
  if (!v.is_string()) fail_parse(where, std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

std::int64_t as_int(const json& j, const char* key, const std::string& where) {
  const json& v = require(j, key, where);
  if (!v.is_number_integer()) fail_parse(where, std::string("field '") + key + "' must be an integer");
  return v.get<std::int64_t>();
}

bool as_bool(const json& j, const char* key, const std::string& where) {
  const json& v = require(j, key, where);
  if (!v.is_boolean()) fail_parse(where, std::string("field '") + key + "' must be a boolean");
  return v.get<bool>();
}

std::vector<std::string> string_list(const json& v, const std::string& where, const char* key) {
  if (!v.is_array()) fail_parse(where, std::string("field '") + key + "' must be an array");
  std::vector<std::string> out;
  out.reserve(v.size());
  for (const auto& e : v) {
    if (!e.is_string()) fail_parse(where, std::string("field '") + key + "' must contain only strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

}  // namespace

const char* agent_kind_name(AgentKind kind) {
  return kind == AgentKind::voting ? "voting" : "patch_count";
}

AgentKind agent_kind_from_name(const std::string& name, const std::string& where) {
  if (name == "voting") return AgentKind::voting;
  if (name == "patch_count") return AgentKind::patch_count;
  fail_parse(where, "agent_kind must be 'voting' or 'patch_count', got '" + name + "'");
}

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::pair<std::string, int>> majority_vote(const TaskRecord& record) {
  std::map<std::string, int> tally;
  for (const auto& traj : record.trajectories) {
    if (!traj.completed || !traj.final_answer) continue;
    // A run votes once per distinct answer it produced, regardless of
    // duplicates in its answer list.
    std::set<std::string> seen;
    for (const auto& raw : *traj.final_answer) {
      const std::string answer = trim(raw);
      if (answer.empty()) continue;
      if (seen.insert(answer).second) ++tally[answer];
    }
  }
  std::vector<std::pair<std::string, int>> ranked(tally.begin(), tally.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return ranked;
}

LabelBasis label_basis(const TaskRecord& record) {
  LabelBasis basis;
  basis.agent_kind = record.agent_kind;
  basis.votes = majority_vote(record);
  for (const auto& gt : record.ground_truth_answers) basis.ground_truth_answers.push_back(trim(gt));
  for (bool p : record.plausible)
    if (p) ++basis.plausible_count;
  for (const auto& traj : record.trajectories)
    if (traj.completed) ++basis.completed_runs;
  return basis;
}

Label label_from_basis(const LabelBasis& basis, LabelCriterion criterion) {
  if (criterion.n < 1) throw_param("label criterion requires n >= 1");
  if (basis.agent_kind == AgentKind::patch_count) {
    return Label{basis.plausible_count >= criterion.n ? 0 : 1};
  }
  // Top-n cut honours the ranked order; a ground-truth hit anywhere in
  // the first n entries is a success.
  const int upto = std::min<std::size_t>(basis.votes.size(), static_cast<std::size_t>(criterion.n));
  for (int i = 0; i < upto; ++i) {
    const std::string& answer = basis.votes[i].first;
    for (const auto& gt : basis.ground_truth_answers) {
      if (answer == gt) return Label{0};
    }
  }
  return Label{1};
}

Label label_task(const TaskRecord& record, LabelCriterion criterion) {
  return label_from_basis(label_basis(record), criterion);
}

double vote_confidence(const LabelBasis& basis) {
  if (basis.completed_runs == 0 || basis.votes.empty()) return 0.0;
  return static_cast<double>(basis.votes.front().second) / static_cast<double>(basis.completed_runs);
}

void validate_record(const TaskRecord& record) {
  const std::string where = "task '" + record.task_id + "'";
  if (record.task_id.empty()) throw_validation("task with empty task_id");
  if (record.budget_n < 1) throw_validation(where + ": n must be >= 1");
  if (record.sample_size_r < 1) throw_validation(where + ": r must be >= 1");
  if (record.trajectories.size() != static_cast<std::size_t>(record.sample_size_r))
    throw_validation(where + ": expected r=" + std::to_string(record.sample_size_r) + " trajectories, got " +
                     std::to_string(record.trajectories.size()));
  for (std::size_t i = 0; i < record.trajectories.size(); ++i) {
    const Trajectory& traj = record.trajectories[i];
    if (traj.run_index != static_cast<int>(i))
      throw_validation(where + ": trajectory " + std::to_string(i) + " has run_index " +
                       std::to_string(traj.run_index) + ", runs must be contiguous from 0");
    if (traj.model_id.empty())
      throw_validation(where + ": trajectory " + std::to_string(i) + " has empty model_id");
    // Budget counts reasoning steps; a trailing answer step is exempt.
    int reasoning = 0;
    for (const auto& step : traj.steps)
      if (step.tool != kFinalAnswerTool) ++reasoning;
    if (reasoning > record.budget_n)
      throw_validation(where + ": trajectory " + std::to_string(i) + " has " + std::to_string(reasoning) +
                       " reasoning steps, budget n=" + std::to_string(record.budget_n));
    for (const auto& step : traj.steps) {
      if (step.tool.empty())
        throw_validation(where + ": trajectory " + std::to_string(i) + " has a step with empty tool name");
      if (step.abnormal != (step.tool == kAbnormalTool))
        throw_validation(where + ": trajectory " + std::to_string(i) + " step abnormal flag must match tool '" +
                         std::string(kAbnormalTool) + "'");
      if (step.in_tok < 0 || step.out_tok < 0)
        throw_validation(where + ": trajectory " + std::to_string(i) + " has negative token counts");
    }
    for (std::size_t s = 0; s + 1 < traj.steps.size(); ++s) {
      if (traj.steps[s].tool == kFinalAnswerTool)
        throw_validation(where + ": trajectory " + std::to_string(i) + " has '" + kFinalAnswerTool +
                         "' before the last step");
    }
  }
  if (record.agent_kind == AgentKind::voting) {
    if (record.ground_truth_answers.empty())
      throw_validation(where + ": voting task needs at least one ground-truth answer");
  } else {
    if (record.plausible.size() != static_cast<std::size_t>(record.sample_size_r))
      throw_validation(where + ": patch_count task needs one plausible flag per run");
  }
}

nlohmann::json record_to_json(const TaskRecord& record) {
  json trajs = json::array();
  for (const auto& traj : record.trajectories) {
    json steps = json::array();
    for (const auto& step : traj.steps) {
      steps.push_back(json{{"tool", step.tool},
                           {"args", step.args},
                           {"abnormal", step.abnormal},
                           {"in_tok", step.in_tok},
                           {"out_tok", step.out_tok}});
    }
    json t{{"run_index", traj.run_index},
           {"model_id", traj.model_id},
           {"completed", traj.completed},
           {"steps", std::move(steps)}};
    if (traj.final_answer) t["final_answer"] = *traj.final_answer;
    trajs.push_back(std::move(t));
  }
  json out{{"task_id", record.task_id},
           {"agent_kind", agent_kind_name(record.agent_kind)},
           {"n", record.budget_n},
           {"r", record.sample_size_r},
           {"trajectories", std::move(trajs)}};
  if (record.agent_kind == AgentKind::voting) {
    out["ground_truth"] = record.ground_truth_answers;
  } else {
    out["ground_truth"] = json{{"plausible", record.plausible}};
  }
  return out;
}

TaskRecord record_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) fail_parse(where, "record must be a JSON object");
  TaskRecord record;
  record.task_id = as_string(j, "task_id", where);
  const std::string at = where + " (task '" + record.task_id + "')";
  record.agent_kind = agent_kind_from_name(as_string(j, "agent_kind", at), at);
  record.budget_n = static_cast<int>(as_int(j, "n", at));
  record.sample_size_r = static_cast<int>(as_int(j, "r", at));

  const json& trajs = require(j, "trajectories", at);
  if (!trajs.is_array()) fail_parse(at, "field 'trajectories' must be an array");
  for (const auto& tj : trajs) {
    if (!tj.is_object()) fail_parse(at, "trajectory entries must be objects");
    Trajectory traj;
    traj.run_index = static_cast<int>(as_int(tj, "run_index", at));
    traj.model_id = as_string(tj, "model_id", at);
    traj.completed = as_bool(tj, "completed", at);
    const json& steps = require(tj, "steps", at);
    if (!steps.is_array()) fail_parse(at, "field 'steps' must be an array");
    for (const auto& sj : steps) {
      if (!sj.is_object()) fail_parse(at, "step entries must be objects");
      ReasoningStep step;
      step.tool = as_string(sj, "tool", at);
      step.args = string_list(require(sj, "args", at), at, "args");
      step.abnormal = as_bool(sj, "abnormal", at);
      step.in_tok = as_int(sj, "in_tok", at);
      step.out_tok = as_int(sj, "out_tok", at);
      traj.steps.push_back(std::move(step));
    }
    if (auto it = tj.find("final_answer"); it != tj.end() && !it->is_null()) {
      traj.final_answer = string_list(*it, at, "final_answer");
    }
    record.trajectories.push_back(std::move(traj));
  }

  const json& gt = require(j, "ground_truth", at);
  if (record.agent_kind == AgentKind::voting) {
    record.ground_truth_answers = string_list(gt, at, "ground_truth");
  } else {
    if (!gt.is_object()) fail_parse(at, "patch_count ground_truth must be an object");
    const json& pl = require(gt, "plausible", at);
    if (!pl.is_array()) fail_parse(at, "field 'plausible' must be an array");
    for (const auto& e : pl) {
      if (!e.is_boolean()) fail_parse(at, "field 'plausible' must contain only booleans");
      record.plausible.push_back(e.get<bool>());
    }
  }

  try {
    validate_record(record);
  } catch (const error& e) {
    if (e.code() != errc::validation) throw;
    throw_validation(where + ": " + e.what());
  }
  return record;
}

std::vector<TaskRecord> parse_log(std::istream& in, const std::string& origin) {
  std::vector<TaskRecord> records;
  std::set<std::string> ids;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::string where = origin + ":" + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      fail_parse(where, std::string("invalid JSON: ") + e.what());
    }
    TaskRecord record = record_from_json(j, where);
    if (!ids.insert(record.task_id).second)
      throw_validation(where + ": duplicate task_id '" + record.task_id + "'");
    records.push_back(std::move(record));
  }
  return records;
}

std::vector<TaskRecord> parse_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_io("cannot open log file '" + path + "'");
  return parse_log(in, path);
}

void write_log(const std::vector<TaskRecord>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw_io("cannot write log file '" + path + "'");
  for (const auto& record : records) out << record_to_json(record).dump() << "\n";
  if (!out) throw_io("write failed for '" + path + "'");
}

}  // namespace flowcast
