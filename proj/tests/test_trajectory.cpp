#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "flowcast/trajectory.hpp"

using namespace flowcast;

namespace {

ReasoningStep step(std::string tool, std::vector<std::string> args = {}, std::int64_t in_tok = 10,
                   std::int64_t out_tok = 5) {
  ReasoningStep s;
  s.tool = std::move(tool);
  s.args = std::move(args);
  s.in_tok = in_tok;
  s.out_tok = out_tok;
  return s;
}

Trajectory run_with_answer(int index, std::vector<std::string> answers) {
  Trajectory t;
  t.run_index = index;
  t.model_id = "m";
  t.completed = true;
  t.steps.push_back(step("probe", {"x"}));
  ReasoningStep fin = step(kFinalAnswerTool, answers);
  t.steps.push_back(fin);
  t.final_answer = std::move(answers);
  return t;
}

Trajectory incomplete_run(int index) {
  Trajectory t;
  t.run_index = index;
  t.model_id = "m";
  t.completed = false;
  t.steps.push_back(step("probe", {"x"}));
  return t;
}

// r runs voting A/B/C with the given multiplicities.
TaskRecord voting_record(int a, int b, int c, std::vector<std::string> truth) {
  TaskRecord rec;
  rec.task_id = "t0";
  rec.agent_kind = AgentKind::voting;
  rec.budget_n = 8;
  rec.sample_size_r = a + b + c;
  int idx = 0;
  for (int i = 0; i < a; ++i) rec.trajectories.push_back(run_with_answer(idx++, {"A"}));
  for (int i = 0; i < b; ++i) rec.trajectories.push_back(run_with_answer(idx++, {"B"}));
  for (int i = 0; i < c; ++i) rec.trajectories.push_back(run_with_answer(idx++, {"C"}));
  rec.ground_truth_answers = std::move(truth);
  return rec;
}

TaskRecord patch_record(int plausible, int r) {
  TaskRecord rec;
  rec.task_id = "p0";
  rec.agent_kind = AgentKind::patch_count;
  rec.budget_n = 8;
  rec.sample_size_r = r;
  for (int i = 0; i < r; ++i) {
    Trajectory t;
    t.run_index = i;
    t.model_id = "m";
    t.completed = true;
    t.steps.push_back(step("patch", {"f"}));
    rec.trajectories.push_back(std::move(t));
  }
  rec.plausible.assign(static_cast<std::size_t>(r), false);
  for (int i = 0; i < plausible; ++i) rec.plausible[static_cast<std::size_t>(i)] = true;
  return rec;
}

}  // namespace

TEST_CASE("majority vote ranks by count then answer string") {
  const TaskRecord rec = voting_record(4, 3, 3, {"B"});
  const auto ranked = majority_vote(rec);
  REQUIRE(ranked.size() == 3);
  CHECK(ranked[0] == std::pair<std::string, int>("A", 4));
  CHECK(ranked[1] == std::pair<std::string, int>("B", 3));  // ties break toward "B" < "C"
  CHECK(ranked[2] == std::pair<std::string, int>("C", 3));
}

TEST_CASE("unanimous vote") {
  const TaskRecord rec = voting_record(10, 0, 0, {"A"});
  const auto ranked = majority_vote(rec);
  REQUIRE(ranked.size() == 1);
  CHECK(ranked[0] == std::pair<std::string, int>("A", 10));
}

TEST_CASE("votes come only from completed runs") {
  TaskRecord rec = voting_record(2, 0, 0, {"A"});
  rec.sample_size_r = 3;
  Trajectory dead = incomplete_run(2);
  dead.final_answer = std::vector<std::string>{"B"};  // crashed after answering; still no vote
  dead.completed = false;
  rec.trajectories.push_back(std::move(dead));
  const auto ranked = majority_vote(rec);
  REQUIRE(ranked.size() == 1);
  CHECK(ranked[0].first == "A");
}

TEST_CASE("no completed runs give an empty tally") {
  TaskRecord rec;
  rec.task_id = "t";
  rec.agent_kind = AgentKind::voting;
  rec.budget_n = 4;
  rec.sample_size_r = 2;
  rec.trajectories.push_back(incomplete_run(0));
  rec.trajectories.push_back(incomplete_run(1));
  rec.ground_truth_answers = {"A"};
  CHECK(majority_vote(rec).empty());
  // A task with no votes cannot contain the truth in its top-n.
  CHECK(label_task(rec, LabelCriterion{1}).y == 1);
}

TEST_CASE("one vote per distinct trimmed answer per run") {
  TaskRecord rec;
  rec.task_id = "t";
  rec.agent_kind = AgentKind::voting;
  rec.budget_n = 4;
  rec.sample_size_r = 1;
  rec.trajectories.push_back(run_with_answer(0, {"X", " X ", "Y"}));
  rec.ground_truth_answers = {"Y"};
  const auto ranked = majority_vote(rec);
  REQUIRE(ranked.size() == 2);
  CHECK(ranked[0] == std::pair<std::string, int>("X", 1));
  CHECK(ranked[1] == std::pair<std::string, int>("Y", 1));
  // Total votes = distinct (run, answer) contributions.
  int total = 0;
  for (const auto& [answer, votes] : ranked) total += votes;
  CHECK(total == 2);
}

TEST_CASE("voting labels follow the top-n cut") {
  const TaskRecord rec = voting_record(4, 3, 3, {"B"});
  CHECK(label_task(rec, LabelCriterion{1}).y == 1);  // top-1 is A
  CHECK(label_task(rec, LabelCriterion{3}).y == 0);  // B inside top-3
  CHECK(label_task(rec, LabelCriterion{5}).y == 0);
}

TEST_CASE("patch-count labels threshold the plausible tally") {
  const TaskRecord rec = patch_record(4, 10);
  CHECK(label_task(rec, LabelCriterion{3}).y == 0);
  CHECK(label_task(rec, LabelCriterion{5}).y == 1);
}

TEST_CASE("vote confidence is top votes over completed runs") {
  TaskRecord rec = voting_record(3, 2, 0, {"A"});
  rec.sample_size_r = 6;
  rec.trajectories.push_back(incomplete_run(5));
  const LabelBasis basis = label_basis(rec);
  CHECK(basis.completed_runs == 5);
  CHECK(vote_confidence(basis) == doctest::Approx(3.0 / 5.0));

  TaskRecord empty;
  empty.agent_kind = AgentKind::voting;
  CHECK(vote_confidence(label_basis(empty)) == 0.0);
}

TEST_CASE("label monotonicity spot checks") {
  // Voting: success at n implies success at every larger n.
  const TaskRecord rec = voting_record(4, 3, 3, {"B"});
  int first_success = 0;
  for (int n = 1; n <= 4; ++n) {
    if (label_task(rec, LabelCriterion{n}).y == 0) {
      first_success = n;
      break;
    }
  }
  REQUIRE(first_success > 0);
  for (int n = first_success; n <= 6; ++n) CHECK(label_task(rec, LabelCriterion{n}).y == 0);

  // Patch count: failure at n implies failure at every larger n.
  const TaskRecord patches = patch_record(4, 10);
  for (int n = 5; n <= 10; ++n) CHECK(label_task(patches, LabelCriterion{n}).y == 1);
}

TEST_CASE("record json round trip") {
  TaskRecord rec = voting_record(2, 1, 0, {"A"});
  rec.trajectories[0].steps[0].abnormal = false;
  const nlohmann::json j = record_to_json(rec);
  const TaskRecord back = record_from_json(j, "test");
  CHECK(record_to_json(back) == j);
  CHECK(back.task_id == rec.task_id);
  CHECK(back.trajectories.size() == rec.trajectories.size());
  CHECK(back.trajectories[0].steps[0].tool == "probe");
}

TEST_CASE("patch record json round trip keeps plausibility flags") {
  const TaskRecord rec = patch_record(2, 4);
  const nlohmann::json j = record_to_json(rec);
  CHECK(j.at("ground_truth").is_object());
  const TaskRecord back = record_from_json(j, "test");
  CHECK(back.plausible == rec.plausible);
  CHECK(record_to_json(back) == j);
}

TEST_CASE("log write then parse is identity") {
  const std::string path = "test_trajectory_roundtrip.jsonl";
  std::vector<TaskRecord> records;
  records.push_back(voting_record(3, 2, 1, {"C"}));
  records.back().task_id = "alpha";
  records.push_back(patch_record(1, 3));
  records.back().task_id = "beta";
  write_log(records, path);
  const std::vector<TaskRecord> back = parse_log(path);
  REQUIRE(back.size() == 2);
  for (std::size_t i = 0; i < back.size(); ++i) CHECK(record_to_json(back[i]) == record_to_json(records[i]));
  std::remove(path.c_str());
}

TEST_CASE("validation rejects malformed records") {
  SUBCASE("trajectory count must equal r") {
    TaskRecord rec = voting_record(2, 0, 0, {"A"});
    rec.sample_size_r = 3;
    CHECK_THROWS_AS(validate_record(rec), error);
  }
  SUBCASE("steps beyond the budget") {
    TaskRecord rec = voting_record(1, 0, 0, {"A"});
    rec.budget_n = 1;
    rec.trajectories[0].steps.insert(rec.trajectories[0].steps.begin(), step("probe"));
    // 2 reasoning steps + answer step > n+1
    CHECK_THROWS_AS(validate_record(rec), error);
  }
  SUBCASE("an answer step within the budget is exempt from it") {
    TaskRecord rec = voting_record(1, 0, 0, {"A"});
    rec.budget_n = 1;  // 1 probe step + 1 answer step is fine
    CHECK_NOTHROW(validate_record(rec));
  }
  SUBCASE("abnormal flag must match the abnormal pseudo-tool") {
    TaskRecord rec = voting_record(1, 0, 0, {"A"});
    rec.trajectories[0].steps[0].abnormal = true;  // tool says probe
    CHECK_THROWS_AS(validate_record(rec), error);
  }
  SUBCASE("run indexes must be contiguous from zero") {
    TaskRecord rec = voting_record(2, 0, 0, {"A"});
    rec.trajectories[1].run_index = 5;
    CHECK_THROWS_AS(validate_record(rec), error);
  }
  SUBCASE("negative token counts") {
    TaskRecord rec = voting_record(1, 0, 0, {"A"});
    rec.trajectories[0].steps[0].in_tok = -1;
    CHECK_THROWS_AS(validate_record(rec), error);
  }
  SUBCASE("voting records need ground truth") {
    TaskRecord rec = voting_record(1, 0, 0, {});
    CHECK_THROWS_AS(validate_record(rec), error);
  }
  SUBCASE("patch records need one plausibility flag per run") {
    TaskRecord rec = patch_record(1, 3);
    rec.plausible.pop_back();
    CHECK_THROWS_AS(validate_record(rec), error);
  }
  SUBCASE("final answer step only in last position") {
    TaskRecord rec = voting_record(1, 0, 0, {"A"});
    rec.trajectories[0].steps.insert(rec.trajectories[0].steps.begin(), step(kFinalAnswerTool, {"A"}));
    CHECK_THROWS_AS(validate_record(rec), error);
  }
}

TEST_CASE("parse errors carry origin context and category") {
  std::istringstream in("{not json}\n");
  try {
    parse_log(in, "stream");
    FAIL("expected a parse error");
  } catch (const error& e) {
    CHECK(e.code() == errc::parse);
    CHECK(std::string(e.what()).find("stream:1") != std::string::npos);
  }
}

TEST_CASE("duplicate task ids are rejected") {
  const TaskRecord rec = voting_record(1, 0, 0, {"A"});
  std::ostringstream out;
  out << record_to_json(rec).dump() << "\n" << record_to_json(rec).dump() << "\n";
  std::istringstream in(out.str());
  try {
    parse_log(in, "dup");
    FAIL("expected a validation error");
  } catch (const error& e) {
    CHECK(e.code() == errc::validation);
  }
}

TEST_CASE("agent kind names round trip") {
  CHECK(agent_kind_from_name(agent_kind_name(AgentKind::voting), "t") == AgentKind::voting);
  CHECK(agent_kind_from_name(agent_kind_name(AgentKind::patch_count), "t") == AgentKind::patch_count);
  CHECK_THROWS_AS(agent_kind_from_name("other", "t"), error);
}
