#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "flowcast/graph.hpp"

using namespace flowcast;

namespace {

ReasoningStep step(std::string tool, std::vector<std::string> args = {}) {
  ReasoningStep s;
  s.tool = std::move(tool);
  s.args = std::move(args);
  s.in_tok = 10;
  s.out_tok = 5;
  return s;
}

Trajectory run(int index, std::vector<ReasoningStep> steps, std::vector<std::string> answer = {}) {
  Trajectory t;
  t.run_index = index;
  t.model_id = "m";
  if (!answer.empty()) {
    steps.push_back(step(kFinalAnswerTool, answer));
    t.completed = true;
    t.final_answer = std::move(answer);
  } else {
    t.completed = false;
  }
  t.steps = std::move(steps);
  return t;
}

TaskRecord record(std::vector<Trajectory> runs) {
  TaskRecord rec;
  rec.task_id = "g0";
  rec.agent_kind = AgentKind::voting;
  rec.budget_n = 16;
  rec.sample_size_r = static_cast<int>(runs.size());
  rec.trajectories = std::move(runs);
  rec.ground_truth_answers = {"A"};
  return rec;
}

Embedder tiny_embedder(std::vector<std::string> tools) {
  EmbedderConfig cfg;
  cfg.arg_dim = 8;
  return Embedder(ToolVocabulary::from_names(std::move(tools)), cfg);
}

std::int64_t edge(const SemanticFlowGraph& g, int a, int b) {
  const auto it = g.edges.find({a, b});
  return it == g.edges.end() ? 0 : it->second;
}

}  // namespace

TEST_CASE("exact build dedupes identical step signatures across runs") {
  const Embedder emb = tiny_embedder({"a", "b", "c"});
  const std::vector<ReasoningStep> seq{step("a", {"x"}), step("b", {"y"}), step("c", {"z"})};
  const TaskRecord rec = record({run(0, seq), run(1, seq)});
  const SemanticFlowGraph g = build_exact(rec, emb);
  REQUIRE(g.nodes.size() == 3);
  CHECK(g.nodes[0].tag == "a");
  CHECK(g.nodes[0].member_count == 2);
  CHECK(g.nodes[2].member_count == 2);
  CHECK(edge(g, 0, 1) == 2);
  CHECK(edge(g, 1, 2) == 2);
  CHECK(g.edges.size() == 2);
  CHECK(g.total_edge_weight() == 4);  // sum over runs of len-1
}

TEST_CASE("exact build fans out on diverging runs") {
  const Embedder emb = tiny_embedder({"a", "b", "c"});
  const TaskRecord rec = record({run(0, {step("a"), step("b")}), run(1, {step("a"), step("c")})});
  const SemanticFlowGraph g = build_exact(rec, emb);
  REQUIRE(g.nodes.size() == 3);
  CHECK(edge(g, 0, 1) == 1);
  CHECK(edge(g, 0, 2) == 1);
  CHECK(g.nodes[0].member_count == 2);
}

TEST_CASE("exact build trivia: single step, distinct args, arg boundaries, self loops") {
  const Embedder emb = tiny_embedder({"a"});
  const SemanticFlowGraph single = build_exact(record({run(0, {step("a")})}), emb);
  CHECK(single.nodes.size() == 1);
  CHECK(single.edges.empty());

  // Same tool, different args: two nodes.
  const SemanticFlowGraph args =
      build_exact(record({run(0, {step("a", {"x"}), step("a", {"y"})})}), emb);
  CHECK(args.nodes.size() == 2);
  CHECK(edge(args, 0, 1) == 1);

  // ("ab","c") and ("a","bc") must not collide.
  const SemanticFlowGraph bounds =
      build_exact(record({run(0, {step("a", {"ab", "c"}), step("a", {"a", "bc"})})}), emb);
  CHECK(bounds.nodes.size() == 2);

  // Identical consecutive steps form a self loop; the edge total invariant holds.
  const SemanticFlowGraph loop =
      build_exact(record({run(0, {step("a", {"x"}), step("a", {"x"}), step("a", {"x"})})}), emb);
  CHECK(loop.nodes.size() == 1);
  CHECK(edge(loop, 0, 0) == 2);
  CHECK(loop.total_edge_weight() == 2);
}

TEST_CASE("parallel truncation keeps prefixes and voids cut runs") {
  const TaskRecord rec = record({run(0, {step("a"), step("b")}, {"A"}),   // 3 steps with answer
                                 run(1, {step("a")}, {"A"}),              // 2 steps, fits k=2
                                 run(2, {step("a"), step("b"), step("c")})});
  const TaskRecord cut = truncate_parallel(rec, 2);
  REQUIRE(cut.trajectories.size() == 3);
  CHECK(cut.trajectories[0].steps.size() == 2);
  CHECK_FALSE(cut.trajectories[0].completed);
  CHECK_FALSE(cut.trajectories[0].final_answer.has_value());
  // A run that already fits keeps its answer.
  CHECK(cut.trajectories[1].steps.size() == 2);
  CHECK(cut.trajectories[1].completed);
  CHECK(cut.trajectories[1].final_answer.has_value());
  CHECK(cut.trajectories[2].steps.size() == 2);
  // Untouched source record.
  CHECK(rec.trajectories[0].steps.size() == 3);

  CHECK_THROWS_AS(truncate_parallel(rec, 0), error);
}

TEST_CASE("sequential truncation keeps the first k runs") {
  TaskRecord rec = record({run(0, {step("a")}, {"A"}), run(1, {step("a")}, {"B"}), run(2, {step("a")}, {"A"})});
  const TaskRecord cut = truncate_sequential(rec, 2);
  CHECK(cut.trajectories.size() == 2);
  CHECK(cut.sample_size_r == 2);
  CHECK(cut.trajectories[1].final_answer.value() == std::vector<std::string>{"B"});

  // k = r is the identity.
  const TaskRecord same = truncate_sequential(rec, 3);
  CHECK(record_to_json(same) == record_to_json(rec));

  try {
    truncate_sequential(rec, 4);
    FAIL("expected a param error");
  } catch (const error& e) {
    CHECK(e.code() == errc::param);
  }
  CHECK_THROWS_AS(truncate_sequential(rec, 0), error);

  // Plausible flags follow the kept runs.
  TaskRecord patch = rec;
  patch.agent_kind = AgentKind::patch_count;
  patch.ground_truth_answers.clear();
  patch.plausible = {true, false, true};
  CHECK(truncate_sequential(patch, 2).plausible == std::vector<bool>{true, false});
}

TEST_CASE("apply_truncation dispatches and none is identity") {
  const TaskRecord rec = record({run(0, {step("a"), step("b")}, {"A"})});
  CHECK(record_to_json(apply_truncation(rec, {TruncationMode::none, 0})) == record_to_json(rec));
  CHECK(apply_truncation(rec, {TruncationMode::parallel, 1}).trajectories[0].steps.size() == 1);
  CHECK(apply_truncation(rec, {TruncationMode::sequential, 1}).sample_size_r == 1);
  CHECK(truncation_mode_from_name("parallel") == TruncationMode::parallel);
  CHECK(truncation_mode_name(TruncationMode::sequential) == std::string("sequential"));
  CHECK_THROWS_AS(truncation_mode_from_name("bogus"), error);
}

TEST_CASE("similarity gate is strict except at exactly 1.0") {
  CHECK_FALSE(similarity_exceeds(0.5, 0.5));
  CHECK(similarity_exceeds(0.51, 0.5));
  CHECK(similarity_exceeds(1.0, 1.0));
  CHECK_FALSE(similarity_exceeds(0.9999, 1.0));
  CHECK_FALSE(similarity_exceeds(0.99, 0.99));
}

TEST_CASE("clustering groups near-duplicates and isolates orthogonal vectors") {
  // cos(v, v') = 0.995 exactly by construction.
  const double c = 0.995;
  const double s = std::sqrt(1.0 - c * c);
  const std::vector<std::vector<double>> vectors{{1.0, 0.0}, {c, s}, {0.0, 1.0}};
  ClusterConfig config;
  config.assignment_threshold = 0.99;
  config.merge_threshold = 0.99;
  const ClusterResult result = cluster_vectors(vectors, config);
  REQUIRE(result.centroids.size() == 2);
  CHECK(result.assignment == std::vector<int>{0, 0, 1});
  CHECK(result.member_counts == std::vector<int>{2, 1});
  // Centroid is the member mean.
  CHECK(result.centroids[0][0] == doctest::Approx((1.0 + c) / 2.0).epsilon(1e-12));
  CHECK(result.centroids[0][1] == doctest::Approx(s / 2.0).epsilon(1e-12));
  CHECK(result.centroids[1] == std::vector<double>{0.0, 1.0});
}

TEST_CASE("threshold 1.0 partitions exactly by bitwise equality") {
  const std::vector<double> a{0.3, 0.4};
  const std::vector<double> b{0.5, 0.1};
  const std::vector<double> c{0.1, 0.9};
  const ClusterResult result = cluster_vectors({a, a, b, a, c, b}, {1.0, 1.0});
  CHECK(result.assignment == std::vector<int>{0, 0, 1, 0, 2, 1});
  CHECK(result.member_counts == std::vector<int>{3, 2, 1});
}

TEST_CASE("assignment ties resolve to the lowest cluster id") {
  // [1,1] is equidistant from the two axis clusters.
  const ClusterResult result = cluster_vectors({{1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}}, {0.5, 0.99});
  CHECK(result.assignment == std::vector<int>{0, 1, 0});
}

TEST_CASE("merge phase collapses chains and keeps centroid pairs below threshold") {
  // Assignment threshold 1.0 seeds one cluster per distinct vector; the
  // merge pass must then fold the three near-parallel ones together.
  const std::vector<std::vector<double>> vectors{
      {1.0, 0.0}, {0.9999, 0.01}, {0.9998, 0.02}, {0.0, 1.0}};
  const ClusterResult result = cluster_vectors(vectors, {1.0, 0.99});
  REQUIRE(result.centroids.size() == 2);
  CHECK(result.assignment == std::vector<int>{0, 0, 0, 1});
  CHECK(result.member_counts == std::vector<int>{3, 1});
  CHECK(result.centroids[0][0] == doctest::Approx((1.0 + 0.9999 + 0.9998) / 3.0).epsilon(1e-12));

  // Post-merge invariant on random data: no surviving pair still passes the gate.
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<double>> random_vectors;
    for (int i = 0; i < 30; ++i) {
      std::vector<double> v(3);
      for (auto& x : v) x = rng.uniform(-1.0, 1.0);
      random_vectors.push_back(std::move(v));
    }
    const ClusterConfig config{0.8, 0.8};
    const ClusterResult r = cluster_vectors(random_vectors, config);
    for (std::size_t i = 0; i < r.centroids.size(); ++i)
      for (std::size_t j = i + 1; j < r.centroids.size(); ++j)
        CHECK_FALSE(similarity_exceeds(cosine(r.centroids[i], r.centroids[j]), config.merge_threshold));
  }
}

TEST_CASE("clustered build mirrors exact mode at threshold 1.0") {
  const Embedder emb = tiny_embedder({"a", "b"});
  const std::vector<ReasoningStep> seq{step("a", {"x"}), step("b", {"y"})};
  const TaskRecord rec = record({run(0, seq), run(1, seq)});
  const SemanticFlowGraph exact = build_exact(rec, emb);
  const SemanticFlowGraph clustered = build_clustered(rec, emb, {1.0, 1.0});
  REQUIRE(clustered.nodes.size() == exact.nodes.size());
  CHECK(clustered.edges == exact.edges);
  CHECK(clustered.nodes[0].tag == "a");
  CHECK(clustered.nodes[0].member_count == 2);
  // Centroid of identical members equals the member feature.
  CHECK(clustered.nodes[0].feature == exact.nodes[0].feature);
}

TEST_CASE("clustered build forms self loops inside a cluster") {
  const Embedder emb = tiny_embedder({"a"});
  const TaskRecord rec = record({run(0, {step("a", {"x"}), step("a", {"x"})})});
  const SemanticFlowGraph g = build_clustered(rec, emb, {0.99, 0.99});
  REQUIRE(g.nodes.size() == 1);
  CHECK(edge(g, 0, 0) == 1);
  CHECK(g.nodes[0].member_count == 2);
}

TEST_CASE("adjacency normalization oracle") {
  SemanticFlowGraph g;
  g.task_id = "adj";
  for (int i = 0; i < 2; ++i) {
    SfgNode n;
    n.id = i;
    n.feature = {1.0, 2.0};
    g.nodes.push_back(n);
  }
  g.edges[{0, 1}] = 1;
  g.edges[{1, 0}] = 1;
  const GraphMatrices m = to_matrices(g);
  // A + A^T + I = [[1,2],[2,1]], degrees (3,3).
  CHECK(m.adjacency(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(m.adjacency(0, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(m.adjacency(1, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(m.adjacency(1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(m.features.rows() == 2);
  CHECK(m.features(1, 1) == 2.0);
}

TEST_CASE("adjacency corner cases") {
  SemanticFlowGraph lone;
  lone.task_id = "lone";
  SfgNode n;
  n.id = 0;
  n.feature = {1.0};
  lone.nodes.push_back(n);
  CHECK(to_matrices(lone).adjacency(0, 0) == 1.0);

  // A self loop contributes twice to the diagonal before the +1.
  SemanticFlowGraph loop = lone;
  loop.edges[{0, 0}] = 1;
  CHECK(to_matrices(loop).adjacency(0, 0) == doctest::Approx(1.0).epsilon(1e-12));

  // Binarization clamps multiplicities before symmetrization.
  SemanticFlowGraph heavy;
  heavy.task_id = "heavy";
  for (int i = 0; i < 2; ++i) {
    SfgNode hn;
    hn.id = i;
    hn.feature = {1.0};
    heavy.nodes.push_back(hn);
  }
  heavy.edges[{0, 1}] = 5;
  const GraphMatrices bin = to_matrices(heavy, true);
  CHECK(bin.adjacency(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(bin.adjacency(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  const GraphMatrices raw = to_matrices(heavy, false);
  CHECK(raw.adjacency(0, 1) == doctest::Approx(5.0 / 6.0).epsilon(1e-12));

  SemanticFlowGraph empty;
  empty.task_id = "empty";
  try {
    to_matrices(empty);
    FAIL("expected a data error");
  } catch (const error& e) {
    CHECK(e.code() == errc::data);
  }
}

TEST_CASE("feature variants zero the expected blocks") {
  const Embedder emb = tiny_embedder({"a", "b"});
  const int tool_dim = emb.tool_dim();
  const TaskRecord rec = record({run(0, {step("a", {"hello"}), step("b", {"world"}), step("a", {"hello"})})});

  const SemanticFlowGraph full = build_exact(rec, emb, FeatureVariant::full);
  REQUIRE(full.nodes.size() == 2);
  CHECK(full.nodes[0].feature[0] == 1.0);
  double arg_norm = 0.0;
  for (std::size_t i = static_cast<std::size_t>(tool_dim); i < full.nodes[0].feature.size(); ++i)
    arg_norm += full.nodes[0].feature[i] * full.nodes[0].feature[i];
  CHECK(std::sqrt(arg_norm) == doctest::Approx(1.0).epsilon(1e-9));

  const SemanticFlowGraph no_args = build_exact(rec, emb, FeatureVariant::no_arguments);
  CHECK(no_args.nodes[0].feature[0] == 1.0);
  for (std::size_t i = static_cast<std::size_t>(tool_dim); i < no_args.nodes[0].feature.size(); ++i)
    CHECK(no_args.nodes[0].feature[i] == 0.0);

  const SemanticFlowGraph no_funcs = build_exact(rec, emb, FeatureVariant::no_functions);
  for (int i = 0; i < tool_dim; ++i) CHECK(no_funcs.nodes[0].feature[static_cast<std::size_t>(i)] == 0.0);

  // no_semantics replaces hashes with first-appearance identity slots.
  const SemanticFlowGraph no_sem = build_exact(rec, emb, FeatureVariant::no_semantics);
  CHECK(no_sem.nodes[0].feature[static_cast<std::size_t>(tool_dim)] == 1.0);      // "hello" -> slot 0
  CHECK(no_sem.nodes[1].feature[static_cast<std::size_t>(tool_dim) + 1] == 1.0);  // "world" -> slot 1
  CHECK(no_sem.nodes[1].feature[static_cast<std::size_t>(tool_dim)] == 0.0);
}

TEST_CASE("graphset carries full-record labels under truncation") {
  const std::vector<ReasoningStep> seq{step("a"), step("b"), step("c")};
  std::vector<TaskRecord> records;
  for (int i = 0; i < 2; ++i) {
    TaskRecord rec = record({run(0, seq, {"A"}), run(1, seq, {"A"}), run(2, seq, {"B"})});
    rec.task_id = "t" + std::to_string(i);
    records.push_back(std::move(rec));
  }
  PipelineConfig pipeline;
  pipeline.embedder.arg_dim = 8;
  pipeline.truncation = {TruncationMode::parallel, 1};
  const GraphSet set = build_graphset(records, pipeline);
  REQUIRE(set.items.size() == 2);
  // Labels come from the untruncated record.
  CHECK(set.items[0].basis.completed_runs == 3);
  CHECK(set.items[0].basis.votes.size() == 2);
  // Graphs see one step per run.
  CHECK(set.items[0].graph.nodes.size() == 1);
  CHECK(set.items[0].graph.total_edge_weight() == 0);
  // Vocabulary reflects the full corpus, not the truncated steps.
  std::vector<std::string> vocab = set.pipeline.vocab;
  CHECK(std::find(vocab.begin(), vocab.end(), "c") != vocab.end());
  CHECK(std::find(vocab.begin(), vocab.end(), kFinalAnswerTool) != vocab.end());
}

TEST_CASE("graphset save and load round trip bitwise") {
  std::vector<TaskRecord> records;
  TaskRecord rec = record({run(0, {step("a", {"x"}), step("b", {"y"})}, {"A"}),
                           run(1, {step("a", {"x"})}, {"B"})});
  records.push_back(rec);
  PipelineConfig pipeline;
  pipeline.embedder.arg_dim = 8;
  pipeline.mode = BuildMode::cluster;
  pipeline.cluster = {0.95, 0.95};
  const GraphSet set = build_graphset(records, pipeline);
  const std::string path = "test_graphset_roundtrip.json";
  save_graphset(set, path);
  const GraphSet loaded = load_graphset(path);
  std::remove(path.c_str());

  CHECK(pipeline_fingerprint(loaded.pipeline) == pipeline_fingerprint(set.pipeline));
  REQUIRE(loaded.items.size() == set.items.size());
  const TaskGraph& a = set.items[0];
  const TaskGraph& b = loaded.items[0];
  CHECK(a.graph.task_id == b.graph.task_id);
  CHECK(a.graph.edges == b.graph.edges);
  REQUIRE(a.graph.nodes.size() == b.graph.nodes.size());
  for (std::size_t i = 0; i < a.graph.nodes.size(); ++i) {
    CHECK(a.graph.nodes[i].feature == b.graph.nodes[i].feature);  // bitwise
    CHECK(a.graph.nodes[i].member_count == b.graph.nodes[i].member_count);
  }
  CHECK(a.basis.votes == b.basis.votes);
  CHECK(a.basis.completed_runs == b.basis.completed_runs);

  CHECK_THROWS_AS(load_graphset("no_such_graphset.json"), error);
}

TEST_CASE("pipeline fingerprint is stable and config-sensitive") {
  PipelineConfig a;
  a.vocab = {"x", "y"};
  PipelineConfig b = a;
  CHECK(pipeline_fingerprint(a) == pipeline_fingerprint(b));
  CHECK(pipeline_fingerprint(a).size() == 16);
  b.embedder.seed ^= 1;
  CHECK(pipeline_fingerprint(a) != pipeline_fingerprint(b));
  PipelineConfig c = a;
  c.truncation = {TruncationMode::parallel, 3};
  CHECK(pipeline_fingerprint(a) != pipeline_fingerprint(c));
  PipelineConfig d = a;
  d.vocab.push_back("z");
  CHECK(pipeline_fingerprint(a) != pipeline_fingerprint(d));

  // JSON round trip preserves the fingerprint.
  const PipelineConfig back = pipeline_from_json(pipeline_to_json(c), "test");
  CHECK(pipeline_fingerprint(back) == pipeline_fingerprint(c));
}

TEST_CASE("dot export names nodes and weighted edges") {
  const Embedder emb = tiny_embedder({"a", "b"});
  const std::vector<ReasoningStep> seq{step("a", {"x"}), step("b", {"y"})};
  const TaskRecord rec = record({run(0, seq), run(1, seq)});
  const std::string dot = to_dot(build_exact(rec, emb));
  CHECK(dot.find("digraph \"g0\"") != std::string::npos);
  CHECK(dot.find("n0 [label=\"a (x2)\"]") != std::string::npos);
  CHECK(dot.find("n0 -> n1 [label=\"2\"]") != std::string::npos);
}

TEST_CASE("parallel graph build matches the sequential result") {
  std::vector<TaskRecord> records;
  Rng rng(21);
  for (int i = 0; i < 12; ++i) {
    std::vector<Trajectory> runs;
    for (int r = 0; r < 3; ++r) {
      std::vector<ReasoningStep> steps;
      const int len = 1 + static_cast<int>(rng.next_below(4));
      for (int s = 0; s < len; ++s)
        steps.push_back(step(rng.bernoulli(0.5) ? "a" : "b", {std::to_string(rng.next_below(3))}));
      runs.push_back(run(r, std::move(steps), {"A"}));
    }
    TaskRecord rec = record(std::move(runs));
    rec.task_id = "t" + std::to_string(i);
    records.push_back(std::move(rec));
  }
  PipelineConfig pipeline;
  pipeline.embedder.arg_dim = 8;
  const GraphSet lone = build_graphset(records, pipeline, 1);
  const GraphSet many = build_graphset(records, pipeline, 4);
  REQUIRE(lone.items.size() == many.items.size());
  for (std::size_t i = 0; i < lone.items.size(); ++i) {
    CHECK(lone.items[i].graph.edges == many.items[i].graph.edges);
    REQUIRE(lone.items[i].graph.nodes.size() == many.items[i].graph.nodes.size());
    for (std::size_t n = 0; n < lone.items[i].graph.nodes.size(); ++n)
      CHECK(lone.items[i].graph.nodes[n].feature == many.items[i].graph.nodes[n].feature);
  }
}
