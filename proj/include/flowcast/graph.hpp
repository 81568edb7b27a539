#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowcast/embedding.hpp"
#include "flowcast/matrix.hpp"
#include "flowcast/trajectory.hpp"

namespace flowcast {

// ---- truncation ------------------------------------------------------

enum class TruncationMode { none, parallel, sequential };

struct TruncationSpec {
  TruncationMode mode = TruncationMode::none;
  int k = 0;
};

// Keeps at most the first k steps of every run. Runs cut short lose
// their answer and completion status; runs that already fit are
// untouched.
TaskRecord truncate_parallel(const TaskRecord& record, int k);

// Keeps only the first k full runs (k in 1..r).
TaskRecord truncate_sequential(const TaskRecord& record, int k);

TaskRecord apply_truncation(const TaskRecord& record, TruncationSpec spec);

const char* truncation_mode_name(TruncationMode mode);
TruncationMode truncation_mode_from_name(const std::string& name);

// ---- semantic flow graph ---------------------------------------------

struct SfgNode {
  int id = 0;
  std::string tag;  // tool name, for display only
  int member_count = 0;
  std::vector<double> feature;
};

struct SemanticFlowGraph {
  std::string task_id;
  std::vector<SfgNode> nodes;
  // (src, dst) -> number of observed consecutive transitions. Ordered so
  // serialization and DOT output are stable.
  std::map<std::pair<int, int>, std::int64_t> edges;

  std::int64_t total_edge_weight() const;
};

enum class BuildMode { exact, cluster };

enum class FeatureVariant { full, no_semantics, no_arguments, no_functions };

struct ClusterConfig {
  double assignment_threshold = 0.99;
  double merge_threshold = 0.99;
};

// One node per distinct (tool, args) step signature.
SemanticFlowGraph build_exact(const TaskRecord& record, const Embedder& embedder,
                              FeatureVariant variant = FeatureVariant::full);

// Online assignment to the most similar centroid, then greedy pairwise
// centroid merging. Node features are member means.
SemanticFlowGraph build_clustered(const TaskRecord& record, const Embedder& embedder,
                                  const ClusterConfig& config,
                                  FeatureVariant variant = FeatureVariant::full);

// Clustering core, exposed for direct testing. assignment[i] is the
// final cluster of input vector i; cluster ids are compact and ordered
// by first appearance.
struct ClusterResult {
  std::vector<int> assignment;
  std::vector<std::vector<double>> centroids;
  std::vector<int> member_counts;
};

ClusterResult cluster_vectors(const std::vector<std::vector<double>>& vectors, const ClusterConfig& config);

// Similarity gate used by both clustering phases: strictly above the
// threshold, except that exact similarity 1.0 always passes (so a
// threshold of 1.0 groups precisely the bitwise-identical vectors).
bool similarity_exceeds(double sim, double threshold);

// ---- adjacency -------------------------------------------------------

struct GraphMatrices {
  Matrix features;   // |V| x dim
  Matrix adjacency;  // symmetric-normalized, |V| x |V|
};

// A_hat = D^-1/2 (A + A^T + I) D^-1/2. With binarize, weights are
// clamped to 1 before symmetrization.
GraphMatrices to_matrices(const SemanticFlowGraph& graph, bool binarize = false);

std::string to_dot(const SemanticFlowGraph& graph);

// ---- pipeline + cached graph sets ------------------------------------

struct PipelineConfig {
  BuildMode mode = BuildMode::exact;
  ClusterConfig cluster;
  TruncationSpec truncation;
  bool binarize = false;
  FeatureVariant variant = FeatureVariant::full;
  EmbedderConfig embedder;
  // Frozen tool vocabulary. Filled from the corpus at build time so that
  // later predictions embed with the training-time tool slots.
  std::vector<std::string> vocab;
};

nlohmann::json pipeline_to_json(const PipelineConfig& config);
PipelineConfig pipeline_from_json(const nlohmann::json& j, const std::string& where);
std::string pipeline_fingerprint(const PipelineConfig& config);

const char* build_mode_name(BuildMode mode);
const char* variant_name(FeatureVariant variant);
FeatureVariant variant_from_name(const std::string& name);

struct TaskGraph {
  SemanticFlowGraph graph;
  LabelBasis basis;  // from the untruncated record; labels describe full runs
};

struct GraphSet {
  PipelineConfig pipeline;
  std::vector<TaskGraph> items;
};

// Builds one graph per record. The vocabulary (when not preset in
// `pipeline`) and every label come from the full records; truncation
// applies only to what the graphs see.
GraphSet build_graphset(const std::vector<TaskRecord>& records, PipelineConfig pipeline, int jobs = 1);

SemanticFlowGraph build_graph(const TaskRecord& record, const Embedder& embedder, const PipelineConfig& pipeline);

void save_graphset(const GraphSet& set, const std::string& path);
GraphSet load_graphset(const std::string& path);

Embedder make_embedder(const PipelineConfig& pipeline);

}  // namespace flowcast
