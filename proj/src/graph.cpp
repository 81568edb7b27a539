#include "flowcast/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>
#include <unordered_map>

namespace flowcast {

using nlohmann::json;

// ---- truncation ------------------------------------------------------

const char* truncation_mode_name(TruncationMode mode) {
  switch (mode) {
    case TruncationMode::none: return "none";
    case TruncationMode::parallel: return "parallel";
    case TruncationMode::sequential: return "sequential";
  }
  return "none";
}

TruncationMode truncation_mode_from_name(const std::string& name) {
  if (name == "none") return TruncationMode::none;
  if (name == "parallel") return TruncationMode::parallel;
  if (name == "sequential") return TruncationMode::sequential;
  throw_config("unknown truncation mode '" + name + "'");
}

TaskRecord truncate_parallel(const TaskRecord& record, int k) {
  if (k < 1) throw_param("parallel truncation requires k >= 1");
  TaskRecord out = record;
  for (auto& traj : out.trajectories) {
    if (traj.steps.size() <= static_cast<std::size_t>(k)) continue;
    traj.steps.resize(static_cast<std::size_t>(k));
    traj.completed = false;
    traj.final_answer.reset();
  }
  return out;
}

TaskRecord truncate_sequential(const TaskRecord& record, int k) {
  if (k < 1) throw_param("sequential truncation requires k >= 1");
  if (k > record.sample_size_r)
    throw_param("sequential truncation k=" + std::to_string(k) + " exceeds r=" +
                std::to_string(record.sample_size_r) + " for task '" + record.task_id + "'");
  TaskRecord out = record;
  out.trajectories.resize(static_cast<std::size_t>(k));
  out.sample_size_r = k;
  if (!out.plausible.empty()) out.plausible.resize(static_cast<std::size_t>(k));
  return out;
}

TaskRecord apply_truncation(const TaskRecord& record, TruncationSpec spec) {
  switch (spec.mode) {
    case TruncationMode::none: return record;
    case TruncationMode::parallel: return truncate_parallel(record, spec.k);
    case TruncationMode::sequential: return truncate_sequential(record, spec.k);
  }
  return record;
}

// ---- graph construction ----------------------------------------------

std::int64_t SemanticFlowGraph::total_edge_weight() const {
  std::int64_t total = 0;
  for (const auto& [key, w] : edges) total += w;
  return total;
}

namespace {

// Step signature for exact-mode deduplication. Unit separator bytes keep
// ("a","bc") distinct from ("ab","c").
std::string step_key(const ReasoningStep& step) {
  std::string key = step.tool;
  for (const auto& arg : step.args) {
    key.push_back('\x1f');
    key += arg;
  }
  return key;
}

// Feature assembly shared by both modes. no_semantics replaces the
// hashed argument embedding with per-graph argument identity slots: each
// distinct argument string gets the next slot in first-appearance order,
// set as a binary n-hot block (not normalized).
class FeatureBuilder {
 public:
  FeatureBuilder(const Embedder& embedder, FeatureVariant variant)
      : embedder_(embedder), variant_(variant) {}

  std::vector<double> features_for(const ReasoningStep& step) {
    const int tool_dim = embedder_.tool_dim();
    const int arg_dim = embedder_.arg_dim();
    std::vector<double> out(static_cast<std::size_t>(tool_dim + arg_dim), 0.0);
    if (variant_ != FeatureVariant::no_functions) {
      const int slot = step.abnormal ? embedder_.vocab().abnormal_slot() : embedder_.vocab().slot(step.tool);
      out[static_cast<std::size_t>(slot)] = 1.0;
    }
    switch (variant_) {
      case FeatureVariant::no_arguments:
        break;
      case FeatureVariant::no_semantics:
        for (const auto& arg : step.args) {
          auto [it, inserted] = arg_slots_.try_emplace(arg, static_cast<int>(arg_slots_.size()));
          out[static_cast<std::size_t>(tool_dim + it->second % arg_dim)] = 1.0;
        }
        break;
      case FeatureVariant::full:
      case FeatureVariant::no_functions: {
        const std::vector<double> args = embedder_.embed_text(Embedder::join_args(step.args));
        std::copy(args.begin(), args.end(), out.begin() + tool_dim);
        break;
      }
    }
    return out;
  }

 private:
  const Embedder& embedder_;
  FeatureVariant variant_;
  std::unordered_map<std::string, int> arg_slots_;
};

}  // namespace

SemanticFlowGraph build_exact(const TaskRecord& record, const Embedder& embedder, FeatureVariant variant) {
  SemanticFlowGraph graph;
  graph.task_id = record.task_id;
  FeatureBuilder features(embedder, variant);
  std::unordered_map<std::string, int> ids;
  for (const auto& traj : record.trajectories) {
    int prev = -1;
    for (const auto& step : traj.steps) {
      const std::string key = step_key(step);
      auto [it, inserted] = ids.try_emplace(key, static_cast<int>(graph.nodes.size()));
      if (inserted) {
        SfgNode node;
        node.id = it->second;
        node.tag = step.tool;
        node.feature = features.features_for(step);
        graph.nodes.push_back(std::move(node));
      }
      graph.nodes[static_cast<std::size_t>(it->second)].member_count += 1;
      if (prev >= 0) graph.edges[{prev, it->second}] += 1;
      prev = it->second;
    }
  }
  return graph;
}

bool similarity_exceeds(double sim, double threshold) {
  return sim > threshold || sim >= 1.0;
}

ClusterResult cluster_vectors(const std::vector<std::vector<double>>& vectors, const ClusterConfig& config) {
  struct Cluster {
    std::vector<double> sum;
    std::vector<double> first;  // first member; exact centroid while uniform
    int count = 0;
    bool alive = true;
    bool uniform = true;  // all members bitwise identical so far
    int into = -1;        // merge target
  };
  std::vector<Cluster> clusters;
  std::vector<int> assignment(vectors.size(), -1);

  auto same_bits = [](const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
  };
  // A cluster of bitwise-identical members keeps its member vector as the
  // exact centroid; sum/count drifts in the last ulp once count reaches 3
  // and would break the threshold-1.0 identity gate.
  auto centroid = [](const Cluster& c) {
    if (c.uniform) return c.first;
    std::vector<double> m = c.sum;
    const double inv = 1.0 / static_cast<double>(c.count);
    for (auto& x : m) x *= inv;
    return m;
  };

  // Phase 1: online assignment. Best similarity wins, ties go to the
  // lowest cluster id; a vector that exceeds no threshold seeds a new
  // cluster.
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    int best = -1;
    double best_sim = 0.0;
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      const double sim = cosine(centroid(clusters[c]), vectors[i]);
      if (best < 0 || sim > best_sim) {
        best = static_cast<int>(c);
        best_sim = sim;
      }
    }
    if (best >= 0 && similarity_exceeds(best_sim, config.assignment_threshold)) {
      Cluster& c = clusters[static_cast<std::size_t>(best)];
      c.uniform = c.uniform && same_bits(c.first, vectors[i]);
      for (std::size_t d = 0; d < vectors[i].size(); ++d) c.sum[d] += vectors[i][d];
      c.count += 1;
      assignment[i] = best;
    } else {
      Cluster c;
      c.sum = vectors[i];
      c.first = vectors[i];
      c.count = 1;
      clusters.push_back(std::move(c));
      assignment[i] = static_cast<int>(clusters.size()) - 1;
    }
  }

  // Phase 2: greedy merging, highest centroid similarity first, ties to
  // the lexicographically lowest id pair. Weighted means fall out of
  // keeping sums.
  for (;;) {
    int best_a = -1, best_b = -1;
    double best_sim = 0.0;
    for (std::size_t a = 0; a < clusters.size(); ++a) {
      if (!clusters[a].alive) continue;
      const std::vector<double> ca = centroid(clusters[a]);
      for (std::size_t b = a + 1; b < clusters.size(); ++b) {
        if (!clusters[b].alive) continue;
        const double sim = cosine(ca, centroid(clusters[b]));
        if (best_a < 0 || sim > best_sim) {
          best_a = static_cast<int>(a);
          best_b = static_cast<int>(b);
          best_sim = sim;
        }
      }
    }
    if (best_a < 0 || !similarity_exceeds(best_sim, config.merge_threshold)) break;
    Cluster& a = clusters[static_cast<std::size_t>(best_a)];
    Cluster& b = clusters[static_cast<std::size_t>(best_b)];
    a.uniform = a.uniform && b.uniform && same_bits(a.first, b.first);
    for (std::size_t d = 0; d < a.sum.size(); ++d) a.sum[d] += b.sum[d];
    a.count += b.count;
    b.alive = false;
    b.into = best_a;
  }

  // Compact surviving clusters; chase merge chains for assignments.
  std::vector<int> remap(clusters.size(), -1);
  ClusterResult result;
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    if (!clusters[c].alive) continue;
    remap[c] = static_cast<int>(result.centroids.size());
    result.centroids.push_back(centroid(clusters[c]));
    result.member_counts.push_back(clusters[c].count);
  }
  result.assignment.resize(vectors.size());
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    int c = assignment[i];
    while (!clusters[static_cast<std::size_t>(c)].alive) c = clusters[static_cast<std::size_t>(c)].into;
    result.assignment[i] = remap[static_cast<std::size_t>(c)];
  }
  return result;
}

SemanticFlowGraph build_clustered(const TaskRecord& record, const Embedder& embedder,
                                  const ClusterConfig& config, FeatureVariant variant) {
  SemanticFlowGraph graph;
  graph.task_id = record.task_id;
  FeatureBuilder features(embedder, variant);

  std::vector<std::vector<double>> vectors;
  std::vector<std::string> tags;
  std::vector<std::pair<int, int>> flat;  // (trajectory, step) per vector
  for (std::size_t t = 0; t < record.trajectories.size(); ++t) {
    for (std::size_t s = 0; s < record.trajectories[t].steps.size(); ++s) {
      const ReasoningStep& step = record.trajectories[t].steps[s];
      vectors.push_back(features.features_for(step));
      tags.push_back(step.tool);
      flat.emplace_back(static_cast<int>(t), static_cast<int>(s));
    }
  }

  const ClusterResult clusters = cluster_vectors(vectors, config);
  graph.nodes.resize(clusters.centroids.size());
  for (std::size_t c = 0; c < clusters.centroids.size(); ++c) {
    graph.nodes[c].id = static_cast<int>(c);
    graph.nodes[c].member_count = clusters.member_counts[c];
    graph.nodes[c].feature = clusters.centroids[c];
  }
  // Tag each node with the tool of its first member step.
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    SfgNode& node = graph.nodes[static_cast<std::size_t>(clusters.assignment[i])];
    if (node.tag.empty()) node.tag = tags[i];
  }

  std::size_t offset = 0;
  for (const auto& traj : record.trajectories) {
    for (std::size_t s = 0; s + 1 < traj.steps.size(); ++s) {
      const int a = clusters.assignment[offset + s];
      const int b = clusters.assignment[offset + s + 1];
      graph.edges[{a, b}] += 1;
    }
    offset += traj.steps.size();
  }
  return graph;
}

// ---- adjacency -------------------------------------------------------

GraphMatrices to_matrices(const SemanticFlowGraph& graph, bool binarize) {
  const std::size_t n = graph.nodes.size();
  if (n == 0) throw_data("graph for task '" + graph.task_id + "' has no nodes");
  GraphMatrices mats;
  mats.adjacency = Matrix(n, n);
  Matrix& a = mats.adjacency;
  for (const auto& [key, w] : graph.edges) {
    const double weight = binarize ? 1.0 : static_cast<double>(w);
    a(static_cast<std::size_t>(key.first), static_cast<std::size_t>(key.second)) += weight;
  }
  // A + A^T + I, then symmetric degree normalization.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double s = a(i, j) + a(j, i);
      a(i, j) = s;
      a(j, i) = s;
    }
    a(i, i) = 2.0 * a(i, i) + 1.0;
  }
  std::vector<double> inv_sqrt_degree(n);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 0.0;
    for (std::size_t j = 0; j < n; ++j) deg += a(i, j);
    inv_sqrt_degree[i] = 1.0 / std::sqrt(deg);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) *= inv_sqrt_degree[i] * inv_sqrt_degree[j];

  const std::size_t dim = graph.nodes.front().feature.size();
  mats.features = Matrix(n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    if (graph.nodes[i].feature.size() != dim)
      throw_data("graph for task '" + graph.task_id + "' has inconsistent feature sizes");
    std::copy(graph.nodes[i].feature.begin(), graph.nodes[i].feature.end(), mats.features.row(i));
  }
  return mats;
}

namespace {

std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

}  // namespace

std::string to_dot(const SemanticFlowGraph& graph) {
  std::ostringstream out;
  out << "digraph \"" << dot_escape(graph.task_id) << "\" {\n";
  out << "  rankdir=LR;\n  node [shape=box];\n";
  for (const auto& node : graph.nodes) {
    out << "  n" << node.id << " [label=\"" << dot_escape(node.tag) << " (x" << node.member_count << ")\"];\n";
  }
  for (const auto& [key, w] : graph.edges) {
    out << "  n" << key.first << " -> n" << key.second << " [label=\"" << w << "\"];\n";
  }
  out << "}\n";
  return out.str();
}

// ---- pipeline --------------------------------------------------------

const char* build_mode_name(BuildMode mode) {
  return mode == BuildMode::exact ? "exact" : "cluster";
}

const char* variant_name(FeatureVariant variant) {
  switch (variant) {
    case FeatureVariant::full: return "full";
    case FeatureVariant::no_semantics: return "no-semantics";
    case FeatureVariant::no_arguments: return "no-arguments";
    case FeatureVariant::no_functions: return "no-functions";
  }
  return "full";
}

FeatureVariant variant_from_name(const std::string& name) {
  if (name == "full") return FeatureVariant::full;
  if (name == "no-semantics") return FeatureVariant::no_semantics;
  if (name == "no-arguments") return FeatureVariant::no_arguments;
  if (name == "no-functions") return FeatureVariant::no_functions;
  throw_config("unknown feature variant '" + name + "'");
}

json pipeline_to_json(const PipelineConfig& config) {
  return json{{"mode", build_mode_name(config.mode)},
              {"assignment_threshold", config.cluster.assignment_threshold},
              {"merge_threshold", config.cluster.merge_threshold},
              {"truncation", json{{"mode", truncation_mode_name(config.truncation.mode)}, {"k", config.truncation.k}}},
              {"binarize", config.binarize},
              {"variant", variant_name(config.variant)},
              {"embedder", json{{"arg_dim", config.embedder.arg_dim},
                                {"ngram_min", config.embedder.ngram_min},
                                {"ngram_max", config.embedder.ngram_max},
                                {"hash_buckets", config.embedder.hash_buckets},
                                {"seed", config.embedder.seed},
                                {"external_vectors", config.embedder.external_vectors}}},
              {"vocab", config.vocab}};
}

PipelineConfig pipeline_from_json(const json& j, const std::string& where) {
  try {
    PipelineConfig config;
    const std::string mode = j.at("mode").get<std::string>();
    if (mode == "exact") {
      config.mode = BuildMode::exact;
    } else if (mode == "cluster") {
      config.mode = BuildMode::cluster;
    } else {
      throw_config(where + ": unknown build mode '" + mode + "'");
    }
    config.cluster.assignment_threshold = j.at("assignment_threshold").get<double>();
    config.cluster.merge_threshold = j.at("merge_threshold").get<double>();
    config.truncation.mode = truncation_mode_from_name(j.at("truncation").at("mode").get<std::string>());
    config.truncation.k = j.at("truncation").at("k").get<int>();
    config.binarize = j.at("binarize").get<bool>();
    config.variant = variant_from_name(j.at("variant").get<std::string>());
    const json& e = j.at("embedder");
    config.embedder.arg_dim = e.at("arg_dim").get<int>();
    config.embedder.ngram_min = e.at("ngram_min").get<int>();
    config.embedder.ngram_max = e.at("ngram_max").get<int>();
    config.embedder.hash_buckets = e.at("hash_buckets").get<std::uint64_t>();
    config.embedder.seed = e.at("seed").get<std::uint64_t>();
    config.embedder.external_vectors = e.at("external_vectors").get<std::string>();
    config.vocab = j.at("vocab").get<std::vector<std::string>>();
    return config;
  } catch (const json::exception& e) {
    throw_parse(where + ": bad pipeline config: " + e.what());
  }
}

std::string pipeline_fingerprint(const PipelineConfig& config) {
  const std::string canon = pipeline_to_json(config).dump();
  const std::uint64_t h = fnv1a64(canon);
  std::ostringstream hex;
  hex << std::hex;
  hex.width(16);
  hex.fill('0');
  hex << h;
  return hex.str();
}

Embedder make_embedder(const PipelineConfig& pipeline) {
  return Embedder(ToolVocabulary::from_names(pipeline.vocab), pipeline.embedder);
}

SemanticFlowGraph build_graph(const TaskRecord& record, const Embedder& embedder, const PipelineConfig& pipeline) {
  const TaskRecord truncated = apply_truncation(record, pipeline.truncation);
  if (pipeline.mode == BuildMode::exact) return build_exact(truncated, embedder, pipeline.variant);
  return build_clustered(truncated, embedder, pipeline.cluster, pipeline.variant);
}

GraphSet build_graphset(const std::vector<TaskRecord>& records, PipelineConfig pipeline, int jobs) {
  if (records.empty()) throw_data("no task records to build graphs from");
  if (pipeline.vocab.empty()) {
    // Vocabulary always reflects the full corpus, truncated or not, so
    // answer nodes keep their slot in truncated variants of the same
    // data.
    pipeline.vocab = ToolVocabulary::from_records(records).tools;
  }
  GraphSet set;
  set.pipeline = pipeline;
  const Embedder embedder = make_embedder(pipeline);
  set.items.resize(records.size());

  auto build_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      set.items[i].graph = build_graph(records[i], embedder, pipeline);
      set.items[i].basis = label_basis(records[i]);
    }
  };
  // jobs <= 0 means one worker per available core.
  const int workers = jobs > 0 ? jobs : std::max(1u, std::thread::hardware_concurrency());
  if (workers == 1 || records.size() < 2) {
    build_range(0, records.size());
  } else {
    std::vector<std::thread> threads;
    const std::size_t chunk = (records.size() + workers - 1) / static_cast<std::size_t>(workers);
    for (int w = 0; w < workers; ++w) {
      const std::size_t begin = static_cast<std::size_t>(w) * chunk;
      if (begin >= records.size()) break;
      threads.emplace_back(build_range, begin, std::min(records.size(), begin + chunk));
    }
    for (auto& t : threads) t.join();
  }
  return set;
}

// ---- graph set serialization -----------------------------------------

namespace {

constexpr const char* kGraphFormat = "flowcast-graphs";
constexpr int kGraphVersion = 1;

json basis_to_json(const LabelBasis& basis) {
  json votes = json::array();
  for (const auto& [answer, count] : basis.votes) votes.push_back(json::array({answer, count}));
  return json{{"agent_kind", agent_kind_name(basis.agent_kind)},
              {"votes", std::move(votes)},
              {"ground_truth", basis.ground_truth_answers},
              {"plausible_count", basis.plausible_count},
              {"completed_runs", basis.completed_runs}};
}

LabelBasis basis_from_json(const json& j, const std::string& where) {
  LabelBasis basis;
  basis.agent_kind = agent_kind_from_name(j.at("agent_kind").get<std::string>(), where);
  for (const auto& v : j.at("votes")) basis.votes.emplace_back(v.at(0).get<std::string>(), v.at(1).get<int>());
  basis.ground_truth_answers = j.at("ground_truth").get<std::vector<std::string>>();
  basis.plausible_count = j.at("plausible_count").get<int>();
  basis.completed_runs = j.at("completed_runs").get<int>();
  return basis;
}

}  // namespace

void save_graphset(const GraphSet& set, const std::string& path) {
  json graphs = json::array();
  for (const auto& item : set.items) {
    json nodes = json::array();
    for (const auto& node : item.graph.nodes) {
      nodes.push_back(json{{"id", node.id}, {"tag", node.tag}, {"count", node.member_count}, {"vec", node.feature}});
    }
    json edges = json::array();
    for (const auto& [key, w] : item.graph.edges) edges.push_back(json::array({key.first, key.second, w}));
    graphs.push_back(json{{"task_id", item.graph.task_id},
                          {"basis", basis_to_json(item.basis)},
                          {"nodes", std::move(nodes)},
                          {"edges", std::move(edges)}});
  }
  const json doc{{"format", kGraphFormat},
                 {"version", kGraphVersion},
                 {"pipeline", pipeline_to_json(set.pipeline)},
                 {"graphs", std::move(graphs)}};
  std::ofstream out(path);
  if (!out) throw_io("cannot write graph file '" + path + "'");
  out << doc.dump() << "\n";
  if (!out) throw_io("write failed for '" + path + "'");
}

GraphSet load_graphset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_io("cannot open graph file '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw_parse(path + ": invalid JSON: " + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != kGraphFormat)
      throw_parse(path + ": not a graph file");
    if (doc.at("version").get<int>() != kGraphVersion)
      throw_parse(path + ": unsupported graph file version");
    GraphSet set;
    set.pipeline = pipeline_from_json(doc.at("pipeline"), path);
    for (const auto& gj : doc.at("graphs")) {
      TaskGraph item;
      item.graph.task_id = gj.at("task_id").get<std::string>();
      item.basis = basis_from_json(gj.at("basis"), path);
      for (const auto& nj : gj.at("nodes")) {
        SfgNode node;
        node.id = nj.at("id").get<int>();
        node.tag = nj.at("tag").get<std::string>();
        node.member_count = nj.at("count").get<int>();
        node.feature = nj.at("vec").get<std::vector<double>>();
        item.graph.nodes.push_back(std::move(node));
      }
      for (const auto& ej : gj.at("edges")) {
        item.graph.edges[{ej.at(0).get<int>(), ej.at(1).get<int>()}] = ej.at(2).get<std::int64_t>();
      }
      set.items.push_back(std::move(item));
    }
    return set;
  } catch (const json::exception& e) {
    throw_parse(path + ": bad graph file: " + e.what());
  }
}

}  // namespace flowcast
