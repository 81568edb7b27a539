#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "flowcast/trajectory.hpp"

namespace flowcast {

// Sorted distinct tool names seen in a corpus, excluding the abnormal
// pseudo-tool. The feature block reserves one extra slot (index size())
// for abnormal or out-of-vocabulary tools.
struct ToolVocabulary {
  std::vector<std::string> tools;

  static ToolVocabulary from_records(const std::vector<TaskRecord>& records);
  static ToolVocabulary from_names(std::vector<std::string> names);

  // Index into the tool block; unknown names fall into the abnormal slot.
  int slot(const std::string& tool) const;
  int abnormal_slot() const { return static_cast<int>(tools.size()); }
  int block_size() const { return static_cast<int>(tools.size()) + 1; }

 private:
  std::unordered_map<std::string, int> index_;
};

struct EmbedderConfig {
  int arg_dim = 300;
  int ngram_min = 3;
  int ngram_max = 6;
  std::uint64_t hash_buckets = 1ULL << 20;
  std::uint64_t seed = 0x5eedf00dULL;
  // Optional word2vec-style text file; in-vocabulary tokens use these
  // vectors, everything else falls back to the hashed subword scheme.
  std::string external_vectors;
};

// Deterministic text embedder: lowercase, split on non-alphanumeric
// bytes, hash character n-grams of each "<token>" into buckets, map each
// bucket to a fixed pseudo-random vector, average n-grams into tokens and
// tokens into the text vector, then L2-normalize. Bit-stable across
// platforms and processes for a given config. Safe for concurrent use.
class Embedder {
 public:
  Embedder(ToolVocabulary vocab, EmbedderConfig config);

  const ToolVocabulary& vocab() const { return vocab_; }
  const EmbedderConfig& config() const { return config_; }

  int tool_dim() const { return vocab_.block_size(); }
  int arg_dim() const { return config_.arg_dim; }
  int dim() const { return tool_dim() + arg_dim(); }

  // Embedding of free text (argument strings joined by a space).
  // Empty/boundary-only text gives the zero vector.
  std::vector<double> embed_text(const std::string& text) const;

  // [tool one-hot with abnormal slot | argument text embedding]
  std::vector<double> embed_step(const ReasoningStep& step) const;

  static std::vector<std::string> tokenize(const std::string& text);
  static std::string join_args(const std::vector<std::string>& args);

 private:
  std::vector<double> bucket_vector(std::uint64_t bucket) const;
  std::vector<double> token_vector(const std::string& token) const;

  ToolVocabulary vocab_;
  EmbedderConfig config_;
  std::map<std::string, std::vector<double>> external_;

  mutable std::mutex cache_mu_;
  mutable std::unordered_map<std::uint64_t, std::vector<double>> bucket_cache_;
  mutable std::unordered_map<std::string, std::vector<double>> text_cache_;
};

// Cosine similarity. Bitwise-identical vectors compare as exactly 1.0
// (the clustering threshold semantics depend on this); a zero vector is
// similar to nothing except another zero vector.
double cosine(const std::vector<double>& a, const std::vector<double>& b);

void l2_normalize(std::vector<double>& v);

}  // namespace flowcast
