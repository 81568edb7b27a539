#include "flowcast/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace flowcast {

ToolVocabulary ToolVocabulary::from_records(const std::vector<TaskRecord>& records) {
  std::set<std::string> names;
  for (const auto& record : records) {
    for (const auto& traj : record.trajectories) {
      for (const auto& step : traj.steps) {
        if (step.tool != kAbnormalTool) names.insert(step.tool);
      }
    }
  }
  return from_names(std::vector<std::string>(names.begin(), names.end()));
}

ToolVocabulary ToolVocabulary::from_names(std::vector<std::string> names) {
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  names.erase(std::remove(names.begin(), names.end(), std::string(kAbnormalTool)), names.end());
  ToolVocabulary vocab;
  vocab.tools = std::move(names);
  for (std::size_t i = 0; i < vocab.tools.size(); ++i) vocab.index_[vocab.tools[i]] = static_cast<int>(i);
  return vocab;
}

int ToolVocabulary::slot(const std::string& tool) const {
  auto it = index_.find(tool);
  return it == index_.end() ? abnormal_slot() : it->second;
}

namespace {

bool is_word_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

char lower_byte(unsigned char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
}

}  // namespace

std::vector<std::string> Embedder::tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (is_word_byte(c)) {
      current.push_back(lower_byte(c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::string Embedder::join_args(const std::vector<std::string>& args) {
  std::string joined;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (i) joined.push_back(' ');
    joined += args[i];
  }
  return joined;
}

Embedder::Embedder(ToolVocabulary vocab, EmbedderConfig config)
    : vocab_(std::move(vocab)), config_(config) {
  if (config_.arg_dim < 1) throw_config("embedder arg_dim must be >= 1");
  if (config_.ngram_min < 1 || config_.ngram_max < config_.ngram_min)
    throw_config("embedder n-gram range must satisfy 1 <= min <= max");
  if (config_.hash_buckets < 1) throw_config("embedder hash_buckets must be >= 1");
  if (!config_.external_vectors.empty()) {
    std::ifstream in(config_.external_vectors);
    if (!in) throw_config("cannot open vector file '" + config_.external_vectors + "'");
    std::string line;
    bool first = true;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      std::istringstream fields(line);
      std::string token;
      fields >> token;
      std::vector<double> vec;
      double v;
      while (fields >> v) vec.push_back(v);
      const bool numeric_token = !token.empty() && token.find_first_not_of("0123456789") == std::string::npos;
      if (first && numeric_token && vec.size() == 1) {
        // word2vec text header: "<count> <dim>"
        first = false;
        if (static_cast<int>(vec[0]) != config_.arg_dim)
          throw_config("vector file '" + config_.external_vectors + "' declares dimension " +
                       std::to_string(static_cast<long long>(vec[0])) + ", expected " +
                       std::to_string(config_.arg_dim));
        continue;
      }
      first = false;
      if (static_cast<int>(vec.size()) != config_.arg_dim)
        throw_config("vector file '" + config_.external_vectors + "' line " + std::to_string(line_no) + " has " +
                     std::to_string(vec.size()) + " values, expected " + std::to_string(config_.arg_dim));
      external_[token] = std::move(vec);
    }
  }
}

std::vector<double> Embedder::bucket_vector(std::uint64_t bucket) const {
  {
    std::lock_guard<std::mutex> lock(cache_mu_);
    auto it = bucket_cache_.find(bucket);
    if (it != bucket_cache_.end()) return it->second;
  }
  // Entries uniform in [-sqrt(3), sqrt(3)) give unit variance. The stream
  // is keyed by (seed, bucket) only, so vectors never depend on lookup
  // order.
  const double limit = std::sqrt(3.0);
  Rng rng(derive_seed(config_.seed, bucket));
  std::vector<double> vec(static_cast<std::size_t>(config_.arg_dim));
  for (auto& x : vec) x = rng.uniform(-limit, limit);
  std::lock_guard<std::mutex> lock(cache_mu_);
  return bucket_cache_.emplace(bucket, std::move(vec)).first->second;
}

std::vector<double> Embedder::token_vector(const std::string& token) const {
  if (auto it = external_.find(token); it != external_.end()) return it->second;
  const std::string wrapped = "<" + token + ">";
  const int len = static_cast<int>(wrapped.size());
  std::vector<double> sum(static_cast<std::size_t>(config_.arg_dim), 0.0);
  int count = 0;
  for (int n = config_.ngram_min; n <= config_.ngram_max && n <= len; ++n) {
    for (int i = 0; i + n <= len; ++i) {
      const std::uint64_t h = fnv1a64(wrapped.data() + i, static_cast<std::size_t>(n), config_.seed);
      const std::vector<double> vec = bucket_vector(h % config_.hash_buckets);
      for (int d = 0; d < config_.arg_dim; ++d) sum[static_cast<std::size_t>(d)] += vec[static_cast<std::size_t>(d)];
      ++count;
    }
  }
  if (count == 0) return sum;  // token shorter than every n-gram size
  const double inv = 1.0 / static_cast<double>(count);
  for (auto& x : sum) x *= inv;
  return sum;
}

void l2_normalize(std::vector<double>& v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  if (sq == 0.0) return;
  const double inv = 1.0 / std::sqrt(sq);
  for (auto& x : v) x *= inv;
}

std::vector<double> Embedder::embed_text(const std::string& text) const {
  {
    std::lock_guard<std::mutex> lock(cache_mu_);
    auto it = text_cache_.find(text);
    if (it != text_cache_.end()) return it->second;
  }
  const std::vector<std::string> tokens = tokenize(text);
  std::vector<double> out(static_cast<std::size_t>(config_.arg_dim), 0.0);
  if (!tokens.empty()) {
    for (const auto& token : tokens) {
      const std::vector<double> tv = token_vector(token);
      for (int d = 0; d < config_.arg_dim; ++d) out[static_cast<std::size_t>(d)] += tv[static_cast<std::size_t>(d)];
    }
    const double inv = 1.0 / static_cast<double>(tokens.size());
    for (auto& x : out) x *= inv;
    l2_normalize(out);
  }
  std::lock_guard<std::mutex> lock(cache_mu_);
  return text_cache_.emplace(text, std::move(out)).first->second;
}

std::vector<double> Embedder::embed_step(const ReasoningStep& step) const {
  std::vector<double> out(static_cast<std::size_t>(dim()), 0.0);
  const int slot = step.abnormal ? vocab_.abnormal_slot() : vocab_.slot(step.tool);
  out[static_cast<std::size_t>(slot)] = 1.0;
  const std::vector<double> args = embed_text(join_args(step.args));
  std::copy(args.begin(), args.end(), out.begin() + tool_dim());
  return out;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw_param("cosine: dimension mismatch");
  if (a.empty()) throw_param("cosine: empty vectors");
  if (std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0) return 1.0;
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace flowcast
