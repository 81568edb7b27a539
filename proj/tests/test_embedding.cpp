#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "flowcast/embedding.hpp"

using namespace flowcast;

namespace {

EmbedderConfig small_config(int dim = 16) {
  EmbedderConfig cfg;
  cfg.arg_dim = dim;
  return cfg;
}

Embedder make(int dim = 16) {
  return Embedder(ToolVocabulary::from_names({"alpha", "beta", "gamma", "delta"}), small_config(dim));
}

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

ReasoningStep step(std::string tool, std::vector<std::string> args = {}) {
  ReasoningStep s;
  s.tool = std::move(tool);
  s.args = std::move(args);
  return s;
}

}  // namespace

TEST_CASE("vocabulary sorts, dedupes and reserves the abnormal slot") {
  const ToolVocabulary vocab = ToolVocabulary::from_names({"b", "a", "b", kAbnormalTool});
  REQUIRE(vocab.tools == std::vector<std::string>{"a", "b"});
  CHECK(vocab.slot("a") == 0);
  CHECK(vocab.slot("b") == 1);
  CHECK(vocab.slot("unheard-of") == 2);
  CHECK(vocab.abnormal_slot() == 2);
  CHECK(vocab.block_size() == 3);
}

TEST_CASE("tokenizer lowercases and splits on non-alphanumeric bytes") {
  CHECK(Embedder::tokenize("NumberUtils.isNumber") == std::vector<std::string>{"numberutils", "isnumber"});
  CHECK(Embedder::tokenize("run_tests") == std::vector<std::string>{"run", "tests"});
  CHECK(Embedder::tokenize("  --  ") == std::vector<std::string>{});
  CHECK(Embedder::tokenize("a1b2") == std::vector<std::string>{"a1b2"});
  CHECK(Embedder::join_args({"x", "y z"}) == "x y z");
}

TEST_CASE("step embedding is one-hot tool block plus argument block") {
  const Embedder embedder = make();
  const std::vector<double> v = embedder.embed_step(step("alpha", {"payload"}));
  REQUIRE(static_cast<int>(v.size()) == embedder.dim());
  CHECK(v[0] == 1.0);
  for (int i = 1; i < embedder.tool_dim(); ++i) CHECK(v[static_cast<std::size_t>(i)] == 0.0);
  // Argument block is the normalized text embedding.
  double arg_norm = 0.0;
  for (int i = embedder.tool_dim(); i < embedder.dim(); ++i) arg_norm += v[static_cast<std::size_t>(i)] * v[static_cast<std::size_t>(i)];
  CHECK(std::sqrt(arg_norm) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("unknown and abnormal tools use the reserved slot") {
  const Embedder embedder = make();
  const std::vector<double> unknown = embedder.embed_step(step("summon_demon"));
  CHECK(unknown[static_cast<std::size_t>(embedder.vocab().abnormal_slot())] == 1.0);
  ReasoningStep bad = step(kAbnormalTool, {});
  bad.abnormal = true;
  const std::vector<double> abnormal = embedder.embed_step(bad);
  CHECK(abnormal[static_cast<std::size_t>(embedder.vocab().abnormal_slot())] == 1.0);
  // Tool block always has exactly one nonzero entry.
  int nonzero = 0;
  for (int i = 0; i < embedder.tool_dim(); ++i)
    if (abnormal[static_cast<std::size_t>(i)] != 0.0) ++nonzero;
  CHECK(nonzero == 1);
  // Empty args embed to the zero vector.
  for (int i = embedder.tool_dim(); i < embedder.dim(); ++i) CHECK(abnormal[static_cast<std::size_t>(i)] == 0.0);
}

TEST_CASE("text embedding is deterministic across embedder instances") {
  const Embedder a = make();
  const Embedder b = make();
  const std::vector<double> va = a.embed_text("fetch the NumberUtils source");
  const std::vector<double> vb = b.embed_text("fetch the NumberUtils source");
  CHECK(va == vb);  // bitwise
  CHECK(norm(va) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("different seeds give different vectors") {
  EmbedderConfig other = small_config();
  other.seed ^= 0x1234;
  const Embedder a = make();
  const Embedder b(ToolVocabulary::from_names({"alpha"}), other);
  CHECK(a.embed_text("payload") != b.embed_text("payload"));
}

TEST_CASE("empty or boundary-only text embeds to zero") {
  const Embedder embedder = make();
  CHECK(norm(embedder.embed_text("")) == 0.0);
  CHECK(norm(embedder.embed_text(" ,, ")) == 0.0);
}

TEST_CASE("shared subwords dominate similarity") {
  const Embedder embedder = make(64);
  const std::vector<double> base = embedder.embed_text("NumberUtils");
  const double related = cosine(base, embedder.embed_text("NumberUtils.isNumber"));
  const double unrelated = cosine(base, embedder.embed_text("run_tests"));
  CHECK(related > unrelated);
}

TEST_CASE("suffix extensions stay closer than random identifiers") {
  // Property holds at the default argument dimension; narrow vectors drown
  // the shared-token signal in hash noise.
  const Embedder embedder(ToolVocabulary::from_names({"alpha"}), EmbedderConfig{});
  Rng rng(99);
  const char* pool = "abcdefghijklmnopqrstuvwxyz";
  auto random_word = [&](int len) {
    std::string w;
    for (int i = 0; i < len; ++i) w.push_back(pool[rng.next_below(26)]);
    return w;
  };
  int hits = 0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    const std::string s = random_word(8 + static_cast<int>(rng.next_below(5)));
    const std::string extended = s + ".x";
    const std::string other = random_word(8 + static_cast<int>(rng.next_below(5)));
    const std::vector<double> vs = embedder.embed_text(s);
    if (cosine(vs, embedder.embed_text(extended)) > cosine(vs, embedder.embed_text(other))) ++hits;
  }
  CHECK(hits >= trials * 95 / 100);
}

TEST_CASE("cosine conventions") {
  const std::vector<double> v{1.0, 2.0, -3.0};
  const std::vector<double> neg{-1.0, -2.0, 3.0};
  const std::vector<double> zero{0.0, 0.0, 0.0};
  CHECK(cosine(v, v) == 1.0);  // exact, not approximate
  CHECK(cosine(v, neg) == doctest::Approx(-1.0));
  CHECK(cosine(v, zero) == 0.0);
  CHECK(cosine(zero, zero) == 1.0);  // bitwise-equal fast path
}

TEST_CASE("external vector file overrides in-vocabulary tokens") {
  const std::string path = "test_embedding_vectors.txt";
  {
    std::ofstream out(path);
    out << "2 4\n";
    out << "anchor 1 0 0 0\n";
    out << "offset 0 2 0 0\n";
  }
  EmbedderConfig cfg = small_config(4);
  cfg.external_vectors = path;
  const Embedder embedder(ToolVocabulary::from_names({"alpha"}), cfg);
  // Single in-vocabulary token: its file vector, normalized.
  CHECK(embedder.embed_text("anchor") == std::vector<double>{1.0, 0.0, 0.0, 0.0});
  CHECK(embedder.embed_text("offset") == std::vector<double>{0.0, 1.0, 0.0, 0.0});
  // Mean of the two file vectors is (0.5, 1, 0, 0); normalized.
  const std::vector<double> both = embedder.embed_text("anchor offset");
  const double len = std::sqrt(0.25 + 1.0);
  CHECK(both[0] == doctest::Approx(0.5 / len).epsilon(1e-12));
  CHECK(both[1] == doctest::Approx(1.0 / len).epsilon(1e-12));
  // Out-of-vocabulary tokens still hash.
  CHECK(norm(embedder.embed_text("elsewhere")) == doctest::Approx(1.0).epsilon(1e-9));
  std::remove(path.c_str());
}

TEST_CASE("external vector file errors") {
  EmbedderConfig missing = small_config(4);
  missing.external_vectors = "does_not_exist.txt";
  CHECK_THROWS_AS(Embedder(ToolVocabulary::from_names({"a"}), missing), error);

  const std::string path = "test_embedding_baddim.txt";
  {
    std::ofstream out(path);
    out << "1 3\n";
    out << "tok 1 0 0\n";
  }
  EmbedderConfig bad = small_config(4);
  bad.external_vectors = path;
  try {
    Embedder embedder(ToolVocabulary::from_names({"a"}), bad);
    FAIL("expected a config error");
  } catch (const error& e) {
    CHECK(e.code() == errc::config);
  }
  std::remove(path.c_str());
}

TEST_CASE("config validation") {
  EmbedderConfig cfg = small_config();
  cfg.arg_dim = 0;
  CHECK_THROWS_AS(Embedder(ToolVocabulary::from_names({"a"}), cfg), error);
  cfg = small_config();
  cfg.ngram_min = 4;
  cfg.ngram_max = 3;
  CHECK_THROWS_AS(Embedder(ToolVocabulary::from_names({"a"}), cfg), error);
}
