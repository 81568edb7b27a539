#include "flowcast/gcn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <thread>

namespace flowcast {

using nlohmann::json;

// ---- parameters ------------------------------------------------------

namespace {

Matrix glorot_matrix(int rows, int cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
  for (auto& x : m.data()) x = rng.uniform(-limit, limit);
  return m;
}

}  // namespace

GcnParams GcnParams::glorot(int input_dim, int hidden_dim, std::uint64_t seed) {
  if (input_dim < 1 || hidden_dim < 1) throw_config("model dims must be >= 1");
  Rng rng(derive_seed(seed, 0x1417));
  GcnParams p;
  p.w1 = glorot_matrix(input_dim, hidden_dim, rng);
  p.w2 = glorot_matrix(hidden_dim, hidden_dim, rng);
  p.w3 = glorot_matrix(hidden_dim, hidden_dim, rng);
  p.b1.assign(static_cast<std::size_t>(hidden_dim), 0.0);
  p.b2.assign(static_cast<std::size_t>(hidden_dim), 0.0);
  p.b3.assign(static_cast<std::size_t>(hidden_dim), 0.0);
  const double limit = std::sqrt(6.0 / static_cast<double>(hidden_dim + 1));
  p.w_out.resize(static_cast<std::size_t>(hidden_dim));
  for (auto& x : p.w_out) x = rng.uniform(-limit, limit);
  p.b_out = 0.0;
  return p;
}

GcnParams GcnParams::zeros(int input_dim, int hidden_dim) {
  GcnParams p;
  p.w1 = Matrix(static_cast<std::size_t>(input_dim), static_cast<std::size_t>(hidden_dim));
  p.w2 = Matrix(static_cast<std::size_t>(hidden_dim), static_cast<std::size_t>(hidden_dim));
  p.w3 = Matrix(static_cast<std::size_t>(hidden_dim), static_cast<std::size_t>(hidden_dim));
  p.b1.assign(static_cast<std::size_t>(hidden_dim), 0.0);
  p.b2.assign(static_cast<std::size_t>(hidden_dim), 0.0);
  p.b3.assign(static_cast<std::size_t>(hidden_dim), 0.0);
  p.w_out.assign(static_cast<std::size_t>(hidden_dim), 0.0);
  p.b_out = 0.0;
  return p;
}

Gradients Gradients::zeros(int input_dim, int hidden_dim) {
  Gradients g;
  g.w1 = Matrix(static_cast<std::size_t>(input_dim), static_cast<std::size_t>(hidden_dim));
  g.w2 = Matrix(static_cast<std::size_t>(hidden_dim), static_cast<std::size_t>(hidden_dim));
  g.w3 = Matrix(static_cast<std::size_t>(hidden_dim), static_cast<std::size_t>(hidden_dim));
  g.b1.assign(static_cast<std::size_t>(hidden_dim), 0.0);
  g.b2.assign(static_cast<std::size_t>(hidden_dim), 0.0);
  g.b3.assign(static_cast<std::size_t>(hidden_dim), 0.0);
  g.w_out.assign(static_cast<std::size_t>(hidden_dim), 0.0);
  g.b_out = 0.0;
  return g;
}

TrainItem make_train_item(const TaskGraph& task_graph, const PipelineConfig& pipeline, LabelCriterion criterion) {
  TrainItem item;
  item.task_id = task_graph.graph.task_id;
  GraphMatrices mats = to_matrices(task_graph.graph, pipeline.binarize);
  item.x = std::move(mats.features);
  item.a_hat = std::move(mats.adjacency);
  item.p = matmul(item.a_hat, item.x);
  item.y = label_from_basis(task_graph.basis, criterion).y;
  return item;
}

DropoutMasks draw_masks(std::size_t nodes, int hidden_dim, double rate, Rng& rng) {
  DropoutMasks masks;
  if (rate <= 0.0) return masks;  // empty = keep everything
  if (rate >= 1.0) throw_config("dropout rate must be < 1");
  const double keep_scale = 1.0 / (1.0 - rate);
  masks.m1 = Matrix(nodes, static_cast<std::size_t>(hidden_dim));
  masks.m2 = Matrix(nodes, static_cast<std::size_t>(hidden_dim));
  for (auto& x : masks.m1.data()) x = rng.bernoulli(rate) ? 0.0 : keep_scale;
  for (auto& x : masks.m2.data()) x = rng.bernoulli(rate) ? 0.0 : keep_scale;
  return masks;
}

// ---- forward / backward ----------------------------------------------

namespace {

void add_bias_rows(Matrix& m, const std::vector<double>& b) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double* row = m.row(i);
    for (std::size_t j = 0; j < m.cols(); ++j) row[j] += b[j];
  }
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

double forward(const TrainItem& item, const GcnParams& params, const DropoutMasks* masks, ForwardCache* cache) {
  if (static_cast<int>(item.x.cols()) != params.input_dim())
    throw_config("feature dimension " + std::to_string(item.x.cols()) + " does not match model input " +
                 std::to_string(params.input_dim()));
  const bool dropout = masks != nullptr && masks->m1.rows() == item.x.rows();
  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;

  // Layer 1: Z1 = (A X) W1 + b1, with P = A X cached on the item.
  c.z1 = matmul(item.p, params.w1);
  add_bias_rows(c.z1, params.b1);
  c.h1 = c.z1;
  for (auto& x : c.h1.data()) x = x > 0.0 ? x : 0.0;
  if (dropout) {
    auto& h = c.h1.data();
    const auto& m = masks->m1.data();
    for (std::size_t i = 0; i < h.size(); ++i) h[i] *= m[i];
  }

  // Layer 2: Z2 = A (H1 W2) + b2, via U2 = A H1.
  c.u2 = matmul(item.a_hat, c.h1);
  c.z2 = matmul(c.u2, params.w2);
  add_bias_rows(c.z2, params.b2);
  c.h2 = c.z2;
  for (auto& x : c.h2.data()) x = x > 0.0 ? x : 0.0;
  if (dropout) {
    auto& h = c.h2.data();
    const auto& m = masks->m2.data();
    for (std::size_t i = 0; i < h.size(); ++i) h[i] *= m[i];
  }

  // Layer 3: Z3 = A (H2 W3) + b3, linear.
  c.u3 = matmul(item.a_hat, c.h2);
  c.z3 = matmul(c.u3, params.w3);
  add_bias_rows(c.z3, params.b3);

  // Mean pooling over nodes, then the scalar head.
  const std::size_t n = c.z3.rows();
  const std::size_t h = c.z3.cols();
  c.pooled.assign(h, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = c.z3.row(i);
    for (std::size_t j = 0; j < h; ++j) c.pooled[j] += row[j];
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  for (auto& x : c.pooled) x *= inv_n;

  double logit = params.b_out;
  for (std::size_t j = 0; j < h; ++j) logit += params.w_out[j] * c.pooled[j];
  c.logit = logit;
  c.p = sigmoid(logit);
  return c.p;
}

double bce_loss(double p, int y, double positive_weight) {
  const double q = std::min(1.0 - 1e-12, std::max(1e-12, p));
  return y == 1 ? -positive_weight * std::log(q) : -std::log(1.0 - q);
}

void backward(const TrainItem& item, const GcnParams& params, const DropoutMasks* masks, const ForwardCache& cache,
              int y, double scale, Gradients& grads, double positive_weight) {
  const bool dropout = masks != nullptr && masks->m1.rows() == item.x.rows();
  const std::size_t n = cache.z3.rows();
  const std::size_t h = cache.z3.cols();

  // d loss / d logit for sigmoid + weighted BCE:
  // y=1 contributes w*(p-1), y=0 contributes p.
  const double dz =
      (y == 1 ? positive_weight * (cache.p - 1.0) : cache.p) * scale;

  grads.b_out += dz;
  for (std::size_t j = 0; j < h; ++j) grads.w_out[j] += dz * cache.pooled[j];

  // Pooling spreads the head gradient evenly over rows of Z3.
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> dpool(h);
  for (std::size_t j = 0; j < h; ++j) dpool[j] = dz * params.w_out[j] * inv_n;

  Matrix dz3(n, h);
  for (std::size_t i = 0; i < n; ++i) {
    double* row = dz3.row(i);
    for (std::size_t j = 0; j < h; ++j) row[j] = dpool[j];
  }

  // Layer 3: Z3 = U3 W3 + b3 with U3 = A H2.
  {
    Matrix dw3 = matmul_at_b(cache.u3, dz3);
    for (std::size_t i = 0; i < dw3.data().size(); ++i) grads.w3.data()[i] += dw3.data()[i];
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = dz3.row(i);
      for (std::size_t j = 0; j < h; ++j) grads.b3[j] += row[j];
    }
  }
  Matrix du3 = matmul_a_bt(dz3, params.w3);
  Matrix dh2 = matmul(item.a_hat, du3);  // A is symmetric

  // Undo dropout and ReLU of layer 2 (subgradient 0 at 0).
  if (dropout) {
    auto& d = dh2.data();
    const auto& m = masks->m2.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] *= m[i];
  }
  {
    auto& d = dh2.data();
    const auto& z = cache.z2.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = z[i] > 0.0 ? d[i] : 0.0;
  }
  Matrix& dz2 = dh2;

  // Layer 2: Z2 = U2 W2 + b2 with U2 = A H1.
  {
    Matrix dw2 = matmul_at_b(cache.u2, dz2);
    for (std::size_t i = 0; i < dw2.data().size(); ++i) grads.w2.data()[i] += dw2.data()[i];
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = dz2.row(i);
      for (std::size_t j = 0; j < h; ++j) grads.b2[j] += row[j];
    }
  }
  Matrix du2 = matmul_a_bt(dz2, params.w2);
  Matrix dh1 = matmul(item.a_hat, du2);

  if (dropout) {
    auto& d = dh1.data();
    const auto& m = masks->m1.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] *= m[i];
  }
  {
    auto& d = dh1.data();
    const auto& z = cache.z1.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = z[i] > 0.0 ? d[i] : 0.0;
  }
  Matrix& dz1 = dh1;

  // Layer 1: Z1 = P W1 + b1 with P = A X precomputed.
  {
    Matrix dw1 = matmul_at_b(item.p, dz1);
    for (std::size_t i = 0; i < dw1.data().size(); ++i) grads.w1.data()[i] += dw1.data()[i];
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = dz1.row(i);
      for (std::size_t j = 0; j < h; ++j) grads.b1[j] += row[j];
    }
  }
}

double sample_loss(const TrainItem& item, const GcnParams& params, int y, double positive_weight) {
  return bce_loss(forward(item, params, nullptr, nullptr), y, positive_weight);
}

// ---- Adam -------------------------------------------------------------

namespace {

struct AdamState {
  Gradients m, v;
  std::int64_t t = 0;

  explicit AdamState(const GcnParams& p)
      : m(Gradients::zeros(p.input_dim(), p.hidden_dim())), v(Gradients::zeros(p.input_dim(), p.hidden_dim())) {}
};

void adam_update_span(double* param, double* m, double* v, const double* g, std::size_t count,
                      const TrainConfig& cfg, double bias1, double bias2) {
  for (std::size_t i = 0; i < count; ++i) {
    m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * g[i];
    v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * g[i] * g[i];
    const double mhat = m[i] / bias1;
    const double vhat = v[i] / bias2;
    param[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
  }
}

void adam_step(GcnParams& params, AdamState& state, const Gradients& grads, const TrainConfig& cfg) {
  state.t += 1;
  const double bias1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.t));
  const double bias2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.t));
  adam_update_span(params.w1.data().data(), state.m.w1.data().data(), state.v.w1.data().data(),
                   grads.w1.data().data(), grads.w1.data().size(), cfg, bias1, bias2);
  adam_update_span(params.w2.data().data(), state.m.w2.data().data(), state.v.w2.data().data(),
                   grads.w2.data().data(), grads.w2.data().size(), cfg, bias1, bias2);
  adam_update_span(params.w3.data().data(), state.m.w3.data().data(), state.v.w3.data().data(),
                   grads.w3.data().data(), grads.w3.data().size(), cfg, bias1, bias2);
  adam_update_span(params.b1.data(), state.m.b1.data(), state.v.b1.data(), grads.b1.data(), grads.b1.size(), cfg,
                   bias1, bias2);
  adam_update_span(params.b2.data(), state.m.b2.data(), state.v.b2.data(), grads.b2.data(), grads.b2.size(), cfg,
                   bias1, bias2);
  adam_update_span(params.b3.data(), state.m.b3.data(), state.v.b3.data(), grads.b3.data(), grads.b3.size(), cfg,
                   bias1, bias2);
  adam_update_span(params.w_out.data(), state.m.w_out.data(), state.v.w_out.data(), grads.w_out.data(),
                   grads.w_out.size(), cfg, bias1, bias2);
  adam_update_span(&params.b_out, &state.m.b_out, &state.v.b_out, &grads.b_out, 1, cfg, bias1, bias2);
}

std::vector<ScoredExample> score_items(const std::vector<const TrainItem*>& items, const GcnParams& params) {
  std::vector<ScoredExample> scores;
  scores.reserve(items.size());
  for (const TrainItem* item : items) {
    ScoredExample e;
    e.task_id = item->task_id;
    e.score = forward(*item, params, nullptr, nullptr);
    e.y = item->y;
    scores.push_back(std::move(e));
  }
  return scores;
}

// Selection order: defined val AUROC beats undefined, higher AUROC beats
// lower, then lower val loss, then the earlier epoch (strict improvement
// required to replace).
bool better_checkpoint(std::optional<double> auroc_a, double loss_a, std::optional<double> auroc_b, double loss_b) {
  if (auroc_a.has_value() != auroc_b.has_value()) return auroc_a.has_value();
  if (auroc_a && *auroc_a != *auroc_b) return *auroc_a > *auroc_b;
  return loss_a < loss_b;
}

}  // namespace

// ---- training ---------------------------------------------------------

TrainOutcome train_model(const GraphSet& graphs, const TrainConfig& config, LabelCriterion criterion) {
  if (config.folds < 2) throw_config("cross-validation needs at least 2 folds");
  if (config.epochs < 1) throw_config("training needs at least 1 epoch");
  if (config.batch_size < 1) throw_config("batch size must be >= 1");
  if (config.dropout_rate < 0.0 || config.dropout_rate >= 1.0) throw_config("dropout rate must be in [0, 1)");
  if (!(config.positive_weight > 0.0)) throw_config("positive class weight must be > 0");
  const std::size_t n_tasks = graphs.items.size();
  if (n_tasks < static_cast<std::size_t>(config.folds) * 2)
    throw_config("need at least " + std::to_string(config.folds * 2) + " tasks for " + std::to_string(config.folds) +
                 "-fold cross-validation, got " + std::to_string(n_tasks));

  std::vector<TrainItem> items;
  items.reserve(n_tasks);
  for (const auto& task_graph : graphs.items) items.push_back(make_train_item(task_graph, graphs.pipeline, criterion));

  // Deterministic fold assignment: shuffle once, deal round-robin.
  std::vector<std::size_t> order(n_tasks);
  for (std::size_t i = 0; i < n_tasks; ++i) order[i] = i;
  Rng fold_rng(derive_seed(config.seed, 0xf01d));
  fold_rng.shuffle(order);
  std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(config.folds));
  for (std::size_t i = 0; i < n_tasks; ++i) folds[i % static_cast<std::size_t>(config.folds)].push_back(order[i]);

  const int input_dim = static_cast<int>(items.front().x.cols());
  const std::string fingerprint = pipeline_fingerprint(graphs.pipeline);

  TrainOutcome outcome;
  for (int fold = 0; fold < config.folds; ++fold) {
    const std::vector<std::size_t>& held_out = folds[static_cast<std::size_t>(fold)];
    // First half validates (checkpoint selection), second half tests.
    const std::size_t val_n = (held_out.size() + 1) / 2;
    std::vector<const TrainItem*> val, test, train;
    for (std::size_t i = 0; i < held_out.size(); ++i)
      (i < val_n ? val : test).push_back(&items[held_out[i]]);
    for (int other = 0; other < config.folds; ++other) {
      if (other == fold) continue;
      for (std::size_t idx : folds[static_cast<std::size_t>(other)]) train.push_back(&items[idx]);
    }
    if (val.empty() || test.empty() || train.empty())
      throw_config("fold " + std::to_string(fold) + " has an empty split; more tasks required");

    GcnParams params = GcnParams::glorot(input_dim, config.hidden_dim, derive_seed(config.seed, 0xa110 + fold));
    AdamState adam(params);
    Rng train_rng(derive_seed(config.seed, 0xb000 + fold));

    Checkpoint best;
    bool have_best = false;

    std::vector<std::size_t> perm(train.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
      train_rng.shuffle(perm);
      std::size_t start = 0;
      while (start < perm.size()) {
        const std::size_t stop = std::min(perm.size(), start + static_cast<std::size_t>(config.batch_size));
        Gradients grads = Gradients::zeros(input_dim, config.hidden_dim);
        const double scale = 1.0 / static_cast<double>(stop - start);
        for (std::size_t b = start; b < stop; ++b) {
          const TrainItem& item = *train[perm[b]];
          DropoutMasks masks = draw_masks(item.x.rows(), config.hidden_dim, config.dropout_rate, train_rng);
          ForwardCache cache;
          forward(item, params, &masks, &cache);
          backward(item, params, &masks, cache, item.y, scale, grads, config.positive_weight);
        }
        adam_step(params, adam, grads, config);
        start = stop;
      }

      const std::vector<ScoredExample> val_scores = score_items(val, params);
      const std::optional<double> val_auroc = auroc_if_defined(val_scores);
      const double val_loss = mean_bce_loss(val_scores);
      if (!have_best || better_checkpoint(val_auroc, val_loss, best.val_auroc, best.val_loss)) {
        have_best = true;
        best.params = params;
        best.fold = fold;
        best.epoch = epoch;
        best.val_auroc = val_auroc;
        best.val_loss = val_loss;
      }
    }

    best.train = config;
    best.pipeline = graphs.pipeline;
    best.fingerprint = fingerprint;

    FoldResult result;
    result.fold = fold;
    result.val_scores = score_items(val, best.params);
    result.test_scores = score_items(test, best.params);
    result.checkpoint = std::move(best);
    outcome.folds.push_back(std::move(result));
  }

  // Best fold by the same ordering the per-epoch selection uses.
  int best_fold = 0;
  for (int f = 1; f < config.folds; ++f) {
    const Checkpoint& candidate = outcome.folds[static_cast<std::size_t>(f)].checkpoint;
    const Checkpoint& incumbent = outcome.folds[static_cast<std::size_t>(best_fold)].checkpoint;
    if (better_checkpoint(candidate.val_auroc, candidate.val_loss, incumbent.val_auroc, incumbent.val_loss))
      best_fold = f;
  }
  outcome.best_fold = best_fold;

  for (const auto& fold : outcome.folds)
    outcome.aggregated_test.insert(outcome.aggregated_test.end(), fold.test_scores.begin(), fold.test_scores.end());
  outcome.aggregated_report = evaluate_scores(outcome.aggregated_test, 0.5);
  return outcome;
}

double predict(const Checkpoint& checkpoint, const TrainItem& item) {
  return forward(item, checkpoint.params, nullptr, nullptr);
}

std::vector<ScoredExample> score_graphset(const GraphSet& graphs, const Checkpoint& checkpoint,
                                          LabelCriterion criterion) {
  std::vector<ScoredExample> scores;
  scores.reserve(graphs.items.size());
  for (const auto& task_graph : graphs.items) {
    TrainItem item = make_train_item(task_graph, graphs.pipeline, criterion);
    ScoredExample e;
    e.task_id = item.task_id;
    e.score = predict(checkpoint, item);
    e.y = item.y;
    scores.push_back(std::move(e));
  }
  return scores;
}

std::vector<ScoredExample> score_records(const std::vector<TaskRecord>& records, const Checkpoint& checkpoint,
                                         LabelCriterion criterion, int jobs) {
  const Embedder embedder = make_embedder(checkpoint.pipeline);
  std::vector<ScoredExample> scores(records.size());
  auto score_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      TaskGraph task_graph;
      task_graph.graph = build_graph(records[i], embedder, checkpoint.pipeline);
      task_graph.basis = label_basis(records[i]);
      TrainItem item = make_train_item(task_graph, checkpoint.pipeline, criterion);
      scores[i].task_id = item.task_id;
      scores[i].score = predict(checkpoint, item);
      scores[i].y = item.y;
    }
  };
  const int workers = std::max(1, jobs);
  if (workers == 1 || records.size() < 2) {
    score_range(0, records.size());
  } else {
    std::vector<std::thread> threads;
    const std::size_t chunk = (records.size() + workers - 1) / static_cast<std::size_t>(workers);
    for (int w = 0; w < workers; ++w) {
      const std::size_t begin = static_cast<std::size_t>(w) * chunk;
      if (begin >= records.size()) break;
      threads.emplace_back(score_range, begin, std::min(records.size(), begin + chunk));
    }
    for (auto& t : threads) t.join();
  }
  return scores;
}

// ---- serialization ----------------------------------------------------

namespace {

constexpr const char* kModelFormat = "flowcast-model";
constexpr int kModelVersion = 1;

json matrix_to_json(const Matrix& m) {
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}};
}

Matrix matrix_from_json(const json& j) {
  Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  m.data() = j.at("data").get<std::vector<double>>();
  if (m.data().size() != m.rows() * m.cols()) throw_parse("matrix payload size mismatch");
  return m;
}

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  json doc{{"format", kModelFormat},
           {"version", kModelVersion},
           {"pipeline", pipeline_to_json(checkpoint.pipeline)},
           {"fingerprint", checkpoint.fingerprint},
           {"train", json{{"learning_rate", checkpoint.train.learning_rate},
                          {"batch_size", checkpoint.train.batch_size},
                          {"hidden_dim", checkpoint.train.hidden_dim},
                          {"dropout_rate", checkpoint.train.dropout_rate},
                          {"epochs", checkpoint.train.epochs},
                          {"folds", checkpoint.train.folds},
                          {"seed", checkpoint.train.seed},
                          {"positive_weight", checkpoint.train.positive_weight}}},
           {"selected", json{{"fold", checkpoint.fold},
                             {"epoch", checkpoint.epoch},
                             {"val_auroc", checkpoint.val_auroc ? json(*checkpoint.val_auroc) : json(nullptr)},
                             {"val_loss", checkpoint.val_loss}}},
           {"params", json{{"w1", matrix_to_json(checkpoint.params.w1)},
                           {"w2", matrix_to_json(checkpoint.params.w2)},
                           {"w3", matrix_to_json(checkpoint.params.w3)},
                           {"b1", checkpoint.params.b1},
                           {"b2", checkpoint.params.b2},
                           {"b3", checkpoint.params.b3},
                           {"w_out", checkpoint.params.w_out},
                           {"b_out", checkpoint.params.b_out}}}};
  std::ofstream out(path);
  if (!out) throw_io("cannot write model file '" + path + "'");
  out << doc.dump() << "\n";
  if (!out) throw_io("write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_io("cannot open model file '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw_parse(path + ": invalid JSON: " + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != kModelFormat) throw_parse(path + ": not a model file");
    if (doc.at("version").get<int>() != kModelVersion) throw_parse(path + ": unsupported model file version");
    Checkpoint checkpoint;
    checkpoint.pipeline = pipeline_from_json(doc.at("pipeline"), path);
    checkpoint.fingerprint = doc.at("fingerprint").get<std::string>();
    const json& t = doc.at("train");
    checkpoint.train.learning_rate = t.at("learning_rate").get<double>();
    checkpoint.train.batch_size = t.at("batch_size").get<int>();
    checkpoint.train.hidden_dim = t.at("hidden_dim").get<int>();
    checkpoint.train.dropout_rate = t.at("dropout_rate").get<double>();
    checkpoint.train.epochs = t.at("epochs").get<int>();
    checkpoint.train.folds = t.at("folds").get<int>();
    checkpoint.train.seed = t.at("seed").get<std::uint64_t>();
    checkpoint.train.positive_weight = t.at("positive_weight").get<double>();
    const json& s = doc.at("selected");
    checkpoint.fold = s.at("fold").get<int>();
    checkpoint.epoch = s.at("epoch").get<int>();
    if (!s.at("val_auroc").is_null()) checkpoint.val_auroc = s.at("val_auroc").get<double>();
    checkpoint.val_loss = s.at("val_loss").get<double>();
    const json& p = doc.at("params");
    checkpoint.params.w1 = matrix_from_json(p.at("w1"));
    checkpoint.params.w2 = matrix_from_json(p.at("w2"));
    checkpoint.params.w3 = matrix_from_json(p.at("w3"));
    checkpoint.params.b1 = p.at("b1").get<std::vector<double>>();
    checkpoint.params.b2 = p.at("b2").get<std::vector<double>>();
    checkpoint.params.b3 = p.at("b3").get<std::vector<double>>();
    checkpoint.params.w_out = p.at("w_out").get<std::vector<double>>();
    checkpoint.params.b_out = p.at("b_out").get<double>();
    return checkpoint;
  } catch (const json::exception& e) {
    throw_parse(path + ": bad model file: " + e.what());
  }
}

json cv_report_json(const TrainOutcome& outcome, LabelCriterion criterion) {
  json folds = json::array();
  for (const auto& fold : outcome.folds) {
    folds.push_back(json{{"fold", fold.fold},
                         {"epoch", fold.checkpoint.epoch},
                         {"val_auroc", fold.checkpoint.val_auroc ? json(*fold.checkpoint.val_auroc) : json(nullptr)},
                         {"val_loss", fold.checkpoint.val_loss},
                         {"val_n", fold.val_scores.size()},
                         {"test_n", fold.test_scores.size()}});
  }
  return json{{"criterion_n", criterion.n},
              {"best_fold", outcome.best_fold},
              {"folds", std::move(folds)},
              {"aggregated_test", eval_report_to_json(outcome.aggregated_report)}};
}

}  // namespace flowcast
