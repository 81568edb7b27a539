#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowcast/graph.hpp"
#include "flowcast/matrix.hpp"
#include "flowcast/metrics.hpp"

namespace flowcast {

// Three graph-convolution layers (ReLU + dropout after the first two),
// mean pooling over nodes, then a scalar sigmoid head. All gradients are
// hand-derived; see backward() in the implementation.
struct GcnParams {
  Matrix w1, w2, w3;            // input x hidden, hidden x hidden, hidden x hidden
  std::vector<double> b1, b2, b3;
  std::vector<double> w_out;    // hidden
  double b_out = 0.0;

  int input_dim() const { return static_cast<int>(w1.rows()); }
  int hidden_dim() const { return static_cast<int>(w1.cols()); }

  static GcnParams glorot(int input_dim, int hidden_dim, std::uint64_t seed);
  static GcnParams zeros(int input_dim, int hidden_dim);
};

struct Gradients {
  Matrix w1, w2, w3;
  std::vector<double> b1, b2, b3;
  std::vector<double> w_out;
  double b_out = 0.0;

  static Gradients zeros(int input_dim, int hidden_dim);
};

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 32;
  int hidden_dim = 32;
  double dropout_rate = 0.8;  // probability of zeroing an activation
  int epochs = 200;
  int folds = 5;
  std::uint64_t seed = 7;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double positive_weight = 1.0;  // loss weight on the failure class
};

// One graph ready for the model: features, normalized adjacency, the
// cached propagation P = A_hat * X, and the label.
struct TrainItem {
  std::string task_id;
  Matrix x;
  Matrix a_hat;
  Matrix p;
  int y = 0;
};

TrainItem make_train_item(const TaskGraph& task_graph, const PipelineConfig& pipeline, LabelCriterion criterion);

// Per-sample dropout masks (entries are 0 or 1/(1-rate)); empty mask
// means evaluation mode.
struct DropoutMasks {
  Matrix m1, m2;
};

DropoutMasks draw_masks(std::size_t nodes, int hidden_dim, double rate, Rng& rng);

// Forward pass; returns p = sigmoid(logit). With `masks` null the pass
// runs in evaluation mode. `cache` (optional) receives intermediates for
// backward().
struct ForwardCache {
  Matrix z1, h1, u2, z2, h2, u3, z3;
  std::vector<double> pooled;
  double logit = 0.0;
  double p = 0.0;
};

double forward(const TrainItem& item, const GcnParams& params, const DropoutMasks* masks, ForwardCache* cache);

double bce_loss(double p, int y, double positive_weight = 1.0);

// Accumulates d(loss * scale)/d(params) into `grads` for one sample.
void backward(const TrainItem& item, const GcnParams& params, const DropoutMasks* masks, const ForwardCache& cache,
              int y, double scale, Gradients& grads, double positive_weight = 1.0);

// Evaluation-mode loss over one sample, for finite-difference checks.
double sample_loss(const TrainItem& item, const GcnParams& params, int y, double positive_weight = 1.0);

struct Checkpoint {
  GcnParams params;
  TrainConfig train;
  PipelineConfig pipeline;
  std::string fingerprint;  // of the pipeline config
  int fold = 0;
  int epoch = 0;            // epoch the snapshot was taken at (1-based)
  std::optional<double> val_auroc;
  double val_loss = 0.0;
};

double predict(const Checkpoint& checkpoint, const TrainItem& item);

struct FoldResult {
  int fold = 0;
  Checkpoint checkpoint;
  std::vector<ScoredExample> val_scores;
  std::vector<ScoredExample> test_scores;
};

struct TrainOutcome {
  std::vector<FoldResult> folds;
  int best_fold = 0;
  // Out-of-fold test predictions (half of each held-out fold, half of
  // the data overall), scored by each fold's checkpoint.
  std::vector<ScoredExample> aggregated_test;
  EvalReport aggregated_report;
};

// K-fold cross-validation: each fold trains on the other folds and
// splits its held-out share 50/50 into validation (checkpoint selection)
// and test (reporting). Deterministic in `config.seed`.
TrainOutcome train_model(const GraphSet& graphs, const TrainConfig& config, LabelCriterion criterion);

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

nlohmann::json cv_report_json(const TrainOutcome& outcome, LabelCriterion criterion);

// Scores every record with the checkpoint's frozen pipeline.
std::vector<ScoredExample> score_records(const std::vector<TaskRecord>& records, const Checkpoint& checkpoint,
                                         LabelCriterion criterion, int jobs = 1);
std::vector<ScoredExample> score_graphset(const GraphSet& graphs, const Checkpoint& checkpoint,
                                          LabelCriterion criterion);

}  // namespace flowcast
