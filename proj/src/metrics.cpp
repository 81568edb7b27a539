#include "flowcast/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "flowcast/common.hpp"

namespace flowcast {

namespace {

void require_nonempty(const std::vector<ScoredExample>& examples, const char* what) {
  if (examples.empty()) throw_param(std::string(what) + " undefined for empty input");
}

std::pair<std::int64_t, std::int64_t> class_counts(const std::vector<ScoredExample>& examples) {
  std::int64_t pos = 0, neg = 0;
  for (const auto& e : examples) (e.y == 1 ? pos : neg) += 1;
  return {pos, neg};
}

}  // namespace

ConfusionCounts confusion_at(const std::vector<ScoredExample>& examples, double threshold) {
  ConfusionCounts c;
  for (const auto& e : examples) {
    const bool predicted = e.score >= threshold;
    if (predicted) {
      (e.y == 1 ? c.tp : c.fp) += 1;
    } else {
      (e.y == 1 ? c.fn : c.tn) += 1;
    }
  }
  return c;
}

double accuracy(const std::vector<ScoredExample>& examples, double threshold) {
  require_nonempty(examples, "accuracy");
  const ConfusionCounts c = confusion_at(examples, threshold);
  return static_cast<double>(c.tp + c.tn) / static_cast<double>(examples.size());
}

double auroc(const std::vector<ScoredExample>& examples) {
  require_nonempty(examples, "auroc");
  const auto [pos, neg] = class_counts(examples);
  if (pos == 0 || neg == 0) throw_param("auroc undefined: needs both classes");
  // Mann-Whitney U from midranks; tied scores share the average rank,
  // which yields the 1/2-per-tie convention exactly.
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return examples[a].score < examples[b].score; });
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && examples[order[j]].score == examples[order[i]].score) ++j;
    // ranks i+1 .. j (1-based); midrank = (i + 1 + j) / 2
    const double midrank = (static_cast<double>(i) + 1.0 + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (examples[order[k]].y == 1) rank_sum_pos += midrank;
    }
    i = j;
  }
  const double u = rank_sum_pos - static_cast<double>(pos) * (static_cast<double>(pos) + 1.0) / 2.0;
  return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

std::optional<double> auroc_if_defined(const std::vector<ScoredExample>& examples) {
  if (examples.empty()) return std::nullopt;
  const auto [pos, neg] = class_counts(examples);
  if (pos == 0 || neg == 0) return std::nullopt;
  return auroc(examples);
}

double aupr(const std::vector<ScoredExample>& examples) {
  require_nonempty(examples, "aupr");
  const auto [pos, neg] = class_counts(examples);
  if (pos == 0) throw_param("aupr undefined: no positive examples");
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return examples[a].score > examples[b].score; });
  double area = 0.0;
  double prev_recall = 0.0;
  std::int64_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && examples[order[j]].score == examples[order[i]].score) ++j;
    for (std::size_t k = i; k < j; ++k) {
      (examples[order[k]].y == 1 ? tp : fp) += 1;
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(pos);
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return area;
}

std::optional<double> aupr_if_defined(const std::vector<ScoredExample>& examples) {
  if (examples.empty()) return std::nullopt;
  const auto [pos, neg] = class_counts(examples);
  (void)neg;
  if (pos == 0) return std::nullopt;
  return aupr(examples);
}

double fpr_at_tpr(const std::vector<ScoredExample>& examples, double target_tpr) {
  require_nonempty(examples, "fpr@tpr");
  const auto [pos, neg] = class_counts(examples);
  if (pos == 0 || neg == 0) throw_param("fpr@tpr undefined: needs both classes");
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return examples[a].score > examples[b].score; });
  // Sweep thresholds downward; TPR and FPR both grow, so the first
  // threshold clearing the target gives the minimum FPR.
  std::int64_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && examples[order[j]].score == examples[order[i]].score) ++j;
    for (std::size_t k = i; k < j; ++k) {
      (examples[order[k]].y == 1 ? tp : fp) += 1;
    }
    if (static_cast<double>(tp) / static_cast<double>(pos) >= target_tpr) {
      return static_cast<double>(fp) / static_cast<double>(neg);
    }
    i = j;
  }
  return 1.0;  // unreachable: the lowest threshold admits everything
}

std::optional<double> fpr_at_tpr_if_defined(const std::vector<ScoredExample>& examples, double target_tpr) {
  if (examples.empty()) return std::nullopt;
  const auto [pos, neg] = class_counts(examples);
  if (pos == 0 || neg == 0) return std::nullopt;
  return fpr_at_tpr(examples, target_tpr);
}

double mean_bce_loss(const std::vector<ScoredExample>& examples) {
  require_nonempty(examples, "bce loss");
  double total = 0.0;
  for (const auto& e : examples) {
    const double p = std::min(1.0 - 1e-12, std::max(1e-12, e.score));
    total += e.y == 1 ? -std::log(p) : -std::log(1.0 - p);
  }
  return total / static_cast<double>(examples.size());
}

EvalReport evaluate_scores(const std::vector<ScoredExample>& examples, double threshold) {
  require_nonempty(examples, "evaluation");
  EvalReport report;
  report.n = static_cast<int>(examples.size());
  const auto [pos, neg] = class_counts(examples);
  report.n_pos = static_cast<int>(pos);
  report.n_neg = static_cast<int>(neg);
  report.threshold = threshold;
  report.confusion = confusion_at(examples, threshold);
  report.accuracy = accuracy(examples, threshold);
  report.auroc = auroc_if_defined(examples);
  report.aupr = aupr_if_defined(examples);
  report.fpr_at_95 = fpr_at_tpr_if_defined(examples, 0.95);
  return report;
}

namespace {

nlohmann::json opt_to_json(const std::optional<double>& v) {
  if (v) return *v;
  return nullptr;
}

std::string fmt_opt(const std::optional<double>& v) {
  if (!v) return "n/a";
  std::ostringstream out;
  out << std::fixed << std::setprecision(4) << *v;
  return out.str();
}

std::string fmt_num(double v) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4) << v;
  return out.str();
}

}  // namespace

nlohmann::json eval_report_to_json(const EvalReport& report) {
  return nlohmann::json{{"n", report.n},
                        {"n_pos", report.n_pos},
                        {"n_neg", report.n_neg},
                        {"threshold", report.threshold},
                        {"accuracy", report.accuracy},
                        {"auroc", opt_to_json(report.auroc)},
                        {"aupr", opt_to_json(report.aupr)},
                        {"fpr_at_95tpr", opt_to_json(report.fpr_at_95)},
                        {"confusion", nlohmann::json{{"tp", report.confusion.tp},
                                                     {"fp", report.confusion.fp},
                                                     {"tn", report.confusion.tn},
                                                     {"fn", report.confusion.fn}}}};
}

std::string eval_report_table(const EvalReport& report) {
  std::ostringstream out;
  out << "metric        value\n";
  out << "------------  ---------\n";
  out << "tasks         " << report.n << " (" << report.n_pos << " failed, " << report.n_neg << " ok)\n";
  out << "accuracy      " << fmt_num(report.accuracy) << " @ " << fmt_num(report.threshold) << "\n";
  out << "auroc         " << fmt_opt(report.auroc) << "\n";
  out << "aupr          " << fmt_opt(report.aupr) << "\n";
  out << "fpr@95tpr     " << fmt_opt(report.fpr_at_95) << "\n";
  out << "confusion     tp=" << report.confusion.tp << " fp=" << report.confusion.fp << " tn=" << report.confusion.tn
      << " fn=" << report.confusion.fn << "\n";
  return out.str();
}

EvalReport majority_baseline(const std::vector<int>& labels) {
  if (labels.empty()) throw_param("majority baseline undefined for empty input");
  std::int64_t pos = 0;
  for (int y : labels)
    if (y == 1) ++pos;
  const std::int64_t neg = static_cast<std::int64_t>(labels.size()) - pos;
  const int predicted = pos > neg ? 1 : 0;  // tie predicts success
  EvalReport report;
  report.n = static_cast<int>(labels.size());
  report.n_pos = static_cast<int>(pos);
  report.n_neg = static_cast<int>(neg);
  report.threshold = 0.5;
  if (predicted == 1) {
    report.confusion.tp = pos;
    report.confusion.fp = neg;
  } else {
    report.confusion.tn = neg;
    report.confusion.fn = pos;
  }
  report.accuracy =
      static_cast<double>(predicted == 1 ? pos : neg) / static_cast<double>(labels.size());
  // Constant prediction carries no ranking: leave auroc/aupr/fpr unset.
  return report;
}

ConfidenceBaselineResult confidence_baseline(const std::vector<TaskRecord>& records, LabelCriterion criterion,
                                             std::uint64_t seed) {
  if (records.size() < 2) throw_param("confidence baseline needs at least 2 tasks");
  std::vector<ScoredExample> scored(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].agent_kind != AgentKind::voting)
      throw_config("confidence baseline is defined only for voting tasks (task '" + records[i].task_id + "')");
    const LabelBasis basis = label_basis(records[i]);
    scored[i].task_id = records[i].task_id;
    scored[i].score = 1.0 - vote_confidence(basis);
    scored[i].y = label_from_basis(basis, criterion).y;
  }
  std::vector<std::size_t> order(scored.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(seed, 0xbace));
  rng.shuffle(order);
  const std::size_t val_n = (order.size() + 1) / 2;

  auto subset = [&](std::size_t begin, std::size_t end) {
    std::vector<ScoredExample> out;
    out.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) out.push_back(scored[order[i]]);
    return out;
  };
  const std::vector<ScoredExample> val = subset(0, val_n);
  const std::vector<ScoredExample> test = subset(val_n, order.size());
  if (test.empty()) throw_param("confidence baseline needs at least 2 tasks");

  // Decision rule: failure iff confidence < tau, i.e. score > 1 - tau.
  auto accuracy_with_tau = [](const std::vector<ScoredExample>& xs, double tau) {
    std::int64_t correct = 0;
    for (const auto& e : xs) {
      const bool predicted = (1.0 - e.score) < tau;
      if (static_cast<int>(predicted) == e.y) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(xs.size());
  };
  double best_tau = 0.1;
  double best_acc = -1.0;
  for (int t = 1; t <= 9; ++t) {
    const double tau = static_cast<double>(t) / 10.0;
    const double acc = accuracy_with_tau(val, tau);
    if (acc > best_acc) {
      best_acc = acc;
      best_tau = tau;
    }
  }

  auto report_with_tau = [&](const std::vector<ScoredExample>& xs, double tau) {
    EvalReport report;
    report.n = static_cast<int>(xs.size());
    const auto [pos, neg] = class_counts(xs);
    report.n_pos = static_cast<int>(pos);
    report.n_neg = static_cast<int>(neg);
    report.threshold = tau;
    for (const auto& e : xs) {
      const bool predicted = (1.0 - e.score) < tau;
      if (predicted) {
        (e.y == 1 ? report.confusion.tp : report.confusion.fp) += 1;
      } else {
        (e.y == 1 ? report.confusion.fn : report.confusion.tn) += 1;
      }
    }
    report.accuracy = accuracy_with_tau(xs, tau);
    report.auroc = auroc_if_defined(xs);
    report.aupr = aupr_if_defined(xs);
    report.fpr_at_95 = fpr_at_tpr_if_defined(xs);
    return report;
  };

  ConfidenceBaselineResult result;
  result.tau = best_tau;
  result.validation = report_with_tau(val, best_tau);
  result.test = report_with_tau(test, best_tau);
  return result;
}

}  // namespace flowcast
