#ifndef TRANSE_TRAINING_HPP
#define TRANSE_TRAINING_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "transe/evaluation.hpp"
#include "transe/kb_data.hpp"
#include "transe/model.hpp"

namespace transe {

using Rng = std::mt19937_64;

/// The engine `train` uses for shuffling and negative sampling.
inline Rng training_rng(std::uint64_t seed) { return Rng(seed ^ 0x5DEECE66DULL); }

struct Hyperparams {
  std::size_t k = 50;
  double gamma = 1.0;
  double eta = 0.01;
  std::size_t max_epochs = 1000;
  std::size_t eval_every = 25;
  std::uint64_t seed = 42;
  DissimilarityKind dissim = DissimilarityKind::L1;
  std::optional<std::size_t> valid_sample = 1000;
  unsigned eval_threads = 1;

  void validate() const {
    if (k == 0) throw std::invalid_argument("k must be >= 1");
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("margin must be > 0");
    if (!(eta > 0.0) || !std::isfinite(eta)) throw std::invalid_argument("learning rate must be > 0");
    if (max_epochs == 0) throw std::invalid_argument("max_epochs must be >= 1");
    if (eval_every == 0 || eval_every > max_epochs) {
      throw std::invalid_argument("eval_every must be in [1, max_epochs]");
    }
    if (valid_sample && *valid_sample == 0) throw std::invalid_argument("valid_sample must be >= 1");
  }
};

/// Corrupts either the head or the tail (probability 1/2 each) with an entity
/// drawn uniformly from all ids other than the one being replaced.
inline Triple sample_negative(const Triple& pos, std::size_t num_entities, Rng& rng) {
  if (num_entities < 2) throw std::invalid_argument("negative sampling needs at least 2 entities");
  std::bernoulli_distribution coin(0.5);
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(num_entities - 2));
  Triple neg = pos;
  EntityId& slot = coin(rng) ? neg.head : neg.tail;
  std::uint32_t r = pick(rng);
  if (r >= slot.index) ++r;
  slot.index = r;
  return neg;
}

inline double hinge_loss(const EmbeddingModel& model, const Triple& pos, const Triple& neg,
                         double gamma) {
  return std::max(0.0, gamma + dissimilarity(model, pos).value - dissimilarity(model, neg).value);
}

/// Subgradient of the hinge for one (pos, neg) pair, accumulated per distinct
/// row. Empty when the margin is satisfied.
struct HingeGradient {
  double loss = 0.0;
  std::vector<std::pair<EntityId, std::vector<double>>> entities;
  std::vector<std::pair<RelationId, std::vector<double>>> relations;
};

namespace detail {

// d d(u) / du at u = h + l - t. sign(0) = 0 for L1; zero at u = 0 for L2.
inline std::vector<double> distance_gradient(const EmbeddingModel& model, const Triple& t) {
  const std::size_t k = model.dim();
  auto h = model.entity(t.head);
  auto l = model.relation(t.label);
  auto tail = model.entity(t.tail);
  std::vector<double> g(k);
  for (std::size_t i = 0; i < k; ++i) g[i] = h[i] + l[i] - tail[i];
  switch (model.dissim()) {
    case DissimilarityKind::L1:
      for (auto& x : g) x = static_cast<double>((x > 0.0) - (x < 0.0));
      break;
    case DissimilarityKind::L2: {
      double norm = 0.0;
      for (double x : g) norm += x * x;
      norm = std::sqrt(norm);
      for (auto& x : g) x = norm > 0.0 ? x / norm : 0.0;
      break;
    }
    case DissimilarityKind::L2Squared:
      for (auto& x : g) x *= 2.0;
      break;
  }
  return g;
}

template <typename Id>
void accumulate(std::vector<std::pair<Id, std::vector<double>>>& rows, Id id,
                std::span<const double> g, double coeff) {
  auto it = std::find_if(rows.begin(), rows.end(), [&](const auto& r) { return r.first == id; });
  if (it == rows.end()) {
    rows.emplace_back(id, std::vector<double>(g.size(), 0.0));
    it = std::prev(rows.end());
  }
  for (std::size_t i = 0; i < g.size(); ++i) it->second[i] += coeff * g[i];
}

}  // namespace detail

inline HingeGradient hinge_gradient(const EmbeddingModel& model, const Triple& pos,
                                    const Triple& neg, double gamma) {
  HingeGradient grad;
  grad.loss = hinge_loss(model, pos, neg, gamma);
  if (grad.loss <= 0.0) return grad;
  auto gp = detail::distance_gradient(model, pos);
  auto gn = detail::distance_gradient(model, neg);
  detail::accumulate(grad.entities, pos.head, gp, 1.0);
  detail::accumulate(grad.entities, pos.tail, gp, -1.0);
  detail::accumulate(grad.entities, neg.head, gn, -1.0);
  detail::accumulate(grad.entities, neg.tail, gn, 1.0);
  detail::accumulate(grad.relations, pos.label, gp, 1.0);
  detail::accumulate(grad.relations, neg.label, gn, -1.0);
  return grad;
}

struct StepReport {
  double loss = 0.0;
  bool violated = false;
  std::size_t zero_norm_rows = 0;
};

/// One subgradient step on the hinge. Touched entity rows are renormalized;
/// the model is left untouched when the margin already holds.
inline StepReport sgd_step(EmbeddingModel& model, const Triple& pos, const Triple& neg,
                           double gamma, double eta) {
  auto grad = hinge_gradient(model, pos, neg, gamma);
  StepReport report{grad.loss, grad.loss > 0.0, 0};
  if (!report.violated) return report;
  std::vector<EntityId> touched;
  touched.reserve(grad.entities.size());
  for (const auto& [id, g] : grad.entities) {
    auto row = model.entity(id);
    for (std::size_t i = 0; i < g.size(); ++i) row[i] -= eta * g[i];
    touched.push_back(id);
  }
  for (const auto& [id, g] : grad.relations) {
    auto row = model.relation(id);
    for (std::size_t i = 0; i < g.size(); ++i) row[i] -= eta * g[i];
  }
  report.zero_norm_rows = project_entities(model, touched);
  return report;
}

struct EpochStats {
  double mean_loss = 0.0;
  std::size_t visited = 0;
  std::size_t violations = 0;
  std::size_t zero_norm_rows = 0;
};

inline EpochStats train_epoch(EmbeddingModel& model, std::span<const Triple> train,
                              const Hyperparams& hp, Rng& rng) {
  if (train.empty()) throw std::invalid_argument("train_epoch: empty training set");
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  EpochStats stats;
  double total = 0.0;
  for (auto idx : order) {
    const Triple& pos = train[idx];
    Triple neg = sample_negative(pos, model.num_entities(), rng);
    auto step = sgd_step(model, pos, neg, hp.gamma, hp.eta);
    total += step.loss;
    stats.violations += step.violated;
    stats.zero_norm_rows += step.zero_norm_rows;
    ++stats.visited;
  }
  stats.mean_loss = total / static_cast<double>(stats.visited);
  return stats;
}

struct ValidationPoint {
  std::size_t epoch = 0;
  double mean_rank = 0.0;
};

struct TrainReport {
  std::vector<double> epoch_losses;
  std::vector<ValidationPoint> evaluations;
  std::size_t best_epoch = 0;
  double best_valid_mean_rank = 0.0;
  std::size_t triples_visited = 0;
  std::size_t zero_norm_rows = 0;
};

/// Returns the validation mean rank of a frozen model; lower is better.
using ValidationFn = std::function<double(const EmbeddingModel&)>;
using ProgressSink = std::function<void(const std::string&)>;

/// Combined (head and tail) mean rank over `valid`, or over a fixed seeded
/// subsample of `sample` triples when that is smaller than the split.
inline ValidationFn make_validation_evaluator(std::span<const Triple> valid,
                                              std::optional<std::size_t> sample,
                                              std::uint64_t seed, unsigned threads = 1) {
  if (valid.empty()) throw std::invalid_argument("validation split is empty");
  std::vector<Triple> subset(valid.begin(), valid.end());
  if (sample && *sample < subset.size()) {
    Rng rng(seed ^ 0xA5A5A5A5DEADBEEFULL);
    std::shuffle(subset.begin(), subset.end(), rng);
    subset.resize(*sample);
  }
  return [subset = std::move(subset), threads](const EmbeddingModel& model) {
    return evaluate(model, subset, Scorer::Translate, threads).combined.mean_rank;
  };
}

namespace detail {

inline std::string format_line(const char* fmt, std::size_t epoch, double value) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), fmt, epoch, value);
  return buf;
}

}  // namespace detail

/// Runs up to `max_epochs` epochs, evaluating every `eval_every` epochs (and
/// after the last one) and keeping the snapshot with the lowest validation
/// mean rank. The returned model is that snapshot.
inline std::pair<EmbeddingModel, TrainReport> train(const KnowledgeBase& kb,
                                                    const Hyperparams& hp,
                                                    const ValidationFn& evaluator,
                                                    const ProgressSink& progress = {}) {
  hp.validate();
  if (kb.train.empty()) throw std::invalid_argument("train: empty training split");
  if (!evaluator) throw std::invalid_argument("train: no validation evaluator");

  EmbeddingModel model = init_model(kb.num_entities(), kb.num_relations(), hp.k, hp.seed, hp.dissim);
  std::optional<EmbeddingModel> best;
  TrainReport report;
  Rng rng = training_rng(hp.seed);

  for (std::size_t epoch = 1; epoch <= hp.max_epochs; ++epoch) {
    auto stats = train_epoch(model, kb.train, hp, rng);
    report.epoch_losses.push_back(stats.mean_loss);
    report.triples_visited += stats.visited;
    report.zero_norm_rows += stats.zero_norm_rows;
    if (progress) progress(detail::format_line("epoch=%zu mean_loss=%.6f", epoch, stats.mean_loss));

    if (epoch % hp.eval_every != 0 && epoch != hp.max_epochs) continue;
    const double rank = evaluator(model);
    report.evaluations.push_back({epoch, rank});
    const bool improved = !best || rank < report.best_valid_mean_rank;
    if (improved) {
      best = model;
      report.best_epoch = epoch;
      report.best_valid_mean_rank = rank;
    }
    if (progress) {
      progress(detail::format_line("epoch=%zu valid_mean_rank=%.3f", epoch, rank) +
               (improved ? " best=true" : " best=false"));
    }
  }
  return {std::move(*best), std::move(report)};
}

inline std::pair<EmbeddingModel, TrainReport> train(const KnowledgeBase& kb,
                                                    const Hyperparams& hp,
                                                    const ProgressSink& progress = {}) {
  return train(kb, hp, make_validation_evaluator(kb.valid, hp.valid_sample, hp.seed, hp.eval_threads),
               progress);
}

}  // namespace transe

#endif  // TRANSE_TRAINING_HPP
