#ifndef TRANSE_EVALUATION_HPP
#define TRANSE_EVALUATION_HPP

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "transe/kb_data.hpp"
#include "transe/model.hpp"

namespace transe {

enum class CorruptSide { Head, Tail };

enum class MetricSide { Head, Tail, Combined };

inline std::string_view to_string(MetricSide side) {
  switch (side) {
    case MetricSide::Head: return "head";
    case MetricSide::Tail: return "tail";
    case MetricSide::Combined: return "combined";
  }
  return "?";
}

struct RankingMetrics {
  double mean_rank = 0.0;
  double median_rank = 0.0;
  double hits_at_10 = 0.0;
  std::size_t count = 0;
  MetricSide side = MetricSide::Combined;
};

struct EvaluationResult {
  RankingMetrics head;
  RankingMetrics tail;
  RankingMetrics combined;
};

namespace detail {

inline const double* label_row(const EmbeddingModel& model, RelationId label, Scorer scorer) {
  return scorer == Scorer::Translate ? model.relation(label).data() : model.zero_label().data();
}

}  // namespace detail

/// Raw link-prediction rank of the true entity when `side` is replaced by
/// every entity in turn. Ties are resolved optimistically: only candidates
/// scoring strictly below the true triple push it down.
inline std::size_t rank_entity(const EmbeddingModel& model, const Triple& triple,
                               CorruptSide side, Scorer scorer = Scorer::Translate) {
  model.check(triple);
  const std::size_t k = model.dim();
  const auto kind = model.dissim();
  const double* h = model.entity(triple.head).data();
  const double* l = detail::label_row(model, triple.label, scorer);
  const double* t = model.entity(triple.tail).data();
  const double target = translation_distance(h, l, t, k, kind);
  const double* table = model.entity_table().data();

  std::size_t better = 0;
  if (side == CorruptSide::Tail) {
    for (std::size_t e = 0; e < model.num_entities(); ++e) {
      if (translation_distance(h, l, table + e * k, k, kind) < target) ++better;
    }
  } else {
    for (std::size_t e = 0; e < model.num_entities(); ++e) {
      if (translation_distance(table + e * k, l, t, k, kind) < target) ++better;
    }
  }
  return better + 1;
}

inline RankingMetrics compute_metrics(std::span<const std::size_t> ranks, MetricSide side) {
  if (ranks.empty()) throw std::invalid_argument("cannot aggregate an empty rank list");
  RankingMetrics m;
  m.side = side;
  m.count = ranks.size();
  double sum = 0.0;
  std::size_t hits = 0;
  for (auto r : ranks) {
    sum += static_cast<double>(r);
    if (r <= 10) ++hits;
  }
  m.mean_rank = sum / static_cast<double>(ranks.size());
  m.hits_at_10 = static_cast<double>(hits) / static_cast<double>(ranks.size());

  std::vector<std::size_t> sorted(ranks.begin(), ranks.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  m.median_rank = n % 2 == 1 ? static_cast<double>(sorted[n / 2])
                             : 0.5 * (static_cast<double>(sorted[n / 2 - 1]) +
                                      static_cast<double>(sorted[n / 2]));
  return m;
}

/// Ranks every triple on one side. Work is split across `threads` workers;
/// results land at fixed indices so the output does not depend on the
/// thread count.
inline std::vector<std::size_t> rank_all(const EmbeddingModel& model,
                                         std::span<const Triple> triples, CorruptSide side,
                                         Scorer scorer = Scorer::Translate,
                                         unsigned threads = 1) {
  std::vector<std::size_t> ranks(triples.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) ranks[i] = rank_entity(model, triples[i], side, scorer);
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(triples.size())));
  if (threads <= 1) {
    work(0, triples.size());
    return ranks;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (triples.size() + threads - 1) / threads;
  for (unsigned w = 0; w < threads; ++w) {
    std::size_t begin = w * chunk;
    std::size_t end = std::min(triples.size(), begin + chunk);
    if (begin >= end) break;
    pool.emplace_back(work, begin, end);
  }
  for (auto& th : pool) th.join();
  return ranks;
}

inline EvaluationResult evaluate(const EmbeddingModel& model, std::span<const Triple> triples,
                                 Scorer scorer = Scorer::Translate, unsigned threads = 1) {
  if (triples.empty()) throw std::invalid_argument("evaluate: empty triple list");
  auto head_ranks = rank_all(model, triples, CorruptSide::Head, scorer, threads);
  auto tail_ranks = rank_all(model, triples, CorruptSide::Tail, scorer, threads);
  std::vector<std::size_t> pooled;
  pooled.reserve(2 * triples.size());
  pooled.insert(pooled.end(), head_ranks.begin(), head_ranks.end());
  pooled.insert(pooled.end(), tail_ranks.begin(), tail_ranks.end());
  return {compute_metrics(head_ranks, MetricSide::Head),
          compute_metrics(tail_ranks, MetricSide::Tail),
          compute_metrics(pooled, MetricSide::Combined)};
}

inline std::string format_metrics(const RankingMetrics& m) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "side=%s mean=%.3f median=%.1f hits10=%.1f n=%zu",
                std::string(to_string(m.side)).c_str(), m.mean_rank, m.median_rank,
                100.0 * m.hits_at_10, m.count);
  return buf;
}

/// The three-line `side=... mean=... median=... hits10=... n=...` report.
inline std::string format_report(const EvaluationResult& r) {
  return format_metrics(r.head) + "\n" + format_metrics(r.tail) + "\n" +
         format_metrics(r.combined) + "\n";
}

struct Prediction {
  EntityId entity;
  TripleScore score;
};

/// The `n` most plausible tails for (head, label), ascending by score with
/// ties broken by entity id. `n` is clamped to the entity count.
inline std::vector<Prediction> predict_top_k(const EmbeddingModel& model, EntityId head,
                                             RelationId label, std::size_t n,
                                             Scorer scorer = Scorer::Translate) {
  if (n == 0) throw std::invalid_argument("predict_top_k: n must be at least 1");
  model.check(head);
  model.check(label);
  const std::size_t k = model.dim();
  const double* h = model.entity(head).data();
  const double* l = detail::label_row(model, label, scorer);
  const double* table = model.entity_table().data();

  std::vector<Prediction> all(model.num_entities());
  for (std::uint32_t e = 0; e < all.size(); ++e) {
    all[e] = {EntityId{e}, {translation_distance(h, l, table + e * k, k, model.dissim())}};
  }
  n = std::min(n, all.size());
  auto less = [](const Prediction& a, const Prediction& b) {
    return a.score.value < b.score.value ||
           (a.score.value == b.score.value && a.entity.index < b.entity.index);
  };
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(), less);
  all.resize(n);
  return all;
}

}  // namespace transe

#endif  // TRANSE_EVALUATION_HPP
