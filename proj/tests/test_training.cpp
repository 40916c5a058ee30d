#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "support/oracles.hpp"
#include "support/synthetic.hpp"
#include "transe/training.hpp"

namespace transe {
namespace {

double norm(std::span<const double> v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

const Triple kPos{EntityId{0}, RelationId{0}, EntityId{1}};

TEST(Negatives, ChangeExactlyOneEndpointAndNeverTheLabel) {
  Rng rng(1);
  std::uniform_int_distribution<std::uint32_t> ent(0, 9), rel(0, 4);
  for (int n = 0; n < 100000; ++n) {
    Triple pos{EntityId{ent(rng)}, RelationId{rel(rng)}, EntityId{ent(rng)}};
    Triple neg = sample_negative(pos, 10, rng);
    ASSERT_EQ(neg.label, pos.label);
    ASSERT_EQ((neg.head != pos.head) + (neg.tail != pos.tail), 1);
    ASSERT_LT(neg.head.index, 10u);
    ASSERT_LT(neg.tail.index, 10u);
  }
}

TEST(Negatives, HeadAndTailCorruptedEquallyOften) {
  Rng rng(2);
  const int n = 10000;
  int heads = 0;
  for (int i = 0; i < n; ++i) heads += sample_negative(kPos, 50, rng).head != kPos.head;
  EXPECT_NEAR(static_cast<double>(heads) / n, 0.5, 0.02);
}

TEST(Negatives, ReplacementIsUniformOverOtherEntities) {
  // num_entities = 3: corrupting head 0 yields 1 or 2, corrupting tail 1
  // yields 0 or 2, each with conditional probability 1/2.
  Rng rng(3);
  const int n = 10000;
  std::map<std::uint32_t, int> head_counts, tail_counts;
  int head_total = 0, tail_total = 0;
  for (int i = 0; i < n; ++i) {
    auto neg = sample_negative(kPos, 3, rng);
    if (neg.head != kPos.head) {
      ++head_counts[neg.head.index];
      ++head_total;
    } else {
      ++tail_counts[neg.tail.index];
      ++tail_total;
    }
  }
  ASSERT_EQ(head_counts.count(0), 0u);
  ASSERT_EQ(tail_counts.count(1), 0u);
  auto check = [](const std::map<std::uint32_t, int>& counts, int total) {
    const double expected = total / 2.0;
    const double sigma = std::sqrt(total * 0.25);
    double chi2 = 0.0;
    for (auto [id, c] : counts) {
      EXPECT_LE(std::fabs(c - expected), 3.0 * sigma) << "id " << id;
      chi2 += (c - expected) * (c - expected) / expected;
    }
    EXPECT_LT(chi2, 10.83);  // df = 1, p = 0.001
  };
  check(head_counts, head_total);
  check(tail_counts, tail_total);
}

TEST(Negatives, NeedTwoEntities) {
  Rng rng(0);
  EXPECT_THROW(sample_negative(Triple{}, 1, rng), std::invalid_argument);
}

// 1-d L1 model with hand-placed points so d(pos) and d(neg) are exact.
EmbeddingModel line_model(double t_pos, double t_neg) {
  EmbeddingModel m(3, 1, 1, DissimilarityKind::L1);
  m.entity(EntityId{0})[0] = 1.0;
  m.relation(RelationId{0})[0] = 0.0;
  m.entity(EntityId{1})[0] = t_pos;
  m.entity(EntityId{2})[0] = t_neg;
  return m;
}

TEST(Hinge, HandExamples) {
  const Triple neg{EntityId{0}, RelationId{0}, EntityId{2}};
  EXPECT_EQ(hinge_loss(line_model(1.0, -4.0), kPos, neg, 2.0), 0.0);
  EXPECT_NEAR(hinge_loss(line_model(0.5, 0.7), kPos, neg, 1.0), 1.2, 1e-12);
  EXPECT_DOUBLE_EQ(hinge_loss(line_model(0.3, 0.0), kPos, kPos, 1.5), 1.5);
}

TEST(Hinge, NonNegativeAndZeroExactlyWhenMarginHolds) {
  auto m = testing::random_model(20, 3, 6, 4, DissimilarityKind::L1);
  Rng rng(5);
  std::uniform_int_distribution<std::uint32_t> ent(0, 19), rel(0, 2);
  for (int n = 0; n < 2000; ++n) {
    Triple pos{EntityId{ent(rng)}, RelationId{rel(rng)}, EntityId{ent(rng)}};
    Triple neg = sample_negative(pos, 20, rng);
    const double gamma = 0.5;
    const double loss = hinge_loss(m, pos, neg, gamma);
    EXPECT_GE(loss, 0.0);
    EXPECT_EQ(loss == 0.0, dissimilarity(m, pos).value + gamma <= dissimilarity(m, neg).value);
  }
}

TEST(SgdStep, SatisfiedMarginLeavesModelUntouched) {
  auto m = line_model(1.0, -4.0);
  const auto before = m;
  auto report = sgd_step(m, kPos, Triple{EntityId{0}, RelationId{0}, EntityId{2}}, 2.0, 0.01);
  EXPECT_FALSE(report.violated);
  EXPECT_EQ(report.loss, 0.0);
  EXPECT_TRUE(m == before);
}

TEST(SgdStep, TouchedRowsAreRenormalized) {
  auto m = testing::random_model(10, 2, 5, 6, DissimilarityKind::L1);
  Rng rng(7);
  int violated = 0;
  for (int n = 0; n < 500; ++n) {
    Triple pos{EntityId{static_cast<std::uint32_t>(n % 10)}, RelationId{static_cast<std::uint32_t>(n % 2)},
               EntityId{static_cast<std::uint32_t>((n * 7 + 3) % 10)}};
    Triple neg = sample_negative(pos, 10, rng);
    auto report = sgd_step(m, pos, neg, 1.0, 0.05);
    violated += report.violated;
    for (auto e : {pos.head, pos.tail, neg.head, neg.tail}) {
      ASSERT_NEAR(norm(m.entity(e)), 1.0, 1e-6);
    }
  }
  EXPECT_GT(violated, 0);
}

TEST(SgdStep, StepMovesAgainstTheGradient) {
  auto m = testing::random_model(10, 2, 5, 6, DissimilarityKind::L2Squared);
  Triple neg{EntityId{0}, RelationId{0}, EntityId{2}};
  auto before = hinge_loss(m, kPos, neg, 4.0);
  ASSERT_GT(before, 0.0);
  sgd_step(m, kPos, neg, 4.0, 0.01);
  EXPECT_LT(hinge_loss(m, kPos, neg, 4.0), before);
}

TEST(Gradient, SquaredMatchesFiniteDifferences) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    auto p = testing::violated_point(DissimilarityKind::L2Squared, s, 2.0, 1e-3);
    auto g = hinge_gradient(p.model, p.pos, p.neg, 2.0);
    auto fd = testing::finite_difference_check(p.model, p.pos, p.neg, 2.0, g);
    EXPECT_LE(fd.max_rel_error, 1e-4) << "seed " << s;
    EXPECT_GT(fd.coordinates, 0u);
  }
}

TEST(Gradient, L1MatchesFiniteDifferencesAwayFromKinks) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    auto p = testing::violated_point(DissimilarityKind::L1, s, 2.0, 1e-3);
    auto g = hinge_gradient(p.model, p.pos, p.neg, 2.0);
    EXPECT_LE(testing::finite_difference_check(p.model, p.pos, p.neg, 2.0, g).max_rel_error, 1e-4);
  }
}

TEST(Gradient, L2MatchesFiniteDifferences) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    auto p = testing::violated_point(DissimilarityKind::L2, s, 2.0, 1e-3);
    auto g = hinge_gradient(p.model, p.pos, p.neg, 2.0);
    EXPECT_LE(testing::finite_difference_check(p.model, p.pos, p.neg, 2.0, g).max_rel_error, 1e-4);
  }
}

TEST(Gradient, L1UsesSignZeroAtExactFit) {
  // h + l == t exactly for pos: its contribution to the gradient vanishes.
  EmbeddingModel m(3, 1, 2, DissimilarityKind::L1);
  m.entity(EntityId{0})[0] = 1.0;
  m.entity(EntityId{1})[0] = 1.0;
  m.entity(EntityId{2})[1] = 1.0;
  Triple neg{EntityId{0}, RelationId{0}, EntityId{2}};
  auto g = hinge_gradient(m, kPos, neg, 5.0);
  ASSERT_GT(g.loss, 0.0);
  // Only the negative residual (1, -1) contributes: label gradient = -sign.
  ASSERT_EQ(g.relations.size(), 1u);
  EXPECT_EQ(g.relations[0].second[0], -1.0);
  EXPECT_EQ(g.relations[0].second[1], 1.0);
}

Hyperparams small_hp() {
  Hyperparams hp;
  hp.k = 8;
  hp.gamma = 1.0;
  hp.eta = 0.01;
  hp.max_epochs = 5;
  hp.eval_every = 1;
  hp.seed = 9;
  hp.valid_sample = std::nullopt;
  return hp;
}

TEST(TrainEpoch, VisitsEveryTripleOnceAndKeepsNorms) {
  auto kb = testing::random_kb(30, 3, 200, 10, 10, 2);
  auto hp = small_hp();
  auto m = init_model(kb.num_entities(), kb.num_relations(), hp.k, hp.seed);
  auto rng = training_rng(hp.seed);
  for (int epoch = 0; epoch < 5; ++epoch) {
    auto stats = train_epoch(m, kb.train, hp, rng);
    EXPECT_EQ(stats.visited, kb.train.size());
    for (std::uint32_t i = 0; i < m.num_entities(); ++i) ASSERT_NEAR(norm(m.entity(EntityId{i})), 1.0, 1e-6);
  }
  EXPECT_THROW(train_epoch(m, {}, hp, rng), std::invalid_argument);
}

TEST(TrainEpoch, DeterministicForFixedSeed) {
  auto kb = testing::random_kb(30, 3, 200, 10, 10, 2);
  auto hp = small_hp();
  auto run = [&] {
    auto m = init_model(kb.num_entities(), kb.num_relations(), hp.k, hp.seed);
    auto rng = training_rng(hp.seed);
    train_epoch(m, kb.train, hp, rng);
    return m;
  };
  EXPECT_TRUE(run() == run());
}

TEST(TrainEpoch, TwoEntityLossSmoothlyNonIncreasing) {
  auto kb = make_knowledge_base(std::vector<TripleRecord>{{"a", "r", "b", 1}},
                                std::vector<TripleRecord>{{"a", "r", "b", 1}}, {});
  auto hp = small_hp();
  auto m = init_model(2, 1, hp.k, hp.seed);
  auto rng = training_rng(hp.seed);
  std::vector<double> losses;
  for (int epoch = 0; epoch < 50; ++epoch) losses.push_back(train_epoch(m, kb.train, hp, rng).mean_loss);
  std::vector<double> smoothed;
  for (std::size_t i = 0; i + 5 <= losses.size(); ++i) {
    smoothed.push_back(std::accumulate(losses.begin() + i, losses.begin() + i + 5, 0.0) / 5.0);
  }
  for (std::size_t i = 1; i < smoothed.size(); ++i) {
    EXPECT_LE(smoothed[i], smoothed[i - 1] + 1e-12) << "window " << i;
  }
  EXPECT_LT(losses.back(), losses.front());
}

TEST(Train, HyperparamValidation) {
  Hyperparams hp = small_hp();
  hp.gamma = 0.0;
  EXPECT_THROW(hp.validate(), std::invalid_argument);
  hp = small_hp();
  hp.eta = -1.0;
  EXPECT_THROW(hp.validate(), std::invalid_argument);
  hp = small_hp();
  hp.eval_every = hp.max_epochs + 1;
  EXPECT_THROW(hp.validate(), std::invalid_argument);
  hp = small_hp();
  hp.max_epochs = 0;
  EXPECT_THROW(hp.validate(), std::invalid_argument);
}

TEST(Train, SingleEpochEvaluatesOnceAndReturnsThatModel) {
  auto kb = testing::random_kb(25, 2, 100, 10, 10, 3);
  auto hp = small_hp();
  hp.max_epochs = 1;
  int calls = 0;
  auto [best, report] = train(kb, hp, [&](const EmbeddingModel&) { ++calls; return 7.0; });
  EXPECT_EQ(calls, 1);
  ASSERT_EQ(report.evaluations.size(), 1u);
  EXPECT_EQ(report.best_epoch, 1u);

  auto expected = init_model(kb.num_entities(), kb.num_relations(), hp.k, hp.seed, hp.dissim);
  auto rng = training_rng(hp.seed);
  train_epoch(expected, kb.train, hp, rng);
  EXPECT_TRUE(best == expected);
}

TEST(Train, ReturnsBestSnapshotNotLast) {
  auto kb = testing::random_kb(25, 2, 100, 10, 10, 3);
  auto hp = small_hp();
  hp.max_epochs = 6;
  hp.eval_every = 2;
  const std::vector<double> scripted{5.0, 3.0, 4.0};
  std::vector<EmbeddingModel> seen;
  auto [best, report] = train(kb, hp, [&](const EmbeddingModel& m) {
    seen.push_back(m);
    return scripted[seen.size() - 1];
  });
  ASSERT_EQ(seen.size(), 3u);
  EXPECT_EQ(report.best_epoch, 4u);
  EXPECT_EQ(report.best_valid_mean_rank, 3.0);
  EXPECT_TRUE(best == seen[1]);
  EXPECT_FALSE(best == seen[2]);
  EXPECT_EQ(report.triples_visited, 6 * kb.train.size());
  double min_rank = report.evaluations.front().mean_rank;
  for (auto& e : report.evaluations) min_rank = std::min(min_rank, e.mean_rank);
  EXPECT_EQ(report.best_valid_mean_rank, min_rank);
}

TEST(Train, EvaluatesAfterFinalEpochWhenCadenceDoesNotDivide) {
  auto kb = testing::random_kb(25, 2, 100, 10, 10, 3);
  auto hp = small_hp();
  hp.max_epochs = 5;
  hp.eval_every = 2;
  auto [best, report] = train(kb, hp, [](const EmbeddingModel&) { return 1.0; });
  ASSERT_EQ(report.evaluations.size(), 3u);
  EXPECT_EQ(report.evaluations.back().epoch, 5u);
}

TEST(Train, ProgressLines) {
  auto kb = testing::random_kb(25, 2, 100, 10, 10, 3);
  auto hp = small_hp();
  hp.max_epochs = 2;
  hp.eval_every = 2;
  std::vector<std::string> lines;
  train(kb, hp, [&](const std::string& line) { lines.push_back(line); });
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0].rfind("epoch=1 mean_loss=", 0), 0u);
  EXPECT_EQ(lines[1].rfind("epoch=2 mean_loss=", 0), 0u);
  EXPECT_EQ(lines[2].rfind("epoch=2 valid_mean_rank=", 0), 0u);
  EXPECT_NE(lines[2].find(" best=true"), std::string::npos);
}

TEST(Train, DeterministicAcrossRuns) {
  auto kb = testing::random_kb(40, 3, 300, 30, 10, 4);
  auto hp = small_hp();
  hp.max_epochs = 4;
  hp.eval_every = 2;
  auto [a, ra] = train(kb, hp);
  auto [b, rb] = train(kb, hp);
  std::ostringstream sa, sb;
  write_model(sa, a, kb.entities, kb.relations);
  write_model(sb, b, kb.entities, kb.relations);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(ra.epoch_losses, rb.epoch_losses);
}

TEST(Train, TreeTrainingBeatsUntrainedModel) {
  auto tree = testing::tree_kb(6, 0.0, 1);
  for (const auto& t : tree.kb.train) {
    if (t.label == tree.parent) tree.kb.valid.push_back(t);
  }
  auto hp = small_hp();
  hp.dissim = DissimilarityKind::L2;
  hp.max_epochs = 100;
  hp.eval_every = 25;
  auto untrained = init_model(tree.kb.num_entities(), tree.kb.num_relations(), hp.k, hp.seed, hp.dissim);
  const double initial = evaluate(untrained, tree.kb.valid).combined.mean_rank;
  auto [best, report] = train(tree.kb, hp);
  EXPECT_LT(report.best_valid_mean_rank, initial);
  EXPECT_NEAR(evaluate(best, tree.kb.valid).combined.mean_rank, report.best_valid_mean_rank, 1e-9);
}

}  // namespace
}  // namespace transe
