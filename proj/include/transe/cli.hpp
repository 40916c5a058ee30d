#ifndef TRANSE_CLI_HPP
#define TRANSE_CLI_HPP

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>

#include "transe/evaluation.hpp"
#include "transe/kb_data.hpp"
#include "transe/model.hpp"
#include "transe/training.hpp"

namespace transe::cli {

enum class Subcommand { Train, Eval, Predict };

struct RunConfig {
  Subcommand subcommand = Subcommand::Train;
  std::filesystem::path train_path;
  std::filesystem::path valid_path;
  std::optional<std::filesystem::path> test_path;
  std::filesystem::path model_path;
  std::filesystem::path out_path;
  std::optional<std::filesystem::path> log_path;
  Hyperparams hp;
  Scorer scorer = Scorer::Translate;
  std::optional<std::size_t> expect_k;
  std::string head;
  std::string label;
  std::size_t top_n = 10;
  unsigned threads = 1;
};

inline std::string summary_line(const TrainReport& r) {
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "best_epoch=%zu best_valid_mean_rank=%.3f epochs=%zu triples_visited=%zu "
                "zero_norm_rows=%zu",
                r.best_epoch, r.best_valid_mean_rank, r.epoch_losses.size(), r.triples_visited,
                r.zero_norm_rows);
  return buf;
}

/// Trains on train/valid, writes the best snapshot to `out_path` and, when a
/// test split is given, reports its metrics.
inline int cmd_train(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    Hyperparams hp = config.hp;
    hp.eval_threads = config.threads;
    hp.validate();
    auto kb = load_dataset(config.train_path, config.valid_path, config.test_path);
    out << "entities=" << kb.num_entities() << " relations=" << kb.num_relations()
        << " train=" << kb.train.size() << " valid=" << kb.valid.size()
        << " test=" << kb.test.size() << '\n';

    std::ofstream log;
    if (config.log_path) {
      log.open(*config.log_path);
      if (!log) throw IoError("cannot write " + config.log_path->string());
    }
    std::ostream& progress_out = config.log_path ? static_cast<std::ostream&>(log) : out;
    auto [model, report] = train(kb, hp, [&](const std::string& line) {
      progress_out << line << '\n';
      progress_out.flush();
    });

    save_model(model, kb.entities, kb.relations, config.out_path);
    out << summary_line(report) << '\n';
    if (!kb.test.empty()) out << format_report(evaluate(model, kb.test, Scorer::Translate, config.threads));
    return 0;
  } catch (const std::exception& e) {
    err << "train: " << e.what() << '\n';
    return 1;
  }
}

/// Recomputes test metrics from a saved model.
inline int cmd_eval(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    auto loaded = load_model(config.model_path);
    if (config.expect_k && *config.expect_k != loaded.model.dim()) {
      throw DimensionError("model has k=" + std::to_string(loaded.model.dim()) + ", expected k=" +
                           std::to_string(*config.expect_k));
    }
    if (!config.test_path) throw std::invalid_argument("no test split given");
    auto records = read_triple_file(*config.test_path);
    auto triples = parse_triples(records, loaded.entities, loaded.relations, "test");
    out << format_report(evaluate(loaded.model, triples, config.scorer, config.threads));
    return 0;
  } catch (const std::exception& e) {
    err << "eval: " << e.what() << '\n';
    return 1;
  }
}

/// Prints `rank<TAB>entity<TAB>score` for the top tails of (head, label).
inline int cmd_predict(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    auto loaded = load_model(config.model_path);
    auto head = loaded.entities.find(config.head);
    if (!head) throw std::invalid_argument("unknown entity '" + config.head + "'");
    auto label = loaded.relations.find(config.label);
    if (!label) throw std::invalid_argument("unknown relation '" + config.label + "'");
    auto predictions =
        predict_top_k(loaded.model, EntityId{*head}, RelationId{*label}, config.top_n, config.scorer);
    char score[64];
    for (std::size_t i = 0; i < predictions.size(); ++i) {
      std::snprintf(score, sizeof(score), "%.6f", predictions[i].score.value);
      out << (i + 1) << '\t' << loaded.entities.name(predictions[i].entity.index) << '\t' << score
          << '\n';
    }
    return 0;
  } catch (const std::exception& e) {
    err << "predict: " << e.what() << '\n';
    return 1;
  }
}

inline int run(const RunConfig& config, std::ostream& out, std::ostream& err) {
  switch (config.subcommand) {
    case Subcommand::Train: return cmd_train(config, out, err);
    case Subcommand::Eval: return cmd_eval(config, out, err);
    case Subcommand::Predict: return cmd_predict(config, out, err);
  }
  return 2;
}

}  // namespace transe::cli

#endif  // TRANSE_CLI_HPP
