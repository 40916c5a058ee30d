// Command-line front end: train / eval / predict.

#include <iostream>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "transe/cli.hpp"

int main(int argc, char** argv) {
  using namespace transe;
  cli::RunConfig config;
  std::string dissim = "l1";
  std::string scorer = "translate";
  std::size_t valid_sample = 1000;
  std::size_t expect_k = 0;
  config.threads = std::max(1u, std::thread::hardware_concurrency());

  CLI::App app{"Translation-based knowledge base embeddings"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "train a model and write the best validation snapshot");
  train->add_option("--train", config.train_path, "training triples (TSV)")->required();
  train->add_option("--valid", config.valid_path, "validation triples (TSV)")->required();
  train->add_option("--test", config.test_path, "test triples (TSV); evaluated after training");
  train->add_option("--out", config.out_path, "model output path")->required();
  train->add_option("--k", config.hp.k, "embedding dimension")->capture_default_str();
  train->add_option("--margin", config.hp.gamma, "margin")->capture_default_str();
  train->add_option("--lr", config.hp.eta, "learning rate")->capture_default_str();
  train->add_option("--epochs", config.hp.max_epochs, "maximum epochs")->capture_default_str();
  train->add_option("--dissim", dissim, "l1 | l2 | l2sq")->capture_default_str();
  train->add_option("--seed", config.hp.seed, "random seed")->capture_default_str();
  train->add_option("--eval-every", config.hp.eval_every, "epochs between validation runs")
      ->capture_default_str();
  train->add_option("--valid-sample", valid_sample, "validation subsample size (0 = all)")
      ->capture_default_str();
  train->add_option("--log", config.log_path, "write progress lines here instead of stdout");

  auto* eval = app.add_subcommand("eval", "rank a test split against a saved model");
  eval->add_option("--model", config.model_path, "model file")->required();
  eval->add_option("--test", config.test_path, "test triples (TSV)")->required();
  eval->add_option("--scorer", scorer, "translate | unstructured")->capture_default_str();
  eval->add_option("--k", expect_k, "fail unless the model has this dimension");

  auto* predict = app.add_subcommand("predict", "list the most plausible tails for (head, label)");
  predict->add_option("--model", config.model_path, "model file")->required();
  predict->add_option("--head", config.head, "head entity name")->required();
  predict->add_option("--label", config.label, "relation name")->required();
  predict->add_option("--top", config.top_n, "number of tails to list")->capture_default_str();
  predict->add_option("--scorer", scorer, "translate | unstructured")->capture_default_str();

  for (auto* sub : {train, eval, predict}) {
    sub->add_option("--threads", config.threads, "evaluation threads")->capture_default_str();
  }

  CLI11_PARSE(app, argc, argv);

  try {
    config.hp.dissim = parse_dissimilarity(dissim);
    config.scorer = parse_scorer(scorer);
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }
  config.hp.valid_sample = valid_sample == 0 ? std::nullopt : std::optional<std::size_t>(valid_sample);
  if (eval->parsed() && expect_k != 0) config.expect_k = expect_k;

  if (train->parsed()) config.subcommand = cli::Subcommand::Train;
  else if (eval->parsed()) config.subcommand = cli::Subcommand::Eval;
  else config.subcommand = cli::Subcommand::Predict;
  return cli::run(config, std::cout, std::cerr);
}
