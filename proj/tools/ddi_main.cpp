#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "ddi/commands.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::string seed;
  std::string out;
  std::string checkpoint;
  std::string pairs;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "run configuration file")->required();
  cmd->add_option("--seed", flags.seed, "override the config seed");
  cmd->add_option("--out", flags.out, "override the output directory");
  cmd->add_option("--checkpoint", flags.checkpoint, "override the checkpoint path");
}

ddi::RunConfig resolve(const CommonFlags& flags) {
  ddi::RunConfig config = ddi::RunConfig::load(flags.config_path);
  if (!flags.seed.empty()) config.set("seed", flags.seed);
  if (!flags.out.empty()) config.set("output.dir", flags.out);
  if (!flags.checkpoint.empty()) config.set("checkpoint", flags.checkpoint);
  if (!flags.pairs.empty()) config.set("pairs", flags.pairs);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graph co-attention drug-drug interaction toolkit"};
  app.require_subcommand(1);

  CommonFlags train_flags, eval_flags, predict_flags, export_flags;
  bool per_side_effect = false;

  auto* train = app.add_subcommand("train", "train a model and write a checkpoint");
  add_common(train, train_flags);

  auto* eval = app.add_subcommand("eval", "evaluate AUROC, single split or crossvalidation");
  add_common(eval, eval_flags);
  eval->add_flag("--per-side-effect", per_side_effect,
                 "stratify the report by side effect");

  auto* predict = app.add_subcommand("predict", "score a pairs file under a checkpoint");
  add_common(predict, predict_flags);
  predict->add_option("--pairs", predict_flags.pairs, "pairs file to score");

  auto* exporter =
      app.add_subcommand("export-embeddings", "write drug-pair embeddings for plotting");
  add_common(exporter, export_flags);
  exporter->add_option("--pairs", export_flags.pairs, "labeled pairs file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? ddi::kExitOk : ddi::kExitConfig;
  }

  try {
    if (train->parsed()) return ddi::cmd_train(resolve(train_flags));
    if (eval->parsed()) {
      auto config = resolve(eval_flags);
      if (per_side_effect) config.set("eval.per_side_effect", "true");
      return ddi::cmd_eval(config);
    }
    if (predict->parsed()) return ddi::cmd_predict(resolve(predict_flags));
    if (exporter->parsed()) return ddi::cmd_export_embeddings(resolve(export_flags));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ddi::kExitConfig;
  }
  return ddi::kExitConfig;
}
