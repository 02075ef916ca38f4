#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dialgraph/train.hpp"

namespace {

using namespace dialgraph;

// The config file loads first; any flag of the same dotted name overrides it.
void add_run_flags(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--model.d", cfg.model.d, "hidden size");
  cmd->add_option("--model.encoder_layers", cfg.model.encoder_layers, "encoder depth");
  cmd->add_option("--model.heads", cfg.model.heads, "attention heads");
  cmd->add_option("--model.projections", cfg.model.projections, "relational projections");
  cmd->add_option("--model.arc_types", cfg.model.arc_types, "relation vocabulary size");
  cmd->add_option("--model.rgcn_layers", cfg.model.rgcn_layers, "graph conv layers");
  cmd->add_option("--model.comparator_depth", cfg.model.comparator_depth, "comparator blocks");
  cmd->add_option("--model.d_hidden", cfg.model.d_hidden, "prediction head hidden width");
  cmd->add_option("--model.max_turns", cfg.model.max_turns, "dialogue turn cap");
  cmd->add_option("--model.max_sentence_tokens", cfg.model.max_sentence_tokens,
                  "tokens kept per sentence");
  cmd->add_option("--model.max_seq_len", cfg.model.max_seq_len, "total sequence cap");
  cmd->add_option("--train.epochs", cfg.train.epochs, "training epochs");
  cmd->add_option("--train.batch_size", cfg.train.batch_size, "batch size");
  cmd->add_option("--train.learning_rate", cfg.train.learning_rate, "initial learning rate");
  cmd->add_option("--train.weight_decay", cfg.train.weight_decay, "decoupled weight decay");
  cmd->add_option("--train.beta1", cfg.train.beta1, "Adam beta1");
  cmd->add_option("--train.beta2", cfg.train.beta2, "Adam beta2");
  cmd->add_option("--train.adam_eps", cfg.train.adam_eps, "Adam epsilon");
  cmd->add_option("--train.eval_workers", cfg.train.eval_workers, "validation eval threads");
  cmd->add_flag("--train.sum_loss", cfg.train.sum_loss, "sum batch losses instead of mean");
  cmd->add_option("--data.train_path", cfg.train_path, "training data (JSON lines)");
  cmd->add_option("--data.val_path", cfg.val_path, "validation data (JSON lines)");
  cmd->add_option("--out_dir", cfg.out_dir, "output directory");

  // short forms
  cmd->add_option("--seed", cfg.train.seed, "global rng seed");
  cmd->add_option_function<std::string>(
      "--mode",
      [&cfg](const std::string& m) {
        if (m != "soft" && m != "hard") throw CLI::ValidationError("--mode must be soft or hard");
        cfg.model.mode = (m == "soft") ? ArcMode::Soft : ArcMode::Hard;
      },
      "arc mode: soft|hard");
  cmd->add_option("--arc-types", cfg.model.arc_types, "relation vocabulary size");
  cmd->add_option("--rgcn-layers", cfg.model.rgcn_layers, "graph conv layers");
  cmd->add_flag_callback("--no-odc-before", [&cfg]() { cfg.model.odc_before = false; },
                         "disable the pre-reasoning comparator");
  cmd->add_flag_callback("--no-odc-after", [&cfg]() { cfg.model.odc_after = false; },
                         "disable the post-reasoning comparator");
  cmd->add_flag_callback("--no-urr", [&cfg]() { cfg.model.urr = false; },
                         "disable graph reasoning");
  cmd->add_option("--out", cfg.out_dir, "output directory");
}

std::string prescan_config(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) return argv[i + 1];
    if (a.rfind("--config=", 0) == 0) return a.substr(9);
  }
  return "";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dialogue response selection with relational graph reasoning"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string config_path = prescan_config(argc, argv);
  if (!config_path.empty()) {
    try {
      cfg = RunConfig::from_file(config_path);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 1;
    }
  }
  std::string config_sink;

  auto* train = app.add_subcommand("train", "train a model and keep the best checkpoint");
  train->add_option("--config", config_sink, "JSON run config");
  add_run_flags(train, cfg);

  auto* eval = app.add_subcommand("eval", "score a dataset with a checkpoint");
  std::string ckpt, data_path, example_id, eval_out;
  int workers = 1;
  eval->add_option("--ckpt", ckpt, "checkpoint path")->required();
  eval->add_option("--data", data_path, "dataset path")->required();
  eval->add_option("--workers", workers, "parallel eval workers");
  eval->add_option("--out", eval_out, "also write metrics.json here");

  auto* dump = app.add_subcommand("dump", "write attention and arc CSVs for one example");
  dump->add_option("--ckpt", ckpt, "checkpoint path")->required();
  dump->add_option("--data", data_path, "dataset path")->required();
  dump->add_option("--id", example_id, "example id")->required();
  dump->add_option("--out", eval_out, "output directory")->required();

  auto* sweep = app.add_subcommand("sweep", "train once per axis value, emit a table");
  sweep->add_option("--config", config_sink, "JSON run config");
  std::string axis = "T";
  std::vector<int> values;
  sweep->add_option("--axis", axis, "T (arc types) or l (rgcn layers)");
  sweep->add_option("--values", values, "axis values")->expected(-1);
  add_run_flags(sweep, cfg);

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic corpus (MuTual schema)");
  SyntheticSpec spec;
  std::string gen_out = "data";
  gen->add_option("--out", gen_out, "output directory");
  gen->add_option("--seed", spec.seed, "generator seed");
  gen->add_option("--train", spec.train_size, "training examples");
  gen->add_option("--val", spec.val_size, "validation examples");
  gen->add_option("--entities", spec.num_entities, "entity count");
  gen->add_option("--attributes", spec.num_attributes, "attribute count");
  gen->add_option("--values", spec.values_per_attribute, "values per attribute");
  gen->add_option("--turns", spec.turns, "turns per dialogue");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      TrainResult r = cmd_train(cfg);
      if (r.aborted) {
        std::cerr << "training aborted on non-finite loss; best checkpoint kept\n";
        return 2;
      }
      std::cout << "best epoch " << r.best_epoch << ": " << metrics_json(r.best_val) << "\n";
      std::cout << "checkpoint: " << r.best_checkpoint << "\n";
      std::cout << "metrics log: " << r.metrics_path << "\n";
    } else if (eval->parsed()) {
      RankMetrics m = cmd_eval(ckpt, data_path, workers);
      std::string text = metrics_json(m);
      std::cout << text << "\n";
      if (!eval_out.empty()) {
        std::filesystem::create_directories(eval_out);
        std::ofstream os(eval_out + "/metrics.json");
        os << text << "\n";
      }
    } else if (dump->parsed()) {
      for (const auto& path : cmd_dump(ckpt, data_path, example_id, eval_out))
        std::cout << "wrote " << path << "\n";
    } else if (sweep->parsed()) {
      SweepResult r = cmd_sweep(cfg, axis, values);
      std::filesystem::create_directories(cfg.out_dir);
      std::ofstream(cfg.out_dir + "/sweep.csv") << r.to_csv();
      std::ofstream(cfg.out_dir + "/sweep.md") << r.to_markdown();
      std::cout << r.to_markdown();
    } else if (gen->parsed()) {
      SyntheticCorpus corpus = gen_synthetic(spec);
      std::filesystem::create_directories(gen_out);
      save_corpus(corpus.train, gen_out + "/train.jsonl");
      save_corpus(corpus.val, gen_out + "/val.jsonl");
      std::cout << "wrote " << corpus.train.size() << " train / " << corpus.val.size()
                << " val examples under " << gen_out << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
