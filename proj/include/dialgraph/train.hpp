#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dialgraph/data.hpp"
#include "dialgraph/model.hpp"
#include "dialgraph/optimizer.hpp"

namespace dialgraph {

struct TrainConfig {
  int epochs = 10;
  int batch_size = 16;
  double learning_rate = 1e-3;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  bool sum_loss = false;  // batch loss as a sum instead of a mean
  int eval_workers = 1;
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::string train_path;
  std::string val_path;
  std::string out_dir = "run";

  std::string to_json() const;
  static RunConfig from_json(const std::string& text);
  static RunConfig from_file(const std::string& path);
};

/// Scores one dataset with frozen parameters in hard arc mode. Workers > 1
/// fan the examples out across threads; the aggregation is order-independent
/// so every worker count reports identical metrics.
RankMetrics evaluate(const std::vector<DialogueExample>& examples, const ModelParams& params,
                     const ModelConfig& cfg, int workers = 1);

struct TrainResult {
  RankMetrics best_val;
  int best_epoch = -1;
  bool aborted = false;  // non-finite loss; best checkpoint kept
  std::string best_checkpoint;
  std::string metrics_path;
  std::vector<std::string> log_lines;
};

/// Full training run: builds the vocabulary from the train split, trains
/// with AdamW under cosine annealing, evaluates on the validation split
/// after every epoch, and keeps the best checkpoint by R_4@1.
TrainResult cmd_train(const RunConfig& cfg);

/// Self-contained model file: parameters plus embedded config and
/// vocabulary.
struct LoadedModel {
  ModelConfig config;
  Vocabulary vocab;
  std::shared_ptr<ParameterStore> store;
  ModelParams params;
};

LoadedModel load_checkpoint(const std::string& path);
void save_checkpoint(const std::string& path, const ParameterStore& store,
                     const ModelConfig& cfg, const Vocabulary& vocab);

RankMetrics cmd_eval(const std::string& checkpoint, const std::string& data_path, int workers = 1);

/// Writes odc_before.csv / odc_after.csv (4 x 4 option attention, rows A-D)
/// and arcs.csv (src, dst, hard type, per-type probabilities) for one
/// example. Returns the paths written.
std::vector<std::string> cmd_dump(const std::string& checkpoint, const std::string& data_path,
                                  const std::string& example_id, const std::string& out_dir);

struct SweepRow {
  int value = 0;
  bool failed = false;
  std::string error;
  RankMetrics metrics;
};

struct SweepResult {
  std::string axis;  // "T" or "l"
  int baseline_value = 0;
  std::vector<SweepRow> rows;

  std::string to_csv() const;
  std::string to_markdown() const;  // deltas against the baseline row
};

/// Trains one model per axis value with a shared seed; continues past
/// individual failures and marks them in the table.
SweepResult cmd_sweep(const RunConfig& base, const std::string& axis,
                      const std::vector<int>& values);

}  // namespace dialgraph
