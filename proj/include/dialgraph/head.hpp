#pragma once

#include <vector>

#include "dialgraph/param_store.hpp"
#include "dialgraph/tensor.hpp"

namespace dialgraph {

/// Two linear layers with a ReLU between, shared across the 4 option rows.
struct PredictionParams {
  Tensor w1, b1;  // d x d_h, 1 x d_h
  Tensor w2, b2;  // d_h x 1, 1 x 1
};

PredictionParams create_prediction_params(ParameterStore& store, int d, int d_hidden);
PredictionParams prediction_params(const ParameterStore& store);

/// Per-option scalar scores (4 x 1) from the 4 x d option matrix.
Tensor score_options(const Tensor& option_vectors, const PredictionParams& params);

/// Cross entropy of the gold option under a softmax over the 4 scores.
Tensor ce_loss(const Tensor& scores, int gold);

struct ScoredExample {
  std::vector<double> scores;  // 4
  std::vector<double> probs;   // 4, sums to 1
  int gold = 0;
  int rank_of_gold = 1;  // 1..4, ties counted against the gold
};

ScoredExample make_scored(const std::vector<double>& scores, int gold);

struct RankMetrics {
  double r4_at_1 = 0.0;
  double r4_at_2 = 0.0;
  double mrr = 0.0;
  long n = 0;
};

RankMetrics rank_metrics(const std::vector<ScoredExample>& batch);

/// {"r4_at_1": ..., "r4_at_2": ..., "mrr": ..., "n": ...}
std::string metrics_json(const RankMetrics& m);

}  // namespace dialgraph
