#include "dialgraph/head.hpp"

#include <cmath>

#include "json.hpp"

namespace dialgraph {

PredictionParams create_prediction_params(ParameterStore& store, int d, int d_hidden) {
  PredictionParams p;
  p.w1 = store.create("head.w1", d, d_hidden, Init::XavierUniform);
  p.b1 = store.create("head.b1", 1, d_hidden, Init::Zeros);
  p.w2 = store.create("head.w2", d_hidden, 1, Init::XavierUniform);
  p.b2 = store.create("head.b2", 1, 1, Init::Zeros);
  return p;
}

PredictionParams prediction_params(const ParameterStore& store) {
  PredictionParams p;
  p.w1 = store.get("head.w1");
  p.b1 = store.get("head.b1");
  p.w2 = store.get("head.w2");
  p.b2 = store.get("head.b2");
  return p;
}

Tensor score_options(const Tensor& option_vectors, const PredictionParams& params) {
  if (option_vectors.cols() != params.w1.rows())
    throw ContractError("score_options: option width " + std::to_string(option_vectors.cols()) +
                        " does not match head input " + std::to_string(params.w1.rows()));
  Tensor hidden = relu(add(matmul(option_vectors, params.w1), params.b1));
  return add(matmul(hidden, params.w2), params.b2);  // 4 x 1
}

Tensor ce_loss(const Tensor& scores, int gold) {
  if (gold < 0 || gold >= static_cast<int>(scores.size()))
    throw ContractError("ce_loss: gold index " + std::to_string(gold) + " outside 0.." +
                        std::to_string(scores.size() - 1));
  Tensor row = reshape(scores, 1, scores.size());
  Tensor probs = softmax(row, 1);
  Tensor gold_p = slice(probs, 0, 1, gold, 1);
  return scale(log(gold_p), -1.0);
}

ScoredExample make_scored(const std::vector<double>& scores, int gold) {
  if (scores.size() != 4) throw ContractError("make_scored: expected 4 scores");
  if (gold < 0 || gold > 3) throw ContractError("make_scored: gold index outside 0..3");
  ScoredExample ex;
  ex.scores = scores;
  ex.gold = gold;

  double mx = scores[0];
  for (double s : scores) mx = std::max(mx, s);
  double z = 0.0;
  for (double s : scores) z += std::exp(s - mx);
  ex.probs.resize(4);
  for (int i = 0; i < 4; ++i) ex.probs[static_cast<std::size_t>(i)] = std::exp(scores[static_cast<std::size_t>(i)] - mx) / z;

  // Pessimistic rank: every tie counts against the gold option.
  int rank = 1;
  for (int j = 0; j < 4; ++j)
    if (j != gold && scores[static_cast<std::size_t>(j)] >= scores[static_cast<std::size_t>(gold)]) ++rank;
  ex.rank_of_gold = rank;
  return ex;
}

RankMetrics rank_metrics(const std::vector<ScoredExample>& batch) {
  if (batch.empty()) throw ContractError("rank_metrics: empty batch");
  RankMetrics m;
  m.n = static_cast<long>(batch.size());
  for (const auto& ex : batch) {
    if (ex.rank_of_gold == 1) m.r4_at_1 += 1.0;
    if (ex.rank_of_gold <= 2) m.r4_at_2 += 1.0;
    m.mrr += 1.0 / static_cast<double>(ex.rank_of_gold);
  }
  m.r4_at_1 /= static_cast<double>(m.n);
  m.r4_at_2 /= static_cast<double>(m.n);
  m.mrr /= static_cast<double>(m.n);
  return m;
}

std::string metrics_json(const RankMetrics& m) {
  nlohmann::json j;
  j["r4_at_1"] = m.r4_at_1;
  j["r4_at_2"] = m.r4_at_2;
  j["mrr"] = m.mrr;
  j["n"] = m.n;
  return j.dump();
}

}  // namespace dialgraph
