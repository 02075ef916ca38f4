#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dialgraph/data.hpp"
#include "dialgraph/encoder.hpp"
#include "dialgraph/head.hpp"
#include "dialgraph/odc.hpp"
#include "dialgraph/urr.hpp"

namespace dialgraph {

/// Architecture knobs plus the ablation switches. Disabled components
/// register no parameters at all.
struct ModelConfig {
  int d = 64;
  int encoder_layers = 2;
  int heads = 4;
  int projections = 16;   // scalar projections per node pair
  int arc_types = 8;      // relation vocabulary size
  int rgcn_layers = 2;
  int comparator_depth = 1;
  int d_hidden = 0;       // prediction head hidden width; 0 means d
  ArcMode mode = ArcMode::Soft;
  bool odc_before = true;
  bool odc_after = true;
  bool urr = true;
  int max_turns = 12;
  int max_sentence_tokens = 32;
  int max_seq_len = 512;

  void validate() const;
  EncoderConfig encoder_config() const { return {d, encoder_layers, heads, max_seq_len, max_turns}; }
  OdcConfig odc_config() const { return {d, heads, comparator_depth}; }
  UrrConfig urr_config() const { return {d, projections, arc_types, rgcn_layers, mode}; }
  int head_hidden() const { return d_hidden > 0 ? d_hidden : d; }

  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
};

struct ModelParams {
  EncoderParams encoder;
  OdcParams odc;
  UrrParams urr;
  PredictionParams head;
};

/// Registers every enabled component's parameters in the store.
ModelParams create_model_params(ParameterStore& store, const ModelConfig& cfg, long vocab_size);
/// Fetches parameters previously registered with the same config.
ModelParams model_params(const ParameterStore& store, const ModelConfig& cfg);

/// Forward byproducts for the dump command: the two 4 x 4 option-attention
/// maps and every arc's type assignment.
struct Diagnostics {
  std::optional<Mat> attn_before;
  std::optional<Mat> attn_after;
  int n_utterances = 0;
  std::vector<Arc> arcs;
  std::vector<ArcTypeResult> arc_results;
};

struct ForwardResult {
  Tensor scores;  // 4 x 1
  Tensor loss;    // 1 x 1
  Diagnostics diag;
};

/// Full pipeline: encode, compare (before), graph reasoning, compare
/// (after), score, cross entropy. Ablation flags skip stages; with
/// everything off, scores come straight from the encoder summaries.
ForwardResult forward(const DialogueExample& example, const ModelParams& params,
                      const ModelConfig& cfg);

}  // namespace dialgraph
