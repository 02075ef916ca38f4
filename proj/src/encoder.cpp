#include "dialgraph/encoder.hpp"

#include <cmath>

namespace dialgraph {

EncoderParams create_encoder_params(ParameterStore& store, const EncoderConfig& cfg,
                                    long vocab_size) {
  EncoderParams p;
  p.heads = cfg.heads;
  p.tok_emb = store.create("enc.tok_emb", vocab_size, cfg.d, Init::XavierUniform);
  p.seg_emb = store.create("enc.seg_emb", cfg.max_turns + 1, cfg.d, Init::XavierUniform);
  for (int l = 0; l < cfg.layers; ++l)
    p.layers.push_back(create_block_params(store, "enc.l" + std::to_string(l), cfg.d, cfg.heads));
  return p;
}

EncoderParams encoder_params(const ParameterStore& store, const EncoderConfig& cfg) {
  EncoderParams p;
  p.heads = cfg.heads;
  p.tok_emb = store.get("enc.tok_emb");
  p.seg_emb = store.get("enc.seg_emb");
  for (int l = 0; l < cfg.layers; ++l)
    p.layers.push_back(block_params(store, "enc.l" + std::to_string(l), cfg.heads));
  return p;
}

SequenceLayout build_layout(const DialogueExample& example, int max_turns) {
  if (example.options.size() != 4)
    throw ContractError("build_layout: expected 4 options, got " +
                        std::to_string(example.options.size()));
  if (example.utterances.size() > static_cast<std::size_t>(max_turns))
    throw ContractError("build_layout: " + std::to_string(example.utterances.size()) +
                        " utterances exceed the configured maximum of " +
                        std::to_string(max_turns));
  SequenceLayout lay;
  lay.n_utterances = static_cast<int>(example.utterances.size());

  long pos = 0;
  auto push_sentence = [&](const std::vector<long>& ids, long segment, long base_pos,
                           bool global, int block_id) {
    long p = global ? pos : base_pos;
    lay.cls_positions.push_back(static_cast<Eigen::Index>(lay.tokens.size()));
    lay.tokens.push_back(Vocabulary::kCls);
    lay.segments.push_back(segment);
    lay.positions.push_back(p++);
    lay.valid.push_back(true);
    lay.block.push_back(block_id);
    for (long id : ids) {
      lay.tokens.push_back(id);
      lay.segments.push_back(segment);
      lay.positions.push_back(p++);
      lay.valid.push_back(true);
      lay.block.push_back(block_id);
    }
    if (global) pos = p;
  };

  for (std::size_t n = 0; n < example.utterances.size(); ++n)
    push_sentence(example.utterances[n], static_cast<long>(n), 0, true, -1);
  long option_base = pos;  // every option block restarts here
  for (std::size_t o = 0; o < example.options.size(); ++o)
    push_sentence(example.options[o], max_turns, option_base, false, static_cast<int>(o));
  return lay;
}

Mat sinusoid_rows(const std::vector<long>& positions, int d) {
  Mat pe(static_cast<Eigen::Index>(positions.size()), d);
  for (std::size_t r = 0; r < positions.size(); ++r) {
    double p = static_cast<double>(positions[r]);
    for (int i = 0; i < d; i += 2) {
      double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d));
      pe(static_cast<Eigen::Index>(r), i) = std::sin(p * freq);
      if (i + 1 < d) pe(static_cast<Eigen::Index>(r), i + 1) = std::cos(p * freq);
    }
  }
  return pe;
}

EncodedDialogue encode_layout(const SequenceLayout& layout, const EncoderParams& params,
                              const EncoderConfig& cfg) {
  Eigen::Index len = static_cast<Eigen::Index>(layout.tokens.size());
  if (len > cfg.max_seq_len)
    throw ContractError("encode: sequence length " + std::to_string(len) +
                        " exceeds the configured maximum " + std::to_string(cfg.max_seq_len));

  std::vector<Eigen::Index> tok_idx(layout.tokens.begin(), layout.tokens.end());
  std::vector<Eigen::Index> seg_idx(layout.segments.begin(), layout.segments.end());
  // embeddings scaled by sqrt(d) so content dominates the position signal
  double emb_scale = std::sqrt(static_cast<double>(cfg.d));
  Tensor x = add(scale(gather_rows(params.tok_emb, tok_idx), emb_scale),
                 gather_rows(params.seg_emb, seg_idx));
  x = add_mat(x, sinusoid_rows(layout.positions, cfg.d));

  // Additive mask. Padding columns and cross-option pairs get a large
  // negative score, which underflows to an exact zero attention weight
  // after the softmax.
  Mat mask = Mat::Zero(len, len);
  bool masked = false;
  for (Eigen::Index j = 0; j < len; ++j) {
    if (!layout.valid[static_cast<std::size_t>(j)]) {
      mask.col(j).setConstant(-1e30);
      masked = true;
    }
  }
  for (Eigen::Index i = 0; i < len; ++i) {
    int bi = layout.block[static_cast<std::size_t>(i)];
    if (bi < 0) continue;
    for (Eigen::Index j = 0; j < len; ++j) {
      int bj = layout.block[static_cast<std::size_t>(j)];
      if (bj >= 0 && bj != bi) {
        mask(i, j) = -1e30;
        masked = true;
      }
    }
  }

  for (const auto& block : params.layers)
    x = encoder_block(x, block, masked ? &mask : nullptr).out;

  EncodedDialogue enc;
  enc.token_vectors = x;
  enc.n_utterances = layout.n_utterances;
  enc.d = cfg.d;
  std::vector<Eigen::Index> utt(layout.cls_positions.begin(),
                                layout.cls_positions.begin() + layout.n_utterances);
  std::vector<Eigen::Index> opt(layout.cls_positions.begin() + layout.n_utterances,
                                layout.cls_positions.end());
  enc.utterance_summaries = gather_rows(x, utt);
  enc.option_summaries = gather_rows(x, opt);
  return enc;
}

EncodedDialogue encode(const DialogueExample& example, const EncoderParams& params,
                       const EncoderConfig& cfg) {
  return encode_layout(build_layout(example, cfg.max_turns), params, cfg);
}

}  // namespace dialgraph
