#pragma once

#include <string>
#include <vector>

#include "dialgraph/attention.hpp"
#include "dialgraph/data.hpp"
#include "dialgraph/param_store.hpp"

namespace dialgraph {

struct EncoderConfig {
  int d = 64;
  int layers = 2;
  int heads = 4;
  int max_seq_len = 512;
  int max_turns = 12;
};

/// Token-level encoder weights: embeddings plus a stack of encoder blocks.
/// Positions are sinusoidal (not learned); the segment table has one learned
/// row per utterance turn index plus a shared option row.
struct EncoderParams {
  Tensor tok_emb;  // vocab x d
  Tensor seg_emb;  // 3 x d
  std::vector<BlockParams> layers;
  int heads = 1;
};

EncoderParams create_encoder_params(ParameterStore& store, const EncoderConfig& cfg,
                                    long vocab_size);
EncoderParams encoder_params(const ParameterStore& store, const EncoderConfig& cfg);

/// Flattened input sequence. A summary token is inserted before every
/// sentence. Option order must stay invisible to the encoder, so every
/// option block restarts at the same base position and option tokens attend
/// only to the dialogue and their own block (options never see each other
/// here; comparing options is the comparator's job).
struct SequenceLayout {
  std::vector<long> tokens;
  std::vector<long> segments;        // row index into seg_emb
  std::vector<long> positions;       // sinusoidal position per token
  std::vector<bool> valid;           // false = padding, masked out of attention
  std::vector<int> block;            // -1 = dialogue, 0..3 = option block
  std::vector<Eigen::Index> cls_positions;  // N utterance summaries then 4 options
  int n_utterances = 0;
};

/// Utterance n gets segment row n; every option shares row `max_turns`.
SequenceLayout build_layout(const DialogueExample& example, int max_turns = 12);

struct EncodedDialogue {
  Tensor token_vectors;       // L x d, all positions
  Tensor utterance_summaries; // N x d
  Tensor option_summaries;    // 4 x d
  int n_utterances = 0;
  int d = 0;
};

/// Runs the encoder over an explicit layout (tests use this to append
/// padding); padding positions are masked out of every attention row.
EncodedDialogue encode_layout(const SequenceLayout& layout, const EncoderParams& params,
                              const EncoderConfig& cfg);

/// Encoder front door: layout + blocks + summary extraction.
EncodedDialogue encode(const DialogueExample& example, const EncoderParams& params,
                       const EncoderConfig& cfg);

/// Sinusoidal position encoding rows for the given positions.
Mat sinusoid_rows(const std::vector<long>& positions, int d);

}  // namespace dialgraph
