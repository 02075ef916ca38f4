// encoder: layout, masking, summaries, gradients.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "dialgraph/encoder.hpp"
#include "dialgraph/grad_check.hpp"
#include "doctest.h"

using namespace dialgraph;

namespace {

DialogueExample tiny_example(int n_utterances) {
  DialogueExample ex;
  ex.id = "t";
  for (int n = 0; n < n_utterances; ++n)
    ex.utterances.push_back({3 + n, 4, 5});
  ex.options = {{6, 7}, {8}, {9, 4}, {5}};
  ex.answer = 0;
  return ex;
}

}  // namespace

TEST_CASE("summary counts match the sentence counts") {
  EncoderConfig cfg;
  cfg.d = 8;
  cfg.layers = 1;
  cfg.heads = 2;
  ParameterStore store(0);
  EncoderParams params = create_encoder_params(store, cfg, 16);

  for (int n : {1, 2, 5}) {
    EncodedDialogue enc = encode(tiny_example(n), params, cfg);
    CHECK(enc.utterance_summaries.rows() == n);
    CHECK(enc.option_summaries.rows() == 4);
    CHECK(enc.utterance_summaries.cols() == 8);
    CHECK(enc.option_summaries.cols() == 8);
  }
}

TEST_CASE("padding positions are inert bit for bit") {
  EncoderConfig cfg;
  cfg.d = 8;
  cfg.layers = 2;
  cfg.heads = 2;
  ParameterStore store(1);
  EncoderParams params = create_encoder_params(store, cfg, 16);

  SequenceLayout lay = build_layout(tiny_example(3));
  Mat base_u, base_o;
  {
    NoGradGuard ng;
    EncodedDialogue enc = encode_layout(lay, params, cfg);
    base_u = enc.utterance_summaries.value();
    base_o = enc.option_summaries.value();
  }

  // append a padding tail
  auto padded = lay;
  long next_pos = padded.positions.back() + 1;
  for (int k = 0; k < 5; ++k) {
    padded.tokens.push_back(Vocabulary::kPad);
    padded.segments.push_back(2);
    padded.positions.push_back(next_pos++);
    padded.valid.push_back(false);
    padded.block.push_back(-1);
  }
  Mat padded_u, padded_o;
  {
    NoGradGuard ng;
    EncodedDialogue enc = encode_layout(padded, params, cfg);
    padded_u = enc.utterance_summaries.value();
    padded_o = enc.option_summaries.value();
  }
  // masked positions change nothing beyond float noise against the unpadded run
  CHECK((padded_u - base_u).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((padded_o - base_o).cwiseAbs().maxCoeff() < 1e-12);

  // with the layout fixed, any rewrite of the padding token ids is invisible
  // bit for bit (their attention weights are exactly zero)
  for (long junk : {11L, 7L, 3L}) {
    padded.tokens[padded.tokens.size() - 2] = junk;
    padded.tokens[padded.tokens.size() - 4] = junk;
    NoGradGuard ng;
    EncodedDialogue enc = encode_layout(padded, params, cfg);
    CHECK(enc.utterance_summaries.value() == padded_u);
    CHECK(enc.option_summaries.value() == padded_o);
  }
  // permuting the pad-only tail (same positions, shuffled pad ids) is inert too
  auto shuffled = padded;
  std::swap(shuffled.tokens[shuffled.tokens.size() - 1],
            shuffled.tokens[shuffled.tokens.size() - 3]);
  NoGradGuard ng;
  EncodedDialogue enc = encode_layout(shuffled, params, cfg);
  CHECK(enc.utterance_summaries.value() == padded_u);
  CHECK(enc.option_summaries.value() == padded_o);
}

TEST_CASE("zero layers reduce summaries to the embedding sum") {
  EncoderConfig cfg;
  cfg.d = 8;
  cfg.layers = 0;
  cfg.heads = 2;
  ParameterStore store(2);
  EncoderParams params = create_encoder_params(store, cfg, 16);

  DialogueExample ex = tiny_example(2);
  SequenceLayout lay = build_layout(ex);
  EncodedDialogue enc = encode(ex, params, cfg);

  Mat pe = sinusoid_rows(lay.positions, cfg.d);
  for (int s = 0; s < 2; ++s) {
    Eigen::Index cls = lay.cls_positions[static_cast<std::size_t>(s)];
    Mat want = std::sqrt(static_cast<double>(cfg.d)) *
                   params.tok_emb.value().row(Vocabulary::kCls) +
               params.seg_emb.value().row(lay.segments[static_cast<std::size_t>(cls)]) +
               pe.row(cls);
    CHECK(enc.utterance_summaries.value().row(s) == want);
  }
}

TEST_CASE("option blocks share position and segment patterns") {
  SequenceLayout lay = build_layout(tiny_example(2));
  std::size_t o1 = static_cast<std::size_t>(lay.cls_positions[2]);
  std::size_t o2 = static_cast<std::size_t>(lay.cls_positions[3]);
  CHECK(lay.positions[o1] == lay.positions[o2]);
  CHECK(lay.segments[o1] == 12);  // shared option row
  CHECK(lay.segments[o2] == 12);
  CHECK(lay.segments[static_cast<std::size_t>(lay.cls_positions[0])] == 0);
  CHECK(lay.segments[static_cast<std::size_t>(lay.cls_positions[1])] == 1);
  CHECK(lay.block[o1] == 0);
  CHECK(lay.block[o2] == 1);
  // utterance positions strictly increase across sentences
  CHECK(lay.positions[static_cast<std::size_t>(lay.cls_positions[1])] >
        lay.positions[static_cast<std::size_t>(lay.cls_positions[0])]);
}

TEST_CASE("options with different content get different summaries") {
  EncoderConfig cfg;
  cfg.d = 8;
  cfg.layers = 1;
  cfg.heads = 2;
  ParameterStore store(8);
  EncoderParams params = create_encoder_params(store, cfg, 16);
  NoGradGuard ng;
  EncodedDialogue enc = encode(tiny_example(2), params, cfg);
  const Mat& s = enc.option_summaries.value();
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j)
      CHECK((s.row(i) - s.row(j)).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("sequence length errors carry the counts") {
  EncoderConfig cfg;
  cfg.d = 8;
  cfg.layers = 0;
  cfg.heads = 2;
  cfg.max_seq_len = 10;
  ParameterStore store(3);
  EncoderParams params = create_encoder_params(store, cfg, 16);
  CHECK_THROWS_WITH_AS(encode(tiny_example(4), params, cfg), doctest::Contains("10"),
                       ContractError);
}

TEST_CASE("gradients flow through the encoder") {
  EncoderConfig cfg;
  cfg.d = 8;
  cfg.layers = 1;
  cfg.heads = 2;
  ParameterStore store(4);
  EncoderParams params = create_encoder_params(store, cfg, 12);
  DialogueExample ex = tiny_example(2);

  auto fn = [&]() {
    EncodedDialogue enc = encode(ex, params, cfg);
    return mean(mul(enc.option_summaries, enc.option_summaries));
  };
  GradCheckResult r = finite_diff_check(fn, store, 1e-5);
  INFO(r.worst_param);
  CHECK(r.max_rel_error < 1e-4);
}
