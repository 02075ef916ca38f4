#pragma once

#include <optional>
#include <string>

#include "dialgraph/param_store.hpp"
#include "dialgraph/tensor.hpp"

namespace dialgraph {

/// Multi-head self-attention weights. The per-head projections are column
/// slices of packed d x d matrices.
struct AttentionParams {
  Tensor wq, wk, wv, wo;  // each d x d
  int heads = 1;
};

/// Feedforward + layer-norm weights of one encoder block.
struct BlockParams {
  AttentionParams attn;
  Tensor ff_w1, ff_b1;  // d x 4d, 1 x 4d
  Tensor ff_w2, ff_b2;  // 4d x d, 1 x d
  Tensor ln1_gamma, ln1_beta;
  Tensor ln2_gamma, ln2_beta;
};

struct AttentionOutput {
  Tensor out;   // m x d
  Mat weights;  // m x m post-softmax attention, averaged over heads
};

/// Scaled dot-product multi-head self-attention over the rows of x (m x d).
/// Each head is scaled by sqrt(d / heads). An optional additive mask (m x m)
/// is applied to the scores before the softmax.
AttentionOutput multihead_attention(const Tensor& x, const AttentionParams& params,
                                    const Mat* mask = nullptr);

/// Row-wise layer normalization with learned gain and bias (1 x d each).
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

/// Post-norm encoder block: LN(x + MHA(x)) then LN(+ feedforward).
AttentionOutput encoder_block(const Tensor& x, const BlockParams& params,
                              const Mat* mask = nullptr);

/// Registers one block's parameters under `prefix` (e.g. "enc.l0").
BlockParams create_block_params(ParameterStore& store, const std::string& prefix, int d,
                                int heads, int ff_mult = 4);
/// Fetches a block registered by create_block_params.
BlockParams block_params(const ParameterStore& store, const std::string& prefix, int heads);

}  // namespace dialgraph
