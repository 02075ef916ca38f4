#include "dialgraph/attention.hpp"

#include <cmath>

namespace dialgraph {

AttentionOutput multihead_attention(const Tensor& x, const AttentionParams& params,
                                    const Mat* mask) {
  Eigen::Index d = x.cols();
  int h = params.heads;
  if (h < 1 || d % h != 0)
    throw ConfigError("multihead_attention: head count " + std::to_string(h) +
                      " must divide model dimension " + std::to_string(d));
  Eigen::Index dh = d / h;
  double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor q = matmul(x, params.wq);
  Tensor k = matmul(x, params.wk);
  Tensor v = matmul(x, params.wv);

  std::vector<Tensor> heads;
  heads.reserve(static_cast<std::size_t>(h));
  Mat avg = Mat::Zero(x.rows(), x.rows());
  for (int i = 0; i < h; ++i) {
    Tensor qi = slice(q, 0, x.rows(), i * dh, dh);
    Tensor ki = slice(k, 0, x.rows(), i * dh, dh);
    Tensor vi = slice(v, 0, x.rows(), i * dh, dh);
    Tensor scores = scale(matmul(qi, transpose(ki)), inv_scale);
    if (mask) scores = add_mat(scores, *mask);
    Tensor weights = softmax(scores, 1);
    avg += weights.value();
    heads.push_back(matmul(weights, vi));
  }
  avg /= static_cast<double>(h);

  AttentionOutput out;
  out.out = matmul(concat(heads, 1), params.wo);
  out.weights = std::move(avg);
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  Tensor centered = sub(x, row_mean(x));
  Tensor variance = row_mean(mul(centered, centered));
  Tensor inv_std = pow_const(add_scalar(variance, eps), -0.5);
  return add(mul(mul(centered, inv_std), gamma), beta);
}

AttentionOutput encoder_block(const Tensor& x, const BlockParams& params, const Mat* mask) {
  AttentionOutput mha = multihead_attention(x, params.attn, mask);
  Tensor a = layer_norm(add(x, mha.out), params.ln1_gamma, params.ln1_beta);
  Tensor ff = add(matmul(relu(add(matmul(a, params.ff_w1), params.ff_b1)), params.ff_w2),
                  params.ff_b2);
  AttentionOutput out;
  out.out = layer_norm(add(a, ff), params.ln2_gamma, params.ln2_beta);
  out.weights = std::move(mha.weights);
  return out;
}

BlockParams create_block_params(ParameterStore& store, const std::string& prefix, int d,
                                int heads, int ff_mult) {
  BlockParams p;
  p.attn.heads = heads;
  p.attn.wq = store.create(prefix + ".attn.wq", d, d, Init::XavierUniform);
  p.attn.wk = store.create(prefix + ".attn.wk", d, d, Init::XavierUniform);
  p.attn.wv = store.create(prefix + ".attn.wv", d, d, Init::XavierUniform);
  // Small output projections keep each residual branch quiet at the start,
  // so a freshly initialized block is close to a pass-through.
  p.attn.wo = store.create(prefix + ".attn.wo", d, d, Init::XavierUniform);
  p.attn.wo.value_mut() *= 0.1;
  p.ff_w1 = store.create(prefix + ".ff.w1", d, ff_mult * d, Init::XavierUniform);
  p.ff_b1 = store.create(prefix + ".ff.b1", 1, ff_mult * d, Init::Zeros);
  p.ff_w2 = store.create(prefix + ".ff.w2", ff_mult * d, d, Init::XavierUniform);
  p.ff_w2.value_mut() *= 0.1;
  p.ff_b2 = store.create(prefix + ".ff.b2", 1, d, Init::Zeros);
  p.ln1_gamma = store.create(prefix + ".ln1.gamma", 1, d, Init::Ones);
  p.ln1_beta = store.create(prefix + ".ln1.beta", 1, d, Init::Zeros);
  p.ln2_gamma = store.create(prefix + ".ln2.gamma", 1, d, Init::Ones);
  p.ln2_beta = store.create(prefix + ".ln2.beta", 1, d, Init::Zeros);
  return p;
}

BlockParams block_params(const ParameterStore& store, const std::string& prefix, int heads) {
  BlockParams p;
  p.attn.heads = heads;
  p.attn.wq = store.get(prefix + ".attn.wq");
  p.attn.wk = store.get(prefix + ".attn.wk");
  p.attn.wv = store.get(prefix + ".attn.wv");
  p.attn.wo = store.get(prefix + ".attn.wo");
  p.ff_w1 = store.get(prefix + ".ff.w1");
  p.ff_b1 = store.get(prefix + ".ff.b1");
  p.ff_w2 = store.get(prefix + ".ff.w2");
  p.ff_b2 = store.get(prefix + ".ff.b2");
  p.ln1_gamma = store.get(prefix + ".ln1.gamma");
  p.ln1_beta = store.get(prefix + ".ln1.beta");
  p.ln2_gamma = store.get(prefix + ".ln2.gamma");
  p.ln2_beta = store.get(prefix + ".ln2.beta");
  return p;
}

}  // namespace dialgraph
