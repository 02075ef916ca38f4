#include "dialgraph/urr.hpp"

#include <cmath>

namespace dialgraph {

UrrParams create_urr_params(ParameterStore& store, const UrrConfig& cfg) {
  UrrParams p;
  p.attn.wq = store.create("urr.attn.wq", cfg.projections, cfg.d, Init::XavierUniform);
  p.attn.wk = store.create("urr.attn.wk", cfg.projections, cfg.d, Init::XavierUniform);
  p.attn.wv = store.create("urr.attn.wv", cfg.projections, cfg.d, Init::XavierUniform);
  p.attn.mlp_w1 = store.create("urr.mlp.w1", cfg.projections, cfg.projections, Init::XavierUniform);
  p.attn.mlp_b1 = store.create("urr.mlp.b1", 1, cfg.projections, Init::Zeros);
  p.attn.mlp_w2 = store.create("urr.mlp.w2", cfg.projections, cfg.arc_types, Init::XavierUniform);
  p.attn.mlp_b2 = store.create("urr.mlp.b2", 1, cfg.arc_types, Init::Zeros);
  for (int l = 0; l < cfg.layers; ++l) {
    RgcnLayerParams lp;
    std::string prefix = "urr.rgcn.l" + std::to_string(l);
    // The layer sums T+1 transforms of highly correlated messages, so plain
    // symmetric init amplifies the node-common component by ~T per layer and
    // drowns the per-node signal. Start from a residual-like point instead:
    // identity self transform, relation matrices scaled down by T.
    lp.self = store.create(prefix + ".self", cfg.d, cfg.d, Init::Zeros);
    lp.self.value_mut() = Mat::Identity(cfg.d, cfg.d);
    for (int r = 0; r < cfg.arc_types; ++r) {
      Tensor w = store.create(prefix + ".rel" + std::to_string(r), cfg.d, cfg.d,
                              Init::XavierUniform);
      w.value_mut() *= 1.0 / static_cast<double>(cfg.arc_types);
      lp.rel.push_back(w);
    }
    p.layers.push_back(std::move(lp));
  }
  return p;
}

UrrParams urr_params(const ParameterStore& store, const UrrConfig& cfg) {
  UrrParams p;
  p.attn.wq = store.get("urr.attn.wq");
  p.attn.wk = store.get("urr.attn.wk");
  p.attn.wv = store.get("urr.attn.wv");
  p.attn.mlp_w1 = store.get("urr.mlp.w1");
  p.attn.mlp_b1 = store.get("urr.mlp.b1");
  p.attn.mlp_w2 = store.get("urr.mlp.w2");
  p.attn.mlp_b2 = store.get("urr.mlp.b2");
  for (int l = 0; l < cfg.layers; ++l) {
    RgcnLayerParams lp;
    std::string prefix = "urr.rgcn.l" + std::to_string(l);
    lp.self = store.get(prefix + ".self");
    for (int r = 0; r < cfg.arc_types; ++r) lp.rel.push_back(store.get(prefix + ".rel" + std::to_string(r)));
    p.layers.push_back(std::move(lp));
  }
  return p;
}

int argmax_row(const Mat& row) {
  int best = 0;
  for (Eigen::Index j = 1; j < row.cols(); ++j)
    if (row(0, j) > row(0, best)) best = static_cast<int>(j);
  return best;
}

Tensor relational_scores(const Tensor& h_src, const Tensor& h_dst,
                         const RelationalAttentionParams& params) {
  double inv_scale = 1.0 / std::sqrt(static_cast<double>(h_src.cols()));
  Tensor q = matmul(h_src, transpose(params.wq));  // 1 x n
  Tensor k = matmul(h_dst, transpose(params.wk));
  Tensor v = matmul(h_dst, transpose(params.wv));
  Tensor compat = scale(matmul(q, transpose(k)), inv_scale);  // 1 x 1
  return mul(compat, v);
}

namespace {

Tensor classifier_logits(const Tensor& z, const RelationalAttentionParams& params) {
  Tensor hidden = relu(add(matmul(z, params.mlp_w1), params.mlp_b1));
  return add(matmul(hidden, params.mlp_w2), params.mlp_b2);
}

std::vector<double> row_to_vec(const Mat& m, Eigen::Index r) {
  std::vector<double> out(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j) out[static_cast<std::size_t>(j)] = m(r, j);
  return out;
}

}  // namespace

ArcTypeResult classify_arc(const Tensor& z, const RelationalAttentionParams& params) {
  Tensor probs = softmax(classifier_logits(z, params), 1);
  ArcTypeResult res;
  res.z = row_to_vec(z.value(), 0);
  res.probs = row_to_vec(probs.value(), 0);
  res.hard_type = argmax_row(probs.value());
  return res;
}

ArcTypeResult RelationalGraph::arc_result(std::size_t i) const {
  ArcTypeResult res;
  res.z = row_to_vec(z_all.value(), static_cast<Eigen::Index>(i));
  res.probs = row_to_vec(probs_all.value(), static_cast<Eigen::Index>(i));
  res.hard_type = hard_types[i];
  return res;
}

RelationalGraph build_graph(const Tensor& utterances, const Tensor& options,
                            const RelationalAttentionParams& params) {
  int n_utt = static_cast<int>(utterances.rows());
  int n_opt = static_cast<int>(options.rows());
  if (n_utt < 1) throw ContractError("build_graph: need at least one utterance node");

  RelationalGraph g;
  g.n_utterances = n_utt;
  g.n_options = n_opt;
  g.nodes = concat({utterances, options}, 0);
  int n_all = n_utt + n_opt;

  std::vector<Eigen::Index> flat_idx;
  std::vector<Eigen::Index> dst_idx;
  for (int s = 0; s < n_utt; ++s) {
    for (int e = 0; e < n_all; ++e) {
      if (e == s) continue;
      g.arcs.push_back({s, e});
      flat_idx.push_back(static_cast<Eigen::Index>(s) * n_all + e);
      dst_idx.push_back(e);
    }
  }

  double inv_scale = 1.0 / std::sqrt(static_cast<double>(utterances.cols()));
  Tensor q = matmul(utterances, transpose(params.wq));  // N x n
  Tensor k = matmul(g.nodes, transpose(params.wk));     // (N+k) x n
  Tensor v = matmul(g.nodes, transpose(params.wv));
  Tensor compat = scale(matmul(q, transpose(k)), inv_scale);  // N x (N+k)

  Tensor compat_per_arc =
      gather_rows(reshape(compat, static_cast<Eigen::Index>(n_utt) * n_all, 1), flat_idx);
  g.z_all = mul(compat_per_arc, gather_rows(v, dst_idx));  // |arcs| x n
  g.probs_all = softmax(classifier_logits(g.z_all, params), 1);

  const Mat& pv = g.probs_all.value();
  g.hard_types.reserve(g.arcs.size());
  for (Eigen::Index a = 0; a < pv.rows(); ++a) {
    Mat row = pv.row(a);
    g.hard_types.push_back(argmax_row(row));
  }
  return g;
}

Tensor one_hot_weights(const std::vector<int>& hard_types, int n_types) {
  Mat w = Mat::Zero(static_cast<Eigen::Index>(hard_types.size()), n_types);
  for (std::size_t a = 0; a < hard_types.size(); ++a)
    w(static_cast<Eigen::Index>(a), hard_types[a]) = 1.0;
  return Tensor::constant(std::move(w));
}

Tensor rgcn_layer(const Tensor& h, const std::vector<Arc>& arcs, const Tensor& arc_weights,
                  const RgcnLayerParams& params) {
  Eigen::Index n = h.rows();
  int n_types = static_cast<int>(params.rel.size());
  if (arc_weights.rows() != static_cast<Eigen::Index>(arcs.size()) ||
      arc_weights.cols() != n_types)
    throw DimensionError("rgcn_layer: arc weights " + shape_str(arc_weights.value()) +
                         " do not match " + std::to_string(arcs.size()) + " arcs x " +
                         std::to_string(n_types) + " types");

  Tensor total = matmul(h, transpose(params.self));
  if (!arcs.empty()) {
    // Constant 0/1 scatter matrix: row dst*n+src marks arc (src -> dst).
    Mat sel = Mat::Zero(n * n, static_cast<Eigen::Index>(arcs.size()));
    for (std::size_t a = 0; a < arcs.size(); ++a)
      sel(static_cast<Eigen::Index>(arcs[a].dst) * n + arcs[a].src,
          static_cast<Eigen::Index>(a)) = 1.0;
    Tensor sel_t = Tensor::constant(std::move(sel));

    for (int r = 0; r < n_types; ++r) {
      Tensor w_r = slice(arc_weights, 0, arc_weights.rows(), r, 1);
      Tensor adj = reshape(matmul(sel_t, w_r), n, n);  // adj(dst, src)
      Tensor in_mass = row_sum(adj);
      // Rows with exactly zero incoming mass skip this relation: bumping
      // their denominator to 1 leaves 0/1 = 0 contributions.
      Mat bump = Mat::Zero(n, 1);
      const Mat& mass = in_mass.value();
      for (Eigen::Index i = 0; i < n; ++i)
        if (mass(i, 0) == 0.0) bump(i, 0) = 1.0;
      Tensor norm = mul(adj, pow_const(add_mat(in_mass, bump), -1.0));
      total = add(total, matmul(matmul(norm, h), transpose(params.rel[static_cast<std::size_t>(r)])));
    }
  }
  return relu(total);
}

UrrOutput urr_forward(const Tensor& utterances, const Tensor& options, const UrrParams& params,
                      const UrrConfig& cfg, const Tensor* option_node_features) {
  if (cfg.layers < 1) throw ConfigError("urr_forward: need at least one graph layer");
  UrrOutput out;
  out.graph = build_graph(utterances, options, params.attn);
  Tensor weights = (cfg.mode == ArcMode::Soft)
                       ? out.graph.probs_all
                       : one_hot_weights(out.graph.hard_types, cfg.arc_types);
  Tensor h = option_node_features ? concat({utterances, *option_node_features}, 0)
                                  : out.graph.nodes;
  if (h.rows() != out.graph.nodes.rows() || h.cols() != out.graph.nodes.cols())
    throw DimensionError("urr_forward: option node features " +
                         shape_str(option_node_features->value()) + " do not fit the graph");
  for (const auto& layer : params.layers) h = rgcn_layer(h, out.graph.arcs, weights, layer);
  out.utterances = slice(h, 0, out.graph.n_utterances, 0, h.cols());
  out.options = slice(h, out.graph.n_utterances, out.graph.n_options, 0, h.cols());
  return out;
}

}  // namespace dialgraph
