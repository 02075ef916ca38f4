#pragma once

#include <string>
#include <vector>

#include "dialgraph/param_store.hpp"
#include "dialgraph/tensor.hpp"

namespace dialgraph {

/// Soft mode mixes every relation by its classifier probability
/// (differentiable); hard mode routes each arc through its argmax type only,
/// with no gradient into the classifier.
enum class ArcMode { Soft, Hard };

struct UrrConfig {
  int d = 64;
  int projections = 16;  // scalar query/key/value projections per pair
  int arc_types = 8;
  int layers = 2;
  ArcMode mode = ArcMode::Soft;
};

/// Projection vectors and the arc-type classifier. Each of wq/wk/wv holds
/// the n projection vectors as rows.
struct RelationalAttentionParams {
  Tensor wq, wk, wv;      // n x d
  Tensor mlp_w1, mlp_b1;  // n x n, 1 x n
  Tensor mlp_w2, mlp_b2;  // n x T, 1 x T
};

/// One graph-convolution layer: a self transform plus one matrix per
/// relation type, all d x d in the math convention (applied as H * W^T).
struct RgcnLayerParams {
  Tensor self;
  std::vector<Tensor> rel;
};

struct UrrParams {
  RelationalAttentionParams attn;
  std::vector<RgcnLayerParams> layers;
};

UrrParams create_urr_params(ParameterStore& store, const UrrConfig& cfg);
UrrParams urr_params(const ParameterStore& store, const UrrConfig& cfg);

/// Directed arc between node indices (sources are always utterance nodes).
struct Arc {
  int src = 0;
  int dst = 0;
};

struct ArcTypeResult {
  std::vector<double> z;      // dependency vector, length n
  std::vector<double> probs;  // type distribution, length T, sums to 1
  int hard_type = 0;          // argmax with lowest-index tie-break
};

/// Typed dialogue graph: N utterance nodes then k option nodes, with one arc
/// per ordered (utterance, other-node) pair, so |arcs| = N(N-1) + kN. The
/// dependency vectors and type distributions stay on the autodiff tape.
struct RelationalGraph {
  int n_utterances = 0;
  int n_options = 0;
  std::vector<Arc> arcs;
  Tensor nodes;      // (N+k) x d initial node features
  Tensor z_all;      // |arcs| x n
  Tensor probs_all;  // |arcs| x T
  std::vector<int> hard_types;

  int n_nodes() const { return n_utterances + n_options; }
  ArcTypeResult arc_result(std::size_t i) const;
};

/// Dependency vector of a single ordered pair: scalar projections of the two
/// summary vectors, their scaled dot product, times the value projections.
Tensor relational_scores(const Tensor& h_src, const Tensor& h_dst,
                         const RelationalAttentionParams& params);

/// Classifies one dependency vector (1 x n) into a type distribution.
ArcTypeResult classify_arc(const Tensor& z, const RelationalAttentionParams& params);

/// Lowest-index argmax over one row.
int argmax_row(const Mat& row);

/// Builds the full graph from utterance and option node features and
/// classifies every arc in one batch.
RelationalGraph build_graph(const Tensor& utterances, const Tensor& options,
                            const RelationalAttentionParams& params);

/// One relational graph-convolution step. `arc_weights` is |arcs| x T: the
/// classifier distribution in soft mode, or a detached one-hot in hard mode.
/// Per relation, incoming messages are normalized by the total incoming
/// weight; nodes with no incoming weight for a relation skip it.
Tensor rgcn_layer(const Tensor& h, const std::vector<Arc>& arcs, const Tensor& arc_weights,
                  const RgcnLayerParams& params);

/// Detached one-hot arc weights for hard mode.
Tensor one_hot_weights(const std::vector<int>& hard_types, int n_types);

struct UrrOutput {
  Tensor utterances;  // N x d after reasoning
  Tensor options;     // k x d after reasoning
  RelationalGraph graph;
};

/// Graph construction plus a stack of graph-convolution layers. Arc types
/// always come from the summary vectors; `option_node_features` (when given)
/// replaces the option rows of the initial node matrix, e.g. with the
/// pre-reasoning comparator's output.
UrrOutput urr_forward(const Tensor& utterances, const Tensor& options, const UrrParams& params,
                      const UrrConfig& cfg, const Tensor* option_node_features = nullptr);

}  // namespace dialgraph
