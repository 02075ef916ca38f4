#include "dialgraph/odc.hpp"

namespace dialgraph {

namespace {

std::string comparator_prefix(Comparator which, int block) {
  return std::string("odc.") + (which == Comparator::Before ? "before" : "after") + ".b" +
         std::to_string(block);
}

}  // namespace

OdcParams create_odc_params(ParameterStore& store, const OdcConfig& cfg, bool with_before,
                            bool with_after) {
  OdcParams p;
  p.before.heads = p.after.heads = cfg.heads;
  // The pre-reasoning comparator starts out mixing the options (symmetric
  // init); the post-reasoning one starts with identity query/key
  // projections, i.e. each option's attention anchored on itself. Uniform
  // mixing after reasoning smears the per-option evidence the graph just
  // gathered, while the self-anchored start keeps options separable and
  // lets training grow the cross-option comparison.
  for (int b = 0; b < cfg.depth; ++b) {
    if (with_before)
      p.before.blocks.push_back(create_block_params(
          store, comparator_prefix(Comparator::Before, b), cfg.d, cfg.heads));
    if (with_after) {
      p.after.blocks.push_back(create_block_params(
          store, comparator_prefix(Comparator::After, b), cfg.d, cfg.heads));
      p.after.blocks.back().attn.wq.value_mut() = Mat::Identity(cfg.d, cfg.d);
      p.after.blocks.back().attn.wk.value_mut() = Mat::Identity(cfg.d, cfg.d);
    }
  }
  return p;
}

ComparatorParams comparator_params(const ParameterStore& store, Comparator which,
                                   const OdcConfig& cfg) {
  ComparatorParams p;
  p.heads = cfg.heads;
  for (int b = 0; b < cfg.depth; ++b)
    p.blocks.push_back(block_params(store, comparator_prefix(which, b), cfg.heads));
  return p;
}

ComparatorOutput compare_options(const Tensor& option_vectors, const ComparatorParams& params) {
  if (option_vectors.rows() != 4)
    throw ContractError("compare_options: expected 4 option rows, got " +
                        std::to_string(option_vectors.rows()));
  if (params.blocks.empty()) throw ContractError("compare_options: comparator has no blocks");
  ComparatorOutput out;
  out.out = option_vectors;
  for (const auto& block : params.blocks) {
    AttentionOutput r = encoder_block(out.out, block);
    out.out = r.out;
    out.weights = std::move(r.weights);
  }
  return out;
}

Mat extract_attention(const Tensor& option_vectors, const ComparatorParams& params) {
  return compare_options(option_vectors, params).weights;
}

}  // namespace dialgraph
