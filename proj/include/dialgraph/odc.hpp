#pragma once

#include <string>
#include <vector>

#include "dialgraph/attention.hpp"

namespace dialgraph {

enum class Comparator { Before, After };

/// Option comparator: a stack of encoder blocks applied to the 4 option
/// vectors, with no positional encoding, so option order cannot leak in.
/// The before and after comparators are two disjoint parameter sets.
struct ComparatorParams {
  std::vector<BlockParams> blocks;
  int heads = 1;
};

struct OdcParams {
  ComparatorParams before;
  ComparatorParams after;
};

struct OdcConfig {
  int d = 64;
  int heads = 4;
  int depth = 1;
};

OdcParams create_odc_params(ParameterStore& store, const OdcConfig& cfg, bool with_before,
                            bool with_after);
ComparatorParams comparator_params(const ParameterStore& store, Comparator which,
                                   const OdcConfig& cfg);

struct ComparatorOutput {
  Tensor out;   // 4 x d
  Mat weights;  // 4 x 4 head-averaged attention of the last block
};

/// One dual-comparison pass over exactly 4 option rows.
ComparatorOutput compare_options(const Tensor& option_vectors, const ComparatorParams& params);

/// The post-softmax 4 x 4 attention matrix, bit-identical to the one used
/// inside compare_options on the same inputs.
Mat extract_attention(const Tensor& option_vectors, const ComparatorParams& params);

}  // namespace dialgraph
