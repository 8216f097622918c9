#pragma once

#include "kkl/mlp.hpp"

// Serial one-sample-at-a-time implementation with explicit loops and no
// matrix-product kernels. Kept as the reference the batched OpenMP kernels
// are tested and benchmarked against.
namespace kkl::reference {

struct SampleTangent {
  Vec value;
  Vec tangent;
};

SampleTangent forward_tangent(const MlpParams& p, const Vec& x, const Vec& v);

// Same contract as kkl::loss_gradient; the loss is called once per sample
// with single-column blocks.
LossAndGradient loss_gradient(const MlpParams& p, const Mat& X, const Mat* V,
                              const BlockLoss& loss);

}  // namespace kkl::reference
