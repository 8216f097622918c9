#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "kkl/ode.hpp"

namespace kkl {

enum class Activation { Tanh };

std::string to_string(Activation act);
Activation activation_from_string(const std::string& name);

// Fully connected network: tanh on every hidden layer, linear output layer.
// weights[l] maps layer l to layer l + 1 and has shape
// layer_sizes[l + 1] x layer_sizes[l].
struct MlpParams {
  std::vector<int> layer_sizes;
  std::vector<Mat> weights;
  std::vector<Vec> biases;
  Activation activation = Activation::Tanh;

  int n_in() const { return layer_sizes.front(); }
  int n_out() const { return layer_sizes.back(); }
  std::size_t num_layers() const { return weights.size(); }
  std::size_t parameter_count() const;

  // Throws DimensionError on inconsistent shapes, DivergenceError on
  // non-finite entries.
  void validate() const;

  // Per layer: W in column-major order, then b.
  Vec flatten() const;
  void assign(const Vec& flat);

  // FNV-1a over the raw parameter bytes.
  std::uint64_t checksum() const;
};

struct FlatGradient {
  Vec values;
};

// [n_in, hidden..., n_out]
std::vector<int> mlp_layout(int n_in, int hidden_layers, int layer_size, int n_out);

MlpParams zero_params(const std::vector<int>& layer_sizes);

// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
MlpParams init_params(const std::vector<int>& layer_sizes, std::uint64_t seed);

Vec forward(const MlpParams& p, const Vec& x);

// Exact n_out x n_in Jacobian by forward-mode accumulation.
Mat input_jacobian(const MlpParams& p, const Vec& x);

// Columns of X are samples. Returns n_out x batch.
Mat forward_batch(const MlpParams& p, const Mat& X);

// Primal outputs and directional derivatives J(x_j) v_j for every column j.
struct TangentOutputs {
  Mat values;
  Mat tangents;
};
TangentOutputs forward_tangent_batch(const MlpParams& p, const Mat& X, const Mat& V);

// Loss contribution of a contiguous block of samples [col0, col0 + Y.cols()).
// Must fill dL/dY and, when tangents are in play, dL/dYdot (same shapes as Y),
// and return the block's loss value. The total loss is the sum over blocks,
// so the loss has to be additive across samples.
using BlockLoss = std::function<double(Eigen::Index col0, const Mat& Y, const Mat* Ydot,
                                       Mat& dY, Mat* dYdot)>;

struct LossAndGradient {
  double value = 0.0;
  FlatGradient gradient;
};

// Exact gradient of the loss with respect to every weight and bias. When V is
// given, the loss may also depend on J(x_j) v_j and the gradient includes the
// mixed parameter/input second derivatives. Samples are processed in fixed
// blocks in parallel; the reduction order does not depend on the thread count.
LossAndGradient loss_gradient(const MlpParams& p, const Mat& X, const Mat* V,
                              const BlockLoss& loss);

// Product of per-layer spectral norms (tanh is 1-Lipschitz).
double lipschitz_upper_bound(const MlpParams& p);

// Largest singular value by power iteration on W^T W. Converges from below,
// so it is only an estimate.
double spectral_norm_power(const Mat& W, int max_iter = 100, double tol = 1e-9);

// Exact largest singular value via a symmetric eigensolve of the smaller Gram
// matrix.
double spectral_norm(const Mat& W);

// Fixed sample block width used by the batched kernels.
inline constexpr Eigen::Index kBlockSize = 64;

}  // namespace kkl
