#include "kkl/mlp.hpp"

#include <cmath>
#include <cstring>
#include <random>

#include <fmt/format.h>

#include "kkl/error.hpp"

namespace kkl {

namespace {

// Activations of one block of samples. h[l] is the input of layer l (h[0] is
// the network input, h[L] the output). With tangents, hd[l] is the tangent of
// h[l] and ad[l] the tangent of the pre-activation of hidden layer l.
struct BlockCache {
  std::vector<Mat> h;
  std::vector<Mat> hd;
  std::vector<Mat> ad;
};

void run_block(const MlpParams& p, const Eigen::Ref<const Mat>& X, const Mat* V,
               Eigen::Index col0, BlockCache& c) {
  const std::size_t L = p.num_layers();
  c.h.resize(L + 1);
  c.h[0] = X;
  const bool tangent = V != nullptr;
  if (tangent) {
    c.hd.resize(L + 1);
    c.ad.resize(L);
    c.hd[0] = V->middleCols(col0, X.cols());
  }
  for (std::size_t l = 0; l < L; ++l) {
    Mat a = p.weights[l] * c.h[l];
    a.colwise() += p.biases[l];
    const bool hidden = l + 1 < L;
    if (hidden) {
      c.h[l + 1] = a.array().tanh().matrix();
    } else {
      c.h[l + 1] = std::move(a);
    }
    if (tangent) {
      c.ad[l] = p.weights[l] * c.hd[l];
      if (hidden) {
        c.hd[l + 1] = ((1.0 - c.h[l + 1].array().square()) * c.ad[l].array()).matrix();
      } else {
        c.hd[l + 1] = c.ad[l];
      }
    }
  }
}

// Accumulates the parameter gradient of one block into `grad` (flat layout).
void backprop_block(const MlpParams& p, const BlockCache& c, Mat gA, Mat* gAd, double* grad) {
  const std::size_t L = p.num_layers();
  std::vector<std::size_t> offsets(L);
  std::size_t off = 0;
  for (std::size_t l = 0; l < L; ++l) {
    offsets[l] = off;
    off += static_cast<std::size_t>(p.weights[l].size() + p.biases[l].size());
  }
  for (std::size_t l = L; l-- > 0;) {
    const Mat& W = p.weights[l];
    Eigen::Map<Mat> dW(grad + offsets[l], W.rows(), W.cols());
    Eigen::Map<Vec> db(grad + offsets[l] + W.size(), W.rows());
    dW.noalias() += gA * c.h[l].transpose();
    if (gAd != nullptr) dW.noalias() += *gAd * c.hd[l].transpose();
    db += gA.rowwise().sum();
    if (l == 0) break;

    const auto h = c.h[l].array();
    const Mat s = (1.0 - h.square()).matrix();
    Mat gH = W.transpose() * gA;
    if (gAd != nullptr) {
      const Mat gHd = W.transpose() * *gAd;
      // hd = s * ad with s = 1 - h^2, so d(hd)/dh = -2 h ad.
      gH.array() -= 2.0 * h * gHd.array() * c.ad[l - 1].array();
      *gAd = (s.array() * gHd.array()).matrix();
    }
    gA = (s.array() * gH.array()).matrix();
  }
}

Eigen::Index block_count(Eigen::Index n) { return (n + kBlockSize - 1) / kBlockSize; }

}  // namespace

std::string to_string(Activation act) {
  switch (act) {
    case Activation::Tanh:
      return "tanh";
  }
  return "tanh";
}

Activation activation_from_string(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  throw ConfigError(fmt::format("unsupported activation '{}' (only tanh)", name));
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
  }
  return n;
}

void MlpParams::validate() const {
  if (layer_sizes.size() < 2) throw DimensionError("network needs at least input and output sizes");
  if (weights.size() + 1 != layer_sizes.size() || biases.size() != weights.size()) {
    throw DimensionError("network layer count does not match layer_sizes");
  }
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (layer_sizes[l] < 1 || layer_sizes[l + 1] < 1) throw DimensionError("layer sizes must be positive");
    if (weights[l].rows() != layer_sizes[l + 1] || weights[l].cols() != layer_sizes[l] ||
        biases[l].size() != layer_sizes[l + 1]) {
      throw DimensionError(fmt::format("layer {} has inconsistent weight/bias shapes", l));
    }
    if (!weights[l].allFinite() || !biases[l].allFinite()) {
      throw DivergenceError(fmt::format("layer {} has non-finite parameters", l));
    }
  }
}

Vec MlpParams::flatten() const {
  Vec flat(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index off = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    flat.segment(off, weights[l].size()) = Eigen::Map<const Vec>(weights[l].data(), weights[l].size());
    off += weights[l].size();
    flat.segment(off, biases[l].size()) = biases[l];
    off += biases[l].size();
  }
  return flat;
}

void MlpParams::assign(const Vec& flat) {
  if (flat.size() != static_cast<Eigen::Index>(parameter_count())) {
    throw DimensionError("flat parameter vector has the wrong length");
  }
  Eigen::Index off = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    Eigen::Map<Vec>(weights[l].data(), weights[l].size()) = flat.segment(off, weights[l].size());
    off += weights[l].size();
    biases[l] = flat.segment(off, biases[l].size());
    off += biases[l].size();
  }
}

std::uint64_t MlpParams::checksum() const {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  auto mix = [&hash](const double* data, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) {
      std::uint64_t bits;
      std::memcpy(&bits, data + i, sizeof bits);
      for (int b = 0; b < 8; ++b) {
        hash ^= (bits >> (8 * b)) & 0xffU;
        hash *= 0x100000001b3ULL;
      }
    }
  };
  for (std::size_t l = 0; l < weights.size(); ++l) {
    mix(weights[l].data(), weights[l].size());
    mix(biases[l].data(), biases[l].size());
  }
  return hash;
}

std::vector<int> mlp_layout(int n_in, int hidden_layers, int layer_size, int n_out) {
  if (n_in < 1 || n_out < 1 || hidden_layers < 0 || (hidden_layers > 0 && layer_size < 1)) {
    throw ConfigError("invalid network layout");
  }
  std::vector<int> sizes{n_in};
  for (int i = 0; i < hidden_layers; ++i) sizes.push_back(layer_size);
  sizes.push_back(n_out);
  return sizes;
}

MlpParams zero_params(const std::vector<int>& layer_sizes) {
  MlpParams p;
  p.layer_sizes = layer_sizes;
  if (layer_sizes.size() < 2) throw DimensionError("network needs at least input and output sizes");
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    if (layer_sizes[l] < 1 || layer_sizes[l + 1] < 1) throw DimensionError("layer sizes must be positive");
    p.weights.push_back(Mat::Zero(layer_sizes[l + 1], layer_sizes[l]));
    p.biases.push_back(Vec::Zero(layer_sizes[l + 1]));
  }
  return p;
}

MlpParams init_params(const std::vector<int>& layer_sizes, std::uint64_t seed) {
  MlpParams p = zero_params(layer_sizes);
  std::mt19937_64 rng(seed);
  for (auto& W : p.weights) {
    const double limit = std::sqrt(6.0 / static_cast<double>(W.rows() + W.cols()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    // Row-major fill so the draw order matches the serialized layout.
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
      for (Eigen::Index j = 0; j < W.cols(); ++j) W(i, j) = dist(rng);
    }
  }
  return p;
}

Vec forward(const MlpParams& p, const Vec& x) {
  if (x.size() != p.n_in()) {
    throw DimensionError(fmt::format("network input has dimension {}, expected {}", x.size(), p.n_in()));
  }
  Vec h = x;
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    Vec a = p.weights[l] * h + p.biases[l];
    h = l + 1 < p.num_layers() ? Vec(a.array().tanh()) : a;
  }
  return h;
}

Mat input_jacobian(const MlpParams& p, const Vec& x) {
  if (x.size() != p.n_in()) {
    throw DimensionError(fmt::format("network input has dimension {}, expected {}", x.size(), p.n_in()));
  }
  Vec h = x;
  Mat J = Mat::Identity(p.n_in(), p.n_in());
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    const Vec a = p.weights[l] * h + p.biases[l];
    Mat Ja = p.weights[l] * J;
    if (l + 1 < p.num_layers()) {
      h = a.array().tanh();
      J = (1.0 - h.array().square()).matrix().asDiagonal() * Ja;
    } else {
      J = std::move(Ja);
    }
  }
  return J;
}

Mat forward_batch(const MlpParams& p, const Mat& X) {
  if (X.rows() != p.n_in()) throw DimensionError("batch input rows do not match network input");
  Mat Y(p.n_out(), X.cols());
  const Eigen::Index blocks = block_count(X.cols());
#pragma omp parallel for schedule(static)
  for (Eigen::Index b = 0; b < blocks; ++b) {
    const Eigen::Index c0 = b * kBlockSize;
    const Eigen::Index n = std::min(kBlockSize, X.cols() - c0);
    BlockCache cache;
    run_block(p, X.middleCols(c0, n), nullptr, c0, cache);
    Y.middleCols(c0, n) = cache.h.back();
  }
  return Y;
}

TangentOutputs forward_tangent_batch(const MlpParams& p, const Mat& X, const Mat& V) {
  if (X.rows() != p.n_in() || V.rows() != p.n_in() || V.cols() != X.cols()) {
    throw DimensionError("tangent batch shapes do not match network input");
  }
  TangentOutputs out{Mat(p.n_out(), X.cols()), Mat(p.n_out(), X.cols())};
  const Eigen::Index blocks = block_count(X.cols());
#pragma omp parallel for schedule(static)
  for (Eigen::Index b = 0; b < blocks; ++b) {
    const Eigen::Index c0 = b * kBlockSize;
    const Eigen::Index n = std::min(kBlockSize, X.cols() - c0);
    BlockCache cache;
    run_block(p, X.middleCols(c0, n), &V, c0, cache);
    out.values.middleCols(c0, n) = cache.h.back();
    out.tangents.middleCols(c0, n) = cache.hd.back();
  }
  return out;
}

LossAndGradient loss_gradient(const MlpParams& p, const Mat& X, const Mat* V,
                              const BlockLoss& loss) {
  if (X.rows() != p.n_in()) throw DimensionError("batch input rows do not match network input");
  if (V != nullptr && (V->rows() != X.rows() || V->cols() != X.cols())) {
    throw DimensionError("tangent directions must match the batch shape");
  }
  const auto P = static_cast<Eigen::Index>(p.parameter_count());
  const Eigen::Index blocks = block_count(X.cols());
  std::vector<Vec> partial(static_cast<std::size_t>(blocks));
  std::vector<double> values(static_cast<std::size_t>(blocks), 0.0);

#pragma omp parallel for schedule(static)
  for (Eigen::Index b = 0; b < blocks; ++b) {
    const Eigen::Index c0 = b * kBlockSize;
    const Eigen::Index n = std::min(kBlockSize, X.cols() - c0);
    BlockCache cache;
    run_block(p, X.middleCols(c0, n), V, c0, cache);
    Mat dY = Mat::Zero(p.n_out(), n);
    Mat dYd;
    if (V != nullptr) dYd = Mat::Zero(p.n_out(), n);
    values[b] = loss(c0, cache.h.back(), V != nullptr ? &cache.hd.back() : nullptr, dY,
                     V != nullptr ? &dYd : nullptr);
    partial[b] = Vec::Zero(P);
    backprop_block(p, cache, std::move(dY), V != nullptr ? &dYd : nullptr, partial[b].data());
  }

  LossAndGradient out;
  out.gradient.values = Vec::Zero(P);
  for (Eigen::Index b = 0; b < blocks; ++b) {
    out.value += values[b];
    out.gradient.values += partial[b];
  }
  if (!std::isfinite(out.value)) throw DivergenceError("loss is not finite");
  return out;
}

double spectral_norm_power(const Mat& W, int max_iter, double tol) {
  if (W.size() == 0) return 0.0;
  Vec v = Vec::Ones(W.cols()).normalized();
  double sigma = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Vec u = W.transpose() * (W * v);
    const double norm = u.norm();
    if (norm == 0.0) return 0.0;
    v = u / norm;
    const double next = std::sqrt(norm);
    if (std::abs(next - sigma) <= tol * std::max(1.0, next)) return next;
    sigma = next;
  }
  return sigma;
}

double spectral_norm(const Mat& W) {
  if (W.size() == 0) return 0.0;
  const Mat gram = W.rows() < W.cols() ? Mat(W * W.transpose()) : Mat(W.transpose() * W);
  Eigen::SelfAdjointEigenSolver<Mat> eig(gram, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, eig.eigenvalues().maxCoeff()));
}

double lipschitz_upper_bound(const MlpParams& p) {
  double bound = 1.0;
  for (const auto& W : p.weights) {
    // Power iteration approaches the norm from below; keep the larger of the
    // two so the product stays an upper bound.
    bound *= std::max(spectral_norm(W), spectral_norm_power(W));
  }
  return bound;
}

}  // namespace kkl
