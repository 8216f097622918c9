#include "kkl/mlp_reference.hpp"

#include <cmath>

#include "kkl/error.hpp"

namespace kkl::reference {

namespace {

using Buffer = std::vector<double>;

struct SampleCache {
  std::vector<Buffer> h;   // layer inputs, h[L] = output
  std::vector<Buffer> hd;  // their tangents
  std::vector<Buffer> ad;  // pre-activation tangents
};

void run_sample(const MlpParams& p, const double* x, const double* v, SampleCache& c) {
  const std::size_t L = p.num_layers();
  c.h.assign(L + 1, {});
  c.hd.assign(L + 1, {});
  c.ad.assign(L, {});
  c.h[0].assign(x, x + p.n_in());
  if (v != nullptr) c.hd[0].assign(v, v + p.n_in());
  for (std::size_t l = 0; l < L; ++l) {
    const Mat& W = p.weights[l];
    const auto rows = static_cast<std::size_t>(W.rows());
    const auto cols = static_cast<std::size_t>(W.cols());
    Buffer a(rows), ad(rows, 0.0);
    for (std::size_t i = 0; i < rows; ++i) {
      double acc = p.biases[l][static_cast<Eigen::Index>(i)];
      double acc_d = 0.0;
      for (std::size_t j = 0; j < cols; ++j) {
        const double w = W(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        acc += w * c.h[l][j];
        if (v != nullptr) acc_d += w * c.hd[l][j];
      }
      a[i] = acc;
      ad[i] = acc_d;
    }
    const bool hidden = l + 1 < L;
    c.h[l + 1] = a;
    c.hd[l + 1] = ad;
    if (hidden) {
      for (std::size_t i = 0; i < rows; ++i) {
        const double t = std::tanh(a[i]);
        c.h[l + 1][i] = t;
        c.hd[l + 1][i] = (1.0 - t * t) * ad[i];
      }
    }
    c.ad[l] = std::move(ad);
  }
}

}  // namespace

SampleTangent forward_tangent(const MlpParams& p, const Vec& x, const Vec& v) {
  if (x.size() != p.n_in() || v.size() != p.n_in()) {
    throw DimensionError("reference forward: input dimension mismatch");
  }
  SampleCache c;
  run_sample(p, x.data(), v.data(), c);
  SampleTangent out{Vec(p.n_out()), Vec(p.n_out())};
  for (int i = 0; i < p.n_out(); ++i) {
    out.value[i] = c.h.back()[static_cast<std::size_t>(i)];
    out.tangent[i] = c.hd.back()[static_cast<std::size_t>(i)];
  }
  return out;
}

LossAndGradient loss_gradient(const MlpParams& p, const Mat& X, const Mat* V,
                              const BlockLoss& loss) {
  if (X.rows() != p.n_in()) throw DimensionError("reference gradient: input rows mismatch");
  const std::size_t L = p.num_layers();
  std::vector<std::size_t> offsets(L);
  std::size_t total = 0;
  for (std::size_t l = 0; l < L; ++l) {
    offsets[l] = total;
    total += static_cast<std::size_t>(p.weights[l].size() + p.biases[l].size());
  }

  LossAndGradient out;
  out.gradient.values = Vec::Zero(static_cast<Eigen::Index>(total));
  double* grad = out.gradient.values.data();
  const Vec zero_tangent = Vec::Zero(p.n_in());
  const bool tangent = V != nullptr;

  for (Eigen::Index s = 0; s < X.cols(); ++s) {
    const Vec x = X.col(s);
    const Vec v = tangent ? Vec(V->col(s)) : zero_tangent;
    SampleCache c;
    run_sample(p, x.data(), v.data(), c);

    Mat y(p.n_out(), 1), yd(p.n_out(), 1);
    for (int i = 0; i < p.n_out(); ++i) {
      y(i, 0) = c.h.back()[static_cast<std::size_t>(i)];
      yd(i, 0) = c.hd.back()[static_cast<std::size_t>(i)];
    }
    Mat dy = Mat::Zero(p.n_out(), 1), dyd = Mat::Zero(p.n_out(), 1);
    out.value += loss(s, y, tangent ? &yd : nullptr, dy, tangent ? &dyd : nullptr);

    Buffer gA(dy.data(), dy.data() + dy.size());
    Buffer gAd(dyd.data(), dyd.data() + dyd.size());
    for (std::size_t l = L; l-- > 0;) {
      const Mat& W = p.weights[l];
      const auto rows = static_cast<std::size_t>(W.rows());
      const auto cols = static_cast<std::size_t>(W.cols());
      double* dW = grad + offsets[l];
      double* db = dW + W.size();
      for (std::size_t j = 0; j < cols; ++j) {
        for (std::size_t i = 0; i < rows; ++i) {
          dW[j * rows + i] += gA[i] * c.h[l][j] + gAd[i] * c.hd[l][j];
        }
      }
      for (std::size_t i = 0; i < rows; ++i) db[i] += gA[i];
      if (l == 0) break;

      Buffer gH(cols, 0.0), gHd(cols, 0.0);
      for (std::size_t j = 0; j < cols; ++j) {
        for (std::size_t i = 0; i < rows; ++i) {
          const double w = W(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
          gH[j] += w * gA[i];
          gHd[j] += w * gAd[i];
        }
      }
      gA.assign(cols, 0.0);
      gAd.assign(cols, 0.0);
      for (std::size_t j = 0; j < cols; ++j) {
        const double h = c.h[l][j];
        const double slope = 1.0 - h * h;
        gAd[j] = slope * gHd[j];
        gA[j] = slope * (gH[j] - 2.0 * h * gHd[j] * c.ad[l - 1][j]);
      }
    }
  }
  if (!std::isfinite(out.value)) throw DivergenceError("loss is not finite");
  return out;
}

}  // namespace kkl::reference
