#include "defrag/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>
#include <utility>

#include "defrag/errors.hpp"

namespace defrag {

namespace {

using MatRM =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<MatRM>;
using CMap = Eigen::Map<const MatRM>;

bool track(const Graph& g, std::initializer_list<const Tensor*> inputs) {
  if (!g.grad_enabled()) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

void add_into(std::span<double> dst, const MatRM& src) {
  Map(dst.data(), src.rows(), src.cols()) += src;
}

}  // namespace

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::kReLU:
      return "relu";
    case Activation::kLinear:
      return "linear";
    case Activation::kSoftplus:
      return "softplus";
  }
  throw UsageError("unknown activation enum value");
}

Activation activation_from_name(const std::string& name) {
  if (name == "relu") return Activation::kReLU;
  if (name == "linear") return Activation::kLinear;
  if (name == "softplus") return Activation::kSoftplus;
  throw ConfigError("unknown activation '" + name +
                    "' (expected relu, linear, or softplus)");
}

Tensor matmul(Graph& g, const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul shapes " + shape_to_string(a.shape()) +
                         " and " + shape_to_string(b.shape()) +
                         " are incompatible");
  }
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out = Tensor::zeros({m, n});
  Map(out.data().data(), m, n) = CMap(a.data().data(), m, k) *
                                 CMap(b.data().data(), k, n);
  if (track(g, {&a, &b})) {
    out.set_requires_grad(true);
    g.record("matmul", [a, b, out, m, k, n]() mutable {
      if (!out.has_grad()) return;
      CMap dC(out.grad().data(), m, n);
      if (a.requires_grad()) {
        add_into(a.ensure_grad(),
                 dC * CMap(b.data().data(), k, n).transpose());
      }
      if (b.requires_grad()) {
        add_into(b.ensure_grad(),
                 CMap(a.data().data(), m, k).transpose() * dC);
      }
    });
  }
  return out;
}

Tensor add_rowwise(Graph& g, const Tensor& x, const Tensor& bias) {
  if (x.rank() != 2 || bias.rank() != 1 || x.dim(1) != bias.dim(0)) {
    throw DimensionError("add_rowwise shapes " + shape_to_string(x.shape()) +
                         " and " + shape_to_string(bias.shape()) +
                         " are incompatible");
  }
  const auto m = x.dim(0), n = x.dim(1);
  Tensor out = Tensor::zeros({m, n});
  Map(out.data().data(), m, n) =
      CMap(x.data().data(), m, n).rowwise() +
      Eigen::Map<const Eigen::RowVectorXd>(bias.data().data(), n);
  if (track(g, {&x, &bias})) {
    out.set_requires_grad(true);
    g.record("add_rowwise", [x, bias, out, m, n]() mutable {
      if (!out.has_grad()) return;
      CMap dY(out.grad().data(), m, n);
      if (x.requires_grad()) add_into(x.ensure_grad(), dY);
      if (bias.requires_grad()) {
        Eigen::Map<Eigen::RowVectorXd>(bias.ensure_grad().data(), n) +=
            dY.colwise().sum();
      }
    });
  }
  return out;
}

namespace {

// col has one row per (channel, ky, kx) and one column per
// (sample, oy, ox); a single GEMM against the flattened kernel then covers
// the whole batch.
void im2col(std::span<const double> input, std::int64_t N, std::int64_t C,
            std::int64_t H, std::int64_t W, std::int64_t K, std::int64_t OH,
            std::int64_t OW, std::vector<double>& col) {
  col.resize(static_cast<std::size_t>(C * K * K * N * OH * OW));
  const std::int64_t cols = N * OH * OW;
  for (std::int64_t c = 0; c < C; ++c) {
    for (std::int64_t ky = 0; ky < K; ++ky) {
      for (std::int64_t kx = 0; kx < K; ++kx) {
        double* row = col.data() + (c * K * K + ky * K + kx) * cols;
        for (std::int64_t n = 0; n < N; ++n) {
          const double* src =
              input.data() + ((n * C + c) * H + ky) * W + kx;
          double* dst = row + n * OH * OW;
          for (std::int64_t oy = 0; oy < OH; ++oy) {
            std::copy(src + oy * W, src + oy * W + OW, dst + oy * OW);
          }
        }
      }
    }
  }
}

void col2im_add(std::span<const double> col, std::int64_t N, std::int64_t C,
                std::int64_t H, std::int64_t W, std::int64_t K,
                std::int64_t OH, std::int64_t OW, std::span<double> input) {
  const std::int64_t cols = N * OH * OW;
  for (std::int64_t c = 0; c < C; ++c) {
    for (std::int64_t ky = 0; ky < K; ++ky) {
      for (std::int64_t kx = 0; kx < K; ++kx) {
        const double* row = col.data() + (c * K * K + ky * K + kx) * cols;
        for (std::int64_t n = 0; n < N; ++n) {
          double* dst = input.data() + ((n * C + c) * H + ky) * W + kx;
          const double* src = row + n * OH * OW;
          for (std::int64_t oy = 0; oy < OH; ++oy) {
            for (std::int64_t ox = 0; ox < OW; ++ox) {
              dst[oy * W + ox] += src[oy * OW + ox];
            }
          }
        }
      }
    }
  }
}

// [F × N·OH·OW] GEMM layout to [N×F×OH×OW] tensor layout and back.
void scatter_output(const MatRM& y, std::int64_t N, std::int64_t F,
                    std::int64_t OHOW, std::span<double> out) {
  for (std::int64_t n = 0; n < N; ++n) {
    for (std::int64_t f = 0; f < F; ++f) {
      const double* src = y.data() + f * (N * OHOW) + n * OHOW;
      std::copy(src, src + OHOW, out.data() + (n * F + f) * OHOW);
    }
  }
}

MatRM gather_output_grad(std::span<const double> grad, std::int64_t N,
                         std::int64_t F, std::int64_t OHOW) {
  MatRM dY(F, N * OHOW);
  for (std::int64_t n = 0; n < N; ++n) {
    for (std::int64_t f = 0; f < F; ++f) {
      const double* src = grad.data() + (n * F + f) * OHOW;
      std::copy(src, src + OHOW, dY.data() + f * (N * OHOW) + n * OHOW);
    }
  }
  return dY;
}

}  // namespace

Tensor conv2d(Graph& g, const Tensor& input, const Tensor& kernel,
              const Tensor& bias) {
  if (input.rank() != 4 || kernel.rank() != 4 || bias.rank() != 1) {
    throw DimensionError("conv2d expects input [N×C×H×W], kernel [F×C×K×K], "
                         "bias [F]; got " +
                         shape_to_string(input.shape()) + ", " +
                         shape_to_string(kernel.shape()) + ", " +
                         shape_to_string(bias.shape()));
  }
  const auto N = input.dim(0), C = input.dim(1), H = input.dim(2),
             W = input.dim(3);
  const auto F = kernel.dim(0), K = kernel.dim(2);
  if (kernel.dim(1) != C) {
    throw DimensionError("conv2d channel mismatch: input has " +
                         std::to_string(C) + " channels, kernel expects " +
                         std::to_string(kernel.dim(1)));
  }
  if (kernel.dim(3) != K) {
    throw DimensionError("conv2d kernel must be square, got " +
                         shape_to_string(kernel.shape()));
  }
  if (bias.dim(0) != F) {
    throw DimensionError("conv2d bias length " + std::to_string(bias.dim(0)) +
                         " does not match " + std::to_string(F) + " filters");
  }
  if (H < K || W < K) {
    throw DimensionError("conv2d input " + shape_to_string(input.shape()) +
                         " is smaller than the " + std::to_string(K) + "×" +
                         std::to_string(K) + " kernel");
  }
  const auto OH = H - K + 1, OW = W - K + 1, OHOW = OH * OW;

  auto col = std::make_shared<std::vector<double>>();
  im2col(input.data(), N, C, H, W, K, OH, OW, *col);
  CMap kmat(kernel.data().data(), F, C * K * K);
  CMap cmat(col->data(), C * K * K, N * OHOW);
  MatRM y = kmat * cmat;
  for (std::int64_t f = 0; f < F; ++f) {
    y.row(f).array() += bias.data()[static_cast<std::size_t>(f)];
  }
  Tensor out = Tensor::zeros({N, F, OH, OW});
  scatter_output(y, N, F, OHOW, out.data());

  if (track(g, {&input, &kernel, &bias})) {
    out.set_requires_grad(true);
    g.record("conv2d",
             [input, kernel, bias, out, col, N, C, H, W, K, F, OH, OW,
              OHOW]() mutable {
               if (!out.has_grad()) return;
               MatRM dY = gather_output_grad(out.grad(), N, F, OHOW);
               if (kernel.requires_grad()) {
                 add_into(kernel.ensure_grad(),
                          dY * CMap(col->data(), C * K * K, N * OHOW)
                                   .transpose());
               }
               if (bias.requires_grad()) {
                 auto db = bias.ensure_grad();
                 for (std::int64_t f = 0; f < F; ++f) {
                   db[static_cast<std::size_t>(f)] += dY.row(f).sum();
                 }
               }
               if (input.requires_grad()) {
                 MatRM dcol =
                     CMap(kernel.data().data(), F, C * K * K).transpose() *
                     dY;
                 col2im_add({dcol.data(), static_cast<std::size_t>(
                                              dcol.size())},
                            N, C, H, W, K, OH, OW, input.ensure_grad());
               }
             });
  }
  return out;
}

Tensor maxpool2(Graph& g, const Tensor& input) {
  if (input.rank() != 4) {
    throw DimensionError("maxpool2 expects [N×C×H×W], got " +
                         shape_to_string(input.shape()));
  }
  const auto N = input.dim(0), C = input.dim(1), H = input.dim(2),
             W = input.dim(3);
  if (H % 2 != 0 || W % 2 != 0) {
    throw DimensionError("maxpool2 needs even spatial dims, got " +
                         shape_to_string(input.shape()));
  }
  const auto OH = H / 2, OW = W / 2;
  Tensor out = Tensor::zeros({N, C, OH, OW});
  auto argmax = std::make_shared<std::vector<std::int64_t>>(
      static_cast<std::size_t>(N * C * OH * OW));
  std::span<const double> in = input.data();
  std::span<double> dst = out.data();
  std::int64_t o = 0;
  for (std::int64_t nc = 0; nc < N * C; ++nc) {
    const double* plane = in.data() + nc * H * W;
    for (std::int64_t oy = 0; oy < OH; ++oy) {
      for (std::int64_t ox = 0; ox < OW; ++ox, ++o) {
        // strict > keeps the first max in row-major order on ties
        std::int64_t best = (2 * oy) * W + 2 * ox;
        double bestv = plane[best];
        const std::int64_t cand[3] = {(2 * oy) * W + 2 * ox + 1,
                                      (2 * oy + 1) * W + 2 * ox,
                                      (2 * oy + 1) * W + 2 * ox + 1};
        for (std::int64_t c : cand) {
          if (plane[c] > bestv) {
            bestv = plane[c];
            best = c;
          }
        }
        dst[static_cast<std::size_t>(o)] = bestv;
        (*argmax)[static_cast<std::size_t>(o)] = nc * H * W + best;
      }
    }
  }
  if (track(g, {&input})) {
    out.set_requires_grad(true);
    g.record("maxpool2", [input, out, argmax]() mutable {
      if (!out.has_grad() || !input.requires_grad()) return;
      auto din = input.ensure_grad();
      std::span<const double> dout = out.grad();
      for (std::size_t i = 0; i < argmax->size(); ++i) {
        din[static_cast<std::size_t>((*argmax)[i])] += dout[i];
      }
    });
  }
  return out;
}

Tensor relu(Graph& g, const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  std::span<const double> in = x.data();
  std::span<double> dst = out.data();
  for (std::size_t i = 0; i < in.size(); ++i) {
    dst[i] = in[i] > 0.0 ? in[i] : 0.0;
  }
  if (track(g, {&x})) {
    out.set_requires_grad(true);
    g.record("relu", [x, out]() mutable {
      if (!out.has_grad() || !x.requires_grad()) return;
      auto dx = x.ensure_grad();
      std::span<const double> in = x.data();
      std::span<const double> dout = out.grad();
      for (std::size_t i = 0; i < in.size(); ++i) {
        if (in[i] > 0.0) dx[i] += dout[i];
      }
    });
  }
  return out;
}

Tensor softplus(Graph& g, const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  std::span<const double> in = x.data();
  std::span<double> dst = out.data();
  for (std::size_t i = 0; i < in.size(); ++i) {
    dst[i] = in[i] > 30.0 ? in[i] : std::log1p(std::exp(in[i]));
  }
  if (track(g, {&x})) {
    out.set_requires_grad(true);
    g.record("softplus", [x, out]() mutable {
      if (!out.has_grad() || !x.requires_grad()) return;
      auto dx = x.ensure_grad();
      std::span<const double> in = x.data();
      std::span<const double> dout = out.grad();
      for (std::size_t i = 0; i < in.size(); ++i) {
        const double v = in[i];
        const double sig =
            v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                     : std::exp(v) / (1.0 + std::exp(v));
        dx[i] += sig * dout[i];
      }
    });
  }
  return out;
}

Tensor linear(Graph&, const Tensor& x) { return x; }

Tensor activation(Graph& g, const Tensor& x, Activation a) {
  switch (a) {
    case Activation::kReLU:
      return relu(g, x);
    case Activation::kLinear:
      return linear(g, x);
    case Activation::kSoftplus:
      return softplus(g, x);
  }
  throw UsageError("unknown activation enum value");
}

Tensor reshape(Graph& g, const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape from " + shape_to_string(x.shape()) +
                         " to " + shape_to_string(shape) +
                         " changes the element count");
  }
  Tensor out = Tensor::from(std::move(shape),
                            {x.data().begin(), x.data().end()});
  if (track(g, {&x})) {
    out.set_requires_grad(true);
    g.record("reshape", [x, out]() mutable {
      if (!out.has_grad() || !x.requires_grad()) return;
      auto dx = x.ensure_grad();
      std::span<const double> dout = out.grad();
      for (std::size_t i = 0; i < dout.size(); ++i) dx[i] += dout[i];
    });
  }
  return out;
}

Tensor sum(Graph& g, const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  Tensor out = Tensor::scalar(total);
  if (track(g, {&x})) {
    out.set_requires_grad(true);
    g.record("sum", [x, out]() mutable {
      if (!out.has_grad() || !x.requires_grad()) return;
      const double d = out.grad()[0];
      for (double& v : x.ensure_grad()) v += d;
    });
  }
  return out;
}

Tensor scale(Graph& g, const Tensor& x, double c) {
  Tensor out = Tensor::zeros(x.shape());
  std::span<const double> in = x.data();
  std::span<double> dst = out.data();
  for (std::size_t i = 0; i < in.size(); ++i) dst[i] = c * in[i];
  if (track(g, {&x})) {
    out.set_requires_grad(true);
    g.record("scale", [x, out, c]() mutable {
      if (!out.has_grad() || !x.requires_grad()) return;
      auto dx = x.ensure_grad();
      std::span<const double> dout = out.grad();
      for (std::size_t i = 0; i < dout.size(); ++i) dx[i] += c * dout[i];
    });
  }
  return out;
}

Tensor mul(Graph& g, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("mul shapes " + shape_to_string(a.shape()) +
                         " and " + shape_to_string(b.shape()) + " differ");
  }
  Tensor out = Tensor::zeros(a.shape());
  std::span<const double> av = a.data();
  std::span<const double> bv = b.data();
  std::span<double> dst = out.data();
  for (std::size_t i = 0; i < av.size(); ++i) dst[i] = av[i] * bv[i];
  if (track(g, {&a, &b})) {
    out.set_requires_grad(true);
    g.record("mul", [a, b, out]() mutable {
      if (!out.has_grad()) return;
      std::span<const double> dout = out.grad();
      if (a.requires_grad()) {
        auto da = a.ensure_grad();
        std::span<const double> bv = b.data();
        for (std::size_t i = 0; i < dout.size(); ++i) da[i] += bv[i] * dout[i];
      }
      if (b.requires_grad()) {
        auto db = b.ensure_grad();
        std::span<const double> av = a.data();
        for (std::size_t i = 0; i < dout.size(); ++i) db[i] += av[i] * dout[i];
      }
    });
  }
  return out;
}

Tensor add_scaled(Graph& g, const Tensor& a, const Tensor& b, double c) {
  if (a.shape() != b.shape()) {
    throw DimensionError("add_scaled shapes " + shape_to_string(a.shape()) +
                         " and " + shape_to_string(b.shape()) + " differ");
  }
  Tensor out = Tensor::zeros(a.shape());
  std::span<const double> av = a.data();
  std::span<const double> bv = b.data();
  std::span<double> dst = out.data();
  for (std::size_t i = 0; i < av.size(); ++i) dst[i] = av[i] + c * bv[i];
  if (track(g, {&a, &b})) {
    out.set_requires_grad(true);
    g.record("add_scaled", [a, b, out, c]() mutable {
      if (!out.has_grad()) return;
      std::span<const double> dout = out.grad();
      if (a.requires_grad()) {
        auto da = a.ensure_grad();
        for (std::size_t i = 0; i < dout.size(); ++i) da[i] += dout[i];
      }
      if (b.requires_grad()) {
        auto db = b.ensure_grad();
        for (std::size_t i = 0; i < dout.size(); ++i) db[i] += c * dout[i];
      }
    });
  }
  return out;
}

Tensor softmax_cross_entropy(Graph& g, const Tensor& logits,
                             const std::vector<std::int32_t>& labels) {
  if (logits.rank() != 2) {
    throw DimensionError("softmax_cross_entropy expects [m×k] logits, got " +
                         shape_to_string(logits.shape()));
  }
  const auto m = logits.dim(0), k = logits.dim(1);
  if (static_cast<std::int64_t>(labels.size()) != m) {
    throw DimensionError("softmax_cross_entropy got " +
                         std::to_string(labels.size()) + " labels for " +
                         std::to_string(m) + " rows");
  }
  for (std::int32_t y : labels) {
    if (y < 0 || y >= k) {
      throw ValidationError("label " + std::to_string(y) +
                            " outside [0, " + std::to_string(k) + ")");
    }
  }
  auto probs = std::make_shared<std::vector<double>>(
      static_cast<std::size_t>(m * k));
  std::span<const double> in = logits.data();
  double loss = 0.0;
  for (std::int64_t i = 0; i < m; ++i) {
    const double* row = in.data() + i * k;
    double* prow = probs->data() + i * k;
    double mx = row[0];
    for (std::int64_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    for (std::int64_t j = 0; j < k; ++j) {
      prow[j] = std::exp(row[j] - mx);
      denom += prow[j];
    }
    const double log_denom = std::log(denom);
    for (std::int64_t j = 0; j < k; ++j) prow[j] /= denom;
    loss += log_denom - (row[labels[static_cast<std::size_t>(i)]] - mx);
  }
  Tensor out = Tensor::scalar(loss / static_cast<double>(m));
  if (track(g, {&logits})) {
    out.set_requires_grad(true);
    g.record("softmax_cross_entropy",
             [logits, out, probs, labels, m, k]() mutable {
               if (!out.has_grad() || !logits.requires_grad()) return;
               const double d = out.grad()[0] / static_cast<double>(m);
               auto dl = logits.ensure_grad();
               for (std::int64_t i = 0; i < m; ++i) {
                 const double* prow = probs->data() + i * k;
                 double* drow = dl.data() + i * k;
                 for (std::int64_t j = 0; j < k; ++j) {
                   drow[j] += d * prow[j];
                 }
                 drow[labels[static_cast<std::size_t>(i)]] -= d;
               }
             });
  }
  return out;
}

}  // namespace defrag
