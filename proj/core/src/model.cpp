#include "defrag/model.hpp"

#include <cmath>

#include "defrag/errors.hpp"
#include "defrag/rng.hpp"

namespace defrag {

namespace {

constexpr std::uint64_t kInitStream = 1;

void uniform_init(Rng& rng, Tensor& t, double bound) {
  for (double& v : t.data()) {
    v = rng.uniform(-bound, bound);
  }
}

void kaiming_uniform(Rng& rng, Tensor& t, std::int64_t fan_in) {
  uniform_init(rng, t, std::sqrt(6.0 / static_cast<double>(fan_in)));
}

// The classifier head sits on a fan-in as small as d_feat, where the Kaiming
// bound sqrt(6/d_feat) reaches 1.7; on features of magnitude ~10 that puts the
// initial logits near 30 and the first SGD steps wreck the feature bottleneck
// (worst under retraction, which pins the projection orthonormal so its scale
// cannot shrink to compensate). A small fixed bound keeps initial logits near
// zero at every width. Same draw count as before, so the other layers' init
// streams are unchanged.
constexpr double kHeadInitBound = 0.01;

}  // namespace

std::vector<std::pair<std::string, Tensor>> ModelState::named_parameters() {
  return {{"conv1.weight", conv1_w}, {"conv1.bias", conv1_b},
          {"conv2.weight", conv2_w}, {"conv2.bias", conv2_b},
          {"fc1.weight", fc1_w},     {"fc1.bias", fc1_b},
          {"feature.weight", feature_w},
          {"head.weight", head_w},   {"head.bias", head_b}};
}

std::vector<std::pair<std::string, Tensor>> ModelState::named_parameters()
    const {
  return const_cast<ModelState*>(this)->named_parameters();
}

std::int64_t ModelState::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& [name, t] : named_parameters()) n += t.numel();
  return n;
}

ModelState build_model(std::int64_t d_feat, Activation act,
                       std::uint64_t seed) {
  if (d_feat <= 0 || d_feat > 256) {
    throw ConfigError("d_feat must lie in [1, 256], got " +
                      std::to_string(d_feat));
  }
  ModelState m;
  m.d_feat = d_feat;
  m.feature_activation = act;
  m.conv1_w = Tensor::zeros({32, 1, 5, 5}, true);
  m.conv1_b = Tensor::zeros({32}, true);
  m.conv2_w = Tensor::zeros({256, 32, 5, 5}, true);
  m.conv2_b = Tensor::zeros({256}, true);
  m.fc1_w = Tensor::zeros({4096, 256}, true);
  m.fc1_b = Tensor::zeros({256}, true);
  m.feature_w = Tensor::zeros({256, d_feat}, true);
  m.head_w = Tensor::zeros({d_feat, 10}, true);
  m.head_b = Tensor::zeros({10}, true);

  Rng rng(Rng::mix(seed, kInitStream));
  kaiming_uniform(rng, m.conv1_w, 1 * 5 * 5);
  kaiming_uniform(rng, m.conv2_w, 32 * 5 * 5);
  kaiming_uniform(rng, m.fc1_w, 4096);
  kaiming_uniform(rng, m.feature_w, 256);
  uniform_init(rng, m.head_w, kHeadInitBound);
  return m;
}

ModelState build_model(const RunConfig& cfg) {
  const ResolvedMethod r = resolve_method(cfg);
  return build_model(cfg.d_feat, r.activation, cfg.seed);
}

Forward forward(Graph& g, const ModelState& m, const Tensor& images) {
  Tensor h = conv2d(g, images, m.conv1_w, m.conv1_b);
  h = relu(g, maxpool2(g, h));
  h = conv2d(g, h, m.conv2_w, m.conv2_b);
  h = relu(g, maxpool2(g, h));
  const std::int64_t batch = h.dim(0);
  const std::int64_t flat = h.numel() / batch;
  if (flat != m.fc1_w.dim(0)) {
    throw DimensionError("conv stages flatten to width " +
                         std::to_string(flat) + " but fc1 expects " +
                         std::to_string(m.fc1_w.dim(0)));
  }
  h = reshape(g, h, {batch, flat});
  h = relu(g, add_rowwise(g, matmul(g, h, m.fc1_w), m.fc1_b));
  Tensor pre_feature = matmul(g, h, m.feature_w);
  Forward out;
  out.features = activation(g, pre_feature, m.feature_activation);
  out.logits =
      add_rowwise(g, matmul(g, out.features, m.head_w), m.head_b);
  return out;
}

void sgd_step(ModelState& m, double lr) {
  if (lr < 0.0) {
    throw ValidationError("learning rate must be nonnegative, got " +
                          std::to_string(lr));
  }
  for (auto& [name, p] : m.named_parameters()) {
    if (!p.has_grad()) {
      throw UsageError("sgd_step: parameter " + name + " has no gradient");
    }
    std::span<double> v = p.data();
    std::span<const double> gr = p.grad();
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] -= lr * gr[i];
    }
  }
}

void zero_grads(ModelState& m) {
  for (auto& [name, p] : m.named_parameters()) {
    p.ensure_grad();
    p.zero_grad();
  }
}

}  // namespace defrag
