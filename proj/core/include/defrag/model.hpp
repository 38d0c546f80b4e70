#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "defrag/config.hpp"
#include "defrag/graph.hpp"
#include "defrag/ops.hpp"
#include "defrag/tensor.hpp"

namespace defrag {

// conv 32@5×5 → pool → relu → conv 256@5×5 → pool → relu → FC 256 (relu)
// → feature layer M (no bias) → [relu|linear|softplus] → FC 10.
// With 28×28 inputs the spatial chain is 28→24→12→8→4, so the flattened
// width is 4·4·256 = 4096.
struct ModelState {
  Tensor conv1_w, conv1_b;  // [32×1×5×5], [32]
  Tensor conv2_w, conv2_b;  // [256×32×5×5], [256]
  Tensor fc1_w, fc1_b;      // [flatten×256], [256]
  Tensor feature_w;         // [256×d_feat], the projection matrix M
  Tensor head_w, head_b;    // [d_feat×10], [10]
  Activation feature_activation = Activation::kLinear;
  std::int64_t d_feat = 8;

  // Handles share storage with the fields; order is fixed and drives the
  // checkpoint layout.
  std::vector<std::pair<std::string, Tensor>> named_parameters();
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;

  std::int64_t parameter_count() const;
};

// Deterministic Kaiming-uniform (fan-in) init, zero biases.
ModelState build_model(std::int64_t d_feat, Activation act,
                       std::uint64_t seed);
ModelState build_model(const RunConfig& cfg);

struct Forward {
  Tensor features;  // [m×d_feat], post-activation feature layer output
  Tensor logits;    // [m×10]
};

// images: [m×C×H×W]; spatial dims must survive the two conv/pool stages
// and flatten to fc1_w's input width.
Forward forward(Graph& g, const ModelState& m, const Tensor& images);

// p ← p − lr·g for every parameter; a parameter without a gradient is a
// usage error.
void sgd_step(ModelState& m, double lr);

void zero_grads(ModelState& m);

}  // namespace defrag
