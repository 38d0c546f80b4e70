#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "defrag/graph.hpp"
#include "defrag/tensor.hpp"

namespace defrag {

enum class Activation : std::uint32_t {
  kReLU = 0,
  kLinear = 1,
  kSoftplus = 2,
};

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

// All ops follow the same convention: the result requires grad iff grad
// recording is enabled and at least one input requires grad; in that case a
// backward closure is appended to the tape.  Closures bail out when the
// output never received a gradient (dead branch) and only accumulate into
// inputs that require grad.

Tensor matmul(Graph& g, const Tensor& a, const Tensor& b);

// x: [m×n], bias: [n]; adds bias to every row.
Tensor add_rowwise(Graph& g, const Tensor& x, const Tensor& bias);

// Valid-padding stride-1 cross-correlation.
// input: [N×C×H×W], kernel: [F×C×K×K], bias: [F] -> [N×F×(H−K+1)×(W−K+1)].
Tensor conv2d(Graph& g, const Tensor& input, const Tensor& kernel,
              const Tensor& bias);

// Non-overlapping 2×2 max pooling; ties go to the first element in
// row-major scan order.
Tensor maxpool2(Graph& g, const Tensor& input);

Tensor relu(Graph& g, const Tensor& x);
Tensor softplus(Graph& g, const Tensor& x);
Tensor linear(Graph& g, const Tensor& x);
Tensor activation(Graph& g, const Tensor& x, Activation a);

// Returns a copy with a new shape; element count must match.
Tensor reshape(Graph& g, const Tensor& x, Shape shape);

Tensor sum(Graph& g, const Tensor& x);
Tensor scale(Graph& g, const Tensor& x, double c);
Tensor mul(Graph& g, const Tensor& a, const Tensor& b);

// a + c·b, elementwise on matching shapes.  Used to combine loss terms.
Tensor add_scaled(Graph& g, const Tensor& a, const Tensor& b, double c);

// Mean over the batch of −log softmax(logits)[label]; log-sum-exp
// stabilized by row-max subtraction.
Tensor softmax_cross_entropy(Graph& g, const Tensor& logits,
                             const std::vector<std::int32_t>& labels);

}  // namespace defrag
