#include "defrag/graph.hpp"

#include "defrag/errors.hpp"

namespace defrag {

void Graph::record(std::string op, std::function<void()> backward) {
  if (!grad_enabled_) return;
  nodes_.push_back(Node{std::move(op), std::move(backward)});
}

void Graph::backward(Tensor& root) {
  if (backward_done_) {
    throw UsageError(
        "backward() called twice on the same tape; reset() the graph first");
  }
  if (root.numel() != 1) {
    throw UsageError("backward() needs a scalar root, got shape " +
                     shape_to_string(root.shape()));
  }
  backward_done_ = true;
  root.ensure_grad()[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    it->backward();
  }
}

void Graph::reset() {
  nodes_.clear();
  backward_done_ = false;
}

}  // namespace defrag
