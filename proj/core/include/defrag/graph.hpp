#pragma once

#include <functional>
#include <string>
#include <vector>

#include "defrag/tensor.hpp"

namespace defrag {

// Records the forward pass as a tape of backward closures.  Every op that
// participates in differentiation appends one node; backward() replays the
// tape in reverse.  A Graph instance covers exactly one forward/backward
// cycle: reset() (or destruction) clears the tape for the next batch.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // When grad is disabled, record() becomes a no-op and ops skip buffer
  // captures.  Used for evaluation passes.
  bool grad_enabled() const { return grad_enabled_; }
  void set_grad_enabled(bool enabled) { grad_enabled_ = enabled; }

  void record(std::string op, std::function<void()> backward);

  // Seeds d(loss)/d(loss) = 1 and walks the tape in reverse.  The root must
  // be a scalar.  Calling backward twice on the same tape is a UsageError.
  void backward(Tensor& root);

  void reset();

  std::size_t size() const { return nodes_.size(); }
  bool backward_done() const { return backward_done_; }

 private:
  struct Node {
    std::string op;
    std::function<void()> backward;
  };
  std::vector<Node> nodes_;
  bool grad_enabled_ = true;
  bool backward_done_ = false;
};

// RAII guard that disables grad recording for its lifetime.
class NoGradGuard {
 public:
  explicit NoGradGuard(Graph& graph)
      : graph_(graph), prev_(graph.grad_enabled()) {
    graph_.set_grad_enabled(false);
  }
  ~NoGradGuard() { graph_.set_grad_enabled(prev_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Graph& graph_;
  bool prev_;
};

}  // namespace defrag
