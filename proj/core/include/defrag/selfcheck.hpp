#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "defrag/graph.hpp"
#include "defrag/tensor.hpp"

namespace defrag::selfcheck {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct Options {
  std::uint64_t seed = 42;
  int instances = 20;  // random instances per property
  // Deliberately corrupts one analytic gradient so the suite must fail;
  // exists as a negative control for the harness itself.
  bool inject_fault = false;
};

// Rebuilds the loss through fn on fresh graphs; compares every analytic
// input gradient against central finite differences at step h.  Relative
// error uses max(|analytic|, |numeric|, 1e-3) as the denominator so
// near-zero gradients are judged on an absolute scale.
using LossBuilder = std::function<Tensor(Graph&)>;
double max_rel_grad_error(const LossBuilder& fn, std::span<Tensor> inputs,
                          double h = 1e-5);

// The three suites behind `defrag selftest`: op/loss gradient checks,
// SVD/retraction properties, and loss-oracle equivalence.
std::vector<CheckResult> run_gradient_suite(const Options& opts);
std::vector<CheckResult> run_svd_suite(const Options& opts);
std::vector<CheckResult> run_loss_oracle_suite(const Options& opts);
std::vector<CheckResult> run_all(const Options& opts);

bool all_passed(const std::vector<CheckResult>& results);

}  // namespace defrag::selfcheck
