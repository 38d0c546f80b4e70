#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "defrag/graph.hpp"
#include "defrag/tensor.hpp"

namespace defrag {

enum class AuxKind {
  kNone,
  kL1,
  kL2,
  kCenter,
  kContrastiveCenter,
  kSilhouette,
};

const char* aux_kind_name(AuxKind kind);
AuxKind aux_kind_from_name(const std::string& name);

// Running-average class centroids.  Centers live outside the
// differentiation graph: losses treat them as constants, and update()
// applies the decoupled running-average rule.
class CenterBank {
 public:
  CenterBank(std::int64_t classes, std::int64_t dim, double alpha);

  const Tensor& centers() const { return centers_; }
  std::int64_t classes() const { return centers_.dim(0); }
  std::int64_t dim() const { return centers_.dim(1); }
  double alpha() const { return alpha_; }

  bool is_initialized(std::int32_t cls) const;
  std::int64_t initialized_count() const;

  // Sets each not-yet-initialized class present in the batch to its batch
  // mean.  Called before the loss so a class's first batch contributes a
  // zero center distance rather than a distance to an arbitrary point.
  void seed_uninitialized(const Tensor& features,
                          const std::vector<std::int32_t>& labels);

  // For each class j present with n_j members:
  //   Δc_j = Σ_{i: y_i=j} (c_j − x_i) / (1 + n_j);  c_j ← c_j − α·Δc_j.
  // Absent classes are untouched; an empty batch is a no-op.
  void update(const Tensor& features,
              const std::vector<std::int32_t>& labels);

  // Direct center access for tests and checkpoint restore.
  void set_center(std::int32_t cls, std::span<const double> values);

 private:
  Tensor centers_;
  std::vector<bool> initialized_;
  double alpha_;
};

struct LossConfig {
  AuxKind kind = AuxKind::kNone;
  double lambda_aux = 0.01;
  double delta = 1e-6;
  double alpha = 0.5;
};

// (1/m)·Σᵢ ‖aᵢ‖²
Tensor l2_reg(Graph& g, const Tensor& activations);

// (1/m)·Σᵢ ‖aᵢ‖₁, subgradient sign(0) = 0
Tensor l1_reg(Graph& g, const Tensor& activations);

// (1/2m)·Σᵢ ‖xᵢ − c_{yᵢ}‖²; every batch label must be initialized.
Tensor center_loss(Graph& g, const Tensor& features,
                   const std::vector<std::int32_t>& labels,
                   const CenterBank& bank);

// (1/m)·Σᵢ ‖xᵢ−c_{yᵢ}‖² / (Σ_{j≠yᵢ} ‖xᵢ−c_j‖² + δ), the denominator
// running over initialized classes.
Tensor contrastive_center_loss(Graph& g, const Tensor& features,
                               const std::vector<std::int32_t>& labels,
                               const CenterBank& bank, double delta);

// (1/m)·Σᵢ ‖xᵢ−c_{yᵢ}‖² / (min_{j≠yᵢ} ‖xᵢ−c_j‖² + δ); the min gradient
// flows through the first minimizing class by index.
Tensor silhouette_loss(Graph& g, const Tensor& features,
                       const std::vector<std::int32_t>& labels,
                       const CenterBank& bank, double delta);

// Dispatch on kind; kind must not be kNone.
Tensor aux_loss(Graph& g, AuxKind kind, const Tensor& features,
                const std::vector<std::int32_t>& labels,
                const CenterBank& bank, double delta);

// L = L_class + λ_aux·L_aux
Tensor combined_loss(Graph& g, const Tensor& class_loss,
                     const Tensor& aux, double lambda_aux);

}  // namespace defrag
