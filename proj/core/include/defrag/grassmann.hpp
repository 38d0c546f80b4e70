#pragma once

#include <vector>

#include "defrag/tensor.hpp"

namespace defrag {

struct SvdThin {
  Tensor u;               // [p×q], orthonormal columns
  std::vector<double> s;  // q singular values, descending, nonnegative
  Tensor v;               // [q×q], orthonormal
};

// Thin SVD of a p×q matrix with p ≥ q via one-sided Jacobi on columns.
// Sweeps run until every off-diagonal Gram entry falls below
// 1e-14·‖M‖²_F, capped at 60 sweeps.  Columns of U belonging to zero
// singular values are completed by Gram-Schmidt so UᵀU = I always holds.
SvdThin svd_thin(const Tensor& m);

// M′ = UVᵀ, the nearest column-orthonormal matrix in Frobenius norm.
// Rank deficiency (any σ ≤ 1e-12·max σ) is a degeneracy error.
Tensor retract(const Tensor& m);

// Overwrites m's storage with retract(m); the handle (and anyone sharing
// it) keeps pointing at the same buffer.
void retract_in_place(Tensor& m);

// ‖MᵀM − I‖_F
double orthonormality_error(const Tensor& m);

}  // namespace defrag
