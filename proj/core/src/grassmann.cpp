#include "defrag/grassmann.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "defrag/errors.hpp"

namespace defrag {

namespace {

constexpr int kMaxSweeps = 60;

double column_dot(const double* a, std::int64_t col_a, const double* b,
                  std::int64_t col_b, std::int64_t p, std::int64_t q) {
  double s = 0.0;
  for (std::int64_t r = 0; r < p; ++r) {
    s += a[r * q + col_a] * b[r * q + col_b];
  }
  return s;
}

void rotate_columns(double* a, std::int64_t i, std::int64_t j, std::int64_t p,
                    std::int64_t q, double c, double s) {
  for (std::int64_t r = 0; r < p; ++r) {
    const double ui = a[r * q + i];
    const double vj = a[r * q + j];
    a[r * q + i] = c * ui - s * vj;
    a[r * q + j] = s * ui + c * vj;
  }
}

}  // namespace

SvdThin svd_thin(const Tensor& m) {
  if (m.rank() != 2) {
    throw DimensionError("svd_thin expects a matrix, got " +
                         shape_to_string(m.shape()));
  }
  const std::int64_t p = m.dim(0), q = m.dim(1);
  if (p < q) {
    throw DimensionError("svd_thin needs p ≥ q, got " +
                         shape_to_string(m.shape()) +
                         "; transpose before calling");
  }
  check_finite(m, "svd_thin input");

  Tensor a = m.clone();
  a.set_requires_grad(false);
  Tensor v = Tensor::zeros({q, q});
  for (std::int64_t i = 0; i < q; ++i) v.at({i, i}) = 1.0;

  double frob2 = 0.0;
  for (double x : m.data()) frob2 += x * x;
  const double tol = 1e-14 * frob2;

  double* ad = a.data().data();
  double* vd = v.data().data();
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::int64_t i = 0; i < q - 1; ++i) {
      for (std::int64_t j = i + 1; j < q; ++j) {
        const double gamma = column_dot(ad, i, ad, j, p, q);
        if (std::abs(gamma) <= tol) continue;
        rotated = true;
        const double alpha = column_dot(ad, i, ad, i, p, q);
        const double beta = column_dot(ad, j, ad, j, p, q);
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t =
            (zeta >= 0.0 ? 1.0 : -1.0) /
            (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        rotate_columns(ad, i, j, p, q, c, s);
        rotate_columns(vd, i, j, q, q, c, s);
      }
    }
    if (!rotated) break;
  }

  std::vector<double> sigma(static_cast<std::size_t>(q));
  for (std::int64_t i = 0; i < q; ++i) {
    sigma[static_cast<std::size_t>(i)] =
        std::sqrt(column_dot(ad, i, ad, i, p, q));
  }

  std::vector<std::int64_t> order(static_cast<std::size_t>(q));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::int64_t x, std::int64_t y) {
                     return sigma[static_cast<std::size_t>(x)] >
                            sigma[static_cast<std::size_t>(y)];
                   });

  SvdThin out;
  out.u = Tensor::zeros({p, q});
  out.v = Tensor::zeros({q, q});
  out.s.resize(static_cast<std::size_t>(q));
  double* ud = out.u.data().data();
  double* ovd = out.v.data().data();
  for (std::int64_t k = 0; k < q; ++k) {
    const std::int64_t src = order[static_cast<std::size_t>(k)];
    const double s = sigma[static_cast<std::size_t>(src)];
    out.s[static_cast<std::size_t>(k)] = s;
    if (s > 0.0) {
      for (std::int64_t r = 0; r < p; ++r) {
        ud[r * q + k] = ad[r * q + src] / s;
      }
    }
    for (std::int64_t r = 0; r < q; ++r) {
      ovd[r * q + k] = vd[r * q + src];
    }
  }

  // Zero singular values leave their U columns undefined; fill them with
  // unit vectors orthogonal to everything already placed.
  for (std::int64_t k = 0; k < q; ++k) {
    if (out.s[static_cast<std::size_t>(k)] > 0.0) continue;
    for (std::int64_t basis = 0; basis < p; ++basis) {
      std::vector<double> cand(static_cast<std::size_t>(p), 0.0);
      cand[static_cast<std::size_t>(basis)] = 1.0;
      for (std::int64_t c = 0; c < k; ++c) {
        double proj = 0.0;
        for (std::int64_t r = 0; r < p; ++r) {
          proj += cand[static_cast<std::size_t>(r)] * ud[r * q + c];
        }
        for (std::int64_t r = 0; r < p; ++r) {
          cand[static_cast<std::size_t>(r)] -= proj * ud[r * q + c];
        }
      }
      double norm2 = 0.0;
      for (double x : cand) norm2 += x * x;
      if (norm2 > 0.25) {
        const double inv = 1.0 / std::sqrt(norm2);
        for (std::int64_t r = 0; r < p; ++r) {
          ud[r * q + k] = cand[static_cast<std::size_t>(r)] * inv;
        }
        break;
      }
    }
  }
  return out;
}

Tensor retract(const Tensor& m) {
  SvdThin f = svd_thin(m);
  const std::int64_t p = m.dim(0), q = m.dim(1);
  const double smax = f.s.empty() ? 0.0 : f.s[0];
  for (double s : f.s) {
    if (s <= 1e-12 * smax || smax == 0.0) {
      throw DegeneracyError(
          "projection matrix is rank-deficient (singular value " +
          std::to_string(s) + " vs max " + std::to_string(smax) +
          "); re-initialize the feature layer");
    }
  }
  Tensor out = Tensor::zeros({p, q});
  const double* ud = f.u.data().data();
  const double* vd = f.v.data().data();
  double* od = out.data().data();
  // M' = U·Vᵀ with V square q×q
  for (std::int64_t r = 0; r < p; ++r) {
    for (std::int64_t c = 0; c < q; ++c) {
      double s = 0.0;
      for (std::int64_t k = 0; k < q; ++k) {
        s += ud[r * q + k] * vd[c * q + k];
      }
      od[r * q + c] = s;
    }
  }
  return out;
}

void retract_in_place(Tensor& m) {
  Tensor r = retract(m);
  std::copy(r.data().begin(), r.data().end(), m.data().begin());
}

double orthonormality_error(const Tensor& m) {
  if (m.rank() != 2) {
    throw DimensionError("orthonormality_error expects a matrix, got " +
                         shape_to_string(m.shape()));
  }
  const std::int64_t p = m.dim(0), q = m.dim(1);
  const double* md = m.data().data();
  double err2 = 0.0;
  for (std::int64_t i = 0; i < q; ++i) {
    for (std::int64_t j = 0; j < q; ++j) {
      double dot = 0.0;
      for (std::int64_t r = 0; r < p; ++r) {
        dot += md[r * q + i] * md[r * q + j];
      }
      const double target = i == j ? 1.0 : 0.0;
      err2 += (dot - target) * (dot - target);
    }
  }
  return std::sqrt(err2);
}

}  // namespace defrag
