#include "defrag/losses.hpp"

#include <cmath>
#include <limits>
#include <memory>

#include "defrag/errors.hpp"
#include "defrag/ops.hpp"

namespace defrag {

const char* aux_kind_name(AuxKind kind) {
  switch (kind) {
    case AuxKind::kNone:
      return "none";
    case AuxKind::kL1:
      return "l1";
    case AuxKind::kL2:
      return "l2";
    case AuxKind::kCenter:
      return "center";
    case AuxKind::kContrastiveCenter:
      return "contrastive_center";
    case AuxKind::kSilhouette:
      return "silhouette";
  }
  throw UsageError("unknown aux kind enum value");
}

AuxKind aux_kind_from_name(const std::string& name) {
  if (name == "none") return AuxKind::kNone;
  if (name == "l1") return AuxKind::kL1;
  if (name == "l2") return AuxKind::kL2;
  if (name == "center") return AuxKind::kCenter;
  if (name == "contrastive_center") return AuxKind::kContrastiveCenter;
  if (name == "silhouette") return AuxKind::kSilhouette;
  throw ConfigError("unknown aux loss '" + name + "'");
}

CenterBank::CenterBank(std::int64_t classes, std::int64_t dim, double alpha)
    : centers_(Tensor::zeros({classes, dim})),
      initialized_(static_cast<std::size_t>(classes), false),
      alpha_(alpha) {
  if (alpha <= 0.0 || alpha > 1.0) {
    throw ValidationError("center rate alpha must lie in (0,1], got " +
                          std::to_string(alpha));
  }
}

bool CenterBank::is_initialized(std::int32_t cls) const {
  if (cls < 0 || cls >= static_cast<std::int32_t>(initialized_.size())) {
    throw ValidationError("class " + std::to_string(cls) +
                          " outside the center bank");
  }
  return initialized_[static_cast<std::size_t>(cls)];
}

std::int64_t CenterBank::initialized_count() const {
  std::int64_t n = 0;
  for (bool b : initialized_) n += b ? 1 : 0;
  return n;
}

namespace {

void check_feature_shape(const Tensor& features,
                         const std::vector<std::int32_t>& labels,
                         std::int64_t dim) {
  if (features.rank() != 2) {
    throw DimensionError("features must be [m×d], got " +
                         shape_to_string(features.shape()));
  }
  if (features.dim(1) != dim) {
    throw DimensionError("feature dim " + std::to_string(features.dim(1)) +
                         " does not match center dim " + std::to_string(dim));
  }
  if (static_cast<std::int64_t>(labels.size()) != features.dim(0)) {
    throw DimensionError("got " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(features.dim(0)) +
                         " feature rows");
  }
}

}  // namespace

void CenterBank::seed_uninitialized(const Tensor& features,
                                    const std::vector<std::int32_t>& labels) {
  check_feature_shape(features, labels, dim());
  const std::int64_t d = dim();
  std::span<const double> x = features.data();
  std::vector<std::int64_t> counts(initialized_.size(), 0);
  std::vector<double> sums(initialized_.size() * static_cast<std::size_t>(d),
                           0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto c = static_cast<std::size_t>(labels[i]);
    if (labels[i] < 0 || c >= initialized_.size()) {
      throw ValidationError("label " + std::to_string(labels[i]) +
                            " outside the center bank");
    }
    if (initialized_[c]) continue;
    ++counts[c];
    for (std::int64_t k = 0; k < d; ++k) {
      sums[c * static_cast<std::size_t>(d) + static_cast<std::size_t>(k)] +=
          x[static_cast<std::size_t>(i) * static_cast<std::size_t>(d) +
            static_cast<std::size_t>(k)];
    }
  }
  std::span<double> cdata = centers_.data();
  for (std::size_t c = 0; c < initialized_.size(); ++c) {
    if (counts[c] == 0) continue;
    for (std::int64_t k = 0; k < d; ++k) {
      cdata[c * static_cast<std::size_t>(d) + static_cast<std::size_t>(k)] =
          sums[c * static_cast<std::size_t>(d) + static_cast<std::size_t>(k)] /
          static_cast<double>(counts[c]);
    }
    initialized_[c] = true;
  }
}

void CenterBank::update(const Tensor& features,
                        const std::vector<std::int32_t>& labels) {
  check_feature_shape(features, labels, dim());
  const std::int64_t d = dim();
  std::span<const double> x = features.data();
  std::span<double> cdata = centers_.data();
  for (std::size_t c = 0; c < initialized_.size(); ++c) {
    std::int64_t n = 0;
    std::vector<double> delta(static_cast<std::size_t>(d), 0.0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (static_cast<std::size_t>(labels[i]) != c) continue;
      ++n;
      for (std::int64_t k = 0; k < d; ++k) {
        delta[static_cast<std::size_t>(k)] +=
            cdata[c * static_cast<std::size_t>(d) +
                  static_cast<std::size_t>(k)] -
            x[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(k)];
      }
    }
    if (n == 0) continue;
    const double scale = alpha_ / static_cast<double>(1 + n);
    for (std::int64_t k = 0; k < d; ++k) {
      cdata[c * static_cast<std::size_t>(d) + static_cast<std::size_t>(k)] -=
          scale * delta[static_cast<std::size_t>(k)];
    }
  }
}

void CenterBank::set_center(std::int32_t cls, std::span<const double> values) {
  if (cls < 0 || cls >= classes()) {
    throw ValidationError("class " + std::to_string(cls) +
                          " outside the center bank");
  }
  if (static_cast<std::int64_t>(values.size()) != dim()) {
    throw DimensionError("center value length " +
                         std::to_string(values.size()) +
                         " does not match dim " + std::to_string(dim()));
  }
  std::span<double> cdata = centers_.data();
  for (std::int64_t k = 0; k < dim(); ++k) {
    cdata[static_cast<std::size_t>(cls) * static_cast<std::size_t>(dim()) +
          static_cast<std::size_t>(k)] = values[static_cast<std::size_t>(k)];
  }
  initialized_[static_cast<std::size_t>(cls)] = true;
}

Tensor l2_reg(Graph& g, const Tensor& activations) {
  if (activations.rank() != 2) {
    throw DimensionError("l2_reg expects [m×d], got " +
                         shape_to_string(activations.shape()));
  }
  const double m = static_cast<double>(activations.dim(0));
  double total = 0.0;
  for (double v : activations.data()) total += v * v;
  Tensor out = Tensor::scalar(total / m);
  if (g.grad_enabled() && activations.requires_grad()) {
    out.set_requires_grad(true);
    Tensor x = activations;
    g.record("l2_reg", [x, out, m]() mutable {
      if (!out.has_grad()) return;
      const double d = out.grad()[0];
      auto dx = x.ensure_grad();
      std::span<const double> xv = x.data();
      for (std::size_t i = 0; i < xv.size(); ++i) {
        dx[i] += d * 2.0 * xv[i] / m;
      }
    });
  }
  return out;
}

Tensor l1_reg(Graph& g, const Tensor& activations) {
  if (activations.rank() != 2) {
    throw DimensionError("l1_reg expects [m×d], got " +
                         shape_to_string(activations.shape()));
  }
  const double m = static_cast<double>(activations.dim(0));
  double total = 0.0;
  for (double v : activations.data()) total += std::abs(v);
  Tensor out = Tensor::scalar(total / m);
  if (g.grad_enabled() && activations.requires_grad()) {
    out.set_requires_grad(true);
    Tensor x = activations;
    g.record("l1_reg", [x, out, m]() mutable {
      if (!out.has_grad()) return;
      const double d = out.grad()[0];
      auto dx = x.ensure_grad();
      std::span<const double> xv = x.data();
      for (std::size_t i = 0; i < xv.size(); ++i) {
        const double s = xv[i] > 0.0 ? 1.0 : (xv[i] < 0.0 ? -1.0 : 0.0);
        dx[i] += d * s / m;
      }
    });
  }
  return out;
}

namespace {

// Shared validation for the center-based losses.  Returns a snapshot of the
// center matrix so the backward closure sees the values used in the forward
// pass even after update() runs.
Tensor center_snapshot(const Tensor& features,
                       const std::vector<std::int32_t>& labels,
                       const CenterBank& bank, std::int64_t min_initialized) {
  if (features.rank() != 2 || features.dim(1) != bank.dim()) {
    throw DimensionError("features " + shape_to_string(features.shape()) +
                         " do not match center dim " +
                         std::to_string(bank.dim()));
  }
  if (static_cast<std::int64_t>(labels.size()) != features.dim(0)) {
    throw DimensionError("got " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(features.dim(0)) +
                         " feature rows");
  }
  if (bank.initialized_count() < min_initialized) {
    throw UsageError("loss needs at least " + std::to_string(min_initialized) +
                     " initialized classes, bank has " +
                     std::to_string(bank.initialized_count()));
  }
  for (std::int32_t y : labels) {
    if (!bank.is_initialized(y)) {
      throw UsageError("class " + std::to_string(y) +
                       " has no initialized center");
    }
  }
  return bank.centers().clone();
}

double sqdist(const double* a, const double* b, std::int64_t d) {
  double s = 0.0;
  for (std::int64_t k = 0; k < d; ++k) {
    const double diff = a[k] - b[k];
    s += diff * diff;
  }
  return s;
}

}  // namespace

Tensor center_loss(Graph& g, const Tensor& features,
                   const std::vector<std::int32_t>& labels,
                   const CenterBank& bank) {
  Tensor c = center_snapshot(features, labels, bank, 1);
  const std::int64_t m = features.dim(0), d = features.dim(1);
  std::span<const double> x = features.data();
  double total = 0.0;
  for (std::int64_t i = 0; i < m; ++i) {
    total += sqdist(x.data() + i * d,
                    c.data().data() + labels[static_cast<std::size_t>(i)] * d,
                    d);
  }
  Tensor out = Tensor::scalar(total / (2.0 * static_cast<double>(m)));
  if (g.grad_enabled() && features.requires_grad()) {
    out.set_requires_grad(true);
    Tensor xs = features;
    g.record("center_loss", [xs, out, c, labels, m, d]() mutable {
      if (!out.has_grad()) return;
      const double g0 = out.grad()[0] / static_cast<double>(m);
      auto dx = xs.ensure_grad();
      std::span<const double> xv = xs.data();
      for (std::int64_t i = 0; i < m; ++i) {
        const double* ci =
            c.data().data() + labels[static_cast<std::size_t>(i)] * d;
        for (std::int64_t k = 0; k < d; ++k) {
          dx[static_cast<std::size_t>(i * d + k)] +=
              g0 * (xv[static_cast<std::size_t>(i * d + k)] - ci[k]);
        }
      }
    });
  }
  return out;
}

Tensor contrastive_center_loss(Graph& g, const Tensor& features,
                               const std::vector<std::int32_t>& labels,
                               const CenterBank& bank, double delta) {
  if (delta <= 0.0) {
    throw ValidationError("delta must be positive, got " +
                          std::to_string(delta));
  }
  Tensor c = center_snapshot(features, labels, bank, 2);
  const std::int64_t m = features.dim(0), d = features.dim(1);
  const std::int64_t k = bank.classes();
  std::vector<bool> init(static_cast<std::size_t>(k));
  for (std::int64_t j = 0; j < k; ++j) {
    init[static_cast<std::size_t>(j)] =
        bank.is_initialized(static_cast<std::int32_t>(j));
  }
  std::span<const double> x = features.data();
  auto num = std::make_shared<std::vector<double>>(
      static_cast<std::size_t>(m));
  auto den = std::make_shared<std::vector<double>>(
      static_cast<std::size_t>(m));
  double total = 0.0;
  for (std::int64_t i = 0; i < m; ++i) {
    const std::int32_t yi = labels[static_cast<std::size_t>(i)];
    const double* xi = x.data() + i * d;
    double n_i = sqdist(xi, c.data().data() + yi * d, d);
    double d_i = delta;
    for (std::int64_t j = 0; j < k; ++j) {
      if (j == yi || !init[static_cast<std::size_t>(j)]) continue;
      d_i += sqdist(xi, c.data().data() + j * d, d);
    }
    (*num)[static_cast<std::size_t>(i)] = n_i;
    (*den)[static_cast<std::size_t>(i)] = d_i;
    total += n_i / d_i;
  }
  Tensor out = Tensor::scalar(total / static_cast<double>(m));
  if (g.grad_enabled() && features.requires_grad()) {
    out.set_requires_grad(true);
    Tensor xs = features;
    g.record("contrastive_center_loss",
             [xs, out, c, labels, init, num, den, m, d, k]() mutable {
               if (!out.has_grad()) return;
               const double g0 = out.grad()[0] / static_cast<double>(m);
               auto dx = xs.ensure_grad();
               std::span<const double> xv = xs.data();
               for (std::int64_t i = 0; i < m; ++i) {
                 const std::int32_t yi = labels[static_cast<std::size_t>(i)];
                 const double* xi = xv.data() + i * d;
                 double* dxi = dx.data() + i * d;
                 const double n_i = (*num)[static_cast<std::size_t>(i)];
                 const double d_i = (*den)[static_cast<std::size_t>(i)];
                 const double* cy = c.data().data() + yi * d;
                 for (std::int64_t t = 0; t < d; ++t) {
                   dxi[t] += g0 * 2.0 * (xi[t] - cy[t]) / d_i;
                 }
                 const double coeff = g0 * n_i / (d_i * d_i);
                 for (std::int64_t j = 0; j < k; ++j) {
                   if (j == yi || !init[static_cast<std::size_t>(j)]) continue;
                   const double* cj = c.data().data() + j * d;
                   for (std::int64_t t = 0; t < d; ++t) {
                     dxi[t] -= coeff * 2.0 * (xi[t] - cj[t]);
                   }
                 }
               }
             });
  }
  return out;
}

Tensor silhouette_loss(Graph& g, const Tensor& features,
                       const std::vector<std::int32_t>& labels,
                       const CenterBank& bank, double delta) {
  if (delta <= 0.0) {
    throw ValidationError("delta must be positive, got " +
                          std::to_string(delta));
  }
  Tensor c = center_snapshot(features, labels, bank, 2);
  const std::int64_t m = features.dim(0), d = features.dim(1);
  const std::int64_t k = bank.classes();
  std::span<const double> x = features.data();
  auto num = std::make_shared<std::vector<double>>(
      static_cast<std::size_t>(m));
  auto den = std::make_shared<std::vector<double>>(
      static_cast<std::size_t>(m));
  auto nearest = std::make_shared<std::vector<std::int32_t>>(
      static_cast<std::size_t>(m));
  double total = 0.0;
  for (std::int64_t i = 0; i < m; ++i) {
    const std::int32_t yi = labels[static_cast<std::size_t>(i)];
    const double* xi = x.data() + i * d;
    double n_i = sqdist(xi, c.data().data() + yi * d, d);
    double best = std::numeric_limits<double>::infinity();
    std::int32_t best_j = -1;
    for (std::int64_t j = 0; j < k; ++j) {
      if (j == yi || !bank.is_initialized(static_cast<std::int32_t>(j))) {
        continue;
      }
      const double dist = sqdist(xi, c.data().data() + j * d, d);
      if (dist < best) {
        best = dist;
        best_j = static_cast<std::int32_t>(j);
      }
    }
    const double d_i = best + delta;
    (*num)[static_cast<std::size_t>(i)] = n_i;
    (*den)[static_cast<std::size_t>(i)] = d_i;
    (*nearest)[static_cast<std::size_t>(i)] = best_j;
    total += n_i / d_i;
  }
  Tensor out = Tensor::scalar(total / static_cast<double>(m));
  if (g.grad_enabled() && features.requires_grad()) {
    out.set_requires_grad(true);
    Tensor xs = features;
    g.record("silhouette_loss",
             [xs, out, c, labels, num, den, nearest, m, d]() mutable {
               if (!out.has_grad()) return;
               const double g0 = out.grad()[0] / static_cast<double>(m);
               auto dx = xs.ensure_grad();
               std::span<const double> xv = xs.data();
               for (std::int64_t i = 0; i < m; ++i) {
                 const std::int32_t yi = labels[static_cast<std::size_t>(i)];
                 const std::int32_t jm =
                     (*nearest)[static_cast<std::size_t>(i)];
                 const double* xi = xv.data() + i * d;
                 double* dxi = dx.data() + i * d;
                 const double n_i = (*num)[static_cast<std::size_t>(i)];
                 const double d_i = (*den)[static_cast<std::size_t>(i)];
                 const double* cy = c.data().data() + yi * d;
                 const double* cm = c.data().data() + jm * d;
                 const double coeff = g0 * n_i / (d_i * d_i);
                 for (std::int64_t t = 0; t < d; ++t) {
                   dxi[t] += g0 * 2.0 * (xi[t] - cy[t]) / d_i -
                             coeff * 2.0 * (xi[t] - cm[t]);
                 }
               }
             });
  }
  return out;
}

Tensor aux_loss(Graph& g, AuxKind kind, const Tensor& features,
                const std::vector<std::int32_t>& labels,
                const CenterBank& bank, double delta) {
  switch (kind) {
    case AuxKind::kL1:
      return l1_reg(g, features);
    case AuxKind::kL2:
      return l2_reg(g, features);
    case AuxKind::kCenter:
      return center_loss(g, features, labels, bank);
    case AuxKind::kContrastiveCenter:
      return contrastive_center_loss(g, features, labels, bank, delta);
    case AuxKind::kSilhouette:
      return silhouette_loss(g, features, labels, bank, delta);
    case AuxKind::kNone:
      break;
  }
  throw UsageError("aux_loss called with kind=none");
}

Tensor combined_loss(Graph& g, const Tensor& class_loss, const Tensor& aux,
                     double lambda_aux) {
  if (lambda_aux < 0.0) {
    throw ValidationError("lambda_aux must be nonnegative, got " +
                          std::to_string(lambda_aux));
  }
  return add_scaled(g, class_loss, aux, lambda_aux);
}

}  // namespace defrag
