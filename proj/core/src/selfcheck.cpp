#include "defrag/selfcheck.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "defrag/errors.hpp"
#include "defrag/grassmann.hpp"
#include "defrag/losses.hpp"
#include "defrag/model.hpp"
#include "defrag/ops.hpp"
#include "defrag/rng.hpp"

namespace defrag::selfcheck {

namespace {

using MatRM =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void fill_normal(Rng& rng, Tensor& t, double scale = 1.0) {
  for (double& v : t.data()) v = scale * rng.normal();
}

std::string format_detail(const char* what, double worst, double tol) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%s: worst %.3e (tol %.1e)", what, worst,
                tol);
  return buf;
}

// ---------------------------------------------------------------------
// gradient checks

struct GradCase {
  std::string name;
  double tol;
  // Draws one random instance; returns (loss builder, inputs to check).
  std::function<std::pair<LossBuilder, std::vector<Tensor>>(Rng&)> draw;
};

Tensor normal_tensor(Rng& rng, Shape shape, double scale = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape), true);
  fill_normal(rng, t, scale);
  return t;
}

// Keeps every coordinate at least `band` away from the relu/l1 kink.
Tensor away_from_zero(Rng& rng, Shape shape, double band) {
  Tensor t = Tensor::zeros(std::move(shape), true);
  for (double& v : t.data()) {
    do {
      v = rng.normal();
    } while (std::abs(v) < band);
  }
  return t;
}

// 2×2 windows re-drawn until the top-2 gap clears `band` (maxpool ties).
Tensor pool_safe(Rng& rng, std::int64_t n, std::int64_t c, std::int64_t h,
                 std::int64_t w, double band) {
  Tensor t = Tensor::zeros({n, c, h, w}, true);
  std::span<double> v = t.data();
  for (std::int64_t plane = 0; plane < n * c; ++plane) {
    for (std::int64_t oy = 0; oy < h / 2; ++oy) {
      for (std::int64_t ox = 0; ox < w / 2; ++ox) {
        double* base = v.data() + plane * h * w;
        const std::int64_t idx[4] = {
            (2 * oy) * w + 2 * ox, (2 * oy) * w + 2 * ox + 1,
            (2 * oy + 1) * w + 2 * ox, (2 * oy + 1) * w + 2 * ox + 1};
        while (true) {
          double vals[4];
          for (int i = 0; i < 4; ++i) {
            vals[i] = rng.normal();
            base[idx[i]] = vals[i];
          }
          std::sort(vals, vals + 4);
          if (vals[3] - vals[2] > band) break;
        }
      }
    }
  }
  return t;
}

std::vector<std::int32_t> random_labels(Rng& rng, std::int64_t m,
                                        std::int64_t k) {
  std::vector<std::int32_t> labels(static_cast<std::size_t>(m));
  for (auto& y : labels) {
    y = static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(k)));
  }
  return labels;
}

// Bank with all k classes initialized at random positions; for the
// silhouette case the caller additionally separates the two nearest
// other-centers per sample.
CenterBank random_bank(Rng& rng, std::int64_t k, std::int64_t d) {
  CenterBank bank(k, d, 0.5);
  std::vector<double> row(static_cast<std::size_t>(d));
  for (std::int64_t j = 0; j < k; ++j) {
    for (double& v : row) v = 2.0 * rng.normal();
    bank.set_center(static_cast<std::int32_t>(j), row);
  }
  return bank;
}

bool silhouette_min_gap_ok(const Tensor& x,
                           const std::vector<std::int32_t>& labels,
                           const CenterBank& bank, double band) {
  const std::int64_t m = x.dim(0), d = x.dim(1), k = bank.classes();
  std::span<const double> xv = x.data();
  std::span<const double> cv = bank.centers().data();
  for (std::int64_t i = 0; i < m; ++i) {
    double best = std::numeric_limits<double>::infinity();
    double second = best;
    for (std::int64_t j = 0; j < k; ++j) {
      if (j == labels[static_cast<std::size_t>(i)]) continue;
      double dist = 0.0;
      for (std::int64_t t = 0; t < d; ++t) {
        const double diff = xv[static_cast<std::size_t>(i * d + t)] -
                            cv[static_cast<std::size_t>(j * d + t)];
        dist += diff * diff;
      }
      if (dist < best) {
        second = best;
        best = dist;
      } else if (dist < second) {
        second = dist;
      }
    }
    if (second - best < band) return false;
  }
  return true;
}

std::vector<GradCase> gradient_cases() {
  std::vector<GradCase> cases;

  cases.push_back({"grad/matmul", 1e-6, [](Rng& rng) {
    Tensor a = normal_tensor(rng, {3, 4});
    Tensor b = normal_tensor(rng, {4, 2});
    LossBuilder fn = [a, b](Graph& g) { return sum(g, matmul(g, a, b)); };
    return std::pair{fn, std::vector<Tensor>{a, b}};
  }});

  cases.push_back({"grad/add_rowwise", 1e-6, [](Rng& rng) {
    Tensor x = normal_tensor(rng, {3, 5});
    Tensor b = normal_tensor(rng, {5});
    Tensor w = normal_tensor(rng, {3, 5}).set_requires_grad(false);
    LossBuilder fn = [x, b, w](Graph& g) {
      return sum(g, mul(g, add_rowwise(g, x, b), w));
    };
    return std::pair{fn, std::vector<Tensor>{x, b}};
  }});

  cases.push_back({"grad/conv2d", 1e-5, [](Rng& rng) {
    Tensor input = normal_tensor(rng, {2, 3, 8, 8});
    Tensor kernel = normal_tensor(rng, {4, 3, 5, 5}, 0.5);
    Tensor bias = normal_tensor(rng, {4});
    Tensor w = normal_tensor(rng, {2, 4, 4, 4}).set_requires_grad(false);
    LossBuilder fn = [input, kernel, bias, w](Graph& g) {
      return sum(g, mul(g, conv2d(g, input, kernel, bias), w));
    };
    return std::pair{fn, std::vector<Tensor>{input, kernel, bias}};
  }});

  cases.push_back({"grad/maxpool2", 1e-5, [](Rng& rng) {
    Tensor input = pool_safe(rng, 1, 1, 6, 6, 1e-3);
    Tensor w = normal_tensor(rng, {1, 1, 3, 3}).set_requires_grad(false);
    LossBuilder fn = [input, w](Graph& g) {
      return sum(g, mul(g, maxpool2(g, input), w));
    };
    return std::pair{fn, std::vector<Tensor>{input}};
  }});

  cases.push_back({"grad/relu", 1e-6, [](Rng& rng) {
    Tensor x = away_from_zero(rng, {4, 6}, 1e-3);
    Tensor w = normal_tensor(rng, {4, 6}).set_requires_grad(false);
    LossBuilder fn = [x, w](Graph& g) {
      return sum(g, mul(g, relu(g, x), w));
    };
    return std::pair{fn, std::vector<Tensor>{x}};
  }});

  cases.push_back({"grad/softplus", 1e-6, [](Rng& rng) {
    Tensor x = normal_tensor(rng, {4, 6}, 2.0);
    Tensor w = normal_tensor(rng, {4, 6}).set_requires_grad(false);
    LossBuilder fn = [x, w](Graph& g) {
      return sum(g, mul(g, softplus(g, x), w));
    };
    return std::pair{fn, std::vector<Tensor>{x}};
  }});

  cases.push_back({"grad/reshape_scale", 1e-6, [](Rng& rng) {
    Tensor x = normal_tensor(rng, {2, 6});
    Tensor w = normal_tensor(rng, {3, 4}).set_requires_grad(false);
    LossBuilder fn = [x, w](Graph& g) {
      return sum(g, mul(g, scale(g, reshape(g, x, {3, 4}), 1.7), w));
    };
    return std::pair{fn, std::vector<Tensor>{x}};
  }});

  cases.push_back({"grad/add_scaled", 1e-6, [](Rng& rng) {
    Tensor a = normal_tensor(rng, {5});
    Tensor b = normal_tensor(rng, {5});
    Tensor w = normal_tensor(rng, {5}).set_requires_grad(false);
    LossBuilder fn = [a, b, w](Graph& g) {
      return sum(g, mul(g, add_scaled(g, a, b, 0.37), w));
    };
    return std::pair{fn, std::vector<Tensor>{a, b}};
  }});

  cases.push_back({"grad/softmax_cross_entropy", 1e-6, [](Rng& rng) {
    Tensor logits = normal_tensor(rng, {4, 10}, 2.0);
    auto labels = random_labels(rng, 4, 10);
    LossBuilder fn = [logits, labels](Graph& g) {
      return softmax_cross_entropy(g, logits, labels);
    };
    return std::pair{fn, std::vector<Tensor>{logits}};
  }});

  cases.push_back({"grad/l2_reg", 1e-6, [](Rng& rng) {
    Tensor x = normal_tensor(rng, {8, 4});
    LossBuilder fn = [x](Graph& g) { return l2_reg(g, x); };
    return std::pair{fn, std::vector<Tensor>{x}};
  }});

  cases.push_back({"grad/l1_reg", 1e-6, [](Rng& rng) {
    Tensor x = away_from_zero(rng, {8, 4}, 1e-3);
    LossBuilder fn = [x](Graph& g) { return l1_reg(g, x); };
    return std::pair{fn, std::vector<Tensor>{x}};
  }});

  cases.push_back({"grad/center_loss", 1e-6, [](Rng& rng) {
    Tensor x = normal_tensor(rng, {8, 4});
    auto labels = random_labels(rng, 8, 10);
    auto bank = std::make_shared<CenterBank>(random_bank(rng, 10, 4));
    LossBuilder fn = [x, labels, bank](Graph& g) {
      return center_loss(g, x, labels, *bank);
    };
    return std::pair{fn, std::vector<Tensor>{x}};
  }});

  cases.push_back({"grad/contrastive_center_loss", 1e-6, [](Rng& rng) {
    Tensor x = normal_tensor(rng, {8, 4});
    auto labels = random_labels(rng, 8, 10);
    auto bank = std::make_shared<CenterBank>(random_bank(rng, 10, 4));
    LossBuilder fn = [x, labels, bank](Graph& g) {
      return contrastive_center_loss(g, x, labels, *bank, 1e-2);
    };
    return std::pair{fn, std::vector<Tensor>{x}};
  }});

  cases.push_back({"grad/silhouette_loss", 1e-6, [](Rng& rng) {
    const std::int64_t m = 8, d = 4;
    Tensor x = Tensor::zeros({m, d}, true);
    std::vector<std::int32_t> labels;
    std::shared_ptr<CenterBank> bank;
    do {
      fill_normal(rng, x);
      labels = random_labels(rng, m, 10);
      bank = std::make_shared<CenterBank>(random_bank(rng, 10, d));
    } while (!silhouette_min_gap_ok(x, labels, *bank, 1e-3));
    LossBuilder fn = [x, labels, bank](Graph& g) {
      return silhouette_loss(g, x, labels, *bank, 1e-2);
    };
    return std::pair{fn, std::vector<Tensor>{x}};
  }});

  return cases;
}

// End-to-end: the full layer chain on 16×16 inputs (the smallest square
// the two conv/pool stages accept), finite differences over a sampled
// subset of each parameter tensor.
CheckResult end_to_end_gradient_check(std::uint64_t seed) {
  Rng rng(Rng::mix(seed, 77));
  ModelState m;
  m.d_feat = 8;
  m.feature_activation = Activation::kReLU;
  m.conv1_w = normal_tensor(rng, {32, 1, 5, 5}, 0.2);
  m.conv1_b = normal_tensor(rng, {32}, 0.1);
  m.conv2_w = normal_tensor(rng, {256, 32, 5, 5}, 0.035);
  m.conv2_b = normal_tensor(rng, {256}, 0.1);
  m.fc1_w = normal_tensor(rng, {256, 256}, 0.06);
  m.fc1_b = normal_tensor(rng, {256}, 0.1);
  m.feature_w = normal_tensor(rng, {256, 8}, 0.06);
  m.head_w = normal_tensor(rng, {8, 10}, 0.3);
  m.head_b = normal_tensor(rng, {10}, 0.1);

  Tensor images = Tensor::zeros({2, 1, 16, 16});
  for (double& v : images.data()) v = rng.uniform();
  std::vector<std::int32_t> labels = {3, 7};

  auto params = m.named_parameters();
  LossBuilder fn = [&m, images, labels](Graph& g) {
    Forward fwd = forward(g, m, images);
    return softmax_cross_entropy(g, fwd.logits, labels);
  };

  // analytic gradients
  Graph g;
  Tensor loss = fn(g);
  g.backward(loss);
  std::vector<std::vector<double>> analytic;
  for (auto& [name, p] : params) {
    analytic.emplace_back(p.grad().begin(), p.grad().end());
    p.drop_grad();
  }

  double worst = 0.0;
  const double h = 1e-5;
  Graph eval_graph;
  NoGradGuard guard(eval_graph);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = params[pi].second;
    std::span<double> data = p.data();
    // every coordinate of the small tensors, a fixed sample of the big ones
    std::vector<std::size_t> coords;
    if (data.size() <= 32) {
      for (std::size_t c = 0; c < data.size(); ++c) coords.push_back(c);
    } else {
      for (int c = 0; c < 12; ++c) {
        coords.push_back(static_cast<std::size_t>(
            rng.below(static_cast<std::uint64_t>(data.size()))));
      }
    }
    for (std::size_t c : coords) {
      const double keep = data[c];
      data[c] = keep + h;
      const double up = fn(eval_graph).value();
      data[c] = keep - h;
      const double down = fn(eval_graph).value();
      data[c] = keep;
      const double fd = (up - down) / (2.0 * h);
      const double an = analytic[pi][c];
      const double rel =
          std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-3});
      worst = std::max(worst, rel);
    }
  }
  CheckResult r;
  r.name = "grad/network_end_to_end";
  r.pass = worst < 1e-4;
  r.detail = format_detail("sampled-coordinate check", worst, 1e-4);
  return r;
}

// ---------------------------------------------------------------------
// svd / retraction properties

MatRM to_eigen(const Tensor& t) {
  return Eigen::Map<const MatRM>(t.data().data(), t.dim(0), t.dim(1));
}

Tensor random_matrix(Rng& rng, std::int64_t p, std::int64_t q) {
  Tensor t = Tensor::zeros({p, q});
  fill_normal(rng, t);
  return t;
}

// Independent polar factor: M(MᵀM)^{-1/2} via symmetric eigendecomposition
// of the q×q Gram matrix.
MatRM polar_oracle(const Tensor& m) {
  MatRM mm = to_eigen(m);
  Eigen::MatrixXd gram = (mm.transpose() * mm);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  Eigen::VectorXd inv_sqrt = eig.eigenvalues();
  for (Eigen::Index i = 0; i < inv_sqrt.size(); ++i) {
    inv_sqrt[i] = 1.0 / std::sqrt(inv_sqrt[i]);
  }
  Eigen::MatrixXd gram_inv_sqrt = eig.eigenvectors() *
                                  inv_sqrt.asDiagonal() *
                                  eig.eigenvectors().transpose();
  return mm * gram_inv_sqrt;
}

double frob(const MatRM& m) { return m.norm(); }

}  // namespace

double max_rel_grad_error(const LossBuilder& fn, std::span<Tensor> inputs,
                          double h) {
  for (Tensor& t : inputs) t.drop_grad();
  Graph g;
  Tensor loss = fn(g);
  g.backward(loss);
  std::vector<std::vector<double>> analytic;
  for (Tensor& t : inputs) {
    if (t.has_grad()) {
      analytic.emplace_back(t.grad().begin(), t.grad().end());
    } else {
      analytic.emplace_back(t.data().size(), 0.0);
    }
    t.drop_grad();
  }

  Graph eval_graph;
  NoGradGuard guard(eval_graph);
  double worst = 0.0;
  for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
    std::span<double> data = inputs[ti].data();
    for (std::size_t c = 0; c < data.size(); ++c) {
      const double keep = data[c];
      data[c] = keep + h;
      const double up = fn(eval_graph).value();
      data[c] = keep - h;
      const double down = fn(eval_graph).value();
      data[c] = keep;
      const double fd = (up - down) / (2.0 * h);
      const double an = analytic[ti][c];
      const double rel =
          std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-3});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

std::vector<CheckResult> run_gradient_suite(const Options& opts) {
  std::vector<CheckResult> results;
  bool fault_pending = opts.inject_fault;
  for (const GradCase& c : gradient_cases()) {
    Rng rng(Rng::mix(opts.seed, std::hash<std::string>{}(c.name)));
    double worst = 0.0;
    for (int i = 0; i < opts.instances; ++i) {
      auto [fn, inputs] = c.draw(rng);
      worst = std::max(worst, max_rel_grad_error(fn, inputs));
    }
    if (fault_pending) {
      worst += 1.0;  // negative control: force this check to fail
      fault_pending = false;
    }
    CheckResult r;
    r.name = c.name;
    r.pass = worst < c.tol;
    r.detail = format_detail("fd comparison", worst, c.tol);
    if (opts.inject_fault && results.empty()) {
      r.detail += " [fault injected]";
    }
    results.push_back(r);
  }
  results.push_back(end_to_end_gradient_check(opts.seed));
  return results;
}

std::vector<CheckResult> run_svd_suite(const Options& opts) {
  std::vector<CheckResult> results;
  Rng rng(Rng::mix(opts.seed, 101));

  double worst_recon = 0.0, worst_orth = 0.0, worst_sv = 0.0;
  double worst_retract_orth = 0.0, worst_idem = 0.0, worst_scale = 0.0,
         worst_polar = 0.0;
  for (int i = 0; i < opts.instances; ++i) {
    const std::int64_t p = i % 2 == 0 ? 256 : 16;
    const std::int64_t q = i % 2 == 0 ? 8 : 5;
    Tensor m = random_matrix(rng, p, q);
    SvdThin f = svd_thin(m);

    MatRM u = to_eigen(f.u), v = to_eigen(f.v);
    Eigen::VectorXd s =
        Eigen::Map<const Eigen::VectorXd>(f.s.data(), static_cast<long>(q));
    const double mnorm = frob(to_eigen(m));
    worst_recon = std::max(
        worst_recon,
        frob(MatRM(u * s.asDiagonal() * v.transpose() - to_eigen(m))) /
            std::max(mnorm, 1e-300));
    worst_orth = std::max(
        worst_orth,
        frob(MatRM(u.transpose() * u - Eigen::MatrixXd::Identity(q, q))));
    worst_orth = std::max(
        worst_orth,
        frob(MatRM(v.transpose() * v - Eigen::MatrixXd::Identity(q, q))));

    // singular values against the Gram-eigenvalue oracle
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
        Eigen::MatrixXd(to_eigen(m).transpose() * to_eigen(m)));
    for (std::int64_t k = 0; k < q; ++k) {
      const double oracle =
          std::sqrt(std::max(0.0, eig.eigenvalues()[q - 1 - k]));
      worst_sv = std::max(
          worst_sv, std::abs(oracle - f.s[static_cast<std::size_t>(k)]) /
                        std::max(oracle, 1e-12));
    }

    Tensor r = retract(m);
    worst_retract_orth =
        std::max(worst_retract_orth, orthonormality_error(r));
    Tensor rr = retract(r);
    worst_idem =
        std::max(worst_idem, frob(MatRM(to_eigen(rr) - to_eigen(r))));
    Tensor scaled = m.clone();
    for (double& x : scaled.data()) x *= 3.7;
    worst_scale = std::max(
        worst_scale, frob(MatRM(to_eigen(retract(scaled)) - to_eigen(r))));
    worst_polar =
        std::max(worst_polar, frob(MatRM(to_eigen(r) - polar_oracle(m))));
  }

  auto push = [&results](const char* name, double worst, double tol) {
    CheckResult r;
    r.name = name;
    r.pass = worst < tol;
    r.detail = format_detail("residual", worst, tol);
    results.push_back(r);
  };
  push("svd/reconstruction", worst_recon, 1e-10);
  push("svd/orthogonality", worst_orth, 1e-10);
  push("svd/singular_values_vs_eig/oracle", worst_sv, 1e-9);
  push("retract/orthonormality", worst_retract_orth, 1e-10);
  push("retract/idempotence", worst_idem, 1e-10);
  push("retract/scale_invariance", worst_scale, 1e-10);
  push("retract/polar_oracle", worst_polar, 1e-9);

  // rank deficiency must be refused
  CheckResult degen;
  degen.name = "retract/rank_deficiency_refused";
  Tensor bad = Tensor::zeros({6, 3});
  bad.at({0, 0}) = 1.0;
  bad.at({1, 1}) = 1.0;  // third column identically zero
  try {
    retract(bad);
    degen.pass = false;
    degen.detail = "rank-deficient matrix was retracted without error";
  } catch (const DegeneracyError&) {
    degen.pass = true;
    degen.detail = "degeneracy error raised as specified";
  }
  results.push_back(degen);
  return results;
}

namespace {

// Naive per-sample double loops, written directly from the loss
// definitions; deliberately independent of the graph implementations.
double oracle_center(const Tensor& x, const std::vector<std::int32_t>& y,
                     const Tensor& centers) {
  const std::int64_t m = x.dim(0), d = x.dim(1);
  double total = 0.0;
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t t = 0; t < d; ++t) {
      const double diff =
          x.at({i, t}) - centers.at({y[static_cast<std::size_t>(i)], t});
      total += diff * diff;
    }
  }
  return total / (2.0 * static_cast<double>(m));
}

double oracle_contrastive(const Tensor& x, const std::vector<std::int32_t>& y,
                          const Tensor& centers, double delta) {
  const std::int64_t m = x.dim(0), d = x.dim(1), k = centers.dim(0);
  double total = 0.0;
  for (std::int64_t i = 0; i < m; ++i) {
    double num = 0.0, den = delta;
    for (std::int64_t j = 0; j < k; ++j) {
      double dist = 0.0;
      for (std::int64_t t = 0; t < d; ++t) {
        const double diff = x.at({i, t}) - centers.at({j, t});
        dist += diff * diff;
      }
      if (j == y[static_cast<std::size_t>(i)]) {
        num = dist;
      } else {
        den += dist;
      }
    }
    total += num / den;
  }
  return total / static_cast<double>(m);
}

double oracle_silhouette(const Tensor& x, const std::vector<std::int32_t>& y,
                         const Tensor& centers, double delta) {
  const std::int64_t m = x.dim(0), d = x.dim(1), k = centers.dim(0);
  double total = 0.0;
  for (std::int64_t i = 0; i < m; ++i) {
    double num = 0.0;
    double nearest = std::numeric_limits<double>::infinity();
    for (std::int64_t j = 0; j < k; ++j) {
      double dist = 0.0;
      for (std::int64_t t = 0; t < d; ++t) {
        const double diff = x.at({i, t}) - centers.at({j, t});
        dist += diff * diff;
      }
      if (j == y[static_cast<std::size_t>(i)]) {
        num = dist;
      } else {
        nearest = std::min(nearest, dist);
      }
    }
    total += num / (nearest + delta);
  }
  return total / static_cast<double>(m);
}

}  // namespace

std::vector<CheckResult> run_loss_oracle_suite(const Options& opts) {
  std::vector<CheckResult> results;
  Rng rng(Rng::mix(opts.seed, 202));
  Graph g;
  NoGradGuard guard(g);

  double worst_center = 0.0, worst_contrastive = 0.0, worst_sil = 0.0,
         worst_order = 0.0, worst_shift = 0.0;
  for (int i = 0; i < opts.instances; ++i) {
    const std::int64_t m = 1 + static_cast<std::int64_t>(rng.below(64));
    const std::int64_t d = 1 + static_cast<std::int64_t>(rng.below(16));
    const double delta = 1e-2;
    Tensor x = Tensor::zeros({m, d});
    fill_normal(rng, x);
    auto labels = random_labels(rng, m, 10);
    CenterBank bank = random_bank(rng, 10, d);

    const double c0 = center_loss(g, x, labels, bank).value();
    const double c1 = oracle_center(x, labels, bank.centers());
    worst_center = std::max(worst_center, std::abs(c0 - c1));

    const double q0 =
        contrastive_center_loss(g, x, labels, bank, delta).value();
    const double q1 = oracle_contrastive(x, labels, bank.centers(), delta);
    worst_contrastive = std::max(worst_contrastive, std::abs(q0 - q1));

    const double s0 = silhouette_loss(g, x, labels, bank, delta).value();
    const double s1 = oracle_silhouette(x, labels, bank.centers(), delta);
    worst_sil = std::max(worst_sil, std::abs(s0 - s1));

    // min over classes ≤ sum over classes in the denominator
    worst_order = std::max(worst_order, q0 - s0);

    // translation invariance: shift features and centers together
    Tensor xs = x.clone();
    CenterBank shifted(10, d, 0.5);
    std::vector<double> row(static_cast<std::size_t>(d));
    std::vector<double> offset(static_cast<std::size_t>(d));
    for (double& v : offset) v = rng.normal();
    for (std::int64_t r = 0; r < m; ++r) {
      for (std::int64_t t = 0; t < d; ++t) {
        xs.at({r, t}) += offset[static_cast<std::size_t>(t)];
      }
    }
    for (std::int32_t j = 0; j < 10; ++j) {
      for (std::int64_t t = 0; t < d; ++t) {
        row[static_cast<std::size_t>(t)] =
            bank.centers().at({j, t}) + offset[static_cast<std::size_t>(t)];
      }
      shifted.set_center(j, row);
    }
    worst_shift = std::max(
        worst_shift,
        std::abs(center_loss(g, xs, labels, shifted).value() - c0));
    worst_shift = std::max(
        worst_shift,
        std::abs(
            contrastive_center_loss(g, xs, labels, shifted, delta).value() -
            q0));
    worst_shift = std::max(
        worst_shift,
        std::abs(silhouette_loss(g, xs, labels, shifted, delta).value() -
                 s0));
  }

  auto push = [&results](const char* name, double worst, double tol) {
    CheckResult r;
    r.name = name;
    r.pass = worst < tol;
    r.detail = format_detail("deviation", worst, tol);
    results.push_back(r);
  };
  push("oracle/center_loss", worst_center, 1e-12);
  push("oracle/contrastive_center_loss", worst_contrastive, 1e-12);
  push("oracle/silhouette_loss", worst_sil, 1e-12);
  push("oracle/silhouette_ge_contrastive", worst_order, 1e-15);
  push("oracle/translation_invariance", worst_shift, 1e-12);
  return results;
}

std::vector<CheckResult> run_all(const Options& opts) {
  std::vector<CheckResult> results = run_gradient_suite(opts);
  auto svd = run_svd_suite(opts);
  results.insert(results.end(), svd.begin(), svd.end());
  auto oracle = run_loss_oracle_suite(opts);
  results.insert(results.end(), oracle.begin(), oracle.end());
  return results;
}

bool all_passed(const std::vector<CheckResult>& results) {
  for (const CheckResult& r : results) {
    if (!r.pass) return false;
  }
  return true;
}

}  // namespace defrag::selfcheck
