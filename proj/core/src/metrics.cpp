#include "defrag/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>

#include "defrag/errors.hpp"
#include "defrag/graph.hpp"

namespace defrag {

namespace {

// Forward the dataset in fixed-size chunks with grad recording off, handing
// each batch's result to sink.  Chunking keeps peak memory flat.
template <typename Sink>
void eval_batches(const ModelState& model, const Dataset& d,
                  std::int64_t eval_batch, Sink&& sink) {
  const std::int64_t n = d.size();
  Graph g;
  NoGradGuard guard(g);
  std::span<const double> src = d.images.data();
  for (std::int64_t start = 0; start < n; start += eval_batch) {
    const std::int64_t m = std::min(eval_batch, n - start);
    Tensor images = Tensor::zeros({m, 1, 28, 28});
    std::copy(src.data() + start * 784, src.data() + (start + m) * 784,
              images.data().data());
    Forward fwd = forward(g, model, images);
    sink(start, m, fwd);
  }
}

std::vector<std::vector<std::int64_t>> group_by_class(
    const std::vector<std::int32_t>& labels) {
  std::vector<std::vector<std::int64_t>> groups(10);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::int32_t y = labels[i];
    if (y < 0 || y >= 10) {
      throw ValidationError("label " + std::to_string(y) +
                            " outside [0,10) in feature dump");
    }
    groups[static_cast<std::size_t>(y)].push_back(
        static_cast<std::int64_t>(i));
  }
  return groups;
}

double euclidean(const double* a, const double* b, std::int64_t d) {
  double s = 0.0;
  for (std::int64_t k = 0; k < d; ++k) {
    const double diff = a[k] - b[k];
    s += diff * diff;
  }
  return std::sqrt(s);
}

double sq_euclidean(const double* a, const double* b, std::int64_t d) {
  double s = 0.0;
  for (std::int64_t k = 0; k < d; ++k) {
    const double diff = a[k] - b[k];
    s += diff * diff;
  }
  return s;
}

}  // namespace

double accuracy(const ModelState& model, const Dataset& d,
                std::int64_t eval_batch) {
  if (d.size() == 0) throw ValidationError("accuracy over an empty dataset");
  std::int64_t correct = 0;
  eval_batches(model, d, eval_batch,
               [&](std::int64_t start, std::int64_t m, const Forward& fwd) {
                 std::span<const double> v = fwd.logits.data();
                 const std::int64_t k = fwd.logits.dim(1);
                 for (std::int64_t i = 0; i < m; ++i) {
                   const double* row = v.data() + i * k;
                   std::int64_t best = 0;
                   for (std::int64_t j = 1; j < k; ++j) {
                     if (row[j] > row[best]) best = j;
                   }
                   if (best ==
                       d.labels[static_cast<std::size_t>(start + i)]) {
                     ++correct;
                   }
                 }
               });
  return static_cast<double>(correct) / static_cast<double>(d.size());
}

FeatureDump extract_features(const ModelState& model, const Dataset& d,
                             std::int64_t eval_batch) {
  FeatureDump dump;
  dump.labels = d.labels;
  dump.split = d.split;
  dump.features = Tensor::zeros({d.size(), model.d_feat});
  std::span<double> dst = dump.features.data();
  eval_batches(model, d, eval_batch,
               [&](std::int64_t start, std::int64_t m, const Forward& fwd) {
                 std::span<const double> fv = fwd.features.data();
                 std::copy(fv.begin(), fv.end(),
                           dst.data() + start * model.d_feat);
               });
  return dump;
}

void write_feature_csv(const FeatureDump& dump, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write feature CSV to " + path);
  const std::int64_t n = dump.features.dim(0), d = dump.features.dim(1);
  for (std::int64_t k = 0; k < d; ++k) {
    out << "feat_" << k << ",";
  }
  out << "label,split\n";
  std::span<const double> v = dump.features.data();
  char buf[64];
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t k = 0; k < d; ++k) {
      std::snprintf(buf, sizeof(buf), "%.17g,", v[static_cast<std::size_t>(
                                          i * d + k)]);
      out << buf;
    }
    out << dump.labels[static_cast<std::size_t>(i)] << "," << dump.split
        << "\n";
  }
}

FeatureDump export_features(const ModelState& model, const Dataset& d,
                            const std::string& path) {
  FeatureDump dump = extract_features(model, d);
  write_feature_csv(dump, path);
  return dump;
}

SilhouetteResult silhouette_score(const FeatureDump& dump) {
  const std::int64_t n = dump.features.dim(0), d = dump.features.dim(1);
  const auto groups = group_by_class(dump.labels);
  std::int64_t classes = 0;
  for (const auto& grp : groups) classes += grp.empty() ? 0 : 1;
  if (classes < 2) {
    throw ValidationError("silhouette score needs at least 2 classes, got " +
                          std::to_string(classes));
  }
  const double* x = dump.features.data().data();
  SilhouetteResult result;
  double total = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const auto yi = static_cast<std::size_t>(
        dump.labels[static_cast<std::size_t>(i)]);
    const std::size_t own = groups[yi].size();
    if (own < 2) {
      ++result.flagged;  // singleton class: s(i) = 0
      continue;
    }
    double a = 0.0;
    for (std::int64_t j : groups[yi]) {
      if (j == i) continue;
      a += euclidean(x + i * d, x + j * d, d);
    }
    a /= static_cast<double>(own - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < groups.size(); ++c) {
      if (c == yi || groups[c].empty()) continue;
      double mean = 0.0;
      for (std::int64_t j : groups[c]) {
        mean += euclidean(x + i * d, x + j * d, d);
      }
      mean /= static_cast<double>(groups[c].size());
      b = std::min(b, mean);
    }
    const double denom = std::max(a, b);
    if (denom == 0.0) {
      ++result.flagged;  // coincident points across classes: s(i) = 0
      continue;
    }
    total += (b - a) / denom;
  }
  result.score = total / static_cast<double>(n);
  return result;
}

double distance_ratio(const FeatureDump& dump) {
  const std::int64_t n = dump.features.dim(0), d = dump.features.dim(1);
  const auto groups = group_by_class(dump.labels);
  std::int64_t classes = 0;
  for (const auto& grp : groups) classes += grp.empty() ? 0 : 1;
  if (classes < 2) {
    throw ValidationError("distance ratio needs at least 2 classes, got " +
                          std::to_string(classes));
  }
  const double* x = dump.features.data().data();
  double intra = 0.0, inter = 0.0;
  std::int64_t intra_pairs = 0, inter_pairs = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int32_t yi = dump.labels[static_cast<std::size_t>(i)];
    for (std::int64_t j = i + 1; j < n; ++j) {
      const double dist = euclidean(x + i * d, x + j * d, d);
      if (dump.labels[static_cast<std::size_t>(j)] == yi) {
        intra += dist;
        ++intra_pairs;
      } else {
        inter += dist;
        ++inter_pairs;
      }
    }
  }
  if (intra_pairs == 0) {
    throw ValidationError(
        "distance ratio undefined: no same-class pairs in the dump");
  }
  const double inter_mean = inter / static_cast<double>(inter_pairs);
  if (inter_mean == 0.0) {
    throw DegeneracyError(
        "distance ratio undefined: mean between-class distance is zero");
  }
  return (intra / static_cast<double>(intra_pairs)) / inter_mean;
}

double silhouette_loss_metric(const FeatureDump& dump, double delta) {
  if (delta <= 0.0) {
    throw ValidationError("delta must be positive, got " +
                          std::to_string(delta));
  }
  const std::int64_t n = dump.features.dim(0), d = dump.features.dim(1);
  const auto groups = group_by_class(dump.labels);
  std::int64_t classes = 0;
  for (const auto& grp : groups) classes += grp.empty() ? 0 : 1;
  if (classes < 2) {
    throw ValidationError(
        "silhouette loss metric needs at least 2 classes, got " +
        std::to_string(classes));
  }
  const double* x = dump.features.data().data();
  std::vector<double> centroids(groups.size() * static_cast<std::size_t>(d),
                                0.0);
  for (std::size_t c = 0; c < groups.size(); ++c) {
    for (std::int64_t i : groups[c]) {
      for (std::int64_t k = 0; k < d; ++k) {
        centroids[c * static_cast<std::size_t>(d) +
                  static_cast<std::size_t>(k)] +=
            x[i * d + k];
      }
    }
    if (!groups[c].empty()) {
      for (std::int64_t k = 0; k < d; ++k) {
        centroids[c * static_cast<std::size_t>(d) +
                  static_cast<std::size_t>(k)] /=
            static_cast<double>(groups[c].size());
      }
    }
  }
  double total = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const auto yi = static_cast<std::size_t>(
        dump.labels[static_cast<std::size_t>(i)]);
    const double num =
        sq_euclidean(x + i * d,
                     centroids.data() + yi * static_cast<std::size_t>(d), d);
    double nearest = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < groups.size(); ++c) {
      if (c == yi || groups[c].empty()) continue;
      nearest = std::min(
          nearest,
          sq_euclidean(x + i * d,
                       centroids.data() + c * static_cast<std::size_t>(d),
                       d));
    }
    total += num / (nearest + delta);
  }
  return total / static_cast<double>(n);
}

double knn_accuracy(const FeatureDump& train, const FeatureDump& test,
                    std::int64_t k) {
  const std::int64_t nt = train.features.dim(0);
  const std::int64_t d = train.features.dim(1);
  if (nt == 0) throw ValidationError("knn needs a non-empty train dump");
  if (test.features.dim(1) != d) {
    throw DimensionError("knn dumps disagree on feature dim: " +
                         std::to_string(d) + " vs " +
                         std::to_string(test.features.dim(1)));
  }
  if (k <= 0 || k % 2 == 0) {
    throw ValidationError("k must be a positive odd integer, got " +
                          std::to_string(k));
  }
  if (k > nt) {
    throw ValidationError("k=" + std::to_string(k) + " exceeds train size " +
                          std::to_string(nt));
  }
  const double* xt = train.features.data().data();
  const double* xq = test.features.data().data();
  const std::int64_t nq = test.features.dim(0);
  std::int64_t correct = 0;
  std::vector<std::pair<double, std::int64_t>> dists(
      static_cast<std::size_t>(nt));
  for (std::int64_t q = 0; q < nq; ++q) {
    for (std::int64_t i = 0; i < nt; ++i) {
      dists[static_cast<std::size_t>(i)] = {
          euclidean(xq + q * d, xt + i * d, d), i};
    }
    std::partial_sort(dists.begin(), dists.begin() + k, dists.end());
    std::int64_t votes[10] = {0};
    double vote_distance[10] = {0};
    for (std::int64_t i = 0; i < k; ++i) {
      const auto cls = static_cast<std::size_t>(
          train.labels[static_cast<std::size_t>(
              dists[static_cast<std::size_t>(i)].second)]);
      ++votes[cls];
      vote_distance[cls] += dists[static_cast<std::size_t>(i)].first;
    }
    std::int64_t best = -1;
    for (std::int64_t c = 0; c < 10; ++c) {
      if (votes[c] == 0) continue;
      if (best < 0 || votes[c] > votes[best] ||
          (votes[c] == votes[best] &&
           vote_distance[c] < vote_distance[best])) {
        best = c;
      }
    }
    if (best == test.labels[static_cast<std::size_t>(q)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(nq);
}

}  // namespace defrag
