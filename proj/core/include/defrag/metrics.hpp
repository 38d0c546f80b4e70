#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "defrag/dataset.hpp"
#include "defrag/model.hpp"

namespace defrag {

struct FeatureDump {
  Tensor features;  // [n×d]
  std::vector<std::int32_t> labels;
  std::string split;  // tag written into the CSV rows
  // run metadata, carried for provenance
  std::string method;
  std::uint64_t seed = 0;
  std::int64_t epoch = 0;
};

// Fraction of argmax-correct predictions; ties go to the lowest class
// index.  Runs in no-grad mode over fixed-size eval batches.
double accuracy(const ModelState& model, const Dataset& d,
                std::int64_t eval_batch = 256);

FeatureDump extract_features(const ModelState& model, const Dataset& d,
                             std::int64_t eval_batch = 256);

// CSV header feat_0..feat_{d−1},label,split; %.17g floats; row order
// follows the dump.
void write_feature_csv(const FeatureDump& dump, const std::string& path);

FeatureDump export_features(const ModelState& model, const Dataset& d,
                            const std::string& path);

struct SilhouetteResult {
  double score = 0.0;
  std::int64_t flagged = 0;  // samples scored 0 by the degeneracy rules
};

// Classical Rousseeuw silhouette: a(i) mean intra-class distance excluding
// self, b(i) min over other classes of mean distance, s(i)=(b−a)/max(a,b).
// Singleton-class samples and max(a,b)=0 samples score 0 and are flagged.
SilhouetteResult silhouette_score(const FeatureDump& dump);

// mean same-class pairwise distance / mean cross-class pairwise distance
double distance_ratio(const FeatureDump& dump);

// Mean over samples of ‖xᵢ−c_{yᵢ}‖² / (min_{j≠yᵢ}‖xᵢ−c_j‖² + δ) with
// centroids computed from the dump itself.
double silhouette_loss_metric(const FeatureDump& dump, double delta = 1e-6);

// Majority vote over the k nearest train features (Euclidean); neighbor
// order (distance, index); vote ties by smaller total distance, then lower
// class index.
double knn_accuracy(const FeatureDump& train, const FeatureDump& test,
                    std::int64_t k);

}  // namespace defrag
