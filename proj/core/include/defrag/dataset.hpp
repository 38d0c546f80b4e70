#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "defrag/tensor.hpp"

namespace defrag {

struct Dataset {
  Tensor images;                      // [N×1×28×28], values in [0,1]
  std::vector<std::int32_t> labels;   // values in [0,10)
  std::string name;
  std::string split;                  // "train" or "test"

  std::int64_t size() const { return images.dim(0); }
};

// IDX pair loader.  Accepts raw and gzip files (sniffed by magic bytes);
// pixel bytes are scaled by 1/255.
Dataset load_idx(const std::string& images_path,
                 const std::string& labels_path,
                 const std::string& name = "", const std::string& split = "");

// Class-stratified deterministic sample of n items.  Classes are drawn
// round-robin from per-class shuffles, so balanced sources yield equal
// class counts and n = N returns a permutation of the full set.
Dataset subset(const Dataset& d, std::int64_t n, std::uint64_t seed);

struct BatchPlan {
  std::uint64_t seed = 0;
  std::int64_t batch_size = 0;
  std::vector<std::int64_t> order;  // permutation of [0, N)
};

BatchPlan make_batch_plan(std::int64_t n, std::int64_t batch_size,
                          std::uint64_t seed);

struct Batch {
  Tensor images;                     // [m×1×28×28]
  std::vector<std::int32_t> labels;
  std::vector<std::int64_t> indices; // positions in the source dataset
};

// Streams the permuted dataset as disjoint batches; the final short batch
// is included.  Batch tensors are materialized on demand.
class BatchStream {
 public:
  BatchStream(const Dataset& d, const BatchPlan& plan);

  std::optional<Batch> next();
  std::int64_t batch_count() const;

 private:
  const Dataset& dataset_;
  const BatchPlan& plan_;
  std::int64_t cursor_ = 0;
};

}  // namespace defrag
