#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "defrag/config.hpp"
#include "defrag/dataset.hpp"
#include "defrag/model.hpp"

namespace defrag {

struct EpochRecord {
  std::int64_t epoch = 0;      // 1-based
  double class_loss = 0.0;     // sample-weighted means over the epoch
  double aux_loss = 0.0;
  double combined_loss = 0.0;
  double train_accuracy = 0.0; // accumulated from the training batches
  double test_accuracy = 0.0;
  double ortho_error = 0.0;    // orthonormality_error(M) at epoch end
  double seconds = 0.0;        // wall clock; excluded from checkpoints
};

using TrainHistory = std::vector<EpochRecord>;

struct TrainResult {
  ModelState model;
  TrainHistory history;
};

struct LoadedData {
  Dataset train;
  Dataset test;
};

// Resolves the data directory, loads both splits of cfg.dataset (raw or
// gzipped IDX), and applies the train_n/test_n stratified subsets.
LoadedData load_run_data(const RunConfig& cfg);

// Full training loop: per batch, forward → combined loss → backward →
// sgd_step → retraction (defrag) → center update (center-family losses).
// Deterministic per config+seed.  A non-finite loss aborts with epoch,
// batch, and loss-term diagnostics.  Progress lines go to *progress when
// given.
TrainResult train(const RunConfig& cfg, std::ostream* progress = nullptr);

// Variant for callers that already hold the data (pilot loops, tests).
TrainResult train_on(const RunConfig& cfg, const LoadedData& data,
                     std::ostream* progress = nullptr);

// CSV: epoch,class_loss,aux_loss,combined_loss,train_accuracy,
// test_accuracy,ortho_error,seconds; numbers printed with %.17g.
void write_history_csv(const TrainHistory& history, const std::string& path);

}  // namespace defrag
