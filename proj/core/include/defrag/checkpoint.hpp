#pragma once

#include <string>
#include <utility>

#include "defrag/model.hpp"
#include "defrag/trainer.hpp"

namespace defrag {

// Versioned binary container: 8-byte magic "DFRGCKPT", u32 format version,
// u32 feature activation, then named tensors as (name, rank, dims,
// little-endian f64 data), then per-epoch history records.  Parameters
// round-trip bit-exact.  The wall-clock seconds of each record are timing
// diagnostics and are not serialized; loaded records carry seconds = 0.
void save_checkpoint(const ModelState& model, const TrainHistory& history,
                     const std::string& path);

std::pair<ModelState, TrainHistory> load_checkpoint(const std::string& path);

}  // namespace defrag
