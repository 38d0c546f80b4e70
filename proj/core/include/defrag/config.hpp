#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "defrag/losses.hpp"
#include "defrag/ops.hpp"

namespace defrag {

// Flat run configuration; field names double as the JSON keys and the CLI
// override names.
struct RunConfig {
  std::string dataset = "mnist";  // mnist | fashion_mnist
  std::string data_dir;           // empty -> $DEFRAG_DATA_DIR, then "data"
  std::string method = "linear";  // sparse_relu|linear|center|
                                  // contrastive_center|silhouette|defrag|
                                  // softplus
  std::string aux;                // optional l1/l2/none override, only valid
                                  // with the linear and softplus presets
  double lambda_aux = 0.01;
  double delta = 1e-6;
  double alpha = 0.5;
  double lr = 0.01;
  std::int64_t batch_size = 64;
  std::int64_t epochs = 20;
  std::uint64_t seed = 0;
  std::int64_t train_n = 0;  // 0 = full split
  std::int64_t test_n = 0;
  std::int64_t d_feat = 8;
  std::string checkpoint;  // train: output path; eval/features: input path
};

// What a method preset pins down.
struct ResolvedMethod {
  Activation activation = Activation::kLinear;
  AuxKind aux = AuxKind::kNone;
  bool retract = false;
};

// Applies the method preset plus any aux override and validates the
// combination.  Throws ConfigError for invalid methods or combinations.
ResolvedMethod resolve_method(const RunConfig& cfg);

// Range/value validation of every field.  Throws ConfigError.
void validate_config(const RunConfig& cfg);

// JSON object with exactly the RunConfig keys.  Unknown keys are rejected.
RunConfig config_from_json_string(const std::string& text);
RunConfig config_from_json_file(const std::string& path);
std::string config_to_json_string(const RunConfig& cfg);

// Sets one field from its string form (CLI override path).  Unknown key or
// unparsable value throws ConfigError.
void apply_override(RunConfig& cfg, const std::string& key,
                    const std::string& value);

// All override keys in declaration order (drives CLI registration).
const std::vector<std::string>& config_keys();

// data_dir resolution: explicit field, else DEFRAG_DATA_DIR, else "data".
std::string resolve_data_dir(const RunConfig& cfg);

}  // namespace defrag
