#include "defrag/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "defrag/errors.hpp"
#include "defrag/grassmann.hpp"
#include "defrag/losses.hpp"
#include "defrag/metrics.hpp"
#include "defrag/ops.hpp"
#include "defrag/rng.hpp"

namespace defrag {

namespace {

constexpr std::uint64_t kBatchStream = 2;
constexpr std::uint64_t kTrainSubsetStream = 3;
constexpr std::uint64_t kTestSubsetStream = 4;

std::string pick_existing(const std::string& base) {
  namespace fs = std::filesystem;
  if (fs::exists(base)) return base;
  if (fs::exists(base + ".gz")) return base + ".gz";
  throw IoError("dataset file not found: " + base + " (also tried .gz)");
}

bool uses_centers(AuxKind kind) {
  return kind == AuxKind::kCenter || kind == AuxKind::kContrastiveCenter ||
         kind == AuxKind::kSilhouette;
}

std::int64_t count_correct(const Tensor& logits,
                           const std::vector<std::int32_t>& labels) {
  const std::int64_t m = logits.dim(0), k = logits.dim(1);
  std::span<const double> v = logits.data();
  std::int64_t correct = 0;
  for (std::int64_t i = 0; i < m; ++i) {
    const double* row = v.data() + i * k;
    std::int64_t best = 0;
    for (std::int64_t j = 1; j < k; ++j) {
      if (row[j] > row[best]) best = j;
    }
    if (best == labels[static_cast<std::size_t>(i)]) ++correct;
  }
  return correct;
}

}  // namespace

LoadedData load_run_data(const RunConfig& cfg) {
  const std::string dir = resolve_data_dir(cfg) + "/" + cfg.dataset;
  LoadedData data;
  // resolved one at a time so a missing file is reported in this order
  const std::string train_images = pick_existing(dir + "/train-images-idx3-ubyte");
  const std::string train_labels = pick_existing(dir + "/train-labels-idx1-ubyte");
  const std::string test_images = pick_existing(dir + "/t10k-images-idx3-ubyte");
  const std::string test_labels = pick_existing(dir + "/t10k-labels-idx1-ubyte");
  data.train = load_idx(train_images, train_labels, cfg.dataset, "train");
  data.test = load_idx(test_images, test_labels, cfg.dataset, "test");
  if (cfg.train_n > 0) {
    data.train =
        subset(data.train, cfg.train_n, Rng::mix(cfg.seed, kTrainSubsetStream));
  }
  if (cfg.test_n > 0) {
    data.test =
        subset(data.test, cfg.test_n, Rng::mix(cfg.seed, kTestSubsetStream));
  }
  return data;
}

TrainResult train(const RunConfig& cfg, std::ostream* progress) {
  validate_config(cfg);
  const LoadedData data = load_run_data(cfg);
  return train_on(cfg, data, progress);
}

TrainResult train_on(const RunConfig& cfg, const LoadedData& data,
                     std::ostream* progress) {
  validate_config(cfg);
  const ResolvedMethod method = resolve_method(cfg);

  TrainResult result;
  result.model = build_model(cfg);
  ModelState& model = result.model;
  CenterBank bank(10, cfg.d_feat, cfg.alpha);

  const std::int64_t n = data.train.size();
  for (std::int64_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const BatchPlan plan = make_batch_plan(
        n, std::min(cfg.batch_size, n),
        Rng::mix(Rng::mix(cfg.seed, kBatchStream),
                 static_cast<std::uint64_t>(epoch)));
    BatchStream stream(data.train, plan);

    double class_sum = 0.0, aux_sum = 0.0, combined_sum = 0.0;
    std::int64_t correct = 0;
    std::int64_t batch_index = 0;
    Graph g;
    while (auto batch = stream.next()) {
      ++batch_index;
      const auto m = batch->images.dim(0);
      g.reset();
      zero_grads(model);

      Forward fwd = forward(g, model, batch->images);
      Tensor class_loss = softmax_cross_entropy(g, fwd.logits, batch->labels);

      Tensor total = class_loss;
      double aux_value = 0.0;
      if (method.aux != AuxKind::kNone) {
        if (uses_centers(method.aux)) {
          bank.seed_uninitialized(fwd.features, batch->labels);
        }
        Tensor aux = aux_loss(g, method.aux, fwd.features, batch->labels,
                              bank, cfg.delta);
        aux_value = aux.value();
        total = combined_loss(g, class_loss, aux, cfg.lambda_aux);
      }

      const double class_value = class_loss.value();
      const double total_value = total.value();
      if (!std::isfinite(total_value) || !std::isfinite(class_value) ||
          !std::isfinite(aux_value)) {
        throw ValidationError(
            "non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
            std::to_string(batch_index) + ": class=" +
            std::to_string(class_value) + ", aux=" + std::to_string(aux_value) +
            ", combined=" + std::to_string(total_value));
      }

      g.backward(total);
      sgd_step(model, cfg.lr);
      if (method.retract) {
        retract_in_place(model.feature_w);
      }
      if (uses_centers(method.aux)) {
        bank.update(fwd.features, batch->labels);
      }

      correct += count_correct(fwd.logits, batch->labels);
      const double mw = static_cast<double>(m);
      class_sum += class_value * mw;
      aux_sum += aux_value * mw;
      combined_sum += total_value * mw;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.class_loss = class_sum / static_cast<double>(n);
    rec.aux_loss = aux_sum / static_cast<double>(n);
    rec.combined_loss = combined_sum / static_cast<double>(n);
    rec.train_accuracy =
        static_cast<double>(correct) / static_cast<double>(n);
    rec.test_accuracy = accuracy(model, data.test);
    rec.ortho_error = orthonormality_error(model.feature_w);
    rec.seconds = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    result.history.push_back(rec);

    if (progress != nullptr) {
      char line[256];
      std::snprintf(line, sizeof(line),
                    "epoch %2lld  loss %.4f  aux %.4f  train %.4f  "
                    "test %.4f  ortho %.2e  %.1fs",
                    static_cast<long long>(epoch), rec.class_loss,
                    rec.aux_loss, rec.train_accuracy, rec.test_accuracy,
                    rec.ortho_error, rec.seconds);
      (*progress) << line << std::endl;
    }
  }
  return result;
}

void write_history_csv(const TrainHistory& history, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write history CSV to " + path);
  out << "epoch,class_loss,aux_loss,combined_loss,train_accuracy,"
         "test_accuracy,ortho_error,seconds\n";
  char buf[64];
  for (const EpochRecord& r : history) {
    out << r.epoch;
    const double values[] = {r.class_loss,     r.aux_loss,
                             r.combined_loss,  r.train_accuracy,
                             r.test_accuracy,  r.ortho_error,
                             r.seconds};
    for (double v : values) {
      std::snprintf(buf, sizeof(buf), ",%.17g", v);
      out << buf;
    }
    out << "\n";
  }
}

}  // namespace defrag
