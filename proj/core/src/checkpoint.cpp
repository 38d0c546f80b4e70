#include "defrag/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include "defrag/errors.hpp"

namespace defrag {

namespace {

constexpr char kMagic[8] = {'D', 'F', 'R', 'G', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

class Reader {
 public:
  Reader(std::string bytes, std::string path)
      : bytes_(std::move(bytes)), path_(std::move(path)) {}

  void need(std::size_t n, const std::string& what) {
    if (pos_ + n > bytes_.size()) {
      throw FormatError("truncated checkpoint " + path_ +
                        " while reading " + what);
    }
  }

  std::uint32_t u32(const std::string& what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= std::uint32_t{static_cast<std::uint8_t>(bytes_[pos_ + i])}
           << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  std::uint64_t u64(const std::string& what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= std::uint64_t{static_cast<std::uint8_t>(bytes_[pos_ + i])}
           << (8 * i);
    }
    pos_ += 8;
    return v;
  }

  double f64(const std::string& what) {
    const std::uint64_t bits = u64(what);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }

  std::string str(std::size_t n, const std::string& what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool at_end() const { return pos_ == bytes_.size(); }
  const std::string& path() const { return path_; }

 private:
  std::string bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

Tensor take_tensor(std::map<std::string, Tensor>& tensors,
                   const std::string& name, const Shape& shape,
                   const std::string& path) {
  auto it = tensors.find(name);
  if (it == tensors.end()) {
    throw FormatError("checkpoint " + path + " is missing tensor " + name);
  }
  Tensor t = it->second;
  tensors.erase(it);
  if (t.shape() != shape) {
    throw FormatError("checkpoint tensor " + name + " has shape " +
                      shape_to_string(t.shape()) + ", expected " +
                      shape_to_string(shape));
  }
  t.set_requires_grad(true);
  return t;
}

}  // namespace

void save_checkpoint(const ModelState& model, const TrainHistory& history,
                     const std::string& path) {
  std::string out;
  out.append(kMagic, sizeof(kMagic));
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(model.feature_activation));

  const auto params = model.named_parameters();
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.append(name);
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (std::int64_t d : t.shape()) {
      put_u64(out, static_cast<std::uint64_t>(d));
    }
    for (double v : t.data()) put_f64(out, v);
  }

  put_u32(out, static_cast<std::uint32_t>(history.size()));
  for (const EpochRecord& r : history) {
    put_u64(out, static_cast<std::uint64_t>(r.epoch));
    put_f64(out, r.class_loss);
    put_f64(out, r.aux_loss);
    put_f64(out, r.combined_loss);
    put_f64(out, r.train_accuracy);
    put_f64(out, r.test_accuracy);
    put_f64(out, r.ortho_error);
  }

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot write checkpoint to " + path);
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw IoError("short write while saving checkpoint " + path);
}

std::pair<ModelState, TrainHistory> load_checkpoint(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open checkpoint " + path);
  std::string bytes((std::istreambuf_iterator<char>(file)),
                    std::istreambuf_iterator<char>());
  Reader r(std::move(bytes), path);

  const std::string magic = r.str(8, "magic");
  if (std::memcmp(magic.data(), kMagic, 8) != 0) {
    throw FormatError(path + " is not a checkpoint file (bad magic)");
  }
  const std::uint32_t version = r.u32("version");
  if (version != kVersion) {
    throw FormatError("unsupported checkpoint version " +
                      std::to_string(version) + " in " + path +
                      " (expected " + std::to_string(kVersion) + ")");
  }
  const std::uint32_t act = r.u32("activation");
  if (act > 2) {
    throw FormatError("checkpoint " + path + " has unknown activation code " +
                      std::to_string(act));
  }

  const std::uint32_t tensor_count = r.u32("tensor count");
  std::map<std::string, Tensor> tensors;
  for (std::uint32_t i = 0; i < tensor_count; ++i) {
    const std::uint32_t name_len = r.u32("tensor name length");
    const std::string name = r.str(name_len, "tensor name");
    const std::uint32_t rank = r.u32("rank of " + name);
    if (rank > 8) {
      throw FormatError("checkpoint tensor " + name +
                        " has implausible rank " + std::to_string(rank));
    }
    Shape shape;
    for (std::uint32_t k = 0; k < rank; ++k) {
      shape.push_back(static_cast<std::int64_t>(r.u64("dims of " + name)));
    }
    const std::int64_t numel = shape_numel(shape);
    if (numel < 0 || numel > (1 << 28)) {
      throw FormatError("checkpoint tensor " + name +
                        " has implausible shape " + shape_to_string(shape));
    }
    std::vector<double> data(static_cast<std::size_t>(numel));
    for (double& v : data) v = r.f64("data of " + name);
    if (!tensors.emplace(name, Tensor::from(shape, std::move(data)))
             .second) {
      throw FormatError("checkpoint " + path + " repeats tensor " + name);
    }
  }

  ModelState model;
  model.feature_activation = static_cast<Activation>(act);
  model.conv1_w = take_tensor(tensors, "conv1.weight", {32, 1, 5, 5}, path);
  model.conv1_b = take_tensor(tensors, "conv1.bias", {32}, path);
  model.conv2_w = take_tensor(tensors, "conv2.weight", {256, 32, 5, 5}, path);
  model.conv2_b = take_tensor(tensors, "conv2.bias", {256}, path);
  model.fc1_w = take_tensor(tensors, "fc1.weight", {4096, 256}, path);
  model.fc1_b = take_tensor(tensors, "fc1.bias", {256}, path);
  auto it = tensors.find("feature.weight");
  if (it == tensors.end()) {
    throw FormatError("checkpoint " + path + " is missing tensor "
                      "feature.weight");
  }
  if (it->second.rank() != 2 || it->second.dim(0) != 256) {
    throw FormatError("checkpoint tensor feature.weight has shape " +
                      shape_to_string(it->second.shape()) +
                      ", expected [256×d]");
  }
  const std::int64_t d_feat = it->second.dim(1);
  model.d_feat = d_feat;
  model.feature_w =
      take_tensor(tensors, "feature.weight", {256, d_feat}, path);
  model.head_w = take_tensor(tensors, "head.weight", {d_feat, 10}, path);
  model.head_b = take_tensor(tensors, "head.bias", {10}, path);
  if (!tensors.empty()) {
    throw FormatError("checkpoint " + path + " carries unexpected tensor " +
                      tensors.begin()->first);
  }

  const std::uint32_t history_count = r.u32("history count");
  TrainHistory history;
  history.reserve(history_count);
  for (std::uint32_t i = 0; i < history_count; ++i) {
    EpochRecord rec;
    rec.epoch = static_cast<std::int64_t>(r.u64("history epoch"));
    rec.class_loss = r.f64("history class loss");
    rec.aux_loss = r.f64("history aux loss");
    rec.combined_loss = r.f64("history combined loss");
    rec.train_accuracy = r.f64("history train accuracy");
    rec.test_accuracy = r.f64("history test accuracy");
    rec.ortho_error = r.f64("history ortho error");
    rec.seconds = 0.0;
    history.push_back(rec);
  }
  if (!r.at_end()) {
    throw FormatError("checkpoint " + path + " has trailing bytes");
  }
  return {std::move(model), std::move(history)};
}

}  // namespace defrag
