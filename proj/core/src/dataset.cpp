#include "defrag/dataset.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <utility>

#include "defrag/errors.hpp"
#include "defrag/rng.hpp"

namespace defrag {

namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

std::vector<std::uint8_t> gunzip(const std::vector<std::uint8_t>& in,
                                 const std::string& path) {
  z_stream strm{};
  if (inflateInit2(&strm, 16 + MAX_WBITS) != Z_OK) {
    throw IoError("zlib init failed for " + path);
  }
  std::vector<std::uint8_t> out;
  out.reserve(in.size() * 4);
  std::uint8_t buf[1 << 16];
  strm.next_in = const_cast<std::uint8_t*>(in.data());
  strm.avail_in = static_cast<uInt>(in.size());
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    strm.next_out = buf;
    strm.avail_out = sizeof(buf);
    rc = inflate(&strm, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&strm);
      throw FormatError("gzip stream in " + path + " is corrupt");
    }
    out.insert(out.end(), buf, buf + (sizeof(buf) - strm.avail_out));
  }
  inflateEnd(&strm);
  return out;
}

std::vector<std::uint8_t> read_maybe_gzip(const std::string& path) {
  std::vector<std::uint8_t> bytes = read_file(path);
  if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b) {
    return gunzip(bytes, path);
  }
  return bytes;
}

std::uint32_t read_u32_be(const std::vector<std::uint8_t>& bytes,
                          std::size_t offset, const std::string& field) {
  if (offset + 4 > bytes.size()) {
    throw FormatError("truncated IDX file while reading " + field);
  }
  return (std::uint32_t{bytes[offset]} << 24) |
         (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) |
         std::uint32_t{bytes[offset + 3]};
}

}  // namespace

Dataset load_idx(const std::string& images_path,
                 const std::string& labels_path, const std::string& name,
                 const std::string& split) {
  const std::vector<std::uint8_t> img = read_maybe_gzip(images_path);
  const std::vector<std::uint8_t> lab = read_maybe_gzip(labels_path);

  const std::uint32_t img_magic = read_u32_be(img, 0, "images magic");
  if (img_magic != 0x00000803) {
    char hex[16];
    std::snprintf(hex, sizeof(hex), "0x%08x", img_magic);
    throw FormatError("images magic " + std::string(hex) + " in " +
                      images_path + " (expected 0x00000803)");
  }
  const std::uint32_t n = read_u32_be(img, 4, "images count");
  const std::uint32_t rows = read_u32_be(img, 8, "images rows");
  const std::uint32_t cols = read_u32_be(img, 12, "images cols");
  if (rows != 28 || cols != 28) {
    throw FormatError("images dims " + std::to_string(rows) + "×" +
                      std::to_string(cols) + " in " + images_path +
                      " (expected 28×28)");
  }
  const std::size_t want = 16 + std::size_t{n} * rows * cols;
  if (img.size() < want) {
    throw FormatError("images payload truncated in " + images_path + ": " +
                      std::to_string(img.size()) + " bytes, need " +
                      std::to_string(want));
  }

  const std::uint32_t lab_magic = read_u32_be(lab, 0, "labels magic");
  if (lab_magic != 0x00000801) {
    char hex[16];
    std::snprintf(hex, sizeof(hex), "0x%08x", lab_magic);
    throw FormatError("labels magic " + std::string(hex) + " in " +
                      labels_path + " (expected 0x00000801)");
  }
  const std::uint32_t ln = read_u32_be(lab, 4, "labels count");
  if (ln != n) {
    throw FormatError("labels count " + std::to_string(ln) +
                      " does not match images count " + std::to_string(n));
  }
  if (lab.size() < 8 + std::size_t{ln}) {
    throw FormatError("labels payload truncated in " + labels_path);
  }

  Dataset d;
  d.name = name;
  d.split = split;
  d.images = Tensor::zeros({n, 1, 28, 28});
  std::span<double> px = d.images.data();
  for (std::size_t i = 0; i < std::size_t{n} * 784; ++i) {
    px[i] = static_cast<double>(img[16 + i]) / 255.0;
  }
  d.labels.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint8_t y = lab[8 + i];
    if (y >= 10) {
      throw FormatError("label value " + std::to_string(y) + " at index " +
                        std::to_string(i) + " in " + labels_path +
                        " outside [0,10)");
    }
    d.labels[i] = y;
  }
  return d;
}

Dataset subset(const Dataset& d, std::int64_t n, std::uint64_t seed) {
  const std::int64_t total = d.size();
  if (n <= 0) throw ValidationError("subset size must be positive");
  if (n > total) {
    throw ValidationError("subset size " + std::to_string(n) +
                          " exceeds dataset size " + std::to_string(total));
  }
  std::vector<std::vector<std::int64_t>> by_class(10);
  for (std::int64_t i = 0; i < total; ++i) {
    by_class[static_cast<std::size_t>(d.labels[static_cast<std::size_t>(i)])]
        .push_back(i);
  }
  for (std::size_t c = 0; c < 10; ++c) {
    Rng rng(Rng::mix(seed, c));
    rng.shuffle(by_class[c]);
  }

  // Round-robin over classes: caps at availability and spills the
  // shortfall onto classes that still have samples.
  std::vector<std::int64_t> picked;
  picked.reserve(static_cast<std::size_t>(n));
  std::vector<std::size_t> taken(10, 0);
  while (static_cast<std::int64_t>(picked.size()) < n) {
    bool any = false;
    for (std::size_t c = 0;
         c < 10 && static_cast<std::int64_t>(picked.size()) < n; ++c) {
      if (taken[c] < by_class[c].size()) {
        picked.push_back(by_class[c][taken[c]++]);
        any = true;
      }
    }
    if (!any) break;
  }

  Dataset out;
  out.name = d.name;
  out.split = d.split;
  out.images = Tensor::zeros({n, 1, 28, 28});
  out.labels.resize(static_cast<std::size_t>(n));
  std::span<const double> src = d.images.data();
  std::span<double> dst = out.images.data();
  for (std::int64_t i = 0; i < n; ++i) {
    const std::int64_t j = picked[static_cast<std::size_t>(i)];
    std::copy(src.data() + j * 784, src.data() + (j + 1) * 784,
              dst.data() + i * 784);
    out.labels[static_cast<std::size_t>(i)] =
        d.labels[static_cast<std::size_t>(j)];
  }
  return out;
}

BatchPlan make_batch_plan(std::int64_t n, std::int64_t batch_size,
                          std::uint64_t seed) {
  if (batch_size <= 0) throw ValidationError("batch size must be positive");
  if (batch_size > n) {
    throw ValidationError("batch size " + std::to_string(batch_size) +
                          " exceeds dataset size " + std::to_string(n));
  }
  BatchPlan plan;
  plan.seed = seed;
  plan.batch_size = batch_size;
  Rng rng(seed);
  plan.order = rng.permutation(n);
  return plan;
}

BatchStream::BatchStream(const Dataset& d, const BatchPlan& plan)
    : dataset_(d), plan_(plan) {
  if (static_cast<std::int64_t>(plan.order.size()) != d.size()) {
    throw UsageError("batch plan covers " + std::to_string(plan.order.size()) +
                     " samples, dataset has " + std::to_string(d.size()));
  }
}

std::int64_t BatchStream::batch_count() const {
  const std::int64_t n = dataset_.size();
  return (n + plan_.batch_size - 1) / plan_.batch_size;
}

std::optional<Batch> BatchStream::next() {
  const std::int64_t n = dataset_.size();
  if (cursor_ >= n) return std::nullopt;
  const std::int64_t m = std::min(plan_.batch_size, n - cursor_);
  Batch b;
  b.images = Tensor::zeros({m, 1, 28, 28});
  b.labels.resize(static_cast<std::size_t>(m));
  b.indices.resize(static_cast<std::size_t>(m));
  std::span<const double> src = dataset_.images.data();
  std::span<double> dst = b.images.data();
  for (std::int64_t i = 0; i < m; ++i) {
    const std::int64_t j = plan_.order[static_cast<std::size_t>(cursor_ + i)];
    std::copy(src.data() + j * 784, src.data() + (j + 1) * 784,
              dst.data() + i * 784);
    b.labels[static_cast<std::size_t>(i)] =
        dataset_.labels[static_cast<std::size_t>(j)];
    b.indices[static_cast<std::size_t>(i)] = j;
  }
  cursor_ += m;
  return b;
}

}  // namespace defrag
