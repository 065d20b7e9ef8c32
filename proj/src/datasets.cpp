#include "fav/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>

#include "fav/error.hpp"

namespace fav {

namespace {

constexpr std::size_t kCifarSide = 32;
constexpr std::size_t kCifarPlane = kCifarSide * kCifarSide;
constexpr std::size_t kCifarRecord = 1 + 3 * kCifarPlane;
constexpr std::uint32_t kIdxImages = 0x00000803;
constexpr std::uint32_t kIdxLabels = 0x00000801;

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& file) {
  std::ifstream f(file, std::ios::binary);
  if (!f) throw DataError("cannot open " + file.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t at) {
  return std::uint32_t(b[at]) << 24 | std::uint32_t(b[at + 1]) << 16 | std::uint32_t(b[at + 2]) << 8 |
         std::uint32_t(b[at + 3]);
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(std::uint8_t(v >> s));
}

std::string hex(std::uint32_t v) {
  std::ostringstream os;
  os << "0x" << std::hex;
  os.width(8);
  os.fill('0');
  os << v;
  return os.str();
}

/// Header of an IDX file: magic then one big-endian extent per dimension.
std::vector<std::size_t> idx_header(const std::vector<std::uint8_t>& b, std::uint32_t expected,
                                    const std::filesystem::path& file) {
  if (b.size() < 4) throw DataError(file.string() + ": file too short for an IDX header");
  const std::uint32_t magic = be32(b, 0);
  if (magic != expected) {
    throw DataError(file.string() + ": bad IDX magic " + hex(magic) + ", expected " + hex(expected));
  }
  const std::size_t dims = magic & 0xff;
  if (b.size() < 4 + 4 * dims) throw DataError(file.string() + ": truncated IDX header");
  std::vector<std::size_t> extents(dims);
  std::size_t total = 1;
  for (std::size_t i = 0; i < dims; ++i) {
    extents[i] = be32(b, 4 + 4 * i);
    total *= extents[i];
  }
  if (b.size() != 4 + 4 * dims + total) {
    throw DataError(file.string() + ": extents describe " + std::to_string(total) + " bytes of data, file has " +
                    std::to_string(b.size() - 4 - 4 * dims));
  }
  return extents;
}

}  // namespace

void DatasetSplit::validate() const {
  if (images.size() != labels.size()) {
    throw DataError(tag + ": " + std::to_string(images.size()) + " images but " + std::to_string(labels.size()) +
                    " labels");
  }
  for (int y : labels) {
    if (y < 0 || std::size_t(y) >= classes) {
      throw DataError(tag + ": label " + std::to_string(y) + " outside [0, " + std::to_string(classes) + ")");
    }
  }
  for (const auto& img : images) {
    if (img.height != images.front().height || img.width != images.front().width) {
      throw DataError(tag + ": images have non-uniform extents");
    }
  }
}

namespace {

void decode_cifar10(const std::filesystem::path& file, DatasetSplit& split, std::span<const int> classes,
                    std::size_t limit) {
  const auto bytes = read_bytes(file);
  if (bytes.empty()) throw DataError(file.string() + ": empty CIFAR-10 batch file");
  if (bytes.size() % kCifarRecord != 0) {
    throw DataError(file.string() + ": truncated CIFAR-10 batch (" + std::to_string(bytes.size()) +
                    " bytes is not a multiple of the " + std::to_string(kCifarRecord) + "-byte record)");
  }
  const std::size_t n = bytes.size() / kCifarRecord;
  for (std::size_t r = 0; r < n; ++r) {
    if (limit != 0 && split.size() == limit) break;
    const std::uint8_t* rec = bytes.data() + r * kCifarRecord;
    if (rec[0] >= 10) throw DataError(file.string() + ": record " + std::to_string(r) + " has label " +
                                      std::to_string(rec[0]));
    if (!classes.empty() && std::find(classes.begin(), classes.end(), int(rec[0])) == classes.end()) continue;
    split.labels.push_back(rec[0]);
    ImageRGB img(kCifarSide, kCifarSide);
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t p = 0; p < kCifarPlane; ++p) img.values[p * 3 + c] = double(rec[1 + c * kCifarPlane + p]) / 255.0;
    }
    split.images.push_back(std::move(img));
  }
}

}  // namespace

DatasetSplit read_cifar10_batch(const std::filesystem::path& file, std::string tag) {
  DatasetSplit split;
  split.tag = std::move(tag);
  split.classes = 10;
  decode_cifar10(file, split, {}, 0);
  return split;
}

DatasetPair load_cifar10_filtered(const std::filesystem::path& dir, std::span<const int> classes,
                                  std::size_t train_limit, std::size_t test_limit) {
  DatasetPair pair;
  pair.train.tag = "train";
  pair.test.tag = "test";
  pair.train.classes = pair.test.classes = 10;
  for (int b = 1; b <= 5; ++b) {
    decode_cifar10(dir / ("data_batch_" + std::to_string(b) + ".bin"), pair.train, classes, train_limit);
  }
  decode_cifar10(dir / "test_batch.bin", pair.test, classes, test_limit);
  return pair;
}

DatasetPair load_cifar10(const std::filesystem::path& dir) {
  DatasetPair pair;
  pair.train.tag = "train";
  pair.train.classes = 10;
  for (int b = 1; b <= 5; ++b) {
    auto part = read_cifar10_batch(dir / ("data_batch_" + std::to_string(b) + ".bin"), "train");
    std::move(part.images.begin(), part.images.end(), std::back_inserter(pair.train.images));
    pair.train.labels.insert(pair.train.labels.end(), part.labels.begin(), part.labels.end());
  }
  pair.test = read_cifar10_batch(dir / "test_batch.bin", "test");
  if (pair.train.size() != 50000 || pair.test.size() != 10000) {
    throw DataError(dir.string() + ": expected 50000/10000 records, found " + std::to_string(pair.train.size()) +
                    "/" + std::to_string(pair.test.size()));
  }
  return pair;
}

std::vector<ImageRGB> read_idx_images(const std::filesystem::path& file) {
  const auto bytes = read_bytes(file);
  const auto ext = idx_header(bytes, kIdxImages, file);
  const std::size_t n = ext[0], rows = ext[1], cols = ext[2];
  std::vector<ImageRGB> out;
  out.reserve(n);
  const std::size_t offset = 16;
  for (std::size_t i = 0; i < n; ++i) {
    ImageRGB img(rows, cols);
    for (std::size_t p = 0; p < rows * cols; ++p) {
      const double v = double(bytes[offset + i * rows * cols + p]) / 255.0;
      for (std::size_t c = 0; c < 3; ++c) img.values[p * 3 + c] = v;
    }
    out.push_back(std::move(img));
  }
  return out;
}

std::vector<int> read_idx_labels(const std::filesystem::path& file) {
  const auto bytes = read_bytes(file);
  const auto ext = idx_header(bytes, kIdxLabels, file);
  return {bytes.begin() + 8, bytes.begin() + 8 + std::ptrdiff_t(ext[0])};
}

DatasetPair load_fashion_mnist(const std::filesystem::path& dir) {
  auto load = [&](const std::string& prefix, std::string tag) {
    DatasetSplit s;
    s.tag = std::move(tag);
    s.classes = 10;
    s.images = read_idx_images(dir / (prefix + "-images-idx3-ubyte"));
    s.labels = read_idx_labels(dir / (prefix + "-labels-idx1-ubyte"));
    if (s.images.size() != s.labels.size()) {
      throw DataError(dir.string() + ": " + prefix + " has " + std::to_string(s.images.size()) + " images but " +
                      std::to_string(s.labels.size()) + " labels");
    }
    s.validate();
    return s;
  };
  return {load("train", "train"), load("t10k", "test")};
}

DatasetSplit subset_classes(const DatasetSplit& split, std::span<const int> classes, std::size_t limit) {
  DatasetSplit out;
  out.tag = split.tag;
  out.classes = classes.size();
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (limit != 0 && out.size() == limit) break;
    for (std::size_t k = 0; k < classes.size(); ++k) {
      if (split.labels[i] == classes[k]) {
        out.images.push_back(split.images[i]);
        out.labels.push_back(int(k));
        break;
      }
    }
  }
  return out;
}

std::vector<std::uint8_t> encode_cifar10_record(int label, const ImageRGB& img) {
  if (img.height != kCifarSide || img.width != kCifarSide) throw GeometryError("CIFAR-10 records are 32x32");
  std::vector<std::uint8_t> out(kCifarRecord);
  out[0] = std::uint8_t(label);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t p = 0; p < kCifarPlane; ++p) {
      out[1 + c * kCifarPlane + p] = std::uint8_t(std::lround(img.values[p * 3 + c] * 255.0));
    }
  }
  return out;
}

std::vector<std::uint8_t> encode_idx_images(std::span<const std::vector<std::uint8_t>> images, std::size_t rows,
                                            std::size_t cols) {
  std::vector<std::uint8_t> out;
  put_be32(out, kIdxImages);
  put_be32(out, std::uint32_t(images.size()));
  put_be32(out, std::uint32_t(rows));
  put_be32(out, std::uint32_t(cols));
  for (const auto& img : images) {
    if (img.size() != rows * cols) throw DimensionError("IDX image has the wrong pixel count");
    out.insert(out.end(), img.begin(), img.end());
  }
  return out;
}

std::vector<std::uint8_t> encode_idx_labels(std::span<const std::uint8_t> labels) {
  std::vector<std::uint8_t> out;
  put_be32(out, kIdxLabels);
  put_be32(out, std::uint32_t(labels.size()));
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

DatasetSplit synthetic_halves(std::size_t count, std::size_t height, std::size_t width, double noise,
                              std::uint64_t seed, std::string tag) {
  DatasetSplit s;
  s.tag = std::move(tag);
  s.classes = 2;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-noise, noise);
  for (std::size_t i = 0; i < count; ++i) {
    const int label = int(i % 2);
    ImageRGB img(height, width);
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        const bool left = x < width / 2;
        const double base = (left == (label == 0)) ? 0.25 : 0.75;
        for (std::size_t c = 0; c < 3; ++c) img.at(y, x, c) = std::clamp(base + u(rng), 0.0, 1.0);
      }
    }
    s.images.push_back(std::move(img));
    s.labels.push_back(label);
  }
  return s;
}

}  // namespace fav
