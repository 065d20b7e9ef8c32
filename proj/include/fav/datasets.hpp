#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fav/imaging.hpp"

namespace fav {

struct DatasetSplit {
  std::string tag;  // "train" or "test"
  std::vector<ImageRGB> images;
  std::vector<int> labels;
  std::size_t classes = 0;

  std::size_t size() const noexcept { return images.size(); }
  /// Same count of images and labels, labels in range, uniform extents.
  void validate() const;
};

struct DatasetPair {
  DatasetSplit train;
  DatasetSplit test;
};

/// One CIFAR-10 binary batch file: records of 1 label byte + 3072 pixel bytes
/// (1024 R, 1024 G, 1024 B, each plane row-major 32x32).
DatasetSplit read_cifar10_batch(const std::filesystem::path& file, std::string tag = "train");
/// Directory with data_batch_1..5.bin and test_batch.bin.
DatasetPair load_cifar10(const std::filesystem::path& dir);

/// Reads only records whose label is in `classes` (all when empty), at most
/// `limit` per split (0: no limit); labels are kept as stored.
DatasetPair load_cifar10_filtered(const std::filesystem::path& dir, std::span<const int> classes,
                                  std::size_t train_limit, std::size_t test_limit);

/// IDX image file (magic 0x00000803), grayscale replicated to three channels.
std::vector<ImageRGB> read_idx_images(const std::filesystem::path& file);
/// IDX label file (magic 0x00000801).
std::vector<int> read_idx_labels(const std::filesystem::path& file);
/// Directory with the four standard {train,t10k}-{images-idx3,labels-idx1}-ubyte files.
DatasetPair load_fashion_mnist(const std::filesystem::path& dir);

/// Keeps the listed classes, relabelled 0..k-1 in list order, at most
/// `limit` images (0: all) taken in file order.
DatasetSplit subset_classes(const DatasetSplit& split, std::span<const int> classes, std::size_t limit = 0);

/// Serializers used for fixtures and tests.
std::vector<std::uint8_t> encode_cifar10_record(int label, const ImageRGB& img);
std::vector<std::uint8_t> encode_idx_images(std::span<const std::vector<std::uint8_t>> images, std::size_t rows,
                                            std::size_t cols);
std::vector<std::uint8_t> encode_idx_labels(std::span<const std::uint8_t> labels);

/// Two-class synthetic set: class 0 darker left half, class 1 darker right
/// half, with uniform noise. Deterministic in `seed`.
DatasetSplit synthetic_halves(std::size_t count, std::size_t height, std::size_t width, double noise,
                              std::uint64_t seed, std::string tag = "train");

}  // namespace fav
