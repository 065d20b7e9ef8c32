#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fav/model.hpp"

namespace fav {

enum ExitCode : int {
  kExitOk = 0,
  kExitUnexpected = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitNumeric = 4,
  kExitAcceptance = 5,
};

/// Flat key=value run description. Model keys are those of ModelConfig;
/// `preset` is applied before any other key regardless of its position.
struct RunConfig {
  std::string command;
  std::string preset = "desk";
  ModelConfig model = ModelConfig::desk();
  std::string dataset;              // directory; empty with format=synthetic
  std::string format = "cifar10";   // cifar10 | fashion_mnist | synthetic
  std::vector<int> classes;         // empty: all classes
  std::size_t train_limit = 0;      // 0: whole split
  std::size_t test_limit = 0;
  std::uint64_t seed = 0;
  std::string out = "out";
  std::size_t epochs = 5;
  std::size_t batch_size = 128;
  std::size_t max_steps = 0;
  double lr = 1e-4;
  double weight_decay = 0.05;
  std::string checkpoint;           // eval input; train writes <out>/model.fav
  std::string variants = "baseline,sppp+lla";
  std::size_t bench_images = 4;
  std::size_t bench_repeats = 5;
  std::size_t image = 0;            // segment/tokenize: index into the test split
  double tolerance = 1e-4;

  /// Sets one key; throws ConfigError on unknown keys or bad values.
  void set(std::string_view key, std::string_view value);
  std::string serialize() const;
  static RunConfig parse(std::string_view text);
  /// Applies `preset` first, then every other entry in order.
  static RunConfig from_entries(const std::vector<std::pair<std::string, std::string>>& entries);
  static RunConfig load(const std::string& path);
};

ModelConfig preset_config(std::string_view name);
/// Non-empty, non-comment lines of a key=value text.
std::vector<std::pair<std::string, std::string>> read_entries(std::string_view text);

/// Full command-line entry point; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fav
