#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rankgan/adversarial.hpp"
#include "rankgan/corpus.hpp"
#include "rankgan/oracle.hpp"

namespace rankgan {

inline constexpr int kRunFormatVersion = 1;

// Everything needed to re-run or resume a training run: the canonical
// config text, input checksums, and the checksum of every artifact in the
// run directory at the last completed epoch.
struct RunManifest {
  int format_version = kRunFormatVersion;
  std::string mode;
  std::uint64_t seed = 0;
  std::size_t completed_epochs = 0;
  std::string config_text;
  std::vector<std::pair<std::string, std::string>> inputs;     // name -> checksum (hex)
  std::vector<std::pair<std::string, std::string>> artifacts;  // file name -> checksum (hex)

  std::string to_text() const;
  static RunManifest from_text(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static RunManifest load(const std::filesystem::path& path);
};

struct TrainingData {
  Corpus train;
  Corpus validation;  // empty unless validation_fraction > 0
  std::optional<Oracle> oracle;
};

// Loads the corpus (with the configured or oracle-derived vocabulary), the
// optional oracle, and applies the validation split.
TrainingData load_training_data(const TrainingConfig& cfg);

struct RunOptions {
  std::filesystem::path out_dir;
  bool resume = false;
  // Stop (with state saved) after this many epochs have been run in this
  // invocation; 0 runs to completion.
  std::size_t stop_after = 0;
  bool verbose = false;
};

// Trains into out_dir, saving state and the manifest after every epoch.
// With resume set, verifies the manifest (config, inputs and artifact
// checksums) and continues from the last completed epoch.
RunLog run_training(const TrainingConfig& cfg, const RunOptions& opts);

}  // namespace rankgan
