#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fedcore/fedsim.hpp"

namespace fedcore {

enum class DataKind { kModes, kDuplicates, kPool, kArchives };

struct DataConfig {
  DataKind kind = DataKind::kModes;
  ModesBenchmark modes;
  DuplicatesBenchmark duplicates;
  PoolSource pool;
  std::vector<std::filesystem::path> client_archives;
  std::filesystem::path heldout_archive;
};

/// Recorded for documentation; no adapter is trained.
struct LoraConfig {
  int rank = 8;
  double alpha = 16.0;
  double dropout = 0.05;
};

struct ReportConfig {
  std::optional<std::filesystem::path> history;
  std::vector<std::size_t> clients{0};
};

struct RunConfig {
  static constexpr int kSchemaVersion = 1;

  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";
  DataConfig data;
  SimulationConfig simulation;
  LoraConfig lora;
  bool trace = false;
  ReportConfig report;

  /// Parses a config document. Unknown keys and wrong types are configuration
  /// errors; relative paths resolve against `base_dir`.
  static RunConfig parse(const std::string& text, const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::filesystem::path& path);

  /// Semantic checks, including that every referenced input path exists.
  void validate() const;
  /// Effective configuration with all defaults filled in, as JSON text.
  std::string dump() const;
};

FederatedDataset build_dataset(const RunConfig& config, PoolSplit* split_out = nullptr);

}  // namespace fedcore
