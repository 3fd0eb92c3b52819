#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace fedcore {

enum class PartitionScheme { kDirichlet, kMeta };

struct PartitionSpec {
  PartitionScheme scheme = PartitionScheme::kDirichlet;
  std::size_t n_clients = 1;
  double alpha = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ClientAssignment {
  std::vector<std::size_t> client_of;  // per sample
  std::size_t n_clients = 0;

  /// Sample indices of every client, ascending.
  std::vector<std::vector<std::size_t>> members() const;
};

/// Per category (ascending label), client proportions ~ Dirichlet(alpha) and each
/// sample drawn independently from them. Empty clients then take the last
/// sample of the currently largest client (lowest id on ties).
ClientAssignment dirichlet_partition(std::span<const std::uint32_t> labels,
                                     const PartitionSpec& spec);

/// Task t (in order of first appearance) goes to client t.
ClientAssignment meta_partition(std::span<const std::uint32_t> task_ids,
                                const PartitionSpec& spec);

ClientAssignment partition(std::span<const std::uint32_t> labels, const PartitionSpec& spec);

/// CSV with header `sample_index,client_id`. `sample_ids` renames the rows
/// (e.g. to indices of a larger pool); row i is written as i when empty.
void write_assignment_csv(const ClientAssignment& assignment, const std::filesystem::path& path,
                          std::span<const std::size_t> sample_ids = {});

}  // namespace fedcore
