#include "fedcore/partition.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "fedcore/error.hpp"
#include "fedcore/rng.hpp"

namespace fedcore {

void PartitionSpec::validate() const {
  if (n_clients == 0) fail(ErrorKind::kValidation, "n_clients must be at least 1");
  if (scheme == PartitionScheme::kDirichlet && !(alpha > 0.0 && std::isfinite(alpha))) {
    fail(ErrorKind::kValidation, "dirichlet alpha must be positive");
  }
}

std::vector<std::vector<std::size_t>> ClientAssignment::members() const {
  std::vector<std::vector<std::size_t>> out(n_clients);
  for (std::size_t i = 0; i < client_of.size(); ++i) out[client_of[i]].push_back(i);
  return out;
}

namespace {

std::vector<double> dirichlet_draw(std::size_t k, double alpha, Rng& rng) {
  // Normalize in log space so tiny alphas don't underflow every component.
  std::vector<double> logs(k);
  for (double& x : logs) x = rng.log_gamma_variate(alpha);
  const double top = *std::max_element(logs.begin(), logs.end());
  double sum = 0.0;
  for (double& x : logs) {
    x = std::exp(x - top);
    sum += x;
  }
  for (double& x : logs) x /= sum;
  return logs;
}

std::size_t draw_index(std::span<const double> cumulative, double u) {
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  if (it == cumulative.end()) return cumulative.size() - 1;
  return static_cast<std::size_t>(it - cumulative.begin());
}

void rebalance(ClientAssignment& assignment) {
  std::vector<std::size_t> sizes(assignment.n_clients, 0);
  for (const std::size_t c : assignment.client_of) ++sizes[c];
  for (std::size_t empty = 0; empty < assignment.n_clients; ++empty) {
    if (sizes[empty] != 0) continue;
    const auto largest = static_cast<std::size_t>(
        std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    std::size_t last = assignment.client_of.size() - 1;
    while (assignment.client_of[last] != largest) --last;
    assignment.client_of[last] = empty;
    --sizes[largest];
    ++sizes[empty];
  }
}

}  // namespace

ClientAssignment dirichlet_partition(std::span<const std::uint32_t> labels,
                                     const PartitionSpec& spec) {
  spec.validate();
  if (spec.scheme != PartitionScheme::kDirichlet) {
    fail(ErrorKind::kValidation, "dirichlet_partition needs the dirichlet scheme");
  }
  if (spec.n_clients > labels.size()) {
    fail(ErrorKind::kValidation, "more clients than samples");
  }
  ClientAssignment out{std::vector<std::size_t>(labels.size(), 0), spec.n_clients};
  if (spec.n_clients == 1) return out;

  std::map<std::uint32_t, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < labels.size(); ++i) by_label[labels[i]].push_back(i);

  Rng rng(spec.seed);
  for (const auto& [label, samples] : by_label) {
    auto proportions = dirichlet_draw(spec.n_clients, spec.alpha, rng);
    std::partial_sum(proportions.begin(), proportions.end(), proportions.begin());
    for (const std::size_t i : samples) {
      out.client_of[i] = draw_index(proportions, rng.uniform() * proportions.back());
    }
  }
  rebalance(out);
  return out;
}

ClientAssignment meta_partition(std::span<const std::uint32_t> task_ids,
                                const PartitionSpec& spec) {
  spec.validate();
  std::map<std::uint32_t, std::size_t> client_of_task;
  ClientAssignment out{std::vector<std::size_t>(task_ids.size(), 0), 0};
  for (std::size_t i = 0; i < task_ids.size(); ++i) {
    const auto [it, inserted] = client_of_task.emplace(task_ids[i], client_of_task.size());
    out.client_of[i] = it->second;
  }
  out.n_clients = client_of_task.size();
  if (out.n_clients != spec.n_clients) {
    fail(ErrorKind::kValidation, "meta partition needs n_clients = " +
                                     std::to_string(out.n_clients) + " (one per task), got " +
                                     std::to_string(spec.n_clients));
  }
  return out;
}

ClientAssignment partition(std::span<const std::uint32_t> labels, const PartitionSpec& spec) {
  return spec.scheme == PartitionScheme::kDirichlet ? dirichlet_partition(labels, spec)
                                                    : meta_partition(labels, spec);
}

void write_assignment_csv(const ClientAssignment& assignment, const std::filesystem::path& path,
                          std::span<const std::size_t> sample_ids) {
  if (!sample_ids.empty() && sample_ids.size() != assignment.client_of.size()) {
    fail(ErrorKind::kDimensionMismatch, "sample id list does not match the assignment");
  }
  std::ofstream out(path);
  if (!out) fail(ErrorKind::kIo, "cannot open " + path.string());
  out << "sample_index,client_id\n";
  for (std::size_t i = 0; i < assignment.client_of.size(); ++i) {
    out << (sample_ids.empty() ? i : sample_ids[i]) << ',' << assignment.client_of[i] << '\n';
  }
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

}  // namespace fedcore
