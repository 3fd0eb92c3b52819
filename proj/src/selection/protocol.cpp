#include <algorithm>
#include <map>
#include <numeric>
#include <string>
#include <tuple>

#include "fedcore/error.hpp"
#include "fedcore/selection.hpp"

namespace fedcore {

std::string_view to_string(SelectorKind kind) noexcept {
  switch (kind) {
    case SelectorKind::kFedhds: return "fedhds";
    case SelectorKind::kFedhdsIntra: return "fedhds_intra";
    case SelectorKind::kFeddb: return "feddb";
    case SelectorKind::kRandom: return "random";
    case SelectorKind::kPerplexity: return "perplexity";
    case SelectorKind::kCoresetCent: return "coreset_cent";
  }
  return "unknown";
}

SelectorKind parse_selector_kind(std::string_view text) {
  for (const auto kind : {SelectorKind::kFedhds, SelectorKind::kFedhdsIntra, SelectorKind::kFeddb,
                          SelectorKind::kRandom, SelectorKind::kPerplexity,
                          SelectorKind::kCoresetCent}) {
    if (to_string(kind) == text) return kind;
  }
  fail(ErrorKind::kConfiguration, "unknown selector kind '" + std::string(text) + "'");
}

IntraSelection intra_select(const Matrix& fused, const HdbscanConfig& config) {
  IntraSelection out;
  out.clustering = hdbscan(fused, config);
  out.centroids.reserve(out.clustering.groups.size());
  for (const auto& g : out.clustering.groups) out.centroids.push_back(g.centroid);
  return out;
}

InterSelection inter_select(std::span<const CentroidUpload> uploads, const HdbscanConfig& config) {
  if (uploads.empty()) fail(ErrorKind::kProtocol, "inter_select needs at least one upload");

  std::vector<std::size_t> order(uploads.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(uploads[a].client_id, uploads[a].group_id) <
           std::tie(uploads[b].client_id, uploads[b].group_id);
  });
  const std::size_t dim = uploads[order.front()].values.size();
  Matrix points(0, dim);
  for (std::size_t r = 0; r < order.size(); ++r) {
    const auto& u = uploads[order[r]];
    if (r > 0) {
      const auto& prev = uploads[order[r - 1]];
      if (prev.client_id == u.client_id && prev.group_id == u.group_id) {
        fail(ErrorKind::kProtocol, "duplicate upload for client " + std::to_string(u.client_id) +
                                       " group " + std::to_string(u.group_id));
      }
    }
    if (u.values.size() != dim) fail(ErrorKind::kDimensionMismatch, "upload dimensions differ");
    if (!all_finite(u.values)) fail(ErrorKind::kValidation, "non-finite upload");
    points.append_row(u.values);
  }

  const ClusteringResult second = hdbscan(points, config);
  std::vector<std::size_t> elected;  // rows of `points`
  for (const auto& g : second.groups) {
    elected.push_back(nearest_member(points, g.member_indices, g.centroid));
  }
  for (std::size_t r = 0; r < second.labels.size(); ++r) {
    if (second.labels[r] < 0) elected.push_back(r);
  }

  std::map<std::size_t, SelectionNotice> notices;
  for (const std::size_t r : order) {
    const auto id = uploads[r].client_id;
    notices.try_emplace(id, SelectionNotice{id, {}});
  }
  for (const std::size_t r : elected) {
    const auto& u = uploads[order[r]];
    notices.at(u.client_id).selected_group_ids.push_back(u.group_id);
  }

  InterSelection out;
  for (auto& [id, notice] : notices) {
    std::sort(notice.selected_group_ids.begin(), notice.selected_group_ids.end());
    out.notices.push_back(std::move(notice));
  }
  out.second_level_clusters = second.groups.size();
  out.second_level_noise = second.noise_count();
  out.selected = elected.size();
  return out;
}

Coreset build_coreset(const Matrix& fused, const IntraSelection& intra,
                      const SelectionNotice& notice) {
  Coreset out{notice.client_id, {}};
  const auto& groups = intra.clustering.groups;
  for (const std::size_t g : notice.selected_group_ids) {
    if (g >= groups.size() || g >= intra.centroids.size()) {
      fail(ErrorKind::kProtocol, "notice for client " + std::to_string(notice.client_id) +
                                     " names unknown group " + std::to_string(g));
    }
    out.sample_indices.push_back(nearest_member(fused, groups[g].member_indices, intra.centroids[g]));
  }
  std::sort(out.sample_indices.begin(), out.sample_indices.end());
  out.sample_indices.erase(std::unique(out.sample_indices.begin(), out.sample_indices.end()),
                           out.sample_indices.end());
  return out;
}

}  // namespace fedcore
