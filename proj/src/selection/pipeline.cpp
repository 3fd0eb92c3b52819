#include <algorithm>
#include <cmath>

#include "fedcore/error.hpp"
#include "fedcore/rng.hpp"
#include "fedcore/selection.hpp"

namespace fedcore {

void SelectorConfig::validate() const {
  if (!(ratio > 0.0 && ratio <= 1.0)) fail(ErrorKind::kValidation, "selector ratio must lie in (0, 1]");
  intra.validate();
  inter.validate();
  reducer.validate();
  privacy.validate();
}

Matrix fuse(const Matrix& features, const ReducerConfig& config) {
  const std::size_t n = features.rows();
  bool uniform = true;
  for (std::size_t i = 1; i < n && uniform; ++i) {
    uniform = std::equal(features.row(i).begin(), features.row(i).end(), features.row(0).begin());
  }
  if (n < 2 || uniform) return Matrix(n, config.output_dim, 0.0);
  return reduce(features, config);
}

namespace {

bool embeds(SelectorKind kind) {
  return kind == SelectorKind::kFedhds || kind == SelectorKind::kFedhdsIntra ||
         kind == SelectorKind::kFeddb;
}

std::vector<std::size_t> all_groups(const IntraSelection& intra) {
  std::vector<std::size_t> ids(intra.clustering.groups.size());
  for (std::size_t g = 0; g < ids.size(); ++g) ids[g] = g;
  return ids;
}

void select_coreset_cent(std::span<const ClientFeatures* const> clients,
                         const SelectorConfig& config, std::uint64_t seed, RoundSelection& out) {
  Matrix pooled;
  std::vector<std::pair<std::size_t, std::size_t>> origin;  // (slot, local index)
  for (std::size_t s = 0; s < clients.size(); ++s) {
    const Matrix last = clients[s]->last_layer();
    if (s == 0) pooled = Matrix(0, last.cols());
    if (last.cols() != pooled.cols()) {
      fail(ErrorKind::kDimensionMismatch, "clients disagree on the last-layer width");
    }
    for (std::size_t i = 0; i < last.rows(); ++i) {
      pooled.append_row(last.row(i));
      origin.emplace_back(s, i);
    }
  }
  for (const std::size_t g : coreset_cent(pooled, config.ratio, seed)) {
    out.clients[origin[g].first].coreset.push_back(origin[g].second);
  }
}

}  // namespace

RoundSelection select_round(std::span<const ClientFeatures* const> clients,
                            const SelectorConfig& config, std::size_t round,
                            std::uint64_t master_seed) {
  config.validate();
  RoundSelection out;
  out.round = round;
  out.clients.reserve(clients.size());
  for (const auto* c : clients) {
    ClientSelection cs;
    cs.client_id = c->client_id;
    cs.dataset_size = c->size();
    out.clients.push_back(std::move(cs));
  }

  if (config.kind == SelectorKind::kCoresetCent) {
    if (!clients.empty()) {
      select_coreset_cent(clients, config, derive_seed(master_seed, "coreset_cent", round), out);
    }
    return out;
  }

  if (!embeds(config.kind)) {
    for (std::size_t s = 0; s < clients.size(); ++s) {
      const auto& c = *clients[s];
      auto& cs = out.clients[s];
      if (config.kind == SelectorKind::kRandom) {
        cs.coreset = random_select(c.size(), config.ratio,
                                   derive_seed(master_seed, "random", round, c.client_id));
      } else if (c.perplexity) {
        cs.coreset = perplexity_select(std::span<const double>(*c.perplexity), config.ratio);
      } else {
        cs.coreset = perplexity_select(std::nullopt, config.ratio);
      }
    }
    return out;
  }

  std::vector<IntraSelection> intra(clients.size());
  for (std::size_t s = 0; s < clients.size(); ++s) {
    const auto& c = *clients[s];
    auto& cs = out.clients[s];
    if (c.size() == 0) continue;
    ReducerConfig reducer = config.reducer;
    reducer.seed = derive_seed(master_seed, "reduce", round, c.client_id);
    cs.fused = fuse(config.kind == SelectorKind::kFeddb ? c.last_layer() : c.features, reducer);
    intra[s] = intra_select(cs.fused, config.intra);
    cs.labels = intra[s].clustering.labels;
    cs.groups = intra[s].clustering.groups.size();
    cs.noise = intra[s].clustering.noise_count();

    if (config.kind != SelectorKind::kFedhds) {
      cs.coreset = build_coreset(cs.fused, intra[s], {c.client_id, all_groups(intra[s])}).sample_indices;
      out.selected += cs.groups;
      continue;
    }
    Rng noise(derive_seed(master_seed, "privacy", round, c.client_id));
    for (std::size_t g = 0; g < intra[s].centroids.size(); ++g) {
      const auto& raw = intra[s].centroids[g];
      out.uploads.push_back(
          {c.client_id, g,
           config.privacy.enabled ? transform_centroid(raw, config.privacy, noise).values : raw});
    }
  }

  if (config.kind != SelectorKind::kFedhds || out.uploads.empty()) return out;

  InterSelection inter = inter_select(out.uploads, config.inter);
  out.second_level_clusters = inter.second_level_clusters;
  out.second_level_noise = inter.second_level_noise;
  out.selected = inter.selected;
  for (std::size_t s = 0; s < clients.size(); ++s) {
    const auto id = clients[s]->client_id;
    const auto it = std::find_if(inter.notices.begin(), inter.notices.end(),
                                 [id](const SelectionNotice& n) { return n.client_id == id; });
    if (it == inter.notices.end()) continue;
    out.clients[s].coreset = build_coreset(out.clients[s].fused, intra[s], *it).sample_indices;
  }
  out.notices = std::move(inter.notices);
  return out;
}

}  // namespace fedcore
