#include <algorithm>
#include <numeric>

#include "fedcore/error.hpp"
#include "fedcore/fedsim.hpp"
#include "fedcore/rng.hpp"

namespace fedcore {

void SimulationConfig::validate() const {
  if (!(active_ratio > 0.0 && active_ratio <= 1.0)) {
    fail(ErrorKind::kValidation, "active_ratio must lie in (0, 1]");
  }
  selector.validate();
  training.validate();
}

double RunHistory::cumulative_data_ratio() const noexcept {
  return rounds.empty() ? 0.0 : rounds.back().cumulative_data_ratio;
}

ClassificationScores RunHistory::final_scores() const noexcept {
  return rounds.empty() ? initial : rounds.back().heldout;
}

namespace {

// Restriction of a once-per-run selection to the clients active this round.
RoundSelection restrict_to(const RoundSelection& full, std::span<const std::size_t> active,
                           std::size_t round) {
  RoundSelection out;
  out.round = round;
  for (const std::size_t id : active) {
    const auto it = std::find_if(full.clients.begin(), full.clients.end(),
                                 [id](const ClientSelection& c) { return c.client_id == id; });
    ClientSelection cs;
    cs.client_id = it->client_id;
    cs.dataset_size = it->dataset_size;
    cs.coreset = it->coreset;
    cs.groups = it->groups;
    cs.noise = it->noise;
    out.clients.push_back(std::move(cs));
  }
  out.uploads = full.uploads;
  out.notices = full.notices;
  out.second_level_clusters = full.second_level_clusters;
  out.second_level_noise = full.second_level_noise;
  out.selected = full.selected;
  return out;
}

}  // namespace

RunHistory run(const FederatedDataset& data, const SimulationConfig& config,
               const SelectionObserver& observer) {
  config.validate();
  data.validate();

  RunHistory history;
  ModelParams global = ModelParams::zeros(data.classes, data.heldout_features.cols());
  history.initial = evaluate(global, data.heldout_features, data.heldout_labels);

  std::optional<RoundSelection> once;
  if (config.schedule == SelectionSchedule::kOnce && config.rounds > 0) {
    std::vector<const ClientFeatures*> everyone;
    for (const auto& c : data.clients) everyone.push_back(&c);
    once = select_round(everyone, config.selector, 0, config.seed);
    if (observer) observer(*once);
  }

  std::size_t seen_selected = 0;
  std::size_t seen_total = 0;
  for (std::size_t r = 0; r < config.rounds; ++r) {
    const auto active = sample_clients(data.clients.size(), config.active_ratio, r, config.seed);
    RoundSelection selection;
    if (once) {
      selection = restrict_to(*once, active, r);
    } else {
      std::vector<const ClientFeatures*> ptrs;
      for (const std::size_t id : active) ptrs.push_back(&data.clients[id]);
      selection = select_round(ptrs, config.selector, r, config.seed);
      if (observer) observer(selection);
    }

    RoundRecord rec;
    rec.round = r;
    rec.active_clients = active;
    rec.uploads = selection.uploads.size();
    rec.second_level_clusters = selection.second_level_clusters;
    rec.second_level_noise = selection.second_level_noise;
    rec.selected = selection.selected;

    std::vector<ClientUpdate> updates;
    for (const auto& cs : selection.clients) {
      rec.coreset_sizes.push_back(cs.coreset.size());
      rec.dataset_sizes.push_back(cs.dataset_size);
      rec.noise_counts.push_back(cs.noise);
      const auto& client = data.clients[cs.client_id];
      const Matrix x = client.features.select_rows(cs.coreset);
      std::vector<int> y;
      for (const std::size_t i : cs.coreset) y.push_back(data.labels[cs.client_id][i]);
      if (auto trained = local_train(global, x, y, config.training)) {
        updates.push_back({cs.client_id, std::move(*trained), cs.coreset.size()});
      }
    }
    const auto selected = std::accumulate(rec.coreset_sizes.begin(), rec.coreset_sizes.end(), std::size_t{0});
    const auto total = std::accumulate(rec.dataset_sizes.begin(), rec.dataset_sizes.end(), std::size_t{0});
    seen_selected += selected;
    seen_total += total;
    rec.data_ratio = data_ratio(rec.coreset_sizes, rec.dataset_sizes);
    rec.cumulative_data_ratio = static_cast<double>(seen_selected) / static_cast<double>(seen_total);

    if (auto next = aggregate(updates)) {
      global = std::move(*next);
    } else {
      rec.skipped = true;
    }
    rec.heldout = evaluate(global, data.heldout_features, data.heldout_labels);
    history.rounds.push_back(std::move(rec));
  }
  history.final_params = global;
  return history;
}

}  // namespace fedcore
