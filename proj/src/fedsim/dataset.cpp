#include <algorithm>
#include <cmath>

#include "fedcore/error.hpp"
#include "fedcore/fedsim.hpp"
#include "fedcore/rng.hpp"

namespace fedcore {

std::size_t FederatedDataset::total_samples() const noexcept {
  std::size_t n = 0;
  for (const auto& c : clients) n += c.size();
  return n;
}

void FederatedDataset::validate() const {
  if (clients.empty()) fail(ErrorKind::kValidation, "dataset has no clients");
  if (labels.size() != clients.size()) fail(ErrorKind::kValidation, "labels missing for some clients");
  if (heldout_features.rows() == 0) fail(ErrorKind::kValidation, "held-out set is empty");
  if (heldout_labels.size() != heldout_features.rows()) {
    fail(ErrorKind::kValidation, "held-out labels do not match held-out features");
  }
  const std::size_t width = clients.front().features.cols();
  for (std::size_t c = 0; c < clients.size(); ++c) {
    if (clients[c].client_id != c) fail(ErrorKind::kValidation, "client ids must equal positions");
    if (clients[c].size() == 0) fail(ErrorKind::kValidation, "client " + std::to_string(c) + " is empty");
    if (clients[c].features.cols() != width) {
      fail(ErrorKind::kDimensionMismatch, "clients disagree on feature width");
    }
    if (labels[c].size() != clients[c].size()) {
      fail(ErrorKind::kValidation, "labels do not match client " + std::to_string(c));
    }
  }
  if (heldout_features.cols() != width) {
    fail(ErrorKind::kDimensionMismatch, "held-out width differs from client width");
  }
}

void ModesBenchmark::validate() const {
  if (clients == 0 || samples_per_client == 0 || total_modes == 0 || layer_count == 0 ||
      layer_dim == 0) {
    fail(ErrorKind::kValidation, "modes benchmark sizes must be positive");
  }
  if (modes_per_client == 0 || modes_per_client > total_modes) {
    fail(ErrorKind::kValidation, "modes_per_client must lie in [1, total_modes]");
  }
  if (!(mode_separation > 0.0) || !(mode_stddev > 0.0)) {
    fail(ErrorKind::kValidation, "mode_separation and mode_stddev must be positive");
  }
  if (heldout_per_mode == 0) fail(ErrorKind::kValidation, "heldout_per_mode must be positive");
}

void DuplicatesBenchmark::validate() const {
  if (clients == 0 || distinct_per_client == 0 || replicas == 0 || modes == 0 ||
      layer_count == 0 || layer_dim == 0 || heldout_per_mode == 0) {
    fail(ErrorKind::kValidation, "duplicates benchmark sizes must be positive");
  }
  if (!(jitter >= 0.0) || !(mode_separation > 0.0) || !(mode_stddev > 0.0)) {
    fail(ErrorKind::kValidation, "duplicates benchmark scales must be positive");
  }
}

namespace {

void add_gaussian_row(Matrix& m, std::span<const double> center, double stddev, Rng& rng) {
  std::vector<double> row(center.begin(), center.end());
  for (double& x : row) x += stddev * rng.normal();
  m.append_row(row);
}

double perplexity_score(Rng& rng) { return std::exp(1.0 + 0.5 * rng.normal()); }

std::size_t class_count(const FederatedDataset& d) {
  int top = -1;
  for (const auto& l : d.labels) {
    for (const int x : l) top = std::max(top, x);
  }
  for (const int x : d.heldout_labels) top = std::max(top, x);
  return static_cast<std::size_t>(top + 1);
}

Matrix heldout_around(const Matrix& centers, std::size_t per_mode, double stddev, Rng& rng,
                      std::vector<int>& labels) {
  Matrix out(0, centers.cols());
  for (std::size_t m = 0; m < centers.rows(); ++m) {
    for (std::size_t i = 0; i < per_mode; ++i) {
      add_gaussian_row(out, centers.row(m), stddev, rng);
      labels.push_back(static_cast<int>(m));
    }
  }
  return out;
}

}  // namespace

FederatedDataset build_modes(const ModesBenchmark& spec, std::uint64_t seed) {
  spec.validate();
  const std::size_t dim = spec.layer_count * spec.layer_dim;
  Rng center_rng(derive_seed(seed, "modes"));
  const Matrix centers = mode_centers(spec.total_modes, dim, spec.mode_separation, center_rng);

  FederatedDataset out;
  for (std::size_t c = 0; c < spec.clients; ++c) {
    Rng rng(derive_seed(seed, "data", 0, c));
    std::vector<std::size_t> modes(spec.total_modes);
    for (std::size_t m = 0; m < modes.size(); ++m) modes[m] = m;
    for (std::size_t i = 0; i < spec.modes_per_client; ++i) {
      std::swap(modes[i], modes[i + static_cast<std::size_t>(rng.below(modes.size() - i))]);
    }
    modes.resize(spec.modes_per_client);
    std::sort(modes.begin(), modes.end());

    ClientFeatures cf{c, Matrix(0, dim), spec.layer_count, spec.layer_dim, std::vector<double>{}};
    std::vector<int> labels;
    for (std::size_t j = 0; j < spec.samples_per_client; ++j) {
      const std::size_t mode = modes[j * spec.modes_per_client / spec.samples_per_client];
      add_gaussian_row(cf.features, centers.row(mode), spec.mode_stddev, rng);
      labels.push_back(static_cast<int>(mode));
      cf.perplexity->push_back(perplexity_score(rng));
    }
    out.clients.push_back(std::move(cf));
    out.labels.push_back(std::move(labels));
  }
  Rng held_rng(derive_seed(seed, "heldout"));
  out.heldout_features =
      heldout_around(centers, spec.heldout_per_mode, spec.mode_stddev, held_rng, out.heldout_labels);
  out.classes = class_count(out);
  return out;
}

FederatedDataset build_duplicates(const DuplicatesBenchmark& spec, std::uint64_t seed) {
  spec.validate();
  const std::size_t dim = spec.layer_count * spec.layer_dim;
  Rng center_rng(derive_seed(seed, "modes"));
  const Matrix centers = mode_centers(spec.modes, dim, spec.mode_separation, center_rng);

  FederatedDataset out;
  for (std::size_t c = 0; c < spec.clients; ++c) {
    Rng rng(derive_seed(seed, "data", 0, c));
    ClientFeatures cf{c, Matrix(0, dim), spec.layer_count, spec.layer_dim, std::vector<double>{}};
    std::vector<int> labels;
    for (std::size_t d = 0; d < spec.distinct_per_client; ++d) {
      const auto mode = static_cast<std::size_t>(rng.below(spec.modes));
      Matrix base(0, dim);
      add_gaussian_row(base, centers.row(mode), spec.mode_stddev, rng);
      const double score = perplexity_score(rng);
      for (std::size_t r = 0; r < spec.replicas; ++r) {
        add_gaussian_row(cf.features, base.row(0), spec.jitter, rng);
        labels.push_back(static_cast<int>(mode));
        cf.perplexity->push_back(score);
      }
    }
    out.clients.push_back(std::move(cf));
    out.labels.push_back(std::move(labels));
  }
  Rng held_rng(derive_seed(seed, "heldout"));
  out.heldout_features =
      heldout_around(centers, spec.heldout_per_mode, spec.mode_stddev, held_rng, out.heldout_labels);
  out.classes = class_count(out);
  return out;
}

FederatedDataset build_pool(const PoolSource& source, std::uint64_t seed, PoolSplit* split_out) {
  if (source.synthetic.has_value() == source.archive.has_value()) {
    fail(ErrorKind::kConfiguration, "pool needs exactly one of a synthetic spec or an archive");
  }
  const FeatureArchive pool = source.synthetic
                                  ? synth_archive(*source.synthetic, derive_seed(seed, "synth"))
                                  : read_archive(std::filesystem::path(*source.archive));
  if (!pool.labels) fail(ErrorKind::kConfiguration, "pool archive carries no labels");
  const auto& labels = *pool.labels;

  PoolSplit split;
  std::vector<char> held(pool.n_samples, 0);
  if (!source.holdout_labels.empty()) {
    for (std::size_t i = 0; i < pool.n_samples; ++i) {
      held[i] = std::find(source.holdout_labels.begin(), source.holdout_labels.end(), labels[i]) !=
                source.holdout_labels.end();
    }
  } else {
    if (!(source.heldout_fraction > 0.0 && source.heldout_fraction < 1.0)) {
      fail(ErrorKind::kValidation, "heldout_fraction must lie in (0, 1)");
    }
    for (const std::size_t i :
         random_select(pool.n_samples, source.heldout_fraction, derive_seed(seed, "holdout"))) {
      held[i] = 1;
    }
  }
  std::vector<std::uint32_t> train_labels;
  for (std::size_t i = 0; i < pool.n_samples; ++i) {
    if (held[i]) {
      split.heldout_indices.push_back(i);
    } else {
      split.train_indices.push_back(i);
      train_labels.push_back(labels[i]);
    }
  }
  PartitionSpec spec = source.partition;
  spec.seed = derive_seed(seed, "partition");
  split.assignment = partition(train_labels, spec);

  const Matrix all = pool.to_matrix();
  FederatedDataset out;
  const auto members = split.assignment.members();
  for (std::size_t c = 0; c < members.size(); ++c) {
    ClientFeatures cf{c, Matrix(0, all.cols()), pool.layer_count, pool.layer_dim, std::nullopt};
    if (pool.perplexity) cf.perplexity.emplace();
    std::vector<int> client_labels;
    for (const std::size_t local : members[c]) {
      const std::size_t i = split.train_indices[local];
      cf.features.append_row(all.row(i));
      client_labels.push_back(static_cast<int>(labels[i]));
      if (pool.perplexity) cf.perplexity->push_back((*pool.perplexity)[i]);
    }
    out.clients.push_back(std::move(cf));
    out.labels.push_back(std::move(client_labels));
  }
  out.heldout_features = all.select_rows(split.heldout_indices);
  for (const std::size_t i : split.heldout_indices) out.heldout_labels.push_back(static_cast<int>(labels[i]));
  out.classes = class_count(out);
  if (split_out) *split_out = std::move(split);
  return out;
}

FederatedDataset from_archives(std::span<const FeatureArchive> clients,
                               const FeatureArchive& heldout) {
  FederatedDataset out;
  auto to_labels = [](const FeatureArchive& a, const std::string& what) {
    if (!a.labels) fail(ErrorKind::kConfiguration, what + " archive carries no labels");
    return std::vector<int>(a.labels->begin(), a.labels->end());
  };
  for (std::size_t c = 0; c < clients.size(); ++c) {
    const auto& a = clients[c];
    a.validate();
    ClientFeatures cf{c, a.to_matrix(), a.layer_count, a.layer_dim, std::nullopt};
    if (a.perplexity) cf.perplexity.emplace(a.perplexity->begin(), a.perplexity->end());
    out.clients.push_back(std::move(cf));
    out.labels.push_back(to_labels(a, "client " + std::to_string(c)));
  }
  heldout.validate();
  out.heldout_features = heldout.to_matrix();
  out.heldout_labels = to_labels(heldout, "held-out");
  out.classes = class_count(out);
  return out;
}

namespace {

FeatureArchive archive_of(const Matrix& features, std::span<const int> labels,
                          const std::optional<std::vector<double>>& perplexity,
                          std::size_t layer_count, std::size_t layer_dim) {
  FeatureArchive a;
  a.n_samples = features.rows();
  a.layer_count = layer_count;
  a.layer_dim = layer_dim;
  a.features.reserve(features.data().size());
  for (const double x : features.data()) a.features.push_back(static_cast<float>(x));
  a.labels.emplace();
  for (const int l : labels) a.labels->push_back(static_cast<std::uint32_t>(l));
  if (perplexity) {
    a.perplexity.emplace();
    for (const double p : *perplexity) a.perplexity->push_back(static_cast<float>(p));
  }
  a.source_tag = SourceTag::kSynthetic;
  return a;
}

}  // namespace

FeatureArchive client_archive(const FederatedDataset& data, std::size_t client) {
  const auto& c = data.clients.at(client);
  return archive_of(c.features, data.labels.at(client), c.perplexity, c.layer_count, c.layer_dim);
}

FeatureArchive heldout_archive(const FederatedDataset& data) {
  const auto& first = data.clients.at(0);
  return archive_of(data.heldout_features, data.heldout_labels, std::nullopt, first.layer_count,
                    first.layer_dim);
}

}  // namespace fedcore
