#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedcore/error.hpp"
#include "fedcore/fedsim.hpp"
#include "fedcore/rng.hpp"

namespace fedcore {

ModelParams ModelParams::zeros(std::size_t classes, std::size_t dim) {
  if (classes == 0) fail(ErrorKind::kValidation, "model needs at least one class");
  return {classes, dim, std::vector<double>(classes * dim + classes, 0.0)};
}

std::vector<double> ModelParams::logits(std::span<const double> x) const {
  if (x.size() != dim) fail(ErrorKind::kDimensionMismatch, "input width does not match the model");
  std::vector<double> z(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    const double* w = values.data() + c * dim;
    double s = values[classes * dim + c];
    for (std::size_t j = 0; j < dim; ++j) s += w[j] * x[j];
    z[c] = s;
  }
  return z;
}

int ModelParams::predict(std::span<const double> x) const {
  const auto z = logits(x);
  return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

namespace {

std::vector<double> softmax(std::vector<double> z) {
  const double top = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - top);
    sum += v;
  }
  for (double& v : z) v /= sum;
  return z;
}

void check_label(const ModelParams& params, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= params.classes) {
    fail(ErrorKind::kValidation, "label " + std::to_string(label) + " outside the model's classes");
  }
}

}  // namespace

double sample_loss(const ModelParams& params, std::span<const double> x, int label) {
  check_label(params, label);
  const auto z = params.logits(x);
  const double top = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (const double v : z) sum += std::exp(v - top);
  return top + std::log(sum) - z[static_cast<std::size_t>(label)];
}

std::vector<double> sample_gradient(const ModelParams& params, std::span<const double> x,
                                    int label) {
  check_label(params, label);
  auto p = softmax(params.logits(x));
  p[static_cast<std::size_t>(label)] -= 1.0;
  std::vector<double> g(params.values.size(), 0.0);
  for (std::size_t c = 0; c < params.classes; ++c) {
    for (std::size_t j = 0; j < params.dim; ++j) g[c * params.dim + j] = p[c] * x[j];
    g[params.classes * params.dim + c] = p[c];
  }
  return g;
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    fail(ErrorKind::kValidation, "learning_rate must be a finite non-negative number");
  }
  if (epochs == 0) fail(ErrorKind::kValidation, "epochs_per_round must be at least 1");
}

std::optional<ModelParams> local_train(const ModelParams& params, const Matrix& features,
                                       std::span<const int> labels, const TrainConfig& config) {
  config.validate();
  if (features.rows() != labels.size()) {
    fail(ErrorKind::kDimensionMismatch, "features and labels differ in length");
  }
  if (features.rows() == 0) return std::nullopt;

  ModelParams w = params;
  std::vector<double> m, v;
  if (config.optimizer == Optimizer::kAdam) {
    m.assign(w.values.size(), 0.0);
    v.assign(w.values.size(), 0.0);
  }
  std::size_t t = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = 0; i < features.rows(); ++i) {
      const auto g = sample_gradient(w, features.row(i), labels[i]);
      if (config.optimizer == Optimizer::kSgd) {
        for (std::size_t p = 0; p < g.size(); ++p) w.values[p] -= config.learning_rate * g[p];
        continue;
      }
      ++t;
      const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
      const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
      for (std::size_t p = 0; p < g.size(); ++p) {
        m[p] = config.beta1 * m[p] + (1.0 - config.beta1) * g[p];
        v[p] = config.beta2 * v[p] + (1.0 - config.beta2) * g[p] * g[p];
        w.values[p] -= config.learning_rate * (m[p] / c1) / (std::sqrt(v[p] / c2) + config.adam_epsilon);
      }
    }
  }
  return w;
}

std::optional<ModelParams> aggregate(std::span<const ClientUpdate> updates) {
  std::vector<const ClientUpdate*> order;
  std::size_t total = 0;
  for (const auto& u : updates) {
    if (u.coreset_size == 0) continue;
    order.push_back(&u);
    total += u.coreset_size;
  }
  if (order.empty()) return std::nullopt;
  std::sort(order.begin(), order.end(), [](const ClientUpdate* a, const ClientUpdate* b) {
    return a->client_id < b->client_id;
  });

  const ModelParams& first = order.front()->params;
  ModelParams out{first.classes, first.dim, std::vector<double>(first.values.size(), 0.0)};
  for (const auto* u : order) {
    if (u->params.values.size() != out.values.size()) {
      fail(ErrorKind::kDimensionMismatch, "client updates differ in size");
    }
    const double lambda = static_cast<double>(u->coreset_size) / static_cast<double>(total);
    for (std::size_t p = 0; p < out.values.size(); ++p) out.values[p] += lambda * u->params.values[p];
  }
  return out;
}

std::vector<std::size_t> sample_clients(std::size_t n_clients, double active_ratio,
                                        std::size_t round, std::uint64_t seed) {
  if (!(active_ratio > 0.0 && active_ratio <= 1.0)) {
    fail(ErrorKind::kValidation, "active_ratio must lie in (0, 1]");
  }
  if (n_clients == 0) fail(ErrorKind::kEmptyInput, "no clients to sample");
  const auto m = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(active_ratio * static_cast<double>(n_clients))), 1,
      n_clients);
  std::vector<std::size_t> ids(n_clients);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  Rng rng(derive_seed(seed, "sampling", round));
  for (std::size_t i = 0; i < m; ++i) {
    std::swap(ids[i], ids[i + static_cast<std::size_t>(rng.below(n_clients - i))]);
  }
  ids.resize(m);
  std::sort(ids.begin(), ids.end());
  return ids;
}

ClassificationScores evaluate(const ModelParams& params, const Matrix& features,
                              std::span<const int> labels) {
  if (features.rows() != labels.size()) {
    fail(ErrorKind::kDimensionMismatch, "features and labels differ in length");
  }
  std::vector<int> predicted(features.rows());
  for (std::size_t i = 0; i < features.rows(); ++i) predicted[i] = params.predict(features.row(i));
  return classification_scores(predicted, labels);
}

}  // namespace fedcore
