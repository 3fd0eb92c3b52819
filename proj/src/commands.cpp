#include "fedcore/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "json.hpp"

#include "fedcore/error.hpp"
#include "fedcore/rng.hpp"

namespace fedcore {
namespace {

using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

fs::path prepare_output(const RunConfig& config) {
  std::error_code ec;
  fs::create_directories(config.output_dir, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create " + config.output_dir.string() + ": " + ec.message());
  return config.output_dir;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot open " + path.string());
  return out;
}

void close_out(std::ofstream& out, const fs::path& path) {
  out.close();
  if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
}

std::string fixed(double x) {
  if (!std::isfinite(x)) return "";
  std::ostringstream s;
  s.precision(17);
  s << x;
  return s.str();
}

ordered_json upload_message(std::size_t round, const CentroidUpload& u) {
  return {{"type", "centroid_upload"},
          {"round", round},
          {"client_id", u.client_id},
          {"group_id", u.group_id},
          {"values", u.values}};
}

ordered_json notice_message(std::size_t round, const SelectionNotice& n) {
  return {{"type", "selection_notice"},
          {"round", round},
          {"client_id", n.client_id},
          {"selected_group_ids", n.selected_group_ids}};
}

void write_trace(std::ostream& out, const RoundSelection& sel) {
  for (const auto& u : sel.uploads) out << upload_message(sel.round, u).dump() << '\n';
  for (const auto& n : sel.notices) out << notice_message(sel.round, n).dump() << '\n';
}

ordered_json round_json(const RoundRecord& r) {
  return {{"round", r.round},
          {"active_clients", r.active_clients},
          {"coreset_sizes", r.coreset_sizes},
          {"dataset_sizes", r.dataset_sizes},
          {"data_ratio", r.data_ratio},
          {"cumulative_data_ratio", r.cumulative_data_ratio},
          {"heldout_accuracy", r.heldout.accuracy},
          {"heldout_macro_f1", r.heldout.macro_f1},
          {"noise_counts", r.noise_counts},
          {"selection_counts",
           {{"uploads", r.uploads},
            {"second_level_clusters", r.second_level_clusters},
            {"second_level_noise", r.second_level_noise},
            {"selected", r.selected}}},
          {"skipped", r.skipped}};
}

const char* metrics_header =
    "round,data_ratio,cumulative_data_ratio,heldout_accuracy,heldout_macro_f1,selected_samples,"
    "uploads,second_level_clusters,second_level_noise,skipped\n";

void write_metrics_row(std::ostream& out, const nlohmann::json& rec) {
  std::size_t selected = 0;
  for (const auto& s : rec.at("coreset_sizes")) selected += s.get<std::size_t>();
  const auto& counts = rec.at("selection_counts");
  out << rec.at("round").get<std::size_t>() << ',' << fixed(rec.at("data_ratio").get<double>())
      << ',' << fixed(rec.at("cumulative_data_ratio").get<double>()) << ','
      << fixed(rec.at("heldout_accuracy").get<double>()) << ','
      << fixed(rec.at("heldout_macro_f1").get<double>()) << ',' << selected << ','
      << counts.at("uploads").get<std::size_t>() << ','
      << counts.at("second_level_clusters").get<std::size_t>() << ','
      << counts.at("second_level_noise").get<std::size_t>() << ','
      << (rec.at("skipped").get<bool>() ? 1 : 0) << '\n';
}

}  // namespace

std::string cmd_synth(const RunConfig& config) {
  config.validate();
  const auto dir = prepare_output(config);
  const FederatedDataset data = build_dataset(config);
  std::size_t bytes = 0;
  for (std::size_t c = 0; c < data.clients.size(); ++c) {
    bytes += write_archive(client_archive(data, c), dir / ("client_" + std::to_string(c) + ".fca"));
  }
  bytes += write_archive(heldout_archive(data), dir / "heldout.fca");
  return "wrote " + std::to_string(data.clients.size()) + " client archives and heldout.fca (" +
         std::to_string(bytes) + " bytes)";
}

std::string cmd_partition(const RunConfig& config) {
  config.validate();
  const auto dir = prepare_output(config);
  PoolSplit split;
  const FederatedDataset data = build_dataset(config, &split);
  const auto path = dir / "assignment.csv";
  if (config.data.kind == DataKind::kPool) {
    write_assignment_csv(split.assignment, path, split.train_indices);
  } else {
    // Benchmarks are generated client by client; samples are numbered in that order.
    ClientAssignment a;
    a.n_clients = data.clients.size();
    for (std::size_t c = 0; c < data.clients.size(); ++c) {
      a.client_of.insert(a.client_of.end(), data.clients[c].size(), c);
    }
    write_assignment_csv(a, path);
  }
  return "assigned " + std::to_string(data.total_samples()) + " samples to " +
         std::to_string(data.clients.size()) + " clients";
}

std::string cmd_select(const RunConfig& config) {
  config.validate();
  const auto dir = prepare_output(config);
  const FederatedDataset data = build_dataset(config);
  std::vector<const ClientFeatures*> everyone;
  for (const auto& c : data.clients) everyone.push_back(&c);
  const RoundSelection sel = select_round(everyone, config.simulation.selector, 0, config.seed);

  std::vector<std::size_t> sizes, dataset_sizes;
  ordered_json clients = ordered_json::array();
  for (const auto& cs : sel.clients) {
    const auto path = dir / ("coreset_" + std::to_string(cs.client_id) + ".csv");
    auto out = open_out(path);
    out << "sample_index\n";
    for (const std::size_t i : cs.coreset) out << i << '\n';
    close_out(out, path);
    sizes.push_back(cs.coreset.size());
    dataset_sizes.push_back(cs.dataset_size);
    clients.push_back({{"client_id", cs.client_id},
                       {"dataset_size", cs.dataset_size},
                       {"coreset_size", cs.coreset.size()},
                       {"groups", cs.groups},
                       {"noise", cs.noise}});
  }
  const double ratio = data_ratio(sizes, dataset_sizes);
  const ordered_json summary = {{"selector", std::string(to_string(config.simulation.selector.kind))},
                                {"data_ratio", ratio},
                                {"uploads", sel.uploads.size()},
                                {"second_level_clusters", sel.second_level_clusters},
                                {"second_level_noise", sel.second_level_noise},
                                {"selected", sel.selected},
                                {"clients", clients}};
  const auto summary_path = dir / "selection.json";
  auto out = open_out(summary_path);
  out << summary.dump(2) << '\n';
  close_out(out, summary_path);

  const auto trace_path = dir / "trace.jsonl";
  auto trace = open_out(trace_path);
  write_trace(trace, sel);
  close_out(trace, trace_path);
  return "selected " + std::to_string(std::accumulate(sizes.begin(), sizes.end(), std::size_t{0})) +
         " samples, data ratio " + fixed(ratio);
}

std::string cmd_run(const RunConfig& config) {
  config.validate();
  const auto dir = prepare_output(config);
  const FederatedDataset data = build_dataset(config);

  std::ofstream trace;
  const auto trace_path = dir / "trace.jsonl";
  if (config.trace) trace = open_out(trace_path);
  SelectionObserver observer;
  if (config.trace) observer = [&trace](const RoundSelection& sel) { write_trace(trace, sel); };

  const RunHistory history = run(data, config.simulation, [&](const RoundSelection& sel) {
    spdlog::debug("round {}: {} clients selected {} samples", sel.round, sel.clients.size(),
                  sel.selected);
    if (observer) observer(sel);
  });
  if (config.trace) close_out(trace, trace_path);

  const auto run_path = dir / "run.jsonl";
  auto run_out = open_out(run_path);
  const auto metrics_path = dir / "metrics.csv";
  auto metrics = open_out(metrics_path);
  metrics << metrics_header;
  for (const auto& r : history.rounds) {
    const auto rec = round_json(r);
    run_out << rec.dump() << '\n';
    write_metrics_row(metrics, nlohmann::json::parse(rec.dump()));
    spdlog::info("round {}: data_ratio={:.4f} accuracy={:.4f}", r.round, r.data_ratio,
                 r.heldout.accuracy);
  }
  close_out(run_out, run_path);
  close_out(metrics, metrics_path);

  std::size_t selected = 0, seen = 0;
  double best = history.initial.accuracy;
  for (const auto& r : history.rounds) {
    selected += std::accumulate(r.coreset_sizes.begin(), r.coreset_sizes.end(), std::size_t{0});
    seen += std::accumulate(r.dataset_sizes.begin(), r.dataset_sizes.end(), std::size_t{0});
    best = std::max(best, r.heldout.accuracy);
  }
  const auto final_scores = history.final_scores();
  // The output location is where this file lives, not part of the experiment.
  auto effective = ordered_json::parse(config.dump());
  effective.erase("output_dir");
  const ordered_json summary = {
      {"schema_version", RunConfig::kSchemaVersion},
      {"seed", config.seed},
      {"selector", std::string(to_string(config.simulation.selector.kind))},
      {"rounds", history.rounds.size()},
      {"clients", data.clients.size()},
      {"total_samples", data.total_samples()},
      {"initial", {{"heldout_accuracy", history.initial.accuracy},
                   {"heldout_macro_f1", history.initial.macro_f1}}},
      {"final", {{"heldout_accuracy", final_scores.accuracy},
                 {"heldout_macro_f1", final_scores.macro_f1}}},
      {"best_heldout_accuracy", best},
      {"cumulative_data_ratio", history.cumulative_data_ratio()},
      {"selected_samples", selected},
      {"active_samples", seen},
      {"skipped_rounds", std::count_if(history.rounds.begin(), history.rounds.end(),
                                       [](const RoundRecord& r) { return r.skipped; })},
      {"config", effective},
  };
  const auto summary_path = dir / "summary.json";
  auto out = open_out(summary_path);
  out << summary.dump(2) << '\n';
  close_out(out, summary_path);
  return "finished " + std::to_string(history.rounds.size()) + " rounds, final accuracy " +
         fixed(final_scores.accuracy) + ", cumulative data ratio " +
         fixed(history.cumulative_data_ratio());
}

namespace {

void write_embedding(const fs::path& path, const Matrix& embedding, std::span<const int> labels,
                     const std::set<std::size_t>& selected) {
  auto out = open_out(path);
  out << "x,y,label,selected\n";
  for (std::size_t i = 0; i < embedding.rows(); ++i) {
    const double x = embedding(i, 0);
    const double y = embedding.cols() > 1 ? embedding(i, 1) : 0.0;
    out << fixed(x) << ',' << fixed(y) << ',' << labels[i] << ',' << (selected.count(i) ? 1 : 0)
        << '\n';
  }
  close_out(out, path);
}

// K-means with one cluster per true label, scored against the points and labels.
void write_layer_metrics_row(std::ostream& out, std::size_t client, const std::string& name,
                             const Matrix& points, std::span<const int> labels,
                             std::uint64_t seed) {
  const std::set<int> classes(labels.begin(), labels.end());
  out << client << ',' << name << ',' << classes.size() << ',';
  if (classes.size() < 2 || classes.size() > points.rows()) {
    out << ",,\n";
    return;
  }
  const auto km = kmeans(points, classes.size(), seed);
  const std::vector<int> pred(km.labels.begin(), km.labels.end());
  auto guarded = [](auto f) {
    try {
      return fixed(f());
    } catch (const Error&) {
      return std::string();
    }
  };
  out << guarded([&] { return calinski_harabasz(points, pred); }) << ','
      << guarded([&] { return silhouette(points, pred); }) << ','
      << fixed(clustering_f1(pred, labels)) << '\n';
}

}  // namespace

std::string cmd_report(const RunConfig& config) {
  config.validate();
  const auto dir = prepare_output(config);
  const fs::path history_path = config.report.history.value_or(dir / "run.jsonl");
  std::ifstream in(history_path);
  if (!in) fail(ErrorKind::kIo, "cannot open history " + history_path.string());

  const auto metrics_path = dir / "metrics.csv";
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) lines.push_back(line);
  }
  auto metrics = open_out(metrics_path);
  metrics << metrics_header;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(lines[i]);
      write_metrics_row(metrics, rec);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::kValidation, history_path.string() + " line " + std::to_string(i + 1) +
                                       ": " + e.what());
    }
  }
  close_out(metrics, metrics_path);

  const FederatedDataset data = build_dataset(config);
  const auto& sel = config.simulation.selector;
  const auto layer_path = dir / "layer_metrics.csv";
  auto layers = open_out(layer_path);
  layers << "client,representation,classes,calinski_harabasz,silhouette,f1\n";
  for (const std::size_t id : config.report.clients) {
    if (id >= data.clients.size()) {
      fail(ErrorKind::kConfiguration, "report client " + std::to_string(id) + " does not exist");
    }
    const auto& client = data.clients[id];
    const auto& labels = data.labels[id];
    ReducerConfig reducer = sel.reducer;
    reducer.seed = derive_seed(config.seed, "reduce", 0, id);

    const Matrix fused = fuse(client.features, reducer);
    const IntraSelection intra = intra_select(fused, sel.intra);
    std::vector<std::size_t> all(intra.clustering.groups.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    const auto coreset = build_coreset(fused, intra, {id, all}).sample_indices;
    const std::set<std::size_t> chosen(coreset.begin(), coreset.end());
    write_embedding(dir / ("embeddings_" + std::to_string(id) + ".csv"), fused, labels, chosen);

    const Matrix last = fuse(client.last_layer(), reducer);
    const IntraSelection last_intra = intra_select(last, sel.intra);
    std::vector<std::size_t> last_all(last_intra.clustering.groups.size());
    std::iota(last_all.begin(), last_all.end(), std::size_t{0});
    const auto last_coreset = build_coreset(last, last_intra, {id, last_all}).sample_indices;
    write_embedding(dir / ("embeddings_" + std::to_string(id) + "_last_layer.csv"), last, labels,
                    std::set<std::size_t>(last_coreset.begin(), last_coreset.end()));

    const auto km_seed = derive_seed(config.seed, "report_kmeans", 0, id);
    for (std::size_t l = 0; l < client.layer_count; ++l) {
      const Matrix layer = client.features.col_slice(l * client.layer_dim, client.layer_dim);
      write_layer_metrics_row(layers, id, "layer_" + std::to_string(l), fuse(layer, reducer),
                              labels, km_seed);
    }
    write_layer_metrics_row(layers, id, "fused", fused, labels, km_seed);
  }
  close_out(layers, layer_path);
  return "report for " + std::to_string(lines.size()) + " rounds and " +
         std::to_string(config.report.clients.size()) + " clients";
}

}  // namespace fedcore
