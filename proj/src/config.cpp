#include "fedcore/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

#include "json.hpp"

#include "fedcore/error.hpp"

namespace fedcore {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

[[noreturn]] void config_error(const std::string& message) {
  fail(ErrorKind::kConfiguration, message);
}

template <class T>
T convert(const json& v, const std::string& where) {
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) config_error(where + " must be a boolean");
    return v.get<bool>();
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) config_error(where + " must be a string");
    return v.get<std::string>();
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) config_error(where + " must be a number");
    return v.get<T>();
  } else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) {
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)) {
      config_error(where + " must be a non-negative integer");
    }
    return v.get<T>();
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) config_error(where + " must be an integer");
    return v.get<T>();
  } else {
    static_assert(sizeof(T) == 0, "unsupported config type");
  }
}

// Reads one JSON object, remembering which keys were consumed so leftovers can
// be reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) config_error(where() + " must be an object");
  }

  bool has(const std::string& key) {
    used_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  template <class T>
  void read(const std::string& key, T& out) {
    if (has(key)) out = convert<T>(j_.at(key), name(key));
  }

  template <class T>
  void read(const std::string& key, std::optional<T>& out) {
    if (has(key)) out = convert<T>(j_.at(key), name(key));
  }

  template <class T>
  T required(const std::string& key) {
    if (!has(key)) config_error(name(key) + " is required");
    return convert<T>(j_.at(key), name(key));
  }

  template <class T>
  void read_list(const std::string& key, std::vector<T>& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_array()) config_error(name(key) + " must be an array");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      out.push_back(convert<T>(v[i], name(key) + "[" + std::to_string(i) + "]"));
    }
  }

  Section child(const std::string& key) {
    static const json empty = json::object();
    return has(key) ? Section(j_.at(key), name(key)) : Section(empty, name(key));
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!used_.count(item.key())) config_error("unknown key " + name(item.key()));
    }
  }

  std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

void parse_hdbscan(Section s, HdbscanConfig& out) {
  s.read("min_cluster_size", out.min_cluster_size);
  s.read("min_samples", out.min_samples);
  s.finish();
}

void parse_modes(Section& s, ModesBenchmark& m) {
  s.read("clients", m.clients);
  s.read("samples_per_client", m.samples_per_client);
  s.read("total_modes", m.total_modes);
  s.read("modes_per_client", m.modes_per_client);
  s.read("mode_separation", m.mode_separation);
  s.read("mode_stddev", m.mode_stddev);
  s.read("layer_count", m.layer_count);
  s.read("layer_dim", m.layer_dim);
  s.read("heldout_per_mode", m.heldout_per_mode);
}

void parse_duplicates(Section& s, DuplicatesBenchmark& d) {
  s.read("clients", d.clients);
  s.read("distinct_per_client", d.distinct_per_client);
  s.read("replicas", d.replicas);
  s.read("jitter", d.jitter);
  s.read("modes", d.modes);
  s.read("mode_separation", d.mode_separation);
  s.read("mode_stddev", d.mode_stddev);
  s.read("layer_count", d.layer_count);
  s.read("layer_dim", d.layer_dim);
  s.read("heldout_per_mode", d.heldout_per_mode);
}

void parse_pool(Section& s, PoolSource& p, const std::filesystem::path& base) {
  if (s.has("synthetic")) {
    Section syn = s.child("synthetic");
    SyntheticSpec spec;
    syn.read("n_modes", spec.n_modes);
    syn.read("mode_separation", spec.mode_separation);
    syn.read("mode_stddev", spec.mode_stddev);
    syn.read("layer_count", spec.layer_count);
    syn.read("layer_dim", spec.layer_dim);
    syn.read("samples_per_mode", spec.samples_per_mode);
    syn.finish();
    p.synthetic = spec;
  }
  if (s.has("archive")) p.archive = resolve(base, s.required<std::string>("archive")).string();
  Section part = s.child("partition");
  std::string scheme = "dirichlet";
  part.read("scheme", scheme);
  if (scheme == "dirichlet") {
    p.partition.scheme = PartitionScheme::kDirichlet;
  } else if (scheme == "meta") {
    p.partition.scheme = PartitionScheme::kMeta;
  } else {
    config_error("unknown partition scheme '" + scheme + "'");
  }
  part.read("n_clients", p.partition.n_clients);
  part.read("alpha", p.partition.alpha);
  part.finish();
  s.read_list("holdout_labels", p.holdout_labels);
  s.read("heldout_fraction", p.heldout_fraction);
}

void parse_data(Section s, DataConfig& d, const std::filesystem::path& base) {
  const auto kind = s.required<std::string>("kind");
  if (kind == "modes") {
    d.kind = DataKind::kModes;
    parse_modes(s, d.modes);
  } else if (kind == "duplicates") {
    d.kind = DataKind::kDuplicates;
    parse_duplicates(s, d.duplicates);
  } else if (kind == "pool") {
    d.kind = DataKind::kPool;
    parse_pool(s, d.pool, base);
  } else if (kind == "archives") {
    d.kind = DataKind::kArchives;
    std::vector<std::string> paths;
    s.read_list("clients", paths);
    for (const auto& p : paths) d.client_archives.push_back(resolve(base, p));
    d.heldout_archive = resolve(base, s.required<std::string>("heldout"));
  } else {
    config_error("unknown data kind '" + kind + "'");
  }
  s.finish();
}

void parse_reducer(Section s, ReducerConfig& r) {
  std::string method = "tsne";
  s.read("method", method);
  if (method == "tsne") {
    r.method = ReducerMethod::kTsne;
  } else if (method == "pca") {
    r.method = ReducerMethod::kPca;
  } else if (method == "kpca") {
    r.method = ReducerMethod::kKpca;
  } else {
    config_error("unknown reducer method '" + method + "'");
  }
  s.read("output_dim", r.output_dim);
  Section t = s.child("tsne");
  t.read("perplexity", r.tsne.perplexity);
  t.read("theta", r.tsne.theta);
  t.read("iterations", r.tsne.iterations);
  t.read("early_exaggeration", r.tsne.early_exaggeration);
  t.read("exaggeration_iterations", r.tsne.exaggeration_iterations);
  t.read("learning_rate", r.tsne.learning_rate);
  t.read("initial_momentum", r.tsne.initial_momentum);
  t.read("final_momentum", r.tsne.final_momentum);
  t.read("momentum_switch_iteration", r.tsne.momentum_switch_iteration);
  t.read("exact_threshold", r.tsne.exact_threshold);
  t.finish();
  Section k = s.child("kpca");
  k.read("gamma", r.kpca.gamma);
  k.finish();
  s.finish();
}

const char* schedule_name(SelectionSchedule s) {
  return s == SelectionSchedule::kOnce ? "once" : "every_round";
}

const char* reducer_name(ReducerMethod m) {
  switch (m) {
    case ReducerMethod::kTsne: return "tsne";
    case ReducerMethod::kPca: return "pca";
    case ReducerMethod::kKpca: return "kpca";
  }
  return "tsne";
}

const char* data_kind_name(DataKind k) {
  switch (k) {
    case DataKind::kModes: return "modes";
    case DataKind::kDuplicates: return "duplicates";
    case DataKind::kPool: return "pool";
    case DataKind::kArchives: return "archives";
  }
  return "modes";
}

template <class T>
ordered_json optional_json(const std::optional<T>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

ordered_json hdbscan_json(const HdbscanConfig& c) {
  return {{"min_cluster_size", c.min_cluster_size}, {"min_samples", optional_json(c.min_samples)}};
}

}  // namespace

RunConfig RunConfig::parse(const std::string& text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    config_error(std::string("config is not valid JSON: ") + e.what());
  }
  Section root(doc, "");
  const auto version = root.required<int>("schema_version");
  if (version != kSchemaVersion) {
    config_error("unsupported schema_version " + std::to_string(version));
  }

  RunConfig c;
  root.read("seed", c.seed);
  if (root.has("output_dir")) c.output_dir = resolve(base_dir, root.required<std::string>("output_dir"));
  root.read("rounds", c.simulation.rounds);
  root.read("trace", c.trace);
  parse_data(root.child("data"), c.data, base_dir);

  Section fed = root.child("federation");
  fed.read("active_ratio", c.simulation.active_ratio);
  fed.finish();

  Section sel = root.child("selector");
  std::string kind = "fedhds";
  sel.read("kind", kind);
  c.simulation.selector.kind = parse_selector_kind(kind);
  sel.read("ratio", c.simulation.selector.ratio);
  std::string schedule = "every_round";
  sel.read("schedule", schedule);
  if (schedule == "every_round") {
    c.simulation.schedule = SelectionSchedule::kEveryRound;
  } else if (schedule == "once") {
    c.simulation.schedule = SelectionSchedule::kOnce;
  } else {
    config_error("unknown selection schedule '" + schedule + "'");
  }
  sel.finish();

  parse_reducer(root.child("reducer"), c.simulation.selector.reducer);

  Section clus = root.child("clustering");
  parse_hdbscan(clus.child("intra"), c.simulation.selector.intra);
  parse_hdbscan(clus.child("inter"), c.simulation.selector.inter);
  clus.finish();

  Section priv = root.child("privacy");
  auto& dp = c.simulation.selector.privacy;
  priv.read("enabled", dp.enabled);
  priv.read("epsilon", dp.epsilon);
  priv.read("delta", dp.delta);
  priv.read("sigma", dp.sigma);
  priv.finish();

  Section train = root.child("training");
  std::string optimizer = "adam";
  train.read("optimizer", optimizer);
  if (optimizer == "adam") {
    c.simulation.training.optimizer = Optimizer::kAdam;
  } else if (optimizer == "sgd") {
    c.simulation.training.optimizer = Optimizer::kSgd;
  } else {
    config_error("unknown optimizer '" + optimizer + "'");
  }
  train.read("learning_rate", c.simulation.training.learning_rate);
  train.read("epochs_per_round", c.simulation.training.epochs);
  train.finish();

  Section lora = root.child("lora");
  lora.read("rank", c.lora.rank);
  lora.read("alpha", c.lora.alpha);
  lora.read("dropout", c.lora.dropout);
  lora.finish();

  Section rep = root.child("report");
  if (rep.has("history")) c.report.history = resolve(base_dir, rep.required<std::string>("history"));
  rep.read_list("clients", c.report.clients);
  rep.finish();

  root.finish();
  c.simulation.seed = c.seed;
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.parent_path());
}

void RunConfig::validate() const {
  simulation.validate();
  switch (data.kind) {
    case DataKind::kModes: data.modes.validate(); break;
    case DataKind::kDuplicates: data.duplicates.validate(); break;
    case DataKind::kPool:
      if (data.pool.synthetic.has_value() == data.pool.archive.has_value()) {
        config_error("data.pool needs exactly one of 'synthetic' or 'archive'");
      }
      if (data.pool.synthetic) data.pool.synthetic->validate();
      if (data.pool.archive && !std::filesystem::exists(*data.pool.archive)) {
        fail(ErrorKind::kIo, "missing archive " + *data.pool.archive);
      }
      data.pool.partition.validate();
      break;
    case DataKind::kArchives:
      if (data.client_archives.empty()) config_error("data.clients must list at least one archive");
      for (const auto& p : data.client_archives) {
        if (!std::filesystem::exists(p)) fail(ErrorKind::kIo, "missing archive " + p.string());
      }
      if (!std::filesystem::exists(data.heldout_archive)) {
        fail(ErrorKind::kIo, "missing archive " + data.heldout_archive.string());
      }
      break;
  }
  if (lora.rank < 1 || !(lora.alpha > 0.0) || !(lora.dropout >= 0.0 && lora.dropout < 1.0)) {
    config_error("lora settings out of range");
  }
}

std::string RunConfig::dump() const {
  const auto& s = simulation.selector;
  ordered_json data_json = {{"kind", data_kind_name(data.kind)}};
  switch (data.kind) {
    case DataKind::kModes: {
      const auto& m = data.modes;
      data_json.update(ordered_json{{"clients", m.clients},
                                    {"samples_per_client", m.samples_per_client},
                                    {"total_modes", m.total_modes},
                                    {"modes_per_client", m.modes_per_client},
                                    {"mode_separation", m.mode_separation},
                                    {"mode_stddev", m.mode_stddev},
                                    {"layer_count", m.layer_count},
                                    {"layer_dim", m.layer_dim},
                                    {"heldout_per_mode", m.heldout_per_mode}});
      break;
    }
    case DataKind::kDuplicates: {
      const auto& d = data.duplicates;
      data_json.update(ordered_json{{"clients", d.clients},
                                    {"distinct_per_client", d.distinct_per_client},
                                    {"replicas", d.replicas},
                                    {"jitter", d.jitter},
                                    {"modes", d.modes},
                                    {"mode_separation", d.mode_separation},
                                    {"mode_stddev", d.mode_stddev},
                                    {"layer_count", d.layer_count},
                                    {"layer_dim", d.layer_dim},
                                    {"heldout_per_mode", d.heldout_per_mode}});
      break;
    }
    case DataKind::kPool: {
      const auto& p = data.pool;
      if (p.synthetic) {
        const auto& sp = *p.synthetic;
        data_json["synthetic"] = {{"n_modes", sp.n_modes},
                                  {"mode_separation", sp.mode_separation},
                                  {"mode_stddev", sp.mode_stddev},
                                  {"layer_count", sp.layer_count},
                                  {"layer_dim", sp.layer_dim},
                                  {"samples_per_mode", sp.samples_per_mode}};
      }
      if (p.archive) data_json["archive"] = *p.archive;
      data_json["partition"] = {
          {"scheme", p.partition.scheme == PartitionScheme::kMeta ? "meta" : "dirichlet"},
          {"n_clients", p.partition.n_clients},
          {"alpha", p.partition.alpha}};
      data_json["holdout_labels"] = p.holdout_labels;
      data_json["heldout_fraction"] = p.heldout_fraction;
      break;
    }
    case DataKind::kArchives: {
      std::vector<std::string> paths;
      for (const auto& p : data.client_archives) paths.push_back(p.string());
      data_json["clients"] = paths;
      data_json["heldout"] = data.heldout_archive.string();
      break;
    }
  }

  ordered_json doc = {
      {"schema_version", kSchemaVersion},
      {"seed", seed},
      {"output_dir", output_dir.string()},
      {"rounds", simulation.rounds},
      {"data", data_json},
      {"federation", {{"active_ratio", simulation.active_ratio}}},
      {"selector",
       {{"kind", std::string(to_string(s.kind))},
        {"ratio", s.ratio},
        {"schedule", schedule_name(simulation.schedule)}}},
      {"reducer",
       {{"method", reducer_name(s.reducer.method)},
        {"output_dim", s.reducer.output_dim},
        {"tsne",
         {{"perplexity", s.reducer.tsne.perplexity},
          {"theta", s.reducer.tsne.theta},
          {"iterations", s.reducer.tsne.iterations},
          {"early_exaggeration", s.reducer.tsne.early_exaggeration},
          {"exaggeration_iterations", s.reducer.tsne.exaggeration_iterations},
          {"learning_rate", s.reducer.tsne.learning_rate},
          {"initial_momentum", s.reducer.tsne.initial_momentum},
          {"final_momentum", s.reducer.tsne.final_momentum},
          {"momentum_switch_iteration", s.reducer.tsne.momentum_switch_iteration},
          {"exact_threshold", s.reducer.tsne.exact_threshold}}},
        {"kpca", {{"gamma", optional_json(s.reducer.kpca.gamma)}}}}},
      {"clustering", {{"intra", hdbscan_json(s.intra)}, {"inter", hdbscan_json(s.inter)}}},
      {"privacy",
       {{"enabled", s.privacy.enabled},
        {"epsilon", s.privacy.epsilon},
        {"delta", s.privacy.delta},
        {"sigma", optional_json(s.privacy.sigma)}}},
      {"training",
       {{"optimizer", simulation.training.optimizer == Optimizer::kSgd ? "sgd" : "adam"},
        {"learning_rate", simulation.training.learning_rate},
        {"epochs_per_round", simulation.training.epochs}}},
      {"lora", {{"rank", lora.rank}, {"alpha", lora.alpha}, {"dropout", lora.dropout}}},
      {"trace", trace},
      {"report",
       {{"history", report.history ? ordered_json(report.history->string()) : ordered_json(nullptr)},
        {"clients", report.clients}}},
  };
  return doc.dump(2);
}

FederatedDataset build_dataset(const RunConfig& config, PoolSplit* split_out) {
  switch (config.data.kind) {
    case DataKind::kModes: return build_modes(config.data.modes, config.seed);
    case DataKind::kDuplicates: return build_duplicates(config.data.duplicates, config.seed);
    case DataKind::kPool: return build_pool(config.data.pool, config.seed, split_out);
    case DataKind::kArchives: {
      std::vector<FeatureArchive> clients;
      for (const auto& p : config.data.client_archives) clients.push_back(read_archive(p));
      return from_archives(clients, read_archive(config.data.heldout_archive));
    }
  }
  fail(ErrorKind::kConfiguration, "unknown data kind");
}

}  // namespace fedcore
