#include "anomale/pipeline.hpp"

#include "anomale/array_store.hpp"
#include "anomale/flow_graph.hpp"
#include "anomale/log.hpp"
#include "anomale/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <cerrno>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <initializer_list>
#include <sstream>

namespace anomale {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(PipelineMode m) { return m == PipelineMode::benchmark ? "benchmark" : "deploy"; }

PipelineMode parse_pipeline_mode(std::string_view s) {
  if (s == "benchmark") return PipelineMode::benchmark;
  if (s == "deploy") return PipelineMode::deploy;
  throw std::invalid_argument("unknown mode '" + std::string(s) + "' (expected benchmark|deploy)");
}

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::preprocess: return "preprocess";
    case Stage::train: return "train";
    case Stage::embed: return "embed";
    case Stage::detect: return "detect";
    case Stage::evaluate: return "evaluate";
  }
  return "?";
}

namespace {

std::string join_problems(const std::vector<std::string>& problems) {
  std::string out = "invalid config:";
  for (const auto& p : problems) out += "\n  - " + p;
  return out;
}

template <typename F>
void collect(std::vector<std::string>& out, F&& check) {
  try {
    check();
  } catch (const std::exception& e) {
    out.emplace_back(e.what());
  }
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error(join_problems(problems)), problems_(std::move(problems)) {}

MissingArtifact::MissingArtifact(std::string stage, fs::path path)
    : std::runtime_error(stage + ": missing artifact " + path.string()), stage_(std::move(stage)),
      path_(std::move(path)) {}

std::vector<std::string> PipelineConfig::validation_errors() const {
  std::vector<std::string> out;
  if (dataset_path.empty()) out.emplace_back("dataset.path is empty");
  collect(out, [&] { builtin_schema(schema_id); });
  collect(out, [&] { split.validate(); });
  // input_dim is filled from the data later; check the rest with a stand-in.
  collect(out, [&] {
    EncoderConfig e = encoder;
    if (e.input_dim <= 0) e.input_dim = 1;
    e.validate();
  });
  collect(out, [&] { train.validate(); });
  collect(out, [&] { grid.validate(); });
  if (output_dir.empty()) out.emplace_back("output_dir is empty");
  if (categorical_encoding == CategoricalEncoding::target && mode == PipelineMode::deploy) {
    out.emplace_back("preprocess.categorical_encoding=target needs labels, which deploy mode does not use");
  }
  return out;
}

namespace {

json contamination_to_json(const ContaminationMode& c) {
  if (c.kind == ContaminationMode::Kind::none) return "none";
  return c.fraction;
}

json split_json(const PipelineConfig& c) {
  return {{"downsample_fraction", c.split.downsample_fraction},
          {"train_fraction", c.split.train_fraction},
          {"contamination", contamination_to_json(c.split.contamination)}};
}

json grid_json(const GridSpec& g) {
  return {{"pca_components", g.pca_components},
          {"iforest_estimators", g.iforest_estimators},
          {"cblof_clusters", g.cblof_clusters},
          {"hbos_bins", g.hbos_bins},
          {"contamination", g.contamination}};
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, v);
  return buf;
}

}  // namespace

std::string pipeline_config_to_json(const PipelineConfig& c) {
  json j = {{"dataset", {{"path", c.dataset_path.generic_string()}, {"schema", c.schema_id}}},
            {"seed", c.seed},
            {"mode", to_string(c.mode)},
            {"output_dir", c.output_dir.generic_string()},
            {"split", split_json(c)},
            {"preprocess", {{"categorical_encoding", to_string(c.categorical_encoding)}}},
            {"encoder", {{"depth", c.encoder.depth}, {"hidden_dim", c.encoder.hidden_dim}}},
            {"train", {{"epochs", c.train.epochs}, {"lr", c.train.lr}, {"readout", to_string(c.train.readout)}}},
            {"grid", grid_json(c.grid)}};
  return j.dump(2) + "\n";
}

std::uint64_t stage_config_hash(const PipelineConfig& c, Stage stage) {
  // Sections accumulate stage by stage, so re-running a late stage with a new
  // grid does not invalidate the checkpoint.
  json j = {{"schema", c.schema_id},
            {"seed", c.seed},
            {"split", split_json(c)},
            {"categorical_encoding", to_string(c.categorical_encoding)}};
  if (stage >= Stage::train) {
    j["encoder"] = {{"depth", c.encoder.depth}, {"hidden_dim", c.encoder.hidden_dim}};
    j["train"] = {{"epochs", c.train.epochs}, {"lr", c.train.lr}, {"readout", to_string(c.train.readout)}};
  }
  if (stage >= Stage::detect) {
    j["grid"] = grid_json(c.grid);
    j["mode"] = to_string(c.mode);
  }
  return fnv1a(j.dump());
}

PipelineConfig parse_pipeline_config(std::string_view json_text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError({std::string("config is not valid JSON: ") + e.what()});
  }
  if (!j.is_object()) throw ConfigError({"config must be a JSON object"});

  PipelineConfig c;
  std::vector<std::string> problems;
  auto section = [&](const char* name) -> const json* {
    if (!j.contains(name)) return nullptr;
    if (!j[name].is_object()) {
      problems.push_back(std::string(name) + " must be an object");
      return nullptr;
    }
    return &j[name];
  };
  auto only_keys = [&](const json* obj, const char* name, std::initializer_list<const char*> keys) {
    for (const auto& [key, _] : obj->items()) {
      if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; })) {
        problems.push_back("unknown key '" + std::string(name) + "." + key + "'");
      }
    }
  };
  auto read = [&](const json* obj, const char* section_name, const char* key, auto& target) {
    if (obj == nullptr || !obj->contains(key)) return;
    try {
      using T = std::remove_reference_t<decltype(target)>;
      target = obj->at(key).get<T>();
    } catch (const json::exception&) {
      problems.push_back(std::string(section_name) + "." + key + " has the wrong type");
    }
  };

  if (const json* d = section("dataset")) {
    only_keys(d, "dataset", {"path", "schema"});
    std::string path;
    read(d, "dataset", "path", path);
    if (!path.empty()) {
      fs::path p(path);
      c.dataset_path = (p.is_relative() && !base_dir.empty()) ? base_dir / p : p;
    }
    read(d, "dataset", "schema", c.schema_id);
  } else {
    problems.emplace_back("dataset section is missing");
  }

  if (!j.contains("seed")) {
    problems.emplace_back("seed is missing");
  } else if (!j["seed"].is_number_unsigned()) {
    problems.emplace_back("seed must be a non-negative integer");
  } else {
    c.seed = j["seed"].get<std::uint64_t>();
  }

  if (j.contains("mode")) {
    collect(problems, [&] { c.mode = parse_pipeline_mode(j.at("mode").get<std::string>()); });
  }
  if (j.contains("output_dir")) {
    collect(problems, [&] { c.output_dir = j.at("output_dir").get<std::string>(); });
  }

  if (const json* s = section("split")) {
    only_keys(s, "split", {"downsample_fraction", "train_fraction", "contamination"});
    read(s, "split", "downsample_fraction", c.split.downsample_fraction);
    read(s, "split", "train_fraction", c.split.train_fraction);
    if (s->contains("contamination")) {
      const auto& v = s->at("contamination");
      if (v.is_string() && v.get<std::string>() == "none") {
        c.split.contamination = ContaminationMode::none();
      } else if (v.is_number()) {
        c.split.contamination = ContaminationMode::of(v.get<double>());
      } else {
        problems.emplace_back("split.contamination must be \"none\" or a number");
      }
    }
  }
  if (const json* p = section("preprocess")) {
    only_keys(p, "preprocess", {"categorical_encoding"});
    std::string enc;
    read(p, "preprocess", "categorical_encoding", enc);
    if (!enc.empty()) collect(problems, [&] { c.categorical_encoding = parse_categorical_encoding(enc); });
  }
  if (const json* e = section("encoder")) {
    only_keys(e, "encoder", {"depth", "hidden_dim"});
    read(e, "encoder", "depth", c.encoder.depth);
    read(e, "encoder", "hidden_dim", c.encoder.hidden_dim);
  }
  if (const json* t = section("train")) {
    only_keys(t, "train", {"epochs", "lr", "readout"});
    read(t, "train", "epochs", c.train.epochs);
    read(t, "train", "lr", c.train.lr);
    std::string readout;
    read(t, "train", "readout", readout);
    if (!readout.empty()) collect(problems, [&] { c.train.readout = parse_readout_source(readout); });
  }
  if (const json* g = section("grid")) {
    only_keys(g, "grid", {"pca_components", "iforest_estimators", "cblof_clusters", "hbos_bins", "contamination"});
    read(g, "grid", "pca_components", c.grid.pca_components);
    read(g, "grid", "iforest_estimators", c.grid.iforest_estimators);
    read(g, "grid", "cblof_clusters", c.grid.cblof_clusters);
    read(g, "grid", "hbos_bins", c.grid.hbos_bins);
    read(g, "grid", "contamination", c.grid.contamination);
  }

  static const std::vector<std::string> known = {"dataset", "seed",    "mode",  "output_dir", "split",
                                                 "preprocess", "encoder", "train", "grid"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) problems.push_back("unknown key '" + key + "'");
  }

  c.split.rng_seed = c.seed;
  c.train.seed = c.seed;
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return c;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError({"cannot read config file " + path.string()});
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_pipeline_config(ss.str(), path.parent_path());
}

RunLock::RunLock(const fs::path& dir) : path_(dir / kFileName) {
  fs::create_directories(dir);
  std::FILE* f = std::fopen(path_.c_str(), "wx");
  if (f == nullptr) {
    if (errno == EEXIST) {
      throw LockHeld("another run holds " + path_.string() + " (remove it if that run is gone)");
    }
    throw std::runtime_error("cannot create lock " + path_.string() + ": " + std::strerror(errno));
  }
  std::fclose(f);
}

RunLock::~RunLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

namespace {

struct Lineage {
  Stage stage;
  std::uint64_t hash;
  std::uint64_t seed;
};

Lineage lineage_of(const PipelineConfig& c, Stage s) { return {s, stage_config_hash(c, s), c.seed}; }

json lineage_json(const Lineage& l) {
  return {{"stage", to_string(l.stage)}, {"config_hash", hex64(l.hash)}, {"seed", l.seed}};
}

std::string lineage_comment(const Lineage& l) {
  return "# stage=" + std::string(to_string(l.stage)) + " config_hash=" + hex64(l.hash) +
         " seed=" + std::to_string(l.seed) + "\n";
}

void check_lineage(const json& artifact_lineage, const Lineage& expected, const fs::path& path) {
  const auto hash = artifact_lineage.value("config_hash", std::string());
  const auto seed = artifact_lineage.value("seed", std::uint64_t{0});
  if (hash != hex64(expected.hash) || seed != expected.seed) {
    throw LineageMismatch(path.string() + " was written with config_hash=" + hash + " seed=" + std::to_string(seed) +
                          ", current " + std::string(to_string(expected.stage)) + " lineage is config_hash=" +
                          hex64(expected.hash) + " seed=" + std::to_string(expected.seed) +
                          "; rerun from the " + std::string(to_string(expected.stage)) + " stage");
  }
}

fs::path require(Stage consumer, const fs::path& path) {
  if (!fs::exists(path)) throw MissingArtifact(std::string(to_string(consumer)), path);
  return path;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void save_store(const fs::path& path, const ArrayStore& store) {
  fs::create_directories(path.parent_path());
  save_array_store(path, store);
}

ArrayStore load_checked_store(Stage consumer, const fs::path& path, const Lineage& expected) {
  auto store = load_array_store(require(consumer, path));
  check_lineage(json::parse(store.metadata).at("lineage"), expected, path);
  return store;
}

void validate_or_throw(const PipelineConfig& c) {
  auto problems = c.validation_errors();
  if (!problems.empty()) throw ConfigError(std::move(problems));
}

// ---- split artifacts

struct SplitArtifact {
  Matrix features;
  std::vector<std::pair<std::string, std::string>> endpoints;
  std::vector<std::optional<FlowLabel>> labels;

  bool labelled() const {
    return !labels.empty() && std::all_of(labels.begin(), labels.end(), [](const auto& l) { return l.has_value(); });
  }
  std::vector<FlowLabel> label_vector() const {
    std::vector<FlowLabel> out;
    out.reserve(labels.size());
    for (const auto& l : labels) out.push_back(*l);
    return out;
  }
};

ArrayStore split_store(const FlowTable& table, const Matrix& features, const FeatureEncoder& enc, const Lineage& l) {
  json endpoints = json::array();
  json attack_types = json::array();
  Matrix labels(static_cast<Eigen::Index>(table.size()), 1);
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& r = table.records[i];
    endpoints.push_back({r.src_ip, r.dst_ip});
    attack_types.push_back(r.attack_type ? json(*r.attack_type) : json(nullptr));
    labels(static_cast<Eigen::Index>(i), 0) = !r.label ? -1.0 : (*r.label == FlowLabel::attack ? 1.0 : 0.0);
  }
  json meta = {{"lineage", lineage_json(l)},
               {"feature_names", enc.feature_names},
               {"endpoints", std::move(endpoints)},
               {"attack_types", std::move(attack_types)}};
  ArrayStore s;
  s.metadata = meta.dump();
  s.arrays.push_back({"features", features});
  s.arrays.push_back({"labels", labels});
  return s;
}

SplitArtifact load_split(Stage consumer, const fs::path& path, const Lineage& expected) {
  const auto store = load_checked_store(consumer, path, expected);
  const auto meta = json::parse(store.metadata);
  SplitArtifact a;
  a.features = store.get("features");
  a.endpoints = meta.at("endpoints").get<std::vector<std::pair<std::string, std::string>>>();
  const Matrix& labels = store.get("labels");
  for (Eigen::Index i = 0; i < labels.rows(); ++i) {
    const double v = labels(i, 0);
    a.labels.push_back(v < 0 ? std::nullopt : std::optional<FlowLabel>(v > 0.5 ? FlowLabel::attack : FlowLabel::benign));
  }
  if (a.endpoints.size() != static_cast<std::size_t>(a.features.rows()) || a.labels.size() != a.endpoints.size()) {
    throw std::runtime_error(path.string() + ": features, endpoints and labels disagree in length");
  }
  return a;
}

FlowGraph graph_of(const SplitArtifact& a) {
  std::optional<std::vector<FlowLabel>> labels;
  if (a.labelled()) labels = a.label_vector();
  return build_graph_from_keys(a.endpoints, a.features, std::move(labels));
}

void write_graph_dumps(const fs::path& dir, const std::string& prefix, const FlowGraph& g, const Lineage& l) {
  std::ostringstream nodes, edges;
  nodes << lineage_comment(l);
  write_node_table(nodes, g);
  edges << lineage_comment(l);
  write_edge_table(edges, g);
  write_text(dir / (prefix + "_nodes.csv"), nodes.str());
  write_text(dir / (prefix + "_edges.csv"), edges.str());
}

// ---- checkpoint

struct Checkpoint {
  EncoderConfig encoder_config;
  EncoderParams encoder;
  DiscriminatorParams discriminator;
};

Checkpoint load_checkpoint(Stage consumer, const fs::path& path, const Lineage& expected) {
  const auto store = load_checked_store(consumer, path, expected);
  const auto meta = json::parse(store.metadata);
  Checkpoint ck;
  ck.encoder_config.depth = meta.at("encoder").at("depth").get<int>();
  ck.encoder_config.hidden_dim = meta.at("encoder").at("hidden_dim").get<int>();
  ck.encoder_config.input_dim = meta.at("encoder").at("input_dim").get<int>();
  ck.encoder_config.validate();
  for (int k = 1; k <= ck.encoder_config.depth; ++k) {
    const Matrix& w = store.get("encoder.W" + std::to_string(k));
    if (w.rows() != ck.encoder_config.layer_input_dim(k) || w.cols() != ck.encoder_config.hidden_dim) {
      throw ShapeError(path.string() + ": encoder.W" + std::to_string(k) + " is " + detail::shape_str(w.rows(), w.cols()) +
                       ", config implies [" + std::to_string(ck.encoder_config.layer_input_dim(k)) + " x " +
                       std::to_string(ck.encoder_config.hidden_dim) + "]");
    }
    ck.encoder.weights.push_back(w);
  }
  ck.discriminator.w = store.get("discriminator.w");
  return ck;
}

// ---- detector artifacts

const InputKind kInputs[] = {InputKind::raw, InputKind::embeddings};

fs::path detector_path(const fs::path& root, InputKind input, DetectorKind kind) {
  return root / artifacts::kDetectDir / (std::string(to_string(input)) + "_" + std::string(to_string(kind)) + ".json");
}

std::uint64_t detector_seed(std::uint64_t seed) { return mix_seed(seed, 0xDE7EC7); }

// ---- stages without locking

fs::path in_root(const PipelineConfig& c, const StageIo& io) { return io.input.value_or(c.output_dir); }
fs::path out_root(const PipelineConfig& c, const StageIo& io) { return io.output.value_or(c.output_dir); }

void preprocess_impl(const PipelineConfig& c, const fs::path& dataset, const fs::path& out) {
  const Lineage l = lineage_of(c, Stage::preprocess);
  require(Stage::preprocess, dataset);
  const FlowTable all = load_csv(dataset, c.schema_id);
  log::info("preprocess: loaded ", all.size(), " flows from ", dataset.string());
  const FlowTable sampled = downsample(all, c.split);
  const TrainTestSplit parts = split(sampled, c.split);
  const FlowTable train = drop_ports(parts.train);
  const FlowTable test = drop_ports(parts.test);

  const FeatureEncoder enc = fit_encoder(train, c.categorical_encoding);
  const Normalizer norm;
  const Matrix train_x = transform(train, enc, norm);
  const Matrix test_x = transform(test, enc, norm);

  json enc_artifact = {{"lineage", lineage_json(l)}, {"preprocessor", json::parse(serialize_preprocessor(enc, norm))}};
  write_text(out / artifacts::kEncoder, enc_artifact.dump(2) + "\n");
  save_store(out / artifacts::kTrainSplit, split_store(train, train_x, enc, l));
  save_store(out / artifacts::kTestSplit, split_store(test, test_x, enc, l));
  write_graph_dumps(out / "preprocess", "train_graph", build_graph(train, train_x), l);
  write_graph_dumps(out / "preprocess", "test_graph", build_graph(test, test_x), l);
  log::info("preprocess: ", train.size(), " train / ", test.size(), " test flows, ", train_x.cols(), " features");
}

void train_impl(const PipelineConfig& c, const fs::path& in, const fs::path& out) {
  const Lineage upstream = lineage_of(c, Stage::preprocess);
  const Lineage l = lineage_of(c, Stage::train);
  const SplitArtifact split_train = load_split(Stage::train, in / artifacts::kTrainSplit, upstream);
  const FlowGraph g = graph_of(split_train);

  EncoderConfig ec = c.encoder;
  ec.input_dim = static_cast<int>(split_train.features.cols());
  const TrainResult r = train(g, ec, c.train);

  json meta = {{"lineage", lineage_json(l)},
               {"encoder", {{"depth", ec.depth}, {"hidden_dim", ec.hidden_dim}, {"input_dim", ec.input_dim}}},
               {"train",
                {{"epochs", c.train.epochs}, {"lr", c.train.lr}, {"readout", to_string(c.train.readout)},
                 {"seed", c.train.seed}}},
               {"optimizer_steps", r.optimizer_steps}};
  ArrayStore store;
  store.metadata = meta.dump();
  for (std::size_t k = 0; k < r.encoder.weights.size(); ++k) {
    store.arrays.push_back({"encoder.W" + std::to_string(k + 1), r.encoder.weights[k]});
  }
  store.arrays.push_back({"discriminator.w", r.discriminator.w});
  save_store(out / artifacts::kCheckpoint, store);

  std::ostringstream trace;
  trace << lineage_comment(l) << "epoch,loss\n";
  char buf[64];
  for (std::size_t e = 0; e < r.loss_trace.size(); ++e) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", e + 1, r.loss_trace[e]);
    trace << buf;
  }
  write_text(out / artifacts::kLossTrace, trace.str());
  if (!r.loss_trace.empty()) {
    log::info("train: loss ", r.loss_trace.front(), " -> ", r.loss_trace.back(), " over ", r.loss_trace.size(),
              " epochs");
  }
}

Matrix flow_embeddings(const SplitArtifact& a, const Checkpoint& ck) {
  const FlowGraph g = graph_of(a);
  if (static_cast<int>(g.feature_dim()) != ck.encoder_config.input_dim) {
    throw ShapeError("embed: split has " + std::to_string(g.feature_dim()) + " features, checkpoint expects " +
                     std::to_string(ck.encoder_config.input_dim));
  }
  const Matrix z = encode_nodes(g, ck.encoder, ck.encoder_config);
  const Matrix edges = encode_edges(g, z);
  // One row per flow: the src -> dst direction.
  Matrix out(static_cast<Eigen::Index>(g.num_flows()), edges.cols());
  for (const auto& e : g.edges()) {
    if (e.feature_row % 2 == 0) out.row(e.flow_id) = edges.row(e.feature_row);
  }
  return out;
}

void embed_impl(const PipelineConfig& c, const fs::path& in, const fs::path& out) {
  const Lineage pre = lineage_of(c, Stage::preprocess);
  const Lineage l = lineage_of(c, Stage::embed);
  const Checkpoint ck = load_checkpoint(Stage::embed, in / artifacts::kCheckpoint, lineage_of(c, Stage::train));
  for (const auto& [src, dst] : {std::pair{artifacts::kTrainSplit, artifacts::kTrainEmbeddings},
                                 std::pair{artifacts::kTestSplit, artifacts::kTestEmbeddings}}) {
    const SplitArtifact a = load_split(Stage::embed, in / src, pre);
    ArrayStore s;
    s.metadata = json{{"lineage", lineage_json(l)}, {"rows", "one per flow, forward direction"}}.dump();
    s.arrays.push_back({"embeddings", flow_embeddings(a, ck)});
    save_store(out / dst, s);
  }
}

struct DetectInputs {
  Matrix train;
  Matrix test;
};

DetectInputs load_inputs(Stage consumer, const PipelineConfig& c, const fs::path& in, InputKind kind,
                         SplitArtifact* test_split_out = nullptr) {
  const Lineage pre = lineage_of(c, Stage::preprocess);
  DetectInputs d;
  SplitArtifact test_split = load_split(consumer, in / artifacts::kTestSplit, pre);
  if (kind == InputKind::raw) {
    d.train = load_split(consumer, in / artifacts::kTrainSplit, pre).features;
    d.test = test_split.features;
  } else {
    const Lineage emb = lineage_of(c, Stage::embed);
    d.train = load_checked_store(consumer, in / artifacts::kTrainEmbeddings, emb).get("embeddings");
    d.test = load_checked_store(consumer, in / artifacts::kTestEmbeddings, emb).get("embeddings");
  }
  if (test_split_out != nullptr) *test_split_out = std::move(test_split);
  return d;
}

void detect_impl(const PipelineConfig& c, const fs::path& in, const fs::path& out) {
  const Lineage l = lineage_of(c, Stage::detect);
  const std::uint64_t seed = detector_seed(c.seed);
  for (InputKind input : kInputs) {
    SplitArtifact test_split;
    const DetectInputs d = load_inputs(Stage::detect, c, in, input, &test_split);
    if (input == InputKind::embeddings && d.train.rows() > 0 &&
        (d.train.rowwise() - d.train.row(0)).isZero(0.0)) {
      throw std::runtime_error("detect: every training embedding is identical (collapsed encoder); "
                               "retrain with a smaller train.lr");
    }
    std::ostringstream grid_csv;
    grid_csv << lineage_comment(l)
             << "detector,input,parameter,contamination,accuracy,macro_f1,detection_rate,train_flagged,"
                "validation_flagged\n";
    for (DetectorKind kind : kAllDetectors) {
      json selected;
      DetectorModel model;
      if (c.mode == PipelineMode::benchmark) {
        if (!test_split.labelled()) {
          throw std::runtime_error("detect: benchmark mode needs a fully labelled test split");
        }
        const auto labels = test_split.label_vector();
        GridResult r = grid_search(kind, c.grid, d.train, d.test, labels, seed);
        write_grid_report_csv(grid_csv, r.cells, to_string(input));
        model = std::move(r.best);
        selected = {{"parameter", r.best_cell.parameter},
                    {"contamination", r.best_cell.contamination},
                    {"validation_macro_f1", r.best_cell.metrics.macro_f1}};
      } else {
        const int p = c.grid.parameters(kind).front();
        const double cont = c.grid.contamination.front();
        model = fit_detector(kind, d.train, p, cont, seed);
        selected = {{"parameter", p}, {"contamination", cont}};
      }
      json artifact = {{"lineage", lineage_json(l)},
                       {"input", to_string(input)},
                       {"selected", selected},
                       {"model", json::parse(serialize_detector(model))}};
      write_text(detector_path(out, input, kind), artifact.dump() + "\n");
      log::info("detect: ", to_string(kind), " on ", to_string(input), " -> ", selected.dump());
    }
    if (c.mode == PipelineMode::benchmark) {
      write_text(out / artifacts::kDetectDir / ("grid_" + std::string(to_string(input)) + ".csv"), grid_csv.str());
    }
  }
}

EvalReport evaluate_impl(const PipelineConfig& c, const fs::path& in, const fs::path& out) {
  const Lineage l = lineage_of(c, Stage::evaluate);
  const Lineage det = lineage_of(c, Stage::detect);

  // Load everything first so a lineage problem stops the stage before any write.
  struct Column {
    std::string name;
    InputKind input;
    DetectorKind kind;
    std::vector<bool> flags;
  };
  std::vector<Column> columns;
  SplitArtifact test_split;
  for (InputKind input : kInputs) {
    const DetectInputs d = load_inputs(Stage::evaluate, c, in, input, &test_split);
    for (DetectorKind kind : kAllDetectors) {
      const fs::path path = require(Stage::evaluate, detector_path(in, input, kind));
      const json artifact = json::parse(read_text(path));
      check_lineage(artifact.at("lineage"), det, path);
      const DetectorModel model = deserialize_detector(artifact.at("model").dump());
      const Prediction p = predict(model, d.test);
      columns.push_back({std::string(to_string(input)) + "_" + std::string(to_string(kind)), input, kind, p.anomaly});
    }
  }

  std::ostringstream pred;
  pred << lineage_comment(l) << "flow";
  for (const auto& col : columns) pred << ',' << col.name;
  pred << '\n';
  for (std::size_t i = 0; i < test_split.endpoints.size(); ++i) {
    pred << i;
    for (const auto& col : columns) pred << ',' << (col.flags[i] ? 1 : 0);
    pred << '\n';
  }
  write_text(out / artifacts::kPredictionsCsv, pred.str());

  EvalReport report;
  if (!test_split.labelled()) {
    if (c.mode == PipelineMode::benchmark) throw std::runtime_error("evaluate: benchmark mode needs test labels");
    log::warn("evaluate: test split is unlabelled, wrote predictions only");
    return report;
  }
  const auto labels = test_split.label_vector();
  EvalReport raw, emb;
  for (const auto& col : columns) {
    ReportRow row{std::string(to_string(col.kind)), col.input, metrics(col.flags, labels)};
    report.rows.push_back(row);
    (col.input == InputKind::raw ? raw : emb).rows.push_back(row);
  }
  const auto cmp = compare(raw, emb);

  std::ostringstream csv, txt, jsonl, cmp_csv;
  csv << lineage_comment(l);
  write_report_csv(csv, report);
  txt << lineage_comment(l);
  write_comparison_table(txt, cmp, "contamination mode: " +
                                       (c.split.contamination.kind == ContaminationMode::Kind::none
                                            ? std::string("none")
                                            : std::to_string(c.split.contamination.fraction)));
  jsonl << json{{"lineage", lineage_json(l)}}.dump() << '\n';
  write_report_jsonl(jsonl, report);
  cmp_csv << lineage_comment(l);
  write_comparison_csv(cmp_csv, cmp);
  write_text(out / artifacts::kReportCsv, csv.str());
  write_text(out / artifacts::kReportTxt, txt.str());
  write_text(out / artifacts::kReportJsonl, jsonl.str());
  write_text(out / artifacts::kComparisonCsv, cmp_csv.str());
  return report;
}

}  // namespace

void run_preprocess(const PipelineConfig& config, const StageIo& io) {
  validate_or_throw(config);
  const fs::path out = out_root(config, io);
  RunLock lock(out);
  preprocess_impl(config, io.input.value_or(config.dataset_path), out);
}

void run_train(const PipelineConfig& config, const StageIo& io) {
  validate_or_throw(config);
  const fs::path out = out_root(config, io);
  RunLock lock(out);
  train_impl(config, in_root(config, io), out);
}

void run_embed(const PipelineConfig& config, const StageIo& io) {
  validate_or_throw(config);
  const fs::path out = out_root(config, io);
  RunLock lock(out);
  embed_impl(config, in_root(config, io), out);
}

void run_detect(const PipelineConfig& config, const StageIo& io) {
  validate_or_throw(config);
  const fs::path out = out_root(config, io);
  RunLock lock(out);
  detect_impl(config, in_root(config, io), out);
}

EvalReport run_evaluate(const PipelineConfig& config, const StageIo& io) {
  validate_or_throw(config);
  const fs::path out = out_root(config, io);
  RunLock lock(out);
  return evaluate_impl(config, in_root(config, io), out);
}

EvalReport run_all(const PipelineConfig& config, const StageIo& io) {
  validate_or_throw(config);
  const fs::path out = out_root(config, io);
  RunLock lock(out);
  preprocess_impl(config, io.input.value_or(config.dataset_path), out);
  train_impl(config, out, out);
  embed_impl(config, out, out);
  detect_impl(config, out, out);
  return evaluate_impl(config, out, out);
}

}  // namespace anomale
