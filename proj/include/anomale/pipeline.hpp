#pragma once

#include "anomale/dgi.hpp"
#include "anomale/encoder.hpp"
#include "anomale/eval.hpp"
#include "anomale/flow_ingest.hpp"
#include "anomale/grid_search.hpp"
#include "anomale/preprocess.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace anomale {

enum class PipelineMode { benchmark, deploy };

std::string_view to_string(PipelineMode m);
PipelineMode parse_pipeline_mode(std::string_view s);

/// Declarative description of one run. One master seed drives every
/// stochastic step (split, initialisation, corruption, IF/CBLOF).
struct PipelineConfig {
  std::filesystem::path dataset_path;
  std::string schema_id = "NF-UNSW-NB15-v2";
  std::uint64_t seed = 0;
  PipelineMode mode = PipelineMode::benchmark;
  std::filesystem::path output_dir = "anomale-out";

  SplitSpec split;
  CategoricalEncoding categorical_encoding = CategoricalEncoding::frequency;
  EncoderConfig encoder;  // input_dim is taken from the data
  TrainConfig train;
  GridSpec grid;

  /// Every problem found, empty when the config is usable. Does not touch the
  /// filesystem.
  std::vector<std::string> validation_errors() const;
};

/// Thrown with every validation problem at once.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

/// A stage input that is not on disk.
class MissingArtifact : public std::runtime_error {
 public:
  MissingArtifact(std::string stage, std::filesystem::path path);
  const std::string& stage() const { return stage_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::string stage_;
  std::filesystem::path path_;
};

/// An artifact written under a different config or seed.
class LineageMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LockHeld : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Relative dataset paths resolve against the config file's directory.
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
PipelineConfig parse_pipeline_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
std::string pipeline_config_to_json(const PipelineConfig& config);

enum class Stage { preprocess, train, embed, detect, evaluate };
std::string_view to_string(Stage s);

/// FNV-1a over the canonical JSON of every config section the stage depends
/// on; the output directory never participates.
std::uint64_t stage_config_hash(const PipelineConfig& config, Stage stage);

/// Where a stage reads prior artifacts and writes its own. Both default to
/// the config's output directory.
struct StageIo {
  std::optional<std::filesystem::path> input;
  std::optional<std::filesystem::path> output;
};

namespace artifacts {
inline constexpr const char* kEncoder = "preprocess/encoder.json";
inline constexpr const char* kTrainSplit = "preprocess/train.bin";
inline constexpr const char* kTestSplit = "preprocess/test.bin";
inline constexpr const char* kCheckpoint = "train/checkpoint.bin";
inline constexpr const char* kLossTrace = "train/loss_trace.csv";
inline constexpr const char* kTrainEmbeddings = "embed/train_embeddings.bin";
inline constexpr const char* kTestEmbeddings = "embed/test_embeddings.bin";
inline constexpr const char* kDetectDir = "detect";
inline constexpr const char* kReportCsv = "evaluate/report.csv";
inline constexpr const char* kReportTxt = "evaluate/report.txt";
inline constexpr const char* kReportJsonl = "evaluate/report.jsonl";
inline constexpr const char* kComparisonCsv = "evaluate/comparison.csv";
inline constexpr const char* kPredictionsCsv = "evaluate/predictions.csv";
}  // namespace artifacts

/// For preprocess, StageIo::input overrides the dataset CSV.
void run_preprocess(const PipelineConfig& config, const StageIo& io = {});
void run_train(const PipelineConfig& config, const StageIo& io = {});
void run_embed(const PipelineConfig& config, const StageIo& io = {});
void run_detect(const PipelineConfig& config, const StageIo& io = {});
/// Returns the report (empty when the test split carries no labels).
EvalReport run_evaluate(const PipelineConfig& config, const StageIo& io = {});
/// All stages in order inside the output directory; input overrides the dataset.
EvalReport run_all(const PipelineConfig& config, const StageIo& io = {});

/// Exclusive per-directory run lock, released on destruction.
class RunLock {
 public:
  explicit RunLock(const std::filesystem::path& dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

  static constexpr const char* kFileName = ".anomale.lock";

 private:
  std::filesystem::path path_;
};

}  // namespace anomale
