#pragma once

// Scratch directories and artifact-tree comparison for pipeline runs.

#include "anomale/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>

#ifndef ANOMALE_FIXTURE_DIR
#error "ANOMALE_FIXTURE_DIR must point at tests/fixtures"
#endif

namespace anomale::testkit {

inline std::filesystem::path fixture_dir() { return ANOMALE_FIXTURE_DIR; }

/// Removed with its contents on destruction.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("anomale-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline PipelineConfig fixture_config(const std::filesystem::path& out) {
  PipelineConfig c = load_pipeline_config(fixture_dir() / "pipeline.json");
  c.output_dir = out;
  return c;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Relative path -> bytes for every regular file under root.
inline std::map<std::string, std::string> tree_contents(const std::filesystem::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[std::filesystem::relative(e.path(), root).generic_string()] = slurp(e.path());
  }
  return out;
}

}  // namespace anomale::testkit
