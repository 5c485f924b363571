#pragma once

#include "anomale/adam.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace anomale {

/// Versioned binary container of named float64 arrays plus a JSON metadata
/// string. Layout (little endian):
///   "ANOMALE\0" | u32 version | u64 meta_len | meta bytes | u32 count |
///   per array: u32 name_len | name | u64 rows | u64 cols | rows*cols f64 (row-major)
struct ArrayStore {
  static constexpr std::uint32_t kVersion = 1;

  std::string metadata;
  std::vector<NamedMatrix> arrays;

  const Matrix& get(const std::string& name) const;
  bool contains(const std::string& name) const;
};

void write_array_store(std::ostream& os, const ArrayStore& store);
ArrayStore read_array_store(std::istream& is);
void save_array_store(const std::filesystem::path& path, const ArrayStore& store);
ArrayStore load_array_store(const std::filesystem::path& path);

}  // namespace anomale
