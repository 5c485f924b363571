#include "anomale/array_store.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace anomale {

static_assert(std::endian::native == std::endian::little, "array store assumes a little-endian host");

namespace {
constexpr char kMagic[8] = {'A', 'N', 'O', 'M', 'A', 'L', 'E', '\0'};

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get_pod(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw std::runtime_error("array store: truncated input");
  }
  return v;
}

std::string get_bytes(std::istream& is, std::size_t n) {
  std::string s(n, '\0');
  if (n > 0 && !is.read(s.data(), static_cast<std::streamsize>(n))) {
    throw std::runtime_error("array store: truncated input");
  }
  return s;
}
}  // namespace

const Matrix& ArrayStore::get(const std::string& name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return a.value;
  }
  throw std::out_of_range("array store: no array named '" + name + "'");
}

bool ArrayStore::contains(const std::string& name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return true;
  }
  return false;
}

void write_array_store(std::ostream& os, const ArrayStore& store) {
  os.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(os, ArrayStore::kVersion);
  put<std::uint64_t>(os, store.metadata.size());
  os.write(store.metadata.data(), static_cast<std::streamsize>(store.metadata.size()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(store.arrays.size()));
  for (const auto& a : store.arrays) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(a.name.size()));
    os.write(a.name.data(), static_cast<std::streamsize>(a.name.size()));
    put<std::uint64_t>(os, static_cast<std::uint64_t>(a.value.rows()));
    put<std::uint64_t>(os, static_cast<std::uint64_t>(a.value.cols()));
    os.write(reinterpret_cast<const char*>(a.value.data()),
             static_cast<std::streamsize>(a.value.size() * sizeof(double)));
  }
  if (!os) throw std::runtime_error("array store: write failed");
}

ArrayStore read_array_store(std::istream& is) {
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("array store: bad magic");
  }
  const auto version = get_pod<std::uint32_t>(is);
  if (version != ArrayStore::kVersion) {
    throw std::runtime_error("array store: unsupported version " + std::to_string(version));
  }
  ArrayStore store;
  store.metadata = get_bytes(is, get_pod<std::uint64_t>(is));
  const auto count = get_pod<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedMatrix a;
    a.name = get_bytes(is, get_pod<std::uint32_t>(is));
    const auto rows = get_pod<std::uint64_t>(is);
    const auto cols = get_pod<std::uint64_t>(is);
    a.value.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    if (a.value.size() > 0 &&
        !is.read(reinterpret_cast<char*>(a.value.data()),
                 static_cast<std::streamsize>(a.value.size() * sizeof(double)))) {
      throw std::runtime_error("array store: truncated data for '" + a.name + "'");
    }
    store.arrays.push_back(std::move(a));
  }
  return store;
}

void save_array_store(const std::filesystem::path& path, const ArrayStore& store) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  write_array_store(os, store);
}

ArrayStore load_array_store(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return read_array_store(is);
}

}  // namespace anomale
