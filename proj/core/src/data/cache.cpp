#include <cstring>
#include <fstream>

#include "dnas/data.hpp"
#include "dnas/errors.hpp"

// Layout (host byte order, little-endian on supported targets):
//   magic[8] | u32 version | u32 num_dense | u32 num_sparse | u32 reserved |
//   u64 num_records | u64 cardinality[num_sparse] |
//   records: u64 record_id | f64 label | f64 dense[num_dense] | i64 sparse[num_sparse]

namespace dnas::data {

namespace {

template <typename T>
void put(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::filesystem::path& path) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw IoError("truncated dataset cache '" + path.string() + "'");
  }
  return value;
}

}  // namespace

void save_cache(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(kCacheMagic, sizeof kCacheMagic);
  put<std::uint32_t>(out, kCacheVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(data.num_dense()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(data.num_sparse()));
  put<std::uint32_t>(out, 0);
  put<std::uint64_t>(out, data.size());
  for (std::size_t c : data.cardinalities()) put<std::uint64_t>(out, c);
  for (std::size_t i = 0; i < data.size(); ++i) {
    put<std::uint64_t>(out, data.record_id(i));
    put<double>(out, data.label(i));
    for (std::size_t f = 0; f < data.num_dense(); ++f) put<double>(out, data.dense(i, f));
    for (std::size_t f = 0; f < data.num_sparse(); ++f) put<std::int64_t>(out, data.sparse(i, f));
  }
  if (!out) throw IoError("write failure on '" + path.string() + "'");
}

Dataset load_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  char magic[sizeof kCacheMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kCacheMagic, sizeof magic) != 0) {
    throw IoError("'" + path.string() + "' is not a dataset cache");
  }
  const auto version = get<std::uint32_t>(in, path);
  if (version != kCacheVersion) {
    throw IoError("unsupported dataset cache version " + std::to_string(version));
  }
  const auto num_dense = get<std::uint32_t>(in, path);
  const auto num_sparse = get<std::uint32_t>(in, path);
  get<std::uint32_t>(in, path);
  const auto num_records = get<std::uint64_t>(in, path);
  std::vector<std::size_t> cards(num_sparse);
  for (auto& c : cards) c = get<std::uint64_t>(in, path);
  Dataset data(num_dense, cards);
  std::vector<double> dense(num_dense);
  std::vector<std::int64_t> sparse(num_sparse);
  for (std::uint64_t i = 0; i < num_records; ++i) {
    const auto id = get<std::uint64_t>(in, path);
    const auto label = get<double>(in, path);
    for (auto& d : dense) d = get<double>(in, path);
    for (auto& s : sparse) s = get<std::int64_t>(in, path);
    data.append(label, dense, sparse, id);
  }
  return data;
}

}  // namespace dnas::data
