#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dnas/data.hpp"
#include "dnas/errors.hpp"

namespace dnas::data {

void RawDataset::push_back(const Record& record) {
  if (record.dense.size() != num_dense_ || record.sparse.size() != num_sparse_) {
    throw DimensionError("record has " + std::to_string(record.dense.size()) + " dense / " +
                         std::to_string(record.sparse.size()) + " sparse fields, dataset expects " +
                         std::to_string(num_dense_) + " / " + std::to_string(num_sparse_));
  }
  labels_.push_back(static_cast<std::uint8_t>(record.label));
  for (const auto& d : record.dense) {
    dense_present_.push_back(d.has_value() ? 1 : 0);
    dense_.push_back(d.value_or(0.0));
  }
  sparse_.insert(sparse_.end(), record.sparse.begin(), record.sparse.end());
  positions_.push_back(record.position);
}

Record RawDataset::record(std::size_t i) const {
  Record r;
  r.label = labels_.at(i);
  r.position = positions_[i];
  for (std::size_t f = 0; f < num_dense_; ++f) {
    if (dense_present(i, f)) {
      r.dense.emplace_back(dense(i, f));
    } else {
      r.dense.emplace_back(std::nullopt);
    }
  }
  r.sparse.assign(sparse_.begin() + static_cast<std::ptrdiff_t>(i * num_sparse_),
                  sparse_.begin() + static_cast<std::ptrdiff_t>((i + 1) * num_sparse_));
  return r;
}

std::uint64_t stable_hash(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

double parse_number(std::string_view field, std::size_t line) {
  double value = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || !std::isfinite(value)) {
    throw ParseError("malformed dense value '" + std::string(field) + "'", line);
  }
  return value;
}

void parse_line(std::string_view line, std::size_t line_no, const CriteoFormat& format,
                RawDataset& out) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  const std::size_t expected = 1 + format.num_dense + format.num_sparse;
  std::vector<std::string_view> fields;
  fields.reserve(expected);
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  if (fields.size() != expected) {
    throw ParseError("expected " + std::to_string(expected) + " tab-separated fields, got " +
                     std::to_string(fields.size()),
                     line_no);
  }
  Record r;
  if (fields[0] == "0") {
    r.label = 0;
  } else if (fields[0] == "1") {
    r.label = 1;
  } else {
    throw ParseError("label must be 0 or 1, got '" + std::string(fields[0]) + "'", line_no);
  }
  r.dense.reserve(format.num_dense);
  for (std::size_t f = 0; f < format.num_dense; ++f) {
    std::string_view field = fields[1 + f];
    if (field.empty()) {
      r.dense.emplace_back(std::nullopt);
    } else {
      r.dense.emplace_back(parse_number(field, line_no));
    }
  }
  r.sparse.reserve(format.num_sparse);
  for (std::size_t f = 0; f < format.num_sparse; ++f) {
    std::string_view field = fields[1 + format.num_dense + f];
    // missing categoricals share id 0
    r.sparse.push_back(field.empty() ? 0 : stable_hash(field));
  }
  r.position = out.size();
  out.push_back(r);
}

}  // namespace

RawDataset parse_criteo(std::string_view text, CriteoFormat format) {
  RawDataset out(format.num_dense, format.num_sparse);
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    const std::size_t nl = text.find('\n', start);
    const std::size_t end = nl == std::string_view::npos ? text.size() : nl;
    ++line_no;
    parse_line(text.substr(start, end - start), line_no, format, out);
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return out;
}

RawDataset ingest_criteo(const std::filesystem::path& path, CriteoFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  RawDataset out(format.num_dense, format.num_sparse);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    parse_line(line, line_no, format, out);
  }
  if (in.bad()) throw IoError("read failure on '" + path.string() + "'");
  return out;
}

}  // namespace dnas::data
