#include <algorithm>
#include <cmath>
#include <numeric>

#include "dnas/data.hpp"
#include "dnas/errors.hpp"

namespace dnas::data {

Dataset::Dataset(std::size_t num_dense, std::vector<std::size_t> cardinalities)
    : num_dense_(num_dense), cardinalities_(std::move(cardinalities)) {
  for (std::size_t c : cardinalities_) {
    if (c == 0) throw ConfigError("sparse feature cardinality must be at least 1");
  }
}

void Dataset::append(double label, std::span<const double> dense, std::span<const std::int64_t> sparse,
                     std::uint64_t record_id) {
  if (dense.size() != num_dense_ || sparse.size() != cardinalities_.size()) {
    throw DimensionError("record field counts do not match dataset layout");
  }
  for (std::size_t f = 0; f < sparse.size(); ++f) {
    if (sparse[f] < 0 || static_cast<std::size_t>(sparse[f]) >= cardinalities_[f]) {
      throw BoundsError(sparse[f], cardinalities_[f]);
    }
  }
  labels_.push_back(label);
  dense_.insert(dense_.end(), dense.begin(), dense.end());
  sparse_.insert(sparse_.end(), sparse.begin(), sparse.end());
  record_ids_.push_back(record_id);
}

Dataset preprocess(const RawDataset& raw, const std::vector<std::size_t>& hash_sizes) {
  std::vector<std::size_t> sizes = hash_sizes;
  if (sizes.size() == 1 && raw.num_sparse() != 1) sizes.assign(raw.num_sparse(), hash_sizes[0]);
  if (sizes.size() != raw.num_sparse()) {
    throw ConfigError("got " + std::to_string(hash_sizes.size()) + " hash sizes for " +
                      std::to_string(raw.num_sparse()) + " sparse features");
  }
  for (std::size_t h : sizes) {
    if (h == 0) throw ConfigError("hash size must be at least 1");
  }
  Dataset out(raw.num_dense(), sizes);
  std::vector<double> dense(raw.num_dense());
  std::vector<std::int64_t> sparse(raw.num_sparse());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    for (std::size_t f = 0; f < raw.num_dense(); ++f) {
      dense[f] = raw.dense_present(i, f) ? std::log1p(std::max(raw.dense(i, f), 0.0)) : -1.0;
    }
    for (std::size_t f = 0; f < raw.num_sparse(); ++f) {
      sparse[f] = static_cast<std::int64_t>(raw.sparse(i, f) % sizes[f]);
    }
    out.append(raw.label(i), dense, sparse, raw.position(i));
  }
  return out;
}

DatasetView DatasetView::all(std::shared_ptr<const Dataset> data) {
  DatasetView v{std::move(data), {}};
  v.rows.resize(v.data->size());
  std::iota(v.rows.begin(), v.rows.end(), std::size_t{0});
  return v;
}

std::vector<std::uint64_t> DatasetView::record_ids() const {
  std::vector<std::uint64_t> ids;
  ids.reserve(rows.size());
  for (std::size_t r : rows) ids.push_back(data->record_id(r));
  return ids;
}

void SplitSpec::validate() const {
  auto in_unit = [](double f) { return f > 0.0 && f < 1.0; };
  if (!in_unit(train_fraction)) throw ConfigError("train fraction must lie in (0, 1)");
  if (!in_unit(val_fraction_of_rest)) throw ConfigError("validation fraction must lie in (0, 1)");
  if (!in_unit(w_fraction)) throw ConfigError("weight-split fraction must lie in (0, 1)");
}

ChronoSplit chronological_split(std::shared_ptr<const Dataset> data, const SplitSpec& spec) {
  spec.validate();
  const std::size_t n = data->size();
  if (n < 7) throw SplitError("need at least 7 records to split, got " + std::to_string(n));
  // small epsilon so exact multiples (14 * 6/7) are not floored away
  const auto n_train = static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(n) + 1e-9));
  if (n_train == 0 || n_train >= n) throw SplitError("train split leaves an empty partition");
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  std::stable_sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
    return data->record_id(a) < data->record_id(b);
  });
  ChronoSplit out;
  out.train = {data, std::vector<std::size_t>(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_train))};
  std::vector<std::size_t> rest(rows.begin() + static_cast<std::ptrdiff_t>(n_train), rows.end());
  Rng rng(spec.seed);
  rng.shuffle(rest);
  const auto n_val = static_cast<std::size_t>(std::floor(spec.val_fraction_of_rest * static_cast<double>(rest.size())));
  out.val = {data, std::vector<std::size_t>(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(n_val))};
  out.test = {data, std::vector<std::size_t>(rest.begin() + static_cast<std::ptrdiff_t>(n_val), rest.end())};
  return out;
}

WeightArchSplit wm_split(const DatasetView& train, double w_fraction, std::uint64_t seed) {
  if (!(w_fraction > 0.0 && w_fraction < 1.0)) throw ConfigError("w_fraction must lie in (0, 1)");
  std::vector<std::size_t> rows = train.rows;
  Rng rng(mix_seed(seed, 0x77));
  rng.shuffle(rows);
  const auto n_w = static_cast<std::size_t>(std::llround(w_fraction * static_cast<double>(rows.size())));
  WeightArchSplit out;
  out.weights = {train.data, std::vector<std::size_t>(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_w))};
  out.arch = {train.data, std::vector<std::size_t>(rows.begin() + static_cast<std::ptrdiff_t>(n_w), rows.end())};
  return out;
}

Batch gather(const Dataset& data, std::span<const std::size_t> rows) {
  Batch b;
  b.size = rows.size();
  b.num_dense = data.num_dense();
  b.dense.resize(rows.size() * data.num_dense());
  b.sparse.assign(data.num_sparse(), std::vector<std::int64_t>(rows.size()));
  b.labels.resize(rows.size());
  b.record_ids.resize(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const std::size_t r = rows[k];
    for (std::size_t f = 0; f < data.num_dense(); ++f) b.dense[k * data.num_dense() + f] = data.dense(r, f);
    for (std::size_t f = 0; f < data.num_sparse(); ++f) b.sparse[f][k] = data.sparse(r, f);
    b.labels[k] = data.label(r);
    b.record_ids[k] = data.record_id(r);
  }
  return b;
}

DataLoader::DataLoader(DatasetView view, std::size_t batch_size, std::uint64_t seed, bool shuffle)
    : view_(std::move(view)), batch_size_(batch_size), shuffle_(shuffle), rng_(seed) {
  if (batch_size_ == 0) throw ConfigError("batch size must be positive");
  if (view_.size() == 0) throw ConfigError("data loader over an empty dataset");
  start_pass();
}

std::size_t DataLoader::batches_per_epoch() const { return (view_.size() + batch_size_ - 1) / batch_size_; }

void DataLoader::start_pass() {
  order_ = view_.rows;
  if (shuffle_) rng_.shuffle(order_);
  cursor_ = 0;
}

Batch DataLoader::next() {
  if (cursor_ >= order_.size()) start_pass();
  const std::size_t end = std::min(cursor_ + batch_size_, order_.size());
  Batch b = gather(*view_.data, std::span(order_).subspan(cursor_, end - cursor_));
  cursor_ = end;
  return b;
}

std::vector<Batch> DataLoader::ordered_batches() const {
  std::vector<Batch> out;
  for (std::size_t start = 0; start < view_.rows.size(); start += batch_size_) {
    const std::size_t end = std::min(start + batch_size_, view_.rows.size());
    out.push_back(gather(*view_.data, std::span(view_.rows).subspan(start, end - start)));
  }
  return out;
}

}  // namespace dnas::data
