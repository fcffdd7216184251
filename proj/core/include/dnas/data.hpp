#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dnas/random.hpp"

namespace dnas::data {

inline constexpr std::size_t kCriteoDense = 13;
inline constexpr std::size_t kCriteoSparse = 26;

/// One parsed click record; dense values are absent when the field was empty.
struct Record {
  int label = 0;
  std::vector<std::optional<double>> dense;
  std::vector<std::uint64_t> sparse;
  std::uint64_t position = 0;
};

/// Parsed but untransformed records, one flat array per field kind.
class RawDataset {
 public:
  RawDataset(std::size_t num_dense, std::size_t num_sparse)
      : num_dense_(num_dense), num_sparse_(num_sparse) {}

  std::size_t size() const { return labels_.size(); }
  std::size_t num_dense() const { return num_dense_; }
  std::size_t num_sparse() const { return num_sparse_; }

  void push_back(const Record& record);
  Record record(std::size_t i) const;

  int label(std::size_t i) const { return labels_[i]; }
  bool dense_present(std::size_t i, std::size_t f) const { return dense_present_[i * num_dense_ + f] != 0; }
  double dense(std::size_t i, std::size_t f) const { return dense_[i * num_dense_ + f]; }
  std::uint64_t sparse(std::size_t i, std::size_t f) const { return sparse_[i * num_sparse_ + f]; }
  std::uint64_t position(std::size_t i) const { return positions_[i]; }

 private:
  std::size_t num_dense_;
  std::size_t num_sparse_;
  std::vector<std::uint8_t> labels_;
  std::vector<double> dense_;
  std::vector<std::uint8_t> dense_present_;
  std::vector<std::uint64_t> sparse_;
  std::vector<std::uint64_t> positions_;
};

/// Stable 64-bit FNV-1a hash used for categorical strings.
std::uint64_t stable_hash(std::string_view text);

struct CriteoFormat {
  std::size_t num_dense = kCriteoDense;
  std::size_t num_sparse = kCriteoSparse;
};

/// Parses tab-separated "label, dense..., categorical..." lines in file order.
RawDataset ingest_criteo(const std::filesystem::path& path, CriteoFormat format = {});
RawDataset parse_criteo(std::string_view text, CriteoFormat format = {});

/// Model-ready records: transformed dense values, sparse ids below their cardinality.
class Dataset {
 public:
  Dataset(std::size_t num_dense, std::vector<std::size_t> cardinalities);

  std::size_t size() const { return labels_.size(); }
  std::size_t num_dense() const { return num_dense_; }
  std::size_t num_sparse() const { return cardinalities_.size(); }
  const std::vector<std::size_t>& cardinalities() const { return cardinalities_; }

  double label(std::size_t row) const { return labels_[row]; }
  double dense(std::size_t row, std::size_t feature) const { return dense_[row * num_dense_ + feature]; }
  std::int64_t sparse(std::size_t row, std::size_t feature) const {
    return sparse_[row * cardinalities_.size() + feature];
  }
  std::uint64_t record_id(std::size_t row) const { return record_ids_[row]; }

  void append(double label, std::span<const double> dense, std::span<const std::int64_t> sparse,
              std::uint64_t record_id);

  const std::vector<double>& labels() const { return labels_; }

  bool operator==(const Dataset&) const = default;

 private:
  std::size_t num_dense_;
  std::vector<std::size_t> cardinalities_;
  std::vector<double> labels_;
  std::vector<double> dense_;
  std::vector<std::int64_t> sparse_;
  std::vector<std::uint64_t> record_ids_;
};

/// Missing dense -> -1; present x -> ln(1 + max(x, 0)); sparse id -> id mod hash size.
/// A single hash size applies to every sparse feature.
Dataset preprocess(const RawDataset& raw, const std::vector<std::size_t>& hash_sizes);

/// Rows of a shared dataset.
struct DatasetView {
  std::shared_ptr<const Dataset> data;
  std::vector<std::size_t> rows;

  std::size_t size() const { return rows.size(); }
  static DatasetView all(std::shared_ptr<const Dataset> data);
  std::vector<std::uint64_t> record_ids() const;
};

struct SplitSpec {
  double train_fraction = 6.0 / 7.0;
  double val_fraction_of_rest = 0.5;
  double w_fraction = 0.8;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ChronoSplit {
  DatasetView train;
  DatasetView val;
  DatasetView test;
};

/// Leading train_fraction of rows (file order) train; the tail is shuffled and halved.
ChronoSplit chronological_split(std::shared_ptr<const Dataset> data, const SplitSpec& spec);

struct WeightArchSplit {
  DatasetView weights;  // X_w
  DatasetView arch;     // X_theta
};

WeightArchSplit wm_split(const DatasetView& train, double w_fraction, std::uint64_t seed);

/// Dense matrices for one minibatch. Sparse ids are stored per feature.
struct Batch {
  std::size_t size = 0;
  std::size_t num_dense = 0;
  std::vector<double> dense;                      // size x num_dense
  std::vector<std::vector<std::int64_t>> sparse;  // num_sparse x size
  std::vector<double> labels;
  std::vector<std::uint64_t> record_ids;
};

Batch gather(const Dataset& data, std::span<const std::size_t> rows);

/// Endless minibatch stream over a view, reshuffled (seeded) at every pass.
class DataLoader {
 public:
  DataLoader(DatasetView view, std::size_t batch_size, std::uint64_t seed, bool shuffle = true);

  std::size_t batches_per_epoch() const;
  std::size_t batch_size() const { return batch_size_; }
  const DatasetView& view() const { return view_; }

  Batch next();

  /// Batches for a full ordered pass, for evaluation.
  std::vector<Batch> ordered_batches() const;

 private:
  void start_pass();

  DatasetView view_;
  std::size_t batch_size_;
  bool shuffle_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

// --- synthetic data -------------------------------------------------------

enum class FeatureRole { kSignal, kNoise };

struct SparseFeaturePlan {
  std::size_t cardinality = 1000;
  FeatureRole role = FeatureRole::kNoise;
  double effect_scale = 1.0;  // std-dev of per-category logit effects
};

struct DenseFeaturePlan {
  FeatureRole role = FeatureRole::kNoise;
  double weight = 1.0;
  bool nonlinear = false;  // contributes weight * (|x| - sqrt(2/pi)) instead of weight * x
};

struct SynthSpec {
  std::size_t num_records = 100000;
  std::vector<DenseFeaturePlan> dense;
  std::vector<SparseFeaturePlan> sparse;
  double base_logit = 0.0;
  std::uint64_t seed = 0;
};

struct SynthResult {
  std::shared_ptr<const Dataset> data;
  std::string metadata_json;  // ground truth: roles, effects summary, label rates
  double positive_rate = 0.0;
  double bayes_logloss = 0.0;      // mean entropy of the true click probabilities
  double base_rate_logloss = 0.0;  // entropy of the empirical positive rate
};

SynthResult synthesize(const SynthSpec& spec);

double binary_entropy(double p);

/// Criteo-shaped TSV with hex categoricals, missing fields, and a planted signal.
struct CriteoSynthSpec {
  std::size_t num_records = 100000;
  double target_positive_rate = 0.256;
  std::uint64_t seed = 0;
};

void write_synthetic_criteo(const std::filesystem::path& path, const CriteoSynthSpec& spec);

// --- binary cache ---------------------------------------------------------

inline constexpr char kCacheMagic[8] = {'D', 'N', 'A', 'S', 'D', 'S', 'E', 'T'};
inline constexpr std::uint32_t kCacheVersion = 1;

void save_cache(const Dataset& data, const std::filesystem::path& path);
Dataset load_cache(const std::filesystem::path& path);

}  // namespace dnas::data
