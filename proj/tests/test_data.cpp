#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "dnas/data.hpp"
#include "dnas/errors.hpp"

namespace data = dnas::data;
namespace fs = std::filesystem;

namespace {

std::string criteo_line(const std::string& label, const std::vector<std::string>& dense,
                        const std::vector<std::string>& sparse) {
  std::string s = label;
  for (const auto& d : dense) s += "\t" + d;
  for (const auto& c : sparse) s += "\t" + c;
  return s;
}

std::shared_ptr<data::Dataset> counting_dataset(std::size_t n) {
  auto d = std::make_shared<data::Dataset>(1, std::vector<std::size_t>{5});
  for (std::size_t i = 0; i < n; ++i) {
    const double x = static_cast<double>(i);
    const std::int64_t id = static_cast<std::int64_t>(i % 5);
    d->append(static_cast<double>(i % 2), std::span<const double>(&x, 1), std::span<const std::int64_t>(&id, 1), i);
  }
  return d;
}

// Plug-in mutual information (nats) between a categorical feature and the label.
double mutual_information(const data::Dataset& d, std::size_t feature) {
  std::map<std::int64_t, std::array<double, 2>> joint;
  double pos = 0.0;
  for (std::size_t r = 0; r < d.size(); ++r) {
    const int y = d.label(r) > 0.5;
    joint[d.sparse(r, feature)][y] += 1.0;
    pos += y;
  }
  const double n = static_cast<double>(d.size());
  const double py[2] = {(n - pos) / n, pos / n};
  double mi = 0.0;
  for (const auto& [id, c] : joint) {
    const double px = (c[0] + c[1]) / n;
    for (int y = 0; y < 2; ++y) {
      if (c[y] == 0.0) continue;
      const double pxy = c[y] / n;
      mi += pxy * std::log(pxy / (px * py[y]));
    }
  }
  return mi;
}

}  // namespace

TEST(IngestCriteo, ParsesFixtureLine) {
  std::vector<std::string> dense(13, "");
  dense[0] = "5";
  dense[3] = "12";
  std::vector<std::string> sparse(26, "");
  sparse[0] = "68fd1e64";
  sparse[7] = "a1b2c3d4";
  const auto raw = data::parse_criteo(criteo_line("1", dense, sparse) + "\n");
  ASSERT_EQ(raw.size(), 1u);
  EXPECT_EQ(raw.label(0), 1);
  EXPECT_TRUE(raw.dense_present(0, 0));
  EXPECT_EQ(raw.dense(0, 0), 5.0);
  EXPECT_EQ(raw.dense(0, 3), 12.0);
  EXPECT_FALSE(raw.dense_present(0, 1));
  EXPECT_EQ(raw.sparse(0, 0), data::stable_hash("68fd1e64"));
  EXPECT_EQ(raw.sparse(0, 7), data::stable_hash("a1b2c3d4"));
  EXPECT_NE(raw.sparse(0, 0), raw.sparse(0, 7));
}

TEST(IngestCriteo, EmptyInputAndFileOrder) {
  EXPECT_EQ(data::parse_criteo("").size(), 0u);
  const fs::path p = fs::temp_directory_path() / "dnas_empty.tsv";
  { std::ofstream(p).flush(); }
  EXPECT_EQ(data::ingest_criteo(p).size(), 0u);

  data::CriteoFormat small{1, 1};
  const auto raw = data::parse_criteo("0\t1\ta\n1\t2\tb\r\n0\t3\tc", small);
  ASSERT_EQ(raw.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(raw.position(i), i);
    EXPECT_EQ(raw.dense(i, 0), static_cast<double>(i + 1));
  }
  fs::remove(p);
}

TEST(IngestCriteo, MalformedLinesReportLineNumbers) {
  data::CriteoFormat small{1, 1};
  for (const std::string bad : {"0\t1\ta\n1\t2\n", "0\t1\ta\n2\t2\tb\n", "0\t1\ta\n1\tx\tb\n"}) {
    try {
      data::parse_criteo(bad, small);
      FAIL() << bad;
    } catch (const dnas::ParseError& e) {
      EXPECT_EQ(e.line(), 2u) << bad;
    }
  }
  EXPECT_THROW(data::ingest_criteo("/nonexistent/criteo.tsv"), dnas::IoError);
}

TEST(StableHash, KnownFnv1aValues) {
  EXPECT_EQ(data::stable_hash(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(data::stable_hash("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Preprocess, DenseTransformAndHashing) {
  data::CriteoFormat f{4, 1};
  const auto raw = data::parse_criteo("1\t0\t1.718281828459045\t\t-3\t20001\n", f);
  auto raw2 = raw;
  const auto d = data::preprocess(raw, {20000});
  EXPECT_EQ(d.dense(0, 0), 0.0);
  EXPECT_NEAR(d.dense(0, 1), 1.0, 1e-12);
  EXPECT_EQ(d.dense(0, 2), -1.0);
  EXPECT_EQ(d.dense(0, 3), 0.0);  // negatives clamp to 0 before the log
  EXPECT_EQ(static_cast<std::uint64_t>(d.sparse(0, 0)), data::stable_hash("20001") % 20000);

  data::RawDataset r(1, 1);
  r.push_back({1, {std::nullopt}, {20001}, 0});
  EXPECT_EQ(data::preprocess(r, {20000}).sparse(0, 0), 1);
  EXPECT_THROW(data::preprocess(r, {0}), dnas::ConfigError);
}

TEST(Preprocess, OutputsFiniteAndBelowHashSizes) {
  data::CriteoSynthSpec spec;
  spec.num_records = 2000;
  spec.seed = 4;
  const fs::path p = fs::temp_directory_path() / "dnas_pre.tsv";
  data::write_synthetic_criteo(p, spec);
  const auto raw = data::ingest_criteo(p);
  ASSERT_EQ(raw.size(), 2000u);
  const auto d = data::preprocess(raw, {97});
  ASSERT_EQ(d.cardinalities(), std::vector<std::size_t>(26, 97));
  for (std::size_t r = 0; r < d.size(); ++r) {
    for (std::size_t f = 0; f < 13; ++f) ASSERT_TRUE(std::isfinite(d.dense(r, f)));
    for (std::size_t f = 0; f < 26; ++f) {
      ASSERT_GE(d.sparse(r, f), 0);
      ASSERT_LT(d.sparse(r, f), 97);
    }
  }
  fs::remove(p);
}

TEST(ChronologicalSplit, FourteenRecords) {
  const auto s = data::chronological_split(counting_dataset(14), {});
  EXPECT_EQ(s.train.size(), 12u);
  EXPECT_EQ(s.val.size(), 1u);
  EXPECT_EQ(s.test.size(), 1u);
}

TEST(ChronologicalSplit, FullDatasetArithmetic) {
  // 6/7 of ~46M records
  const double n = 45840617.0;
  EXPECT_NEAR(std::floor(6.0 / 7.0 * n) / 1e6, 39.29, 0.01);
}

TEST(ChronologicalSplit, TrainPrecedesHeldOutAndPartitionsAreExhaustive) {
  for (std::size_t n : {7u, 15u, 100u, 1001u}) {
    const auto s = data::chronological_split(counting_dataset(n), {});
    std::uint64_t max_train = 0;
    std::set<std::uint64_t> all;
    for (auto id : s.train.record_ids()) {
      max_train = std::max(max_train, id);
      all.insert(id);
    }
    for (const auto* v : {&s.val, &s.test}) {
      for (auto id : v->record_ids()) {
        EXPECT_GT(id, max_train);
        EXPECT_TRUE(all.insert(id).second);
      }
    }
    EXPECT_EQ(all.size(), n);
  }
  EXPECT_THROW(data::chronological_split(counting_dataset(6), {}), dnas::SplitError);
}

TEST(ChronologicalSplit, SeededHeldOutShuffle) {
  data::SplitSpec a;
  a.seed = 1;
  data::SplitSpec b;
  b.seed = 2;
  const auto d = counting_dataset(700);
  EXPECT_EQ(data::chronological_split(d, a).val.rows, data::chronological_split(d, a).val.rows);
  EXPECT_NE(data::chronological_split(d, a).val.rows, data::chronological_split(d, b).val.rows);
}

TEST(WmSplit, SizesDisjointnessAndDeterminism) {
  const auto view = data::DatasetView::all(counting_dataset(10));
  const auto s = data::wm_split(view, 0.8, 3);
  EXPECT_EQ(s.weights.size(), 8u);
  EXPECT_EQ(s.arch.size(), 2u);
  EXPECT_EQ(data::wm_split(view, 0.8, 3).weights.rows, s.weights.rows);
  for (std::size_t n : {7u, 33u, 500u}) {
    for (double frac : {0.1, 0.5, 0.8, 0.95}) {
      const auto v = data::DatasetView::all(counting_dataset(n));
      const auto w = data::wm_split(v, frac, n);
      EXPECT_EQ(w.weights.size() + w.arch.size(), n);
      std::set<std::size_t> rows(w.weights.rows.begin(), w.weights.rows.end());
      for (auto r : w.arch.rows) EXPECT_FALSE(rows.count(r));
    }
  }
  EXPECT_THROW(data::wm_split(view, 1.0, 0), dnas::ConfigError);
}

TEST(SplitPipeline, NoRecordInTwoPartitions) {
  data::SynthSpec spec;
  spec.num_records = 5000;
  spec.dense = {{data::FeatureRole::kNoise, 0, false}};
  spec.sparse = {{10, data::FeatureRole::kNoise, 0}};
  const auto synth = data::synthesize(spec);
  const auto c = data::chronological_split(synth.data, {});
  const auto wm = data::wm_split(c.train, 0.8, 9);
  std::set<std::uint64_t> seen;
  std::size_t total = 0;
  for (const auto* v : {&wm.weights, &wm.arch, &c.val, &c.test}) {
    for (auto id : v->record_ids()) EXPECT_TRUE(seen.insert(id).second);
    total += v->size();
  }
  EXPECT_EQ(total, 5000u);
}

TEST(DataLoader, EpochCoversEveryRowOnceAndReshuffles) {
  const auto view = data::DatasetView::all(counting_dataset(100));
  data::DataLoader loader(view, 32, 1);
  EXPECT_EQ(loader.batches_per_epoch(), 4u);
  std::multiset<std::uint64_t> first;
  std::vector<std::uint64_t> order1, order2;
  for (int b = 0; b < 4; ++b) {
    const auto batch = loader.next();
    first.insert(batch.record_ids.begin(), batch.record_ids.end());
    order1.insert(order1.end(), batch.record_ids.begin(), batch.record_ids.end());
  }
  EXPECT_EQ(first.size(), 100u);
  EXPECT_EQ(std::set<std::uint64_t>(first.begin(), first.end()).size(), 100u);
  for (int b = 0; b < 4; ++b) {
    const auto batch = loader.next();
    order2.insert(order2.end(), batch.record_ids.begin(), batch.record_ids.end());
  }
  EXPECT_NE(order1, order2);
  std::size_t ordered = 0;
  for (const auto& b : loader.ordered_batches()) ordered += b.size;
  EXPECT_EQ(ordered, 100u);
}

TEST(Synthesize, NoiseFeatureCarriesNoInformation) {
  data::SynthSpec spec;
  spec.num_records = 100000;
  spec.seed = 5;
  spec.sparse = {{1000, data::FeatureRole::kSignal, 1.0}, {1000, data::FeatureRole::kNoise, 0.0}};
  const auto s = data::synthesize(spec);
  const double mi_signal = mutual_information(*s.data, 0);
  const double mi_noise = mutual_information(*s.data, 1);
  // plug-in bias is about (K-1)/(2N) = 0.005 nats
  EXPECT_LT(mi_noise, 0.008);
  EXPECT_GT(mi_signal, 0.05);
}

TEST(Synthesize, FixedSeedIsIdentical) {
  data::SynthSpec spec;
  spec.num_records = 3000;
  spec.seed = 7;
  spec.dense = {{data::FeatureRole::kSignal, 1.0, true}};
  spec.sparse = {{50, data::FeatureRole::kSignal, 0.5}};
  const auto a = data::synthesize(spec), b = data::synthesize(spec);
  EXPECT_TRUE(*a.data == *b.data);
  EXPECT_EQ(a.metadata_json, b.metadata_json);
  spec.seed = 8;
  EXPECT_FALSE(*a.data == *data::synthesize(spec).data);
}

TEST(Synthesize, AllNoiseBestLoglossIsBaseRateEntropy) {
  data::SynthSpec spec;
  spec.num_records = 100000;
  spec.seed = 2;
  spec.base_logit = -1.0;
  spec.dense = {{data::FeatureRole::kNoise, 0.0, false}};
  spec.sparse = {{100, data::FeatureRole::kNoise, 0.0}};
  const auto s = data::synthesize(spec);
  const double p = 1.0 / (1.0 + std::exp(1.0));
  EXPECT_NEAR(s.bayes_logloss, data::binary_entropy(p), 1e-12);
  EXPECT_NEAR(s.base_rate_logloss, data::binary_entropy(s.positive_rate), 1e-12);
  EXPECT_NEAR(s.positive_rate, p, 0.005);
  EXPECT_NEAR(s.bayes_logloss, s.base_rate_logloss, 1e-3);
}

TEST(SyntheticCriteo, FormatAndPositiveRate) {
  data::CriteoSynthSpec spec;
  spec.num_records = 20000;
  spec.seed = 1;
  const fs::path p = fs::temp_directory_path() / "dnas_synth_criteo.tsv";
  data::write_synthetic_criteo(p, spec);
  const auto raw = data::ingest_criteo(p);
  ASSERT_EQ(raw.size(), 20000u);
  double pos = 0.0, missing = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    pos += raw.label(i);
    for (std::size_t f = 0; f < 13; ++f) missing += raw.dense_present(i, f) ? 0.0 : 1.0;
  }
  EXPECT_NEAR(pos / 20000.0, 0.256, 0.02);
  EXPECT_GT(missing, 0.0);
  fs::remove(p);
}

TEST(Cache, RoundTripAndHeaderChecks) {
  data::SynthSpec spec;
  spec.num_records = 500;
  spec.dense = {{data::FeatureRole::kSignal, 1.0, false}, {data::FeatureRole::kNoise, 0, false}};
  spec.sparse = {{17, data::FeatureRole::kSignal, 1.0}};
  const auto s = data::synthesize(spec);
  const fs::path p = fs::temp_directory_path() / "dnas_cache.bin";
  data::save_cache(*s.data, p);
  {
    std::ifstream in(p, std::ios::binary);
    char magic[8];
    in.read(magic, 8);
    EXPECT_EQ(std::string(magic, 8), std::string(data::kCacheMagic, 8));
  }
  EXPECT_TRUE(data::load_cache(p) == *s.data);
  {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << "NOTACACHE";
  }
  EXPECT_THROW(data::load_cache(p), dnas::IoError);
  fs::remove(p);
  EXPECT_THROW(data::load_cache(p), dnas::IoError);
}
