#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "dnas/data.hpp"
#include "dnas/errors.hpp"
#include "json.hpp"

namespace dnas::data {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

const char* role_name(FeatureRole role) { return role == FeatureRole::kSignal ? "signal" : "noise"; }

// Base logit b with mean_i sigmoid(b + offsets_i) == target.
double calibrate_base(const std::vector<double>& offsets, double target) {
  double lo = -20.0, hi = 20.0;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    double rate = 0.0;
    for (double o : offsets) rate += sigmoid(mid + o);
    rate /= static_cast<double>(offsets.size());
    (rate < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double binary_entropy(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -(p * std::log(p) + (1.0 - p) * std::log(1.0 - p));
}

SynthResult synthesize(const SynthSpec& spec) {
  if (spec.num_records == 0) throw ConfigError("synthetic dataset needs at least one record");
  std::vector<std::size_t> cards;
  for (const auto& f : spec.sparse) {
    if (f.cardinality == 0) throw ConfigError("synthetic sparse feature with zero cardinality");
    cards.push_back(f.cardinality);
  }
  Rng effect_rng(mix_seed(spec.seed, 1));
  std::vector<std::vector<double>> effects(spec.sparse.size());
  for (std::size_t f = 0; f < spec.sparse.size(); ++f) {
    if (spec.sparse[f].role != FeatureRole::kSignal) continue;
    effects[f].resize(spec.sparse[f].cardinality);
    for (double& e : effects[f]) e = spec.sparse[f].effect_scale * effect_rng.normal();
  }

  Rng rng(mix_seed(spec.seed, 2));
  auto data = std::make_shared<Dataset>(spec.dense.size(), cards);
  std::vector<double> dense(spec.dense.size());
  std::vector<std::int64_t> sparse(spec.sparse.size());
  const double half_normal_mean = std::sqrt(2.0 / M_PI);
  double positives = 0.0, entropy_sum = 0.0;
  for (std::size_t i = 0; i < spec.num_records; ++i) {
    double logit = spec.base_logit;
    for (std::size_t f = 0; f < spec.dense.size(); ++f) {
      const double x = rng.normal();
      dense[f] = x;
      const auto& plan = spec.dense[f];
      if (plan.role == FeatureRole::kSignal) {
        logit += plan.weight * (plan.nonlinear ? std::abs(x) - half_normal_mean : x);
      }
    }
    for (std::size_t f = 0; f < spec.sparse.size(); ++f) {
      sparse[f] = static_cast<std::int64_t>(rng.below(spec.sparse[f].cardinality));
      if (spec.sparse[f].role == FeatureRole::kSignal) logit += effects[f][static_cast<std::size_t>(sparse[f])];
    }
    const double p = sigmoid(logit);
    const double label = rng.bernoulli(p) ? 1.0 : 0.0;
    positives += label;
    entropy_sum += binary_entropy(p);
    data->append(label, dense, sparse, i);
  }

  SynthResult out;
  out.positive_rate = positives / static_cast<double>(spec.num_records);
  out.bayes_logloss = entropy_sum / static_cast<double>(spec.num_records);
  out.base_rate_logloss = binary_entropy(out.positive_rate);

  nlohmann::json meta;
  meta["format"] = "dnas-synthetic";
  meta["version"] = 1;
  meta["num_records"] = spec.num_records;
  meta["seed"] = spec.seed;
  meta["base_logit"] = spec.base_logit;
  meta["positive_rate"] = out.positive_rate;
  meta["bayes_logloss"] = out.bayes_logloss;
  meta["base_rate_logloss"] = out.base_rate_logloss;
  for (const auto& f : spec.dense) {
    meta["dense"].push_back({{"role", role_name(f.role)}, {"weight", f.weight}, {"nonlinear", f.nonlinear}});
  }
  for (const auto& f : spec.sparse) {
    meta["sparse"].push_back(
        {{"role", role_name(f.role)}, {"cardinality", f.cardinality}, {"effect_scale", f.effect_scale}});
  }
  out.metadata_json = meta.dump(2);
  out.data = std::move(data);
  return out;
}

void write_synthetic_criteo(const std::filesystem::path& path, const CriteoSynthSpec& spec) {
  // Mixed cardinalities: a few tiny, most moderate, several larger than a
  // small hash size so hashing collisions matter.
  static constexpr std::size_t kCards[kCriteoSparse] = {
      3,   12,  40,   150,  600,  2000, 25, 300,  5000, 80,  8,   1200, 60,
      450, 900, 3000, 18,   700,  100,  5,  2500, 35,   250, 4000, 15,  500};
  // every other categorical carries signal
  Rng effect_rng(mix_seed(spec.seed, 11));
  std::vector<std::vector<double>> effects(kCriteoSparse);
  for (std::size_t f = 0; f < kCriteoSparse; ++f) {
    if (f % 2 != 0) continue;
    effects[f].resize(kCards[f]);
    for (double& e : effects[f]) e = 0.6 * effect_rng.normal();
  }
  std::vector<double> dense_weights(kCriteoDense, 0.0);
  for (std::size_t f = 0; f < 5; ++f) dense_weights[f] = (f % 2 == 0 ? 0.35 : -0.35);

  Rng rng(mix_seed(spec.seed, 12));
  struct Row {
    std::vector<long long> dense;  // -1 marks missing
    std::vector<std::size_t> cats;
    double offset;
  };
  std::vector<Row> rows(spec.num_records);
  std::vector<double> offsets(spec.num_records);
  for (std::size_t i = 0; i < spec.num_records; ++i) {
    Row& r = rows[i];
    r.offset = 0.0;
    r.dense.resize(kCriteoDense);
    for (std::size_t f = 0; f < kCriteoDense; ++f) {
      const double z = rng.normal();
      r.dense[f] = rng.bernoulli(0.1) ? -1 : static_cast<long long>(std::floor(std::exp(1.0 + 1.2 * z)));
      if (r.dense[f] >= 0) r.offset += dense_weights[f] * z;
    }
    r.cats.resize(kCriteoSparse);
    for (std::size_t f = 0; f < kCriteoSparse; ++f) {
      // skewed popularity: squaring a uniform favors low ids
      const double u = rng.uniform();
      r.cats[f] = std::min(kCards[f] - 1, static_cast<std::size_t>(u * u * static_cast<double>(kCards[f])));
      if (!effects[f].empty()) r.offset += effects[f][r.cats[f]];
    }
    offsets[i] = r.offset;
  }
  const double base = calibrate_base(offsets, spec.target_positive_rate);

  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  char hex[16];
  for (const Row& r : rows) {
    const int label = rng.bernoulli(sigmoid(base + r.offset)) ? 1 : 0;
    out << label;
    for (long long d : r.dense) {
      out << '\t';
      if (d >= 0) out << d;
    }
    for (std::size_t f = 0; f < kCriteoSparse; ++f) {
      out << '\t';
      if (f % 7 == 6 && r.cats[f] == 0) continue;  // sprinkle missing categoricals
      const auto code = static_cast<unsigned>(stable_hash(std::to_string(f) + ":" + std::to_string(r.cats[f])));
      std::snprintf(hex, sizeof hex, "%08x", code);
      out << hex;
    }
    out << '\n';
  }
  if (!out) throw IoError("write failure on '" + path.string() + "'");
}

}  // namespace dnas::data
