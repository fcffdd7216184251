#include <algorithm>
#include <cmath>
#include <functional>

#include "dnas/autograd/ops.hpp"
#include "dnas/errors.hpp"
#include "dnas/search_spaces.hpp"

namespace dnas {

namespace {

void check_ids(std::span<const std::int64_t> ids, std::size_t cardinality) {
  for (std::int64_t id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= cardinality) throw BoundsError(id, cardinality);
  }
}

void check_weights(const SampleWeights& w, std::size_t batch, std::size_t options) {
  if (w.weights.rank() != 2 || w.batch() != batch || w.options() != options) {
    throw DimensionError("sample weights " + ag::shape_string(w.weights.shape()) + " do not match batch " +
                         std::to_string(batch) + " x " + std::to_string(options) + " options");
  }
}

}  // namespace

EmbDimSupernet::EmbDimSupernet(std::size_t cardinality, std::vector<std::size_t> dim_options, const CostModel& cost,
                               Rng& rng, const std::string& name)
    : cardinality_(cardinality), dim_options_(std::move(dim_options)) {
  if (cardinality_ == 0) throw ConfigError("embedding '" + name + "' has zero cardinality");
  if (dim_options_.empty()) throw ConfigError("embedding '" + name + "' has no dimension options");
  std::sort(dim_options_.begin(), dim_options_.end());
  dim_options_.erase(std::unique(dim_options_.begin(), dim_options_.end()), dim_options_.end());
  if (dim_options_.front() == 0) throw ConfigError("embedding dimension options must be positive");
  for (std::size_t d : dim_options_) costs_.push_back(cost(EmbeddingDimOp{cardinality_, d}));
  table_ = init_embedding(name + ".table", cardinality_, dim_options_.back(), rng);
  theta_ = {name + ".theta", ag::Tensor::zeros({dim_options_.size()}, true)};
}

ag::Tensor EmbDimSupernet::forward(std::span<const std::int64_t> ids, const SamplingContext& ctx) {
  SampleWeights sw = soft_sample(theta_.tensor, ids.size(), ctx);
  ag::Tensor out = forward_weighted(ids, sw);
  curr_cost_ = ag::dot_const(ag::mean_rows(sw.weights), costs_);
  return out;
}

ag::Tensor EmbDimSupernet::forward_weighted(std::span<const std::int64_t> ids, const SampleWeights& weights) {
  check_ids(ids, cardinality_);
  check_weights(weights, ids.size(), dim_options_.size());
  ag::Tensor full = ag::embedding_lookup(table_.tensor, ids);
  std::vector<ag::Tensor> candidates;
  for (std::size_t d : dim_options_) {
    candidates.push_back(d == output_dim() ? full : ag::truncate_columns(full, d));
  }
  return weighted_sum(weights, candidates);
}

ag::Tensor EmbDimSupernet::expected_cost() const { return ag::dot_const(ag::softmax(theta_.tensor), costs_); }

std::size_t EmbDimSupernet::hard_sample(Rng& rng) const { return dnas::hard_sample(theta_.tensor.values(), rng).index; }

std::vector<std::size_t> EmbDimSupernet::params_options() const {
  std::vector<std::size_t> out;
  for (std::size_t d : dim_options_) out.push_back(d * cardinality_);
  return out;
}

std::vector<std::size_t> hash_size_options(std::size_t cardinality, std::span<const double> factors) {
  if (cardinality == 0) throw ConfigError("cardinality must be positive");
  if (factors.empty()) throw ConfigError("no cardinality reduction factors given");
  std::vector<std::size_t> out;
  for (double f : factors) {
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError("cardinality factors must lie in (0, 1]");
    const double h = std::round(f * static_cast<double>(cardinality));
    out.push_back(std::max<std::size_t>(1, static_cast<std::size_t>(h)));
  }
  std::sort(out.begin(), out.end(), std::greater<>());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

EmbCardSupernet::EmbCardSupernet(std::size_t cardinality, std::size_t dim, std::span<const double> factors,
                                 const CostModel& cost, Rng& rng, const std::string& name)
    : cardinality_(cardinality), dim_(dim), hash_sizes_(hash_size_options(cardinality, factors)) {
  if (dim_ == 0) throw ConfigError("embedding '" + name + "' has zero dimension");
  for (std::size_t i = 0; i < hash_sizes_.size(); ++i) {
    costs_.push_back(cost(HashSizeOp{hash_sizes_[i], dim_}));
    tables_.push_back(init_embedding(name + ".h" + std::to_string(hash_sizes_[i]), hash_sizes_[i], dim_, rng));
  }
  theta_ = {name + ".theta", ag::Tensor::zeros({hash_sizes_.size()}, true)};
}

std::int64_t EmbCardSupernet::row_for(std::int64_t id, std::size_t hash_size) {
  if (id < 0) throw BoundsError(id, hash_size);
  return id % static_cast<std::int64_t>(hash_size);
}

ag::Tensor EmbCardSupernet::forward(std::span<const std::int64_t> ids, const SamplingContext& ctx) {
  SampleWeights sw = soft_sample(theta_.tensor, ids.size(), ctx);
  ag::Tensor out = forward_weighted(ids, sw);
  curr_cost_ = ag::dot_const(ag::mean_rows(sw.weights), costs_);
  return out;
}

ag::Tensor EmbCardSupernet::forward_weighted(std::span<const std::int64_t> ids, const SampleWeights& weights) {
  check_weights(weights, ids.size(), hash_sizes_.size());
  std::vector<ag::Tensor> candidates;
  std::vector<std::int64_t> rows(ids.size());
  for (std::size_t i = 0; i < hash_sizes_.size(); ++i) {
    for (std::size_t r = 0; r < ids.size(); ++r) rows[r] = row_for(ids[r], hash_sizes_[i]);
    candidates.push_back(ag::embedding_lookup(tables_[i].tensor, rows));
  }
  return weighted_sum(weights, candidates);
}

std::size_t EmbCardSupernet::storage() const {
  std::size_t total = 0;
  for (std::size_t h : hash_sizes_) total += h * dim_;
  return total;
}

ag::Tensor EmbCardSupernet::expected_cost() const { return ag::dot_const(ag::softmax(theta_.tensor), costs_); }

std::size_t EmbCardSupernet::hard_sample(Rng& rng) const {
  return dnas::hard_sample(theta_.tensor.values(), rng).index;
}

}  // namespace dnas
