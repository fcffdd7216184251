#include "dnas/model.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "dnas/errors.hpp"
#include "json.hpp"

namespace dnas {

NamedTensor init_fc_weight(const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
  const double sd = std::sqrt(2.0 / static_cast<double>(in + out));
  std::vector<double> v(in * out);
  for (double& x : v) x = sd * rng.normal();
  return {name, ag::Tensor::from_values({in, out}, std::move(v), true)};
}

NamedTensor init_fc_bias(const std::string& name, std::size_t out, Rng& rng) {
  const double sd = std::sqrt(1.0 / static_cast<double>(out));
  std::vector<double> v(out);
  for (double& x : v) x = sd * rng.normal();
  return {name, ag::Tensor::from_values({out}, std::move(v), true)};
}

NamedTensor init_embedding(const std::string& name, std::size_t rows, std::size_t dim, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  std::vector<double> v(rows * dim);
  for (double& x : v) x = rng.uniform(-bound, bound);
  return {name, ag::Tensor::from_values({rows, dim}, std::move(v), true)};
}

FixedMlp::FixedMlp(std::vector<std::size_t> sizes, ag::Activation last, Rng& rng, const std::string& name)
    : sizes_(std::move(sizes)), last_(last) {
  if (sizes_.size() < 2) throw ConfigError("MLP '" + name + "' needs at least an input and an output size");
  for (std::size_t s : sizes_) {
    if (s == 0) throw ConfigError("MLP '" + name + "' has a zero-width layer");
  }
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const std::string prefix = name + ".fc" + std::to_string(l);
    weights_.push_back(init_fc_weight(prefix + ".weight", sizes_[l], sizes_[l + 1], rng));
    biases_.push_back(init_fc_bias(prefix + ".bias", sizes_[l + 1], rng));
  }
}

ag::Tensor FixedMlp::forward(const ag::Tensor& x, const SamplingContext&) {
  ag::Tensor h = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const bool last = l + 1 == weights_.size();
    h = ag::fc_layer(h, weights_[l].tensor, biases_[l].tensor, last ? last_ : ag::Activation::kRelu);
  }
  return h;
}

std::vector<NamedTensor> FixedMlp::parameters() const {
  std::vector<NamedTensor> out;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.push_back(weights_[l]);
    out.push_back(biases_[l]);
  }
  return out;
}

PlainEmbedding::PlainEmbedding(std::size_t cardinality, std::size_t rows, std::size_t dim, std::size_t pad_to,
                               Rng& rng, const std::string& name)
    : cardinality_(cardinality), rows_(rows), dim_(dim), pad_to_(pad_to) {
  if (cardinality_ == 0 || rows_ == 0 || dim_ == 0) throw ConfigError("embedding '" + name + "' has a zero extent");
  if (pad_to_ < dim_) throw ConfigError("embedding '" + name + "' padded width below its dimension");
  table_ = init_embedding(name + ".table", rows_, dim_, rng);
}

ag::Tensor PlainEmbedding::forward(std::span<const std::int64_t> ids, const SamplingContext&) {
  std::vector<std::int64_t> rows(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= cardinality_) throw BoundsError(ids[i], cardinality_);
    rows[i] = ids[i] % static_cast<std::int64_t>(rows_);
  }
  ag::Tensor out = ag::embedding_lookup(table_.tensor, rows);
  return pad_to_ > dim_ ? ag::pad_columns(out, pad_to_) : out;
}

std::size_t top_mlp_input_dim(std::size_t num_sparse, std::size_t /*dim*/, std::size_t bottom_out,
                              bool include_diag) {
  const std::size_t n = num_sparse + 1;
  return n * (n - 1) / 2 + (include_diag ? n : 0) + bottom_out;
}

Dlrm::Dlrm(std::unique_ptr<MlpBlock> bottom, std::vector<std::unique_ptr<EmbeddingBlock>> embeddings,
           std::unique_ptr<MlpBlock> top, bool include_diag)
    : bottom_(std::move(bottom)), embeddings_(std::move(embeddings)), top_(std::move(top)),
      include_diag_(include_diag) {
  if (!bottom_ || !top_) throw ConfigError("DLRM needs both a bottom and a top MLP");
  const std::size_t d = bottom_->output_dim();
  for (std::size_t i = 0; i < embeddings_.size(); ++i) {
    if (embeddings_[i]->output_dim() != d) {
      throw DimensionError("embedding " + std::to_string(i) + " width " + std::to_string(embeddings_[i]->output_dim()) +
                           " differs from bottom MLP output " + std::to_string(d));
    }
  }
  const std::size_t expect = top_mlp_input_dim(embeddings_.size(), d, d, include_diag_);
  if (top_->input_dim() != expect) {
    throw DimensionError("top MLP input " + std::to_string(top_->input_dim()) + " but interactions produce " +
                         std::to_string(expect));
  }
  if (top_->output_dim() != 1) throw DimensionError("top MLP must produce one output");
}

ag::Tensor Dlrm::forward(const data::Batch& batch, const SamplingContext& ctx) {
  if (batch.num_dense != num_dense() || batch.sparse.size() != num_sparse()) {
    throw DimensionError("batch has " + std::to_string(batch.num_dense) + " dense / " +
                         std::to_string(batch.sparse.size()) + " sparse features, model expects " +
                         std::to_string(num_dense()) + " / " + std::to_string(num_sparse()));
  }
  ag::Tensor dense = ag::Tensor::from_values({batch.size, batch.num_dense}, batch.dense);
  ag::Tensor x = bottom_->forward(dense, ctx);
  std::vector<ag::Tensor> feats{x};
  for (std::size_t i = 0; i < embeddings_.size(); ++i) feats.push_back(embeddings_[i]->forward(batch.sparse[i], ctx));
  ag::Tensor z = ag::dot_interactions(ag::stack_features(feats), include_diag_);
  ag::Tensor p = top_->forward(ag::concat_columns({x, z}), ctx);
  return ag::reshape(p, {batch.size});
}

std::vector<NamedTensor> Dlrm::parameters() const {
  std::vector<NamedTensor> out = bottom_->parameters();
  for (const auto& e : embeddings_) {
    auto p = e->parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  auto t = top_->parameters();
  out.insert(out.end(), t.begin(), t.end());
  return out;
}

std::vector<NamedTensor> Dlrm::arch_parameters() const {
  std::vector<NamedTensor> out = bottom_->arch_parameters();
  for (const auto& e : embeddings_) {
    auto p = e->arch_parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  auto t = top_->arch_parameters();
  out.insert(out.end(), t.begin(), t.end());
  return out;
}

std::optional<ag::Tensor> Dlrm::current_cost() const {
  std::optional<ag::Tensor> total;
  auto add = [&](std::optional<ag::Tensor> c) {
    if (!c) return;
    total = total ? ag::add(*total, *c) : *c;
  };
  add(bottom_->current_cost());
  for (const auto& e : embeddings_) add(e->current_cost());
  add(top_->current_cost());
  return total;
}

std::size_t Dlrm::embedding_parameters() const {
  std::size_t total = 0;
  for (const auto& e : embeddings_) total += e->parameter_count();
  return total;
}

std::size_t Dlrm::embedding_storage() const {
  std::size_t total = 0;
  for (const auto& e : embeddings_) total += e->storage();
  return total;
}

double calibration(std::span<const double> p, std::span<const double> y) {
  if (p.size() != y.size()) throw DimensionError("calibration: prediction and label counts differ");
  if (p.empty()) throw UndefinedMetricError("calibration of an empty set");
  double sp = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    sp += p[i];
    sy += y[i];
  }
  if (sy == 0.0) throw UndefinedMetricError("calibration undefined without positive labels");
  return sp / sy;
}

EvalResult evaluate(Dlrm& model, const data::DatasetView& view, std::size_t batch_size, const SamplingContext& ctx) {
  if (view.size() == 0) throw UndefinedMetricError("evaluation over an empty dataset");
  SamplingContext eval_ctx = ctx;
  eval_ctx.zero_noise = true;
  data::DataLoader loader(view, batch_size, 0, false);
  double loss_sum = 0.0, p_sum = 0.0, y_sum = 0.0, correct = 0.0;
  for (const auto& batch : loader.ordered_batches()) {
    ag::Tensor p = model.forward(batch, eval_ctx).detach();
    const double loss = ag::bce_loss(p, batch.labels).item();
    loss_sum += loss * static_cast<double>(batch.size);
    for (std::size_t i = 0; i < batch.size; ++i) {
      p_sum += p.at(i);
      y_sum += batch.labels[i];
      correct += ((p.at(i) >= 0.5) == (batch.labels[i] > 0.5)) ? 1.0 : 0.0;
    }
  }
  EvalResult r;
  r.count = view.size();
  r.logloss = loss_sum / static_cast<double>(r.count);
  r.calibration = y_sum > 0.0 ? p_sum / y_sum : std::nan("");
  r.accuracy = correct / static_cast<double>(r.count);
  return r;
}

namespace {

constexpr int kCheckpointVersion = 1;

nlohmann::json tensors_to_json(const std::vector<NamedTensor>& ts) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& t : ts) {
    auto v = t.tensor.values();
    arr.push_back({{"name", t.name}, {"shape", t.tensor.shape()}, {"values", std::vector<double>(v.begin(), v.end())}});
  }
  return arr;
}

std::vector<NamedTensor> tensors_from_json(const nlohmann::json& arr) {
  std::vector<NamedTensor> out;
  for (const auto& item : arr) {
    auto shape = item.at("shape").get<ag::Shape>();
    auto values = item.at("values").get<std::vector<double>>();
    if (ag::numel(shape) != values.size()) {
      throw CheckpointError("tensor '" + item.at("name").get<std::string>() + "' has inconsistent shape");
    }
    out.push_back({item.at("name").get<std::string>(), ag::Tensor::from_values(shape, std::move(values), true)});
  }
  return out;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& weights,
                     const std::vector<NamedTensor>& thetas, const std::string& metadata_json) {
  nlohmann::json j;
  j["format"] = "dnas-checkpoint";
  j["version"] = kCheckpointVersion;
  j["metadata"] = nlohmann::json::parse(metadata_json);
  j["weights"] = tensors_to_json(weights);
  j["thetas"] = tensors_to_json(thetas);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint '" + path.string() + "'");
  out << j.dump();
  if (!out) throw IoError("write failure on '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
  if (j.value("format", "") != "dnas-checkpoint") throw CheckpointError("'" + path.string() + "' is not a checkpoint");
  if (j.value("version", 0) != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version in '" + path.string() + "'");
  }
  try {
    Checkpoint c;
    c.weights = tensors_from_json(j.at("weights"));
    c.thetas = tensors_from_json(j.at("thetas"));
    c.metadata_json = j.value("metadata", nlohmann::json::object()).dump();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("malformed checkpoint '" + path.string() + "': " + e.what());
  }
}

void restore_parameters(const std::vector<NamedTensor>& into, const std::vector<NamedTensor>& from) {
  std::map<std::string, const ag::Tensor*> by_name;
  for (const auto& t : from) by_name[t.name] = &t.tensor;
  for (const auto& t : into) {
    auto it = by_name.find(t.name);
    if (it == by_name.end()) throw CheckpointError("checkpoint lacks tensor '" + t.name + "'");
    if (it->second->shape() != t.tensor.shape()) {
      throw CheckpointError("shape mismatch for '" + t.name + "': " + ag::shape_string(it->second->shape()) +
                            " vs " + ag::shape_string(t.tensor.shape()));
    }
    ag::Tensor dst = t.tensor;
    auto src = it->second->values();
    std::copy(src.begin(), src.end(), dst.mutable_values().begin());
  }
}

}  // namespace dnas
