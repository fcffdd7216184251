#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dnas/autograd/ops.hpp"
#include "dnas/data.hpp"
#include "dnas/random.hpp"
#include "dnas/supernet.hpp"

namespace dnas {

/// Dense block mapping [batch x input_dim] -> [batch x output_dim]; either a
/// fixed MLP or an MLP supernet.
class MlpBlock {
 public:
  virtual ~MlpBlock() = default;
  virtual std::size_t input_dim() const = 0;
  virtual std::size_t output_dim() const = 0;
  virtual ag::Tensor forward(const ag::Tensor& x, const SamplingContext& ctx) = 0;
  virtual std::vector<NamedTensor> parameters() const = 0;
  virtual std::vector<NamedTensor> arch_parameters() const { return {}; }
  /// Expected hardware cost from the most recent forward, if this block searches.
  virtual std::optional<ag::Tensor> current_cost() const { return std::nullopt; }
};

/// One sparse feature: ids [batch] -> [batch x output_dim].
class EmbeddingBlock {
 public:
  virtual ~EmbeddingBlock() = default;
  virtual std::size_t output_dim() const = 0;
  virtual ag::Tensor forward(std::span<const std::int64_t> ids, const SamplingContext& ctx) = 0;
  virtual std::vector<NamedTensor> parameters() const = 0;
  virtual std::vector<NamedTensor> arch_parameters() const { return {}; }
  virtual std::optional<ag::Tensor> current_cost() const { return std::nullopt; }
  /// Learnable embedding values.
  virtual std::size_t parameter_count() const = 0;
  /// Table footprint counting zero padding up to output_dim.
  virtual std::size_t storage() const = 0;
};

/// W ~ N(0, 2/(in+out)), b ~ N(0, 1/out).
NamedTensor init_fc_weight(const std::string& name, std::size_t in, std::size_t out, Rng& rng);
NamedTensor init_fc_bias(const std::string& name, std::size_t out, Rng& rng);
/// Uniform in +-1/sqrt(dim).
NamedTensor init_embedding(const std::string& name, std::size_t rows, std::size_t dim, Rng& rng);

class FixedMlp final : public MlpBlock {
 public:
  /// sizes = [input, hidden..., output]; hidden layers use ReLU, the last layer `last`.
  FixedMlp(std::vector<std::size_t> sizes, ag::Activation last, Rng& rng, const std::string& name);

  std::size_t input_dim() const override { return sizes_.front(); }
  std::size_t output_dim() const override { return sizes_.back(); }
  ag::Tensor forward(const ag::Tensor& x, const SamplingContext& ctx) override;
  std::vector<NamedTensor> parameters() const override;

  const std::vector<std::size_t>& sizes() const { return sizes_; }
  ag::Tensor forward(const ag::Tensor& x) { return forward(x, SamplingContext{}); }

 private:
  std::vector<std::size_t> sizes_;
  ag::Activation last_;
  std::vector<NamedTensor> weights_, biases_;
};

/// Plain lookup. Ids must be < cardinality; row = id mod rows, so a table with
/// rows < cardinality behaves as a hashed (reduced) table. Output columns past
/// dim are zero-padded up to pad_to.
class PlainEmbedding final : public EmbeddingBlock {
 public:
  PlainEmbedding(std::size_t cardinality, std::size_t rows, std::size_t dim, std::size_t pad_to, Rng& rng,
                 const std::string& name);

  std::size_t output_dim() const override { return pad_to_; }
  ag::Tensor forward(std::span<const std::int64_t> ids, const SamplingContext& ctx) override;
  std::vector<NamedTensor> parameters() const override { return {table_}; }
  std::size_t parameter_count() const override { return rows_ * dim_; }
  std::size_t storage() const override { return rows_ * pad_to_; }

  std::size_t cardinality() const { return cardinality_; }
  std::size_t rows() const { return rows_; }
  std::size_t dim() const { return dim_; }
  const ag::Tensor& table() const { return table_.tensor; }

 private:
  std::size_t cardinality_, rows_, dim_, pad_to_;
  NamedTensor table_;
};

/// C(n_s + 1, 2) (+ n_s + 1 with the diagonal) + bottom_out.
std::size_t top_mlp_input_dim(std::size_t num_sparse, std::size_t dim, std::size_t bottom_out, bool include_diag);

/// Bottom MLP -> pairwise dot interactions with the embeddings -> top MLP.
class Dlrm {
 public:
  Dlrm(std::unique_ptr<MlpBlock> bottom, std::vector<std::unique_ptr<EmbeddingBlock>> embeddings,
       std::unique_ptr<MlpBlock> top, bool include_diag = false);

  /// Click probabilities p [batch].
  ag::Tensor forward(const data::Batch& batch, const SamplingContext& ctx = {});

  std::vector<NamedTensor> parameters() const;
  std::vector<NamedTensor> arch_parameters() const;
  /// Sum of the current costs of all searching blocks; nullopt if none search.
  std::optional<ag::Tensor> current_cost() const;

  std::size_t num_dense() const { return bottom_->input_dim(); }
  std::size_t num_sparse() const { return embeddings_.size(); }
  std::size_t interaction_dim() const { return bottom_->output_dim(); }
  bool include_diag() const { return include_diag_; }
  const MlpBlock& bottom() const { return *bottom_; }
  const MlpBlock& top() const { return *top_; }
  const EmbeddingBlock& embedding(std::size_t i) const { return *embeddings_.at(i); }
  std::size_t embedding_parameters() const;
  std::size_t embedding_storage() const;

 private:
  std::unique_ptr<MlpBlock> bottom_;
  std::vector<std::unique_ptr<EmbeddingBlock>> embeddings_;
  std::unique_ptr<MlpBlock> top_;
  bool include_diag_;
};

/// sum(p) / sum(y); UndefinedMetricError when there are no positives.
double calibration(std::span<const double> p, std::span<const double> y);

struct EvalResult {
  double logloss = 0.0;
  double calibration = 0.0;
  double accuracy = 0.0;
  std::size_t count = 0;
};

/// Deterministic pass over the view (no noise, ctx tau) in fixed-size batches.
EvalResult evaluate(Dlrm& model, const data::DatasetView& view, std::size_t batch_size,
                    const SamplingContext& ctx = {});

/// Versioned JSON: names, shapes and flat values of the given tensors.
void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& weights,
                     const std::vector<NamedTensor>& thetas, const std::string& metadata_json = "{}");

struct Checkpoint {
  std::vector<NamedTensor> weights;
  std::vector<NamedTensor> thetas;
  std::string metadata_json;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies values by name into `into`; CheckpointError on missing names or shape mismatch.
void restore_parameters(const std::vector<NamedTensor>& into, const std::vector<NamedTensor>& from);

}  // namespace dnas
