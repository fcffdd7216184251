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

#include "dnas/cost.hpp"
#include "dnas/model.hpp"
#include "dnas/supernet.hpp"

namespace dnas {

enum class SearchGroup { kMlp, kEmbDim, kEmbCard };

SearchGroup parse_search_group(std::string_view name);
std::string_view search_group_name(SearchGroup group);

// ---------------------------------------------------------------------------
// FC-of-FC

struct FcOfFcNode {
  std::size_t size = 0;
  std::size_t position = 0;  // 0 = source, max_layers = sink
  std::vector<std::size_t> in_edges;
  std::vector<std::size_t> out_edges;
};

struct FcOfFcEdge {
  std::size_t from = 0;
  std::size_t to = 0;
  bool skip = false;
};

/// Nodes are activation sizes laid out over positions 1..max_layers-1 between
/// a fixed source and sink; edges are FC operators (any size to any size at the
/// next position) or skips (same size, next position). Skips are only allowed
/// on the first max_layers-min_layers transitions, so every path has between
/// min_layers and max_layers FC edges. Node indices are a topological order.
class FcOfFcDag {
 public:
  static FcOfFcDag build(std::size_t input_dim, std::size_t output_dim, std::vector<std::size_t> sizes,
                         std::size_t min_layers, std::size_t max_layers);

  const std::vector<FcOfFcNode>& nodes() const { return nodes_; }
  const std::vector<FcOfFcEdge>& edges() const { return edges_; }
  std::size_t source() const { return 0; }
  std::size_t sink() const { return nodes_.size() - 1; }
  std::size_t input_dim() const { return nodes_.front().size; }
  std::size_t output_dim() const { return nodes_.back().size; }
  std::size_t min_layers() const { return min_layers_; }
  std::size_t max_layers() const { return max_layers_; }
  const std::vector<std::size_t>& sizes() const { return sizes_; }

  /// Nodes with more than one incoming edge, in topological order.
  std::vector<std::size_t> decision_nodes() const;

  /// Layer sizes along a source->sink edge path; skips collapse.
  std::vector<std::size_t> path_sizes(std::span<const std::size_t> path_edges) const;

  /// Whether sizes (incl. endpoints) is a legal architecture of this DAG.
  bool admits(std::span<const std::size_t> sizes) const;

 private:
  std::vector<FcOfFcNode> nodes_;
  std::vector<FcOfFcEdge> edges_;
  std::vector<std::size_t> sizes_;
  std::size_t min_layers_ = 0, max_layers_ = 0;
};

struct FcOfFcSample {
  std::vector<std::size_t> sizes;  // incl. input and output dims
  std::vector<std::size_t> path;   // edge ids, source to sink
};

/// Walks back from the sink following choice[v] (an index into in_edges of v).
FcOfFcSample fc_of_fc_walk(const FcOfFcDag& dag, std::span<const std::size_t> choice);

/// Hard-samples one incoming edge at every decision node from softmax(theta[v]),
/// then walks back from the sink. theta is indexed by node; entries for nodes
/// with a single incoming edge are ignored.
FcOfFcSample fc_of_fc_hard_sample(const FcOfFcDag& dag, const std::vector<ag::Tensor>& theta, Rng& rng);

/// Expected path cost under the backward walk. edge_probs[v] holds the
/// probabilities over in_edges of v (ignored for single-input nodes). Node
/// visit probabilities start at 1 on the sink and flow backwards.
ag::Tensor fc_of_fc_expected_cost(const FcOfFcDag& dag, std::span<const double> edge_costs,
                                  const std::vector<ag::Tensor>& edge_probs);

class FcOfFcSupernet final : public MlpBlock {
 public:
  FcOfFcSupernet(FcOfFcDag dag, ag::Activation sink_activation, const CostModel& cost, Rng& rng,
                 const std::string& name);

  std::size_t input_dim() const override { return dag_.input_dim(); }
  std::size_t output_dim() const override { return dag_.output_dim(); }
  ag::Tensor forward(const ag::Tensor& x, const SamplingContext& ctx) override;
  std::vector<NamedTensor> parameters() const override;
  std::vector<NamedTensor> arch_parameters() const override { return thetas_; }
  /// Expected cost with the batch-mean sample weights of the last forward.
  std::optional<ag::Tensor> current_cost() const override { return curr_cost_; }

  /// Expected cost under softmax(theta).
  ag::Tensor expected_cost() const;
  FcOfFcSample hard_sample(Rng& rng) const;

  const FcOfFcDag& dag() const { return dag_; }
  const std::vector<double>& edge_costs() const { return edge_costs_; }
  /// Theta per node (undefined for nodes without a choice).
  const std::vector<ag::Tensor>& node_theta() const { return node_theta_; }
  /// Weight and bias of an FC edge.
  const NamedTensor& edge_weight(std::size_t edge) const { return weights_.at(edge); }
  const NamedTensor& edge_bias(std::size_t edge) const { return biases_.at(edge); }

 private:
  FcOfFcDag dag_;
  ag::Activation sink_act_;
  std::vector<double> edge_costs_;
  std::vector<NamedTensor> weights_, biases_;  // indexed by edge; empty tensors on skips
  std::vector<ag::Tensor> node_theta_;
  std::vector<NamedTensor> thetas_;
  std::optional<ag::Tensor> curr_cost_;
};

// ---------------------------------------------------------------------------
// Embedding dimension

/// One [cardinality x max_dim] table; option d uses the first d columns.
class EmbDimSupernet final : public EmbeddingBlock {
 public:
  EmbDimSupernet(std::size_t cardinality, std::vector<std::size_t> dim_options, const CostModel& cost, Rng& rng,
                 const std::string& name);

  std::size_t output_dim() const override { return dim_options_.back(); }
  ag::Tensor forward(std::span<const std::int64_t> ids, const SamplingContext& ctx) override;
  /// Forward with explicit per-row option weights.
  ag::Tensor forward_weighted(std::span<const std::int64_t> ids, const SampleWeights& weights);
  std::vector<NamedTensor> parameters() const override { return {table_}; }
  std::vector<NamedTensor> arch_parameters() const override { return {theta_}; }
  std::optional<ag::Tensor> current_cost() const override { return curr_cost_; }
  std::size_t parameter_count() const override { return cardinality_ * output_dim(); }
  std::size_t storage() const override { return cardinality_ * output_dim(); }

  ag::Tensor expected_cost() const;
  std::size_t hard_sample(Rng& rng) const;

  std::size_t cardinality() const { return cardinality_; }
  const std::vector<std::size_t>& dim_options() const { return dim_options_; }
  /// dim * cardinality per option.
  std::vector<std::size_t> params_options() const;
  const std::vector<double>& option_costs() const { return costs_; }
  const ag::Tensor& table() const { return table_.tensor; }
  const ag::Tensor& theta() const { return theta_.tensor; }

 private:
  std::size_t cardinality_;
  std::vector<std::size_t> dim_options_;
  std::vector<double> costs_;
  NamedTensor table_, theta_;
  std::optional<ag::Tensor> curr_cost_;
};

// ---------------------------------------------------------------------------
// Embedding cardinality

/// max(1, round(factor * cardinality)) per factor, sorted descending with
/// duplicates removed.
std::vector<std::size_t> hash_size_options(std::size_t cardinality, std::span<const double> factors);

/// Separate [H_i x dim] tables; option i reads row (id mod H_i).
class EmbCardSupernet final : public EmbeddingBlock {
 public:
  EmbCardSupernet(std::size_t cardinality, std::size_t dim, std::span<const double> factors, const CostModel& cost,
                  Rng& rng, const std::string& name);

  static std::int64_t row_for(std::int64_t id, std::size_t hash_size);

  std::size_t output_dim() const override { return dim_; }
  ag::Tensor forward(std::span<const std::int64_t> ids, const SamplingContext& ctx) override;
  ag::Tensor forward_weighted(std::span<const std::int64_t> ids, const SampleWeights& weights);
  std::vector<NamedTensor> parameters() const override { return tables_; }
  std::vector<NamedTensor> arch_parameters() const override { return {theta_}; }
  std::optional<ag::Tensor> current_cost() const override { return curr_cost_; }
  std::size_t parameter_count() const override { return storage(); }
  std::size_t storage() const override;

  ag::Tensor expected_cost() const;
  std::size_t hard_sample(Rng& rng) const;

  std::size_t cardinality() const { return cardinality_; }
  const std::vector<std::size_t>& hash_sizes() const { return hash_sizes_; }
  const std::vector<double>& option_costs() const { return costs_; }
  const ag::Tensor& table(std::size_t i) const { return tables_.at(i).tensor; }
  const ag::Tensor& theta() const { return theta_.tensor; }

 private:
  std::size_t cardinality_, dim_;
  std::vector<std::size_t> hash_sizes_;
  std::vector<double> costs_;
  std::vector<NamedTensor> tables_;
  NamedTensor theta_;
  std::optional<ag::Tensor> curr_cost_;
};

// ---------------------------------------------------------------------------
// DLRM super-supernet

struct FcOfFcSettings {
  std::vector<std::size_t> sizes;
  std::size_t min_layers = 2;
  std::size_t max_layers = 3;
};

struct DlrmSupernetConfig {
  std::string id = "supernet";
  SearchGroup group = SearchGroup::kEmbCard;
  // Set only to reject configurations that ask to search several groups at once.
  std::vector<SearchGroup> extra_groups;

  std::size_t num_dense = data::kCriteoDense;
  std::vector<std::size_t> cardinalities;

  // Fixed shapes, used for every group not under search.
  std::vector<std::size_t> bottom_mlp{64, 16};  // after the dense input; last = interaction dim
  std::vector<std::size_t> top_mlp{64, 1};      // after the interaction input
  std::size_t embedding_dim = 16;
  bool include_diag = false;

  // mlp group
  FcOfFcSettings bottom_search{{16, 32, 64}, 2, 3};
  FcOfFcSettings top_search{{16, 32, 64}, 2, 3};
  // emb_dim group
  std::vector<std::size_t> dim_options{2, 4, 8, 16};
  // emb_card group
  std::vector<double> card_factors{1.0, 0.1, 0.01, 0.001};

  std::optional<CostMetric> metric;  // defaults per group
  std::string latency_table_path;    // required by the latency_table metric
  std::uint64_t init_seed = 0;

  CostMetric effective_metric() const;
  /// Loads the latency table when the metric needs one.
  std::shared_ptr<const CostTable> cost_table() const;
  /// Single searchable group, shape consistency, option sanity.
  void validate() const;

  std::string to_json() const;
  static DlrmSupernetConfig from_json(std::string_view text);
};

/// Sampled (or hand-written) architecture for one search group, plus provenance.
struct ArchDescriptor {
  SearchGroup group = SearchGroup::kMlp;
  std::vector<std::size_t> bottom_mlp;  // mlp: full size sequences incl. endpoints
  std::vector<std::size_t> top_mlp;
  std::vector<std::size_t> emb_dims;    // emb_dim: per sparse feature
  std::vector<std::size_t> hash_sizes;  // emb_card: per sparse feature
  std::string source;                   // supernet id
  double sampling_epoch = 0.0;          // architecture epochs completed when sampled
  std::string base_config_json;         // supernet config the choices refer to

  std::string to_json() const;
  static ArchDescriptor from_json(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static ArchDescriptor load(const std::filesystem::path& path);

  bool same_choices(const ArchDescriptor& other) const;
};

/// Throws DescriptorError naming the first illegal decision point.
void validate_descriptor(const ArchDescriptor& desc, const DlrmSupernetConfig& base);

/// Cost of a concrete architecture under the config's metric (searched group only).
double architecture_cost(const ArchDescriptor& desc, const DlrmSupernetConfig& base);

/// FLOPs of both MLPs, average embedding dim, or total categories, by group.
double efficiency_metric(const ArchDescriptor& desc);

struct DecisionPoint {
  std::string name;
  std::vector<std::string> options;
  ag::Tensor theta;
};

/// DLRM with its searchable group replaced by supernets.
class DlrmSupernet {
 public:
  explicit DlrmSupernet(DlrmSupernetConfig config);

  ag::Tensor forward(const data::Batch& batch, const SamplingContext& ctx);
  std::vector<NamedTensor> weight_parameters() const { return model_.parameters(); }
  std::vector<NamedTensor> arch_parameters() const { return model_.arch_parameters(); }
  /// Sum of sub-supernet costs from the last forward.
  ag::Tensor current_cost() const;
  /// Expected cost under softmax(theta), no sampling noise.
  double expected_cost() const;

  ArchDescriptor sample_architecture(Rng& rng) const;
  std::vector<DecisionPoint> decision_points() const;

  const DlrmSupernetConfig& config() const { return config_; }
  Dlrm& model() { return model_; }
  const Dlrm& model() const { return model_; }
  std::size_t num_supernets() const;

 private:
  Dlrm build();

  DlrmSupernetConfig config_;
  // filled by build(), which runs while model_ is being initialised
  const FcOfFcSupernet* bottom_ = nullptr;
  const FcOfFcSupernet* top_ = nullptr;
  std::vector<const EmbDimSupernet*> dim_tables_;
  std::vector<const EmbCardSupernet*> card_tables_;
  Dlrm model_;
};

std::unique_ptr<DlrmSupernet> assemble_dlrm_supernet(const DlrmSupernetConfig& config);

/// The fixed backbone the config describes when nothing is searched.
Dlrm build_fixed_backbone(const DlrmSupernetConfig& base, std::uint64_t seed);

/// Fresh DLRM realising the descriptor's choices. emb_dim tables are padded to
/// the largest selected dim, which also becomes the interaction dimension.
Dlrm instantiate_sampled(const ArchDescriptor& desc, const DlrmSupernetConfig& base, std::uint64_t seed);

}  // namespace dnas
