#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dnas/autograd/tensor.hpp"

namespace dnas {

enum class CostMetric { kFlops, kEmbeddingParams, kCategories, kLatencyTable };

CostMetric parse_cost_metric(std::string_view name);
std::string_view cost_metric_name(CostMetric metric);

struct FcOp {
  std::size_t in = 0;
  std::size_t out = 0;
};
struct SkipOp {
  std::size_t size = 0;
};
struct EmbeddingDimOp {
  std::size_t cardinality = 0;
  std::size_t dim = 0;
};
struct HashSizeOp {
  std::size_t hash_size = 0;
  std::size_t dim = 0;
};

using OperatorSpec = std::variant<FcOp, SkipOp, EmbeddingDimOp, HashSizeOp>;

/// Stable identifier used as the key in latency tables, e.g. "fc:16x32".
std::string operator_id(const OperatorSpec& op);

/// Operator id -> nonnegative cost, loaded from "operator-id cost" lines.
class CostTable {
 public:
  CostTable() = default;
  explicit CostTable(CostMetric metric) : metric_(metric) {}

  static CostTable load(const std::filesystem::path& path);
  static CostTable parse(std::string_view text);

  void set(std::string id, double cost);
  bool contains(const std::string& id) const { return costs_.count(id) != 0; }
  double at(const std::string& id) const;
  CostMetric metric() const { return metric_; }
  std::size_t size() const { return costs_.size(); }

 private:
  CostMetric metric_ = CostMetric::kLatencyTable;
  std::map<std::string, double> costs_;
};

/// flops: 2*in*out per FC, 0 per skip; embedding_params: card*dim;
/// categories: hash size; latency_table: lookup by operator_id.
double op_cost(const OperatorSpec& op, CostMetric metric, const CostTable* table = nullptr);

/// Cost model handed to supernets at construction.
struct CostModel {
  CostMetric metric = CostMetric::kFlops;
  const CostTable* table = nullptr;

  double operator()(const OperatorSpec& op) const { return op_cost(op, metric, table); }
};

/// One decision point: selection probabilities (mean sample weights or
/// softmax(theta)) and the cost of each option.
struct CostLayer {
  ag::Tensor probs;
  std::vector<double> costs;
};

/// sum_l sum_i p_{l,i} * cost_{l,i}; differentiable through the probabilities.
ag::Tensor expected_cost(const std::vector<CostLayer>& layers);

struct LossConfig {
  bool use_hw_cost = false;
  bool exponential_cost = false;
  double cost_coef = 0.0;     // alpha
  double cost_exp = 1.0;      // beta, exponential form only
  double cost_multiplier = 1.0;

  void validate() const;
};

inline constexpr double kMinLogCostArgument = 1.0 + 1e-6;

/// exponential: task * alpha * ln(C)^beta; linear: task + alpha * ln(C), where
/// C = cost * cost_multiplier clamped to >= 1 + 1e-6.
ag::Tensor total_loss(const ag::Tensor& task_loss, const ag::Tensor& cost, const LossConfig& cfg);

}  // namespace dnas
