#include "dnas/cost.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "dnas/autograd/ops.hpp"
#include "dnas/errors.hpp"

namespace dnas {

CostMetric parse_cost_metric(std::string_view name) {
  if (name == "flops") return CostMetric::kFlops;
  if (name == "embedding_params") return CostMetric::kEmbeddingParams;
  if (name == "categories") return CostMetric::kCategories;
  if (name == "latency_table") return CostMetric::kLatencyTable;
  throw ConfigError("unknown cost metric '" + std::string(name) + "'");
}

std::string_view cost_metric_name(CostMetric metric) {
  switch (metric) {
    case CostMetric::kFlops: return "flops";
    case CostMetric::kEmbeddingParams: return "embedding_params";
    case CostMetric::kCategories: return "categories";
    case CostMetric::kLatencyTable: return "latency_table";
  }
  return "flops";
}

std::string operator_id(const OperatorSpec& op) {
  struct Visitor {
    std::string operator()(const FcOp& o) const {
      return "fc:" + std::to_string(o.in) + "x" + std::to_string(o.out);
    }
    std::string operator()(const SkipOp& o) const { return "skip:" + std::to_string(o.size); }
    std::string operator()(const EmbeddingDimOp& o) const {
      return "emb:" + std::to_string(o.cardinality) + "x" + std::to_string(o.dim);
    }
    std::string operator()(const HashSizeOp& o) const {
      return "hash:" + std::to_string(o.hash_size) + "x" + std::to_string(o.dim);
    }
  };
  return std::visit(Visitor{}, op);
}

CostTable CostTable::parse(std::string_view text) {
  CostTable table(CostMetric::kLatencyTable);
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string id;
    double cost = 0.0;
    std::string extra;
    if (!(fields >> id >> cost) || (fields >> extra)) {
      throw ParseError("expected '<operator-id> <cost>'", line_no);
    }
    if (cost < 0.0 || !std::isfinite(cost)) throw ParseError("cost must be finite and nonnegative", line_no);
    table.set(id, cost);
  }
  return table;
}

CostTable CostTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open latency table '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void CostTable::set(std::string id, double cost) {
  if (cost < 0.0) throw CostTableError("negative cost for '" + id + "'");
  costs_[std::move(id)] = cost;
}

double CostTable::at(const std::string& id) const {
  auto it = costs_.find(id);
  if (it == costs_.end()) throw CostTableError("no cost entry for operator '" + id + "'");
  return it->second;
}

double op_cost(const OperatorSpec& op, CostMetric metric, const CostTable* table) {
  if (metric == CostMetric::kLatencyTable) {
    if (table == nullptr) throw CostTableError("latency_table metric without a cost table");
    return table->at(operator_id(op));
  }
  if (const auto* fc = std::get_if<FcOp>(&op)) {
    if (metric != CostMetric::kFlops) throw CostTableError("metric does not apply to FC operators");
    return 2.0 * static_cast<double>(fc->in) * static_cast<double>(fc->out);
  }
  if (std::holds_alternative<SkipOp>(op)) {
    if (metric != CostMetric::kFlops) throw CostTableError("metric does not apply to skip operators");
    return 0.0;
  }
  if (const auto* e = std::get_if<EmbeddingDimOp>(&op)) {
    if (metric == CostMetric::kEmbeddingParams) return static_cast<double>(e->cardinality) * static_cast<double>(e->dim);
    if (metric == CostMetric::kCategories) return static_cast<double>(e->cardinality);
    throw CostTableError("metric does not apply to embedding operators");
  }
  const auto& h = std::get<HashSizeOp>(op);
  if (metric == CostMetric::kCategories) return static_cast<double>(h.hash_size);
  if (metric == CostMetric::kEmbeddingParams) return static_cast<double>(h.hash_size) * static_cast<double>(h.dim);
  throw CostTableError("metric does not apply to hash-size operators");
}

ag::Tensor expected_cost(const std::vector<CostLayer>& layers) {
  if (layers.empty()) return ag::Tensor::scalar(0.0);
  ag::Tensor total;
  for (const auto& layer : layers) {
    ag::Tensor term = ag::dot_const(layer.probs, layer.costs);
    total = total.defined() ? ag::add(total, term) : term;
  }
  return total;
}

void LossConfig::validate() const {
  if (!(cost_multiplier > 0.0)) throw ConfigError("cost_multiplier must be positive");
  if (!std::isfinite(cost_coef)) throw ConfigError("cost_coef must be finite");
  if (exponential_cost && !std::isfinite(cost_exp)) throw ConfigError("cost_exp must be finite");
}

ag::Tensor total_loss(const ag::Tensor& task_loss, const ag::Tensor& cost, const LossConfig& cfg) {
  if (!cfg.use_hw_cost) return task_loss;
  cfg.validate();
  ag::Tensor scaled = ag::scale(cost, cfg.cost_multiplier);
  const double c = scaled.item();
  if (!(c > 0.0)) {
    throw DomainError("hardware cost " + std::to_string(c) + " is not positive; cannot take its log");
  }
  if (c < kMinLogCostArgument) {
    spdlog::warn("scaled hardware cost {} below {}; clamping (raise cost_multiplier)", c, kMinLogCostArgument);
    // clamp keeps no gradient path, matching a hard floor
    scaled = ag::Tensor::scalar(kMinLogCostArgument);
  }
  ag::Tensor log_cost = ag::log(scaled);
  if (cfg.exponential_cost) {
    ag::Tensor factor = ag::scale(ag::pow(log_cost, cfg.cost_exp), cfg.cost_coef);
    return ag::mul(task_loss, factor);
  }
  return ag::add(task_loss, ag::scale(log_cost, cfg.cost_coef));
}

}  // namespace dnas
