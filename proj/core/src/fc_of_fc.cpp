#include <algorithm>

#include "dnas/autograd/ops.hpp"
#include "dnas/errors.hpp"
#include "dnas/search_spaces.hpp"

namespace dnas {

SearchGroup parse_search_group(std::string_view name) {
  if (name == "mlp") return SearchGroup::kMlp;
  if (name == "emb_dim") return SearchGroup::kEmbDim;
  if (name == "emb_card") return SearchGroup::kEmbCard;
  throw ConfigError("unknown search space group '" + std::string(name) + "'");
}

std::string_view search_group_name(SearchGroup group) {
  switch (group) {
    case SearchGroup::kMlp: return "mlp";
    case SearchGroup::kEmbDim: return "emb_dim";
    case SearchGroup::kEmbCard: return "emb_card";
  }
  return "mlp";
}

FcOfFcDag FcOfFcDag::build(std::size_t input_dim, std::size_t output_dim, std::vector<std::size_t> sizes,
                           std::size_t min_layers, std::size_t max_layers) {
  if (max_layers < 2) throw ConfigError("FC-of-FC needs max_layers >= 2 (input and output FC are fixed endpoints)");
  if (min_layers < 1 || min_layers > max_layers) throw ConfigError("FC-of-FC needs 1 <= min_layers <= max_layers");
  if (sizes.empty()) throw ConfigError("FC-of-FC needs at least one candidate size");
  if (input_dim == 0 || output_dim == 0) throw ConfigError("FC-of-FC endpoints must be nonzero");
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
  if (sizes.front() == 0) throw ConfigError("FC-of-FC candidate sizes must be nonzero");

  FcOfFcDag dag;
  dag.sizes_ = sizes;
  dag.min_layers_ = min_layers;
  dag.max_layers_ = max_layers;
  const std::size_t positions = max_layers - 1;
  const std::size_t s = sizes.size();
  dag.nodes_.push_back({input_dim, 0, {}, {}});
  for (std::size_t p = 1; p <= positions; ++p) {
    for (std::size_t size : sizes) dag.nodes_.push_back({size, p, {}, {}});
  }
  dag.nodes_.push_back({output_dim, max_layers, {}, {}});
  auto node_at = [&](std::size_t p, std::size_t k) { return 1 + (p - 1) * s + k; };
  auto connect = [&](std::size_t from, std::size_t to, bool skip) {
    const std::size_t e = dag.edges_.size();
    dag.edges_.push_back({from, to, skip});
    dag.nodes_[from].out_edges.push_back(e);
    dag.nodes_[to].in_edges.push_back(e);
  };
  const std::size_t sink = dag.nodes_.size() - 1;
  const std::size_t skip_transitions = max_layers - min_layers;

  if (min_layers == 1) connect(0, sink, false);
  for (std::size_t k = 0; k < s; ++k) connect(0, node_at(1, k), false);
  for (std::size_t p = 1; p < positions; ++p) {
    const bool skips = p <= skip_transitions;
    for (std::size_t b = 0; b < s; ++b) {
      for (std::size_t a = 0; a < s; ++a) {
        connect(node_at(p, a), node_at(p + 1, b), false);
        if (skips && a == b) connect(node_at(p, a), node_at(p + 1, b), true);
      }
    }
  }
  for (std::size_t k = 0; k < s; ++k) connect(node_at(positions, k), sink, false);
  return dag;
}

std::vector<std::size_t> FcOfFcDag::decision_nodes() const {
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < nodes_.size(); ++v) {
    if (nodes_[v].in_edges.size() > 1) out.push_back(v);
  }
  return out;
}

std::vector<std::size_t> FcOfFcDag::path_sizes(std::span<const std::size_t> path_edges) const {
  std::vector<std::size_t> out{input_dim()};
  for (std::size_t e : path_edges) {
    if (!edges_.at(e).skip) out.push_back(nodes_[edges_[e].to].size);
  }
  return out;
}

bool FcOfFcDag::admits(std::span<const std::size_t> arch) const {
  if (arch.size() < 2 || arch.front() != input_dim() || arch.back() != output_dim()) return false;
  const std::size_t layers = arch.size() - 1;
  if (layers < min_layers_ || layers > max_layers_) return false;
  for (std::size_t i = 1; i + 1 < arch.size(); ++i) {
    if (!std::binary_search(sizes_.begin(), sizes_.end(), arch[i])) return false;
  }
  return true;
}

FcOfFcSample fc_of_fc_walk(const FcOfFcDag& dag, std::span<const std::size_t> choice) {
  if (choice.size() != dag.nodes().size()) throw DimensionError("fc_of_fc_walk: one choice per node required");
  FcOfFcSample out;
  std::size_t v = dag.sink();
  while (v != dag.source()) {
    const auto& in = dag.nodes()[v].in_edges;
    const std::size_t k = in.size() > 1 ? choice[v] : 0;
    if (k >= in.size()) throw BoundsError(static_cast<std::int64_t>(k), in.size());
    out.path.push_back(in[k]);
    v = dag.edges()[in[k]].from;
  }
  std::reverse(out.path.begin(), out.path.end());
  out.sizes = dag.path_sizes(out.path);
  return out;
}

FcOfFcSample fc_of_fc_hard_sample(const FcOfFcDag& dag, const std::vector<ag::Tensor>& theta, Rng& rng) {
  std::vector<std::size_t> choice(dag.nodes().size(), 0);
  for (std::size_t v = 0; v < dag.nodes().size(); ++v) {
    if (dag.nodes()[v].in_edges.size() <= 1) continue;
    if (theta.at(v).size() != dag.nodes()[v].in_edges.size()) throw DimensionError("theta size differs from fan-in");
    choice[v] = hard_sample(theta[v].values(), rng).index;
  }
  return fc_of_fc_walk(dag, choice);
}

ag::Tensor fc_of_fc_expected_cost(const FcOfFcDag& dag, std::span<const double> edge_costs,
                                  const std::vector<ag::Tensor>& edge_probs) {
  const auto& nodes = dag.nodes();
  const auto& edges = dag.edges();
  if (edge_costs.size() != edges.size()) throw DimensionError("fc_of_fc_expected_cost: one cost per edge required");
  if (edge_probs.size() != nodes.size()) throw DimensionError("fc_of_fc_expected_cost: one entry per node required");

  // q[e]: probability that edge e is the chosen input of its target node.
  std::vector<double> q(edges.size(), 1.0);
  std::vector<ag::Tensor> inputs;
  std::vector<std::size_t> input_node;
  for (std::size_t v = 0; v < nodes.size(); ++v) {
    const auto& in = nodes[v].in_edges;
    if (in.size() <= 1) continue;
    const ag::Tensor& p = edge_probs[v];
    if (!p.defined() || p.size() != in.size()) {
      throw DimensionError("fc_of_fc_expected_cost: probabilities for node " + std::to_string(v) +
                           " must cover its " + std::to_string(in.size()) + " inputs");
    }
    for (std::size_t k = 0; k < in.size(); ++k) q[in[k]] = p.at(k);
    inputs.push_back(p);
    input_node.push_back(v);
  }
  // W[v]: expected cost of the backward walk from v to the source.
  std::vector<double> w(nodes.size(), 0.0);
  for (std::size_t v = 1; v < nodes.size(); ++v) {
    for (std::size_t e : nodes[v].in_edges) w[v] += q[e] * (edge_costs[e] + w[edges[e].from]);
  }
  const double total = w[dag.sink()];
  std::vector<double> costs(edge_costs.begin(), edge_costs.end());
  return ag::make_result(
      {}, {total}, inputs,
      [dag, q = std::move(q), w = std::move(w), costs = std::move(costs),
       input_node = std::move(input_node)](const ag::BackwardContext& ctx) {
        const auto& nodes = dag.nodes();
        const auto& edges = dag.edges();
        // visit probabilities, sink first
        std::vector<double> visit(nodes.size(), 0.0);
        visit[dag.sink()] = 1.0;
        for (std::size_t v = nodes.size(); v-- > 1;) {
          for (std::size_t e : nodes[v].in_edges) visit[edges[e].from] += visit[v] * q[e];
        }
        const double g = ctx.out_grad()[0];
        for (std::size_t i = 0; i < input_node.size(); ++i) {
          auto gi = ctx.input_grad(i);
          if (gi.empty()) continue;
          const std::size_t v = input_node[i];
          const auto& in = nodes[v].in_edges;
          for (std::size_t k = 0; k < in.size(); ++k) {
            gi[k] += g * visit[v] * (costs[in[k]] + w[edges[in[k]].from]);
          }
        }
      },
      "fc_of_fc_expected_cost");
}

FcOfFcSupernet::FcOfFcSupernet(FcOfFcDag dag, ag::Activation sink_activation, const CostModel& cost, Rng& rng,
                               const std::string& name)
    : dag_(std::move(dag)), sink_act_(sink_activation) {
  const auto& nodes = dag_.nodes();
  const auto& edges = dag_.edges();
  weights_.resize(edges.size());
  biases_.resize(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const std::size_t in = nodes[edges[e].from].size, out = nodes[edges[e].to].size;
    if (edges[e].skip) {
      edge_costs_.push_back(cost(SkipOp{in}));
      continue;
    }
    edge_costs_.push_back(cost(FcOp{in, out}));
    const std::string prefix = name + ".e" + std::to_string(e);
    weights_[e] = init_fc_weight(prefix + ".weight", in, out, rng);
    biases_[e] = init_fc_bias(prefix + ".bias", out, rng);
  }
  node_theta_.resize(nodes.size());
  for (std::size_t v : dag_.decision_nodes()) {
    const std::string label = v == dag_.sink() ? std::string("sink")
                                               : "p" + std::to_string(nodes[v].position) + "_" +
                                                     std::to_string(nodes[v].size);
    NamedTensor t{name + "." + label, ag::Tensor::zeros({nodes[v].in_edges.size()}, true)};
    node_theta_[v] = t.tensor;
    thetas_.push_back(std::move(t));
  }
}

ag::Tensor FcOfFcSupernet::forward(const ag::Tensor& x, const SamplingContext& ctx) {
  if (x.rank() != 2 || x.dim(1) != input_dim()) {
    throw DimensionError("FC-of-FC expects [batch x " + std::to_string(input_dim()) + "], got " +
                         ag::shape_string(x.shape()));
  }
  const auto& nodes = dag_.nodes();
  const auto& edges = dag_.edges();
  const std::size_t batch = x.dim(0);
  std::vector<ag::Tensor> value(nodes.size());
  std::vector<ag::Tensor> probs(nodes.size());
  value[0] = x;
  for (std::size_t v = 1; v < nodes.size(); ++v) {
    const ag::Activation act = v == dag_.sink() ? sink_act_ : ag::Activation::kRelu;
    std::vector<ag::Tensor> outs;
    outs.reserve(nodes[v].in_edges.size());
    for (std::size_t e : nodes[v].in_edges) {
      const ag::Tensor& src = value[edges[e].from];
      outs.push_back(edges[e].skip ? src : ag::fc_layer(src, weights_[e].tensor, biases_[e].tensor, act));
    }
    if (outs.size() == 1) {
      value[v] = outs[0];
      continue;
    }
    SampleWeights sw = soft_sample(node_theta_[v], batch, ctx);
    value[v] = weighted_sum(sw, outs);
    probs[v] = ag::mean_rows(sw.weights);
  }
  curr_cost_ = fc_of_fc_expected_cost(dag_, edge_costs_, probs);
  return value[dag_.sink()];
}

std::vector<NamedTensor> FcOfFcSupernet::parameters() const {
  std::vector<NamedTensor> out;
  for (std::size_t e = 0; e < weights_.size(); ++e) {
    if (dag_.edges()[e].skip) continue;
    out.push_back(weights_[e]);
    out.push_back(biases_[e]);
  }
  return out;
}

ag::Tensor FcOfFcSupernet::expected_cost() const {
  std::vector<ag::Tensor> probs(dag_.nodes().size());
  for (std::size_t v : dag_.decision_nodes()) probs[v] = ag::softmax(node_theta_[v]);
  return fc_of_fc_expected_cost(dag_, edge_costs_, probs);
}

FcOfFcSample FcOfFcSupernet::hard_sample(Rng& rng) const { return fc_of_fc_hard_sample(dag_, node_theta_, rng); }

}  // namespace dnas
