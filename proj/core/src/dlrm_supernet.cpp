#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include "dnas/autograd/ops.hpp"
#include "dnas/errors.hpp"
#include "dnas/search_spaces.hpp"
#include "json.hpp"

namespace dnas {

using nlohmann::json;

namespace {

constexpr int kDescriptorVersion = 1;

std::vector<std::size_t> prepend(std::size_t first, const std::vector<std::size_t>& rest) {
  std::vector<std::size_t> out{first};
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "-" : "") + std::to_string(v[i]);
  return out;
}

std::size_t interaction_dim(const DlrmSupernetConfig& c) {
  switch (c.group) {
    case SearchGroup::kMlp: return c.embedding_dim;
    case SearchGroup::kEmbDim: return *std::max_element(c.dim_options.begin(), c.dim_options.end());
    case SearchGroup::kEmbCard: return c.embedding_dim;
  }
  return c.embedding_dim;
}

std::size_t top_input(const DlrmSupernetConfig& c, std::size_t d) {
  return top_mlp_input_dim(c.cardinalities.size(), d, d, c.include_diag);
}

FcOfFcDag bottom_dag(const DlrmSupernetConfig& c) {
  return FcOfFcDag::build(c.num_dense, c.embedding_dim, c.bottom_search.sizes, c.bottom_search.min_layers,
                          c.bottom_search.max_layers);
}

FcOfFcDag top_dag(const DlrmSupernetConfig& c) {
  return FcOfFcDag::build(top_input(c, c.embedding_dim), 1, c.top_search.sizes, c.top_search.min_layers,
                          c.top_search.max_layers);
}

json settings_to_json(const FcOfFcSettings& s) {
  return {{"sizes", s.sizes}, {"min_layers", s.min_layers}, {"max_layers", s.max_layers}};
}

FcOfFcSettings settings_from_json(const json& j) {
  FcOfFcSettings s;
  s.sizes = j.at("sizes").get<std::vector<std::size_t>>();
  s.min_layers = j.at("min_layers").get<std::size_t>();
  s.max_layers = j.at("max_layers").get<std::size_t>();
  return s;
}

}  // namespace

CostMetric DlrmSupernetConfig::effective_metric() const {
  if (metric) return *metric;
  switch (group) {
    case SearchGroup::kMlp: return CostMetric::kFlops;
    case SearchGroup::kEmbDim: return CostMetric::kEmbeddingParams;
    case SearchGroup::kEmbCard: return CostMetric::kCategories;
  }
  return CostMetric::kFlops;
}

std::shared_ptr<const CostTable> DlrmSupernetConfig::cost_table() const {
  if (effective_metric() != CostMetric::kLatencyTable) return nullptr;
  if (latency_table_path.empty()) throw ConfigError("latency_table metric needs a latency table file");
  return std::make_shared<const CostTable>(CostTable::load(latency_table_path));
}

void DlrmSupernetConfig::validate() const {
  for (SearchGroup g : extra_groups) {
    if (g != group) {
      throw ConfigError("only one component group may be searched at a time (got " +
                        std::string(search_group_name(group)) + " and " + std::string(search_group_name(g)) + ")");
    }
  }
  if (num_dense == 0) throw ConfigError("need at least one dense feature");
  if (cardinalities.empty()) throw ConfigError("need at least one sparse feature");
  for (std::size_t c : cardinalities) {
    if (c == 0) throw ConfigError("sparse cardinalities must be positive");
  }
  if (bottom_mlp.empty()) throw ConfigError("bottom MLP needs at least an output layer");
  if (top_mlp.empty() || top_mlp.back() != 1) throw ConfigError("top MLP must end in a single output");
  for (std::size_t s : bottom_mlp) {
    if (s == 0) throw ConfigError("bottom MLP has a zero-width layer");
  }
  for (std::size_t s : top_mlp) {
    if (s == 0) throw ConfigError("top MLP has a zero-width layer");
  }
  if (embedding_dim == 0) throw ConfigError("embedding dimension must be positive");
  switch (group) {
    case SearchGroup::kMlp:
      bottom_dag(*this);
      top_dag(*this);
      break;
    case SearchGroup::kEmbDim:
      if (dim_options.empty()) throw ConfigError("emb_dim search needs dimension options");
      for (std::size_t d : dim_options) {
        if (d == 0) throw ConfigError("dimension options must be positive");
      }
      if (bottom_mlp.back() != interaction_dim(*this)) {
        throw ConfigError("bottom MLP output " + std::to_string(bottom_mlp.back()) +
                          " must equal the largest dimension option " + std::to_string(interaction_dim(*this)));
      }
      break;
    case SearchGroup::kEmbCard:
      hash_size_options(1, card_factors);
      if (bottom_mlp.back() != embedding_dim) {
        throw ConfigError("bottom MLP output " + std::to_string(bottom_mlp.back()) + " must equal embedding dim " +
                          std::to_string(embedding_dim));
      }
      break;
  }
  if (effective_metric() == CostMetric::kLatencyTable && latency_table_path.empty()) {
    throw ConfigError("latency_table metric needs a latency table file");
  }
}

std::string DlrmSupernetConfig::to_json() const {
  json j;
  j["id"] = id;
  j["group"] = search_group_name(group);
  j["num_dense"] = num_dense;
  j["cardinalities"] = cardinalities;
  j["bottom_mlp"] = bottom_mlp;
  j["top_mlp"] = top_mlp;
  j["embedding_dim"] = embedding_dim;
  j["include_diag"] = include_diag;
  j["bottom_search"] = settings_to_json(bottom_search);
  j["top_search"] = settings_to_json(top_search);
  j["dim_options"] = dim_options;
  j["card_factors"] = card_factors;
  j["metric"] = cost_metric_name(effective_metric());
  j["latency_table"] = latency_table_path;
  j["init_seed"] = init_seed;
  return j.dump();
}

DlrmSupernetConfig DlrmSupernetConfig::from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    DlrmSupernetConfig c;
    c.id = j.at("id").get<std::string>();
    c.group = parse_search_group(j.at("group").get<std::string>());
    c.num_dense = j.at("num_dense").get<std::size_t>();
    c.cardinalities = j.at("cardinalities").get<std::vector<std::size_t>>();
    c.bottom_mlp = j.at("bottom_mlp").get<std::vector<std::size_t>>();
    c.top_mlp = j.at("top_mlp").get<std::vector<std::size_t>>();
    c.embedding_dim = j.at("embedding_dim").get<std::size_t>();
    c.include_diag = j.at("include_diag").get<bool>();
    c.bottom_search = settings_from_json(j.at("bottom_search"));
    c.top_search = settings_from_json(j.at("top_search"));
    c.dim_options = j.at("dim_options").get<std::vector<std::size_t>>();
    c.card_factors = j.at("card_factors").get<std::vector<double>>();
    c.metric = parse_cost_metric(j.at("metric").get<std::string>());
    c.latency_table_path = j.value("latency_table", "");
    c.init_seed = j.at("init_seed").get<std::uint64_t>();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed supernet config: ") + e.what());
  }
}

std::string ArchDescriptor::to_json() const {
  json j;
  j["format"] = "dnas-arch";
  j["version"] = kDescriptorVersion;
  j["group"] = search_group_name(group);
  j["bottom_mlp"] = bottom_mlp;
  j["top_mlp"] = top_mlp;
  j["emb_dims"] = emb_dims;
  j["hash_sizes"] = hash_sizes;
  j["provenance"] = {{"source", source}, {"sampling_epoch", sampling_epoch}};
  j["base"] = base_config_json.empty() ? json(nullptr) : json::parse(base_config_json);
  return j.dump();
}

ArchDescriptor ArchDescriptor::from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DescriptorError("descriptor", std::string("not valid JSON: ") + e.what());
  }
  if (j.value("format", "") != "dnas-arch") throw DescriptorError("format", "not an architecture descriptor");
  if (j.value("version", 0) != kDescriptorVersion) throw DescriptorError("version", "unsupported descriptor version");
  try {
    ArchDescriptor d;
    d.group = parse_search_group(j.at("group").get<std::string>());
    d.bottom_mlp = j.at("bottom_mlp").get<std::vector<std::size_t>>();
    d.top_mlp = j.at("top_mlp").get<std::vector<std::size_t>>();
    d.emb_dims = j.at("emb_dims").get<std::vector<std::size_t>>();
    d.hash_sizes = j.at("hash_sizes").get<std::vector<std::size_t>>();
    const json& prov = j.at("provenance");
    d.source = prov.at("source").get<std::string>();
    d.sampling_epoch = prov.at("sampling_epoch").get<double>();
    if (j.contains("base") && !j["base"].is_null()) d.base_config_json = j["base"].dump();
    return d;
  } catch (const json::exception& e) {
    throw DescriptorError("descriptor", std::string("malformed: ") + e.what());
  } catch (const ConfigError& e) {
    throw DescriptorError("group", e.what());
  }
}

void ArchDescriptor::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write descriptor '" + path.string() + "'");
  out << to_json() << '\n';
  if (!out) throw IoError("write failure on '" + path.string() + "'");
}

ArchDescriptor ArchDescriptor::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open descriptor '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

bool ArchDescriptor::same_choices(const ArchDescriptor& o) const {
  return group == o.group && bottom_mlp == o.bottom_mlp && top_mlp == o.top_mlp && emb_dims == o.emb_dims &&
         hash_sizes == o.hash_sizes;
}

void validate_descriptor(const ArchDescriptor& desc, const DlrmSupernetConfig& base) {
  if (desc.group != base.group) {
    throw DescriptorError("group", "descriptor searches " + std::string(search_group_name(desc.group)) +
                                       " but the base config searches " +
                                       std::string(search_group_name(base.group)));
  }
  const std::size_t ns = base.cardinalities.size();
  switch (desc.group) {
    case SearchGroup::kMlp:
      if (!bottom_dag(base).admits(desc.bottom_mlp)) {
        throw DescriptorError("bottom_mlp", "[" + join_sizes(desc.bottom_mlp) + "] is not in the search space");
      }
      if (!top_dag(base).admits(desc.top_mlp)) {
        throw DescriptorError("top_mlp", "[" + join_sizes(desc.top_mlp) + "] is not in the search space");
      }
      break;
    case SearchGroup::kEmbDim:
      if (desc.emb_dims.size() != ns) {
        throw DescriptorError("emb_dims", "expected " + std::to_string(ns) + " entries, got " +
                                              std::to_string(desc.emb_dims.size()));
      }
      for (std::size_t i = 0; i < ns; ++i) {
        if (std::find(base.dim_options.begin(), base.dim_options.end(), desc.emb_dims[i]) == base.dim_options.end()) {
          throw DescriptorError("emb_dim[" + std::to_string(i) + "]",
                                "dimension " + std::to_string(desc.emb_dims[i]) + " is not an option");
        }
      }
      break;
    case SearchGroup::kEmbCard:
      if (desc.hash_sizes.size() != ns) {
        throw DescriptorError("hash_sizes", "expected " + std::to_string(ns) + " entries, got " +
                                                std::to_string(desc.hash_sizes.size()));
      }
      for (std::size_t i = 0; i < ns; ++i) {
        const auto opts = hash_size_options(base.cardinalities[i], base.card_factors);
        if (std::find(opts.begin(), opts.end(), desc.hash_sizes[i]) == opts.end()) {
          throw DescriptorError("hash_size[" + std::to_string(i) + "]",
                                "hash size " + std::to_string(desc.hash_sizes[i]) + " is not an option");
        }
      }
      break;
  }
}

double architecture_cost(const ArchDescriptor& desc, const DlrmSupernetConfig& base) {
  auto table = base.cost_table();
  CostModel cost{base.effective_metric(), table.get()};
  double total = 0.0;
  switch (desc.group) {
    case SearchGroup::kMlp:
      for (const auto* mlp : {&desc.bottom_mlp, &desc.top_mlp}) {
        for (std::size_t l = 0; l + 1 < mlp->size(); ++l) total += cost(FcOp{(*mlp)[l], (*mlp)[l + 1]});
      }
      break;
    case SearchGroup::kEmbDim:
      for (std::size_t i = 0; i < desc.emb_dims.size(); ++i) {
        total += cost(EmbeddingDimOp{base.cardinalities.at(i), desc.emb_dims[i]});
      }
      break;
    case SearchGroup::kEmbCard:
      for (std::size_t h : desc.hash_sizes) total += cost(HashSizeOp{h, base.embedding_dim});
      break;
  }
  return total;
}

double efficiency_metric(const ArchDescriptor& desc) {
  switch (desc.group) {
    case SearchGroup::kMlp: {
      double flops = 0.0;
      for (const auto* mlp : {&desc.bottom_mlp, &desc.top_mlp}) {
        for (std::size_t l = 0; l + 1 < mlp->size(); ++l) flops += op_cost(FcOp{(*mlp)[l], (*mlp)[l + 1]}, CostMetric::kFlops);
      }
      return flops;
    }
    case SearchGroup::kEmbDim:
      if (desc.emb_dims.empty()) return 0.0;
      return static_cast<double>(std::accumulate(desc.emb_dims.begin(), desc.emb_dims.end(), std::size_t{0})) /
             static_cast<double>(desc.emb_dims.size());
    case SearchGroup::kEmbCard:
      return static_cast<double>(std::accumulate(desc.hash_sizes.begin(), desc.hash_sizes.end(), std::size_t{0}));
  }
  return 0.0;
}

DlrmSupernet::DlrmSupernet(DlrmSupernetConfig config) : config_((config.validate(), std::move(config))), model_(build()) {}

Dlrm DlrmSupernet::build() {
  const auto& c = config_;
  Rng rng(c.init_seed);
  auto table = c.cost_table();
  const CostModel cost{c.effective_metric(), table.get()};
  const std::size_t d = interaction_dim(c);
  std::unique_ptr<MlpBlock> bottom, top;
  std::vector<std::unique_ptr<EmbeddingBlock>> embs;

  if (c.group == SearchGroup::kMlp) {
    auto b = std::make_unique<FcOfFcSupernet>(bottom_dag(c), ag::Activation::kRelu, cost, rng, "bottom");
    bottom_ = b.get();
    bottom = std::move(b);
  } else {
    bottom = std::make_unique<FixedMlp>(prepend(c.num_dense, c.bottom_mlp), ag::Activation::kRelu, rng, "bottom");
  }
  for (std::size_t i = 0; i < c.cardinalities.size(); ++i) {
    const std::string name = "emb" + std::to_string(i);
    const std::size_t card = c.cardinalities[i];
    if (c.group == SearchGroup::kEmbDim) {
      auto e = std::make_unique<EmbDimSupernet>(card, c.dim_options, cost, rng, name);
      dim_tables_.push_back(e.get());
      embs.push_back(std::move(e));
    } else if (c.group == SearchGroup::kEmbCard) {
      auto e = std::make_unique<EmbCardSupernet>(card, d, c.card_factors, cost, rng, name);
      card_tables_.push_back(e.get());
      embs.push_back(std::move(e));
    } else {
      embs.push_back(std::make_unique<PlainEmbedding>(card, card, d, d, rng, name));
    }
  }
  if (c.group == SearchGroup::kMlp) {
    auto t = std::make_unique<FcOfFcSupernet>(top_dag(c), ag::Activation::kSigmoid, cost, rng, "top");
    top_ = t.get();
    top = std::move(t);
  } else {
    top = std::make_unique<FixedMlp>(prepend(top_input(c, d), c.top_mlp), ag::Activation::kSigmoid, rng, "top");
  }
  return Dlrm(std::move(bottom), std::move(embs), std::move(top), c.include_diag);
}

ag::Tensor DlrmSupernet::forward(const data::Batch& batch, const SamplingContext& ctx) {
  return model_.forward(batch, ctx);
}

ag::Tensor DlrmSupernet::current_cost() const {
  auto c = model_.current_cost();
  return c ? *c : ag::Tensor::scalar(0.0);
}

double DlrmSupernet::expected_cost() const {
  double total = 0.0;
  if (bottom_) total += bottom_->expected_cost().item();
  if (top_) total += top_->expected_cost().item();
  for (const auto* t : dim_tables_) total += t->expected_cost().item();
  for (const auto* t : card_tables_) total += t->expected_cost().item();
  return total;
}

std::size_t DlrmSupernet::num_supernets() const {
  return (bottom_ ? 1 : 0) + (top_ ? 1 : 0) + dim_tables_.size() + card_tables_.size();
}

ArchDescriptor DlrmSupernet::sample_architecture(Rng& rng) const {
  ArchDescriptor d;
  d.group = config_.group;
  d.source = config_.id;
  d.base_config_json = config_.to_json();
  if (bottom_) d.bottom_mlp = bottom_->hard_sample(rng).sizes;
  if (top_) d.top_mlp = top_->hard_sample(rng).sizes;
  for (const auto* t : dim_tables_) d.emb_dims.push_back(t->dim_options()[t->hard_sample(rng)]);
  for (const auto* t : card_tables_) d.hash_sizes.push_back(t->hash_sizes()[t->hard_sample(rng)]);
  return d;
}

std::vector<DecisionPoint> DlrmSupernet::decision_points() const {
  std::vector<DecisionPoint> out;
  for (const auto* net : {bottom_, top_}) {
    if (!net) continue;
    const auto& dag = net->dag();
    std::size_t k = 0;
    const auto thetas = net->arch_parameters();
    for (std::size_t v : dag.decision_nodes()) {
      DecisionPoint p{thetas[k].name, {}, thetas[k].tensor};
      ++k;
      for (std::size_t e : dag.nodes()[v].in_edges) {
        const auto& edge = dag.edges()[e];
        const std::size_t from = dag.nodes()[edge.from].size;
        p.options.push_back(edge.skip ? "skip" + std::to_string(from)
                                      : std::to_string(from) + "->" + std::to_string(dag.nodes()[v].size));
      }
      out.push_back(std::move(p));
    }
  }
  for (const auto* t : dim_tables_) {
    DecisionPoint p{t->arch_parameters()[0].name, {}, t->theta()};
    for (std::size_t d : t->dim_options()) p.options.push_back(std::to_string(d));
    out.push_back(std::move(p));
  }
  for (const auto* t : card_tables_) {
    DecisionPoint p{t->arch_parameters()[0].name, {}, t->theta()};
    for (std::size_t h : t->hash_sizes()) p.options.push_back(std::to_string(h));
    out.push_back(std::move(p));
  }
  return out;
}

std::unique_ptr<DlrmSupernet> assemble_dlrm_supernet(const DlrmSupernetConfig& config) {
  return std::make_unique<DlrmSupernet>(config);
}

Dlrm build_fixed_backbone(const DlrmSupernetConfig& base, std::uint64_t seed) {
  if (base.bottom_mlp.empty() || base.top_mlp.empty()) throw ConfigError("fixed backbone needs both MLP shapes");
  Rng rng(seed);
  const std::size_t d = base.bottom_mlp.back();
  auto bottom = std::make_unique<FixedMlp>(prepend(base.num_dense, base.bottom_mlp), ag::Activation::kRelu, rng, "bottom");
  std::vector<std::unique_ptr<EmbeddingBlock>> embs;
  for (std::size_t i = 0; i < base.cardinalities.size(); ++i) {
    const std::size_t c = base.cardinalities[i];
    embs.push_back(std::make_unique<PlainEmbedding>(c, c, d, d, rng, "emb" + std::to_string(i)));
  }
  auto top = std::make_unique<FixedMlp>(prepend(top_input(base, d), base.top_mlp), ag::Activation::kSigmoid, rng, "top");
  return Dlrm(std::move(bottom), std::move(embs), std::move(top), base.include_diag);
}

Dlrm instantiate_sampled(const ArchDescriptor& desc, const DlrmSupernetConfig& base, std::uint64_t seed) {
  validate_descriptor(desc, base);
  Rng rng(seed);
  const std::size_t ns = base.cardinalities.size();
  std::unique_ptr<MlpBlock> bottom, top;
  std::vector<std::unique_ptr<EmbeddingBlock>> embs;
  switch (desc.group) {
    case SearchGroup::kMlp: {
      const std::size_t d = base.embedding_dim;
      bottom = std::make_unique<FixedMlp>(desc.bottom_mlp, ag::Activation::kRelu, rng, "bottom");
      for (std::size_t i = 0; i < ns; ++i) {
        const std::size_t c = base.cardinalities[i];
        embs.push_back(std::make_unique<PlainEmbedding>(c, c, d, d, rng, "emb" + std::to_string(i)));
      }
      top = std::make_unique<FixedMlp>(desc.top_mlp, ag::Activation::kSigmoid, rng, "top");
      break;
    }
    case SearchGroup::kEmbDim: {
      const std::size_t d = *std::max_element(desc.emb_dims.begin(), desc.emb_dims.end());
      auto bottom_sizes = prepend(base.num_dense, base.bottom_mlp);
      bottom_sizes.back() = d;
      bottom = std::make_unique<FixedMlp>(bottom_sizes, ag::Activation::kRelu, rng, "bottom");
      for (std::size_t i = 0; i < ns; ++i) {
        const std::size_t c = base.cardinalities[i];
        embs.push_back(std::make_unique<PlainEmbedding>(c, c, desc.emb_dims[i], d, rng, "emb" + std::to_string(i)));
      }
      top = std::make_unique<FixedMlp>(prepend(top_input(base, d), base.top_mlp), ag::Activation::kSigmoid, rng, "top");
      break;
    }
    case SearchGroup::kEmbCard: {
      const std::size_t d = base.embedding_dim;
      bottom = std::make_unique<FixedMlp>(prepend(base.num_dense, base.bottom_mlp), ag::Activation::kRelu, rng, "bottom");
      for (std::size_t i = 0; i < ns; ++i) {
        const std::size_t c = base.cardinalities[i];
        embs.push_back(std::make_unique<PlainEmbedding>(c, desc.hash_sizes[i], d, d, rng, "emb" + std::to_string(i)));
      }
      top = std::make_unique<FixedMlp>(prepend(top_input(base, d), base.top_mlp), ag::Activation::kSigmoid, rng, "top");
      break;
    }
  }
  return Dlrm(std::move(bottom), std::move(embs), std::move(top), base.include_diag);
}

}  // namespace dnas
