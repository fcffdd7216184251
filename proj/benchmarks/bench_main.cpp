#include <benchmark/benchmark.h>

#include <string>

#include "dnas/autograd/ops.hpp"
#include "dnas/data.hpp"
#include "dnas/search.hpp"
#include "dnas/search_spaces.hpp"

namespace ag = dnas::ag;
using dnas::ag::Tensor;

namespace {

Tensor random_tensor(dnas::Rng& rng, ag::Shape shape, bool grad) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal() * 0.1;
  return Tensor::from_values(shape, v, grad);
}

void BM_FcLayerForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  dnas::Rng rng(1);
  const Tensor x = random_tensor(rng, {128, n}, false);
  const Tensor w = random_tensor(rng, {n, n}, true);
  const Tensor b = random_tensor(rng, {n}, true);
  for (auto _ : state) {
    ag::sum(ag::fc_layer(x, w, b, ag::Activation::kRelu)).backward();
    benchmark::DoNotOptimize(w.grad().data());
  }
  state.SetItemsProcessed(state.iterations() * 128);
}
BENCHMARK(BM_FcLayerForwardBackward)->Arg(32)->Arg(128)->Arg(512);

void BM_DotInteractions(benchmark::State& state) {
  dnas::Rng rng(2);
  const Tensor f = random_tensor(rng, {128, 27, static_cast<std::size_t>(state.range(0))}, true);
  for (auto _ : state) ag::sum(ag::dot_interactions(f, false)).backward();
  state.SetItemsProcessed(state.iterations() * 128);
}
BENCHMARK(BM_DotInteractions)->Arg(16)->Arg(64);

void BM_SoftSample(benchmark::State& state) {
  dnas::Rng rng(3);
  const Tensor theta = random_tensor(rng, {static_cast<std::size_t>(state.range(0))}, true);
  const dnas::SamplingContext ctx{0.5, &rng, false};
  for (auto _ : state) benchmark::DoNotOptimize(dnas::soft_sample(theta, 128, ctx).weights.values().data());
}
BENCHMARK(BM_SoftSample)->Arg(4)->Arg(16);

void BM_FcOfFcExpectedCost(benchmark::State& state) {
  const auto dag = dnas::FcOfFcDag::build(13, 64, {128, 256, 512, 1024}, 2, static_cast<std::size_t>(state.range(0)));
  std::vector<double> costs(dag.edges().size(), 1.0);
  std::vector<Tensor> probs(dag.nodes().size());
  for (std::size_t v : dag.decision_nodes()) {
    const std::size_t k = dag.nodes()[v].in_edges.size();
    probs[v] = Tensor::from_values({k}, std::vector<double>(k, 1.0 / static_cast<double>(k)));
  }
  for (auto _ : state) benchmark::DoNotOptimize(dnas::fc_of_fc_expected_cost(dag, costs, probs).item());
}
BENCHMARK(BM_FcOfFcExpectedCost)->Arg(3)->Arg(5);

// One weight step of a cardinality-search supernet on a Criteo-shaped batch.
void BM_DnasWeightStep(benchmark::State& state) {
  dnas::data::SynthSpec spec;
  spec.num_records = 2048;
  for (int i = 0; i < 13; ++i) spec.dense.push_back({dnas::data::FeatureRole::kSignal, 0.3, false});
  for (int i = 0; i < 26; ++i) spec.sparse.push_back({1000, dnas::data::FeatureRole::kSignal, 0.3});
  const auto synth = dnas::data::synthesize(spec);
  dnas::DlrmSupernetConfig cfg;
  cfg.group = dnas::parse_search_group(state.range(0) == 0 ? "emb_card" : state.range(0) == 1 ? "emb_dim" : "mlp");
  cfg.cardinalities.assign(26, 1000);
  if (cfg.group == dnas::SearchGroup::kEmbDim) cfg.bottom_mlp.back() = cfg.dim_options.back();
  dnas::DlrmSupernet net(cfg);
  dnas::SearchConfig search;
  auto opts = dnas::make_optimizers(net, search);
  dnas::data::DataLoader loader(dnas::data::DatasetView::all(synth.data), 128, 1);
  dnas::Rng rng(4);
  std::size_t step = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        dnas::run_one_dnas_step(loader.next(), dnas::Phase::kWeights, net, opts, search, {1.0, &rng, false}, step++)
            .task_loss);
  }
  state.SetItemsProcessed(state.iterations() * 128);
  state.SetLabel(std::string(dnas::search_group_name(cfg.group)));
}
BENCHMARK(BM_DnasWeightStep)->Arg(0)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

void BM_ParseCriteo(benchmark::State& state) {
  std::string text;
  for (int r = 0; r < 1000; ++r) {
    text += std::to_string(r % 2);
    for (int d = 0; d < 13; ++d) text += "\t" + std::to_string(r * 7 + d);
    for (int c = 0; c < 26; ++c) text += "\t68fd1e" + std::to_string(10 + (r + c) % 90);
    text += "\n";
  }
  for (auto _ : state) benchmark::DoNotOptimize(dnas::data::parse_criteo(text).size());
  state.SetItemsProcessed(state.iterations() * 1000);
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(text.size()));
}
BENCHMARK(BM_ParseCriteo);

}  // namespace

BENCHMARK_MAIN();
