#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <set>

#include "dnas/autograd/ops.hpp"
#include "dnas/errors.hpp"
#include "dnas/search_spaces.hpp"

using dnas::FcOfFcDag;
using dnas::ag::Tensor;
namespace ag = dnas::ag;

namespace {

// Every source->sink edge path, enumerated backwards from the sink.
std::vector<std::vector<std::size_t>> all_paths(const FcOfFcDag& dag) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> stack;
  std::function<void(std::size_t)> rec = [&](std::size_t v) {
    if (v == dag.source()) {
      out.emplace_back(stack.rbegin(), stack.rend());
      return;
    }
    for (std::size_t e : dag.nodes()[v].in_edges) {
      stack.push_back(e);
      rec(dag.edges()[e].from);
      stack.pop_back();
    }
  };
  rec(dag.sink());
  return out;
}

std::set<std::vector<std::size_t>> architectures(const FcOfFcDag& dag) {
  std::set<std::vector<std::size_t>> out;
  for (const auto& p : all_paths(dag)) out.insert(dag.path_sizes(p));
  return out;
}

std::size_t fc_edges(const FcOfFcDag& dag, const std::vector<std::size_t>& path) {
  std::size_t n = 0;
  for (std::size_t e : path) n += dag.edges()[e].skip ? 0 : 1;
  return n;
}

// P(edge chosen at its target) from per-node probabilities; 1 on single-input nodes.
double edge_prob(const FcOfFcDag& dag, const std::vector<std::vector<double>>& probs, std::size_t e) {
  const auto& in = dag.nodes()[dag.edges()[e].to].in_edges;
  if (in.size() == 1) return 1.0;
  for (std::size_t k = 0; k < in.size(); ++k) {
    if (in[k] == e) return probs[dag.edges()[e].to][k];
  }
  return 0.0;
}

std::vector<std::vector<double>> random_probs(const FcOfFcDag& dag, dnas::Rng& rng) {
  std::vector<std::vector<double>> probs(dag.nodes().size());
  for (std::size_t v : dag.decision_nodes()) {
    auto& p = probs[v];
    double z = 0.0;
    for (std::size_t k = 0; k < dag.nodes()[v].in_edges.size(); ++k) z += p.emplace_back(rng.uniform(0.05, 1.0));
    for (double& x : p) x /= z;
  }
  return probs;
}

std::vector<Tensor> as_tensors(const std::vector<std::vector<double>>& probs) {
  std::vector<Tensor> out(probs.size());
  for (std::size_t v = 0; v < probs.size(); ++v) {
    if (!probs[v].empty()) out[v] = Tensor::from_values({probs[v].size()}, probs[v]);
  }
  return out;
}

// in_edges index at v whose source node has the given size and position.
std::size_t choose(const FcOfFcDag& dag, std::size_t v, std::size_t from_size, std::size_t from_pos, bool skip) {
  const auto& in = dag.nodes()[v].in_edges;
  for (std::size_t k = 0; k < in.size(); ++k) {
    const auto& e = dag.edges()[in[k]];
    const auto& from = dag.nodes()[e.from];
    if (from.size == from_size && from.position == from_pos && e.skip == skip) return k;
  }
  ADD_FAILURE() << "no such edge into node " << v;
  return 0;
}

std::size_t node_of(const FcOfFcDag& dag, std::size_t size, std::size_t pos) {
  for (std::size_t v = 0; v < dag.nodes().size(); ++v) {
    if (dag.nodes()[v].size == size && dag.nodes()[v].position == pos) return v;
  }
  ADD_FAILURE() << "no node " << size << "@" << pos;
  return 0;
}

}  // namespace

TEST(FcOfFcDag, FourteenArchitecturesForSmallDag) {
  const auto dag = FcOfFcDag::build(10, 50, {16, 32}, 2, 4);
  const auto archs = architectures(dag);
  EXPECT_EQ(archs.size(), 14u);  // 2 + 4 + 8
  std::size_t by_layers[5] = {0, 0, 0, 0, 0};
  for (const auto& a : archs) ++by_layers[a.size() - 1];
  EXPECT_EQ(by_layers[2], 2u);
  EXPECT_EQ(by_layers[3], 4u);
  EXPECT_EQ(by_layers[4], 8u);
}

TEST(FcOfFcDag, SingleSizeTwoLayersHasOneArchitecture) {
  const auto dag = FcOfFcDag::build(10, 50, {16}, 2, 2);
  const auto archs = architectures(dag);
  ASSERT_EQ(archs.size(), 1u);
  EXPECT_EQ(*archs.begin(), (std::vector<std::size_t>{10, 16, 50}));
  EXPECT_TRUE(dag.decision_nodes().empty());
}

TEST(FcOfFcDag, ConfigurationErrors) {
  EXPECT_THROW(FcOfFcDag::build(10, 50, {16}, 1, 1), dnas::ConfigError);
  EXPECT_THROW(FcOfFcDag::build(10, 50, {16}, 3, 2), dnas::ConfigError);
  EXPECT_THROW(FcOfFcDag::build(10, 50, {16}, 0, 2), dnas::ConfigError);
  EXPECT_THROW(FcOfFcDag::build(10, 50, {}, 2, 3), dnas::ConfigError);
}

TEST(FcOfFcDag, CriteoBottomSearchSpaceShape) {
  // sizes 128..1024 with up to 5 layers
  const auto dag = FcOfFcDag::build(13, 64, {128, 256, 512, 1024}, 2, 5);
  const auto archs = architectures(dag);
  EXPECT_EQ(archs.size(), 4u + 16u + 64u + 256u);
  for (const auto& a : archs) EXPECT_TRUE(dag.admits(a));
}

class DagShapes : public ::testing::TestWithParam<std::tuple<std::vector<std::size_t>, std::size_t, std::size_t>> {};

TEST_P(DagShapes, StructuralInvariants) {
  const auto& [sizes, lo, hi] = GetParam();
  const auto dag = FcOfFcDag::build(7, 3, sizes, lo, hi);
  for (std::size_t v = 0; v < dag.nodes().size(); ++v) {
    if (v != dag.source()) EXPECT_GE(dag.nodes()[v].in_edges.size(), 1u) << v;
    if (v != dag.sink()) EXPECT_GE(dag.nodes()[v].out_edges.size(), 1u) << v;
  }
  for (const auto& e : dag.edges()) {
    EXPECT_LT(e.from, e.to);  // indices are topological
    if (e.skip) EXPECT_EQ(dag.nodes()[e.from].size, dag.nodes()[e.to].size);
  }
  std::size_t expect_archs = 0, pow = 1;
  for (std::size_t l = 1; l <= hi; ++l) {
    if (l >= 2) pow *= sizes.size();
    if (l >= lo) expect_archs += pow;
  }
  const auto paths = all_paths(dag);
  for (const auto& p : paths) {
    const std::size_t n = fc_edges(dag, p);
    EXPECT_GE(n, lo);
    EXPECT_LE(n, hi);
    EXPECT_TRUE(dag.admits(dag.path_sizes(p)));
  }
  EXPECT_EQ(architectures(dag).size(), expect_archs);
}

TEST_P(DagShapes, PathProbabilitiesSumToOne) {
  const auto& [sizes, lo, hi] = GetParam();
  const auto dag = FcOfFcDag::build(7, 3, sizes, lo, hi);
  if (dag.nodes().size() > 20) GTEST_SKIP() << "brute force limited to small DAGs";
  dnas::Rng rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    const auto probs = random_probs(dag, rng);
    double total = 0.0;
    for (const auto& p : all_paths(dag)) {
      double pr = 1.0;
      for (std::size_t e : p) pr *= edge_prob(dag, probs, e);
      total += pr;
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

INSTANTIATE_TEST_SUITE_P(
    Grid, DagShapes,
    ::testing::Values(std::make_tuple(std::vector<std::size_t>{16}, 2u, 2u),
                      std::make_tuple(std::vector<std::size_t>{16, 32}, 2u, 4u),
                      std::make_tuple(std::vector<std::size_t>{4, 8, 12}, 2u, 3u),
                      std::make_tuple(std::vector<std::size_t>{4, 8, 12}, 3u, 3u),
                      std::make_tuple(std::vector<std::size_t>{4, 8}, 1u, 3u),
                      std::make_tuple(std::vector<std::size_t>{5}, 2u, 6u),
                      std::make_tuple(std::vector<std::size_t>{4, 8, 12, 16}, 2u, 5u)));

TEST(FcOfFcWalk, ForcedMaxLengthChain) {
  const auto dag = FcOfFcDag::build(10, 50, {16, 32}, 2, 4);
  // chain 10 -> 32 -> 16 -> 32 -> 50 through FC edges only
  std::vector<std::size_t> choice(dag.nodes().size(), 0);
  choice[dag.sink()] = choose(dag, dag.sink(), 32, 3, false);
  choice[node_of(dag, 32, 3)] = choose(dag, node_of(dag, 32, 3), 16, 2, false);
  choice[node_of(dag, 16, 2)] = choose(dag, node_of(dag, 16, 2), 32, 1, false);
  const auto s = dnas::fc_of_fc_walk(dag, choice);
  EXPECT_EQ(s.sizes, (std::vector<std::size_t>{10, 32, 16, 32, 50}));
  EXPECT_EQ(s.sizes.size() - 2, dag.max_layers() - 1);
}

TEST(FcOfFcWalk, HandBackwardWalkThroughSkips) {
  const auto dag = FcOfFcDag::build(10, 50, {16, 32}, 2, 4);
  std::vector<std::size_t> choice(dag.nodes().size(), 0);
  choice[dag.sink()] = choose(dag, dag.sink(), 16, 3, false);
  choice[node_of(dag, 16, 3)] = choose(dag, node_of(dag, 16, 3), 16, 2, true);
  choice[node_of(dag, 16, 2)] = choose(dag, node_of(dag, 16, 2), 16, 1, true);
  const auto s = dnas::fc_of_fc_walk(dag, choice);
  EXPECT_EQ(s.sizes, (std::vector<std::size_t>{10, 16, 50}));
  EXPECT_EQ(s.path.size(), 4u);
}

TEST(FcOfFcHardSample, TenThousandSamplesAreAllLegal) {
  const auto dag = FcOfFcDag::build(10, 50, {16, 32}, 2, 4);
  const auto legal = architectures(dag);
  dnas::Rng rng(3);
  std::vector<Tensor> theta(dag.nodes().size());
  for (std::size_t v : dag.decision_nodes()) {
    std::vector<double> t(dag.nodes()[v].in_edges.size());
    for (double& x : t) x = rng.normal();
    theta[v] = Tensor::from_values({t.size()}, t);
  }
  std::set<std::vector<std::size_t>> seen;
  for (int i = 0; i < 10000; ++i) {
    const auto s = dnas::fc_of_fc_hard_sample(dag, theta, rng);
    ASSERT_TRUE(legal.count(s.sizes)) << "illegal sample";
    seen.insert(s.sizes);
  }
  EXPECT_EQ(seen.size(), legal.size());
}

TEST(FcOfFcExpectedCost, SinglePathSumsEdgeCosts) {
  const auto dag = FcOfFcDag::build(10, 50, {16}, 2, 2);
  const std::vector<double> costs{3.0, 4.0};
  const Tensor c = dnas::fc_of_fc_expected_cost(dag, costs, std::vector<Tensor>(dag.nodes().size()));
  EXPECT_DOUBLE_EQ(c.item(), 7.0);
}

TEST(FcOfFcExpectedCost, TwoParallelPathsUniformSink) {
  const auto dag = FcOfFcDag::build(10, 50, {16, 32}, 2, 2);
  std::vector<double> costs(dag.edges().size(), 0.0);
  const auto& in = dag.nodes()[dag.sink()].in_edges;
  ASSERT_EQ(in.size(), 2u);
  costs[in[0]] = 10.0;
  costs[in[1]] = 20.0;
  std::vector<Tensor> probs(dag.nodes().size());
  probs[dag.sink()] = Tensor::from_values({2}, {0.5, 0.5});
  EXPECT_DOUBLE_EQ(dnas::fc_of_fc_expected_cost(dag, costs, probs).item(), 15.0);
}

TEST(FcOfFcExpectedCost, MatchesBruteForceOverPaths) {
  dnas::Rng rng(99);
  for (const auto& [sizes, lo, hi] : {std::make_tuple(std::vector<std::size_t>{16, 32}, 2u, 4u),
                                      std::make_tuple(std::vector<std::size_t>{4, 8}, 1u, 3u),
                                      std::make_tuple(std::vector<std::size_t>{4, 8, 12}, 2u, 4u)}) {
    const auto dag = FcOfFcDag::build(10, 50, sizes, lo, hi);
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<double> costs(dag.edges().size());
      for (double& c : costs) c = rng.uniform(0.0, 100.0);
      const auto probs = random_probs(dag, rng);
      double brute = 0.0;
      for (const auto& p : all_paths(dag)) {
        double pr = 1.0, cost = 0.0;
        for (std::size_t e : p) {
          pr *= edge_prob(dag, probs, e);
          cost += costs[e];
        }
        brute += pr * cost;
      }
      EXPECT_NEAR(dnas::fc_of_fc_expected_cost(dag, costs, as_tensors(probs)).item(), brute, 1e-9);
    }
  }
}

TEST(FcOfFcExpectedCost, ProbabilityCountMismatch) {
  const auto dag = FcOfFcDag::build(10, 50, {16, 32}, 2, 2);
  std::vector<Tensor> probs(dag.nodes().size());
  probs[dag.sink()] = Tensor::from_values({3}, {0.2, 0.3, 0.5});
  EXPECT_THROW(dnas::fc_of_fc_expected_cost(dag, std::vector<double>(dag.edges().size(), 1.0), probs),
               dnas::DimensionError);
}

namespace {

dnas::FcOfFcSupernet make_supernet(FcOfFcDag dag, ag::Activation act, std::uint64_t seed) {
  dnas::Rng rng(seed);
  return dnas::FcOfFcSupernet(std::move(dag), act, dnas::CostModel{}, rng, "net");
}

Tensor random_input(std::size_t batch, std::size_t dim, dnas::Rng& rng) {
  std::vector<double> v(batch * dim);
  for (double& x : v) x = rng.normal();
  return Tensor::from_values({batch, dim}, v);
}

// Plain MLP along the path using the supernet's own edge parameters.
Tensor path_forward(const dnas::FcOfFcSupernet& net, const std::vector<std::size_t>& path, Tensor x,
                    ag::Activation sink_act) {
  for (std::size_t e : path) {
    const auto& edge = net.dag().edges()[e];
    if (edge.skip) continue;
    const auto act = edge.to == net.dag().sink() ? sink_act : ag::Activation::kRelu;
    x = ag::fc_layer(x, net.edge_weight(e).tensor, net.edge_bias(e).tensor, act);
  }
  return x;
}

}  // namespace

TEST(FcOfFcSupernet, SinglePathEqualsPlainMlp) {
  auto net = make_supernet(FcOfFcDag::build(6, 3, {5}, 2, 2), ag::Activation::kSigmoid, 1);
  dnas::Rng rng(2);
  const Tensor x = random_input(4, 6, rng);
  const auto paths = all_paths(net.dag());
  ASSERT_EQ(paths.size(), 1u);
  const Tensor y = net.forward(x, {1.0, &rng, false});
  const Tensor ref = path_forward(net, paths[0], x, ag::Activation::kSigmoid);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_DOUBLE_EQ(y.at(i), ref.at(i));
}

TEST(FcOfFcSupernet, ForcedOneHotEqualsSelectedPathMlp) {
  auto net = make_supernet(FcOfFcDag::build(6, 3, {4, 8}, 2, 4), ag::Activation::kNone, 5);
  const auto& dag = net.dag();
  dnas::Rng rng(8);
  const Tensor x = random_input(5, 6, rng);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::size_t> choice(dag.nodes().size(), 0);
    for (std::size_t v : dag.decision_nodes()) {
      choice[v] = static_cast<std::size_t>(rng.below(dag.nodes()[v].in_edges.size()));
      Tensor theta = net.node_theta()[v];
      auto vals = theta.mutable_values();
      for (std::size_t k = 0; k < vals.size(); ++k) vals[k] = k == choice[v] ? 800.0 : 0.0;
    }
    const auto walk = dnas::fc_of_fc_walk(dag, choice);
    const Tensor y = net.forward(x, {1.0, nullptr, true});
    const Tensor ref = path_forward(net, walk.path, x, ag::Activation::kNone);
    ASSERT_EQ(y.shape(), ref.shape());
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y.at(i), ref.at(i), 1e-12);
  }
}

TEST(FcOfFcSupernet, OutputShapeForAnyConfig) {
  dnas::Rng rng(4);
  for (std::size_t batch : {1u, 7u}) {
    for (std::size_t hi : {2u, 3u, 4u}) {
      auto net = make_supernet(FcOfFcDag::build(9, 2, {3, 6}, 2, hi), ag::Activation::kRelu, hi);
      const Tensor y = net.forward(random_input(batch, 9, rng), {0.5, &rng, false});
      EXPECT_EQ(y.shape(), (ag::Shape{batch, 2}));
    }
  }
}

TEST(FcOfFcSupernet, ExpectedCostMatchesBruteForceUnderSoftmax) {
  auto net = make_supernet(FcOfFcDag::build(10, 50, {16, 32}, 2, 4), ag::Activation::kNone, 9);
  const auto& dag = net.dag();
  dnas::Rng rng(10);
  std::vector<std::vector<double>> probs(dag.nodes().size());
  for (std::size_t v : dag.decision_nodes()) {
    Tensor theta = net.node_theta()[v];
    for (double& t : theta.mutable_values()) t = rng.normal();
    const Tensor p = ag::softmax(theta);
    probs[v].assign(p.values().begin(), p.values().end());
  }
  double brute = 0.0;
  for (const auto& p : all_paths(dag)) {
    double pr = 1.0, cost = 0.0;
    for (std::size_t e : p) {
      pr *= edge_prob(dag, probs, e);
      cost += net.edge_costs()[e];
    }
    brute += pr * cost;
  }
  EXPECT_NEAR(net.expected_cost().item(), brute, 1e-9 * brute);
}

TEST(FcOfFcSupernet, EdgeCostsFollowFlopConvention) {
  auto net = make_supernet(FcOfFcDag::build(10, 50, {16, 32}, 2, 3), ag::Activation::kNone, 1);
  for (std::size_t e = 0; e < net.dag().edges().size(); ++e) {
    const auto& edge = net.dag().edges()[e];
    const double expect =
        edge.skip ? 0.0 : 2.0 * net.dag().nodes()[edge.from].size * net.dag().nodes()[edge.to].size;
    EXPECT_EQ(net.edge_costs()[e], expect);
  }
}

TEST(FcOfFcSupernet, ForwardRecordsCurrentCostAndGradientsReachTheta) {
  auto net = make_supernet(FcOfFcDag::build(4, 2, {3, 5}, 2, 3), ag::Activation::kNone, 2);
  dnas::Rng rng(6);
  EXPECT_FALSE(net.current_cost().has_value());
  const Tensor y = net.forward(random_input(8, 4, rng), {1.0, &rng, false});
  ASSERT_TRUE(net.current_cost().has_value());
  EXPECT_GT(net.current_cost()->item(), 0.0);
  ag::add(ag::sum(y), *net.current_cost()).backward();
  for (const auto& t : net.arch_parameters()) {
    double mag = 0.0;
    for (double g : t.tensor.grad()) mag += std::abs(g);
    EXPECT_GT(mag, 0.0) << t.name;
  }
}
