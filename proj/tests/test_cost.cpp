#include <gtest/gtest.h>

#include <cmath>

#include "dnas/autograd/ops.hpp"
#include "dnas/cost.hpp"
#include "dnas/errors.hpp"
#include "dnas/search_spaces.hpp"

using dnas::ag::Tensor;
namespace ag = dnas::ag;

TEST(OpCost, PerMetricConventions) {
  EXPECT_EQ(dnas::op_cost(dnas::EmbeddingDimOp{20000, 32}, dnas::CostMetric::kEmbeddingParams), 640000.0);
  const auto hs = dnas::hash_size_options(1351240, std::vector<double>{1.0, 0.1});
  EXPECT_EQ(hs[1], 135124u);
  EXPECT_EQ(dnas::op_cost(dnas::HashSizeOp{hs[1], 32}, dnas::CostMetric::kCategories), 135124.0);
  EXPECT_EQ(dnas::op_cost(dnas::SkipOp{64}, dnas::CostMetric::kFlops), 0.0);
  EXPECT_EQ(dnas::op_cost(dnas::FcOp{13, 512}, dnas::CostMetric::kFlops), 2.0 * 13 * 512);
  EXPECT_THROW(dnas::op_cost(dnas::FcOp{1, 1}, dnas::CostMetric::kCategories), dnas::CostTableError);
}

TEST(OpCost, LatencyTableLookup) {
  const auto table = dnas::CostTable::parse("# comment\nfc:16x32 0.25\n\nskip:16 0\n");
  EXPECT_EQ(table.size(), 2u);
  EXPECT_EQ(dnas::op_cost(dnas::FcOp{16, 32}, dnas::CostMetric::kLatencyTable, &table), 0.25);
  EXPECT_EQ(dnas::op_cost(dnas::SkipOp{16}, dnas::CostMetric::kLatencyTable, &table), 0.0);
  EXPECT_THROW(dnas::op_cost(dnas::FcOp{32, 16}, dnas::CostMetric::kLatencyTable, &table), dnas::CostTableError);
  EXPECT_THROW(dnas::op_cost(dnas::FcOp{32, 16}, dnas::CostMetric::kLatencyTable), dnas::CostTableError);
}

TEST(OpCost, LatencyTableParseErrorsCarryLine) {
  try {
    dnas::CostTable::parse("fc:1x1 1\nfc:2x2\n");
    FAIL();
  } catch (const dnas::ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(dnas::CostTable::parse("fc:1x1 -3\n"), dnas::ParseError);
  EXPECT_THROW(dnas::CostTable::load("/nonexistent/latency.txt"), dnas::IoError);
  EXPECT_EQ(dnas::operator_id(dnas::EmbeddingDimOp{7, 3}), "emb:7x3");
  EXPECT_EQ(dnas::operator_id(dnas::HashSizeOp{5, 2}), "hash:5x2");
}

TEST(ExpectedCost, HandExpectation) {
  const std::vector<dnas::CostLayer> layers{{Tensor::from_values({2}, {0.5, 0.5}), {10, 20}},
                                            {Tensor::from_values({2}, {1, 0}), {3, 7}}};
  EXPECT_DOUBLE_EQ(dnas::expected_cost(layers).item(), 18.0);
}

TEST(ExpectedCost, OneHotGivesSelectedArchitectureCost) {
  dnas::Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<dnas::CostLayer> layers;
    double brute = 0.0;
    for (int l = 0; l < 4; ++l) {
      const std::size_t n = 2 + rng.below(4);
      const std::size_t pick = rng.below(n);
      std::vector<double> p(n, 0.0), c(n);
      p[pick] = 1.0;
      for (double& x : c) x = std::floor(rng.uniform(0, 1000));
      brute += c[pick];
      layers.push_back({Tensor::from_values({n}, p), c});
    }
    EXPECT_EQ(dnas::expected_cost(layers).item(), brute);
  }
}

TEST(ExpectedCost, UniformOverEqualCosts) {
  std::vector<dnas::CostLayer> layers;
  for (int l = 0; l < 3; ++l) layers.push_back({Tensor::from_values({4}, {0.25, 0.25, 0.25, 0.25}), {5, 5, 5, 5}});
  EXPECT_DOUBLE_EQ(dnas::expected_cost(layers).item(), 15.0);
  EXPECT_EQ(dnas::expected_cost({}).item(), 0.0);
}

TEST(ExpectedCost, MonotoneInEachOperatorCost) {
  dnas::Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> p(5), c(5);
    double z = 0.0;
    for (double& x : p) z += (x = rng.uniform());
    for (double& x : p) x /= z;
    for (double& x : c) x = rng.uniform(0, 100);
    const Tensor pt = Tensor::from_values({5}, p);
    const double before = dnas::expected_cost({{pt, c}}).item();
    c[rng.below(5)] += rng.uniform(0, 10);
    EXPECT_GE(dnas::expected_cost({{pt, c}}).item(), before);
  }
}

TEST(ExpectedCost, GradientReachesThetaThroughSoftmax) {
  Tensor theta = Tensor::from_values({3}, {0.1, -0.2, 0.3}, true);
  const Tensor c = dnas::expected_cost({{ag::softmax(theta), {1, 2, 4}}});
  c.backward();
  for (double g : theta.grad()) EXPECT_NE(g, 0.0);
}

TEST(TotalLoss, HandValues) {
  const Tensor task = Tensor::scalar(0.5);
  const Tensor e = Tensor::scalar(std::exp(1.0));
  dnas::LossConfig off;
  EXPECT_EQ(dnas::total_loss(task, e, off).item(), 0.5);

  dnas::LossConfig expo;
  expo.use_hw_cost = true;
  expo.exponential_cost = true;
  expo.cost_coef = 1.0;
  expo.cost_exp = 1.0;
  EXPECT_NEAR(dnas::total_loss(task, e, expo).item(), 0.5, 1e-15);

  dnas::LossConfig lin;
  lin.use_hw_cost = true;
  lin.cost_coef = 0.1;
  EXPECT_NEAR(dnas::total_loss(task, e, lin).item(), 0.6, 1e-15);
}

TEST(TotalLoss, MultiplierLiftsSubUnitCostsToZeroPenalty) {
  dnas::LossConfig lin;
  lin.use_hw_cost = true;
  lin.cost_coef = 1.0;
  lin.cost_multiplier = 1000.0;
  const double l = dnas::total_loss(Tensor::scalar(0.5), Tensor::scalar(0.001), lin).item();
  // ln(1) = 0, up to the 1 + 1e-6 floor
  EXPECT_NEAR(l, 0.5, 1e-5);
}

TEST(TotalLoss, ClampAndDomainErrors) {
  dnas::LossConfig lin;
  lin.use_hw_cost = true;
  lin.cost_coef = 1.0;
  const double l = dnas::total_loss(Tensor::scalar(0.5), Tensor::scalar(0.2), lin).item();
  EXPECT_NEAR(l, 0.5 + std::log(dnas::kMinLogCostArgument), 1e-15);
  EXPECT_THROW(dnas::total_loss(Tensor::scalar(0.5), Tensor::scalar(0.0), lin), dnas::DomainError);
  EXPECT_THROW(dnas::total_loss(Tensor::scalar(0.5), Tensor::scalar(-1.0), lin), dnas::DomainError);
  lin.cost_multiplier = 0.0;
  EXPECT_THROW(dnas::total_loss(Tensor::scalar(0.5), Tensor::scalar(5.0), lin), dnas::ConfigError);
}

TEST(TotalLoss, ExponentialFormMultipliesTaskLoss) {
  dnas::LossConfig expo;
  expo.use_hw_cost = true;
  expo.exponential_cost = true;
  expo.cost_coef = 0.5;
  expo.cost_exp = 2.0;
  const double c = 100.0;
  const double expect = 0.4 * 0.5 * std::pow(std::log(c), 2.0);
  EXPECT_NEAR(dnas::total_loss(Tensor::scalar(0.4), Tensor::scalar(c), expo).item(), expect, 1e-12);
}

TEST(TotalLoss, CostGradientReachesThetaWhenCostsDiffer) {
  for (bool exponential : {false, true}) {
    Tensor theta = Tensor::from_values({3}, {0.0, 0.5, -0.5}, true);
    const Tensor cost = dnas::expected_cost({{ag::softmax(theta), {100, 200, 400}}});
    dnas::LossConfig cfg;
    cfg.use_hw_cost = true;
    cfg.exponential_cost = exponential;
    cfg.cost_coef = 0.3;
    cfg.cost_exp = 1.5;
    dnas::total_loss(Tensor::scalar(0.7), cost, cfg).backward();
    double mag = 0.0;
    for (double g : theta.grad()) mag += std::abs(g);
    EXPECT_GT(mag, 0.0);
  }
}

TEST(CostMetric, NamesRoundTrip) {
  for (auto m : {dnas::CostMetric::kFlops, dnas::CostMetric::kEmbeddingParams, dnas::CostMetric::kCategories,
                 dnas::CostMetric::kLatencyTable}) {
    EXPECT_EQ(dnas::parse_cost_metric(dnas::cost_metric_name(m)), m);
  }
  EXPECT_THROW(dnas::parse_cost_metric("watts"), dnas::ConfigError);
}
