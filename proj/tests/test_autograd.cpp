#include <gtest/gtest.h>

#include <cmath>

#include "dnas/autograd/ops.hpp"
#include "dnas/errors.hpp"
#include "gradcheck.hpp"

using dnas::ag::Tensor;
namespace ag = dnas::ag;

namespace {

std::vector<double> vals(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

}  // namespace

TEST(Tensor, ShapesAndItems) {
  Tensor t = Tensor::from_values({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.dim(1), 3u);
  EXPECT_EQ(Tensor::scalar(2.5).item(), 2.5);
  EXPECT_THROW(Tensor::from_values({2, 2}, {1, 2, 3}), dnas::DimensionError);
  EXPECT_THROW(t.item(), dnas::DimensionError);
  EXPECT_THROW(t.dim(2), dnas::DimensionError);
}

TEST(Tensor, BackwardNeedsScalarOutput) {
  Tensor a = Tensor::from_values({2}, {1, 2}, true);
  EXPECT_THROW(ag::scale(a, 2.0).backward(), dnas::DimensionError);
}

TEST(Tensor, DetachAndCloneDropHistory) {
  Tensor a = Tensor::from_values({2}, {1, 2}, true);
  Tensor d = ag::scale(a, 3.0).detach();
  EXPECT_FALSE(d.requires_grad());
  EXPECT_EQ(vals(d), (std::vector<double>{3, 6}));
  Tensor c = a.clone(true);
  c.mutable_values()[0] = 9.0;
  EXPECT_EQ(a.at(0), 1.0);
}

TEST(FcLayer, IdentityWeights) {
  Tensor x = Tensor::from_values({1, 2}, {1, 0});
  Tensor w = Tensor::from_values({2, 2}, {1, 0, 0, 1});
  Tensor b = Tensor::from_values({2}, {0, 0});
  EXPECT_EQ(vals(ag::fc_layer(x, w, b, ag::Activation::kNone)), (std::vector<double>{1, 0}));
}

TEST(FcLayer, ReluClampsNegativePreactivation) {
  Tensor x = Tensor::from_values({1, 2}, {1, 2});
  Tensor w = Tensor::from_values({2, 1}, {1, 1});
  Tensor b = Tensor::from_values({1}, {-10});
  EXPECT_EQ(vals(ag::fc_layer(x, w, b, ag::Activation::kRelu)), (std::vector<double>{0}));
}

TEST(FcLayer, ShapeMismatchNamesBothShapes) {
  Tensor x = Tensor::zeros({1, 3});
  Tensor w = Tensor::zeros({2, 2});
  Tensor b = Tensor::zeros({2});
  try {
    ag::fc_layer(x, w, b, ag::Activation::kNone);
    FAIL() << "expected a dimension error";
  } catch (const dnas::DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find(ag::shape_string({1, 3})), std::string::npos) << msg;
    EXPECT_NE(msg.find(ag::shape_string({2, 2})), std::string::npos) << msg;
  }
}

TEST(EmbeddingLookup, GathersRows) {
  Tensor table = Tensor::from_values({2, 2}, {1, 1, 2, 2});
  const std::vector<std::int64_t> ids{1};
  EXPECT_EQ(vals(ag::embedding_lookup(table, ids)), (std::vector<double>{2, 2}));
}

TEST(EmbeddingLookup, DuplicateIndicesScatterAdd) {
  Tensor table = Tensor::from_values({2, 2}, {1, 1, 2, 2}, true);
  const std::vector<std::int64_t> ids{0, 0};
  Tensor out = ag::embedding_lookup(table, ids);
  ag::Graph(out).backward(std::vector<double>{1, 0, 0, 1});
  EXPECT_EQ(vals(Tensor::from_values({4}, {table.grad().begin(), table.grad().end()})),
            (std::vector<double>{1, 1, 0, 0}));
}

TEST(EmbeddingLookup, OutOfRangeCarriesIndexAndCardinality) {
  Tensor table = Tensor::zeros({3, 2});
  const std::vector<std::int64_t> ids{5};
  try {
    ag::embedding_lookup(table, ids);
    FAIL();
  } catch (const dnas::BoundsError& e) {
    EXPECT_EQ(e.index(), 5);
    EXPECT_EQ(e.cardinality(), 3u);
  }
}

TEST(DotInteractions, CriteoSizedFeatureCountGives351Pairs) {
  Tensor f = Tensor::zeros({1, 27, 2});
  EXPECT_EQ(ag::dot_interactions(f, false).dim(1), 351u);
  EXPECT_EQ(ag::dot_interactions(f, true).dim(1), 378u);
}

TEST(DotInteractions, OrthonormalRowsGiveZeros) {
  Tensor f = Tensor::from_values({1, 3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  EXPECT_EQ(vals(ag::dot_interactions(f, false)), (std::vector<double>{0, 0, 0}));
  EXPECT_EQ(vals(ag::dot_interactions(f, true)), (std::vector<double>{1, 0, 0, 1, 0, 1}));
}

TEST(DotInteractions, UpperTriangleOrder) {
  // rows a=(1,2), b=(3,4), c=(5,6): ab=11, ac=17, bc=39
  Tensor f = Tensor::from_values({1, 3, 2}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(vals(ag::dot_interactions(f, false)), (std::vector<double>{11, 17, 39}));
}

TEST(BceLoss, HandValues) {
  EXPECT_NEAR(ag::bce_loss(Tensor::from_values({1}, {0.5}), std::vector<double>{1}).item(), 0.693147, 1e-6);
  EXPECT_NEAR(ag::bce_loss(Tensor::from_values({2}, {0.9, 0.1}), std::vector<double>{1, 0}).item(), 0.105361, 1e-6);
  EXPECT_NEAR(ag::bce_loss(Tensor::from_values({1}, {1.0 - 1e-12}), std::vector<double>{1}).item(), 0.0, 1e-6);
}

TEST(BceLoss, RejectsProbabilitiesOutsideUnitInterval) {
  EXPECT_THROW(ag::bce_loss(Tensor::from_values({1}, {1.5}), std::vector<double>{1}), dnas::DomainError);
  EXPECT_THROW(ag::bce_loss(Tensor::from_values({1}, {-0.1}), std::vector<double>{0}), dnas::DomainError);
  EXPECT_THROW(ag::bce_loss(Tensor::from_values({2}, {0.5, 0.5}), std::vector<double>{1}), dnas::DimensionError);
}

TEST(BceLoss, SaturatedPredictionStaysFinite) {
  const double l = ag::bce_loss(Tensor::from_values({1}, {1.0}), std::vector<double>{0}).item();
  EXPECT_TRUE(std::isfinite(l));
  EXPECT_NEAR(l, -std::log(ag::kProbEpsilon), 1e-6);
}

TEST(Softmax, SumsToOneAndIsShiftInvariant) {
  Tensor a = ag::softmax(Tensor::from_values({3}, {1, 2, 3}));
  Tensor b = ag::softmax(Tensor::from_values({3}, {1001, 1002, 1003}));
  double s = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    s += a.at(i);
    EXPECT_NEAR(a.at(i), b.at(i), 1e-12);
  }
  EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(Autograd, FanoutAccumulatesPerPathGradients) {
  // y = a*a + 3a -> dy/da = 2a + 3
  Tensor a = Tensor::scalar(2.0, true);
  Tensor y = ag::add(ag::mul(a, a), ag::scale(a, 3.0));
  y.backward();
  EXPECT_DOUBLE_EQ(a.grad()[0], 7.0);
  // leaves keep accumulating until zeroed
  y.backward();
  EXPECT_DOUBLE_EQ(a.grad()[0], 14.0);
  a.zero_grad();
  EXPECT_DOUBLE_EQ(a.grad()[0], 0.0);
}

TEST(Autograd, InputsWithoutGradAreSkipped) {
  Tensor a = Tensor::from_values({2}, {1, 2}, true);
  Tensor c = Tensor::from_values({2}, {3, 4});
  ag::sum(ag::mul(a, c)).backward();
  EXPECT_EQ(a.grad()[0], 3.0);
  EXPECT_EQ(a.grad()[1], 4.0);
  EXPECT_TRUE(c.grad().empty());
}

TEST(Autograd, DeepChainDoesNotOverflowTheStack) {
  Tensor a = Tensor::scalar(1.0, true);
  Tensor y = a;
  for (int i = 0; i < 100000; ++i) y = ag::add_scalar(y, 0.0);
  y.backward();
  EXPECT_EQ(a.grad()[0], 1.0);
}

TEST(Autograd, GraphListsOpsInputsFirst) {
  Tensor a = Tensor::scalar(1.0, true);
  ag::Graph g(ag::sum(ag::relu(a)));
  const auto names = g.op_names();
  ASSERT_EQ(names.size(), 3u);
  EXPECT_EQ(names.back(), "sum");
}

TEST(Autograd, ForwardIsBitIdenticalAcrossRuns) {
  auto run = [] {
    dnas::Rng rng(3);
    std::vector<double> xv(12), wv(12);
    for (double& v : xv) v = rng.normal();
    for (double& v : wv) v = rng.normal();
    Tensor x = Tensor::from_values({3, 4}, xv), w = Tensor::from_values({4, 3}, wv);
    Tensor y = ag::fc_layer(x, w, Tensor::zeros({3}), ag::Activation::kSigmoid);
    return vals(ag::dot_interactions(ag::reshape(y, {1, 3, 3}), true));
  };
  EXPECT_EQ(run(), run());
}

TEST(Autograd, ShapeErrors) {
  EXPECT_THROW(ag::add(Tensor::zeros({2}), Tensor::zeros({3})), dnas::DimensionError);
  EXPECT_THROW(ag::reshape(Tensor::zeros({2, 2}), {3}), dnas::DimensionError);
  EXPECT_THROW(ag::concat_columns({Tensor::zeros({2, 1}), Tensor::zeros({3, 1})}), dnas::DimensionError);
  EXPECT_THROW(ag::pad_columns(Tensor::zeros({1, 3}), 2), dnas::DimensionError);
  EXPECT_THROW(ag::log(Tensor::from_values({1}, {0.0})), dnas::DomainError);
  EXPECT_THROW(ag::parse_activation("tanh"), dnas::ConfigError);
}

// Every case in the shared suite, at a reduced instance count; the acceptance
// binary runs the full 100-instance sweep.
class GradientSuite : public ::testing::TestWithParam<std::size_t> {};

TEST_P(GradientSuite, MatchesCentralDifferences) {
  const auto cases = dnas::testing::gradient_cases();
  const auto& c = cases.at(GetParam());
  dnas::Rng rng(100 + GetParam());
  for (int i = 0; i < 20; ++i) {
    std::function<Tensor()> loss;
    std::vector<Tensor> leaves;
    c.make(rng, loss, leaves);
    const auto r = dnas::testing::gradient_check(loss, leaves, rng, c.options);
    EXPECT_LT(r.max_rel_error, 1e-4) << c.name << " instance " << i;
  }
}

INSTANTIATE_TEST_SUITE_P(AllOps, GradientSuite,
                         ::testing::Range<std::size_t>(0, dnas::testing::gradient_cases().size()),
                         [](const auto& info) {
                           std::string n = dnas::testing::gradient_cases()[info.param].name;
                           for (char& ch : n) {
                             if (!std::isalnum(static_cast<unsigned char>(ch))) ch = '_';
                           }
                           return n;
                         });
