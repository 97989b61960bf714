#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "gradcheck.hpp"
#include "metagen/autodiff.hpp"
#include "metagen/error.hpp"

namespace metagen {
namespace {

using testing::DMatrix;
using testing::DParam;
using testing::DTape;
using testing::DVar;

DMatrix row(std::initializer_list<double> v) {
  DMatrix m(1, static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) m(0, i++) = x;
  return m;
}

TEST(Ops, Relu) {
  DTape t;
  const auto y = ad::relu(t.constant(row({-1, 0, 2})));
  EXPECT_EQ(y.value(), row({0, 0, 2}));
}

TEST(Ops, IdentityAffine) {
  DTape t;
  const DMatrix x = row({1.5, -2, 3});
  const auto y = ad::affine(t.constant(x), t.constant(DMatrix::Identity(3, 3)), t.constant(DMatrix::Zero(1, 3)));
  EXPECT_EQ(y.value(), x);
}

TEST(Ops, AffineShapeMismatch) {
  DTape t;
  EXPECT_THROW(ad::affine(t.constant(DMatrix::Zero(2, 3)), t.constant(DMatrix::Zero(4, 2)), t.constant(DMatrix::Zero(1, 4))),
               ShapeError);
}

TEST(Ops, ConcatLength) {
  DTape t;
  const auto y = ad::concat({t.constant(row({1, 2})), t.constant(row({3, 4, 5}))});
  EXPECT_EQ(y.cols(), 5);
  EXPECT_EQ(y.value(), row({1, 2, 3, 4, 5}));
}

TEST(Ops, Mse) {
  DTape t;
  EXPECT_DOUBLE_EQ(ad::mse(t.constant(row({0, 0})), t.constant(row({3, 4}))).value()(0, 0), 12.5);
  EXPECT_DOUBLE_EQ(ad::mse(t.constant(row({1, 2, 3})), t.constant(row({2, 3, 4}))).value()(0, 0), 1.0);
}

TEST(Ops, GaussianKl) {
  DTape t;
  EXPECT_DOUBLE_EQ(ad::gaussian_kl(t.constant(row({1})), t.constant(row({0}))).value()(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(ad::gaussian_kl(t.constant(row({0, 0})), t.constant(row({0, 0}))).value()(0, 0), 0.0);
  Rng rng(31);
  for (int i = 0; i < 1000; ++i) {
    DTape tt;
    const auto kl = ad::gaussian_kl(tt.constant(testing::uniform(3, 4, -3, 3, rng)),
                                    tt.constant(testing::uniform(3, 4, -5, 5, rng)));
    ASSERT_GE(kl.value()(0, 0), 0.0);
  }
}

TEST(Ops, ReparameterizeMoments) {
  const double mu = 1.5, logvar = std::log(4.0), sigma = 2.0;
  const Eigen::Index n = 100000;
  DTape t;
  Rng rng(32);
  const auto z = ad::reparameterize(t.constant(DMatrix::Constant(n, 1, mu)), t.constant(DMatrix::Constant(n, 1, logvar)), rng);
  const double mean = z.value().mean();
  const double var = (z.value().array() - mean).square().sum() / static_cast<double>(n - 1);
  EXPECT_LT(std::abs(mean - mu), 0.01 * sigma);
  EXPECT_LT(std::abs(var / (sigma * sigma) - 1.0), 0.03);
}

TEST(Ops, BceWithLogits) {
  DTape t;
  EXPECT_NEAR(ad::bce_with_logits(t.constant(row({0})), 1.0).value()(0, 0), std::numbers::ln2, 1e-15);
  for (double z : {-3.0, -0.4, 0.7, 5.0}) {
    EXPECT_NEAR(ad::bce_with_logits(t.constant(row({z})), 1.0).value()(0, 0),
                ad::bce_with_logits(t.constant(row({-z})), 0.0).value()(0, 0), 1e-14);
  }
  EXPECT_NEAR(ad::bce_with_logits(t.constant(row({50})), 1.0).value()(0, 0), 0.0, 1e-20);
  EXPECT_EQ(ad::bce_with_logits(t.constant(row({1000})), 1.0).value()(0, 0), 0.0);
  EXPECT_NEAR(ad::bce_with_logits(t.constant(row({-1000})), 1.0).value()(0, 0), 1000.0, 1e-9);
}

TEST(Tape, SecondBackwardThrows) {
  DParam p = testing::make_param(row({1, 2}));
  DTape t;
  const auto loss = ad::mse(t.param(p), t.constant(row({0, 0})));
  t.backward(loss);
  EXPECT_THROW(t.backward(loss), PreconditionError);
}

TEST(Tape, NonScalarLossThrows) {
  DParam p = testing::make_param(row({1, 2}));
  DTape t;
  EXPECT_THROW(t.backward(t.param(p)), ShapeError);
}

TEST(Tape, ForeignVariableThrows) {
  DTape a, b;
  EXPECT_THROW(ad::add(a.constant(row({1})), b.constant(row({1}))), PreconditionError);
}

TEST(Tape, ReusedValueAccumulates) {
  DParam p = testing::make_param(row({2}));
  DTape t;
  const auto x = t.param(p);
  // loss = mse(x + 3x, 0) = 16 x^2, d/dx = 32 x
  t.backward(ad::mse(ad::add(x, ad::scale(x, 3.0)), t.constant(row({0}))));
  EXPECT_DOUBLE_EQ(p.grad(0, 0), 64.0);
}

TEST(Tape, FrozenParametersReceiveNoGradient) {
  DParam w = testing::make_param(row({2}));
  DParam f = testing::make_param(row({5}));
  DTape t;
  const auto frozen = t.param(f, ad::Binding::Frozen);
  t.backward(ad::mse(ad::add(t.param(w), frozen), t.constant(row({0}))));
  EXPECT_DOUBLE_EQ(w.grad(0, 0), 14.0);
  EXPECT_EQ(f.grad(0, 0), 0.0);
  EXPECT_FALSE(t.requires_grad(frozen));
}

TEST(Adam, FirstStepIsLrTimesSign) {
  DParam p = testing::make_param(row({1.0, -2.0, 0.5}));
  ad::Adam<double> opt({&p}, {});
  p.grad = row({0.3, -7.0, 1e-3});
  opt.step();
  EXPECT_NEAR(p.value(0, 0), 1.0 - 1e-3, 1e-9);
  EXPECT_NEAR(p.value(0, 1), -2.0 + 1e-3, 1e-9);
  EXPECT_NEAR(p.value(0, 2), 0.5 - 1e-3, 1e-8);
  EXPECT_EQ(opt.steps(), 1u);
}

TEST(Adam, MinimizesQuadratic) {
  DParam p = testing::make_param(row({3.0, -4.0}));
  ad::Adam<double> opt({&p}, {.lr = 0.05});
  for (int i = 0; i < 2000; ++i) {
    opt.zero_grad();
    DTape t;
    t.backward(ad::mse(t.param(p), t.constant(row({1.0, 2.0}))));
    opt.step();
  }
  EXPECT_NEAR(p.value(0, 0), 1.0, 1e-3);
  EXPECT_NEAR(p.value(0, 1), 2.0, 1e-3);
}

TEST(Layers, MlpShapesAndCollection) {
  ad::Mlp<double> mlp("enc", {6, 4, 3});
  Rng rng(33);
  mlp.init(rng);
  std::vector<ad::Parameter<double>*> params;
  mlp.collect(params);
  ASSERT_EQ(params.size(), 4u);
  EXPECT_EQ(params[0]->name, "enc.0.weight");
  DTape t;
  const auto y = mlp.forward(t, t.constant(DMatrix::Ones(5, 6)));
  EXPECT_EQ(y.rows(), 5);
  EXPECT_EQ(y.cols(), 3);
}

class GradCheck : public ::testing::TestWithParam<std::string> {};

TEST_P(GradCheck, CentralDifferencesAgree) {
  for (const auto& op : testing::op_cases()) {
    if (op.name != GetParam()) continue;
    const auto r = testing::run_gradcheck(op, 100, 2024);
    EXPECT_EQ(r.instances, 100u);
    EXPECT_EQ(r.failures, 0u) << r.first_failure;
    return;
  }
  FAIL() << "unknown op " << GetParam();
}

INSTANTIATE_TEST_SUITE_P(AllOps, GradCheck,
                         ::testing::Values("affine", "relu", "concat", "slice_cols", "add", "scale", "clamp", "mse",
                                           "gaussian_kl", "reparameterize", "bce_with_logits", "reuse"));

}  // namespace
}  // namespace metagen
