#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <numbers>

#include "metagen/checkpoint.hpp"
#include "metagen/datagen.hpp"
#include "metagen/error.hpp"
#include "metagen/models.hpp"

namespace metagen {
namespace {

std::vector<Condition> some_conditions(std::size_t n, std::uint64_t seed) {
  DatasetConfig cfg;
  cfg.n_records = n;
  cfg.seed = seed;
  std::vector<Condition> out;
  for (const auto& r : build_dataset(cfg).records) out.push_back(r.cond);
  return out;
}

std::array<MarginalVae, 4> make_marginals(const Architecture& arch, std::uint64_t seed) {
  std::array<MarginalVae, 4> m = {MarginalVae(Component::OuterCylinder, arch), MarginalVae(Component::InnerCylinder, arch),
                                  MarginalVae(Component::Density1, arch), MarginalVae(Component::Density2, arch)};
  Rng rng(seed);
  for (auto& v : m) v.init(rng);
  return m;
}

std::string all_weights_hash(const SystemModel& model) {
  const auto p = model.parameters();
  return weights_hash(p);
}

TEST(Architecture, ComponentShapes) {
  const Architecture arch;
  EXPECT_EQ(arch.system_dim(), 360u);
  EXPECT_EQ(arch.component_dim(Component::OuterCylinder), 120u);
  EXPECT_EQ(arch.component_dim(Component::InnerCylinder), 120u);
  EXPECT_EQ(arch.component_dim(Component::Density1), 60u);
  EXPECT_EQ(arch.component_dim(Component::Density2), 60u);
  EXPECT_EQ(Architecture::from_json(arch.to_json()), arch);
}

TEST(ModelKindNames, RoundTrip) {
  for (ModelKind k : kModelKinds) EXPECT_EQ(model_kind_from_string(to_string(k)), k);
  EXPECT_THROW(model_kind_from_string("diffusion"), SchemaError);
}

TEST(MarginalVaeTest, ForwardShapes) {
  const Architecture arch;
  for (Component c : kComponents) {
    MarginalVae m(c, arch);
    Rng rng(1);
    m.init(rng);
    RTape tape;
    const auto f = m.forward(tape, tape.constant(RealMatrix::Zero(7, static_cast<Eigen::Index>(m.input_dim()))), nullptr);
    EXPECT_EQ(f.recon.cols(), static_cast<Eigen::Index>(arch.component_dim(c)));
    EXPECT_EQ(f.recon.rows(), 7);
    EXPECT_EQ(f.post.mu.cols(), static_cast<Eigen::Index>(m.latent_dim()));
  }
}

TEST(Loss, PerfectReconstructionWithStandardPosteriorIsZero) {
  RTape tape;
  Rng rng(2);
  const RealMatrix t0 = ad::standard_normal<Real>(4, 120, rng);
  const RealMatrix t1 = ad::standard_normal<Real>(4, 60, rng);
  const std::array<RVar, 2> recon = {tape.constant(t0), tape.constant(t1)};
  const std::array<RVar, 2> target = {tape.constant(t0), tape.constant(t1)};
  const Posterior post{tape.constant(RealMatrix::Zero(4, 16)), tape.constant(RealMatrix::Zero(4, 16))};
  const std::array<double, 2> w = {1e4 * 120, 1e4 * 60};
  EXPECT_EQ(meta_loss(recon, target, post, w).value()(0, 0), 0.0f);
}

TEST(Loss, KlTermIsAdditive) {
  RTape tape;
  Rng rng(3);
  const std::array<RVar, 1> recon = {tape.constant(ad::standard_normal<Real>(4, 10, rng))};
  const std::array<RVar, 1> target = {tape.constant(ad::standard_normal<Real>(4, 10, rng))};
  const Posterior post{tape.constant(ad::standard_normal<Real>(4, 6, rng)), tape.constant(ad::standard_normal<Real>(4, 6, rng))};
  const std::array<double, 1> w = {3.0};
  const double with = meta_loss(recon, target, post, w, 1.0).value()(0, 0);
  const double without = meta_loss(recon, target, post, w, 0.0).value()(0, 0);
  const double kl = ad::gaussian_kl(post.mu, post.logvar).value()(0, 0);
  EXPECT_NEAR(with - without, kl, 1e-4 * std::abs(with));
  EXPECT_GT(kl, 0.0);
}

TEST(Loss, SystemLossWeightsAreSumOfSquaresInDatasetUnits) {
  const Architecture arch;
  const LossConfig loss;
  EXPECT_DOUBLE_EQ(loss.component_weight(120), 1e4 * 120);
  RTape tape;
  RealMatrix target = RealMatrix::Zero(1, 360);
  RealMatrix shifted = target;
  shifted(0, 0) = 0.01f;  // one coordinate off by 1 dataset unit
  const RVar t = tape.constant(target);
  const std::array<RVar, 4> recon = {tape.constant(shifted.middleCols(0, 120)), tape.constant(target.middleCols(120, 120)),
                                     tape.constant(target.middleCols(240, 60)), tape.constant(target.middleCols(300, 60))};
  const Posterior post{tape.constant(RealMatrix::Zero(1, 16)), tape.constant(RealMatrix::Zero(1, 16))};
  EXPECT_NEAR(system_vae_loss(recon, t, post, loss, arch).value()(0, 0), 1.0, 1e-4);
}

TEST(MetaVaeTest, FrozenMarginalsReceiveNoGradient) {
  const Architecture arch;
  MetaVae meta(arch);
  Rng rng(4);
  meta.init(rng);
  auto marginals = make_marginals(arch, 5);
  meta.set_marginals({&marginals[0], &marginals[1], &marginals[2], &marginals[3]});
  const std::string before = weights_hash(meta.marginal_parameters());

  auto trainable = meta.trainable_parameters();
  ad::Adam<Real> opt(trainable, {});
  const auto conds = some_conditions(8, 6);
  RealMatrix system = ad::standard_normal<Real>(8, 360, rng);
  for (int step = 0; step < 3; ++step) {
    RTape tape;
    const RVar s = tape.constant(system);
    const auto f = meta.forward(tape, s, tape.constant(normalize_conditions(meta.normalizer(), conds)), nullptr);
    opt.zero_grad();
    tape.backward(system_vae_loss(f.components, s, f.post, LossConfig{}, arch));
    opt.step();
  }
  for (const RealParameter* p : meta.marginal_parameters()) {
    EXPECT_TRUE(p->grad.size() == 0 || p->grad.isZero()) << p->name;
    for (const RealParameter* t : trainable) EXPECT_NE(p, t);
  }
  EXPECT_EQ(weights_hash(meta.marginal_parameters()), before);
  std::vector<const RealParameter*> source;
  for (const auto& m : marginals) {
    const auto d = m.decoder_parameters();
    source.insert(source.end(), d.begin(), d.end());
  }
  EXPECT_EQ(weights_hash(source), before);
}

TEST(MetaVaeTest, MarginalsMustBeInComponentOrder) {
  const Architecture arch;
  MetaVae meta(arch);
  auto m = make_marginals(arch, 7);
  EXPECT_THROW(meta.set_marginals({&m[1], &m[0], &m[2], &m[3]}), PreconditionError);
  EXPECT_THROW(meta.set_marginals({&m[0], &m[1], &m[2], nullptr}), PreconditionError);
}

TEST(Cgan, ZeroLogitDiscriminatorLossIsLn2PerTerm) {
  const Architecture arch;
  VanillaCgan gan(arch);
  Rng rng(8);
  gan.init(rng);
  auto& last = const_cast<ad::Affine<Real>&>(gan.discriminator().layers().back());
  last.weight().value.setZero();
  last.bias().value.setZero();

  const auto conds = some_conditions(16, 9);
  const RealMatrix c = normalize_conditions(gan.normalizer(), conds);
  const RealMatrix real = ad::standard_normal<Real>(16, 360, rng);
  ad::Adam<Real> g_opt(gan.generator_parameters(), {.lr = 2e-4, .beta1 = 0.5});
  ad::Adam<Real> d_opt(gan.discriminator_parameters(), {.lr = 2e-4, .beta1 = 0.5});
  const auto losses = cgan_step(gan, g_opt, d_opt, real, c, rng);
  EXPECT_NEAR(losses.discriminator, 2.0 * std::numbers::ln2, 1e-6);
}

TEST(Cgan, StepAlternatesDiscriminatorThenGenerator) {
  const Architecture arch;
  VanillaCgan gan(arch);
  Rng rng(10);
  gan.init(rng);
  const auto conds = some_conditions(16, 11);
  const RealMatrix c = normalize_conditions(gan.normalizer(), conds);
  const RealMatrix real = ad::standard_normal<Real>(16, 360, rng);
  ad::Adam<Real> g_opt(gan.generator_parameters(), {.lr = 2e-4, .beta1 = 0.5});
  ad::Adam<Real> d_opt(gan.discriminator_parameters(), {.lr = 2e-4, .beta1 = 0.5});

  const auto gp = gan.generator_parameters();
  const auto dp = gan.discriminator_parameters();
  const std::vector<const RealParameter*> g_const(gp.begin(), gp.end()), d_const(dp.begin(), dp.end());
  EXPECT_EQ(gp.size() + dp.size(), gan.parameters().size());
  const auto g0 = weights_hash(g_const), d0 = weights_hash(d_const);
  const auto losses = cgan_step(gan, g_opt, d_opt, real, c, rng);
  EXPECT_NE(weights_hash(g_const), g0);
  EXPECT_NE(weights_hash(d_const), d0);
  EXPECT_EQ(g_opt.steps(), 1u);
  EXPECT_EQ(d_opt.steps(), 1u);
  EXPECT_TRUE(std::isfinite(losses.generator));
  EXPECT_TRUE(std::isfinite(losses.discriminator));
}

TEST(Sampling, SeededDeterminism) {
  const auto conds = some_conditions(300, 12);
  for (ModelKind k : kModelKinds) {
    auto a = make_model(k, Architecture{});
    auto b = make_model(k, Architecture{});
    Rng ra(13), rb(13);
    a->init(ra);
    b->init(rb);
    EXPECT_EQ(all_weights_hash(*a), all_weights_hash(*b)) << to_string(k);
    Rng sa(14), sb(14);
    EXPECT_EQ(sample_params(*a, conds, sa, 64), sample_params(*b, conds, sb, 64)) << to_string(k);
  }
}

TEST(Sampling, BatchSizeDoesNotChangeSamples) {
  const auto conds = some_conditions(100, 15);
  auto m = make_model(ModelKind::Smvae, Architecture{});
  Rng r(16);
  m->init(r);
  Rng s1(17), s2(17);
  const auto a = sample_params(*m, conds, s1, 7);
  const auto b = sample_params(*m, conds, s2, 100);
  // Same latents; only float blocking of the matrix products may differ.
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_NEAR(a[i].r_ext1, b[i].r_ext1, 1e-3);
    EXPECT_NEAR(a[i].r_int2, b[i].r_int2, 1e-3);
    EXPECT_NEAR(a[i].d1, b[i].d1, 1e-3);
  }
}

TEST(Sampling, FiftyThousandSamplesPerModelWithinAMinute) {
  const auto conds = some_conditions(50000, 18);
  for (ModelKind k : kModelKinds) {
    auto m = make_model(k, Architecture{});
    Rng r(19);
    m->init(r);
    if (auto* meta = dynamic_cast<MetaVae*>(m.get())) {
      static auto marginals = make_marginals(Architecture{}, 20);
      meta->set_marginals({&marginals[0], &marginals[1], &marginals[2], &marginals[3]});
    }
    const auto t0 = std::chrono::steady_clock::now();
    Rng s(21);
    const auto out = sample_params(*m, conds, s);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EXPECT_EQ(out.size(), 50000u);
    EXPECT_LT(seconds, 60.0) << to_string(k);
  }
}

TEST(CheckpointIo, SystemModelRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "metagen_unit";
  std::filesystem::create_directories(dir);
  const auto conds = some_conditions(50, 22);
  for (ModelKind k : kModelKinds) {
    auto m = make_model(k, Architecture{});
    Rng r(23);
    m->init(r);
    m->set_normalizer(ConditionNormalizer(9.5, 1.25));
    const auto path = dir / (std::string(to_string(k)) + ".ckpt");
    save_checkpoint(to_checkpoint(*m), path);
    auto back = model_from_checkpoint(load_checkpoint(path));
    EXPECT_EQ(back->kind(), k);
    EXPECT_EQ(back->normalizer(), m->normalizer());
    EXPECT_EQ(all_weights_hash(*back), all_weights_hash(*m));
    Rng s1(24), s2(24);
    EXPECT_EQ(sample_params(*m, conds, s1), sample_params(*back, conds, s2));
  }
}

TEST(CheckpointIo, MarginalRoundTripAndCorruption) {
  const auto dir = std::filesystem::temp_directory_path() / "metagen_unit";
  std::filesystem::create_directories(dir);
  MarginalVae m(Component::Density2, Architecture{});
  Rng r(25);
  m.init(r);
  const auto path = dir / "marginal.ckpt";
  save_checkpoint(to_checkpoint(m), path);
  const MarginalVae back = marginal_from_checkpoint(load_checkpoint(path));
  EXPECT_EQ(back.component(), Component::Density2);
  EXPECT_EQ(weights_hash(back.parameters()), weights_hash(std::as_const(m).parameters()));

  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 4);
  EXPECT_ANY_THROW(load_checkpoint(path));
  EXPECT_THROW(model_from_checkpoint(load_checkpoint(dir / "marginal.ckpt.missing")), IoError);
}

TEST(Normalization, FitAndNormalize) {
  const std::vector<Condition> conds = {{50, 50, std::exp(1.0)}, {20, 80, std::exp(3.0)}};
  const auto n = ConditionNormalizer::fit(conds);
  EXPECT_NEAR(n.log_m_mean(), 2.0, 1e-12);
  const auto v = n.normalize(conds[1]);
  EXPECT_DOUBLE_EQ(v[0], 0.2);
  EXPECT_DOUBLE_EQ(v[1], 0.8);
  EXPECT_NEAR(v[2], 1.0 / n.log_m_std(), 1e-12);
  EXPECT_THROW(n.normalize({50, 50, 0.0}), DomainError);
  EXPECT_THROW(ConditionNormalizer::fit({}), DomainError);
}

}  // namespace
}  // namespace metagen
