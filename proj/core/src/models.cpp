#include "metagen/models.hpp"

#include <cmath>
#include <string>

#include "metagen/error.hpp"

namespace metagen {

namespace {

Posterior split_posterior(RVar out, std::size_t latent, double clamp_bound) {
  const auto l = static_cast<Eigen::Index>(latent);
  const auto c = static_cast<Real>(clamp_bound);
  return {ad::slice_cols(out, 0, l), ad::clamp(ad::slice_cols(out, l, l), -c, c)};
}

RVar sample_latent(const Posterior& post, const RealMatrix* eps) {
  return eps != nullptr ? ad::reparameterize(post.mu, post.logvar, *eps) : post.mu;
}

std::array<RVar, 4> slice_components(RVar flat, const Architecture& arch) {
  std::array<RVar, 4> out;
  for (Component c : kComponents) {
    const auto s = component_slice(c, arch.n_points);
    out[static_cast<std::size_t>(c)] =
        ad::slice_cols(flat, static_cast<Eigen::Index>(s.offset), static_cast<Eigen::Index>(s.size));
  }
  return out;
}

std::string component_prefix(std::string_view prefix, Component c) {
  return std::string(prefix) + "." + std::string(to_string(c));
}

template <typename F>
std::array<ad::Affine<Real>, 4> make_heads(F&& make) {
  return {make(Component::OuterCylinder), make(Component::InnerCylinder), make(Component::Density1),
          make(Component::Density2)};
}

}  // namespace

std::string_view to_string(ModelKind k) noexcept {
  switch (k) {
    case ModelKind::MetaVae: return "meta-vae";
    case ModelKind::Smvae: return "smvae";
    case ModelKind::VanillaVae: return "vanilla-vae";
    case ModelKind::VanillaGan: return "vanilla-gan";
  }
  return "?";
}

ModelKind model_kind_from_string(std::string_view s) {
  for (ModelKind k : kModelKinds) {
    if (to_string(k) == s) return k;
  }
  throw SchemaError("unknown model kind '" + std::string(s) + "'");
}

std::string_view to_string(Component c) noexcept {
  switch (c) {
    case Component::OuterCylinder: return "outer_cylinder";
    case Component::InnerCylinder: return "inner_cylinder";
    case Component::Density1: return "density1";
    case Component::Density2: return "density2";
  }
  return "?";
}

Component component_from_string(std::string_view s) {
  for (Component c : kComponents) {
    if (to_string(c) == s) return c;
  }
  throw SchemaError("unknown component '" + std::string(s) + "'");
}

std::size_t Architecture::marginal_latent(Component c) const noexcept {
  return (c == Component::OuterCylinder || c == Component::InnerCylinder) ? cyl_latent : den_latent;
}

std::size_t Architecture::marginal_hidden(Component c) const noexcept {
  return (c == Component::OuterCylinder || c == Component::InnerCylinder) ? marginal_cyl_hidden : marginal_den_hidden;
}

nlohmann::json Architecture::to_json() const {
  return {{"n_points", n_points},         {"marginal_cyl_hidden", marginal_cyl_hidden},
          {"marginal_den_hidden", marginal_den_hidden},
          {"cyl_latent", cyl_latent},     {"den_latent", den_latent},
          {"block_hidden", block_hidden}, {"merge_hidden", merge_hidden},
          {"trunk_hidden", trunk_hidden}, {"meta_latent", meta_latent},
          {"cvae_hidden", cvae_hidden},   {"cvae_latent", cvae_latent},
          {"gan_hidden", gan_hidden},     {"gan_noise", gan_noise},
          {"logvar_clamp", logvar_clamp}};
}

Architecture Architecture::from_json(const nlohmann::json& j) {
  Architecture a;
  a.n_points = j.value("n_points", a.n_points);
  a.marginal_cyl_hidden = j.value("marginal_cyl_hidden", a.marginal_cyl_hidden);
  a.marginal_den_hidden = j.value("marginal_den_hidden", a.marginal_den_hidden);
  a.cyl_latent = j.value("cyl_latent", a.cyl_latent);
  a.den_latent = j.value("den_latent", a.den_latent);
  a.block_hidden = j.value("block_hidden", a.block_hidden);
  a.merge_hidden = j.value("merge_hidden", a.merge_hidden);
  a.trunk_hidden = j.value("trunk_hidden", a.trunk_hidden);
  a.meta_latent = j.value("meta_latent", a.meta_latent);
  a.cvae_hidden = j.value("cvae_hidden", a.cvae_hidden);
  a.cvae_latent = j.value("cvae_latent", a.cvae_latent);
  a.gan_hidden = j.value("gan_hidden", a.gan_hidden);
  a.gan_noise = j.value("gan_noise", a.gan_noise);
  a.logvar_clamp = j.value("logvar_clamp", a.logvar_clamp);
  return a;
}

nlohmann::json LossConfig::to_json() const {
  return {{"recon_unit_scale", recon_unit_scale}, {"sum_over_elements", sum_over_elements}, {"kl_weight", kl_weight}};
}

LossConfig LossConfig::from_json(const nlohmann::json& j) {
  LossConfig c;
  c.recon_unit_scale = j.value("recon_unit_scale", c.recon_unit_scale);
  c.sum_over_elements = j.value("sum_over_elements", c.sum_over_elements);
  c.kl_weight = j.value("kl_weight", c.kl_weight);
  return c;
}

RVar meta_loss(std::span<const RVar> recon, std::span<const RVar> targets, const Posterior& post,
               std::span<const double> weights, double kl_weight) {
  if (recon.size() != targets.size() || recon.size() != weights.size() || recon.empty()) {
    throw ShapeError("meta_loss: component, target and weight counts differ");
  }
  RVar total = ad::scale(ad::mse(recon[0], targets[0]), static_cast<Real>(weights[0]));
  for (std::size_t i = 1; i < recon.size(); ++i) {
    total = ad::add(total, ad::scale(ad::mse(recon[i], targets[i]), static_cast<Real>(weights[i])));
  }
  return ad::add(total, ad::scale(ad::gaussian_kl(post.mu, post.logvar), static_cast<Real>(kl_weight)));
}

RVar system_vae_loss(const std::array<RVar, 4>& recon, RVar target_flat, const Posterior& post, const LossConfig& loss,
                     const Architecture& arch) {
  const auto targets = slice_components(target_flat, arch);
  std::array<double, 4> weights{};
  for (Component c : kComponents) {
    weights[static_cast<std::size_t>(c)] = loss.component_weight(arch.component_dim(c));
  }
  return meta_loss(recon, targets, post, weights, loss.kl_weight);
}

// ---------------------------------------------------------------------------
// MarginalVae

MarginalVae::MarginalVae(Component component, const Architecture& arch)
    : component_(component),
      arch_(arch),
      input_dim_(arch.component_dim(component)),
      latent_dim_(arch.marginal_latent(component)),
      encoder_("encoder", {input_dim_, arch.marginal_hidden(component), arch.marginal_hidden(component), 2 * latent_dim_}),
      decoder_("decoder", {latent_dim_, arch.marginal_hidden(component), arch.marginal_hidden(component), input_dim_}) {}

void MarginalVae::init(Rng& rng) {
  encoder_.init(rng);
  decoder_.init(rng);
}

Posterior MarginalVae::encode(RTape& tape, RVar x, Binding b) {
  if (static_cast<std::size_t>(x.cols()) != input_dim_) throw ShapeError("marginal VAE input width mismatch");
  return split_posterior(encoder_.forward(tape, x, b), latent_dim_, arch_.logvar_clamp);
}

RVar MarginalVae::decode(RTape& tape, RVar z, Binding b) { return decoder_.forward(tape, z, b); }

MarginalVae::Forward MarginalVae::forward(RTape& tape, RVar x, const RealMatrix* eps) {
  Forward f;
  f.post = encode(tape, x);
  f.recon = decode(tape, sample_latent(f.post, eps));
  return f;
}

RVar MarginalVae::loss(const Forward& f, RVar target, const LossConfig& cfg) {
  const std::array<RVar, 1> recon{f.recon};
  const std::array<RVar, 1> targets{target};
  const std::array<double, 1> weights{cfg.component_weight(input_dim_)};
  return meta_loss(recon, targets, f.post, weights, cfg.kl_weight);
}

std::vector<RealParameter*> MarginalVae::parameters() {
  std::vector<RealParameter*> out;
  encoder_.collect(out);
  decoder_.collect(out);
  return out;
}

std::vector<const RealParameter*> MarginalVae::parameters() const {
  std::vector<const RealParameter*> out;
  encoder_.collect(out);
  decoder_.collect(out);
  return out;
}

std::vector<const RealParameter*> MarginalVae::decoder_parameters() const {
  std::vector<const RealParameter*> out;
  decoder_.collect(out);
  return out;
}

// ---------------------------------------------------------------------------
// SystemModel

std::vector<RealParameter*> SystemModel::parameters() {
  std::vector<RealParameter*> out;
  collect(out);
  return out;
}

std::vector<const RealParameter*> SystemModel::parameters() const {
  auto mutable_params = const_cast<SystemModel*>(this)->parameters();
  return {mutable_params.begin(), mutable_params.end()};
}

std::vector<RealParameter*> SystemModel::trainable_parameters() { return parameters(); }

// ---------------------------------------------------------------------------
// BlockEncoder

BlockEncoder::BlockEncoder(const Architecture& arch, std::size_t latent)
    : arch_(arch),
      latent_(latent),
      merge_("encoder.merge", {4 * arch.block_hidden + kConditionDim, arch.merge_hidden, 2 * latent}) {
  for (Component c : kComponents) {
    blocks_[static_cast<std::size_t>(c)] =
        ad::Mlp<Real>(component_prefix("encoder", c), {arch.component_dim(c), arch.block_hidden}, true);
  }
}

void BlockEncoder::init(Rng& rng) {
  for (auto& b : blocks_) b.init(rng);
  merge_.init(rng);
}

Posterior BlockEncoder::encode(RTape& tape, RVar system, RVar cond) {
  if (static_cast<std::size_t>(system.cols()) != arch_.system_dim() ||
      static_cast<std::size_t>(cond.cols()) != kConditionDim || system.rows() != cond.rows()) {
    throw ShapeError("encoder expects [B x " + std::to_string(arch_.system_dim()) + "] systems and [B x 3] conditions");
  }
  const auto parts = slice_components(system, arch_);
  std::array<RVar, 5> merged;
  for (std::size_t k = 0; k < 4; ++k) merged[k] = blocks_[k].forward(tape, parts[k]);
  merged[4] = cond;
  return split_posterior(merge_.forward(tape, ad::concat<Real>(merged)), latent_, arch_.logvar_clamp);
}

void BlockEncoder::collect(std::vector<RealParameter*>& out) {
  for (auto& b : blocks_) b.collect(out);
  merge_.collect(out);
}

// ---------------------------------------------------------------------------
// MetaVae

MetaVae::MetaVae(const Architecture& arch)
    : ConditionalVae(arch),
      encoder_(arch, arch.meta_latent),
      trunk_("decoder.trunk", {arch.meta_latent + kConditionDim, arch.trunk_hidden, arch.trunk_hidden}, true),
      heads_(make_heads([&](Component c) {
        return ad::Affine<Real>(component_prefix("decoder.head", c), arch.trunk_hidden, arch.marginal_latent(c));
      })) {
  for (Component c : kComponents) {
    const std::size_t h = arch.marginal_hidden(c);
    marginals_[static_cast<std::size_t>(c)] = ad::Mlp<Real>(
        component_prefix("marginal", c) + ".decoder", {arch.marginal_latent(c), h, h, arch.component_dim(c)});
  }
}

void MetaVae::init(Rng& rng) {
  encoder_.init(rng);
  trunk_.init(rng);
  for (auto& h : heads_) h.init(rng);
  for (auto& m : marginals_) m.init(rng);
}

std::array<RVar, 4> MetaVae::meta_decode(RTape& tape, RVar z, RVar cond, Binding b) {
  const RVar h = trunk_.forward(tape, ad::concat<Real>({z, cond}), b);
  std::array<RVar, 4> codes;
  for (std::size_t k = 0; k < 4; ++k) codes[k] = heads_[k].forward(tape, h, b);
  return codes;
}

std::array<RVar, 4> MetaVae::components_from_codes(RTape& tape, const std::array<RVar, 4>& codes) {
  std::array<RVar, 4> out;
  for (std::size_t k = 0; k < 4; ++k) out[k] = marginals_[k].forward(tape, codes[k], Binding::Frozen);
  return out;
}

RVar MetaVae::decode(RTape& tape, RVar z, RVar cond, Binding b) {
  return ad::concat<Real>(components_from_codes(tape, meta_decode(tape, z, cond, b)));
}

ConditionalVae::Forward MetaVae::forward(RTape& tape, RVar system, RVar cond, const RealMatrix* eps) {
  Forward f;
  f.post = encoder_.encode(tape, system, cond);
  f.components = components_from_codes(tape, meta_decode(tape, sample_latent(f.post, eps), cond, Binding::Trainable));
  return f;
}

void MetaVae::set_marginals(const std::array<const MarginalVae*, 4>& marginals) {
  for (Component c : kComponents) {
    const MarginalVae* m = marginals[static_cast<std::size_t>(c)];
    if (m == nullptr || m->component() != c) throw PreconditionError("marginal generators must be in component order");
    marginals_[static_cast<std::size_t>(c)].assign_values(m->decoder());
  }
}

std::vector<const RealParameter*> MetaVae::marginal_parameters() const {
  std::vector<const RealParameter*> out;
  for (const auto& m : marginals_) m.collect(out);
  return out;
}

void MetaVae::collect_trainable(std::vector<RealParameter*>& out) {
  encoder_.collect(out);
  trunk_.collect(out);
  for (auto& h : heads_) {
    out.push_back(&h.weight());
    out.push_back(&h.bias());
  }
}

void MetaVae::collect(std::vector<RealParameter*>& out) {
  collect_trainable(out);
  for (auto& m : marginals_) m.collect(out);
}

std::vector<RealParameter*> MetaVae::trainable_parameters() {
  std::vector<RealParameter*> out;
  collect_trainable(out);
  return out;
}

// ---------------------------------------------------------------------------
// Smvae

Smvae::Smvae(const Architecture& arch)
    : ConditionalVae(arch),
      encoder_(arch, arch.meta_latent),
      trunk_("decoder.trunk", {arch.meta_latent + kConditionDim, arch.trunk_hidden, arch.trunk_hidden}, true) {
  for (Component c : kComponents) {
    blocks_[static_cast<std::size_t>(c)] = ad::Mlp<Real>(
        component_prefix("decoder", c), {arch.trunk_hidden, arch.marginal_hidden(c), arch.component_dim(c)});
  }
}

void Smvae::init(Rng& rng) {
  encoder_.init(rng);
  trunk_.init(rng);
  for (auto& b : blocks_) b.init(rng);
}

std::array<RVar, 4> Smvae::decode_components(RTape& tape, RVar z, RVar cond, Binding b) {
  const RVar h = trunk_.forward(tape, ad::concat<Real>({z, cond}), b);
  std::array<RVar, 4> out;
  for (std::size_t k = 0; k < 4; ++k) out[k] = blocks_[k].forward(tape, h, b);
  return out;
}

RVar Smvae::decode(RTape& tape, RVar z, RVar cond, Binding b) {
  return ad::concat<Real>(decode_components(tape, z, cond, b));
}

ConditionalVae::Forward Smvae::forward(RTape& tape, RVar system, RVar cond, const RealMatrix* eps) {
  Forward f;
  f.post = encoder_.encode(tape, system, cond);
  f.components = decode_components(tape, sample_latent(f.post, eps), cond, Binding::Trainable);
  return f;
}

void Smvae::collect(std::vector<RealParameter*>& out) {
  encoder_.collect(out);
  trunk_.collect(out);
  for (auto& b : blocks_) b.collect(out);
}

// ---------------------------------------------------------------------------
// VanillaCvae

VanillaCvae::VanillaCvae(const Architecture& arch)
    : ConditionalVae(arch),
      encoder_("encoder", {arch.system_dim() + kConditionDim, arch.cvae_hidden, arch.cvae_hidden, 2 * arch.cvae_latent}),
      decoder_("decoder", {arch.cvae_latent + kConditionDim, arch.cvae_hidden, arch.cvae_hidden, arch.system_dim()}) {}

void VanillaCvae::init(Rng& rng) {
  encoder_.init(rng);
  decoder_.init(rng);
}

RVar VanillaCvae::decode(RTape& tape, RVar z, RVar cond, Binding b) {
  return decoder_.forward(tape, ad::concat<Real>({z, cond}), b);
}

ConditionalVae::Forward VanillaCvae::forward(RTape& tape, RVar system, RVar cond, const RealMatrix* eps) {
  Forward f;
  f.post = split_posterior(encoder_.forward(tape, ad::concat<Real>({system, cond})), arch_.cvae_latent,
                           arch_.logvar_clamp);
  f.components = slice_components(decode(tape, sample_latent(f.post, eps), cond, Binding::Trainable), arch_);
  return f;
}

void VanillaCvae::collect(std::vector<RealParameter*>& out) {
  encoder_.collect(out);
  decoder_.collect(out);
}

// ---------------------------------------------------------------------------
// VanillaCgan

VanillaCgan::VanillaCgan(const Architecture& arch)
    : SystemModel(arch),
      generator_("generator", {arch.gan_noise + kConditionDim, arch.gan_hidden, arch.gan_hidden, arch.system_dim()}),
      discriminator_("discriminator", {arch.system_dim() + kConditionDim, arch.gan_hidden, arch.gan_hidden, 1}) {}

void VanillaCgan::init(Rng& rng) {
  generator_.init(rng);
  discriminator_.init(rng);
}

RVar VanillaCgan::decode(RTape& tape, RVar z, RVar cond, Binding b) {
  return generator_.forward(tape, ad::concat<Real>({z, cond}), b);
}

RVar VanillaCgan::discriminate(RTape& tape, RVar system, RVar cond, Binding b) {
  return discriminator_.forward(tape, ad::concat<Real>({system, cond}), b);
}

std::vector<RealParameter*> VanillaCgan::generator_parameters() {
  std::vector<RealParameter*> out;
  generator_.collect(out);
  return out;
}

std::vector<RealParameter*> VanillaCgan::discriminator_parameters() {
  std::vector<RealParameter*> out;
  discriminator_.collect(out);
  return out;
}

void VanillaCgan::collect(std::vector<RealParameter*>& out) {
  generator_.collect(out);
  discriminator_.collect(out);
}

GanStepLosses cgan_step(VanillaCgan& gan, ad::Adam<Real>& g_opt, ad::Adam<Real>& d_opt, const RealMatrix& real,
                        const RealMatrix& cond, Rng& rng) {
  const Eigen::Index batch = real.rows();
  GanStepLosses out;
  {
    RTape tape;
    const RVar c = tape.constant(cond);
    const RVar fake = gan.decode(tape, tape.constant(ad::standard_normal<Real>(batch, gan.latent_dim(), rng)), c,
                                 Binding::Frozen);
    const RVar real_logit = gan.discriminate(tape, tape.constant(real), c, Binding::Trainable);
    const RVar fake_logit = gan.discriminate(tape, fake, c, Binding::Trainable);
    const RVar d_loss = ad::add(ad::bce_with_logits(real_logit, Real(1)), ad::bce_with_logits(fake_logit, Real(0)));
    d_opt.zero_grad();
    tape.backward(d_loss);
    d_opt.step();
    out.discriminator = d_loss.value()(0, 0);
  }
  {
    RTape tape;
    const RVar c = tape.constant(cond);
    const RVar fake = gan.decode(tape, tape.constant(ad::standard_normal<Real>(batch, gan.latent_dim(), rng)), c,
                                 Binding::Trainable);
    const RVar g_loss = ad::bce_with_logits(gan.discriminate(tape, fake, c, Binding::Frozen), Real(1));
    g_opt.zero_grad();
    tape.backward(g_loss);
    g_opt.step();
    out.generator = g_loss.value()(0, 0);
  }
  return out;
}

std::unique_ptr<SystemModel> make_model(ModelKind kind, const Architecture& arch) {
  switch (kind) {
    case ModelKind::MetaVae: return std::make_unique<MetaVae>(arch);
    case ModelKind::Smvae: return std::make_unique<Smvae>(arch);
    case ModelKind::VanillaVae: return std::make_unique<VanillaCvae>(arch);
    case ModelKind::VanillaGan: return std::make_unique<VanillaCgan>(arch);
  }
  throw PreconditionError("unknown model kind");
}

// ---------------------------------------------------------------------------
// Sampling

RealMatrix normalize_conditions(const ConditionNormalizer& n, std::span<const Condition> conds) {
  RealMatrix m(static_cast<Eigen::Index>(conds.size()), static_cast<Eigen::Index>(kConditionDim));
  for (std::size_t i = 0; i < conds.size(); ++i) {
    const auto v = n.normalize(conds[i]);
    for (std::size_t k = 0; k < kConditionDim; ++k) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = static_cast<Real>(v[k]);
    }
  }
  return m;
}

RealMatrix to_network_units(std::span<const double> flat_system) {
  RealMatrix m(1, static_cast<Eigen::Index>(flat_system.size()));
  for (std::size_t k = 0; k < flat_system.size(); ++k) {
    m(0, static_cast<Eigen::Index>(k)) = static_cast<Real>(flat_system[k] / kCoordScale);
  }
  return m;
}

namespace {

RealMatrix decode_batch(SystemModel& model, const RealMatrix& z, const RealMatrix& cond) {
  RTape tape;
  const RVar out = model.decode(tape, tape.constant(z), tape.constant(cond), Binding::Frozen);
  return out.value();
}

std::vector<double> row_in_dataset_units(const RealMatrix& m, Eigen::Index row) {
  std::vector<double> flat(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index k = 0; k < m.cols(); ++k) flat[static_cast<std::size_t>(k)] = m(row, k) * kCoordScale;
  return flat;
}

}  // namespace

std::vector<SystemParams> sample_params(SystemModel& model, std::span<const Condition> conds, Rng& rng,
                                        std::size_t batch) {
  if (batch == 0) batch = 1;
  std::vector<SystemParams> out;
  out.reserve(conds.size());
  const std::size_t n_points = model.architecture().n_points;
  for (std::size_t start = 0; start < conds.size(); start += batch) {
    const auto chunk = conds.subspan(start, std::min(batch, conds.size() - start));
    const RealMatrix cond = normalize_conditions(model.normalizer(), chunk);
    const RealMatrix z = ad::standard_normal<Real>(cond.rows(), static_cast<Eigen::Index>(model.latent_dim()), rng);
    const RealMatrix systems = decode_batch(model, z, cond);
    for (Eigen::Index r = 0; r < systems.rows(); ++r) {
      out.push_back(estimate_params_flat(row_in_dataset_units(systems, r), n_points));
    }
  }
  return out;
}

PointCloudSystem sample_system(SystemModel& model, const Condition& cond, Rng& rng) {
  const RealMatrix z = ad::standard_normal<Real>(1, static_cast<Eigen::Index>(model.latent_dim()), rng);
  return decode_systems(model, z, std::span(&cond, 1)).front();
}

std::vector<PointCloudSystem> decode_systems(SystemModel& model, const RealMatrix& z, std::span<const Condition> conds) {
  if (static_cast<std::size_t>(z.rows()) != conds.size() ||
      static_cast<std::size_t>(z.cols()) != model.latent_dim()) {
    throw ShapeError("latent matrix does not match conditions / latent size");
  }
  const RealMatrix systems = decode_batch(model, z, normalize_conditions(model.normalizer(), conds));
  std::vector<PointCloudSystem> out;
  out.reserve(conds.size());
  for (Eigen::Index r = 0; r < systems.rows(); ++r) {
    out.push_back(PointCloudSystem::unflatten(row_in_dataset_units(systems, r), model.architecture().n_points));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

Checkpoint to_checkpoint(const SystemModel& model) {
  Checkpoint ckpt;
  ckpt.header["kind"] = std::string(to_string(model.kind()));
  ckpt.header["architecture"] = model.architecture().to_json();
  ckpt.header["normalization"] = {{"coord_scale", kCoordScale},
                                  {"log_m_mean", model.normalizer().log_m_mean()},
                                  {"log_m_std", model.normalizer().log_m_std()}};
  ckpt.tensors = snapshot(model.parameters());
  return ckpt;
}

std::unique_ptr<SystemModel> model_from_checkpoint(const Checkpoint& ckpt) {
  try {
    const std::string kind = ckpt.header.at("kind").get<std::string>();
    if (kind == "marginal") throw SchemaError("checkpoint holds a marginal VAE, not a system model");
    auto model = make_model(model_kind_from_string(kind), Architecture::from_json(ckpt.header.at("architecture")));
    const auto& norm = ckpt.header.at("normalization");
    if (norm.at("coord_scale").get<double>() != kCoordScale) throw SchemaError("checkpoint uses another coord scale");
    model->set_normalizer({norm.at("log_m_mean").get<double>(), norm.at("log_m_std").get<double>()});
    restore(ckpt, model->parameters());
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("bad model checkpoint header: ") + e.what());
  }
}

Checkpoint to_checkpoint(const MarginalVae& model) {
  Checkpoint ckpt;
  ckpt.header["kind"] = "marginal";
  ckpt.header["component"] = std::string(to_string(model.component()));
  ckpt.header["architecture"] = model.architecture().to_json();
  ckpt.tensors = snapshot(model.parameters());
  return ckpt;
}

MarginalVae marginal_from_checkpoint(const Checkpoint& ckpt) {
  try {
    if (ckpt.header.at("kind") != "marginal") throw SchemaError("checkpoint does not hold a marginal VAE");
    MarginalVae m(component_from_string(ckpt.header.at("component").get<std::string>()),
                  Architecture::from_json(ckpt.header.at("architecture")));
    restore(ckpt, m.parameters());
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("bad marginal checkpoint header: ") + e.what());
  }
}

}  // namespace metagen
