#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "metagen/autodiff.hpp"
#include "metagen/checkpoint.hpp"
#include "metagen/domain.hpp"
#include "metagen/normalization.hpp"
#include "metagen/random.hpp"

namespace metagen {

using RTape = ad::Tape<Real>;
using RVar = ad::Var<Real>;
using ad::Binding;

enum class ModelKind { MetaVae, Smvae, VanillaVae, VanillaGan };

inline constexpr std::array<ModelKind, 4> kModelKinds = {ModelKind::MetaVae, ModelKind::Smvae, ModelKind::VanillaVae,
                                                         ModelKind::VanillaGan};

std::string_view to_string(ModelKind k) noexcept;
ModelKind model_kind_from_string(std::string_view s);

std::string_view to_string(Component c) noexcept;
Component component_from_string(std::string_view s);

/// Layer widths and latent sizes of every architecture.
struct Architecture {
  std::size_t n_points = kDefaultCirclePoints;
  std::size_t marginal_cyl_hidden = 128;
  std::size_t marginal_den_hidden = 64;
  std::size_t cyl_latent = 8;
  std::size_t den_latent = 4;
  std::size_t block_hidden = 64;
  std::size_t merge_hidden = 128;
  std::size_t trunk_hidden = 128;
  std::size_t meta_latent = 16;
  std::size_t cvae_hidden = 256;
  std::size_t cvae_latent = 16;
  std::size_t gan_hidden = 256;
  std::size_t gan_noise = 16;
  double logvar_clamp = 10.0;

  std::size_t system_dim() const noexcept { return flat_system_size(n_points); }
  std::size_t component_dim(Component c) const noexcept { return component_slice(c, n_points).size; }
  std::size_t marginal_latent(Component c) const noexcept;
  std::size_t marginal_hidden(Component c) const noexcept;

  nlohmann::json to_json() const;
  static Architecture from_json(const nlohmann::json& j);

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

inline constexpr std::size_t kConditionDim = 3;

/// Reconstruction weighting of the VAE objective. Each component term is
/// weight * MSE, with weight = unit_scale * (sum_over_elements ? n_elements : 1);
/// the defaults turn the mean over normalized coordinates into a per-system sum
/// of squared errors in dataset units.
struct LossConfig {
  double recon_unit_scale = kCoordScale * kCoordScale;
  bool sum_over_elements = true;
  double kl_weight = 1.0;

  double component_weight(std::size_t n_elements) const noexcept {
    return recon_unit_scale * (sum_over_elements ? static_cast<double>(n_elements) : 1.0);
  }

  nlohmann::json to_json() const;
  static LossConfig from_json(const nlohmann::json& j);

  friend bool operator==(const LossConfig&, const LossConfig&) = default;
};

/// Encoder head: mean and log-variance (clamped to +-logvar_clamp).
struct Posterior {
  RVar mu;
  RVar logvar;
};

/// Sum_i w_i * MSE(recon_i, target_i) + kl_weight * KL(N(mu, sigma) || N(0, I)).
RVar meta_loss(std::span<const RVar> recon, std::span<const RVar> targets, const Posterior& post,
               std::span<const double> weights, double kl_weight = 1.0);

/// Same objective with component weights taken from `loss` and per-component slices of flattened systems.
RVar system_vae_loss(const std::array<RVar, 4>& recon, RVar target_flat, const Posterior& post, const LossConfig& loss,
                     const Architecture& arch);

/// VAE over a single unitary component (one cylinder or one density circle).
class MarginalVae {
 public:
  MarginalVae(Component component, const Architecture& arch);

  struct Forward {
    RVar recon;
    Posterior post;
  };

  void init(Rng& rng);
  Posterior encode(RTape& tape, RVar x, Binding b = Binding::Trainable);
  RVar decode(RTape& tape, RVar z, Binding b = Binding::Trainable);
  /// eps == nullptr decodes the posterior mean.
  Forward forward(RTape& tape, RVar x, const RealMatrix* eps);
  RVar loss(const Forward& f, RVar target, const LossConfig& cfg);

  Component component() const noexcept { return component_; }
  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t latent_dim() const noexcept { return latent_dim_; }
  const Architecture& architecture() const noexcept { return arch_; }

  ad::Mlp<Real>& decoder() noexcept { return decoder_; }
  const ad::Mlp<Real>& decoder() const noexcept { return decoder_; }

  std::vector<RealParameter*> parameters();
  std::vector<const RealParameter*> parameters() const;
  std::vector<const RealParameter*> decoder_parameters() const;

 private:
  Component component_;
  Architecture arch_;
  std::size_t input_dim_;
  std::size_t latent_dim_;
  ad::Mlp<Real> encoder_;
  ad::Mlp<Real> decoder_;
};

/// Common interface of the four system-level generators.
class SystemModel {
 public:
  explicit SystemModel(const Architecture& arch) : arch_(arch) {}
  virtual ~SystemModel() = default;

  virtual ModelKind kind() const noexcept = 0;
  virtual std::size_t latent_dim() const noexcept = 0;
  virtual void init(Rng& rng) = 0;

  /// z [B x latent] and normalized conditions [B x 3] to normalized flattened systems [B x 360].
  virtual RVar decode(RTape& tape, RVar z, RVar cond, Binding b) = 0;

  /// Every tensor stored in a checkpoint.
  std::vector<RealParameter*> parameters();
  std::vector<const RealParameter*> parameters() const;
  /// Tensors updated by training (Meta-VAE excludes its frozen marginal decoders).
  virtual std::vector<RealParameter*> trainable_parameters();

  const Architecture& architecture() const noexcept { return arch_; }
  const ConditionNormalizer& normalizer() const noexcept { return normalizer_; }
  void set_normalizer(const ConditionNormalizer& n) noexcept { normalizer_ = n; }

 protected:
  virtual void collect(std::vector<RealParameter*>& out) = 0;

  Architecture arch_;
  ConditionNormalizer normalizer_;
};

/// VAE-family system model (Meta-VAE, SMVAE, vanilla conditional VAE).
class ConditionalVae : public SystemModel {
 public:
  using SystemModel::SystemModel;

  struct Forward {
    std::array<RVar, 4> components;  // normalized reconstructions in kComponents order
    Posterior post;
  };

  /// eps == nullptr decodes the posterior mean.
  virtual Forward forward(RTape& tape, RVar system, RVar cond, const RealMatrix* eps) = 0;
};

/// Parallel per-component encoder blocks merged with the condition (Meta-VAE and SMVAE).
class BlockEncoder {
 public:
  BlockEncoder(const Architecture& arch, std::size_t latent);
  void init(Rng& rng);
  Posterior encode(RTape& tape, RVar system, RVar cond);
  void collect(std::vector<RealParameter*>& out);

 private:
  Architecture arch_;
  std::size_t latent_;
  std::array<ad::Mlp<Real>, 4> blocks_;
  ad::Mlp<Real> merge_;
};

class MetaVae final : public ConditionalVae {
 public:
  explicit MetaVae(const Architecture& arch);

  ModelKind kind() const noexcept override { return ModelKind::MetaVae; }
  std::size_t latent_dim() const noexcept override { return arch_.meta_latent; }
  void init(Rng& rng) override;
  RVar decode(RTape& tape, RVar z, RVar cond, Binding b) override;
  Forward forward(RTape& tape, RVar system, RVar cond, const RealMatrix* eps) override;
  std::vector<RealParameter*> trainable_parameters() override;

  /// Latent codes for the four marginal generators, in kComponents order.
  std::array<RVar, 4> meta_decode(RTape& tape, RVar z, RVar cond, Binding b);

  /// Installs pretrained marginal decoders (always evaluated frozen).
  void set_marginals(const std::array<const MarginalVae*, 4>& marginals);
  std::vector<const RealParameter*> marginal_parameters() const;

 protected:
  void collect(std::vector<RealParameter*>& out) override;

 private:
  std::array<RVar, 4> components_from_codes(RTape& tape, const std::array<RVar, 4>& codes);
  void collect_trainable(std::vector<RealParameter*>& out);

  BlockEncoder encoder_;
  ad::Mlp<Real> trunk_;
  std::array<ad::Affine<Real>, 4> heads_;
  std::array<ad::Mlp<Real>, 4> marginals_;
};

class Smvae final : public ConditionalVae {
 public:
  explicit Smvae(const Architecture& arch);

  ModelKind kind() const noexcept override { return ModelKind::Smvae; }
  std::size_t latent_dim() const noexcept override { return arch_.meta_latent; }
  void init(Rng& rng) override;
  RVar decode(RTape& tape, RVar z, RVar cond, Binding b) override;
  Forward forward(RTape& tape, RVar system, RVar cond, const RealMatrix* eps) override;

 protected:
  void collect(std::vector<RealParameter*>& out) override;

 private:
  std::array<RVar, 4> decode_components(RTape& tape, RVar z, RVar cond, Binding b);

  BlockEncoder encoder_;
  ad::Mlp<Real> trunk_;
  std::array<ad::Mlp<Real>, 4> blocks_;
};

class VanillaCvae final : public ConditionalVae {
 public:
  explicit VanillaCvae(const Architecture& arch);

  ModelKind kind() const noexcept override { return ModelKind::VanillaVae; }
  std::size_t latent_dim() const noexcept override { return arch_.cvae_latent; }
  void init(Rng& rng) override;
  RVar decode(RTape& tape, RVar z, RVar cond, Binding b) override;
  Forward forward(RTape& tape, RVar system, RVar cond, const RealMatrix* eps) override;

 protected:
  void collect(std::vector<RealParameter*>& out) override;

 private:
  ad::Mlp<Real> encoder_;
  ad::Mlp<Real> decoder_;
};

class VanillaCgan final : public SystemModel {
 public:
  explicit VanillaCgan(const Architecture& arch);

  ModelKind kind() const noexcept override { return ModelKind::VanillaGan; }
  std::size_t latent_dim() const noexcept override { return arch_.gan_noise; }
  void init(Rng& rng) override;
  RVar decode(RTape& tape, RVar z, RVar cond, Binding b) override;
  /// Discriminator logit [B x 1] for (system, cond).
  RVar discriminate(RTape& tape, RVar system, RVar cond, Binding b);

  std::vector<RealParameter*> generator_parameters();
  std::vector<RealParameter*> discriminator_parameters();
  ad::Mlp<Real>& discriminator() noexcept { return discriminator_; }

 protected:
  void collect(std::vector<RealParameter*>& out) override;

 private:
  ad::Mlp<Real> generator_;
  ad::Mlp<Real> discriminator_;
};

std::unique_ptr<SystemModel> make_model(ModelKind kind, const Architecture& arch);

struct GanStepLosses {
  double generator = 0.0;
  double discriminator = 0.0;
};

/// One discriminator update on real + fake, then one non-saturating generator update.
GanStepLosses cgan_step(VanillaCgan& gan, ad::Adam<Real>& g_opt, ad::Adam<Real>& d_opt, const RealMatrix& real,
                        const RealMatrix& cond, Rng& rng);

/// Conditions to a [B x 3] matrix with the model's frozen statistics.
RealMatrix normalize_conditions(const ConditionNormalizer& n, std::span<const Condition> conds);

/// Flattened systems scaled into network units.
RealMatrix to_network_units(std::span<const double> flat_system);

/// One sample per condition: z ~ N(0, I) (rows consumed in condition order),
/// decoded and mapped back to scalar parameters.
std::vector<SystemParams> sample_params(SystemModel& model, std::span<const Condition> conds, Rng& rng,
                                        std::size_t batch = 1024);
PointCloudSystem sample_system(SystemModel& model, const Condition& cond, Rng& rng);

/// Decode explicit latents (no sampling) into point clouds in dataset units.
std::vector<PointCloudSystem> decode_systems(SystemModel& model, const RealMatrix& z, std::span<const Condition> conds);

Checkpoint to_checkpoint(const SystemModel& model);
std::unique_ptr<SystemModel> model_from_checkpoint(const Checkpoint& ckpt);

Checkpoint to_checkpoint(const MarginalVae& model);
MarginalVae marginal_from_checkpoint(const Checkpoint& ckpt);

}  // namespace metagen
