#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metagen/datagen.hpp"
#include "metagen/models.hpp"

namespace metagen {

/// Reconstruction unit scale of the system VAEs (marginals keep the LossConfig default).
inline constexpr double kSystemReconScale = 30.0;

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t marginal_epochs = 200;
  std::size_t batch_size = 128;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::vector<ModelKind> kinds = {kModelKinds.begin(), kModelKinds.end()};
  std::uint64_t marginal_seed = 0;
  ad::AdamConfig vae_optimizer{1e-3, 0.9, 0.999, 1e-8};
  ad::AdamConfig gan_optimizer{2e-4, 0.5, 0.999, 1e-8};
  Architecture arch;
  LossConfig marginal_loss;
  LossConfig loss{kSystemReconScale};
  double validation_fraction = 0.1;
  std::filesystem::path dataset_path;
  std::filesystem::path output_dir;
  std::size_t threads = 1;
  /// Receives one-line progress messages; may be empty.
  std::function<void(const std::string&)> progress;

  /// Throws PreconditionError on empty/duplicate seeds, zero epochs or batch size.
  void validate() const;
};

struct EpochLog {
  std::size_t epoch = 0;  // 0 = before training
  double train_loss = 0.0;
  double val_loss = 0.0;
  double seconds = 0.0;
};

struct RunLog {
  std::string run_id;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<EpochLog> epochs;

  void write_csv(const std::filesystem::path& path) const;
  static RunLog read_csv(const std::filesystem::path& path);
  double total_seconds() const noexcept;
};

/// Rendered, normalized view of a dataset shared by every training run.
class TrainingData {
 public:
  TrainingData(const Dataset& ds, double validation_fraction);

  std::size_t size() const noexcept { return records_.size(); }
  std::size_t n_points() const noexcept { return n_points_; }
  const std::vector<DatasetRecord>& records() const noexcept { return records_; }
  const Split& split() const noexcept { return split_; }
  const ConditionNormalizer& normalizer() const noexcept { return normalizer_; }
  const std::string& dataset_hash() const noexcept { return dataset_hash_; }

  /// Rows of the [N x 360] system matrix (network units).
  RealMatrix systems(std::span<const std::size_t> rows) const;
  /// Rows of one component slice of the system matrix.
  RealMatrix component(Component c, std::span<const std::size_t> rows) const;
  /// Normalized conditions for the given rows.
  RealMatrix conditions(std::span<const std::size_t> rows) const;

 private:
  std::vector<DatasetRecord> records_;
  std::size_t n_points_;
  Split split_;
  ConditionNormalizer normalizer_;
  RealMatrix systems_;
  RealMatrix conditions_;
  std::string dataset_hash_;
};

/// Hash of everything that determines a run's checkpoint bytes.
std::string run_config_hash(const TrainConfig& cfg, std::string_view run_kind, std::uint64_t seed,
                            const std::string& dataset_hash, const std::vector<std::string>& dependency_hashes = {});

struct MarginalRun {
  MarginalVae model;
  RunLog log;
};

MarginalRun train_marginal(Component c, const TrainingData& data, const TrainConfig& cfg, std::uint64_t seed);
std::array<MarginalRun, 4> train_marginals(const TrainingData& data, const TrainConfig& cfg);

/// Mean |estimate_radius(reconstruction) - true radius| over the validation set,
/// per circle of the component, with z = posterior mean.
std::vector<double> marginal_radius_error(MarginalVae& m, const TrainingData& data);

struct ModelRun {
  std::unique_ptr<SystemModel> model;
  RunLog log;
};

/// Trains one system-level model. Meta-VAE needs the four marginals in
/// component order (PreconditionError otherwise); other kinds ignore them.
ModelRun train_model(ModelKind kind, const TrainingData& data, std::span<const MarginalVae* const> marginals,
                     const TrainConfig& cfg, std::uint64_t seed);

/// Validation loss of a VAE-family model with z = posterior mean.
double validation_loss(ConditionalVae& model, const TrainingData& data, const LossConfig& loss);

enum class RunStatus { Pending, Complete, Failed, Dirty };

std::string_view to_string(RunStatus s) noexcept;
RunStatus run_status_from_string(std::string_view s);

struct RunRecord {
  std::string kind;  // "marginal" or a ModelKind name
  std::string component;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string checkpoint;  // relative to the experiment directory
  std::string checkpoint_sha256;
  std::string metrics;  // run log CSV, relative
  RunStatus status = RunStatus::Pending;
  std::string error;

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

/// JSON index of every run of an experiment directory.
struct Manifest {
  std::string dataset;
  std::string dataset_sha256;
  std::map<std::string, RunRecord> runs;

  nlohmann::json to_json() const;
  static Manifest from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static Manifest load(const std::filesystem::path& path);
};

std::string marginal_run_id(Component c);
std::string model_run_id(ModelKind k, std::uint64_t seed);

struct ExperimentSummary {
  Manifest manifest;
  std::vector<std::string> trained;  // ids (re)trained by this call
  std::vector<std::string> skipped;  // ids already complete and hash-verified
  std::vector<std::string> failed;
};

/// Trains the marginals (once, with cfg.marginal_seed) and every (kind, seed)
/// pair into cfg.output_dir, resuming from an existing manifest: complete runs
/// whose checkpoint hash verifies are skipped, anything else is retrained.
ExperimentSummary run_experiment(const TrainConfig& cfg);

/// Only the four marginal runs of run_experiment.
ExperimentSummary run_marginals(const TrainConfig& cfg);

/// Loads the four marginal checkpoints recorded in a manifest.
std::array<MarginalVae, 4> load_marginals(const Manifest& m, const std::filesystem::path& dir);

/// Worker count from METAGEN_THREADS, falling back to the hardware concurrency.
std::size_t default_thread_count();

}  // namespace metagen
