#include "metagen/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "metagen/csv.hpp"
#include "metagen/error.hpp"
#include "metagen/hash.hpp"
#include "metagen/parallel.hpp"

namespace metagen {

namespace {

constexpr std::uint64_t kInitStream = 0;
constexpr std::uint64_t kNoiseStream = 1;
constexpr std::uint64_t kBatchStream = 2;
constexpr std::uint64_t kValidationStream = 3;
constexpr std::size_t kEvalChunk = 2048;

std::uint64_t stream_id(ModelKind k) { return static_cast<std::uint64_t>(k) + 1; }
std::uint64_t stream_id(Component c) { return static_cast<std::uint64_t>(c) + 100; }

using Clock = std::chrono::steady_clock;

void report(const TrainConfig& cfg, const std::string& msg) {
  if (cfg.progress) cfg.progress(msg);
}

void require_finite(double v, std::size_t epoch, const std::string& what) {
  if (!std::isfinite(v)) throw DivergenceError(epoch, what + " is not finite");
}

/// Mean of f(rows) weighted by chunk size over `indices`.
template <typename F>
double chunked_mean(std::span<const std::size_t> indices, F&& f) {
  if (indices.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < indices.size(); i += kEvalChunk) {
    const auto rows = indices.subspan(i, std::min(kEvalChunk, indices.size() - i));
    sum += f(rows) * static_cast<double>(rows.size());
  }
  return sum / static_cast<double>(indices.size());
}

/// Shared epoch loop: batch order is a pure function of (seed, epoch).
template <typename Step, typename Val>
RunLog run_epochs(const std::string& run_id, std::uint64_t seed, std::size_t epochs, const TrainingData& data,
                  const TrainConfig& cfg, Step&& step, Val&& val) {
  RunLog log;
  log.run_id = run_id;
  log.seed = seed;
  const auto& train = data.split().train;
  const double v0 = val();
  require_finite(v0, 0, "validation loss");
  log.epochs.push_back({0, std::nan(""), v0, 0.0});
  std::vector<std::size_t> batch;
  for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
    const auto t0 = Clock::now();
    Rng rng = make_rng({seed, epoch, kBatchStream});
    const auto order = permutation(train.size(), rng);
    double sum = 0.0;
    for (std::size_t i = 0; i < order.size(); i += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - i);
      batch.resize(n);
      for (std::size_t k = 0; k < n; ++k) batch[k] = train[order[i + k]];
      const double loss = step(std::span<const std::size_t>(batch));
      require_finite(loss, epoch, "training loss");
      sum += loss * static_cast<double>(n);
    }
    const double train_loss = sum / static_cast<double>(train.size());
    const double val_loss = val();
    require_finite(val_loss, epoch, "validation loss");
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    log.epochs.push_back({epoch, train_loss, val_loss, secs});
    if (epoch == epochs || epoch % 10 == 0) {
      std::ostringstream msg;
      msg << run_id << " epoch " << epoch << "/" << epochs << " train " << train_loss << " val " << val_loss;
      report(cfg, msg.str());
    }
  }
  return log;
}

double gan_validation_loss(VanillaCgan& gan, const TrainingData& data, std::uint64_t seed) {
  Rng rng = make_rng({seed, stream_id(ModelKind::VanillaGan), kValidationStream});
  return chunked_mean(data.split().validation, [&](std::span<const std::size_t> rows) {
    RTape tape;
    const RVar c = tape.constant(data.conditions(rows));
    const auto b = static_cast<Eigen::Index>(rows.size());
    const RVar fake =
        gan.decode(tape, tape.constant(ad::standard_normal<Real>(b, gan.latent_dim(), rng)), c, Binding::Frozen);
    const RVar real_logit = gan.discriminate(tape, tape.constant(data.systems(rows)), c, Binding::Frozen);
    const RVar fake_logit = gan.discriminate(tape, fake, c, Binding::Frozen);
    return static_cast<double>(
        ad::add(ad::bce_with_logits(real_logit, Real(1)), ad::bce_with_logits(fake_logit, Real(0))).value()(0, 0));
  });
}

bool run_verified(const Manifest& m, const std::string& id, const std::string& hash,
                  const std::filesystem::path& dir) {
  const auto it = m.runs.find(id);
  if (it == m.runs.end()) return false;
  const RunRecord& r = it->second;
  if (r.status != RunStatus::Complete || r.config_hash != hash || r.checkpoint.empty()) return false;
  const auto path = dir / r.checkpoint;
  return std::filesystem::exists(path) && sha256_file(path) == r.checkpoint_sha256;
}

void run_pool(std::vector<std::function<void()>>& jobs, std::size_t threads) {
  parallel_for(jobs.size(), threads, [&](std::size_t i) { jobs[i](); });
}

struct Experiment {
  const TrainConfig& cfg;
  TrainingData data;
  std::filesystem::path manifest_path;
  ExperimentSummary summary;
  std::mutex mu;

  Experiment(const TrainConfig& c, const Dataset& ds)
      : cfg(c), data(ds, c.validation_fraction), manifest_path(c.output_dir / "manifest.json") {
    if (std::filesystem::exists(manifest_path)) summary.manifest = Manifest::load(manifest_path);
    summary.manifest.dataset = std::filesystem::absolute(cfg.dataset_path).lexically_normal().string();
    summary.manifest.dataset_sha256 = data.dataset_hash();
    summary.manifest.save(manifest_path);
  }

  /// Queues `train` unless the run is complete and verified; `train` returns the
  /// checkpoint and log, which are written and recorded here.
  void schedule(std::vector<std::function<void()>>& jobs, const std::string& id, RunRecord rec,
                std::function<std::pair<Checkpoint, RunLog>()> train) {
    if (run_verified(summary.manifest, id, rec.config_hash, cfg.output_dir)) {
      summary.skipped.push_back(id);
      return;
    }
    if (const auto it = summary.manifest.runs.find(id); it != summary.manifest.runs.end()) {
      it->second.status = RunStatus::Dirty;
    }
    jobs.push_back([this, id, rec, train = std::move(train)]() mutable {
      report(cfg, "training " + id);
      try {
        auto [ckpt, log] = train();
        ckpt.header["run_id"] = id;
        ckpt.header["seed"] = rec.seed;
        ckpt.header["config_hash"] = rec.config_hash;
        log.config_hash = rec.config_hash;
        rec.checkpoint = "checkpoints/" + id + ".ckpt";
        rec.metrics = "logs/" + id + ".csv";
        save_checkpoint(ckpt, cfg.output_dir / rec.checkpoint);
        log.write_csv(cfg.output_dir / rec.metrics);
        rec.checkpoint_sha256 = sha256_file(cfg.output_dir / rec.checkpoint);
        rec.status = RunStatus::Complete;
        rec.error.clear();
        std::lock_guard lock(mu);
        summary.manifest.runs[id] = rec;
        summary.trained.push_back(id);
        summary.manifest.save(manifest_path);
        report(cfg, "finished " + id);
      } catch (const std::exception& e) {
        rec.status = RunStatus::Failed;
        rec.error = e.what();
        std::lock_guard lock(mu);
        summary.manifest.runs[id] = rec;
        summary.failed.push_back(id);
        summary.manifest.save(manifest_path);
        report(cfg, "failed " + id + ": " + e.what());
      }
    });
  }

  void marginal_stage() {
    std::vector<std::function<void()>> jobs;
    for (Component c : kComponents) {
      const std::string id = marginal_run_id(c);
      RunRecord rec;
      rec.kind = "marginal";
      rec.component = std::string(to_string(c));
      rec.seed = cfg.marginal_seed;
      rec.config_hash = run_config_hash(cfg, "marginal:" + rec.component, rec.seed, data.dataset_hash());
      schedule(jobs, id, rec, [this, c] {
        MarginalRun run = train_marginal(c, data, cfg, cfg.marginal_seed);
        Checkpoint ckpt = to_checkpoint(run.model);
        ckpt.header["normalization"]["log_m_mean"] = data.normalizer().log_m_mean();
        ckpt.header["normalization"]["log_m_std"] = data.normalizer().log_m_std();
        return std::pair{std::move(ckpt), std::move(run.log)};
      });
    }
    run_pool(jobs, cfg.threads);
    flush();
  }

  void model_stage() {
    std::vector<std::string> marginal_hashes;
    bool marginals_ready = true;
    for (Component c : kComponents) {
      const auto it = summary.manifest.runs.find(marginal_run_id(c));
      if (it == summary.manifest.runs.end() || it->second.status != RunStatus::Complete) {
        marginals_ready = false;
        marginal_hashes.emplace_back();
      } else {
        marginal_hashes.push_back(it->second.checkpoint_sha256);
      }
    }
    std::shared_ptr<std::array<MarginalVae, 4>> marginals;
    const bool need_meta = std::find(cfg.kinds.begin(), cfg.kinds.end(), ModelKind::MetaVae) != cfg.kinds.end();
    if (need_meta && marginals_ready) {
      marginals = std::make_shared<std::array<MarginalVae, 4>>(load_marginals(summary.manifest, cfg.output_dir));
    }

    // Longest runs first for a better spread across workers.
    std::vector<ModelKind> order(cfg.kinds.rbegin(), cfg.kinds.rend());
    std::vector<std::function<void()>> jobs;
    for (ModelKind kind : order) {
      for (std::uint64_t seed : cfg.seeds) {
        const std::string id = model_run_id(kind, seed);
        RunRecord rec;
        rec.kind = std::string(to_string(kind));
        rec.seed = seed;
        const auto deps = kind == ModelKind::MetaVae ? marginal_hashes : std::vector<std::string>{};
        rec.config_hash = run_config_hash(cfg, rec.kind, seed, data.dataset_hash(), deps);
        schedule(jobs, id, rec, [this, kind, seed, marginals] {
          std::array<const MarginalVae*, 4> ptrs{};
          if (marginals) {
            for (std::size_t i = 0; i < 4; ++i) ptrs[i] = &(*marginals)[i];
          } else if (kind == ModelKind::MetaVae) {
            throw PreconditionError("Meta-VAE needs four complete marginal runs");
          }
          ModelRun run = train_model(kind, data, ptrs, cfg, seed);
          Checkpoint ckpt = to_checkpoint(*run.model);
          return std::pair{std::move(ckpt), std::move(run.log)};
        });
      }
    }
    run_pool(jobs, cfg.threads);
    flush();
  }

  void flush() {
    std::lock_guard lock(mu);
    summary.manifest.save(manifest_path);
  }
};

}  // namespace

void TrainConfig::validate() const {
  if (seeds.empty()) throw PreconditionError("at least one seed is required");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw PreconditionError("seeds must be distinct");
  }
  if (kinds.empty()) throw PreconditionError("at least one model kind is required");
  if (epochs == 0 || marginal_epochs == 0) throw PreconditionError("epochs must be positive");
  if (batch_size == 0) throw PreconditionError("batch size must be positive");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw PreconditionError("validation fraction must be in (0, 1)");
  }
}

void RunLog::write_csv(const std::filesystem::path& path) const {
  CsvWriter out(path, {"epoch", "train_loss", "val_loss", "seconds"});
  for (const auto& e : epochs) out.row(e.epoch, e.train_loss, e.val_loss, e.seconds);
}

RunLog RunLog::read_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv_file(path);
  RunLog log;
  const auto epoch = t.column("epoch");
  const auto train = t.column("train_loss");
  const auto val = t.column("val_loss");
  const auto secs = t.column("seconds");
  for (const auto& row : t.rows) {
    log.epochs.push_back({std::stoull(row[epoch]), std::stod(row[train]), std::stod(row[val]), std::stod(row[secs])});
  }
  return log;
}

double RunLog::total_seconds() const noexcept {
  double s = 0.0;
  for (const auto& e : epochs) s += e.seconds;
  return s;
}

TrainingData::TrainingData(const Dataset& ds, double validation_fraction)
    : records_(ds.records),
      n_points_(ds.header.n_points),
      split_(train_validation_split(ds.records.size(), ds.header.seed, validation_fraction)),
      dataset_hash_(sha256_hex(serialize_dataset(ds))) {
  if (split_.train.empty()) throw PreconditionError("training split is empty");
  std::vector<Condition> train_conds;
  train_conds.reserve(split_.train.size());
  for (std::size_t i : split_.train) train_conds.push_back(records_[i].cond);
  normalizer_ = ConditionNormalizer::fit(train_conds);

  const std::size_t dim = flat_system_size(n_points_);
  systems_.resize(static_cast<Eigen::Index>(records_.size()), static_cast<Eigen::Index>(dim));
  conditions_.resize(static_cast<Eigen::Index>(records_.size()), static_cast<Eigen::Index>(kConditionDim));
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto flat = render_system(records_[i].params, n_points_).flatten();
    const auto row = static_cast<Eigen::Index>(i);
    for (std::size_t k = 0; k < dim; ++k) {
      systems_(row, static_cast<Eigen::Index>(k)) = static_cast<Real>(flat[k] / kCoordScale);
    }
    const auto c = normalizer_.normalize(records_[i].cond);
    for (std::size_t k = 0; k < kConditionDim; ++k) conditions_(row, static_cast<Eigen::Index>(k)) = static_cast<Real>(c[k]);
  }
}

RealMatrix TrainingData::systems(std::span<const std::size_t> rows) const {
  RealMatrix out(static_cast<Eigen::Index>(rows.size()), systems_.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = systems_.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

RealMatrix TrainingData::component(Component c, std::span<const std::size_t> rows) const {
  const auto s = component_slice(c, n_points_);
  RealMatrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(s.size));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = systems_.row(static_cast<Eigen::Index>(rows[i]))
                                                .segment(static_cast<Eigen::Index>(s.offset), static_cast<Eigen::Index>(s.size));
  }
  return out;
}

RealMatrix TrainingData::conditions(std::span<const std::size_t> rows) const {
  RealMatrix out(static_cast<Eigen::Index>(rows.size()), conditions_.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = conditions_.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

std::string run_config_hash(const TrainConfig& cfg, std::string_view run_kind, std::uint64_t seed,
                            const std::string& dataset_hash, const std::vector<std::string>& dependency_hashes) {
  const bool marginal = run_kind.starts_with("marginal");
  const bool gan = run_kind == to_string(ModelKind::VanillaGan);
  const auto& opt = gan ? cfg.gan_optimizer : cfg.vae_optimizer;
  nlohmann::json j = {
      {"run_kind", run_kind},
      {"seed", seed},
      {"dataset", dataset_hash},
      {"epochs", marginal ? cfg.marginal_epochs : cfg.epochs},
      {"batch_size", cfg.batch_size},
      {"optimizer", {{"lr", opt.lr}, {"beta1", opt.beta1}, {"beta2", opt.beta2}, {"eps", opt.eps}}},
      {"architecture", cfg.arch.to_json()},
      {"validation_fraction", cfg.validation_fraction},
      {"dependencies", dependency_hashes},
  };
  if (!gan) j["loss"] = (marginal ? cfg.marginal_loss : cfg.loss).to_json();
  return sha256_hex(j.dump());
}

MarginalRun train_marginal(Component c, const TrainingData& data, const TrainConfig& cfg, std::uint64_t seed) {
  Architecture arch = cfg.arch;
  arch.n_points = data.n_points();
  MarginalVae model(c, arch);
  Rng init_rng = make_rng({seed, stream_id(c), kInitStream});
  model.init(init_rng);
  Rng noise = make_rng({seed, stream_id(c), kNoiseStream});
  ad::Adam<Real> opt(model.parameters(), cfg.vae_optimizer);

  auto step = [&](std::span<const std::size_t> rows) {
    RTape tape;
    const RVar x = tape.constant(data.component(c, rows));
    const RealMatrix eps =
        ad::standard_normal<Real>(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(model.latent_dim()), noise);
    const auto fwd = model.forward(tape, x, &eps);
    const RVar loss = model.loss(fwd, x, cfg.marginal_loss);
    opt.zero_grad();
    tape.backward(loss);
    opt.step();
    return static_cast<double>(loss.value()(0, 0));
  };
  auto val = [&] {
    return chunked_mean(data.split().validation, [&](std::span<const std::size_t> rows) {
      RTape tape;
      const RVar x = tape.constant(data.component(c, rows));
      return static_cast<double>(model.loss(model.forward(tape, x, nullptr), x, cfg.marginal_loss).value()(0, 0));
    });
  };
  RunLog log = run_epochs(marginal_run_id(c), seed, cfg.marginal_epochs, data, cfg, step, val);
  return {std::move(model), std::move(log)};
}

std::array<MarginalRun, 4> train_marginals(const TrainingData& data, const TrainConfig& cfg) {
  return {train_marginal(kComponents[0], data, cfg, cfg.marginal_seed),
          train_marginal(kComponents[1], data, cfg, cfg.marginal_seed),
          train_marginal(kComponents[2], data, cfg, cfg.marginal_seed),
          train_marginal(kComponents[3], data, cfg, cfg.marginal_seed)};
}

std::vector<double> marginal_radius_error(MarginalVae& m, const TrainingData& data) {
  const std::size_t n = data.n_points();
  const std::size_t circles = m.input_dim() / (2 * n);
  std::vector<double> sum(circles, 0.0);
  const auto& val = data.split().validation;
  for (std::size_t i = 0; i < val.size(); i += kEvalChunk) {
    const auto rows = std::span<const std::size_t>(val).subspan(i, std::min(kEvalChunk, val.size() - i));
    RTape tape;
    const RealMatrix x = data.component(m.component(), rows);
    const RVar recon = m.forward(tape, tape.constant(x), nullptr).recon;
    const RealMatrix& r = recon.value();
    std::vector<double> pts(2 * n);
    for (Eigen::Index b = 0; b < r.rows(); ++b) {
      for (std::size_t k = 0; k < circles; ++k) {
        const auto off = static_cast<Eigen::Index>(k * 2 * n);
        for (std::size_t j = 0; j < 2 * n; ++j) pts[j] = r(b, off + static_cast<Eigen::Index>(j)) * kCoordScale;
        const double est = estimate_radius(std::span<const double>(pts));
        for (std::size_t j = 0; j < 2 * n; ++j) pts[j] = x(b, off + static_cast<Eigen::Index>(j)) * kCoordScale;
        const double truth = estimate_radius(std::span<const double>(pts));
        sum[k] += std::abs(est - truth);
      }
    }
  }
  for (double& s : sum) s /= static_cast<double>(std::max<std::size_t>(val.size(), 1));
  return sum;
}

double validation_loss(ConditionalVae& model, const TrainingData& data, const LossConfig& loss) {
  return chunked_mean(data.split().validation, [&](std::span<const std::size_t> rows) {
    RTape tape;
    const RVar sys = tape.constant(data.systems(rows));
    const auto fwd = model.forward(tape, sys, tape.constant(data.conditions(rows)), nullptr);
    return static_cast<double>(system_vae_loss(fwd.components, sys, fwd.post, loss, model.architecture()).value()(0, 0));
  });
}

ModelRun train_model(ModelKind kind, const TrainingData& data, std::span<const MarginalVae* const> marginals,
                     const TrainConfig& cfg, std::uint64_t seed) {
  Architecture arch = cfg.arch;
  arch.n_points = data.n_points();
  ModelRun run;
  run.model = make_model(kind, arch);
  run.model->set_normalizer(data.normalizer());
  Rng init_rng = make_rng({seed, stream_id(kind), kInitStream});
  run.model->init(init_rng);
  Rng noise = make_rng({seed, stream_id(kind), kNoiseStream});
  const std::string id = model_run_id(kind, seed);

  if (kind == ModelKind::VanillaGan) {
    auto& gan = static_cast<VanillaCgan&>(*run.model);
    ad::Adam<Real> g_opt(gan.generator_parameters(), cfg.gan_optimizer);
    ad::Adam<Real> d_opt(gan.discriminator_parameters(), cfg.gan_optimizer);
    std::size_t epoch = 0;
    auto step = [&](std::span<const std::size_t> rows) {
      const auto losses = cgan_step(gan, g_opt, d_opt, data.systems(rows), data.conditions(rows), noise);
      require_finite(losses.discriminator, epoch, "discriminator loss");
      return losses.generator;
    };
    auto val = [&] {
      ++epoch;
      return gan_validation_loss(gan, data, seed);
    };
    run.log = run_epochs(id, seed, cfg.epochs, data, cfg, step, val);
    return run;
  }

  auto& vae = static_cast<ConditionalVae&>(*run.model);
  std::string frozen_before;
  if (kind == ModelKind::MetaVae) {
    if (marginals.size() != 4 || std::any_of(marginals.begin(), marginals.end(), [](auto* m) { return m == nullptr; })) {
      throw PreconditionError("Meta-VAE needs the four pretrained marginals");
    }
    std::array<const MarginalVae*, 4> ptrs{};
    for (std::size_t i = 0; i < 4; ++i) {
      if (marginals[i]->component() != kComponents[i]) throw PreconditionError("marginals must be in component order");
      ptrs[i] = marginals[i];
    }
    auto& meta = static_cast<MetaVae&>(vae);
    meta.set_marginals(ptrs);
    frozen_before = weights_hash(meta.marginal_parameters());
  }

  ad::Adam<Real> opt(vae.trainable_parameters(), cfg.vae_optimizer);
  auto step = [&](std::span<const std::size_t> rows) {
    RTape tape;
    const RVar sys = tape.constant(data.systems(rows));
    const RealMatrix eps =
        ad::standard_normal<Real>(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(vae.latent_dim()), noise);
    const auto fwd = vae.forward(tape, sys, tape.constant(data.conditions(rows)), &eps);
    const RVar loss = system_vae_loss(fwd.components, sys, fwd.post, cfg.loss, vae.architecture());
    opt.zero_grad();
    tape.backward(loss);
    opt.step();
    return static_cast<double>(loss.value()(0, 0));
  };
  auto val = [&] { return validation_loss(vae, data, cfg.loss); };
  run.log = run_epochs(id, seed, cfg.epochs, data, cfg, step, val);

  if (kind == ModelKind::MetaVae) {
    const auto& meta = static_cast<const MetaVae&>(vae);
    if (weights_hash(meta.marginal_parameters()) != frozen_before) {
      throw PreconditionError("frozen marginal decoders changed during Meta-VAE training");
    }
  }
  return run;
}

std::string_view to_string(RunStatus s) noexcept {
  switch (s) {
    case RunStatus::Pending: return "pending";
    case RunStatus::Complete: return "complete";
    case RunStatus::Failed: return "failed";
    case RunStatus::Dirty: return "dirty";
  }
  return "?";
}

RunStatus run_status_from_string(std::string_view s) {
  if (s == "pending") return RunStatus::Pending;
  if (s == "complete") return RunStatus::Complete;
  if (s == "failed") return RunStatus::Failed;
  if (s == "dirty") return RunStatus::Dirty;
  throw SchemaError("unknown run status '" + std::string(s) + "'");
}

nlohmann::json Manifest::to_json() const {
  nlohmann::json runs_json = nlohmann::json::object();
  for (const auto& [id, r] : runs) {
    runs_json[id] = {{"kind", r.kind},
                     {"component", r.component},
                     {"seed", r.seed},
                     {"config_hash", r.config_hash},
                     {"checkpoint", r.checkpoint},
                     {"checkpoint_sha256", r.checkpoint_sha256},
                     {"metrics", r.metrics},
                     {"status", to_string(r.status)},
                     {"error", r.error}};
  }
  return {{"dataset", dataset}, {"dataset_sha256", dataset_sha256}, {"runs", runs_json}};
}

Manifest Manifest::from_json(const nlohmann::json& j) {
  Manifest m;
  try {
    m.dataset = j.at("dataset").get<std::string>();
    m.dataset_sha256 = j.at("dataset_sha256").get<std::string>();
    for (const auto& [id, r] : j.at("runs").items()) {
      RunRecord rec;
      rec.kind = r.at("kind").get<std::string>();
      rec.component = r.value("component", "");
      rec.seed = r.at("seed").get<std::uint64_t>();
      rec.config_hash = r.at("config_hash").get<std::string>();
      rec.checkpoint = r.value("checkpoint", "");
      rec.checkpoint_sha256 = r.value("checkpoint_sha256", "");
      rec.metrics = r.value("metrics", "");
      rec.status = run_status_from_string(r.at("status").get<std::string>());
      rec.error = r.value("error", "");
      m.runs.emplace(id, std::move(rec));
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("bad manifest: ") + e.what());
  }
  return m;
}

void Manifest::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out << to_json().dump(2) << '\n';
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

Manifest Manifest::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("manifest is not valid JSON: ") + e.what());
  }
  return from_json(j);
}

std::string marginal_run_id(Component c) { return "marginal-" + std::string(to_string(c)); }

std::string model_run_id(ModelKind k, std::uint64_t seed) {
  return std::string(to_string(k)) + "-seed" + std::to_string(seed);
}

ExperimentSummary run_experiment(const TrainConfig& cfg) {
  cfg.validate();
  Experiment ex(cfg, load_dataset(cfg.dataset_path));
  ex.marginal_stage();
  ex.model_stage();
  return std::move(ex.summary);
}

ExperimentSummary run_marginals(const TrainConfig& cfg) {
  cfg.validate();
  Experiment ex(cfg, load_dataset(cfg.dataset_path));
  ex.marginal_stage();
  return std::move(ex.summary);
}

std::array<MarginalVae, 4> load_marginals(const Manifest& m, const std::filesystem::path& dir) {
  auto load = [&](Component c) {
    const auto it = m.runs.find(marginal_run_id(c));
    if (it == m.runs.end() || it->second.status != RunStatus::Complete) {
      throw PreconditionError("marginal run '" + marginal_run_id(c) + "' is not complete");
    }
    const auto path = dir / it->second.checkpoint;
    if (sha256_file(path) != it->second.checkpoint_sha256) {
      throw SchemaError("checkpoint hash mismatch for '" + path.string() + "'");
    }
    MarginalVae v = marginal_from_checkpoint(load_checkpoint(path));
    if (v.component() != c) throw SchemaError("'" + path.string() + "' holds the wrong component");
    return v;
  };
  return {load(kComponents[0]), load(kComponents[1]), load(kComponents[2]), load(kComponents[3])};
}

std::size_t default_thread_count() {
  if (const char* env = std::getenv("METAGEN_THREADS"); env != nullptr) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return v;
  }
  return std::max(1U, std::thread::hardware_concurrency());
}

}  // namespace metagen
