#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "metagen/datagen.hpp"
#include "metagen/metrics.hpp"
#include "metagen/models.hpp"
#include "metagen/training.hpp"

namespace metagen {

struct EvalConfig {
  std::size_t n_samples = 50000;
  /// Seed of the held-out condition sampler (the dataset generator at a fresh seed).
  std::uint64_t condition_seed = 1000003;
  std::size_t sample_batch = 1024;
  HistogramOptions hist;
  /// log10 |error| bins of the error histograms.
  Interval log_error_range{-4.0, 8.0};
  std::size_t log_error_bins = 120;
  std::size_t threads = 1;
  std::function<void(const std::string&)> progress;
};

/// Reference systems and their conditions, shared by every evaluated model.
Dataset held_out_reference(const EvalConfig& cfg, std::size_t n_points);

struct ModelEvaluation {
  std::string model;
  std::uint64_t seed = 0;
  std::vector<SystemParams> generated;
  SampleEvaluation eval;
  ResidualFit fit;
};

/// Samples one system per reference condition and scores it. Sampling noise is
/// seeded from (condition seed, model kind, model seed).
ModelEvaluation evaluate_model(SystemModel& model, std::uint64_t model_seed, std::span<const DatasetRecord> reference,
                               const EvalConfig& cfg);

/// Residual pair of one generated system: (m_cube * x, system_mass * y).
std::pair<double, double> residual_pair(const SystemParams& generated, const Condition& c) noexcept;

struct ExcludedRun {
  std::string run_id;
  std::string model;
  std::uint64_t seed = 0;
  std::string reason;
};

struct ExperimentEvaluation {
  EvalReport report;
  std::vector<ExcludedRun> excluded;
  std::vector<std::string> evaluated;  // run ids
};

/// Evaluates every complete system-model run of the experiment directory whose
/// kind and seed are selected (empty = all), writing into out_dir:
///   eval_report.csv        model,seed,metric,value
///   histograms.csv         model,seed,pair,i,j,value (non-zero bins; model "reference" for the reference)
///   error_boxplot.csv      model,seed,error,mean,stddev,min,q1,median,q3,max
///   error_histograms.csv   model,seed,error,log10_lo,log10_hi,count
///   residuals/<model>_seed<k>.csv  m_cube_x,m_generated_y
///   residual_fit.csv       model,seed,n,slope,intercept,mean_ordinate,sum_x,sum_y,sum_xx,sum_xy
///   excluded_runs.csv      run_id,model,seed,reason
ExperimentEvaluation evaluate_experiment(const std::filesystem::path& experiment_dir,
                                         const std::filesystem::path& out_dir, const EvalConfig& cfg,
                                         std::span<const ModelKind> kinds = {},
                                         std::span<const std::uint64_t> seeds = {});

}  // namespace metagen
