#include "metagen/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "metagen/csv.hpp"
#include "metagen/error.hpp"
#include "metagen/hash.hpp"
#include "metagen/parallel.hpp"

namespace metagen {

namespace {

constexpr std::uint64_t kSamplingStream = 7;

std::size_t kind_rank(std::string_view kind) {
  for (std::size_t i = 0; i < kModelKinds.size(); ++i) {
    if (to_string(kModelKinds[i]) == kind) return i;
  }
  return kModelKinds.size();
}

template <typename T>
bool selected(std::span<const T> filter, const T& v) {
  return filter.empty() || std::find(filter.begin(), filter.end(), v) != filter.end();
}

void write_histograms(CsvWriter& out, const std::string& model, std::uint64_t seed,
                      std::span<const SystemParams> params, const HistogramOptions& opt) {
  for (JointPair pair : kJointPairs) {
    const Histogram2D h = joint_histogram(params, pair, opt);
    for (std::size_t i = 0; i < h.rows(); ++i) {
      for (std::size_t j = 0; j < h.cols(); ++j) {
        if (h.at(i, j) != 0.0) out.row(model, seed, to_string(pair), i, j, h.at(i, j));
      }
    }
  }
}

void write_boxplot(CsvWriter& out, const std::string& model, std::uint64_t seed, std::string_view error,
                   const ErrorStats& s) {
  out.row(model, seed, error, s.mean, s.stddev, s.min, s.q1, s.median, s.q3, s.max);
}

void write_error_histogram(CsvWriter& out, const std::string& model, std::uint64_t seed, std::string_view error,
                           std::span<const double> values, const EvalConfig& cfg) {
  std::vector<std::size_t> counts(cfg.log_error_bins, 0);
  const double lo = cfg.log_error_range.lo;
  const double hi = cfg.log_error_range.hi;
  for (double v : values) {
    // Zero errors land in the lowest bin.
    const double lv = v == 0.0 ? lo : std::log10(std::abs(v));
    ++counts[Histogram2D::bin_index(lv, cfg.log_error_range, cfg.log_error_bins)];
  }
  const double width = (hi - lo) / static_cast<double>(cfg.log_error_bins);
  for (std::size_t b = 0; b < counts.size(); ++b) {
    out.row(model, seed, error, lo + width * static_cast<double>(b), lo + width * static_cast<double>(b + 1),
            counts[b]);
  }
}

std::string csv_safe(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

Dataset held_out_reference(const EvalConfig& cfg, std::size_t n_points) {
  DatasetConfig dc;
  dc.n_records = cfg.n_samples;
  dc.seed = cfg.condition_seed;
  dc.n_points = n_points;
  return build_dataset(dc);
}

std::pair<double, double> residual_pair(const SystemParams& generated, const Condition& c) noexcept {
  return {c.m_cube * c.x, system_mass(generated) * c.y};
}

ModelEvaluation evaluate_model(SystemModel& model, std::uint64_t model_seed, std::span<const DatasetRecord> reference,
                               const EvalConfig& cfg) {
  std::vector<Condition> conds;
  conds.reserve(reference.size());
  for (const auto& r : reference) conds.push_back(r.cond);

  ModelEvaluation out;
  out.model = std::string(to_string(model.kind()));
  out.seed = model_seed;
  Rng rng = make_rng({cfg.condition_seed, static_cast<std::uint64_t>(model.kind()), model_seed, kSamplingStream});
  out.generated = sample_params(model, conds, rng, cfg.sample_batch);

  std::vector<GeneratedSample> samples;
  samples.reserve(conds.size());
  for (std::size_t i = 0; i < conds.size(); ++i) {
    samples.push_back({out.generated[i], conds[i]});
    const auto [x, y] = residual_pair(out.generated[i], conds[i]);
    out.fit.add(x, y);
  }
  out.eval = evaluate_samples(samples, reference, cfg.hist);
  return out;
}

ExperimentEvaluation evaluate_experiment(const std::filesystem::path& experiment_dir,
                                         const std::filesystem::path& out_dir, const EvalConfig& cfg,
                                         std::span<const ModelKind> kinds, std::span<const std::uint64_t> seeds) {
  const Manifest manifest = Manifest::load(experiment_dir / "manifest.json");
  if (cfg.n_samples == 0) throw PreconditionError("sample count must be positive");

  struct Job {
    std::string id;
    RunRecord rec;
  };
  std::vector<Job> jobs;
  ExperimentEvaluation result;
  for (const auto& [id, rec] : manifest.runs) {
    if (rec.kind == "marginal") continue;
    const ModelKind kind = model_kind_from_string(rec.kind);
    if (!selected(kinds, kind) || !selected(seeds, rec.seed)) continue;
    if (rec.status != RunStatus::Complete) {
      result.excluded.push_back({id, rec.kind, rec.seed, std::string(to_string(rec.status)) + ": " + rec.error});
      continue;
    }
    jobs.push_back({id, rec});
  }
  std::sort(jobs.begin(), jobs.end(), [](const Job& a, const Job& b) {
    return std::pair(kind_rank(a.rec.kind), a.rec.seed) < std::pair(kind_rank(b.rec.kind), b.rec.seed);
  });

  std::size_t n_points = kDefaultCirclePoints;
  if (!jobs.empty()) {
    n_points = Architecture::from_json(load_checkpoint(experiment_dir / jobs.front().rec.checkpoint).header.at("architecture"))
                   .n_points;
  }
  const Dataset reference = held_out_reference(cfg, n_points);

  std::vector<std::optional<ModelEvaluation>> evals(jobs.size());
  std::vector<std::string> errors(jobs.size());
  parallel_for(jobs.size(), cfg.threads, [&](std::size_t i) {
    const auto& job = jobs[i];
    try {
      const auto path = experiment_dir / job.rec.checkpoint;
      if (sha256_file(path) != job.rec.checkpoint_sha256) throw SchemaError("checkpoint hash mismatch for " + path.string());
      auto model = model_from_checkpoint(load_checkpoint(path));
      evals[i] = evaluate_model(*model, job.rec.seed, reference.records, cfg);
      if (cfg.progress) cfg.progress("evaluated " + job.id);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  std::filesystem::create_directories(out_dir / "residuals");
  CsvWriter hist(out_dir / "histograms.csv", {"model", "seed", "pair", "i", "j", "value"});
  CsvWriter box(out_dir / "error_boxplot.csv", {"model", "seed", "error", "mean", "stddev", "min", "q1", "median", "q3", "max"});
  CsvWriter ehist(out_dir / "error_histograms.csv", {"model", "seed", "error", "log10_lo", "log10_hi", "count"});
  CsvWriter fits(out_dir / "residual_fit.csv",
                 {"model", "seed", "n", "slope", "intercept", "mean_ordinate", "sum_x", "sum_y", "sum_xx", "sum_xy"});

  std::vector<SystemParams> ref_params;
  ref_params.reserve(reference.records.size());
  for (const auto& r : reference.records) ref_params.push_back(r.params);
  write_histograms(hist, "reference", cfg.condition_seed, ref_params, cfg.hist);

  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (!evals[i]) {
      result.excluded.push_back({jobs[i].id, jobs[i].rec.kind, jobs[i].rec.seed, "evaluation failed: " + errors[i]});
      continue;
    }
    const ModelEvaluation& ev = *evals[i];
    result.evaluated.push_back(jobs[i].id);
    result.report.add(ev.model, ev.seed, ev.eval);
    write_histograms(hist, ev.model, ev.seed, ev.generated, cfg.hist);
    write_boxplot(box, ev.model, ev.seed, "contact", ev.eval.abs_contact);
    write_boxplot(box, ev.model, ev.seed, "performance", ev.eval.abs_performance);
    write_error_histogram(ehist, ev.model, ev.seed, "contact", ev.eval.contact, cfg);
    write_error_histogram(ehist, ev.model, ev.seed, "performance", ev.eval.performance, cfg);
    fits.row(ev.model, ev.seed, ev.fit.n, ev.fit.slope(), ev.fit.intercept(), ev.fit.mean_ordinate(), ev.fit.sum_x,
             ev.fit.sum_y, ev.fit.sum_xx, ev.fit.sum_xy);
    CsvWriter res(out_dir / "residuals" / (ev.model + "_seed" + std::to_string(ev.seed) + ".csv"),
                  {"m_cube_x", "m_generated_y"});
    for (std::size_t k = 0; k < ev.generated.size(); ++k) {
      const auto [x, y] = residual_pair(ev.generated[k], reference.records[k].cond);
      res.row(x, y);
    }
  }
  result.report.write_csv(out_dir / "eval_report.csv");
  CsvWriter excluded(out_dir / "excluded_runs.csv", {"run_id", "model", "seed", "reason"});
  for (const auto& e : result.excluded) excluded.row(e.run_id, e.model, e.seed, csv_safe(e.reason));
  return result;
}

}  // namespace metagen
