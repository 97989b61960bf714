#include "metagen_cli/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "metagen/csv.hpp"
#include "metagen/datagen.hpp"
#include "metagen/error.hpp"
#include "metagen/evaluation.hpp"
#include "metagen/hash.hpp"
#include "metagen/report.hpp"
#include "metagen/training.hpp"

namespace metagen::cli {

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

const std::vector<std::string> kModelNames = {"meta-vae", "smvae", "vanilla-vae", "vanilla-gan"};

struct GenArgs {
  std::size_t n = 20000;
  std::uint64_t seed = 0;
  std::size_t points = kDefaultCirclePoints;
  bool no_shuffle = false;
  fs::path out;
};

struct TrainArgs {
  fs::path data;
  fs::path out;
  std::vector<std::string> models = kModelNames;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::size_t epochs = 200;
  std::size_t marginal_epochs = 200;
  std::size_t batch = 128;
  std::uint64_t marginal_seed = 0;
  std::size_t threads = 0;
  double vae_lr = 1e-3;
  double gan_lr = 2e-4;
  double kl_weight = 1.0;
  double recon_scale = kSystemReconScale;
  double marginal_recon_scale = kCoordScale * kCoordScale;
  double validation_fraction = 0.1;
  bool quiet = false;
};

struct EvalArgs {
  fs::path exp;
  fs::path out;
  std::size_t samples = 50000;
  std::uint64_t condition_seed = EvalConfig{}.condition_seed;
  std::size_t bins = 50;
  std::vector<std::string> models;
  std::vector<std::uint64_t> seeds;
  std::size_t threads = 0;
  bool quiet = false;
};

struct ReportArgs {
  fs::path eval;
  fs::path out;
  bool assert_ordering = false;
};

std::size_t resolve_threads(std::size_t requested) { return requested > 0 ? requested : default_thread_count(); }

std::vector<ModelKind> to_kinds(const std::vector<std::string>& names) {
  std::vector<ModelKind> kinds;
  for (const auto& n : names) kinds.push_back(model_kind_from_string(n));
  return kinds;
}

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) throw IoError(what + " not found: '" + p.string() + "'");
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void add_config(CLI::App* sub) {
  // Consumed by expand_config before parsing; declared here for --help.
  sub->add_option("--config", "key = value file with option defaults (flags win)");
}

bool has_flag(const std::vector<std::string>& args, const std::string& flag) {
  return std::any_of(args.begin(), args.end(),
                     [&](const std::string& a) { return a == flag || a.starts_with(flag + "="); });
}

/// Replaces `--config FILE` with `--key=value` for every key of FILE not given
/// on the command line. Keys apply to the invoked subcommand, either bare or in
/// a [subcommand] section.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  if (args.size() < 2) return args;
  const auto it = std::find_if(args.begin(), args.end(),
                               [](const std::string& a) { return a == "--config" || a.starts_with("--config="); });
  if (it == args.end()) return args;
  std::string file;
  auto last = it + 1;
  if (*it == "--config") {
    if (last == args.end()) throw CLI::ArgumentMismatch("--config needs a file");
    file = *last++;
  } else {
    file = it->substr(std::string("--config=").size());
  }
  args.erase(it, last);
  const std::string sub = args[1];
  std::ifstream probe(file);
  if (!probe) throw IoError("config file not found: '" + file + "'");
  std::vector<std::string> extra;
  for (const auto& item : CLI::ConfigINI().from_file(file)) {
    if (!item.parents.empty() && !(item.parents.size() == 1 && item.parents[0] == sub)) continue;
    if (item.name == "++" || item.name == "--") continue;
    const std::string flag = "--" + item.name;
    if (has_flag(args, flag)) continue;
    std::string value;
    for (std::size_t i = 0; i < item.inputs.size(); ++i) value += (i ? "," : "") + item.inputs[i];
    extra.push_back(flag + "=" + value);
  }
  args.insert(args.begin() + 2, extra.begin(), extra.end());
  return args;
}

void add_train_options(CLI::App* sub, TrainArgs& a, bool full) {
  sub->add_option("--data", a.data, "Dataset JSONL file")->required();
  sub->add_option("--out", a.out, "Experiment directory")->required();
  sub->add_option("--marginal-epochs", a.marginal_epochs, "Marginal VAE epochs")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--batch-size", a.batch, "Mini-batch size")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--marginal-seed", a.marginal_seed, "Seed of the marginal runs")->capture_default_str();
  sub->add_option("--threads", a.threads, "Worker count (0 = METAGEN_THREADS or all cores)")->capture_default_str();
  sub->add_option("--vae-lr", a.vae_lr, "Adam learning rate of VAE-family models")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--kl-weight", a.kl_weight, "KL weight of the VAE objective")->check(CLI::NonNegativeNumber)->capture_default_str();
  sub->add_option("--recon-scale", a.recon_scale, "Reconstruction unit scale of the system VAEs")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--marginal-recon-scale", a.marginal_recon_scale, "Reconstruction unit scale of the marginal VAEs")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--validation-fraction", a.validation_fraction, "Validation share of the dataset")
      ->check(CLI::Range(0.01, 0.99))
      ->capture_default_str();
  sub->add_flag("--quiet", a.quiet, "Suppress progress output");
  if (!full) return;
  sub->add_option("--models", a.models, "Models to train")
      ->delimiter(',')
      ->check(CLI::IsMember(kModelNames))
      ->capture_default_str();
  sub->add_option("--seeds", a.seeds, "Model seeds")->delimiter(',')->capture_default_str();
  sub->add_option("--epochs", a.epochs, "System-model epochs")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--gan-lr", a.gan_lr, "Adam learning rate of the GAN")->check(CLI::PositiveNumber)->capture_default_str();
}

TrainConfig to_config(const TrainArgs& a, std::ostream& err) {
  TrainConfig cfg;
  cfg.dataset_path = a.data;
  cfg.output_dir = a.out;
  cfg.kinds = to_kinds(a.models);
  cfg.seeds = a.seeds;
  cfg.epochs = a.epochs;
  cfg.marginal_epochs = a.marginal_epochs;
  cfg.batch_size = a.batch;
  cfg.marginal_seed = a.marginal_seed;
  cfg.threads = resolve_threads(a.threads);
  cfg.vae_optimizer.lr = a.vae_lr;
  cfg.gan_optimizer.lr = a.gan_lr;
  cfg.loss.kl_weight = a.kl_weight;
  cfg.loss.recon_unit_scale = a.recon_scale;
  cfg.marginal_loss.kl_weight = a.kl_weight;
  cfg.marginal_loss.recon_unit_scale = a.marginal_recon_scale;
  cfg.validation_fraction = a.validation_fraction;
  if (!a.quiet) cfg.progress = [&err](const std::string& msg) { err << msg << '\n'; };
  return cfg;
}

void print_runs(const ExperimentSummary& s, std::ostream& out) {
  for (const auto& [id, rec] : s.manifest.runs) {
    out << std::left << std::setw(28) << id << ' ' << to_string(rec.status);
    if (!rec.error.empty()) out << " (" << rec.error << ')';
    out << '\n';
  }
  out << "trained " << s.trained.size() << ", skipped " << s.skipped.size() << ", failed " << s.failed.size() << '\n';
}

int cmd_gen_data(const GenArgs& a, std::ostream& out) {
  const auto t0 = Clock::now();
  DatasetConfig cfg;
  cfg.n_records = a.n;
  cfg.seed = a.seed;
  cfg.n_points = a.points;
  cfg.shuffle = !a.no_shuffle;
  const Dataset ds = build_dataset(cfg);
  save_dataset(ds, a.out);
  out << "wrote " << ds.records.size() << " records to " << a.out.string() << " (sha256 " << sha256_file(a.out)
      << ", " << std::fixed << std::setprecision(2) << seconds_since(t0) << " s)\n";
  return kOk;
}

int cmd_train_marginals(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  require_file(a.data, "dataset");
  const ExperimentSummary s = run_marginals(to_config(a, err));
  print_runs(s, out);
  return s.failed.empty() ? kOk : kRunFailure;
}

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  require_file(a.data, "dataset");
  const ExperimentSummary s = run_experiment(to_config(a, err));
  print_runs(s, out);
  // Failed GAN runs are tolerated; they are excluded (and reported) at evaluation.
  for (const auto& id : s.failed) {
    if (s.manifest.runs.at(id).kind != to_string(ModelKind::VanillaGan)) return kRunFailure;
  }
  return kOk;
}

int cmd_evaluate(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  require_file(a.exp / "manifest.json", "experiment manifest");
  EvalConfig cfg;
  cfg.n_samples = a.samples;
  cfg.condition_seed = a.condition_seed;
  cfg.hist.bins_x = a.bins;
  cfg.hist.bins_y = a.bins;
  cfg.threads = resolve_threads(a.threads);
  if (!a.quiet) cfg.progress = [&err](const std::string& msg) { err << msg << '\n'; };
  const fs::path dir = a.out.empty() ? a.exp / "eval" : a.out;
  const auto kinds = to_kinds(a.models);
  const auto t0 = Clock::now();
  const ExperimentEvaluation ev = evaluate_experiment(a.exp, dir, cfg, kinds, a.seeds);
  out << "evaluated " << ev.evaluated.size() << " runs into " << dir.string() << " (" << std::fixed
      << std::setprecision(1) << seconds_since(t0) << " s)\n";
  for (const auto& e : ev.excluded) out << "excluded " << e.run_id << ": " << e.reason << '\n';
  return ev.evaluated.empty() ? kRunFailure : kOk;
}

int cmd_report(const ReportArgs& a, std::ostream& out, std::ostream& err) {
  require_file(a.eval / "eval_report.csv", "evaluation report");
  const EvalReport report = EvalReport::read_csv(a.eval / "eval_report.csv");
  std::vector<ResidualFitRow> fits;
  if (fs::is_regular_file(a.eval / "residual_fit.csv")) fits = read_residual_fits(a.eval / "residual_fit.csv");
  const ReportSummary s = summarize(report, fits);
  write_summary(s, a.out.empty() ? a.eval : a.out);

  out << std::left << std::setw(14) << "model" << std::setw(26) << "metric" << std::setw(8) << "seeds" << std::setw(16)
      << "mean" << "variance\n";
  for (const auto& [model, metrics] : s.aggregate) {
    for (std::string_view metric : report_metric_names()) {
      const auto it = metrics.find(std::string(metric));
      if (it == metrics.end()) continue;
      out << std::left << std::setw(14) << model << std::setw(26) << metric << std::setw(8) << it->second.n_seeds
          << std::setw(16) << std::setprecision(6) << it->second.mean << it->second.variance << '\n';
    }
  }
  if (fs::is_regular_file(a.eval / "excluded_runs.csv")) {
    const CsvTable t = read_csv_file(a.eval / "excluded_runs.csv");
    out << "excluded runs: " << t.rows.size() << '\n';
    for (const auto& row : t.rows) out << "  " << row[t.column("run_id")] << ": " << row[t.column("reason")] << '\n';
  }
  for (const auto& line : s.verdicts) out << line << '\n';
  for (const auto& c : s.checks) out << format_check(c) << '\n';

  if (!a.assert_ordering) return kOk;
  if (s.checks.empty()) {
    err << "paper ordering needs evaluated runs of all four model kinds\n";
    return kRunFailure;
  }
  return all_pass(s.checks) ? kOk : kRunFailure;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Nested-cylinder system generation: data, training, evaluation and reports", "metagen"};
  app.require_subcommand(1, 1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate the nested-cylinder dataset (JSONL)");
  add_config(gen_cmd);
  gen_cmd->add_option("--n", gen.n, "Number of records")->check(CLI::PositiveNumber)->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
  gen_cmd->add_option("--points", gen.points, "Points per circle")->check(CLI::Range(3, 100000))->capture_default_str();
  gen_cmd->add_flag("--no-shuffle", gen.no_shuffle, "Keep records grouped by branch");
  gen_cmd->add_option("--out", gen.out, "Output file")->required();

  TrainArgs marg;
  auto* marg_cmd = app.add_subcommand("train-marginals", "Pretrain the four marginal VAEs");
  add_config(marg_cmd);
  add_train_options(marg_cmd, marg, false);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train marginals and every (model, seed) run; resumable");
  add_config(train_cmd);
  add_train_options(train_cmd, train, true);

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "Sample and score every trained model");
  add_config(eval_cmd);
  eval_cmd->add_option("--exp", eval.exp, "Experiment directory (with manifest.json)")->required();
  eval_cmd->add_option("--out", eval.out, "Output directory (default <exp>/eval)");
  eval_cmd->add_option("--samples", eval.samples, "Samples per run")->check(CLI::PositiveNumber)->capture_default_str();
  eval_cmd->add_option("--condition-seed", eval.condition_seed, "Seed of the held-out conditions")->capture_default_str();
  eval_cmd->add_option("--bins", eval.bins, "Histogram bins per axis")->check(CLI::PositiveNumber)->capture_default_str();
  eval_cmd->add_option("--models", eval.models, "Models to evaluate (default all)")
      ->delimiter(',')
      ->check(CLI::IsMember(kModelNames));
  eval_cmd->add_option("--seeds", eval.seeds, "Seeds to evaluate (default all)")->delimiter(',');
  eval_cmd->add_option("--threads", eval.threads, "Worker count (0 = METAGEN_THREADS or all cores)");
  eval_cmd->add_flag("--quiet", eval.quiet, "Suppress progress output");

  ReportArgs rep;
  auto* rep_cmd = app.add_subcommand("report", "Cross-seed tables and ordering verdicts");
  add_config(rep_cmd);
  rep_cmd->add_option("--eval", rep.eval, "Evaluation directory")->required();
  rep_cmd->add_option("--out", rep.out, "Output directory (default the evaluation directory)");
  rep_cmd->add_flag("--assert-paper-ordering", rep.assert_ordering,
                    "Exit non-zero unless every model-ordering and residual check passes");

  try {
    std::vector<std::string> args(argv, argv + argc);
    args = expand_config(std::move(args));
    std::vector<const char*> ptrs;
    for (const auto& a : args) ptrs.push_back(a.c_str());
    app.parse(static_cast<int>(ptrs.size()), ptrs.data());
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen_cmd) return cmd_gen_data(gen, out);
    if (*marg_cmd) return cmd_train_marginals(marg, out, err);
    if (*train_cmd) return cmd_train(train, out, err);
    if (*eval_cmd) return cmd_evaluate(eval, out, err);
    if (*rep_cmd) return cmd_report(rep, out, err);
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << '\n';
    return kRunFailure;
  } catch (const metagen::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const SchemaError& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const PreconditionError& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRunFailure;
  }
  return kUsage;
}

}  // namespace metagen::cli
