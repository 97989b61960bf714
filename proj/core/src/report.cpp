#include "metagen/report.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include "metagen/csv.hpp"
#include "metagen/error.hpp"

namespace metagen {

namespace {

constexpr std::string_view kMeta = "meta-vae";
constexpr std::string_view kSmvae = "smvae";
constexpr std::string_view kVae = "vanilla-vae";
constexpr std::string_view kGan = "vanilla-gan";

std::string num(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

double mean_of(const ReportSummary& s, std::string_view model, std::string_view metric) {
  return s.aggregate.at(std::string(model)).at(std::string(metric)).mean;
}

void ordering_checks(ReportSummary& s, const OrderingThresholds& t) {
  const std::vector<std::string_view> ordered = {"mean_abs_ep", "wasserstein_rext1_rint2", "wasserstein_rext1_rext2",
                                                 "wasserstein_rext2_rint2", "wasserstein_d1_d2"};
  for (std::string_view metric : ordered) {
    const double meta = mean_of(s, kMeta, metric);
    const double vae = mean_of(s, kVae, metric);
    const double gan = mean_of(s, kGan, metric);
    const double smvae = mean_of(s, kSmvae, metric);
    s.checks.push_back({std::string(metric) + " ordering", meta < vae && vae < gan,
                        "meta-vae " + num(meta) + " < vanilla-vae " + num(vae) + " < vanilla-gan " + num(gan)});
    const double rel = std::abs(smvae - meta) / meta;
    s.checks.push_back({std::string(metric) + " smvae near meta-vae", rel <= t.smvae_relative,
                        "|smvae - meta-vae| / meta-vae = " + num(rel) + " (limit " + num(t.smvae_relative) + ")"});
  }
  const double gan_ec = mean_of(s, kGan, "mean_abs_ec");
  double others = 0.0;
  for (std::string_view m : {kMeta, kSmvae, kVae}) others = std::max(others, mean_of(s, m, "mean_abs_ec"));
  s.checks.push_back({"mean_abs_ec gan largest", gan_ec >= t.gan_contact_factor * others,
                      "vanilla-gan " + num(gan_ec) + " vs max other " + num(others) + " (factor " +
                          num(others > 0.0 ? gan_ec / others : INFINITY) + ", need " + num(t.gan_contact_factor) + ")"});

  auto fit_ok = [&](const ResidualFit& f, std::string& detail) {
    const double slope = f.slope();
    const double icpt = f.intercept();
    const double limit = t.intercept_fraction * std::abs(f.mean_ordinate());
    detail = "slope " + num(slope) + ", |intercept| " + num(std::abs(icpt)) + " (limit " + num(limit) + ")";
    return slope >= t.slope.lo && slope <= t.slope.hi && std::abs(icpt) < limit;
  };
  std::string detail;
  const auto meta_fit = s.pooled_fits.find(std::string(kMeta));
  if (meta_fit != s.pooled_fits.end()) {
    const bool ok = fit_ok(meta_fit->second, detail);
    s.checks.push_back({"meta-vae residual fit", ok, detail});
  }
  const auto gan_fit = s.pooled_fits.find(std::string(kGan));
  if (gan_fit != s.pooled_fits.end()) {
    const bool ok = fit_ok(gan_fit->second, detail);
    s.checks.push_back({"vanilla-gan residual fit out of bounds", !ok, detail});
  }
}

}  // namespace

std::vector<ResidualFitRow> read_residual_fits(const std::filesystem::path& path) {
  const CsvTable t = read_csv_file(path);
  const auto model = t.column("model");
  const auto seed = t.column("seed");
  const auto n = t.column("n");
  const auto sx = t.column("sum_x");
  const auto sy = t.column("sum_y");
  const auto sxx = t.column("sum_xx");
  const auto sxy = t.column("sum_xy");
  std::vector<ResidualFitRow> out;
  for (const auto& row : t.rows) {
    ResidualFitRow r;
    r.model = row[model];
    r.seed = std::stoull(row[seed]);
    r.fit.n = std::stoull(row[n]);
    r.fit.sum_x = std::stod(row[sx]);
    r.fit.sum_y = std::stod(row[sy]);
    r.fit.sum_xx = std::stod(row[sxx]);
    r.fit.sum_xy = std::stod(row[sxy]);
    out.push_back(std::move(r));
  }
  return out;
}

ReportSummary summarize(const EvalReport& report, std::span<const ResidualFitRow> fits,
                        const OrderingThresholds& thresholds) {
  ReportSummary s;
  s.aggregate = report.aggregate();
  for (const auto& f : fits) s.pooled_fits[f.model].merge(f.fit);

  const auto models = report.models();
  if (models.size() >= 2) {
    for (std::string_view metric : report_metric_names()) {
      if (metric == "n_samples") continue;
      std::vector<std::pair<double, std::string>> ranked;
      for (const auto& m : models) {
        const auto it = s.aggregate.at(m).find(std::string(metric));
        if (it != s.aggregate.at(m).end()) ranked.emplace_back(it->second.mean, m);
      }
      std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      std::string line = std::string(metric) + ": winner=" + ranked.front().second + " order=";
      for (std::size_t i = 0; i < ranked.size(); ++i) line += (i ? " < " : "") + ranked[i].second;
      s.verdicts.push_back(std::move(line));
    }
  }
  const std::array<std::string_view, 4> kinds = {kMeta, kSmvae, kVae, kGan};
  const bool all_kinds = std::all_of(kinds.begin(), kinds.end(),
                                     [&](std::string_view m) { return s.aggregate.contains(std::string(m)); });
  if (all_kinds) ordering_checks(s, thresholds);
  return s;
}

bool all_pass(std::span<const OrderingCheck> checks) noexcept {
  return std::all_of(checks.begin(), checks.end(), [](const OrderingCheck& c) { return c.pass; });
}

std::string format_check(const OrderingCheck& c) { return (c.pass ? "PASS " : "FAIL ") + c.name + ": " + c.detail; }

void write_summary(const ReportSummary& s, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  CsvWriter csv(out_dir / "summary.csv", {"model", "metric", "n_seeds", "mean", "variance"});
  for (const auto& [model, metrics] : s.aggregate) {
    for (std::string_view metric : report_metric_names()) {
      const auto it = metrics.find(std::string(metric));
      if (it != metrics.end()) csv.row(model, metric, it->second.n_seeds, it->second.mean, it->second.variance);
    }
  }
  std::ofstream v(out_dir / "verdicts.txt", std::ios::trunc);
  if (!v) throw IoError("cannot write verdicts.txt in '" + out_dir.string() + "'");
  for (const auto& line : s.verdicts) v << line << '\n';
  for (const auto& c : s.checks) v << format_check(c) << '\n';
}

}  // namespace metagen
