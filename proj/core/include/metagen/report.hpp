#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "metagen/metrics.hpp"

namespace metagen {

struct ResidualFitRow {
  std::string model;
  std::uint64_t seed = 0;
  ResidualFit fit;
};

std::vector<ResidualFitRow> read_residual_fits(const std::filesystem::path& path);

struct OrderingCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Bounds of the ordering checks.
struct OrderingThresholds {
  double smvae_relative = 0.25;
  double gan_contact_factor = 2.0;
  Interval slope{0.9, 1.1};
  double intercept_fraction = 0.05;
};

struct ReportSummary {
  std::map<std::string, std::map<std::string, EvalReport::Aggregate>> aggregate;
  std::map<std::string, ResidualFit> pooled_fits;  // per model, across seeds
  std::vector<std::string> verdicts;               // one line per metric, only with two or more models
  std::vector<OrderingCheck> checks;               // only when all four model kinds are present
};

ReportSummary summarize(const EvalReport& report, std::span<const ResidualFitRow> fits,
                        const OrderingThresholds& thresholds = {});

bool all_pass(std::span<const OrderingCheck> checks) noexcept;
std::string format_check(const OrderingCheck& c);

/// Writes summary.csv (model,metric,n_seeds,mean,variance) and verdicts.txt.
void write_summary(const ReportSummary& s, const std::filesystem::path& out_dir);

}  // namespace metagen
