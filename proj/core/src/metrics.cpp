#include "metagen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "metagen/csv.hpp"
#include "metagen/datagen.hpp"
#include "metagen/error.hpp"

namespace metagen {

double contact_error(const SystemParams& p) noexcept { return p.r_ext2 - p.r_int1; }

double performance_error(const SystemParams& p, const Condition& c) noexcept {
  return system_mass(p) * c.y - c.m_cube * c.x;
}

Histogram2D::Histogram2D(std::size_t m, std::size_t n, Interval x_range, Interval y_range)
    : m_(m), n_(n), x_range_(x_range), y_range_(y_range), bins_(m * n, 0.0) {
  if (m == 0 || n == 0) throw ShapeError("histogram needs at least one bin per axis");
  if (!(x_range.hi > x_range.lo) || !(y_range.hi > y_range.lo)) throw DomainError("histogram range is empty");
}

double Histogram2D::total_mass() const noexcept { return std::accumulate(bins_.begin(), bins_.end(), 0.0); }

std::size_t Histogram2D::bin_index(double v, Interval range, std::size_t count) noexcept {
  if (!(v > range.lo)) return 0;  // also catches NaN
  if (v >= range.hi) return count - 1;
  const double width = (range.hi - range.lo) / static_cast<double>(count);
  const auto k = static_cast<std::size_t>((v - range.lo) / width);
  return std::min(k, count - 1);
}

Histogram2D histogram2d(std::span<const std::pair<double, double>> samples, std::size_t m, std::size_t n,
                        Interval x_range, Interval y_range) {
  if (samples.empty()) throw PreconditionError("histogram of an empty sample set");
  Histogram2D h(m, n, x_range, y_range);
  std::vector<std::size_t> counts(m * n, 0);
  for (const auto& [x, y] : samples) {
    ++counts[Histogram2D::bin_index(x, x_range, m) * n + Histogram2D::bin_index(y, y_range, n)];
  }
  const double total = static_cast<double>(samples.size());
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) h.at(i, j) = static_cast<double>(counts[i * n + j]) / total;
  }
  return h;
}

double hist_distance(const Histogram2D& h1, const Histogram2D& h2) {
  if (h1.rows() != h2.rows() || h1.cols() != h2.cols() || !(h1.x_range() == h2.x_range()) ||
      !(h1.y_range() == h2.y_range())) {
    throw ShapeError("histograms differ in shape or range");
  }
  double d = 0.0;
  const auto a = h1.bins();
  const auto b = h2.bins();
  for (std::size_t k = 0; k < a.size(); ++k) d += std::abs(a[k] - b[k]);
  return d;
}

std::string_view to_string(JointPair p) noexcept {
  switch (p) {
    case JointPair::RExt1_RInt2: return "rext1_rint2";
    case JointPair::RExt1_RExt2: return "rext1_rext2";
    case JointPair::RExt2_RInt2: return "rext2_rint2";
    case JointPair::D1_D2: return "d1_d2";
  }
  return "?";
}

std::pair<double, double> project(const SystemParams& p, JointPair pair) noexcept {
  switch (pair) {
    case JointPair::RExt1_RInt2: return {p.r_ext1, p.r_int2};
    case JointPair::RExt1_RExt2: return {p.r_ext1, p.r_ext2};
    case JointPair::RExt2_RInt2: return {p.r_ext2, p.r_int2};
    case JointPair::D1_D2: return {p.d1, p.d2};
  }
  return {0.0, 0.0};
}

Histogram2D joint_histogram(std::span<const SystemParams> params, JointPair pair, const HistogramOptions& opt) {
  std::vector<std::pair<double, double>> pts;
  pts.reserve(params.size());
  for (const auto& p : params) pts.push_back(project(p, pair));
  const Interval range = opt.range_for(pair);
  return histogram2d(pts, opt.bins_x, opt.bins_y, range, range);
}

namespace {

double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.size() == 1) return sorted.front();
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

ErrorStats abs_error_stats(std::span<const double> values) {
  ErrorStats s;
  if (values.empty()) return s;
  std::vector<double> a(values.size());
  std::transform(values.begin(), values.end(), a.begin(), [](double v) { return std::abs(v); });
  std::sort(a.begin(), a.end());
  const double n = static_cast<double>(a.size());
  s.mean = std::accumulate(a.begin(), a.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : a) ss += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(ss / n);
  s.min = a.front();
  s.max = a.back();
  s.q1 = quantile_sorted(a, 0.25);
  s.median = quantile_sorted(a, 0.5);
  s.q3 = quantile_sorted(a, 0.75);
  return s;
}

SampleEvaluation evaluate_samples(std::span<const GeneratedSample> generated, std::span<const DatasetRecord> reference,
                                  const HistogramOptions& opt) {
  if (generated.size() != reference.size()) {
    throw PreconditionError("generated and reference sets differ in size (" + std::to_string(generated.size()) +
                            " vs " + std::to_string(reference.size()) + ")");
  }
  if (generated.empty()) throw PreconditionError("nothing to evaluate");
  SampleEvaluation ev;
  ev.n_samples = generated.size();
  ev.contact.reserve(ev.n_samples);
  ev.performance.reserve(ev.n_samples);
  std::vector<SystemParams> gen_params;
  std::vector<SystemParams> ref_params;
  gen_params.reserve(ev.n_samples);
  ref_params.reserve(ev.n_samples);
  for (std::size_t i = 0; i < generated.size(); ++i) {
    if (!(generated[i].cond == reference[i].cond)) {
      throw PreconditionError("condition mismatch at sample " + std::to_string(i));
    }
    ev.contact.push_back(contact_error(generated[i].params));
    ev.performance.push_back(performance_error(generated[i].params, generated[i].cond));
    gen_params.push_back(generated[i].params);
    ref_params.push_back(reference[i].params);
  }
  ev.abs_contact = abs_error_stats(ev.contact);
  ev.abs_performance = abs_error_stats(ev.performance);
  for (JointPair pair : kJointPairs) {
    ev.dissimilarity[static_cast<std::size_t>(pair)] =
        hist_distance(joint_histogram(gen_params, pair, opt), joint_histogram(ref_params, pair, opt));
  }
  return ev;
}

void ResidualFit::add(double abscissa, double ordinate) noexcept {
  ++n;
  sum_x += abscissa;
  sum_y += ordinate;
  sum_xx += abscissa * abscissa;
  sum_xy += abscissa * ordinate;
}

void ResidualFit::merge(const ResidualFit& o) noexcept {
  n += o.n;
  sum_x += o.sum_x;
  sum_y += o.sum_y;
  sum_xx += o.sum_xx;
  sum_xy += o.sum_xy;
}

double ResidualFit::slope() const noexcept {
  const double nn = static_cast<double>(n);
  const double denom = nn * sum_xx - sum_x * sum_x;
  if (n < 2 || denom == 0.0) return 0.0;
  return (nn * sum_xy - sum_x * sum_y) / denom;
}

double ResidualFit::intercept() const noexcept {
  if (n == 0) return 0.0;
  const double nn = static_cast<double>(n);
  return (sum_y - slope() * sum_x) / nn;
}

std::span<const std::string_view> report_metric_names() noexcept {
  static constexpr std::array<std::string_view, 11> names = {
      "mean_abs_ec",           "std_abs_ec",           "median_abs_ec",        "mean_abs_ep",
      "std_abs_ep",            "median_abs_ep",        "wasserstein_rext1_rint2", "wasserstein_rext1_rext2",
      "wasserstein_rext2_rint2", "wasserstein_d1_d2", "n_samples"};
  return names;
}

void EvalReport::add(std::string_view model, std::uint64_t seed, const SampleEvaluation& ev) {
  const std::array<double, 11> values = {ev.abs_contact.mean,     ev.abs_contact.stddev,     ev.abs_contact.median,
                                         ev.abs_performance.mean, ev.abs_performance.stddev, ev.abs_performance.median,
                                         ev.dissimilarity[0],     ev.dissimilarity[1],       ev.dissimilarity[2],
                                         ev.dissimilarity[3],     static_cast<double>(ev.n_samples)};
  const auto names = report_metric_names();
  for (std::size_t k = 0; k < values.size(); ++k) {
    rows_.push_back({std::string(model), seed, std::string(names[k]), values[k]});
  }
}

void EvalReport::add_row(Row row) { rows_.push_back(std::move(row)); }

std::vector<std::string> EvalReport::models() const {
  std::vector<std::string> out;
  for (const auto& r : rows_) {
    if (std::find(out.begin(), out.end(), r.model) == out.end()) out.push_back(r.model);
  }
  return out;
}

std::map<std::string, std::map<std::string, EvalReport::Aggregate>> EvalReport::aggregate() const {
  std::map<std::string, std::map<std::string, std::vector<double>>> grouped;
  for (const auto& r : rows_) grouped[r.model][r.metric].push_back(r.value);
  std::map<std::string, std::map<std::string, Aggregate>> out;
  for (const auto& [model, metrics] : grouped) {
    for (const auto& [metric, values] : metrics) {
      Aggregate a;
      a.n_seeds = values.size();
      a.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
      double ss = 0.0;
      for (double v : values) ss += (v - a.mean) * (v - a.mean);
      a.variance = ss / static_cast<double>(values.size());
      out[model][metric] = a;
    }
  }
  return out;
}

void EvalReport::write_csv(const std::filesystem::path& path) const {
  CsvWriter csv(path, {"model", "seed", "metric", "value"});
  for (const auto& r : rows_) csv.row(r.model, r.seed, r.metric, r.value);
}

EvalReport EvalReport::read_csv(const std::filesystem::path& path) {
  EvalReport rep;
  const CsvTable table = read_csv_file(path);
  const std::size_t c_model = table.column("model");
  const std::size_t c_seed = table.column("seed");
  const std::size_t c_metric = table.column("metric");
  const std::size_t c_value = table.column("value");
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    try {
      rep.rows_.push_back({row.at(c_model), std::stoull(row.at(c_seed)), row.at(c_metric), std::stod(row.at(c_value))});
    } catch (const std::exception& e) {
      throw ParseError(i + 2, std::string("bad report row: ") + e.what());
    }
  }
  return rep;
}

}  // namespace metagen
