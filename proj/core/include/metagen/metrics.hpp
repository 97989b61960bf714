#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "metagen/domain.hpp"

namespace metagen {

struct DatasetRecord;

/// Signed contact violation r_ext2 - r_int1.
double contact_error(const SystemParams& p) noexcept;

/// Signed distance to balance: system_mass(p) * y - m_cube * x.
double performance_error(const SystemParams& p, const Condition& c) noexcept;

struct Interval {
  double lo = 0.0;
  double hi = 1.0;

  friend bool operator==(const Interval&, const Interval&) = default;
};

/// Normalized M x N histogram over a fixed rectangle. Row index i follows the
/// x axis, column index j the y axis.
class Histogram2D {
 public:
  Histogram2D(std::size_t m, std::size_t n, Interval x_range, Interval y_range);

  std::size_t rows() const noexcept { return m_; }
  std::size_t cols() const noexcept { return n_; }
  const Interval& x_range() const noexcept { return x_range_; }
  const Interval& y_range() const noexcept { return y_range_; }

  double at(std::size_t i, std::size_t j) const { return bins_.at(i * n_ + j); }
  double& at(std::size_t i, std::size_t j) { return bins_.at(i * n_ + j); }
  std::span<const double> bins() const noexcept { return bins_; }

  double total_mass() const noexcept;

  /// Bin index along one axis: width = range / count, last bin closed on the right,
  /// out-of-range values clamp to the edge bins.
  static std::size_t bin_index(double v, Interval range, std::size_t count) noexcept;

 private:
  std::size_t m_;
  std::size_t n_;
  Interval x_range_;
  Interval y_range_;
  std::vector<double> bins_;
};

Histogram2D histogram2d(std::span<const std::pair<double, double>> samples, std::size_t m, std::size_t n,
                        Interval x_range, Interval y_range);

/// Sum of absolute bin differences; in [0, 2] for normalized histograms.
double hist_distance(const Histogram2D& h1, const Histogram2D& h2);

/// The four joint distributions compared between generated and reference systems.
enum class JointPair { RExt1_RInt2 = 0, RExt1_RExt2 = 1, RExt2_RInt2 = 2, D1_D2 = 3 };

inline constexpr std::array<JointPair, 4> kJointPairs = {JointPair::RExt1_RInt2, JointPair::RExt1_RExt2,
                                                         JointPair::RExt2_RInt2, JointPair::D1_D2};

std::string_view to_string(JointPair p) noexcept;
std::pair<double, double> project(const SystemParams& p, JointPair pair) noexcept;

struct HistogramOptions {
  std::size_t bins_x = 50;
  std::size_t bins_y = 50;
  Interval radius_range{0.0, 110.0};
  Interval density_range{0.0, 13.0};

  Interval range_for(JointPair pair) const noexcept {
    return pair == JointPair::D1_D2 ? density_range : radius_range;
  }
};

Histogram2D joint_histogram(std::span<const SystemParams> params, JointPair pair, const HistogramOptions& opt);

struct ErrorStats {
  double mean = 0.0;
  double stddev = 0.0;
  double median = 0.0;
  double min = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double max = 0.0;
};

/// Summary statistics of |values|.
ErrorStats abs_error_stats(std::span<const double> values);

struct GeneratedSample {
  SystemParams params;
  Condition cond;
};

/// Everything computed for one (model, seed) batch of generated systems.
struct SampleEvaluation {
  std::size_t n_samples = 0;
  std::vector<double> contact;      // signed E_c per sample
  std::vector<double> performance;  // signed E_p per sample
  ErrorStats abs_contact;
  ErrorStats abs_performance;
  std::array<double, 4> dissimilarity{};  // hist_distance per JointPair
};

/// Scores generated systems against reference records drawn at the same conditions.
/// Throws PreconditionError when the two condition sets differ.
SampleEvaluation evaluate_samples(std::span<const GeneratedSample> generated, std::span<const DatasetRecord> reference,
                                  const HistogramOptions& opt = {});

/// Least-squares line through (m_cube * x, m_generated * y) pairs.
struct ResidualFit {
  std::size_t n = 0;
  double sum_x = 0.0;
  double sum_y = 0.0;
  double sum_xx = 0.0;
  double sum_xy = 0.0;

  void add(double abscissa, double ordinate) noexcept;
  void merge(const ResidualFit& other) noexcept;
  double slope() const noexcept;
  double intercept() const noexcept;
  double mean_ordinate() const noexcept { return n == 0 ? 0.0 : sum_y / static_cast<double>(n); }
};

/// Metric names used in report rows, in output order.
std::span<const std::string_view> report_metric_names() noexcept;

/// Per-model, per-seed metric rows plus cross-seed aggregation.
class EvalReport {
 public:
  struct Row {
    std::string model;
    std::uint64_t seed;
    std::string metric;
    double value;
  };

  struct Aggregate {
    std::size_t n_seeds = 0;
    double mean = 0.0;
    double variance = 0.0;
  };

  void add(std::string_view model, std::uint64_t seed, const SampleEvaluation& ev);
  void add_row(Row row);

  const std::vector<Row>& rows() const noexcept { return rows_; }
  std::vector<std::string> models() const;

  /// model -> metric -> cross-seed mean / population variance.
  std::map<std::string, std::map<std::string, Aggregate>> aggregate() const;

  void write_csv(const std::filesystem::path& path) const;
  static EvalReport read_csv(const std::filesystem::path& path);

 private:
  std::vector<Row> rows_;
};

}  // namespace metagen
