#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "metagen/datagen.hpp"
#include "metagen/error.hpp"
#include "metagen/metrics.hpp"

namespace metagen {
namespace {

const SystemParams kRef{50, 40, 40, 30, 2, 3};

Histogram2D random_hist(Rng& rng, std::size_t m, std::size_t n) {
  std::uniform_int_distribution<int> count(0, 200);
  std::vector<std::pair<double, double>> pts;
  std::uniform_real_distribution<double> u(0, 1);
  const int k = count(rng) + 1;
  for (int i = 0; i < k; ++i) pts.emplace_back(u(rng) * u(rng), u(rng));
  return histogram2d(pts, m, n, {0, 1}, {0, 1});
}

TEST(Errors, ContactError) {
  SystemParams p = kRef;
  p.r_ext2 = 42;
  EXPECT_DOUBLE_EQ(contact_error(p), 2.0);
  EXPECT_EQ(contact_error(kRef), 0.0);
}

TEST(Errors, PerformanceError) {
  const double expected = 50.0 * (3900.0 * std::numbers::pi - 12000.0);
  EXPECT_NEAR(performance_error(kRef, {50, 50, 12000}), expected, 1e-6);
  EXPECT_NEAR(expected, 12610.57, 0.01);
}

TEST(Errors, PerformanceErrorVanishesAtEquilibriumMass) {
  Rng rng(11);
  for (int i = 0; i < 10000; ++i) {
    const auto rec = sample_record(static_cast<Branch>(i % 3), rng);
    const double m = equilibrium_mass(rec.params, rec.cond.x, rec.cond.y);
    const double scale = m * rec.cond.x;
    ASSERT_LE(std::abs(performance_error(rec.params, {rec.cond.x, rec.cond.y, m})), 1e-9 * scale);
    // Perturbing the counterweight by delta moves E_p by -delta * x.
    const double delta = 0.37;
    ASSERT_NEAR(performance_error(rec.params, {rec.cond.x, rec.cond.y, m + delta}), -delta * rec.cond.x,
                1e-9 * scale);
  }
}

TEST(Histogram, SinglePointConcentrates) {
  const std::vector<std::pair<double, double>> pts = {{0.55, 0.05}};
  const auto h = histogram2d(pts, 10, 10, {0, 1}, {0, 1});
  EXPECT_EQ(h.at(5, 0), 1.0);
  EXPECT_DOUBLE_EQ(h.total_mass(), 1.0);
}

TEST(Histogram, BinIndexEdges) {
  EXPECT_EQ(Histogram2D::bin_index(0.0, {0, 1}, 10), 0u);
  EXPECT_EQ(Histogram2D::bin_index(1.0, {0, 1}, 10), 9u);
  EXPECT_EQ(Histogram2D::bin_index(-5.0, {0, 1}, 10), 0u);
  EXPECT_EQ(Histogram2D::bin_index(7.0, {0, 1}, 10), 9u);
  EXPECT_EQ(Histogram2D::bin_index(0.1, {0, 1}, 10), 1u);
}

TEST(Histogram, UniformSamplesAreFlat) {
  Rng rng(12);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<std::pair<double, double>> pts(1000000);
  for (auto& p : pts) p = {u(rng), u(rng)};
  const auto h = histogram2d(pts, 10, 10, {0, 1}, {0, 1});
  EXPECT_NEAR(h.total_mass(), 1.0, 1e-12);
  for (double b : h.bins()) EXPECT_NEAR(b, 0.01, 0.002);
}

TEST(Histogram, RejectsEmptyInput) {
  EXPECT_THROW(histogram2d({}, 10, 10, {0, 1}, {0, 1}), PreconditionError);
}

TEST(HistDistance, KnownValues) {
  const std::vector<std::pair<double, double>> a = {{0.1, 0.1}};
  const std::vector<std::pair<double, double>> b = {{0.9, 0.9}};
  const auto ha = histogram2d(a, 2, 2, {0, 1}, {0, 1});
  const auto hb = histogram2d(b, 2, 2, {0, 1}, {0, 1});
  EXPECT_EQ(hist_distance(ha, ha), 0.0);
  EXPECT_DOUBLE_EQ(hist_distance(ha, hb), 2.0);

  Histogram2D p(1, 2, {0, 1}, {0, 1}), q(1, 2, {0, 1}, {0, 1});
  p.at(0, 0) = 1.0;
  q.at(0, 0) = 0.5;
  q.at(0, 1) = 0.5;
  EXPECT_DOUBLE_EQ(hist_distance(p, q), 1.0);
}

TEST(HistDistance, ShapeMismatchThrows) {
  Histogram2D p(2, 2, {0, 1}, {0, 1}), q(2, 3, {0, 1}, {0, 1});
  EXPECT_THROW(hist_distance(p, q), ShapeError);
}

TEST(HistDistance, MetricAxioms) {
  Rng rng(13);
  for (int i = 0; i < 1000; ++i) {
    const auto a = random_hist(rng, 8, 8), b = random_hist(rng, 8, 8), c = random_hist(rng, 8, 8);
    const double ab = hist_distance(a, b);
    ASSERT_EQ(hist_distance(a, a), 0.0);
    ASSERT_GE(ab, 0.0);
    ASSERT_LE(ab, 2.0 + 1e-12);
    ASSERT_EQ(ab, hist_distance(b, a));
    ASSERT_LE(hist_distance(a, c), ab + hist_distance(b, c) + 1e-12);
  }
}

std::vector<GeneratedSample> as_samples(const Dataset& ds) {
  std::vector<GeneratedSample> out;
  for (const auto& r : ds.records) out.push_back({r.params, r.cond});
  return out;
}

TEST(EvaluateSamples, SelfEvaluationIsZero) {
  DatasetConfig cfg;
  cfg.n_records = 5000;
  const Dataset ds = build_dataset(cfg);
  const auto ev = evaluate_samples(as_samples(ds), ds.records);
  EXPECT_EQ(ev.n_samples, 5000u);
  EXPECT_EQ(ev.abs_contact.max, 0.0);
  EXPECT_LT(ev.abs_performance.max, 1e-4);
  for (double d : ev.dissimilarity) EXPECT_EQ(d, 0.0);
}

TEST(EvaluateSamples, ConditionMismatchThrows) {
  DatasetConfig cfg;
  cfg.n_records = 10;
  const Dataset ds = build_dataset(cfg);
  auto s = as_samples(ds);
  s[3].cond.x += 1.0;
  EXPECT_THROW(evaluate_samples(s, ds.records), PreconditionError);
  s.pop_back();
  EXPECT_THROW(evaluate_samples(s, ds.records), PreconditionError);
}

// Two independent datasets differ only by sampling noise. For a bin of mass p and
// n samples per side, E|p1 - p2| ~= sqrt(4 p (1 - p) / (pi n)).
TEST(EvaluateSamples, ResampledReferenceMatchesMultinomialNoise) {
  const std::size_t n = 50000;
  DatasetConfig a_cfg, b_cfg;
  a_cfg.n_records = b_cfg.n_records = n;
  a_cfg.seed = 100;
  b_cfg.seed = 200;
  const Dataset a = build_dataset(a_cfg), b = build_dataset(b_cfg);
  const HistogramOptions opt;
  std::vector<SystemParams> pa, pb;
  for (const auto& r : a.records) pa.push_back(r.params);
  for (const auto& r : b.records) pb.push_back(r.params);
  for (JointPair pair : kJointPairs) {
    const auto ha = joint_histogram(pa, pair, opt);
    const auto hb = joint_histogram(pb, pair, opt);
    double predicted = 0.0;
    for (std::size_t i = 0; i < ha.rows(); ++i) {
      for (std::size_t j = 0; j < ha.cols(); ++j) {
        const double p = 0.5 * (ha.at(i, j) + hb.at(i, j));
        predicted += std::sqrt(4.0 * p * (1.0 - p) / (std::numbers::pi * static_cast<double>(n)));
      }
    }
    const double measured = hist_distance(ha, hb);
    EXPECT_NEAR(measured, predicted, 0.15 * predicted) << to_string(pair);
    EXPECT_LT(measured, 0.25) << to_string(pair);
  }
}

// A generator that copies reference systems but ignores the condition matches every
// marginal yet misses the balance badly.
TEST(EvaluateSamples, ConditionIgnoringCopierIsCaughtByPerformanceError) {
  DatasetConfig cfg;
  cfg.n_records = 20000;
  const Dataset ds = build_dataset(cfg);
  auto s = as_samples(ds);
  for (std::size_t i = 0; i < s.size(); ++i) s[i].params = ds.records[(i + 1) % s.size()].params;
  const auto ev = evaluate_samples(s, ds.records);
  for (double d : ev.dissimilarity) EXPECT_LT(d, 1e-12);
  EXPECT_EQ(ev.abs_contact.max, 0.0);
  double mean_mx = 0.0;
  for (const auto& r : ds.records) mean_mx += r.cond.m_cube * r.cond.x / static_cast<double>(ds.records.size());
  EXPECT_GT(ev.abs_performance.mean, 0.3 * mean_mx);
}

TEST(ErrorStatsTest, QuartilesOfKnownValues) {
  const std::vector<double> v = {-5, 1, -2, 4, 3};
  const auto s = abs_error_stats(v);
  EXPECT_DOUBLE_EQ(s.mean, 3.0);
  EXPECT_DOUBLE_EQ(s.median, 3.0);
  EXPECT_DOUBLE_EQ(s.min, 1.0);
  EXPECT_DOUBLE_EQ(s.max, 5.0);
  EXPECT_DOUBLE_EQ(s.stddev, std::sqrt(2.0));
}

TEST(ResidualFitTest, RecoversExactLine) {
  ResidualFit fit;
  for (int i = 0; i < 100; ++i) fit.add(i, 2.0 * i + 3.0);
  EXPECT_NEAR(fit.slope(), 2.0, 1e-12);
  EXPECT_NEAR(fit.intercept(), 3.0, 1e-9);
  ResidualFit a, b;
  for (int i = 0; i < 50; ++i) a.add(i, 2.0 * i + 3.0);
  for (int i = 50; i < 100; ++i) b.add(i, 2.0 * i + 3.0);
  a.merge(b);
  EXPECT_NEAR(a.slope(), 2.0, 1e-12);
  EXPECT_EQ(a.n, 100u);
}

TEST(EvalReportTest, AggregatesAndRoundTrips) {
  EvalReport report;
  report.add_row({"meta-vae", 0, "mean_abs_ep", 1.0});
  report.add_row({"meta-vae", 1, "mean_abs_ep", 3.0});
  report.add_row({"vanilla-gan", 0, "mean_abs_ep", 10.0});
  const auto agg = report.aggregate();
  EXPECT_EQ(agg.at("meta-vae").at("mean_abs_ep").n_seeds, 2u);
  EXPECT_DOUBLE_EQ(agg.at("meta-vae").at("mean_abs_ep").mean, 2.0);
  EXPECT_DOUBLE_EQ(agg.at("meta-vae").at("mean_abs_ep").variance, 1.0);
  EXPECT_EQ(report.models(), (std::vector<std::string>{"meta-vae", "vanilla-gan"}));

  const auto path = std::filesystem::temp_directory_path() / "metagen_unit" / "report.csv";
  std::filesystem::create_directories(path.parent_path());
  report.write_csv(path);
  const auto back = EvalReport::read_csv(path);
  ASSERT_EQ(back.rows().size(), 3u);
  EXPECT_EQ(back.rows()[2].model, "vanilla-gan");
  EXPECT_EQ(back.rows()[2].value, 10.0);
}

}  // namespace
}  // namespace metagen
