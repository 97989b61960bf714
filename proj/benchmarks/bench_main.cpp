#include <benchmark/benchmark.h>

#include "metagen/autodiff.hpp"
#include "metagen/datagen.hpp"
#include "metagen/metrics.hpp"
#include "metagen/models.hpp"

namespace {

using namespace metagen;

void BM_AffineForwardBackward(benchmark::State& state) {
  const auto batch = static_cast<Eigen::Index>(state.range(0));
  Rng rng(1);
  ad::Parameter<Real> x, w, b;
  x.value = ad::standard_normal<Real>(batch, 256, rng);
  w.value = ad::standard_normal<Real>(256, 256, rng);
  b.value = ad::standard_normal<Real>(1, 256, rng);
  for (auto* p : {&x, &w, &b}) p->zero_grad();
  const RealMatrix target = RealMatrix::Zero(batch, 256);
  for (auto _ : state) {
    RTape tape;
    const auto y = ad::relu(ad::affine(tape.param(x), tape.param(w), tape.param(b)));
    tape.backward(ad::mse(y, tape.constant(target)));
    benchmark::DoNotOptimize(w.grad.data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_AffineForwardBackward)->Arg(32)->Arg(128)->Arg(512);

void BM_JointHistogram(benchmark::State& state) {
  DatasetConfig cfg;
  cfg.n_records = static_cast<std::size_t>(state.range(0));
  std::vector<SystemParams> params;
  for (const auto& r : build_dataset(cfg).records) params.push_back(r.params);
  const HistogramOptions opt;
  for (auto _ : state) {
    benchmark::DoNotOptimize(joint_histogram(params, JointPair::RExt1_RInt2, opt).total_mass());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_JointHistogram)->Arg(50000);

void BM_BuildDataset(benchmark::State& state) {
  DatasetConfig cfg;
  cfg.n_records = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(build_dataset(cfg).records.data());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BuildDataset)->Arg(20000);

void BM_SampleParams(benchmark::State& state) {
  const auto kind = static_cast<ModelKind>(state.range(0));
  auto model = make_model(kind, Architecture{});
  Rng rng(2);
  model->init(rng);
  DatasetConfig cfg;
  cfg.n_records = 4096;
  std::vector<Condition> conds;
  for (const auto& r : build_dataset(cfg).records) conds.push_back(r.cond);
  for (auto _ : state) {
    Rng s(3);
    benchmark::DoNotOptimize(sample_params(*model, conds, s).data());
  }
  state.SetLabel(std::string(to_string(kind)));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(conds.size()));
}
BENCHMARK(BM_SampleParams)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
