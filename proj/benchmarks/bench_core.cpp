#include <benchmark/benchmark.h>

#include <vector>

#include "mfrl/bayes_cls.hpp"
#include "mfrl/bayes_reg.hpp"
#include "mfrl/calib.hpp"
#include "mfrl/logreg.hpp"
#include "mfrl/nn.hpp"
#include "mfrl/rng.hpp"

using namespace mfrl;

namespace {

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

// 1-40-40-1 erf network on a batch of sine inputs.
void BM_ForwardBackward(benchmark::State& state) {
  const MlpSpec spec{1, {40, 40}, 1, Activation::kErf, true};
  const ParamVector p = init_params(spec, 1);
  const Matrix x = gaussian(state.range(0), 1, 2);
  const Matrix t = gaussian(state.range(0), 1, 3);
  for (auto _ : state) {
    const ForwardPass pass = forward(spec, p, x);
    benchmark::DoNotOptimize(backward(spec, p, pass, pass.outputs - t));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardBackward)->Arg(10)->Arg(128)->Arg(1024);

// Evidence fit on one 10-shot task with 41 basis functions.
void BM_FitEvidence(benchmark::State& state) {
  const Matrix phi = gaussian(state.range(0), 41, 4);
  const Vector y = gaussian(state.range(0), 1, 5).col(0);
  for (auto _ : state) benchmark::DoNotOptimize(fit_evidence(phi, y));
}
BENCHMARK(BM_FitEvidence)->Arg(10)->Arg(100);

void BM_FitLogReg(benchmark::State& state) {
  const Matrix phi = normalize_feature_rows(gaussian(25, state.range(0), 6));
  std::vector<int> labels;
  for (int i = 0; i < 25; ++i) labels.push_back(i % 5);
  for (auto _ : state) benchmark::DoNotOptimize(fit_logreg(phi, labels, 5, 0.1));
}
BENCHMARK(BM_FitLogReg)->Arg(64)->Arg(640);

void BM_CalibrationReport(benchmark::State& state) {
  const Matrix probs = softmax_rows(gaussian(state.range(0), 5, 7), 1.0);
  std::vector<int> labels;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) labels.push_back(static_cast<int>(i % 5));
  for (auto _ : state) benchmark::DoNotOptimize(calibration_report(probs, labels));
}
BENCHMARK(BM_CalibrationReport)->Arg(75)->Arg(45000);

void BM_Spectrum(benchmark::State& state) {
  const Matrix features = gaussian(state.range(0), 64, 8);
  for (auto _ : state) benchmark::DoNotOptimize(spectrum(features));
}
BENCHMARK(BM_Spectrum)->Arg(1000)->Arg(10000);

void BM_McmcEpisode(benchmark::State& state) {
  const Matrix phi = normalize_feature_rows(gaussian(25, 16, 9));
  std::vector<int> labels;
  for (int i = 0; i < 25; ++i) labels.push_back(i % 5);
  McmcConfig c;
  c.chains = 2;
  c.warmup = 1000;
  c.samples = 200;
  c.seed = 10;
  for (auto _ : state) benchmark::DoNotOptimize(fit_mcmc(phi, labels, 5, c));
}
BENCHMARK(BM_McmcEpisode)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
