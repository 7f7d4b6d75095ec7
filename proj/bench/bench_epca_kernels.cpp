// Serial reference vs OpenMP batch evaluation of the PCA objective terms.
// Arguments: Gaussian dimension d, number of points I.

#include <random>

#include <benchmark/benchmark.h>
#include <omp.h>

#include "gppca/epca.hpp"
#include "gppca/epca_kernels.hpp"
#include "gppca/oracles.hpp"

using namespace gppca;

namespace {

struct Batch {
  Matrix recon;
  CoordinateSet data;
};

// Each reconstruction is its data point nudged along a random symmetric
// direction, so every term is valid and nonzero.
Batch make_batch(Eigen::Index d, Eigen::Index n) {
  std::mt19937_64 rng(42);
  std::vector<MomentGaussian> gs;
  for (Eigen::Index i = 0; i < n; ++i) gs.push_back(oracle::random_gaussian(d, rng, 100.0));
  Batch b{Matrix(), make_coordinate_set(gs, FlatMode::kEFlat)};
  b.recon = b.data.primal;
  std::normal_distribution<double> normal(0.0, 1e-3);
  for (Eigen::Index i = 0; i < n; ++i) {
    Vector step = Vector::NullaryExpr(b.recon.rows(), [&] { return normal(rng); });
    symmetrize_coordinates(step);
    if (evaluate_point(FlatMode::kEFlat, b.recon.col(i) + step, false).valid) b.recon.col(i) += step;
  }
  return b;
}

template <bool kParallel>
void BM_Evaluate(benchmark::State& state) {
  const Batch b = make_batch(state.range(0), state.range(1));
  for (auto _ : state) {
    BatchEvaluation e = kParallel
        ? evaluate_batch_parallel(FlatMode::kEFlat, b.recon, b.data.dual, b.data.dual_potential, true)
        : evaluate_batch_serial(FlatMode::kEFlat, b.recon, b.data.dual, b.data.dual_potential, true);
    benchmark::DoNotOptimize(e.divergence.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(1));
  state.counters["threads"] = kParallel ? max_threads() : 1;
}

void sizes(benchmark::internal::Benchmark* b) {
  for (int d : {10, 20, 40}) {
    for (int n : {20, 100, 400}) b->Args({d, n});
  }
}

}  // namespace

BENCHMARK(BM_Evaluate<false>)->Name("serial")->Apply(sizes)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Evaluate<true>)->Name("parallel")->Apply(sizes)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
