// Serial reference vs batched OpenMP gradient kernels on a Duffing-sized net.
//   ./kkl_bench --benchmark_filter=Pde
#include <benchmark/benchmark.h>

#include <random>
#include <thread>

#include "kkl/mlp.hpp"
#include "kkl/mlp_reference.hpp"
#include "kkl/parallel.hpp"

namespace {

using namespace kkl;

Mat uniform(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Mat m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = u(rng);
  }
  return m;
}

struct Problem {
  MlpParams net;
  Mat X, V, target;

  explicit Problem(Eigen::Index batch)
      : net(init_params({2, 150, 150, 150, 5}, 7)),
        X(uniform(2, batch, 1)),
        V(uniform(2, batch, 2)),
        target(uniform(5, batch, 3)) {}

  // Squared error on the outputs, plus squared tangents when they are present.
  BlockLoss loss() const {
    return [this](Eigen::Index col0, const Mat& Y, const Mat* Ydot, Mat& dY, Mat* dYdot) {
      const Mat r = Y - target.middleCols(col0, Y.cols());
      dY = 2.0 * r;
      double value = r.squaredNorm();
      if (Ydot != nullptr) {
        *dYdot = 2.0 * *Ydot;
        value += Ydot->squaredNorm();
      }
      return value;
    };
  }
};

template <bool Tangents>
void BM_Reference(benchmark::State& state) {
  const Problem pb(state.range(0));
  const BlockLoss loss = pb.loss();
  for (auto _ : state) {
    benchmark::DoNotOptimize(reference::loss_gradient(pb.net, pb.X, Tangents ? &pb.V : nullptr, loss));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Tangents>
void BM_Batched(benchmark::State& state) {
  const Problem pb(state.range(0));
  const BlockLoss loss = pb.loss();
  set_thread_limit(static_cast<int>(state.range(1)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(loss_gradient(pb.net, pb.X, Tangents ? &pb.V : nullptr, loss));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_Forward(benchmark::State& state) {
  const Problem pb(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(forward_batch(pb.net, pb.X));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

int all_threads() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

}  // namespace

BENCHMARK(BM_Reference<false>)->Name("Data/reference")->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Batched<false>)->Name("Data/batched")->Args({256, 1})->Args({256, all_threads()})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Reference<true>)->Name("Pde/reference")->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Batched<true>)->Name("Pde/batched")->Args({256, 1})->Args({256, all_threads()})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Forward)->Arg(256)->Arg(4096)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
