// Serial reference vs OpenMP kernels: one recurrence step on a large sphere, and
// a full mini-batch gradient.
#include <memory>
#include <numeric>
#include <random>

#include <benchmark/benchmark.h>

#include "lbcnn/coarsening.hpp"
#include "lbcnn/dataset.hpp"
#include "lbcnn/lb_operator.hpp"
#include "lbcnn/mesh.hpp"
#include "lbcnn/network.hpp"
#include "lbcnn/poly_filters.hpp"

namespace {

using namespace lbcnn;

const NormalizedOperator& sphere_operator(int subdiv) {
  static std::vector<std::unique_ptr<NormalizedOperator>> cache(8);
  if (!cache[subdiv]) {
    LBOperator op = assemble_laplace_beltrami(generate_icosphere(subdiv));
    estimate_lambda_max_within_margin(op);
    cache[subdiv] = std::make_unique<NormalizedOperator>(op, PolyFamily::chebyshev);
  }
  return *cache[subdiv];
}

void recurrence(benchmark::State& state, Exec exec) {
  const NormalizedOperator& op = sphere_operator(static_cast<int>(state.range(0)));
  const OperatorView view = op.view();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> cur(view.n), prev(view.n), out(view.n);
  for (auto& v : cur) v = u(rng);
  for (auto& v : prev) v = u(rng);
  for (auto _ : state) {
    recurrence_step(exec, view, false, 2.0, 0.0, -1.0, cur.data(), prev.data(), out.data());
    benchmark::DoNotOptimize(out.data());
    std::swap(prev, cur);
    std::swap(cur, out);
  }
  state.SetItemsProcessed(state.iterations() * view.n);
}

void BM_RecurrenceSerial(benchmark::State& state) { recurrence(state, Exec::serial); }
void BM_RecurrenceParallel(benchmark::State& state) { recurrence(state, Exec::parallel); }
BENCHMARK(BM_RecurrenceSerial)->DenseRange(4, 6);
BENCHMARK(BM_RecurrenceParallel)->DenseRange(4, 6);

void batch_gradient(benchmark::State& state, Exec exec) {
  static const TriMesh mesh = generate_icosphere(3);
  static const LabeledSignals data = [] {
    BumpParams p;
    p.n_per_class = 32;
    return generate_bump_dataset(mesh, p, 7);
  }();
  static const Model model = [] {
    LBOperator op = assemble_laplace_beltrami(mesh);
    estimate_lambda_max_within_margin(op);
    NetworkSpec spec;
    spec.layers = {{8, 6, 2}, {16, 6, 2}};
    return Model(spec, build_hierarchy(op, 4), PolyFamily::chebyshev, 3);
  }();
  std::vector<int> batch(data.size());
  std::iota(batch.begin(), batch.end(), 0);
  Eigen::VectorXd grad;
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.loss_and_gradient(data, batch, 5e-4, &grad, exec));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(batch.size()));
}

void BM_BatchGradientSerial(benchmark::State& state) { batch_gradient(state, Exec::serial); }
void BM_BatchGradientParallel(benchmark::State& state) { batch_gradient(state, Exec::parallel); }
BENCHMARK(BM_BatchGradientSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchGradientParallel)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
