#include <random>

#include <benchmark/benchmark.h>

#include "symcert/eigen.hpp"
#include "symcert/encode.hpp"
#include "symcert/oracle.hpp"
#include "symcert/relax.hpp"
#include "symcert/sdpsolve.hpp"
#include "symcert/spectral.hpp"

namespace {

using namespace symcert;

Matrix gaussian(std::mt19937_64& rng, int rows, int cols, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(rows, cols);
  for (int i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

Matrix random_symmetric(std::mt19937_64& rng, int n) {
  const Matrix a = gaussian(rng, n, n);
  return 0.5 * (a + a.transpose());
}

Network two_layer(std::mt19937_64& rng, int in, int hidden, int out) {
  return Network(in, {AffineBlock{gaussian(rng, hidden, in, 1.0 / std::sqrt(in)), gaussian(rng, hidden, 1, 0.1).col(0)},
                      ActivationBlock{Activation::relu(), hidden},
                      AffineBlock{gaussian(rng, out, hidden, 1.0 / std::sqrt(hidden)), Vector::Zero(out)}});
}

void BM_SymEigen(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const Matrix m = random_symmetric(rng, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(sym_eigen(m));
}
BENCHMARK(BM_SymEigen)->Arg(8)->Arg(32)->Arg(128);

void BM_ProjectPsd(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const Matrix m = random_symmetric(rng, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(project_psd(m));
}
BENCHMARK(BM_ProjectPsd)->Arg(8)->Arg(32)->Arg(128);

void BM_SolveMaxcut(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const SdpProblem sdp = diagonal_constrained_sdp(random_symmetric(rng, static_cast<int>(state.range(0))));
  for (auto _ : state) benchmark::DoNotOptimize(solve_sdp(sdp));
}
BENCHMARK(BM_SolveMaxcut)->Arg(10)->Arg(30)->Unit(benchmark::kMillisecond);

void BM_SolveLocalRobustness(benchmark::State& state) {
  std::mt19937_64 rng(4);
  const int hidden = static_cast<int>(state.range(0));
  const Network net = two_layer(rng, 2, hidden, 2);
  PerturbationSpec spec{Norm::inf(), 0.1, Vector::Zero(2)};
  const Margin margin = margin_network(net, 0, 1);
  const SdpProblem sdp = shor_primal(presolve(build_local_robustness_qp(net, spec, margin)).qp);
  for (auto _ : state) benchmark::DoNotOptimize(solve_sdp(sdp));
}
BENCHMARK(BM_SolveLocalRobustness)->Arg(4)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_EigenFglBound(benchmark::State& state) {
  std::mt19937_64 rng(5);
  const Matrix m = random_symmetric(rng, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(eigen_fgl_bound(m));
}
BENCHMARK(BM_EigenFglBound)->Arg(10)->Arg(30)->Unit(benchmark::kMillisecond);

void BM_ExactLocalLinf(benchmark::State& state) {
  std::mt19937_64 rng(6);
  const int hidden = static_cast<int>(state.range(0));
  const Network net = two_layer(rng, 2, hidden, 2);
  const Margin margin = margin_network(net, 0, 1);
  const Vector center = Vector::Zero(2);
  for (auto _ : state) benchmark::DoNotOptimize(exact_local_linf(net, center, 0.1, margin));
}
BENCHMARK(BM_ExactLocalLinf)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
