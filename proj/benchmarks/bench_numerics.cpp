#include <benchmark/benchmark.h>

#include <random>

#include "qsysid/numerics.hpp"
#include "qsysid/projection.hpp"
#include "qsysid/signals.hpp"
#include "qsysid/state_space.hpp"
#include "qsysid/subspace.hpp"

using namespace qsysid;

namespace {

Matrix random_hurwitz(std::mt19937_64& gen, int d) {
  std::normal_distribution<double> dist;
  Matrix r(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) r(i, j) = dist(gen);
  return r - (max_real_eig(r) + 0.5) * Matrix::Identity(d, d);
}

StateSpace paper_cavity() { return build_cavity({10.0, {5.0, 3.0, 2.0}}); }

void BM_SolveLyapunov(benchmark::State& state) {
  std::mt19937_64 gen(1);
  const int d = static_cast<int>(state.range(0));
  const Matrix a = random_hurwitz(gen, d);
  const Matrix w = Matrix::Random(d, d);
  for (auto _ : state) benchmark::DoNotOptimize(solve_lyapunov(a, w));
}
BENCHMARK(BM_SolveLyapunov)->Arg(2)->Arg(4)->Arg(8);

void BM_FilterAre(benchmark::State& state) {
  const StateSpace sys = paper_cavity();
  const QuadratureSubsystem sub = quadrature_select(sys, Quadrature::q);
  for (auto _ : state)
    benchmark::DoNotOptimize(solve_filter_are(sys.a, sys.b, sub.c_meas, sub.d_meas));
}
BENCHMARK(BM_FilterAre);

void BM_SkewFactor(benchmark::State& state) {
  std::mt19937_64 gen(2);
  const int d = static_cast<int>(state.range(0));
  Matrix r = Matrix::Random(d, d);
  const Matrix z = 0.5 * (r - r.transpose());
  for (auto _ : state) benchmark::DoNotOptimize(skew_canonical_factor(z));
}
BENCHMARK(BM_SkewFactor)->Arg(2)->Arg(6);

void BM_ProjectPsdRank(benchmark::State& state) {
  Matrix r = Matrix::Random(19, 19);
  const Matrix m = 0.5 * (r + r.transpose());
  for (auto _ : state) benchmark::DoNotOptimize(project_psd_rank(m, 2));
}
BENCHMARK(BM_ProjectPsdRank);

void BM_SimulateRecord(benchmark::State& state) {
  const StateSpace sys = paper_cavity();
  const InputSignal input = generate_prbs(6, 0.01, 80.0, 1000.0, 1);
  SimulateOptions opts;
  opts.substeps = static_cast<int>(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(
        simulate_homodyne(sys, Quadrature::q, input, 1, Vector::Zero(2), opts));
}
BENCHMARK(BM_SimulateRecord)->Arg(1)->Arg(32);

void BM_N4sid(benchmark::State& state) {
  const StateSpace sys = paper_cavity();
  const QuadratureSubsystem sub = quadrature_select(sys, Quadrature::q);
  const InputSignal input = generate_prbs(6, 0.01, 30.0, 1000.0, 1);
  SimulateOptions opts;
  opts.substeps = 8;
  const MeasurementRecord rec =
      simulate_homodyne(sys, Quadrature::q, input, 1, Vector::Zero(2), opts);
  HankelConfig cfg;
  cfg.block_rows = 20;
  for (auto _ : state) benchmark::DoNotOptimize(n4sid_estimate(rec, 1, sub.d_meas, cfg));
}
BENCHMARK(BM_N4sid);

void BM_ReducedProjection(benchmark::State& state) {
  const StateSpace sys = paper_cavity();
  const QuadratureSubsystem sub = quadrature_select(sys, Quadrature::q);
  ClassicalEstimate target;
  target.a_hat = sys.a;
  target.a_hat(0, 0) += 0.1;
  target.b_hat = sys.b * 1.02;
  target.c_hat = sub.c_meas;
  target.c_hat.array() += 0.03;
  target.order = 1;
  for (auto _ : state) benchmark::DoNotOptimize(reduced_projection(target, sub.d_meas));
}
BENCHMARK(BM_ReducedProjection);

void BM_RankFeasibility(benchmark::State& state) {
  const StateSpace sys = paper_cavity();
  const QuadratureSubsystem sub = quadrature_select(sys, Quadrature::q);
  ClassicalEstimate target;
  target.a_hat = sys.a;
  target.a_hat(0, 0) += 0.05;
  target.b_hat = sys.b;
  target.c_hat = sub.c_meas;
  target.c_hat.array() += 0.02;
  target.order = 1;
  const ProjectionResult red = reduced_projection(target, sub.d_meas);
  const Matrix p0 = init_certificate(target.a_hat);
  for (auto _ : state) {
    LiftedProblem prob(target.a_hat, target.b_hat, target.c_hat, sub.d_meas, 1.5 * red.loss);
    benchmark::DoNotOptimize(solve_rank_feasibility(prob, target.a_hat, target.b_hat,
                                                    target.c_hat, symplectic(1), p0));
  }
}
BENCHMARK(BM_RankFeasibility);

}  // namespace

BENCHMARK_MAIN();
