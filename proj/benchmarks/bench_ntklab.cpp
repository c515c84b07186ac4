#include <benchmark/benchmark.h>

#include "ntklab/linalg.hpp"
#include "ntklab/network.hpp"
#include "ntklab/ntk.hpp"
#include "ntklab/surface3d.hpp"

#include <random>

using namespace ntklab;

namespace {

Matrix random_points(Eigen::Index n, Eigen::Index dim, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix x(n, dim);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
    return x;
}

CoordinateModel mpe_model(int dim, std::vector<int> hidden) {
    MpeSpec spec;
    spec.input_dim = dim;
    spec.slots = 2;
    spec.resolutions = {16, 64};
    return init_model(spec, MlpConfig{0, std::move(hidden)}, 7);
}

}  // namespace

static void SymEig(benchmark::State& state) {
    const auto n = state.range(0);
    const Matrix a = random_points(n, n, 1);
    const Matrix k = a * a.transpose();
    for (auto _ : state) {
        Spectrum s = sym_eig(k);
        benchmark::DoNotOptimize(s.eigenvalues.data());
    }
    state.SetComplexityN(n);
}
BENCHMARK(SymEig)->RangeMultiplier(2)->Range(16, 256)->Unit(benchmark::kMillisecond)->Complexity();

static void SymEigReference(benchmark::State& state) {
    const auto n = state.range(0);
    const Matrix a = random_points(n, n, 1);
    const Matrix k = a * a.transpose();
    for (auto _ : state) {
        Eigen::SelfAdjointEigenSolver<Matrix> solver(k);
        benchmark::DoNotOptimize(solver.eigenvalues().data());
    }
    state.SetComplexityN(n);
}
BENCHMARK(SymEigReference)->RangeMultiplier(2)->Range(16, 256)->Unit(benchmark::kMillisecond)->Complexity();

static void ForwardBatch(benchmark::State& state) {
    const CoordinateModel model = mpe_model(2, {256, 256});
    const Matrix x = random_points(state.range(0), 2, 2);
    for (auto _ : state) {
        Matrix y = forward_batch(model, x);
        benchmark::DoNotOptimize(y.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(ForwardBatch)->Arg(1024)->Arg(4096)->Unit(benchmark::kMillisecond);

static void EmpiricalNtk(benchmark::State& state) {
    const CoordinateModel model = mpe_model(2, {128, 128});
    const Matrix x = random_points(state.range(0), 2, 3);
    const auto method = state.range(1) == 0 ? NtkMethod::Factored : NtkMethod::Stacked;
    for (auto _ : state) {
        NtkGram k = empirical_ntk(model, x, true, {0, kDefaultGramCap, method});
        benchmark::DoNotOptimize(k.k.data());
    }
}
BENCHMARK(EmpiricalNtk)
    ->ArgNames({"n", "stacked"})
    ->ArgsProduct({{64, 256}, {0, 1}})
    ->Unit(benchmark::kMillisecond);

static void InsideTest(benchmark::State& state) {
    const TriangleMesh mesh = load_mesh(std::string(NTKLAB_DATA_DIR) + "/meshes/torus.obj");
    const InsideTester tester(mesh);
    const Matrix p = random_points(4096, 3, 4);
    for (auto _ : state) {
        int count = 0;
        for (Eigen::Index i = 0; i < p.rows(); ++i) count += tester.inside({p(i, 0), p(i, 1), p(i, 2)});
        benchmark::DoNotOptimize(count);
    }
    state.SetItemsProcessed(state.iterations() * p.rows());
}
BENCHMARK(InsideTest)->Unit(benchmark::kMillisecond);

static void Raymarch(benchmark::State& state) {
    const CoordinateModel model = mpe_model(3, {64, 64});
    const int size = static_cast<int>(state.range(0));
    for (auto _ : state) {
        DepthImage d = raymarch_depth(model, orbit_camera(), size, size);
        benchmark::DoNotOptimize(d.depth.data());
    }
}
BENCHMARK(Raymarch)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
