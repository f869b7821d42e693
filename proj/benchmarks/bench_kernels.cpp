#include <random>

#include <benchmark/benchmark.h>

#include "subrad/block_engine.hpp"
#include "subrad/cumulant.hpp"
#include "subrad/mcwf.hpp"

using namespace subrad;

namespace {

SystemModel chain(int n, double a = 0.15) { return SystemModel(coupling_matrices(build_lattice(1, {n}, a))); }

Eigen::VectorXcd random_vector(std::size_t size) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    Eigen::VectorXcd x(static_cast<Eigen::Index>(size));
    for (auto& v : x) v = cplx(g(rng), g(rng));
    return x;
}

} // namespace

// Master-equation generator on the manifold-diagonal blocks (Hermitian mode).
static void BM_EngineDiagonal(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const SystemModel m = chain(n);
    const LiouvillianEngine engine(m, BlockLayout::diagonal(BasisPartition::by_excitation(n)), Picture::Schrodinger,
                                   true);
    const Eigen::VectorXcd x = random_vector(engine.layout().size());
    Eigen::VectorXcd y(x.size());
    for (auto _ : state) {
        engine.apply(x, y);
        benchmark::DoNotOptimize(y.data());
    }
    state.SetItemsProcessed(state.iterations() * x.size());
}
BENCHMARK(BM_EngineDiagonal)->Arg(6)->Arg(8)->Arg(10)->Unit(benchmark::kMillisecond);

// Correlation-function propagation layout (one manifold below the diagonal).
static void BM_EngineOffset(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const SystemModel m = chain(n);
    const LiouvillianEngine engine(m, BlockLayout::offset(BasisPartition::by_excitation(n), -1), Picture::Schrodinger);
    const Eigen::VectorXcd x = random_vector(engine.layout().size());
    Eigen::VectorXcd y(x.size());
    for (auto _ : state) {
        engine.apply(x, y);
        benchmark::DoNotOptimize(y.data());
    }
    state.SetItemsProcessed(state.iterations() * x.size());
}
BENCHMARK(BM_EngineOffset)->Arg(6)->Arg(8)->Arg(10)->Unit(benchmark::kMillisecond);

static void BM_CumulantRhs(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const SystemModel m = chain(n);
    std::vector<int> cb;
    for (int i = 0; i < n; i += 2) cb.push_back(i);
    // Evolve briefly so every moment family is populated.
    const auto s = evolve_cumulant(m, to_cumulant(ExcitationSet::make(n, cb)), {0.0, 0.5}).snapshots.back();
    for (auto _ : state) benchmark::DoNotOptimize(cumulant_rhs(m, s).data().data());
}
BENCHMARK(BM_CumulantRhs)->Arg(10)->Arg(16)->Arg(24)->Arg(36)->Unit(benchmark::kMillisecond);

static void BM_Trajectory(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const SystemModel m = chain(n);
    std::vector<int> cb;
    for (int i = 0; i < n; i += 2) cb.push_back(i);
    const PureState psi = incoherent_product_state(ExcitationSet::make(n, cb));
    const std::vector<double> grid = uniform_grid(10.0, 0.1);
    TrajectoryConfig cfg;
    std::uint64_t index = 0;
    for (auto _ : state) benchmark::DoNotOptimize(evolve_trajectory(m, psi, grid, cfg, index++).states.size());
}
BENCHMARK(BM_Trajectory)->Arg(6)->Arg(10)->Unit(benchmark::kMillisecond);
