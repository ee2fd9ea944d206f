#include <benchmark/benchmark.h>

#include "xvapinn/autodiff.hpp"
#include "xvapinn/experiment.hpp"
#include "xvapinn/geometry.hpp"
#include "xvapinn/loss.hpp"
#include "xvapinn/models.hpp"
#include "xvapinn/reference.hpp"

using namespace xvapinn;

namespace {

// Table 1 problem on an N x N grid with the [2,40x4,1] network.
struct Bs1dSetup {
    ModelSpec spec = table1_bs1d(0.04);
    CollocationSet grid;
    NetworkParams net;

    explicit Bs1dSetup(int n)
        : grid(build_grid_1d(spec.domain, n, n + n / 10)),
          net(init([&] {
              auto a = Architecture::uniform(2, 4, 40);
              a.input_scaling = unit_box_scaling(spec.domain);
              return a;
          }(), 1)) {}
};

void BM_JetForward(benchmark::State& state) {
    Bs1dSetup s(static_cast<int>(state.range(0)));
    const Eigen::MatrixXd pts = s.grid.stacked_points();
    JetEngine engine;
    for (auto _ : state) benchmark::DoNotOptimize(engine.forward(s.net, pts).data().data());
    state.SetItemsProcessed(state.iterations() * pts.cols());
}
BENCHMARK(BM_JetForward)->Arg(25)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_LossAssemble(benchmark::State& state) {
    Bs1dSetup s(static_cast<int>(state.range(0)));
    LossFunction loss(s.spec, s.grid);
    for (auto _ : state) benchmark::DoNotOptimize(loss.assemble(s.net).total);
}
BENCHMARK(BM_LossAssemble)->Arg(25)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_LossGradient(benchmark::State& state) {
    Bs1dSetup s(static_cast<int>(state.range(0)));
    LossFunction loss(s.spec, s.grid);
    ParamGradient g;
    for (auto _ : state) benchmark::DoNotOptimize(loss.assemble_with_gradient(s.net, g).total);
}
BENCHMARK(BM_LossGradient)->Arg(25)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_Fd1d(benchmark::State& state) {
    const auto spec = table1_bs1d(0.04);
    const int n = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(fd_solve_1d(spec, n, n).values.data());
}
BENCHMARK(BM_Fd1d)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

void BM_Fd2dBasket(benchmark::State& state) {
    const auto spec = table3_basket(ModelKind::BasketAverage, 0.02);
    const int n = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(fd_solve_2d(spec, n, n, 20).values.data());
}
BENCHMARK(BM_Fd2dBasket)->Arg(40)->Arg(80)->Unit(benchmark::kMillisecond);

void BM_RiskyBsJet(benchmark::State& state) {
    const auto spec = table1_bs1d(0.04);
    const std::vector<double> p{2.5, 15.0};
    for (auto _ : state) benchmark::DoNotOptimize(risky_bs_jet(spec, p).value);
}
BENCHMARK(BM_RiskyBsJet);

}  // namespace

BENCHMARK_MAIN();
