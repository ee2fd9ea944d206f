#include <doctest.h>

#include <cmath>
#include <limits>

#include "xvapinn/errors.hpp"
#include "xvapinn/optim.hpp"

using namespace xvapinn;

namespace {

double rosenbrock(std::span<const double> x, std::span<double> g) {
    const double a = 1 - x[0], b = x[1] - x[0] * x[0];
    g[0] = -2 * a - 400 * x[0] * b;
    g[1] = 200 * b;
    return a * a + 100 * b * b;
}

}  // namespace

TEST_CASE("inverse time decay") {
    TrainConfig c;
    CHECK(lr_at(c, 0) == 1e-3);
    CHECK(lr_at(c, 12345) == 1e-3);
    c.decay = InverseTimeDecay{0.75, 5000};
    CHECK(lr_at(c, 0) == 1e-3);
    CHECK(lr_at(c, 5000) == doctest::Approx(5.7143e-4).epsilon(1e-4));
    c.decay = InverseTimeDecay{0.5, 10000};
    CHECK(lr_at(c, 10000) == doctest::Approx(6.6667e-4).epsilon(1e-4));
}

TEST_CASE("config validation") {
    TrainConfig c;
    c.lr0 = 0;
    CHECK_THROWS_AS(c.validate(), ContractError);
    c = {};
    c.adam_steps = -1;
    CHECK_THROWS_AS(c.validate(), ContractError);
    c = {};
    c.decay = InverseTimeDecay{0.5, 0};
    CHECK_THROWS_AS(c.validate(), ContractError);
}

TEST_CASE("Adam on (theta - 3)^2") {
    TrainConfig c;
    c.adam_steps = 5000;
    c.lr0 = 1e-2;
    ObjectiveFn f = [](std::span<const double> x, std::span<double> g) {
        g[0] = 2 * (x[0] - 3);
        return (x[0] - 3) * (x[0] - 3);
    };
    const auto r = adam_minimize(f, {0.0}, c);
    CHECK(std::abs(r.x[0] - 3.0) <= 1e-3);
    CHECK(r.steps == 5000);
}

TEST_CASE("Adam with zero gradient leaves parameters unchanged") {
    TrainConfig c;
    c.adam_steps = 50;
    ObjectiveFn f = [](std::span<const double>, std::span<double> g) {
        for (auto& v : g) v = 0;
        return 1.0;
    };
    const std::vector<double> x0{1.5, -2.0, 0.25};
    CHECK(adam_minimize(f, x0, c).x == x0);
}

TEST_CASE("Adam is deterministic and stops on non-finite loss") {
    TrainConfig c;
    c.adam_steps = 200;
    c.lr0 = 0.05;
    const auto a = adam_minimize(rosenbrock, {-1.2, 1.0}, c);
    const auto b = adam_minimize(rosenbrock, {-1.2, 1.0}, c);
    CHECK(a.x == b.x);
    CHECK(a.loss == b.loss);

    long calls = 0;
    ObjectiveFn bad = [&](std::span<const double> x, std::span<double> g) {
        g[0] = 1.0;
        return ++calls > 10 ? std::numeric_limits<double>::quiet_NaN() : x[0];
    };
    const auto r = adam_minimize(bad, {0.0}, c);
    CHECK(r.status == OptimStatus::NonFinite);
    CHECK(std::isfinite(r.x[0]));
}

TEST_CASE("L-BFGS solves Rosenbrock within 100 iterations") {
    TrainConfig c;
    c.lbfgs_steps = 100;
    const auto r = lbfgs_minimize(rosenbrock, {-1.2, 1.0}, c);
    CHECK(r.loss <= 1e-8);
    CHECK(r.steps <= 100);
}

TEST_CASE("L-BFGS accepted iterates never increase f") {
    TrainConfig c;
    c.lbfgs_steps = 60;
    double last = std::numeric_limits<double>::infinity();
    bool monotone = true;
    StepCallback cb = [&](long, std::span<const double>, double loss) {
        monotone = monotone && loss <= last;
        last = loss;
        return true;
    };
    ObjectiveFn f = [](std::span<const double> x, std::span<double> g) {
        double s = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double w = 1.0 + 10.0 * static_cast<double>(i);
            s += w * std::pow(x[i] - 1, 4) + std::cos(x[i]);
            g[i] = 4 * w * std::pow(x[i] - 1, 3) - std::sin(x[i]);
        }
        return s;
    };
    lbfgs_minimize(f, {3.0, -2.0, 0.5, 4.0}, c, cb);
    CHECK(monotone);
}

TEST_CASE("L-BFGS at the minimum returns the input") {
    TrainConfig c;
    c.lbfgs_steps = 20;
    const auto r = lbfgs_minimize(rosenbrock, {1.0, 1.0}, c);
    CHECK(r.x == std::vector<double>{1.0, 1.0});
    CHECK(r.status == OptimStatus::Converged);
    CHECK(r.steps == 0);
}

TEST_CASE("two-stage training on a small 1D problem") {
    const auto spec = risk_free(table1_bs1d(0.0));
    auto arch = Architecture::uniform(2, 2, 8);
    arch.input_scaling = InputScaling::unit_box(std::vector<double>{0, 0}, std::vector<double>{5, 60});
    LossFunction loss(spec, build_grid_1d(spec.domain, 8, 10));
    TrainConfig c;
    c.adam_steps = 300;
    c.lbfgs_steps = 100;
    c.log_every = 50;
    c.lr0 = 5e-3;
    const auto r = train(loss, init(arch, 3), c);
    CHECK(r.final_loss.total <= r.adam_loss.total);
    CHECK(r.adam_loss.total < r.initial_loss.total);
    CHECK(loss.assemble(r.params).total == doctest::Approx(r.final_loss.total).epsilon(1e-12));
    REQUIRE(!r.trajectory.empty());
    CHECK(r.trajectory.front().step == 0);
    CHECK(r.trajectory.front().lr == 5e-3);
    CHECK(r.trajectory.back().lr == 0.0);

    const auto again = train(loss, init(arch, 3), c);
    CHECK(again.params.flatten() == r.params.flatten());
}
