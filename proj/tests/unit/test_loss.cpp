#include <doctest.h>

#include <cmath>
#include <sstream>

#include "xvapinn/errors.hpp"
#include "xvapinn/loss.hpp"
#include "xvapinn/reference.hpp"

using namespace xvapinn;

namespace {

NetworkParams zero_net(int din) {
    const auto a = Architecture::uniform(din, 1, 3);
    return init(a, 1).with_flat(std::vector<double>(param_count(a), 0.0));
}

NetworkParams small_net(int din, std::uint64_t seed) {
    auto a = Architecture::uniform(din, 1, 4);
    a.input_scaling = InputScaling::unit_box(std::vector<double>{0, 0}, std::vector<double>{5, 60});
    return init(a, seed);
}

}  // namespace

TEST_CASE("zero network on a 2x2 grid: initial term by hand") {
    const auto spec = risk_free(table1_bs1d(0.0));
    const auto grid = build_grid_1d(spec.domain, 2, 2);
    const auto b = assemble(spec, zero_net(2), grid);
    CHECK(b.term("initial") == doctest::Approx(56.25).epsilon(1e-14));
    CHECK(b.term("interior") == 0.0);
    CHECK(b.term("lower_S") == 0.0);
    CHECK(b.term("upper_S") == 0.0);
    CHECK_THROWS_AS(b.term("nowhere"), ContractError);
}

TEST_CASE("breakdown: total is the sum, terms are nonnegative") {
    const auto spec = table1_bs1d(0.04);
    const auto b = assemble(spec, small_net(2, 3), build_grid_1d(spec.domain, 6, 8));
    double s = 0;
    for (double t : b.terms) {
        CHECK(t >= 0.0);
        s += t;
    }
    CHECK(std::abs(b.total - s) <= 1e-12 * b.total);
    CHECK(b.names == std::vector<std::string>{"interior", "lower_S", "upper_S", "initial"});
}

TEST_CASE("closed-form risky field annihilates every term") {
    for (double lb : {0.0, 0.04, 0.1}) {
        const auto spec = table1_bs1d(lb);
        const auto grid = build_grid_1d(spec.domain, 20, 24);
        const auto b = assemble_field(residuals(spec), grid, [&](std::span<const double> p) { return risky_bs_jet(spec, p); });
        CHECK(b.term("interior") <= 1e-10);
        CHECK(b.term("lower_S") <= 1e-10);
        CHECK(b.term("initial") <= 1e-10);
    }
}

TEST_CASE("closed-form field at S_max leaves only the dropped diffusion term") {
    const auto spec = table1_bs1d(0.04);
    const auto grid = build_grid_1d(spec.domain, 20, 24);
    const auto b = assemble_field(residuals(spec), grid, [&](std::span<const double> p) { return risky_bs_jet(spec, p); });
    const auto& face = grid.region(RegionId::upper(0));
    const double sig = spec.bs().sigma;
    double expect = 0;
    for (Eigen::Index i = 0; i < face.size(); ++i) {
        const double S = face.points(1, i);
        const double g = risky_bs_greeks(face.points(0, i), S, spec).gamma;
        const double R = 0.5 * sig * sig * S * S * g;
        expect += face.weights(i) * R * R;
    }
    expect /= face.volume;
    CHECK(b.term("upper_S") == doctest::Approx(expect).epsilon(1e-8));
    CHECK(b.term("upper_S") > 1e-10);
}

TEST_CASE("empty region contributes zero") {
    const auto spec = table1_bs1d(0.0);
    auto grid = build_grid_1d(spec.domain, 2, 2);
    auto& r = grid.regions[1];
    r.points.resize(2, 0);
    r.weights.resize(0);
    const auto b = assemble_field(residuals(spec), grid, [](std::span<const double>) { return Jet2{1.0}; });
    CHECK(b.terms[1] == 0.0);
}

TEST_CASE("gradient on a 4x4 grid matches central differences") {
    const auto spec = table1_bs1d(0.04);
    const auto grid = build_grid_1d(spec.domain, 4, 4);
    const auto net = small_net(2, 12);
    const auto lg = assemble_with_gradient(spec, net, grid);
    CHECK(lg.loss.total == assemble(spec, net, grid).total);
    CHECK(lg.gradient.size() == net.size());
    auto flat = net.flatten();
    for (std::size_t k = 0; k < flat.size(); ++k) {
        const double h = 1e-6;
        auto p = flat, m = flat;
        p[k] += h;
        m[k] -= h;
        const double fd = (assemble(spec, net.with_flat(p), grid).total - assemble(spec, net.with_flat(m), grid).total) / (2 * h);
        const double scale = std::max(std::abs(fd), std::abs(lg.gradient[k]));
        if (scale > 1e-8) CHECK(std::abs(fd - lg.gradient[k]) / scale <= 1e-5);
    }
}

TEST_CASE("constant network: gradient with respect to the output bias by hand") {
    // u = c everywhere: interior/boundary residuals are (r + slope) c, initial is c - H.
    const auto spec = table1_bs1d(0.04);
    const auto grid = build_grid_1d(spec.domain, 4, 4);
    auto net = zero_net(2);
    auto flat = net.flatten();
    const double c = 0.7;
    flat.back() = c;
    net = net.with_flat(flat);
    const auto lg = assemble_with_gradient(spec, net, grid);
    const double k = spec.xva.r + spec.xva.positive_slope();
    double expect = 0;
    for (const auto& r : grid.regions) {
        for (Eigen::Index i = 0; i < r.size(); ++i) {
            const std::vector<double> S{r.points(1, i)};
            const double R = r.id.kind == RegionKind::Initial ? c - payoff(spec, S) : k * c;
            const double dR = r.id.kind == RegionKind::Initial ? 1.0 : k;
            expect += 2.0 * r.weights(i) * R * dR / r.volume;
        }
    }
    CHECK(lg.gradient.back() == doctest::Approx(expect).epsilon(1e-12));
    CHECK(lg.loss.term("initial") > 0.0);
}

TEST_CASE("scaling every residual by c scales the loss by c squared") {
    const auto spec = risk_free(table1_bs1d(0.0));
    const auto grid = build_grid_1d(spec.domain, 5, 5);
    // linear PDE; the payoff term does not scale, so the initial slice is weighted out
    const auto set = residuals(spec);
    const std::vector<double> w{1.0, 1.0, 1.0, 0.0};
    auto field = [](double s) {
        return [s](std::span<const double> p) {
            Jet2 j;
            j.value = s * std::sin(p[0]) * p[1];
            j.d_t = s * std::cos(p[0]) * p[1];
            j.d_x[0] = s * std::sin(p[0]);
            return j;
        };
    };
    const double a = assemble_field(set, grid, field(1.0), w).total;
    const double b = assemble_field(set, grid, field(3.0), w).total;
    CHECK(a > 0.0);
    CHECK(b == doctest::Approx(9.0 * a).epsilon(1e-13));
}

TEST_CASE("volume normalisation: terms change by quadrature error only under refinement") {
    const auto spec = table1_bs1d(0.0);
    const auto set = residuals(spec);
    auto field = [](std::span<const double> p) {
        Jet2 j;
        j.value = 0.01 * p[1] * p[1] + p[0];
        j.d_t = 1.0;
        j.d_x[0] = 0.02 * p[1];
        j.d_xx[0][0] = 0.02;
        return j;
    };
    const auto coarse = assemble_field(set, build_grid_1d(spec.domain, 20, 20), field);
    const auto fine = assemble_field(set, build_grid_1d(spec.domain, 40, 40), field);
    for (std::size_t k = 0; k < coarse.terms.size(); ++k)
        CHECK(std::abs(fine.terms[k] - coarse.terms[k]) <= 0.1 * fine.terms[k]);
}

TEST_CASE("loss is bit-identical across repeated evaluations and stacked order") {
    const auto spec = table3_basket(ModelKind::BasketAverage, 0.02);
    auto arch = Architecture::uniform(3, 2, 6);
    arch.input_scaling = InputScaling::unit_box(std::vector<double>{0, 0, 0}, std::vector<double>{1, 200, 200});
    const auto net = init(arch, 2);
    const auto grid = build_grid_2d(spec.domain, 3, 4, 4);
    LossFunction f(spec, grid);
    const auto a = f.assemble(net);
    const auto b = f.assemble(net);
    CHECK(a.total == b.total);
    auto rev = grid;
    std::reverse(rev.regions.begin(), rev.regions.end());
    LossFunction g(spec, rev);
    const auto c = g.assemble(net);
    for (const auto& name : a.names) CHECK(c.term(name) == a.term(name));
}

TEST_CASE("trajectory CSV layout") {
    TrajectoryRow r;
    r.step = 100;
    r.loss.names = {"interior", "initial"};
    r.loss.terms = {1.0, 2.0};
    r.loss.total = 3.0;
    r.lr = 1e-3;
    std::ostringstream os;
    write_trajectory_csv(os, {r});
    CHECK(os.str().rfind("step,total,interior,initial,lr\n100,", 0) == 0);
}
