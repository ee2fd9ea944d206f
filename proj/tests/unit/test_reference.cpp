#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "xvapinn/errors.hpp"
#include "xvapinn/reference.hpp"

using namespace xvapinn;

namespace {

// Composite Simpson on [0, x] plus 1/2: independent of the erfc route.
double phi_quadrature(double x) {
    const int n = 20000;
    const double h = x / n;
    double s = normal_pdf(0.0) + normal_pdf(x);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * std::exp(-0.5 * (i * h) * (i * h)) / std::sqrt(2 * M_PI);
    return 0.5 + s * h / 3.0;
}

double rel_l2(const SolutionSurface& s, const ModelSpec& spec, double lo, double hi, bool risky) {
    double e = 0, r = 0;
    for (std::size_t n = 1; n < s.t.size(); ++n)
        for (std::size_t j = 0; j < s.axes[0].size(); ++j) {
            const double S = s.axes[0][j];
            if (S < lo || S > hi) continue;
            const double ref = risky ? risky_bs_price(s.t[n], S, spec) : bs_price(s.t[n], S, spec);
            e += (s.at(n, j) - ref) * (s.at(n, j) - ref);
            r += ref * ref;
        }
    return std::sqrt(e / r);
}

ModelSpec bs_like(double sigma, double r_R, const ModelSpec& from) {
    ModelSpec m = table1_bs1d(0.0);
    m.K = from.K;
    m.alpha = from.alpha;
    m.xva = from.xva;
    m.domain.T = from.domain.T;
    m.domain.axes = {Axis{"S", 0.0, 4.0 * from.K}};
    m.market = Bs1dMarket{sigma, r_R};
    return m;
}

}  // namespace

TEST_CASE("normal CDF") {
    CHECK(normal_cdf(0.0) == 0.5);
    CHECK(std::abs(normal_cdf(1.959964) - 0.975) <= 1e-7);
    CHECK(std::abs(normal_cdf(1.959964) - phi_quadrature(1.959964)) <= 1e-12);
    CHECK(normal_cdf(-8.0) < 1e-15);
    CHECK(normal_cdf(-8.0) > 0.0);
    double prev = 0.0;
    for (double x = -10.0; x <= 10.0; x += 0.01) {
        const double p = normal_cdf(x);
        CHECK(p >= prev);
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
        CHECK(std::abs(p + normal_cdf(-x) - 1.0) <= 1e-15);
        prev = p;
    }
    for (double x : {0.3, 1.0, 2.5, 4.0}) CHECK(std::abs(normal_cdf(x) - phi_quadrature(x)) <= 1e-13);
}

TEST_CASE("Black-Scholes put at the Table 1 strike") {
    const auto spec = table1_bs1d(0.0);
    CHECK(std::abs(bs_price(5.0, 15.0, spec) - 2.476) <= 2e-3);
    CHECK(bs_price(5.0, 15.0, spec) == doctest::Approx(2.475965903488264).epsilon(1e-13));
}

TEST_CASE("short maturity limit and S = 0") {
    const auto p = bs_params(table1_bs1d(0.0));
    for (double S : {5.0, 14.0, 14.99, 15.01, 16.0, 40.0})
        CHECK(std::abs(bs_price(1e-10, S, p) - std::max(p.K - S, 0.0)) <= 1e-6);
    // at the strike the time value is K sigma sqrt(t / 2 pi) to leading order
    const double atm = p.K * p.sigma * std::sqrt(1e-10 / (2 * M_PI));
    CHECK(bs_price(1e-10, p.K, p) == doctest::Approx(atm).epsilon(1e-3));
    CHECK(bs_price(0.0, 10.0, p) == 5.0);
    CHECK(bs_price(2.0, 0.0, p) == doctest::Approx(15.0 * std::exp(-0.03 * 2.0)).epsilon(1e-15));
    BsParams bad = p;
    bad.sigma = 0.0;
    CHECK_THROWS_AS(bs_price(1.0, 10.0, bad), ContractError);
    CHECK_THROWS_AS(bs_price(-1.0, 10.0, p), ContractError);
}

TEST_CASE("put-call parity") {
    auto p = bs_params(table1_bs1d(0.0));
    auto c = p;
    c.alpha = +1;
    for (double t : {0.1, 1.0, 5.0})
        for (double S = 1.0; S <= 60.0; S += 2.5) {
            const double lhs = bs_price(t, S, c) - bs_price(t, S, p);
            const double rhs = S * std::exp(-(p.r - p.r_R) * t) - p.K * std::exp(-p.r * t);
            CHECK(std::abs(lhs - rhs) <= 1e-12);
        }
}

TEST_CASE("closed-form Greeks match differences of the price") {
    const auto spec = table1_bs1d(0.04);
    for (double t : {0.3, 2.0, 5.0})
        for (double S : {5.0, 12.5, 15.0, 17.5, 30.0}) {
            const auto g = risky_bs_greeks(t, S, spec);
            const double h = 1e-4, H = 1e-3;
            const double d = (risky_bs_price(t, S + h, spec) - risky_bs_price(t, S - h, spec)) / (2 * h);
            const double gm = (risky_bs_price(t, S + H, spec) - 2 * g.price + risky_bs_price(t, S - H, spec)) / (H * H);
            const double th = (risky_bs_price(t + h, S, spec) - risky_bs_price(t - h, S, spec)) / (2 * h);
            CHECK(std::abs(g.delta - d) <= 1e-6);
            CHECK(std::abs(g.gamma - gm) <= 1e-4);
            CHECK(std::abs(g.theta - th) <= 1e-6);
        }
}

TEST_CASE("risky price") {
    const auto spec = table1_bs1d(0.04);
    const auto rf = risk_free(spec);
    for (double t : {0.5, 5.0})
        for (double S : {3.0, 15.0, 40.0}) {
            CHECK(risky_bs_price(t, S, rf) == bs_price(t, S, rf));
            CHECK(risky_bs_price(t, S, spec) / bs_price(t, S, spec) ==
                  doctest::Approx(std::exp(-(0.04 * 0.6 + 0.05 * 0.6) * t)).epsilon(1e-14));
        }
    CHECK(risky_factor(5.0, spec.xva) == doctest::Approx(std::exp(-0.27)).epsilon(1e-15));
    CHECK(std::abs(risky_bs_price(3.0, 0.0, spec) -
                   dirichlet_value(spec, RegionId::lower(0), std::vector<double>{3.0, 0.0})) <= 1e-12);
    CHECK(risky_bs_price(5.0, 15.0, spec) == doctest::Approx(1.8901015994001609).epsilon(1e-12));
}

TEST_CASE("1D FD against the closed form at 400 x 400") {
    for (double lb : {0.0, 0.04}) {
        const auto spec = lb == 0.0 ? risk_free(table1_bs1d(0.0)) : table1_bs1d(lb);
        const auto s = fd_solve_1d(spec, 400, 400);
        CHECK(rel_l2(s, spec, 7.5, 22.5, true) <= 1e-3);
        CHECK(s.converged);
        CHECK(s.max_fixed_point_iterations <= 10);
        s.validate();
    }
}

TEST_CASE("1D FD is second order near the strike") {
    const auto spec = table1_bs1d(0.04);
    std::vector<double> err;
    for (int n : {100, 200, 400}) {
        const auto s = fd_solve_1d(spec, n, n);
        double e = 0, r = 0;
        const std::size_t last = s.t.size() - 1;
        for (std::size_t j = 0; j < s.axes[0].size(); ++j) {
            const double S = s.axes[0][j];
            if (S < 12.0 || S > 18.0) continue;
            const double ref = risky_bs_price(s.t[last], S, spec);
            e += (s.at(last, j) - ref) * (s.at(last, j) - ref);
            r += ref * ref;
        }
        err.push_back(std::sqrt(e / r));
    }
    for (std::size_t k = 1; k < err.size(); ++k) {
        const double ratio = err[k - 1] / err[k];
        CHECK(ratio >= 3.5);
        CHECK(ratio <= 4.5);
    }
}

TEST_CASE("1D FD with a zero initial condition stays zero") {
    FdOptions o;
    o.initial = [](std::span<const double>) { return 0.0; };
    const auto s = fd_solve_1d(table1_bs1d(0.06), 20, 20, o);
    for (double v : s.values) CHECK(v == 0.0);
    CHECK_THROWS_AS(fd_solve_1d(table1_bs1d(0.0), 3, 20), ContractError);
}

TEST_CASE("average basket with a frozen second asset is a half put on the first") {
    auto spec = risk_free(table3_basket(ModelKind::BasketAverage, 0.0));
    auto& m = std::get<BasketMarket>(spec.market);
    m.rho = 0.0;
    m.sigma2 = 1e-3;
    m.r_R2 = 0.0;
    const auto s = fd_solve_2d(spec, 80, 80, 50);
    const double S2 = 50.0;  // strike of the equivalent put: 2K - S2 = 50
    auto one = bs_like(m.sigma1, m.r_R1, spec);
    one.K = 2 * spec.K - S2;
    for (double S1 : {40.0, 50.0, 60.0}) {
        const double fd = s.interpolate(std::vector<double>{1.0, S1, S2});
        const double ref = 0.5 * bs_price(1.0, S1, one);
        CHECK(std::abs(fd - ref) / ref <= 5e-2);
    }
}

TEST_CASE("worst-of with a far second asset is a put on the first") {
    const auto spec = table3_basket(ModelKind::BasketWorstOf, 0.04);
    const auto& m = spec.basket();
    const auto s = fd_solve_2d(spec, 80, 80, 50);
    const auto one = bs_like(m.sigma1, m.r_R1, spec);
    for (double S1 : {30.0, 40.0, 50.0, 60.0}) {
        const double fd = s.interpolate(std::vector<double>{1.0, S1, 200.0});
        const double ref = risky_bs_price(1.0, S1, one);
        CHECK(std::abs(fd - ref) / ref <= 1e-2);
    }
    CHECK(s.max_fixed_point_iterations <= 10);
}

TEST_CASE("Heston with zero vol-of-vol at nu = eta is Black-Scholes") {
    auto spec = risk_free(table4_heston(0.0));
    std::get<HestonMarket>(spec.market).sigma = 0.0;
    const auto& h = spec.heston();
    const auto s = fd_solve_2d(spec, 80, 75, 50);
    const auto one = bs_like(std::sqrt(h.eta), h.r_R, spec);
    double e = 0, r = 0;
    for (std::size_t n = 1; n < s.t.size(); ++n)
        for (double S = 0.5; S <= 1.5 + 1e-12; S += 0.05) {
            const double fd = s.interpolate(std::vector<double>{s.t[n], S, h.eta});
            const double ref = bs_price(s.t[n], S, one);
            e += (fd - ref) * (fd - ref);
            r += ref * ref;
        }
    CHECK(std::sqrt(e / r) <= 1e-2);
}

TEST_CASE("surface round trip through CSV and JSON") {
    const auto s = fd_solve_1d(table1_bs1d(0.02), 10, 8);
    const auto base = std::filesystem::temp_directory_path() / "xvapinn_tests" / "surface";
    std::filesystem::create_directories(base.parent_path());
    write_surface(s, base);
    const auto b = read_surface(base);
    CHECK(b.t == s.t);
    CHECK(b.axes == s.axes);
    CHECK(b.values == s.values);
    CHECK(b.axis_names == s.axis_names);
    CHECK(b.max_fixed_point_iterations == s.max_fixed_point_iterations);
    CHECK(s.interpolate(std::vector<double>{s.t[3], s.axes[0][4]}) == s.at(3, 4));
}
