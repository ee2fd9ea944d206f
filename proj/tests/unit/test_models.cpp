#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include "xvapinn/errors.hpp"
#include "xvapinn/models.hpp"
#include "xvapinn/reference.hpp"

using namespace xvapinn;

namespace {

Jet2 random_jet(std::mt19937_64& rng, int d) {
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    Jet2 j;
    j.space_dim = d;
    j.value = u(rng);
    j.d_t = u(rng);
    for (int i = 0; i < d; ++i) {
        j.d_x[i] = u(rng);
        for (int k = i; k < d; ++k) j.set_d_xx(i, k, u(rng));
    }
    return j;
}

double eval(const ModelSpec& spec, RegionId id, const Jet2& j, std::vector<double> p,
            BoundaryMode mode = BoundaryMode::PdeBoundary) {
    return ResidualOperator(std::make_shared<ModelSpec>(spec), id, mode)(j, p);
}

}  // namespace

TEST_CASE("source term values") {
    XvaParams x{0.1, 0.05, 0.4, 0.4, 0.06, 0.03};
    CHECK(source_term(10.0, x) == doctest::Approx(0.9));
    CHECK(source_term(-10.0, x) == doctest::Approx(-0.6));
    CHECK(source_term(0.0, x) == 0.0);
    CHECK(source_term(3.0, XvaParams{}) == 0.0);
    const auto d = XvaParams::with_default_funding(0.04, 0.05, 0.4, 0.4, 0.03);
    CHECK(d.s_F == doctest::Approx(0.6 * 0.04));
}

TEST_CASE("source term: continuity and positive homogeneity") {
    XvaParams x{0.07, 0.05, 0.3, 0.4, 0.049, 0.03};
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-50, 50), a(0.01, 10);
    for (int i = 0; i < 200; ++i) {
        const double v = u(rng), s = a(rng);
        CHECK(source_term(s * v, x) == doctest::Approx(s * source_term(v, x)).epsilon(1e-13));
    }
    CHECK(std::abs(source_term(1e-14, x)) < 1e-14);
    CHECK(std::abs(source_term(-1e-14, x)) < 1e-14);
}

TEST_CASE("payoffs") {
    const auto bs = table1_bs1d(0.0);
    CHECK(payoff(bs, std::vector<double>{15.0}) == 0.0);
    CHECK(payoff(bs, std::vector<double>{12.0}) == 3.0);
    const auto wo = table3_basket(ModelKind::BasketWorstOf, 0.0);
    CHECK(payoff(wo, std::vector<double>{45.0, 60.0}) == 5.0);
    const auto avg = table3_basket(ModelKind::BasketAverage, 0.0, +1);
    CHECK(payoff(avg, std::vector<double>{40.0, 70.0}) == 5.0);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 200);
    for (int i = 0; i < 100; ++i) {
        const std::vector<double> s{u(rng), u(rng)};
        CHECK(payoff(wo, s) >= 0.0);
        CHECK(payoff(avg, s) >= 0.0);
    }
}

TEST_CASE("Feller check") {
    CHECK(feller_check(table4_heston(0.0)));
    auto v = table4_heston(0.0);
    std::get<HestonMarket>(v.market).kappa = 1.0;
    std::get<HestonMarket>(v.market).eta = 0.01;
    CHECK_FALSE(feller_check(v));
    std::get<HestonMarket>(v.market).sigma = 0.0;
    CHECK(feller_check(v));
    CHECK_THROWS_AS(feller_check(table1_bs1d(0.0)), ContractError);
}

TEST_CASE("table parameters") {
    const auto t1 = table1_bs1d(0.04);
    CHECK(t1.K == 15.0);
    CHECK(t1.domain.T == 5.0);
    CHECK(t1.domain.axes[0].max == 60.0);
    CHECK(t1.bs().sigma == 0.25);
    CHECK(t1.xva.r == 0.03);
    CHECK(t1.xva.s_F == doctest::Approx(0.024));
    const auto rf = risk_free(t1);
    CHECK(rf.xva.lambda_B == 0.0);
    CHECK(rf.xva.lambda_C == 0.0);
    CHECK(rf.xva.s_F == 0.0);
    CHECK(table3_basket(ModelKind::BasketAverage, 0.0).basket().rho == -0.65);
}

TEST_CASE("validation rejects bad parameters") {
    auto s = table3_basket(ModelKind::BasketAverage, 0.0);
    std::get<BasketMarket>(s.market).rho = 1.5;
    CHECK_THROWS_AS(s.validate(), ContractError);
    auto b = table1_bs1d(0.0);
    b.xva.R_B = 1.2;
    CHECK_THROWS_AS(b.validate(), ContractError);
    auto c = table1_bs1d(0.0);
    c.market = HestonMarket{};
    CHECK_THROWS_AS(c.validate(), ContractError);
}

TEST_CASE("S=0 Dirichlet function annihilates the lower residual") {
    for (double lb : {0.0, 0.04, 0.1}) {
        const auto spec = table1_bs1d(lb);
        for (double t : {0.0, 0.5, 2.0, 5.0}) {
            const std::vector<double> p{t, 0.0};
            const double c = spec.xva.r + spec.xva.lambda_B * (1 - spec.xva.R_B) + spec.xva.lambda_C * (1 - spec.xva.R_C);
            Jet2 j;
            j.value = 15.0 * std::exp(-c * t);
            j.d_t = -c * j.value;
            CHECK(std::abs(eval(spec, RegionId::lower(0), j, p)) <= 1e-12);
            CHECK(dirichlet_value(spec, RegionId::lower(0), p) == doctest::Approx(j.value).epsilon(1e-14));
        }
    }
}

TEST_CASE("interior residual of the risky closed form") {
    const auto spec = table1_bs1d(0.04);
    std::mt19937_64 rng(20);
    std::uniform_real_distribution<double> ut(0.01, 5.0), us(0.5, 60.0);
    for (int i = 0; i < 20; ++i) {
        const std::vector<double> p{ut(rng), us(rng)};
        CHECK(std::abs(eval(spec, RegionId::interior(), risky_bs_jet(spec, p), p)) <= 1e-6);
    }
}

TEST_CASE("zero field with zero payoff gives zero residuals") {
    auto spec = table1_bs1d(0.04);
    spec.K = 0.0;  // put payoff max(0 - S, 0) = 0 on S >= 0
    const Jet2 z{};
    for (auto id : {RegionId::interior(), RegionId::lower(0), RegionId::upper(0), RegionId::initial()})
        CHECK(eval(spec, id, z, {1.0, 10.0}) == 0.0);
}

TEST_CASE("risk-free reduction drops only the source term") {
    std::mt19937_64 rng(5);
    for (const auto& spec : {table1_bs1d(0.06), table3_basket(ModelKind::BasketWorstOf, 0.06), table4_heston(0.06)}) {
        const auto rf = risk_free(spec);
        const int d = spec.space_dim();
        const auto grid = build_grid(spec.domain, d == 1 ? std::vector<int>{3, 3} : std::vector<int>{3, 3, 3});
        for (const auto& r : grid.regions)
            for (Eigen::Index i = 0; i < r.size(); ++i) {
                const std::vector<double> p(r.points.col(i).data(), r.points.col(i).data() + d + 1);
                const Jet2 j = random_jet(rng, d);
                const double diff = eval(spec, r.id, j, p) - eval(rf, r.id, j, p);
                const double f = r.id.kind == RegionKind::Initial ? 0.0 : source_term(j.value, spec.xva);
                CHECK(diff == doctest::Approx(f).epsilon(1e-12));
            }
    }
}

TEST_CASE("boundary substitution: with the face condition the face residual equals the interior one") {
    std::mt19937_64 rng(8);
    const auto bs = table1_bs1d(0.04);
    for (int i = 0; i < 20; ++i) {
        Jet2 j = random_jet(rng, 1);
        j.d_xx[0][0] = 0.0;
        const std::vector<double> top{2.0, 60.0}, bottom{2.0, 0.0};
        CHECK(std::abs(eval(bs, RegionId::upper(0), j, top) - eval(bs, RegionId::interior(), j, top)) <= 1e-12);
        j = random_jet(rng, 1);
        CHECK(std::abs(eval(bs, RegionId::lower(0), j, bottom) - eval(bs, RegionId::interior(), j, bottom)) <= 1e-12);
    }
    const auto bk = table3_basket(ModelKind::BasketAverage, 0.02);
    for (int i = 0; i < 20; ++i) {
        Jet2 j = random_jet(rng, 2);
        j.set_d_xx(0, 0, 0.0);
        const std::vector<double> p{0.5, 200.0, 77.0};
        CHECK(std::abs(eval(bk, RegionId::upper(0), j, p) - eval(bk, RegionId::interior(), j, p)) <= 1e-12);
        j = random_jet(rng, 2);
        const std::vector<double> q{0.5, 0.0, 77.0};
        CHECK(std::abs(eval(bk, RegionId::lower(0), j, q) - eval(bk, RegionId::interior(), j, q)) <= 1e-12);
    }
    const auto h = table4_heston(0.02);
    for (int i = 0; i < 20; ++i) {
        Jet2 j = random_jet(rng, 2);
        j.set_d_xx(0, 0, 0.0);
        const std::vector<double> p{1.0, 4.0, 1.3};
        CHECK(std::abs(eval(h, RegionId::upper(0), j, p) - eval(h, RegionId::interior(), j, p)) <= 1e-12);
        j = random_jet(rng, 2);
        const std::vector<double> q{1.0, 2.0, 0.0};
        CHECK(std::abs(eval(h, RegionId::lower(1), j, q) - eval(h, RegionId::interior(), j, q)) <= 1e-12);
    }
}

TEST_CASE("Heston upper-variance face: printed form and strict Neumann form") {
    std::mt19937_64 rng(4);
    auto h = risk_free(table4_heston(0.0));
    const auto& m = h.heston();
    const std::vector<double> p{1.0, 2.0, 3.0};
    const Jet2 j = random_jet(rng, 2);
    const double S = 2.0, nu = 3.0;
    const double printed = j.d_t - m.rho * m.sigma * S * nu * j.d_xx[0][1] - 0.5 * m.sigma * m.sigma * nu * j.d_xx[1][1] -
                           m.r_R * S * j.d_x[0] - m.kappa * (m.eta - nu) * j.d_x[1] + h.xva.r * j.value;
    CHECK(eval(h, RegionId::upper(1), j, p) == doctest::Approx(printed).epsilon(1e-14));
    h.heston_strict_neumann = true;
    const double strict = j.d_t - 0.5 * S * S * nu * j.d_xx[0][0] - 0.5 * m.sigma * m.sigma * nu * j.d_xx[1][1] -
                          m.r_R * S * j.d_x[0] + h.xva.r * j.value;
    CHECK(eval(h, RegionId::upper(1), j, p) == doctest::Approx(strict).epsilon(1e-14));
}

TEST_CASE("average basket interior residual is symmetric under asset swap") {
    std::mt19937_64 rng(6);
    auto a = table3_basket(ModelKind::BasketAverage, 0.02);
    auto b = a;
    auto& mb = std::get<BasketMarket>(b.market);
    std::swap(mb.sigma1, mb.sigma2);
    std::swap(mb.r_R1, mb.r_R2);
    for (int i = 0; i < 20; ++i) {
        const Jet2 j = random_jet(rng, 2);
        Jet2 s = j;
        std::swap(s.d_x[0], s.d_x[1]);
        s.d_xx[0][0] = j.d_xx[1][1];
        s.d_xx[1][1] = j.d_xx[0][0];
        const std::vector<double> p{0.3, 40.0, 70.0}, q{0.3, 70.0, 40.0};
        CHECK(eval(a, RegionId::interior(), j, p) == doctest::Approx(eval(b, RegionId::interior(), s, q)).epsilon(1e-13));
    }
}

TEST_CASE("every grid region has one operator; unknown regions throw") {
    for (const auto& spec : {table1_bs1d(0.0), table3_basket(ModelKind::BasketAverage, 0.0), table4_heston(0.0)}) {
        const int d = spec.space_dim();
        const auto grid = build_grid(spec.domain, d == 1 ? std::vector<int>{2, 2} : std::vector<int>{2, 2, 2});
        const auto set = residuals(spec);
        CHECK(set.operators().size() == grid.regions.size());
        for (const auto& r : grid.regions) CHECK(set.at(r.id).region() == r.id);
        CHECK_THROWS_AS(set.at(RegionId::upper(5)), ContractError);
    }
}

TEST_CASE("classic mode uses the conditions themselves") {
    const auto bs = table1_bs1d(0.04);
    Jet2 j;
    j.value = 3.0;
    j.d_xx[0][0] = 0.25;
    const std::vector<double> p{1.0, 0.0}, q{1.0, 60.0};
    CHECK(eval(bs, RegionId::lower(0), j, p, BoundaryMode::Classic) ==
          doctest::Approx(3.0 - dirichlet_value(bs, RegionId::lower(0), p)));
    CHECK(eval(bs, RegionId::upper(0), j, q, BoundaryMode::Classic) == 0.25);
    CHECK(boundary_mode_from_string("classic") == BoundaryMode::Classic);
    CHECK(to_string(BoundaryMode::PdeBoundary) == "pde-boundary");
    CHECK_THROWS_AS(boundary_mode_from_string("bogus"), ContractError);
}
