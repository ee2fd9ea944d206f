#include "xvapinn/models.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "xvapinn/errors.hpp"
#include "xvapinn/reference.hpp"

namespace xvapinn {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw ContractError(what);
}

bool finite(double v) { return std::isfinite(v); }

DomainBox box_1d(double T, double s_max) { return {T, {Axis{"S", 0.0, s_max}}}; }

}  // namespace

XvaParams XvaParams::with_default_funding(double lambda_B, double lambda_C, double R_B,
                                          double R_C, double r) {
    return {lambda_B, lambda_C, R_B, R_C, (1.0 - R_B) * lambda_B, r};
}

void XvaParams::validate() const {
    require(finite(lambda_B) && lambda_B >= 0.0, "lambda_B must be finite and >= 0");
    require(finite(lambda_C) && lambda_C >= 0.0, "lambda_C must be finite and >= 0");
    require(R_B >= 0.0 && R_B <= 1.0, "R_B must lie in [0, 1]");
    require(R_C >= 0.0 && R_C <= 1.0, "R_C must lie in [0, 1]");
    require(finite(s_F), "s_F must be finite");
    require(finite(r), "r must be finite");
}

std::string_view to_string(ModelKind k) {
    switch (k) {
        case ModelKind::Bs1d: return "bs1d";
        case ModelKind::BasketAverage: return "basket_average";
        case ModelKind::BasketWorstOf: return "basket_worst_of";
        case ModelKind::Heston: return "heston";
    }
    return "?";
}

ModelKind model_kind_from_string(std::string_view name) {
    for (auto k : {ModelKind::Bs1d, ModelKind::BasketAverage, ModelKind::BasketWorstOf,
                   ModelKind::Heston})
        if (to_string(k) == name) return k;
    throw ContractError("unknown model kind '" + std::string(name) + "'");
}

std::string_view to_string(BoundaryMode m) {
    return m == BoundaryMode::Classic ? "classic" : "pde-boundary";
}

BoundaryMode boundary_mode_from_string(std::string_view name) {
    if (name == "classic") return BoundaryMode::Classic;
    if (name == "pde-boundary") return BoundaryMode::PdeBoundary;
    throw ContractError("unknown boundary mode '" + std::string(name) + "'");
}

void ModelSpec::validate() const {
    require(alpha == 1 || alpha == -1, "alpha must be +1 (call) or -1 (put)");
    require(finite(K) && K > 0.0, "K must be > 0");
    xva.validate();
    domain.validate();
    require(domain.space_dim() == space_dim(), "domain dimension does not match the model kind");
    for (const auto& a : domain.axes) require(a.min >= 0.0, "space axes must start at >= 0");

    switch (kind) {
        case ModelKind::Bs1d: {
            require(std::holds_alternative<Bs1dMarket>(market), "Bs1d spec needs Bs1d market parameters");
            require(bs().sigma > 0.0 && finite(bs().sigma), "sigma must be > 0");
            require(finite(bs().r_R), "r_R must be finite");
            break;
        }
        case ModelKind::BasketAverage:
        case ModelKind::BasketWorstOf: {
            require(std::holds_alternative<BasketMarket>(market), "basket spec needs basket market parameters");
            const auto& b = basket();
            require(b.sigma1 > 0.0 && b.sigma2 > 0.0 && finite(b.sigma1) && finite(b.sigma2),
                    "sigma1, sigma2 must be > 0");
            require(finite(b.r_R1) && finite(b.r_R2), "r_R1, r_R2 must be finite");
            require(std::abs(b.rho) <= 1.0, "|rho| must be <= 1");
            break;
        }
        case ModelKind::Heston: {
            require(std::holds_alternative<HestonMarket>(market), "Heston spec needs Heston market parameters");
            const auto& h = heston();
            require(h.kappa > 0.0 && finite(h.kappa), "kappa must be > 0");
            require(h.eta > 0.0 && finite(h.eta), "eta must be > 0");
            // sigma = 0 is the deterministic-variance limit
            require(h.sigma >= 0.0 && finite(h.sigma), "sigma must be >= 0");
            require(finite(h.r_R), "r_R must be finite");
            require(std::abs(h.rho) <= 1.0, "|rho| must be <= 1");
            break;
        }
    }
}

ModelSpec table1_bs1d(double lambda_B, int alpha) {
    ModelSpec m;
    m.kind = ModelKind::Bs1d;
    m.alpha = alpha;
    m.K = 15.0;
    m.market = Bs1dMarket{0.25, 0.015};
    m.xva = XvaParams::with_default_funding(lambda_B, 0.05, 0.4, 0.4, 0.03);
    m.domain = box_1d(5.0, 4.0 * m.K);
    return m;
}

ModelSpec table3_basket(ModelKind kind, double lambda_B, int alpha) {
    require(kind == ModelKind::BasketAverage || kind == ModelKind::BasketWorstOf,
            "table3_basket needs a basket kind");
    ModelSpec m;
    m.kind = kind;
    m.alpha = alpha;
    m.K = 50.0;
    m.market = BasketMarket{0.25, 0.15, 0.015, 0.022, -0.65};
    m.xva = XvaParams::with_default_funding(lambda_B, 0.07, 0.5, 0.3, 0.03);
    m.domain = {1.0, {Axis{"S1", 0.0, 4.0 * m.K}, Axis{"S2", 0.0, 4.0 * m.K}}};
    return m;
}

ModelSpec table4_heston(double lambda_B, int alpha) {
    ModelSpec m;
    m.kind = ModelKind::Heston;
    m.alpha = alpha;
    m.K = 1.0;
    m.market = HestonMarket{0.025, 1.5, 0.04, 0.3, -0.9};
    m.xva = XvaParams::with_default_funding(lambda_B, 0.04, 0.3, 0.3, 0.025);
    m.domain = {2.0, {Axis{"S", 0.0, 4.0 * m.K}, Axis{"nu", 0.0, 3.0}}};
    return m;
}

ModelSpec risk_free(ModelSpec spec) {
    spec.xva.lambda_B = 0.0;
    spec.xva.lambda_C = 0.0;
    spec.xva.s_F = 0.0;
    return spec;
}

double payoff(const ModelSpec& spec, std::span<const double> S) {
    double x = S[0];
    if (spec.kind == ModelKind::BasketAverage) x = 0.5 * (S[0] + S[1]);
    if (spec.kind == ModelKind::BasketWorstOf) x = std::min(S[0], S[1]);
    return std::max(spec.alpha * (x - spec.K), 0.0);
}

bool feller_check(const ModelSpec& spec) {
    if (spec.kind != ModelKind::Heston) throw ContractError("feller_check needs a Heston spec");
    const auto& h = spec.heston();
    return 2.0 * h.kappa * h.eta > h.sigma * h.sigma;
}

double dirichlet_value(const ModelSpec& spec, const RegionId& region, std::span<const double> point) {
    if (region.kind != RegionKind::Lower || spec.kind == ModelKind::Heston)
        throw ContractError("no Dirichlet condition on region of this model");
    const double t = point[0];
    const double zero[2] = {0.0, 0.0};
    if (spec.kind == ModelKind::BasketAverage) {
        // S_i = 0: payoff max(alpha(S_j/2 - K), 0) = max(alpha(S_j - 2K), 0) / 2
        const int j = 1 - region.axis;
        const auto& b = spec.basket();
        const BsParams p{spec.alpha, 2.0 * spec.K, j == 0 ? b.sigma1 : b.sigma2, spec.xva.r,
                         j == 0 ? b.r_R1 : b.r_R2};
        return 0.5 * risky_bs_price(t, point[1 + j], p, spec.xva);
    }
    // Bs1d at S = 0 and worst-of on either face: payoff frozen at H(0).
    const double h0 = payoff(spec, std::span<const double>(zero, spec.space_dim()));
    return h0 * std::exp(-(spec.xva.r + spec.xva.positive_slope()) * t);
}

const ResidualOperator& RegionResidualSet::at(const RegionId& id) const {
    for (const auto& op : ops_)
        if (op.region() == id) return op;
    throw ContractError("unknown region id");
}

RegionResidualSet residuals(const ModelSpec& spec, BoundaryMode mode) {
    spec.validate();
    auto shared = std::make_shared<const ModelSpec>(spec);
    std::vector<ResidualOperator> ops;
    ops.emplace_back(shared, RegionId::interior(), mode);
    const int d = spec.space_dim();
    for (int k = 0; k < d; ++k) ops.emplace_back(shared, RegionId::lower(k), mode);
    for (int k = 0; k < d; ++k) ops.emplace_back(shared, RegionId::upper(k), mode);
    ops.emplace_back(shared, RegionId::initial(), mode);
    return RegionResidualSet(std::move(ops));
}

}  // namespace xvapinn
