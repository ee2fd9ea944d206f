#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "xvapinn/geometry.hpp"
#include "xvapinn/jet.hpp"
#include "xvapinn/tape.hpp"

namespace xvapinn {

/// Default intensities, recoveries and funding spread of the seller (B) and
/// counterparty (C), plus the risk-free rate r. Rates are per year.
struct XvaParams {
    double lambda_B = 0.0;
    double lambda_C = 0.0;
    double R_B = 0.0;
    double R_C = 0.0;
    double s_F = 0.0;
    double r = 0.0;

    /// Uncollateralised funding: s_F = (1 - R_B) lambda_B.
    static XvaParams with_default_funding(double lambda_B, double lambda_C, double R_B,
                                          double R_C, double r);

    /// Slope of the source term for positive values, lambda_C (1 - R_C) + s_F.
    double positive_slope() const { return lambda_C * (1.0 - R_C) + s_F; }
    /// Slope of the source term for negative values, lambda_B (1 - R_B).
    double negative_slope() const { return lambda_B * (1.0 - R_B); }

    void validate() const;
};

/// f(v) = lambda_B (1-R_B) min(v,0) + lambda_C (1-R_C) max(v,0) + s_F max(v,0).
template <class T>
T source_term(const T& v, const XvaParams& x) {
    using ad::max;
    using ad::min;
    return x.lambda_B * (1.0 - x.R_B) * min(v, T(0.0)) + x.lambda_C * (1.0 - x.R_C) * max(v, T(0.0)) +
           x.s_F * max(v, T(0.0));
}

enum class ModelKind { Bs1d, BasketAverage, BasketWorstOf, Heston };

std::string_view to_string(ModelKind k);
ModelKind model_kind_from_string(std::string_view name);

struct Bs1dMarket {
    double sigma = 0.2;
    double r_R = 0.0;  // repo rate minus dividend yield
};

struct BasketMarket {
    double sigma1 = 0.2;
    double sigma2 = 0.2;
    double r_R1 = 0.0;
    double r_R2 = 0.0;
    double rho = 0.0;
};

struct HestonMarket {
    double r_R = 0.0;
    double kappa = 1.0;  // mean reversion
    double eta = 0.04;   // long-run variance
    double sigma = 0.3;  // volatility of variance
    double rho = 0.0;
};

using Market = std::variant<Bs1dMarket, BasketMarket, HestonMarket>;

struct ModelSpec {
    ModelKind kind = ModelKind::Bs1d;
    int alpha = -1;  // -1 put, +1 call
    double K = 1.0;
    Market market = Bs1dMarket{};
    XvaParams xva;
    DomainBox domain;
    /// Heston only: replace the printed upper-variance residual by the interior
    /// operator without the d/dnu and d2/dSdnu terms.
    bool heston_strict_neumann = false;

    int space_dim() const { return kind == ModelKind::Bs1d ? 1 : 2; }
    const Bs1dMarket& bs() const { return std::get<Bs1dMarket>(market); }
    const BasketMarket& basket() const { return std::get<BasketMarket>(market); }
    const HestonMarket& heston() const { return std::get<HestonMarket>(market); }

    /// Throws ContractError if parameters are out of range or inconsistent with `kind`.
    void validate() const;
};

/// Parameter sets used throughout the experiments. S_max = 4K; nu_max = 3.
ModelSpec table1_bs1d(double lambda_B, int alpha = -1);
ModelSpec table3_basket(ModelKind kind, double lambda_B, int alpha = -1);
ModelSpec table4_heston(double lambda_B, int alpha = -1);

/// Copy of `spec` with lambda_B = lambda_C = s_F = 0.
ModelSpec risk_free(ModelSpec spec);

/// Option payoff at maturity for the underlying vector `S` (size = space_dim;
/// for Heston only S[0] is used).
double payoff(const ModelSpec& spec, std::span<const double> S);

/// True iff 2 kappa eta > sigma^2. Throws ContractError for non-Heston specs.
bool feller_check(const ModelSpec& spec);

enum class BoundaryMode {
    PdeBoundary,  // boundary residual = PDE restricted to the face with the condition substituted
    Classic,      // boundary residual = the Dirichlet / derivative condition itself
};

std::string_view to_string(BoundaryMode m);
BoundaryMode boundary_mode_from_string(std::string_view name);

/// Value prescribed on a Dirichlet face in classic mode. Point is (t, x...).
double dirichlet_value(const ModelSpec& spec, const RegionId& region,
                       std::span<const double> point);

namespace detail {

template <class T>
T bs1d_residual(const ModelSpec& m, const RegionId& id, BoundaryMode mode, const JetT<T>& u,
                std::span<const double> p) {
    const auto& mk = m.bs();
    const double S = p[1];
    const double r = m.xva.r;
    const T f = source_term(u.value, m.xva);
    switch (id.kind) {
        case RegionKind::Interior:
            return u.d_t - 0.5 * mk.sigma * mk.sigma * S * S * u.d_xx[0][0] - mk.r_R * S * u.d_x[0] +
                   r * u.value + f;
        case RegionKind::Lower:
            if (mode == BoundaryMode::Classic) return u.value - dirichlet_value(m, id, p);
            return u.d_t + r * u.value + f;
        case RegionKind::Upper:
            if (mode == BoundaryMode::Classic) return u.d_xx[0][0];
            return u.d_t - mk.r_R * S * u.d_x[0] + r * u.value + f;
        case RegionKind::Initial: break;
    }
    return u.value - payoff(m, p.subspan(1));
}

template <class T>
T basket_residual(const ModelSpec& m, const RegionId& id, BoundaryMode mode, const JetT<T>& u,
                  std::span<const double> p) {
    const auto& mk = m.basket();
    const double S[2] = {p[1], p[2]};
    const double sig[2] = {mk.sigma1, mk.sigma2};
    const double rR[2] = {mk.r_R1, mk.r_R2};
    const double r = m.xva.r;
    if (id.kind == RegionKind::Initial) return u.value - payoff(m, p.subspan(1));

    const T f = source_term(u.value, m.xva);
    const T cross = mk.rho * sig[0] * sig[1] * S[0] * S[1] * u.d_xx[0][1];
    auto diffusion = [&](int i) { return 0.5 * sig[i] * sig[i] * S[i] * S[i] * u.d_xx[i][i]; };
    auto drift = [&](int i) { return rR[i] * S[i] * u.d_x[i]; };

    switch (id.kind) {
        case RegionKind::Interior:
            return u.d_t - diffusion(0) - cross - diffusion(1) - drift(0) - drift(1) + r * u.value + f;
        case RegionKind::Lower: {
            if (mode == BoundaryMode::Classic) return u.value - dirichlet_value(m, id, p);
            const int j = 1 - id.axis;  // surviving asset
            return u.d_t - diffusion(j) - drift(j) + r * u.value + f;
        }
        case RegionKind::Upper: {
            const int i = id.axis, j = 1 - id.axis;
            if (mode == BoundaryMode::Classic) return u.d_xx[i][i];
            return u.d_t - cross - diffusion(j) - drift(i) - drift(j) + r * u.value + f;
        }
        case RegionKind::Initial: break;
    }
    return u.value - payoff(m, p.subspan(1));
}

template <class T>
T heston_residual(const ModelSpec& m, const RegionId& id, BoundaryMode mode, const JetT<T>& u,
                  std::span<const double> p) {
    const auto& h = m.heston();
    const double S = p[1], nu = p[2];
    const double r = m.xva.r;
    if (id.kind == RegionKind::Initial) return u.value - payoff(m, p.subspan(1));

    const T f = source_term(u.value, m.xva);
    const T diff_S = 0.5 * S * S * nu * u.d_xx[0][0];
    const T cross = h.rho * h.sigma * S * nu * u.d_xx[0][1];
    const T diff_nu = 0.5 * h.sigma * h.sigma * nu * u.d_xx[1][1];
    const T drift_S = h.r_R * S * u.d_x[0];
    const T drift_nu = h.kappa * (h.eta - nu) * u.d_x[1];

    switch (id.kind) {
        case RegionKind::Interior:
            return u.d_t - diff_S - cross - diff_nu - drift_S - drift_nu + r * u.value + f;
        case RegionKind::Lower:
            if (id.axis == 0)  // S = 0: every S-term vanishes
                return u.d_t - diff_nu - drift_nu + r * u.value + f;
            // nu = 0
            return u.d_t - drift_S - h.kappa * h.eta * u.d_x[1] + r * u.value + f;
        case RegionKind::Upper:
            if (id.axis == 0) {  // S = S_max, linearity in S
                if (mode == BoundaryMode::Classic) return u.d_xx[0][0];
                return u.d_t - cross - diff_nu - drift_S - drift_nu + r * u.value + f;
            }
            // nu = nu_max
            if (mode == BoundaryMode::Classic) return u.d_x[1];
            if (m.heston_strict_neumann) return u.d_t - diff_S - diff_nu - drift_S + r * u.value + f;
            return u.d_t - cross - diff_nu - drift_S - drift_nu + r * u.value + f;
        case RegionKind::Initial: break;
    }
    return u.value - payoff(m, p.subspan(1));
}

}  // namespace detail

/// Residual of the model's equation on one region, for any field given by its jet.
class ResidualOperator {
public:
    ResidualOperator(std::shared_ptr<const ModelSpec> spec, RegionId region, BoundaryMode mode)
        : spec_(std::move(spec)), region_(region), mode_(mode) {}

    const RegionId& region() const noexcept { return region_; }
    BoundaryMode mode() const noexcept { return mode_; }
    const ModelSpec& spec() const noexcept { return *spec_; }

    /// `point` is (t, x...).
    template <class T>
    T operator()(const JetT<T>& u, std::span<const double> point) const {
        switch (spec_->kind) {
            case ModelKind::Bs1d: return detail::bs1d_residual(*spec_, region_, mode_, u, point);
            case ModelKind::BasketAverage:
            case ModelKind::BasketWorstOf:
                return detail::basket_residual(*spec_, region_, mode_, u, point);
            case ModelKind::Heston: return detail::heston_residual(*spec_, region_, mode_, u, point);
        }
        return u.value;
    }

private:
    std::shared_ptr<const ModelSpec> spec_;
    RegionId region_;
    BoundaryMode mode_;
};

/// One operator per region of the model's collocation grid.
class RegionResidualSet {
public:
    explicit RegionResidualSet(std::vector<ResidualOperator> ops) : ops_(std::move(ops)) {}

    /// Throws ContractError for a region the model does not define.
    const ResidualOperator& at(const RegionId& id) const;
    const std::vector<ResidualOperator>& operators() const noexcept { return ops_; }

private:
    std::vector<ResidualOperator> ops_;
};

RegionResidualSet residuals(const ModelSpec& spec, BoundaryMode mode = BoundaryMode::PdeBoundary);

}  // namespace xvapinn
