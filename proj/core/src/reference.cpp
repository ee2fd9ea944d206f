#include "xvapinn/reference.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "xvapinn/errors.hpp"

namespace xvapinn {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

void BsParams::validate() const {
    if (alpha != 1 && alpha != -1) throw ContractError("alpha must be +1 or -1");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ContractError("sigma must be > 0");
    if (!(K > 0.0)) throw ContractError("K must be > 0");
}

BsParams bs_params(const ModelSpec& spec) {
    if (spec.kind != ModelKind::Bs1d) throw ContractError("closed-form prices need a Bs1d spec");
    return {spec.alpha, spec.K, spec.bs().sigma, spec.xva.r, spec.bs().r_R};
}

BsGreeks bs_greeks(double t, double S, const BsParams& p) {
    p.validate();
    if (!(t >= 0.0)) throw ContractError("time to maturity must be >= 0");
    const double a = p.alpha;
    const double q = p.r - p.r_R;
    BsGreeks g;
    if (t == 0.0) {
        g.price = std::max(a * (S - p.K), 0.0);
        g.delta = a * (S - p.K) > 0.0 ? a : 0.0;
        return g;
    }
    if (S <= 0.0) {
        if (p.alpha == -1) {
            g.price = p.K * std::exp(-p.r * t);
            g.delta = -std::exp(-q * t);
            g.theta = -p.r * g.price;
        }
        return g;
    }
    const double sq = p.sigma * std::sqrt(t);
    const double z1 = (std::log(S / p.K) + (p.r_R + 0.5 * p.sigma * p.sigma) * t) / sq;
    const double z2 = z1 - sq;
    const double dq = std::exp(-q * t);
    const double dr = std::exp(-p.r * t);
    const double N1 = normal_cdf(a * z1);
    const double N2 = normal_cdf(a * z2);
    g.price = a * S * dq * N1 - a * p.K * dr * N2;
    g.delta = a * dq * N1;
    g.gamma = dq * normal_pdf(z1) / (S * sq);
    g.theta = -q * a * S * dq * N1 + p.r * a * p.K * dr * N2 +
              S * dq * normal_pdf(z1) * p.sigma / (2.0 * std::sqrt(t));
    return g;
}

double bs_price(double t, double S, const BsParams& p) { return bs_greeks(t, S, p).price; }

double risky_factor(double t, const XvaParams& xva) { return std::exp(-xva.positive_slope() * t); }

BsGreeks risky_bs_greeks(double t, double S, const BsParams& p, const XvaParams& xva) {
    const BsGreeks g = bs_greeks(t, S, p);
    const double F = risky_factor(t, xva);
    return {g.price * F, g.delta * F, g.gamma * F, (g.theta - xva.positive_slope() * g.price) * F};
}

double risky_bs_price(double t, double S, const BsParams& p, const XvaParams& xva) {
    return risky_bs_greeks(t, S, p, xva).price;
}

double bs_price(double t, double S, const ModelSpec& spec) { return bs_price(t, S, bs_params(spec)); }

double risky_bs_price(double t, double S, const ModelSpec& spec) {
    return risky_bs_price(t, S, bs_params(spec), spec.xva);
}

BsGreeks risky_bs_greeks(double t, double S, const ModelSpec& spec) {
    return risky_bs_greeks(t, S, bs_params(spec), spec.xva);
}

Jet2 risky_bs_jet(const ModelSpec& spec, std::span<const double> point) {
    const BsGreeks g = risky_bs_greeks(point[0], point[1], spec);
    Jet2 u;
    u.space_dim = 1;
    u.value = g.price;
    u.d_t = g.theta;
    u.d_x[0] = g.delta;
    u.d_xx[0][0] = g.gamma;
    return u;
}

// ---------------------------------------------------------------------------
// SolutionSurface

std::size_t SolutionSurface::slice_size() const {
    std::size_t n = 1;
    for (const auto& a : axes) n *= a.size();
    return n;
}

double SolutionSurface::at(std::size_t n, std::size_t j, std::size_t k) const {
    if (space_dim() == 1) return values[n * axes[0].size() + j];
    return values[(n * axes[0].size() + j) * axes[1].size() + k];
}

namespace {

// Bracketing cell and weight of x on a sorted grid, clamped to the ends.
std::pair<std::size_t, double> locate(const std::vector<double>& g, double x) {
    if (g.size() == 1 || x <= g.front()) return {0, 0.0};
    if (x >= g.back()) return {g.size() - 2, 1.0};
    const auto it = std::upper_bound(g.begin(), g.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - g.begin()) - 1;
    return {i, (x - g[i]) / (g[i + 1] - g[i])};
}

}  // namespace

double SolutionSurface::interpolate(std::span<const double> point) const {
    const auto [n, wt] = locate(t, point[0]);
    const std::size_t n1 = std::min(n + 1, t.size() - 1);
    const auto [j, w1] = locate(axes[0], point[1]);
    const std::size_t j1 = std::min(j + 1, axes[0].size() - 1);
    if (space_dim() == 1) {
        auto slice = [&](std::size_t m) { return (1 - w1) * at(m, j) + w1 * at(m, j1); };
        return (1 - wt) * slice(n) + wt * slice(n1);
    }
    const auto [k, w2] = locate(axes[1], point[2]);
    const std::size_t k1 = std::min(k + 1, axes[1].size() - 1);
    auto slice = [&](std::size_t m) {
        return (1 - w1) * ((1 - w2) * at(m, j, k) + w2 * at(m, j, k1)) +
               w1 * ((1 - w2) * at(m, j1, k) + w2 * at(m, j1, k1));
    };
    return (1 - wt) * slice(n) + wt * slice(n1);
}

void SolutionSurface::validate() const {
    if (t.empty() || axes.empty() || axes.size() > 2)
        throw SchemaError("surface needs a time grid and one or two space grids");
    if (axis_names.size() != axes.size()) throw SchemaError("surface axis names do not match axes");
    if (values.size() != t.size() * slice_size())
        throw SchemaError("surface values do not match the grid shape");
    for (double v : values)
        if (!std::isfinite(v)) throw SchemaError("surface holds non-finite values");
}

void write_surface(const SolutionSurface& s, const std::filesystem::path& base) {
    s.validate();
    auto csv_path = base;
    csv_path += ".csv";
    std::ofstream csv(csv_path);
    if (!csv) throw IoError("cannot write " + csv_path.string());
    csv.precision(17);
    csv << "t";
    for (const auto& n : s.axis_names) csv << ',' << n;
    csv << ",value\n";
    for (std::size_t n = 0; n < s.t.size(); ++n)
        for (std::size_t j = 0; j < s.axes[0].size(); ++j) {
            if (s.space_dim() == 1) {
                csv << s.t[n] << ',' << s.axes[0][j] << ',' << s.at(n, j) << '\n';
                continue;
            }
            for (std::size_t k = 0; k < s.axes[1].size(); ++k)
                csv << s.t[n] << ',' << s.axes[0][j] << ',' << s.axes[1][k] << ','
                    << s.at(n, j, k) << '\n';
        }

    nlohmann::json meta = {
        {"model", s.model},
        {"scheme", s.scheme},
        {"axis_names", s.axis_names},
        {"t", s.t},
        {"axes", s.axes},
        {"max_fixed_point_iterations", s.max_fixed_point_iterations},
        {"converged", s.converged},
        {"fixed_point_tol", s.fixed_point_tol},
    };
    auto json_path = base;
    json_path += ".json";
    std::ofstream js(json_path);
    if (!js) throw IoError("cannot write " + json_path.string());
    js << meta.dump(2) << '\n';
}

SolutionSurface read_surface(const std::filesystem::path& base) {
    auto json_path = base;
    json_path += ".json";
    std::ifstream js(json_path);
    if (!js) throw IoError("cannot read " + json_path.string());
    SolutionSurface s;
    try {
        const auto meta = nlohmann::json::parse(js);
        s.model = meta.at("model").get<std::string>();
        s.scheme = meta.at("scheme").get<std::string>();
        s.axis_names = meta.at("axis_names").get<std::vector<std::string>>();
        s.t = meta.at("t").get<std::vector<double>>();
        s.axes = meta.at("axes").get<std::vector<std::vector<double>>>();
        s.max_fixed_point_iterations = meta.at("max_fixed_point_iterations").get<int>();
        s.converged = meta.at("converged").get<bool>();
        s.fixed_point_tol = meta.at("fixed_point_tol").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("surface metadata " + json_path.string() + ": " + e.what());
    }

    auto csv_path = base;
    csv_path += ".csv";
    std::ifstream csv(csv_path);
    if (!csv) throw IoError("cannot read " + csv_path.string());
    std::string line;
    std::getline(csv, line);  // header
    const std::size_t cols = s.axes.size() + 2;
    while (std::getline(csv, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::size_t c = 0;
        double last = 0.0;
        while (std::getline(ss, cell, ',')) {
            last = std::stod(cell);
            ++c;
        }
        if (c != cols) throw SchemaError("surface row with " + std::to_string(c) + " columns");
        s.values.push_back(last);
    }
    s.validate();
    return s;
}

}  // namespace xvapinn
