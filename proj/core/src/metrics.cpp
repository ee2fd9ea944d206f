#include "xvapinn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <json.hpp>

#include "xvapinn/errors.hpp"
#include "xvapinn/geometry.hpp"

namespace xvapinn {

std::vector<double> linspace(double lo, double hi, int n_intervals) {
    if (n_intervals < 1) throw ContractError("linspace needs at least one interval");
    std::vector<double> g(n_intervals + 1);
    const double h = (hi - lo) / n_intervals;
    for (int i = 0; i <= n_intervals; ++i) g[i] = i == n_intervals ? hi : lo + i * h;
    return g;
}

EvalGrid tensor_grid(std::vector<std::vector<double>> axes) {
    if (axes.size() < 2 || axes.size() > 3) throw ContractError("tensor_grid needs time plus 1-2 axes");
    std::vector<std::vector<double>> w;
    Eigen::Index n = 1;
    for (const auto& a : axes) {
        if (a.empty()) throw ContractError("tensor_grid axis without samples");
        w.push_back(a.size() == 1 ? std::vector<double>{1.0} : trapezoid_weights(a));
        n *= static_cast<Eigen::Index>(a.size());
    }
    EvalGrid g;
    const int rows = static_cast<int>(axes.size());
    g.points.resize(rows, n);
    g.weights.resize(n);
    std::vector<std::size_t> idx(rows, 0);
    for (Eigen::Index c = 0; c < n; ++c) {
        double wt = 1.0;
        for (int r = 0; r < rows; ++r) {
            g.points(r, c) = axes[r][idx[r]];
            wt *= w[r][idx[r]];
        }
        g.weights(c) = wt;
        for (int r = rows - 1; r >= 0; --r) {
            if (++idx[r] < axes[r].size()) break;
            idx[r] = 0;
        }
    }
    g.description = "tensor";
    for (const auto& a : axes)
        g.description += " " + std::to_string(a.size()) + "[" + std::to_string(a.front()) + "," +
                         std::to_string(a.back()) + "]";
    g.axes = std::move(axes);
    return g;
}

double log10_norm(double v) {
    return v == 0.0 ? -std::numeric_limits<double>::infinity() : std::log10(v);
}

ErrorReport relative_norms(std::span<const double> approx, std::span<const double> ref,
                           std::span<const double> weights, double clamp_threshold) {
    if (approx.size() != ref.size() || weights.size() != ref.size())
        throw ContractError("relative_norms: fields and weights differ in size");
    double e1 = 0, r1 = 0, e2 = 0, r2 = 0, einf = 0, rinf = 0, u1 = 0, ur1 = 0, u2 = 0, ur2 = 0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        const double e = std::abs(approx[i] - ref[i]);
        const double r = std::abs(ref[i]);
        e1 += weights[i] * e;
        r1 += weights[i] * r;
        e2 += weights[i] * e * e;
        r2 += weights[i] * r * r;
        u1 += e;
        ur1 += r;
        u2 += e * e;
        ur2 += r * r;
        einf = std::max(einf, e);
        rinf = std::max(rinf, r);
    }
    if (r1 == 0.0 || r2 == 0.0 || rinf == 0.0) throw ContractError("relative_norms: zero reference norm");
    ErrorReport rep;
    rep.rel_L1 = e1 / r1;
    rep.rel_L2 = std::sqrt(e2 / r2);
    rep.rel_Linf = einf / rinf;
    rep.log10_L1 = log10_norm(rep.rel_L1);
    rep.log10_L2 = log10_norm(rep.rel_L2);
    rep.log10_Linf = log10_norm(rep.rel_Linf);
    rep.rel_L1_unweighted = u1 / ur1;
    rep.rel_L2_unweighted = std::sqrt(u2 / ur2);
    rep.clamp_threshold = clamp_threshold;
    const auto map = clamped_error_map(approx, ref, clamp_threshold);
    rep.max_clamped_error = map.empty() ? 0.0 : *std::max_element(map.begin(), map.end());
    rep.points = ref.size();
    return rep;
}

std::vector<double> clamped_error_map(std::span<const double> approx, std::span<const double> ref,
                                      double threshold) {
    if (approx.size() != ref.size()) throw ContractError("clamped_error_map: fields differ in size");
    if (!(threshold > 0.0)) throw ContractError("clamp threshold must be > 0");
    std::vector<double> out(ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) {
        const double r = std::abs(ref[i]);
        out[i] = std::abs(approx[i] - ref[i]) / (r >= threshold ? r : threshold);
    }
    return out;
}

std::string ErrorReport::to_json() const {
    auto num = [](double v) -> nlohmann::json {
        if (std::isfinite(v)) return v;
        return nullptr;
    };
    nlohmann::json j = {
        {"rel_L1", rel_L1},
        {"rel_L2", rel_L2},
        {"rel_Linf", rel_Linf},
        {"log10_L1", num(log10_L1)},
        {"log10_L2", num(log10_L2)},
        {"log10_Linf", num(log10_Linf)},
        {"rel_L1_unweighted", rel_L1_unweighted},
        {"rel_L2_unweighted", rel_L2_unweighted},
        {"clamp_threshold", clamp_threshold},
        {"max_clamped_error", max_clamped_error},
        {"points", points},
        {"grid", grid},
    };
    return j.dump(2);
}

void write_error_csv(std::ostream& out, const Eigen::MatrixXd& points,
                     const std::vector<std::string>& axis_names, std::span<const double> ref,
                     std::span<const double> approx, double threshold) {
    if (static_cast<std::size_t>(points.cols()) != ref.size() || ref.size() != approx.size() ||
        static_cast<std::size_t>(points.rows()) != axis_names.size() + 1)
        throw ContractError("write_error_csv: shapes disagree");
    const auto clamped = clamped_error_map(approx, ref, threshold);
    out.precision(12);
    out << "t";
    for (const auto& n : axis_names) out << ',' << n;
    out << ",ref,approx,rel_err,clamped_err\n";
    for (Eigen::Index c = 0; c < points.cols(); ++c) {
        for (Eigen::Index r = 0; r < points.rows(); ++r) out << (r ? "," : "") << points(r, c);
        const double e = std::abs(approx[c] - ref[c]);
        const double rel = ref[c] != 0.0 ? e / std::abs(ref[c])
                                         : (e == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
        out << ',' << ref[c] << ',' << approx[c] << ',' << rel << ',' << clamped[c] << '\n';
    }
}

}  // namespace xvapinn
