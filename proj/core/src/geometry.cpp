#include "xvapinn/geometry.hpp"

#include <cmath>
#include <ostream>

#include "xvapinn/errors.hpp"

namespace xvapinn {

void DomainBox::validate() const {
    if (!(T > 0.0)) throw ContractError("domain: maturity T must be positive");
    if (axes.empty() || static_cast<int>(axes.size()) > 2)
        throw ContractError("domain: 1 or 2 space axes supported");
    for (const auto& a : axes)
        if (!(a.max > a.min)) throw ContractError("domain: axis '" + a.name + "' has min >= max");
}

std::string region_name(const RegionId& id, const DomainBox& domain) {
    switch (id.kind) {
        case RegionKind::Interior: return "interior";
        case RegionKind::Initial: return "initial";
        case RegionKind::Lower: return "lower_" + domain.axes.at(id.axis).name;
        case RegionKind::Upper: return "upper_" + domain.axes.at(id.axis).name;
    }
    return "unknown";
}

Eigen::Index CollocationSet::total_points() const {
    Eigen::Index n = 0;
    for (const auto& r : regions) n += r.size();
    return n;
}

const Region& CollocationSet::region(const RegionId& id) const {
    for (const auto& r : regions)
        if (r.id == id) return r;
    throw ContractError("collocation set has no such region");
}

Eigen::MatrixXd CollocationSet::stacked_points() const {
    Eigen::MatrixXd all(domain.space_dim() + 1, total_points());
    Eigen::Index col = 0;
    for (const auto& r : regions) {
        all.middleCols(col, r.size()) = r.points;
        col += r.size();
    }
    return all;
}

std::vector<double> trapezoid_weights(std::span<const double> samples) {
    if (samples.size() < 2) throw ContractError("trapezoid_weights: need at least two samples");
    std::vector<double> w(samples.size(), 0.0);
    for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
        const double h = samples[i + 1] - samples[i];
        if (!(h > 0.0)) throw ContractError("trapezoid_weights: samples must increase");
        w[i] += 0.5 * h;
        w[i + 1] += 0.5 * h;
    }
    return w;
}

double region_volume(const DomainBox& domain, const RegionId& id) {
    double v = id.kind == RegionKind::Initial ? 1.0 : domain.T;
    for (int k = 0; k < domain.space_dim(); ++k) {
        const bool fixed = (id.kind == RegionKind::Lower || id.kind == RegionKind::Upper) && id.axis == k;
        if (!fixed) v *= domain.axes[k].max - domain.axes[k].min;
    }
    return v;
}

namespace {

struct IndexRange {
    int lo;
    int hi;  // inclusive
    bool free;  // false for the pinned axis of a face or the time axis of the initial slice
};

// Quadrature factors along one axis for nodes lo..hi of a uniform grid with step h.
std::vector<double> axis_weights(const IndexRange& r, double h) {
    if (!r.free) return {1.0};
    const int n = r.hi - r.lo + 1;
    if (n == 1) return {h};
    std::vector<double> x(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = (r.lo + i) * h;
    return trapezoid_weights(x);
}

Region make_region(const DomainBox& domain, const std::vector<int>& steps, const RegionId& id,
                   const std::vector<IndexRange>& ranges) {
    const int dim = static_cast<int>(ranges.size());  // d + 1
    std::vector<double> h(static_cast<std::size_t>(dim));
    h[0] = domain.T / steps[0];
    for (int k = 1; k < dim; ++k)
        h[k] = (domain.axes[k - 1].max - domain.axes[k - 1].min) / steps[k];

    std::vector<std::vector<double>> w(static_cast<std::size_t>(dim));
    Eigen::Index count = 1;
    for (int k = 0; k < dim; ++k) {
        w[k] = axis_weights(ranges[k], h[k]);
        count *= ranges[k].hi - ranges[k].lo + 1;
    }

    Region region;
    region.id = id;
    region.name = region_name(id, domain);
    region.points.resize(dim, count);
    region.weights.resize(count);
    region.volume = region_volume(domain, id);

    // Time-major, then space axes in order, last axis fastest.
    std::vector<int> idx(static_cast<std::size_t>(dim));
    for (int k = 0; k < dim; ++k) idx[k] = ranges[k].lo;
    for (Eigen::Index c = 0; c < count; ++c) {
        double weight = 1.0;
        for (int k = 0; k < dim; ++k) {
            const double origin = k == 0 ? 0.0 : domain.axes[k - 1].min;
            const double end = k == 0 ? domain.T : domain.axes[k - 1].max;
            region.points(k, c) = idx[k] == steps[k] ? end : origin + idx[k] * h[k];
            weight *= w[k][static_cast<std::size_t>(ranges[k].free ? idx[k] - ranges[k].lo : 0)];
        }
        region.weights(c) = weight;
        for (int k = dim - 1; k >= 0; --k) {
            if (++idx[k] <= ranges[k].hi) break;
            idx[k] = ranges[k].lo;
        }
    }
    region.hull_measure = region.weights.sum();
    return region;
}

void check_steps(std::span<const int> steps) {
    for (int s : steps)
        if (s < 2) throw ContractError("grid step counts must be >= 2");
}

}  // namespace

CollocationSet build_grid_1d(const DomainBox& domain, int n_t, int n_s) {
    domain.validate();
    if (domain.space_dim() != 1) throw ContractError("build_grid_1d needs a 1D domain");
    const std::vector<int> steps{n_t, n_s};
    check_steps(steps);

    CollocationSet set{domain, steps, {}};
    auto add = [&](RegionId id, std::vector<IndexRange> r) {
        set.regions.push_back(make_region(domain, steps, id, r));
    };
    add(RegionId::interior(), {{1, n_t, true}, {1, n_s - 1, true}});
    add(RegionId::lower(0), {{1, n_t, true}, {0, 0, false}});
    add(RegionId::upper(0), {{1, n_t, true}, {n_s, n_s, false}});
    add(RegionId::initial(), {{0, 0, false}, {0, n_s, true}});
    return set;
}

CollocationSet build_grid_2d(const DomainBox& domain, int n_t, int n_1, int n_2) {
    domain.validate();
    if (domain.space_dim() != 2) throw ContractError("build_grid_2d needs a 2D domain");
    const std::vector<int> steps{n_t, n_1, n_2};
    check_steps(steps);

    CollocationSet set{domain, steps, {}};
    auto add = [&](RegionId id, std::vector<IndexRange> r) {
        set.regions.push_back(make_region(domain, steps, id, r));
    };
    add(RegionId::interior(), {{1, n_t, true}, {1, n_1 - 1, true}, {1, n_2 - 1, true}});
    add(RegionId::lower(0), {{1, n_t, true}, {0, 0, false}, {0, n_2, true}});
    add(RegionId::lower(1), {{1, n_t, true}, {1, n_1, true}, {0, 0, false}});
    add(RegionId::upper(0), {{1, n_t, true}, {n_1, n_1, false}, {1, n_2 - 1, true}});
    add(RegionId::upper(1), {{1, n_t, true}, {1, n_1, true}, {n_2, n_2, false}});
    add(RegionId::initial(), {{0, 0, false}, {0, n_1, true}, {0, n_2, true}});
    return set;
}

CollocationSet build_grid(const DomainBox& domain, std::span<const int> steps) {
    if (domain.space_dim() == 1 && steps.size() == 2) return build_grid_1d(domain, steps[0], steps[1]);
    if (domain.space_dim() == 2 && steps.size() == 3)
        return build_grid_2d(domain, steps[0], steps[1], steps[2]);
    throw ContractError("build_grid: step count does not match domain dimension");
}

void write_grid_csv(const CollocationSet& grid, std::ostream& out) {
    out << "region,t";
    for (const auto& a : grid.domain.axes) out << ',' << a.name;
    out << ",weight\n";
    out.precision(17);
    for (const auto& r : grid.regions)
        for (Eigen::Index c = 0; c < r.size(); ++c) {
            out << r.name;
            for (Eigen::Index k = 0; k < r.points.rows(); ++k) out << ',' << r.points(k, c);
            out << ',' << r.weights(c) << '\n';
        }
}

}  // namespace xvapinn
