#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace xvapinn {

struct Axis {
    std::string name;
    double min = 0.0;
    double max = 1.0;
};

/// Space-time box [0, T] x prod_k [min_k, max_k].
struct DomainBox {
    double T = 1.0;
    std::vector<Axis> axes;

    int space_dim() const { return static_cast<int>(axes.size()); }
    void validate() const;
};

enum class RegionKind { Interior, Lower, Upper, Initial };

/// Interior, a boundary face (Lower/Upper of space axis `axis`) or the t = 0 slice.
struct RegionId {
    RegionKind kind = RegionKind::Interior;
    int axis = -1;

    static RegionId interior() { return {RegionKind::Interior, -1}; }
    static RegionId initial() { return {RegionKind::Initial, -1}; }
    static RegionId lower(int axis) { return {RegionKind::Lower, axis}; }
    static RegionId upper(int axis) { return {RegionKind::Upper, axis}; }

    bool operator==(const RegionId&) const = default;
};

/// "interior", "initial", "lower_<axis>", "upper_<axis>".
std::string region_name(const RegionId& id, const DomainBox& domain);

struct Region {
    RegionId id;
    std::string name;
    Eigen::MatrixXd points;   // (d+1) x n, time in row 0
    Eigen::VectorXd weights;  // trapezoid weights over the region's own nodes
    double volume = 0.0;      // loss normaliser |region|
    double hull_measure = 0.0;  // measure of the box spanned by the nodes; equals sum(weights)

    Eigen::Index size() const { return points.cols(); }
};

/// Uniform collocation grid split into disjoint regions.
struct CollocationSet {
    DomainBox domain;
    std::vector<int> steps;  // {N_T, N_1, ...}
    std::vector<Region> regions;

    Eigen::Index total_points() const;
    const Region& region(const RegionId& id) const;
    /// All points stacked region by region, in `regions` order.
    Eigen::MatrixXd stacked_points() const;
};

/// Composite trapezoid weights, (h/2, h, ..., h, h/2) for uniform samples.
/// Needs at least two increasing samples.
std::vector<double> trapezoid_weights(std::span<const double> samples);

/// Normaliser of a region: time extent times the extents of its free space axes.
double region_volume(const DomainBox& domain, const RegionId& id);

/// 1D grid: interior (t_i, S_j) i=1..N_T j=1..N_S-1, faces at S=min and S=max for
/// i=1..N_T, initial slice j=0..N_S.
CollocationSet build_grid_1d(const DomainBox& domain, int n_t, int n_s);

/// 2D grid with the face index ranges
///   lower_0: i=1..N_T, j=0,      k=0..N_2
///   lower_1: i=1..N_T, j=1..N_1, k=0
///   upper_0: i=1..N_T, j=N_1,    k=1..N_2-1
///   upper_1: i=1..N_T, j=1..N_1, k=N_2
/// so the six regions are disjoint and cover (N_T+1)(N_1+1)(N_2+1) nodes.
CollocationSet build_grid_2d(const DomainBox& domain, int n_t, int n_1, int n_2);

/// Dispatches on domain.space_dim(); `steps` = {N_T, N_1[, N_2]}.
CollocationSet build_grid(const DomainBox& domain, std::span<const int> steps);

/// Debug export: region,t,<axes...>,weight
void write_grid_csv(const CollocationSet& grid, std::ostream& out);

}  // namespace xvapinn
