#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace xvapinn {

/// Tensor-product evaluation grid with trapezoid weights. Points are
/// (d+1) x n, time in row 0, last axis fastest.
struct EvalGrid {
    std::vector<std::vector<double>> axes;  // axes[0] is time
    Eigen::MatrixXd points;
    Eigen::VectorXd weights;
    std::string description;

    Eigen::Index size() const { return points.cols(); }
};

/// n_intervals + 1 equispaced samples on [lo, hi], end points exact.
std::vector<double> linspace(double lo, double hi, int n_intervals);

/// Axes with a single sample get weight 1 along that axis.
EvalGrid tensor_grid(std::vector<std::vector<double>> axes);

struct ErrorReport {
    double rel_L1 = 0.0;
    double rel_L2 = 0.0;
    double rel_Linf = 0.0;
    double log10_L1 = 0.0;
    double log10_L2 = 0.0;
    double log10_Linf = 0.0;
    // discrete sums without quadrature weights
    double rel_L1_unweighted = 0.0;
    double rel_L2_unweighted = 0.0;
    double clamp_threshold = 0.01;
    double max_clamped_error = 0.0;
    std::size_t points = 0;
    std::string grid;

    /// Zero norms give -inf logs, written as null.
    std::string to_json() const;
};

/// log10 of a norm; -inf for 0.
double log10_norm(double v);

/// rel_Lp = ||a - r||_p / ||r||_p with weights w; Linf is max|a - r| / max|r|.
/// Throws ContractError on size mismatch or a zero reference.
ErrorReport relative_norms(std::span<const double> approx, std::span<const double> ref,
                           std::span<const double> weights, double clamp_threshold = 0.01);

/// |a - r| / |r| where |r| >= threshold, else |a - r| / threshold.
std::vector<double> clamped_error_map(std::span<const double> approx, std::span<const double> ref,
                                      double threshold = 0.01);

/// t,<axis names...>,ref,approx,rel_err,clamped_err
void write_error_csv(std::ostream& out, const Eigen::MatrixXd& points,
                     const std::vector<std::string>& axis_names, std::span<const double> ref,
                     std::span<const double> approx, double threshold = 0.01);

}  // namespace xvapinn
