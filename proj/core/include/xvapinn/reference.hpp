#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "xvapinn/jet.hpp"
#include "xvapinn/models.hpp"

namespace xvapinn {

/// Standard normal CDF and density.
double normal_cdf(double x);
double normal_pdf(double x);

/// One-asset Black-Scholes inputs; t below is always time to maturity.
struct BsParams {
    int alpha = -1;  // -1 put, +1 call
    double K = 1.0;
    double sigma = 0.2;
    double r = 0.0;
    double r_R = 0.0;

    void validate() const;
};

/// The parameters of a Bs1d spec (ContractError for other kinds).
BsParams bs_params(const ModelSpec& spec);

struct BsGreeks {
    double price = 0.0;
    double delta = 0.0;  // dV/dS
    double gamma = 0.0;  // d2V/dS2
    double theta = 0.0;  // dV/dt, t = time to maturity
};

/// alpha S e^{-(r-r_R)t} Phi(alpha z1) - alpha K e^{-rt} Phi(alpha z2).
/// t = 0 gives the payoff, S = 0 the discounted strike branch.
double bs_price(double t, double S, const BsParams& p);
BsGreeks bs_greeks(double t, double S, const BsParams& p);

/// exp(-(lambda_C (1-R_C) + s_F) t): the factor turning a positive risk-free
/// price into the risky one.
double risky_factor(double t, const XvaParams& xva);

double risky_bs_price(double t, double S, const BsParams& p, const XvaParams& xva);
BsGreeks risky_bs_greeks(double t, double S, const BsParams& p, const XvaParams& xva);

double bs_price(double t, double S, const ModelSpec& spec);
double risky_bs_price(double t, double S, const ModelSpec& spec);
BsGreeks risky_bs_greeks(double t, double S, const ModelSpec& spec);

/// Risky Black-Scholes solution of a Bs1d spec as a field jet at (t, S).
Jet2 risky_bs_jet(const ModelSpec& spec, std::span<const double> point);

/// Grid solution of a pricing problem. Values are stored time-major with the
/// last space axis fastest: index ((n * N1) + j) * N2 + k.
struct SolutionSurface {
    std::vector<double> t;                    // time to maturity, t[0] = 0
    std::vector<std::vector<double>> axes;    // one grid per space axis
    std::vector<std::string> axis_names;
    std::vector<double> values;

    // metadata
    std::string model;
    std::string scheme = "crank-nicolson";
    int max_fixed_point_iterations = 0;  // over all time steps
    bool converged = true;
    double fixed_point_tol = 0.0;

    int space_dim() const { return static_cast<int>(axes.size()); }
    std::size_t slice_size() const;
    double at(std::size_t n, std::size_t j, std::size_t k = 0) const;
    /// Multilinear interpolation at (t, x...). Points outside the grid are clamped.
    double interpolate(std::span<const double> point) const;
    void validate() const;
};

struct FdOptions {
    double fixed_point_tol = 1e-10;
    int max_iters = 50;
    /// Fully implicit half steps at the start, damping the payoff kink.
    int rannacher_steps = 4;
    /// Replaces the payoff as initial condition when set; argument is the space point.
    std::function<double(std::span<const double>)> initial;
};

SolutionSurface fd_solve_1d(const ModelSpec& spec, int n_s, int n_t, const FdOptions& opts = {});
SolutionSurface fd_solve_2d(const ModelSpec& spec, int n_1, int n_2, int n_t,
                            const FdOptions& opts = {});

/// Writes `<base>.csv` (t,axes...,value) and `<base>.json` (metadata).
void write_surface(const SolutionSurface& s, const std::filesystem::path& base);
SolutionSurface read_surface(const std::filesystem::path& base);

}  // namespace xvapinn
