#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "xvapinn/autodiff.hpp"
#include "xvapinn/geometry.hpp"
#include "xvapinn/models.hpp"
#include "xvapinn/network.hpp"

namespace xvapinn {

struct LossOptions {
    BoundaryMode mode = BoundaryMode::PdeBoundary;
    /// Per-region multipliers in grid region order; empty means all 1.
    std::vector<double> region_weights;
};

/// Per-region terms (lambda / |region|) sum_i w_i R_i^2 and their sum.
struct LossBreakdown {
    std::vector<std::string> names;
    std::vector<double> terms;
    double total = 0.0;

    /// Throws ContractError for an unknown name.
    double term(std::string_view name) const;
};

/// Loss of one model on one collocation grid. Holds the jet buffers, so an
/// instance must not be shared between threads.
class LossFunction {
public:
    LossFunction(const ModelSpec& spec, CollocationSet grid, LossOptions options = {});

    LossBreakdown assemble(const NetworkParams& params);
    /// Same value as assemble(), bit for bit, plus the parameter gradient.
    LossBreakdown assemble_with_gradient(const NetworkParams& params, ParamGradient& gradient);

    const CollocationSet& grid() const noexcept { return grid_; }
    const RegionResidualSet& residuals() const noexcept { return residuals_; }
    const LossOptions& options() const noexcept { return options_; }

private:
    LossBreakdown evaluate(const NetworkParams& params, ParamGradient* gradient);

    CollocationSet grid_;
    RegionResidualSet residuals_;
    LossOptions options_;
    Eigen::MatrixXd points_;  // all regions stacked
    JetEngine engine_;
};

LossBreakdown assemble(const ModelSpec& spec, const NetworkParams& params, const CollocationSet& grid,
                       const LossOptions& options = {});

struct LossWithGradient {
    LossBreakdown loss;
    ParamGradient gradient;
};

LossWithGradient assemble_with_gradient(const ModelSpec& spec, const NetworkParams& params,
                                        const CollocationSet& grid, const LossOptions& options = {});

/// Any scalar field given through its jet at a space-time point.
using JetField = std::function<Jet2(std::span<const double> point)>;

/// The loss of an arbitrary field, e.g. a closed-form solution.
LossBreakdown assemble_field(const RegionResidualSet& residuals, const CollocationSet& grid,
                             const JetField& field, const std::vector<double>& region_weights = {});

struct TrajectoryRow {
    long step = 0;
    LossBreakdown loss;
    double lr = 0.0;  // 0 in the L-BFGS stage
};

/// step,total,<region names...>,lr
void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryRow>& rows);

}  // namespace xvapinn
