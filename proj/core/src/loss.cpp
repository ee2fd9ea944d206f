#include "xvapinn/loss.hpp"

#include <cmath>
#include <ostream>

#include "xvapinn/errors.hpp"

namespace xvapinn {

namespace {

std::vector<double> region_multipliers(const CollocationSet& grid, const std::vector<double>& w) {
    if (w.empty()) return std::vector<double>(grid.regions.size(), 1.0);
    if (w.size() != grid.regions.size())
        throw ContractError("region weights: expected " + std::to_string(grid.regions.size()) +
                            " values, got " + std::to_string(w.size()));
    for (double v : w)
        if (!(v >= 0.0) || !std::isfinite(v)) throw ContractError("region weights must be finite and >= 0");
    return w;
}

void check_regions(const RegionResidualSet& residuals, const CollocationSet& grid) {
    if (residuals.operators().size() != grid.regions.size())
        throw ContractError("grid regions do not match the model's residual regions");
    for (const auto& r : grid.regions) residuals.at(r.id);
}

[[noreturn]] void non_finite(const Region& region, Eigen::Index i) {
    throw NumericError("non-finite residual", region.name, static_cast<std::ptrdiff_t>(i));
}

ad::Var leaf(ad::Tape& tape, double v) { return tape.variable(v); }

}  // namespace

double LossBreakdown::term(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return terms[i];
    throw ContractError("no loss term '" + std::string(name) + "'");
}

LossFunction::LossFunction(const ModelSpec& spec, CollocationSet grid, LossOptions options)
    : grid_(std::move(grid)), residuals_(xvapinn::residuals(spec, options.mode)), options_(std::move(options)) {
    check_regions(residuals_, grid_);
    options_.region_weights = region_multipliers(grid_, options_.region_weights);
    points_ = grid_.stacked_points();
}

LossBreakdown LossFunction::assemble(const NetworkParams& params) { return evaluate(params, nullptr); }

LossBreakdown LossFunction::assemble_with_gradient(const NetworkParams& params, ParamGradient& gradient) {
    return evaluate(params, &gradient);
}

LossBreakdown LossFunction::evaluate(const NetworkParams& params, ParamGradient* gradient) {
    const int rows = static_cast<int>(points_.rows());
    if (params.architecture().input_dim() != rows)
        throw ContractError("network input dimension does not match the grid");
    const JetBatch& jets = engine_.forward(params, points_);
    const int d = jets.space_dim();

    LossBreakdown out;
    JetBatch bar;
    if (gradient) bar = JetBatch(d, jets.size());
    ad::Tape tape;
    tape.reserve(64);

    Eigen::Index col = 0;
    for (std::size_t r = 0; r < grid_.regions.size(); ++r) {
        const Region& region = grid_.regions[r];
        const ResidualOperator& op = residuals_.at(region.id);
        const double scale = region.size() ? options_.region_weights[r] / region.volume : 0.0;
        double acc = 0.0;
        for (Eigen::Index i = 0; i < region.size(); ++i, ++col) {
            const std::span<const double> point(points_.col(col).data(), static_cast<std::size_t>(rows));
            const double w = region.weights(i);
            if (!gradient) {
                const double R = op(jets.at(col), point);
                if (!std::isfinite(R)) non_finite(region, i);
                acc += w * R * R;
                continue;
            }
            tape.clear();
            JetT<ad::Var> u;
            u.space_dim = d;
            u.value = leaf(tape, jets(0, col));
            u.d_t = leaf(tape, jets(JetBatch::first_channel(0), col));
            for (int k = 0; k < d; ++k) {
                u.d_x[k] = leaf(tape, jets(JetBatch::first_channel(k + 1), col));
                for (int m = k; m < d; ++m)
                    u.set_d_xx(k, m, leaf(tape, jets(JetBatch::second_channel(d, k, m), col)));
            }
            const ad::Var R = op(u, point);
            if (!std::isfinite(R.value())) non_finite(region, i);
            acc += w * R.value() * R.value();
            const ad::Adjoints adj = tape.gradient(R);
            const double dR = 2.0 * scale * w * R.value();
            bar(0, col) = dR * adj[u.value];
            bar(JetBatch::first_channel(0), col) = dR * adj[u.d_t];
            for (int k = 0; k < d; ++k) {
                bar(JetBatch::first_channel(k + 1), col) = dR * adj[u.d_x[k]];
                for (int m = k; m < d; ++m)
                    bar(JetBatch::second_channel(d, k, m), col) = dR * adj[u.d_xx[k][m]];
            }
        }
        const double term = scale * acc;
        out.names.push_back(region.name);
        out.terms.push_back(term);
        out.total += term;
    }
    if (!std::isfinite(out.total)) throw NumericError("non-finite loss");
    if (gradient) *gradient = engine_.backward(bar);
    return out;
}

LossBreakdown assemble(const ModelSpec& spec, const NetworkParams& params, const CollocationSet& grid,
                       const LossOptions& options) {
    LossFunction f(spec, grid, options);
    return f.assemble(params);
}

LossWithGradient assemble_with_gradient(const ModelSpec& spec, const NetworkParams& params,
                                        const CollocationSet& grid, const LossOptions& options) {
    LossFunction f(spec, grid, options);
    LossWithGradient out;
    out.loss = f.assemble_with_gradient(params, out.gradient);
    return out;
}

LossBreakdown assemble_field(const RegionResidualSet& residuals, const CollocationSet& grid,
                             const JetField& field, const std::vector<double>& region_weights) {
    check_regions(residuals, grid);
    const auto lambda = region_multipliers(grid, region_weights);
    LossBreakdown out;
    for (std::size_t r = 0; r < grid.regions.size(); ++r) {
        const Region& region = grid.regions[r];
        const ResidualOperator& op = residuals.at(region.id);
        double acc = 0.0;
        for (Eigen::Index i = 0; i < region.size(); ++i) {
            const std::span<const double> point(region.points.col(i).data(),
                                                static_cast<std::size_t>(region.points.rows()));
            const double R = op(field(point), point);
            if (!std::isfinite(R)) non_finite(region, i);
            acc += region.weights(i) * R * R;
        }
        const double term = region.size() ? lambda[r] / region.volume * acc : 0.0;
        out.names.push_back(region.name);
        out.terms.push_back(term);
        out.total += term;
    }
    return out;
}

void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryRow>& rows) {
    out << "step,total";
    if (!rows.empty())
        for (const auto& n : rows.front().loss.names) out << ',' << n;
    out << ",lr\n";
    out.precision(10);
    for (const auto& row : rows) {
        out << row.step << ',' << row.loss.total;
        for (double t : row.loss.terms) out << ',' << t;
        out << ',' << row.lr << '\n';
    }
}

}  // namespace xvapinn
