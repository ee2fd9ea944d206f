#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "xvapinn/loss.hpp"
#include "xvapinn/network.hpp"

namespace xvapinn {

struct InverseTimeDecay {
    double delta = 0.5;
    long a = 10000;
};

struct TrainConfig {
    long adam_steps = 10000;
    long lbfgs_steps = 2500;
    double lr0 = 1e-3;
    std::optional<InverseTimeDecay> decay;
    int lbfgs_memory = 10;
    std::uint64_t seed = 0;
    long log_every = 100;

    /// Throws ContractError on negative steps, lr0 <= 0, a <= 0 or memory < 1.
    void validate() const;
};

/// eps_0 / (1 + delta k / a), or eps_0 without decay.
double lr_at(const TrainConfig& config, long k);

enum class OptimStatus { Converged, StepLimit, LineSearchFailure, NonFinite };

std::string_view to_string(OptimStatus s);

/// f(x) with its gradient written into `grad` (same size as x).
using ObjectiveFn = std::function<double(std::span<const double> x, std::span<double> grad)>;

/// Called after an iteration with (step, x, loss). Return false to stop.
using StepCallback = std::function<bool(long step, std::span<const double> x, double loss)>;

struct OptimResult {
    std::vector<double> x;  // best iterate seen
    double loss = 0.0;      // objective at x
    long steps = 0;
    OptimStatus status = OptimStatus::StepLimit;
};

struct AdamSettings {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Full-batch Adam for config.adam_steps steps with the lr_at() schedule.
/// The returned x is the final iterate; loss is the objective evaluated at the
/// last gradient call (before the final update). A non-finite loss or gradient
/// stops with NonFinite and the last finite iterate.
OptimResult adam_minimize(const ObjectiveFn& f, std::vector<double> x0, const TrainConfig& config,
                          const StepCallback& callback = {}, const AdamSettings& settings = {});

struct LbfgsSettings {
    double c1 = 1e-4;
    double c2 = 0.9;
    double gradient_tol = 1e-10;
    int max_line_search = 25;
};

/// L-BFGS (two-loop recursion) with a strong-Wolfe line search, for at most
/// config.lbfgs_steps iterations. Accepted iterates never increase f.
OptimResult lbfgs_minimize(const ObjectiveFn& f, std::vector<double> x0, const TrainConfig& config,
                           const StepCallback& callback = {}, const LbfgsSettings& settings = {});

struct TrainResult {
    NetworkParams params;
    LossBreakdown initial_loss;
    LossBreakdown adam_loss;   // after the Adam stage
    LossBreakdown final_loss;
    std::vector<TrajectoryRow> trajectory;
    OptimStatus adam_status = OptimStatus::StepLimit;
    OptimStatus lbfgs_status = OptimStatus::StepLimit;
};

/// Adam then L-BFGS on `loss`, starting from `params`. Trajectory rows are
/// recorded every config.log_every steps of each stage and at both stage ends;
/// L-BFGS steps continue the Adam step count.
TrainResult train(LossFunction& loss, const NetworkParams& params, const TrainConfig& config);

}  // namespace xvapinn
