#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "xvapinn/geometry.hpp"
#include "xvapinn/loss.hpp"
#include "xvapinn/metrics.hpp"
#include "xvapinn/models.hpp"
#include "xvapinn/network.hpp"
#include "xvapinn/optim.hpp"
#include "xvapinn/reference.hpp"

namespace xvapinn {

inline constexpr std::string_view kVersion = "0.1.0";

struct NetworkConfig {
    int layers = 4;
    int width = 40;
    Activation activation = Activation::Tanh;
    bool unit_box_scaling = true;
};

/// One experiment document. Grid steps are {N_T, N_1[, N_2]}.
struct ExperimentConfig {
    ModelSpec spec;
    bool risk_free = false;                // lambda_B = lambda_C = s_F = 0
    std::vector<double> lambda_B_sweep;    // empty: spec.xva.lambda_B only
    std::vector<int> steps;
    NetworkConfig network;
    TrainConfig train;
    int n_trials = 1;
    std::vector<std::uint64_t> seeds;      // explicit seeds; else base_seed + i
    std::uint64_t base_seed = 1;
    LossOptions loss;
    std::vector<int> eval_steps;           // evaluation grid, default 2x training
    std::vector<int> fd_steps;             // FD reference resolution
    double clamp_threshold = 0.01;
    std::filesystem::path out_dir = "out";
    std::string canonical;                 // normalised JSON text, hashed into manifests
};

/// Throws ValidationError naming the offending field.
ExperimentConfig parse_config(std::string_view json_text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// The cases of a run: the sweep values, or the single configured lambda_B.
std::vector<double> sweep_values(const ExperimentConfig& config);
ModelSpec model_for(const ExperimentConfig& config, double lambda_B);
Architecture architecture_for(const ExperimentConfig& config);
CollocationSet grid_for(const ExperimentConfig& config);
std::vector<std::uint64_t> trial_seeds(const ExperimentConfig& config);

/// Unit-box input scaling of a model's space-time domain.
InputScaling unit_box_scaling(const DomainBox& domain);

/// Network jets at many points, evaluated in bounded chunks.
std::vector<Jet2> evaluate_jets(const NetworkParams& params, const Eigen::MatrixXd& points);

/// Ground truth of a model: the closed form for Bs1d, an FD surface otherwise.
class Oracle {
public:
    /// `fd_steps` = {N_T, N_1[, N_2]}; ignored for Bs1d.
    static Oracle for_spec(const ModelSpec& spec, const std::vector<int>& fd_steps);
    static Oracle from_surface(const ModelSpec& spec, SolutionSurface surface);

    double value(std::span<const double> point) const;
    std::vector<double> values(const Eigen::MatrixXd& points) const;
    bool closed_form() const { return !surface_; }
    const SolutionSurface* surface() const { return surface_.get(); }
    const ModelSpec& spec() const { return spec_; }

private:
    ModelSpec spec_;
    std::shared_ptr<const SolutionSurface> surface_;
};

/// Whole domain at the given steps {N_T, N_1[, N_2]}.
EvalGrid domain_grid(const DomainBox& domain, const std::vector<int>& steps);
/// Space axes restricted to [0.8K, 1.2K] (Heston: S only), full time range.
EvalGrid near_strike_grid(const ModelSpec& spec, const std::vector<int>& steps);

ErrorReport compare(const NetworkParams& params, const Oracle& oracle, const EvalGrid& grid,
                    double clamp_threshold = 0.01);

/// Relative errors at t = T and S = K(1 - 1/6), K, K(1 + 1/6) (Bs1d only).
struct NearStrikeRow {
    double S = 0.0;
    double price = 0.0, delta = 0.0, gamma = 0.0;              // closed form
    double price_err = 0.0, delta_err = 0.0, gamma_err = 0.0;  // relative
};
std::vector<NearStrikeRow> near_strike_errors(const NetworkParams& params, const ModelSpec& spec);

struct TrialOutcome {
    std::uint64_t seed = 0;
    std::optional<TrainResult> result;  // empty when the trial failed
    std::string error;
    double seconds = 0.0;
};

struct BestOf {
    std::vector<TrialOutcome> trials;
    int best = -1;  // index of the lowest final loss, -1 if every trial failed

    const TrainResult& best_result() const;
};

/// Trains one network per seed from the same grid; failures are recorded
/// per seed and do not stop the others.
BestOf train_best_of(const ModelSpec& spec, const CollocationSet& grid, const Architecture& arch,
                     const TrainConfig& train, const LossOptions& loss,
                     std::span<const std::uint64_t> seeds, std::ostream* log = nullptr);

/// Overrides from the command line.
struct RunOptions {
    std::optional<std::filesystem::path> out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> trials;
    std::optional<BoundaryMode> mode;
};

void apply_overrides(ExperimentConfig& config, const RunOptions& options);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view text);

/// Writes manifest.json (config hash, seeds, version, command) into `dir`.
void write_manifest(const std::filesystem::path& dir, const ExperimentConfig& config,
                    std::string_view command, std::span<const std::uint64_t> seeds);

// Subcommands. Each returns the process exit code and throws the library
// exceptions for the caller to map.
int cmd_train(const ExperimentConfig& config, std::ostream& log);
int cmd_fd(const ExperimentConfig& config, std::ostream& log);
int cmd_greeks(const std::filesystem::path& checkpoint, const std::filesystem::path& points,
               const std::filesystem::path& out, std::ostream& log);
int cmd_compare(const std::filesystem::path& checkpoint, const ExperimentConfig* config,
                const std::optional<std::filesystem::path>& surface, const std::filesystem::path& out_dir,
                std::ostream& log);
int cmd_price(const ExperimentConfig& config, const std::optional<std::filesystem::path>& points,
              const std::filesystem::path& out, std::ostream& log);

/// Reads a points file: header line, then rows t,x1[,x2].
Eigen::MatrixXd read_points_csv(const std::filesystem::path& path);

}  // namespace xvapinn
