#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace xvapinn {

enum class Activation { Tanh, Sigmoid, Identity };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

/// Per-axis affine input map y = (x - shift) * scale, applied before the first layer.
struct InputScaling {
    std::vector<double> scale;
    std::vector<double> shift;

    /// Maps each [lo_k, hi_k] onto [0, 1].
    static InputScaling unit_box(std::span<const double> lo, std::span<const double> hi);

    bool operator==(const InputScaling&) const = default;
};

/// Feed-forward layout: widths = {d_in, hidden..., 1}. Hidden layers share the
/// activation; the output layer is affine.
struct Architecture {
    std::vector<int> widths;
    Activation activation = Activation::Tanh;
    std::optional<InputScaling> input_scaling;

    /// `hidden_layers` layers of `hidden_width` units between the input and a scalar output.
    static Architecture uniform(int input_dim, int hidden_layers, int hidden_width,
                                Activation activation = Activation::Tanh);

    int input_dim() const { return widths.front(); }
    int hidden_layers() const { return static_cast<int>(widths.size()) - 2; }
    std::size_t layer_count() const { return widths.size() - 1; }

    /// Throws ContractError on malformed widths or a scaling of the wrong size.
    void validate() const;

    bool operator==(const Architecture&) const = default;
};

/// Number of trainable parameters, sum over layers of (fan_in + 1) * fan_out.
std::size_t param_count(const Architecture& arch);

struct DenseLayer {
    Eigen::MatrixXd weight;  // fan_out x fan_in
    Eigen::VectorXd bias;    // fan_out
};

/// Weights and biases of one network. Immutable once built; training produces
/// new instances. The flat layout is layer by layer, weights row-major then bias.
class NetworkParams {
public:
    NetworkParams(Architecture arch, std::vector<DenseLayer> layers, std::uint64_t seed);

    static NetworkParams from_flat(const Architecture& arch, std::span<const double> flat,
                                   std::uint64_t seed);

    const Architecture& architecture() const noexcept { return arch_; }
    const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
    std::uint64_t seed() const noexcept { return seed_; }
    std::size_t size() const { return param_count(arch_); }

    std::vector<double> flatten() const;
    /// Same architecture and seed, new parameter values.
    NetworkParams with_flat(std::span<const double> flat) const;

private:
    Architecture arch_;
    std::vector<DenseLayer> layers_;
    std::uint64_t seed_;
};

/// Glorot-uniform weights, zero biases. Deterministic in (arch, seed).
NetworkParams init(const Architecture& arch, std::uint64_t seed);

/// Plain evaluation without derivatives.
double forward(const NetworkParams& params, std::span<const double> point);

/// Free-form metadata stored next to the weights (model description, final
/// loss, ...). `json` must be a serialized JSON object or empty.
struct CheckpointMetadata {
    std::string json;
};

inline constexpr int kCheckpointSchemaVersion = 1;

void save_checkpoint(const NetworkParams& params, const std::filesystem::path& path,
                     const CheckpointMetadata& metadata = {});
NetworkParams load_checkpoint(const std::filesystem::path& path,
                              CheckpointMetadata* metadata = nullptr);

}  // namespace xvapinn
