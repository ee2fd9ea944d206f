#include "xvapinn/network.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "activation.hpp"
#include "xvapinn/errors.hpp"

namespace xvapinn {

using nlohmann::json;

std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::Tanh: return "tanh";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Identity: return "identity";
    }
    return "unknown";
}

Activation activation_from_string(std::string_view name) {
    if (name == "tanh") return Activation::Tanh;
    if (name == "sigmoid") return Activation::Sigmoid;
    if (name == "identity") return Activation::Identity;
    throw ContractError("unknown activation '" + std::string(name) + "'");
}

InputScaling InputScaling::unit_box(std::span<const double> lo, std::span<const double> hi) {
    if (lo.size() != hi.size()) throw ContractError("unit_box: bound size mismatch");
    InputScaling s;
    for (std::size_t k = 0; k < lo.size(); ++k) {
        if (!(hi[k] > lo[k])) throw ContractError("unit_box: empty axis");
        s.scale.push_back(1.0 / (hi[k] - lo[k]));
        s.shift.push_back(lo[k]);
    }
    return s;
}

Architecture Architecture::uniform(int input_dim, int hidden_layers, int hidden_width,
                                   Activation activation) {
    if (hidden_layers < 1 || hidden_width < 1)
        throw ContractError("uniform architecture needs l >= 1 and width >= 1");
    Architecture a;
    a.widths.push_back(input_dim);
    for (int l = 0; l < hidden_layers; ++l) a.widths.push_back(hidden_width);
    a.widths.push_back(1);
    a.activation = activation;
    return a;
}

void Architecture::validate() const {
    if (widths.size() < 2) throw ContractError("architecture needs at least one layer");
    for (int w : widths)
        if (w < 1) throw ContractError("layer widths must be positive");
    if (widths.back() != 1) throw ContractError("network output must be scalar");
    if (input_scaling) {
        const auto d = static_cast<std::size_t>(input_dim());
        if (input_scaling->scale.size() != d || input_scaling->shift.size() != d)
            throw ContractError("input scaling size does not match input dimension");
    }
}

std::size_t param_count(const Architecture& arch) {
    std::size_t p = 0;
    for (std::size_t l = 0; l + 1 < arch.widths.size(); ++l)
        p += static_cast<std::size_t>(arch.widths[l] + 1) * static_cast<std::size_t>(arch.widths[l + 1]);
    return p;
}

NetworkParams::NetworkParams(Architecture arch, std::vector<DenseLayer> layers, std::uint64_t seed)
    : arch_(std::move(arch)), layers_(std::move(layers)), seed_(seed) {
    arch_.validate();
    if (layers_.size() != arch_.layer_count()) throw ContractError("layer count mismatch");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& L = layers_[l];
        if (L.weight.rows() != arch_.widths[l + 1] || L.weight.cols() != arch_.widths[l] ||
            L.bias.size() != arch_.widths[l + 1])
            throw ContractError("layer " + std::to_string(l) + " shape mismatch");
    }
}

NetworkParams NetworkParams::from_flat(const Architecture& arch, std::span<const double> flat,
                                       std::uint64_t seed) {
    arch.validate();
    if (flat.size() != param_count(arch)) throw ContractError("flat parameter length mismatch");
    std::vector<DenseLayer> layers;
    std::size_t pos = 0;
    for (std::size_t l = 0; l + 1 < arch.widths.size(); ++l) {
        const int in = arch.widths[l], out = arch.widths[l + 1];
        DenseLayer L{Eigen::MatrixXd(out, in), Eigen::VectorXd(out)};
        for (int i = 0; i < out; ++i)
            for (int j = 0; j < in; ++j) L.weight(i, j) = flat[pos++];
        for (int i = 0; i < out; ++i) L.bias(i) = flat[pos++];
        layers.push_back(std::move(L));
    }
    return NetworkParams(arch, std::move(layers), seed);
}

std::vector<double> NetworkParams::flatten() const {
    std::vector<double> flat;
    flat.reserve(size());
    for (const auto& L : layers_) {
        for (Eigen::Index i = 0; i < L.weight.rows(); ++i)
            for (Eigen::Index j = 0; j < L.weight.cols(); ++j) flat.push_back(L.weight(i, j));
        for (Eigen::Index i = 0; i < L.bias.size(); ++i) flat.push_back(L.bias(i));
    }
    return flat;
}

NetworkParams NetworkParams::with_flat(std::span<const double> flat) const {
    return from_flat(arch_, flat, seed_);
}

NetworkParams init(const Architecture& arch, std::uint64_t seed) {
    arch.validate();
    std::mt19937_64 rng(seed);
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l + 1 < arch.widths.size(); ++l) {
        const int in = arch.widths[l], out = arch.widths[l + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        DenseLayer L{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(out)};
        for (int i = 0; i < out; ++i)
            for (int j = 0; j < in; ++j) L.weight(i, j) = dist(rng);
        layers.push_back(std::move(L));
    }
    return NetworkParams(arch, std::move(layers), seed);
}

double forward(const NetworkParams& params, std::span<const double> point) {
    const auto& arch = params.architecture();
    if (point.size() != static_cast<std::size_t>(arch.input_dim()))
        throw ContractError("forward: point dimension " + std::to_string(point.size()) +
                            " != network input " + std::to_string(arch.input_dim()));
    Eigen::VectorXd z(arch.input_dim());
    for (int k = 0; k < arch.input_dim(); ++k) {
        z(k) = point[k];
        if (arch.input_scaling)
            z(k) = (z(k) - arch.input_scaling->shift[k]) * arch.input_scaling->scale[k];
    }
    const auto& layers = params.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        Eigen::VectorXd p = layers[l].weight * z + layers[l].bias;
        if (l + 1 < layers.size())
            for (Eigen::Index i = 0; i < p.size(); ++i)
                p(i) = detail::activate(arch.activation, p(i)).value;
        z = std::move(p);
    }
    return z(0);
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

json architecture_to_json(const Architecture& a) {
    return json{{"widths", a.widths}, {"activation", std::string(to_string(a.activation))}};
}

template <class T>
T require(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) throw SchemaError(where + ": missing field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw SchemaError(where + "." + key + ": " + e.what());
    }
}

}  // namespace

void save_checkpoint(const NetworkParams& params, const std::filesystem::path& path,
                     const CheckpointMetadata& metadata) {
    const auto& arch = params.architecture();
    json doc;
    doc["schema_version"] = kCheckpointSchemaVersion;
    doc["architecture"] = architecture_to_json(arch);
    if (arch.input_scaling)
        doc["input_scaling"] = {{"scale", arch.input_scaling->scale},
                                {"shift", arch.input_scaling->shift}};
    else
        doc["input_scaling"] = nullptr;
    doc["seed"] = params.seed();
    json layers = json::array();
    for (const auto& L : params.layers()) {
        json W = json::array();
        for (Eigen::Index i = 0; i < L.weight.rows(); ++i) {
            json row = json::array();
            for (Eigen::Index j = 0; j < L.weight.cols(); ++j) row.push_back(L.weight(i, j));
            W.push_back(std::move(row));
        }
        layers.push_back({{"W", std::move(W)},
                          {"b", std::vector<double>(L.bias.data(), L.bias.data() + L.bias.size())}});
    }
    doc["layers"] = std::move(layers);
    if (!metadata.json.empty()) {
        try {
            doc["metadata"] = json::parse(metadata.json);
        } catch (const json::exception& e) {
            throw ContractError(std::string("checkpoint metadata is not valid JSON: ") + e.what());
        }
    }

    std::ofstream out(path);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    // nlohmann emits the shortest representation that round-trips exactly.
    out << doc.dump(1) << '\n';
    if (!out) throw IoError("failed writing checkpoint " + path.string());
}

NetworkParams load_checkpoint(const std::filesystem::path& path, CheckpointMetadata* metadata) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read checkpoint " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw SchemaError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
    }
    const std::string where = "checkpoint";
    const int version = require<int>(doc, "schema_version", where);
    if (version != kCheckpointSchemaVersion)
        throw SchemaError("checkpoint schema_version " + std::to_string(version) +
                          " is not supported (expected " +
                          std::to_string(kCheckpointSchemaVersion) + ")");

    const json& ja = doc.at("architecture");
    Architecture arch;
    arch.widths = require<std::vector<int>>(ja, "widths", where + ".architecture");
    try {
        arch.activation =
            activation_from_string(require<std::string>(ja, "activation", where + ".architecture"));
    } catch (const ContractError& e) {
        throw SchemaError(e.what());
    }
    if (doc.contains("input_scaling") && !doc["input_scaling"].is_null()) {
        InputScaling s;
        s.scale = require<std::vector<double>>(doc["input_scaling"], "scale", where + ".input_scaling");
        s.shift = require<std::vector<double>>(doc["input_scaling"], "shift", where + ".input_scaling");
        arch.input_scaling = std::move(s);
    }
    try {
        arch.validate();
    } catch (const ContractError& e) {
        throw SchemaError(std::string("checkpoint architecture: ") + e.what());
    }

    const auto seed = require<std::uint64_t>(doc, "seed", where);
    const json& jl = doc.at("layers");
    if (!jl.is_array() || jl.size() != arch.layer_count())
        throw SchemaError("checkpoint.layers: expected " + std::to_string(arch.layer_count()) +
                          " layers");
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l < jl.size(); ++l) {
        const std::string lw = where + ".layers[" + std::to_string(l) + "]";
        const auto W = require<std::vector<std::vector<double>>>(jl[l], "W", lw);
        const auto b = require<std::vector<double>>(jl[l], "b", lw);
        const int out = arch.widths[l + 1], inw = arch.widths[l];
        if (W.size() != static_cast<std::size_t>(out) || b.size() != static_cast<std::size_t>(out))
            throw SchemaError(lw + ": expected " + std::to_string(out) + " rows");
        DenseLayer L{Eigen::MatrixXd(out, inw), Eigen::VectorXd(out)};
        for (int i = 0; i < out; ++i) {
            if (W[i].size() != static_cast<std::size_t>(inw))
                throw SchemaError(lw + ".W row " + std::to_string(i) + ": expected " +
                                  std::to_string(inw) + " columns");
            for (int j = 0; j < inw; ++j) L.weight(i, j) = W[i][j];
            L.bias(i) = b[i];
        }
        layers.push_back(std::move(L));
    }
    if (metadata) metadata->json = doc.contains("metadata") ? doc["metadata"].dump() : std::string();
    return NetworkParams(std::move(arch), std::move(layers), seed);
}

}  // namespace xvapinn
