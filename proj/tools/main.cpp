// xvapinn command line: train / greeks / fd / compare / price.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "xvapinn/errors.hpp"
#include "xvapinn/experiment.hpp"

namespace fs = std::filesystem;
using namespace xvapinn;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitNumeric = 2;

struct Common {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> trials;
    std::string mode;
};

void add_common(CLI::App* cmd, Common& c, bool training) {
    cmd->add_option("--config", c.config, "Experiment JSON")->check(CLI::ExistingFile);
    cmd->add_option("--out", c.out, "Output directory (overrides output.directory)");
    if (!training) return;
    cmd->add_option("--seed", c.seed, "First seed; trials use seed, seed+1, ...");
    cmd->add_option("--trials", c.trials, "Number of seeds to train");
    cmd->add_option("--mode", c.mode, "Boundary residuals")->check(CLI::IsMember({"classic", "pde-boundary"}));
}

ExperimentConfig configured(const Common& c) {
    if (c.config.empty()) throw ValidationError("--config", "required");
    ExperimentConfig cfg = load_config(c.config);
    RunOptions o;
    if (!c.out.empty()) o.out_dir = fs::path(c.out);
    o.seed = c.seed;
    o.trials = c.trials;
    if (!c.mode.empty()) o.mode = boundary_mode_from_string(c.mode);
    apply_overrides(cfg, o);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Physics-informed neural network pricing of options with counterparty risk"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    Common train_opts, fd_opts, price_opts, compare_opts;
    auto* train = app.add_subcommand("train", "Train networks (multi-seed) and report errors against the oracle");
    add_common(train, train_opts, true);

    auto* fd = app.add_subcommand("fd", "Solve the configured problem by finite differences");
    add_common(fd, fd_opts, false);

    std::string checkpoint, points, surface, out_file = "greeks.csv";
    auto* greeks = app.add_subcommand("greeks", "Price and Greeks of a checkpoint at given points");
    greeks->add_option("--checkpoint", checkpoint, "Checkpoint JSON")->required()->check(CLI::ExistingFile);
    greeks->add_option("--points", points, "CSV with header and rows t,x1[,x2]")->required()->check(CLI::ExistingFile);
    greeks->add_option("--out", out_file, "Output CSV");

    auto* compare = app.add_subcommand("compare", "Compare a checkpoint with the closed form or an FD surface");
    compare->add_option("--checkpoint", checkpoint, "Checkpoint JSON")->required()->check(CLI::ExistingFile);
    compare->add_option("--config", compare_opts.config, "Experiment JSON")->check(CLI::ExistingFile);
    compare->add_option("--surface", surface, "Surface base path (without .csv/.json)");
    compare->add_option("--out", compare_opts.out, "Output directory");

    std::string price_points, price_out = "prices.csv";
    auto* price = app.add_subcommand("price", "Closed-form risky Black-Scholes prices");
    price->add_option("--config", price_opts.config, "Experiment JSON")->required()->check(CLI::ExistingFile);
    price->add_option("--points", price_points, "CSV with header and rows t,S")->check(CLI::ExistingFile);
    price->add_option("--out", price_out, "Output CSV");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) return cmd_train(configured(train_opts), std::cout);
        if (*fd) return cmd_fd(configured(fd_opts), std::cout);
        if (*greeks) return cmd_greeks(checkpoint, points, out_file, std::cout);
        if (*compare) {
            std::optional<ExperimentConfig> cfg;
            if (!compare_opts.config.empty()) cfg = load_config(compare_opts.config);
            std::optional<fs::path> surf;
            if (!surface.empty()) surf = fs::path(surface);
            const fs::path out = compare_opts.out.empty() ? fs::path("compare") : fs::path(compare_opts.out);
            return cmd_compare(checkpoint, cfg ? &*cfg : nullptr, surf, out, std::cout);
        }
        if (*price) {
            std::optional<fs::path> pts;
            if (!price_points.empty()) pts = fs::path(price_points);
            return cmd_price(configured(price_opts), pts, price_out, std::cout);
        }
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    }
    return 0;
}
