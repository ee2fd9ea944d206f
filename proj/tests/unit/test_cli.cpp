#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "xvapinn/errors.hpp"
#include "xvapinn/experiment.hpp"

using namespace xvapinn;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto d = fs::temp_directory_path() / "xvapinn_tests" / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string read(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* kTiny = R"({
  "model": {"kind": "bs1d", "K": 15.0, "T": 5.0, "market": {"sigma": 0.25, "r_R": 0.015},
            "xva": {"lambda_B": 0.04, "lambda_C": 0.05, "R_B": 0.4, "R_C": 0.4, "r": 0.03}},
  "grid": {"N_T": 4, "N": [6]},
  "network": {"layers": 1, "width": 4},
  "training": {"adam_steps": 0, "lbfgs_steps": 0, "n_trials": 1, "seeds": [5]},
  "evaluation": {"N_T": 8, "N": [12], "fd": {"N_T": 40, "N": [40]}}
})";

}  // namespace

TEST_CASE("bundled configs parse") {
    for (const char* name : {"bs1d_table1.json", "basket_table3.json", "heston_table4.json"}) {
        const auto c = load_config(fs::path(XVAPINN_SOURCE_DIR) / "configs" / name);
        CHECK(!c.steps.empty());
        CHECK(c.n_trials >= 1);
    }
    const auto t = load_config(fs::path(XVAPINN_SOURCE_DIR) / "configs" / "bs1d_table1.json");
    CHECK(t.steps == std::vector<int>{100, 110});
    CHECK(t.train.adam_steps == 10000);
    CHECK(t.train.lbfgs_steps == 2500);
    CHECK(param_count(architecture_for(t)) == 5081);
}

TEST_CASE("validation errors carry the field path") {
    auto j = nlohmann::json::parse(kTiny);
    j["model"]["lambda_B_sweep"] = {0.02, 0.2};
    try {
        parse_config(j.dump());
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        CHECK(e.field().find("lambda_B_sweep") != std::string::npos);
    }
    auto k = nlohmann::json::parse(kTiny);
    k["model"]["kind"] = "binomial";
    CHECK_THROWS_AS(parse_config(k.dump()), ValidationError);
    CHECK_THROWS_AS(parse_config("{not json"), ValidationError);
}

TEST_CASE("zero-step training writes the initial network") {
    auto c = parse_config(kTiny);
    c.out_dir = scratch("train0");
    std::ostringstream log;
    CHECK(cmd_train(c, log) == 0);
    const auto ckpts = c.out_dir / "lambda_B_0.0400" / "seed_5.json";
    REQUIRE(fs::exists(ckpts));
    const auto back = load_checkpoint(ckpts);
    CHECK(back.flatten() == init(architecture_for(c), 5).flatten());
    CHECK(fs::exists(c.out_dir / "manifest.json"));
    const auto manifest = nlohmann::json::parse(read(c.out_dir / "manifest.json"));
    CHECK(manifest["seeds"] == nlohmann::json::array({5}));
    CHECK(manifest["config_hash"].get<std::string>().size() == 16);

    CHECK(fs::exists(c.out_dir / "lambda_B_0.0400" / "best.json"));
    CHECK(fs::exists(c.out_dir / "lambda_B_0.0400" / "report.json"));
    // same config and seeds: identical checkpoint
    const std::string first = read(ckpts);
    CHECK(cmd_train(c, log) == 0);
    CHECK(read(ckpts) == first);
}

TEST_CASE("checkpoint reproduces its recorded final loss") {
    auto c = parse_config(kTiny);
    c.train.adam_steps = 20;
    c.out_dir = scratch("train20");
    std::ostringstream log;
    cmd_train(c, log);
    CheckpointMetadata meta;
    const auto net = load_checkpoint(c.out_dir / "lambda_B_0.0400" / "seed_5.json", &meta);
    const auto m = nlohmann::json::parse(meta.json);
    LossFunction loss(model_for(c, sweep_values(c)[0]), grid_for(c));
    CHECK(std::abs(loss.assemble(net).total - m["final_loss"].get<double>()) <= 1e-12);
}

TEST_CASE("greeks from a constant network are zero; deep ITM put delta sign") {
    const auto spec = table1_bs1d(0.0);
    auto arch = Architecture::uniform(2, 1, 3);
    auto flat = std::vector<double>(param_count(arch), 0.0);
    flat.back() = 2.0;
    const auto net = init(arch, 1).with_flat(flat);
    const auto dir = scratch("greeks");
    save_checkpoint(net, dir / "c.json");
    {
        std::ofstream p(dir / "points.csv");
        p << "t,S\n1.0,10.0\n2.0,15.0\n";
    }
    std::ostringstream log;
    CHECK(cmd_greeks(dir / "c.json", dir / "points.csv", dir / "g.csv", log) == 0);
    std::ifstream in(dir / "g.csv");
    std::string header, line;
    std::getline(in, header);
    CHECK(header == "t,S,price,delta,gamma");
    while (std::getline(in, line)) CHECK(line.substr(line.find(',', line.find(',') + 1)) == ",2,0,0");

    const auto g = risky_bs_greeks(5.0, 0.2 * spec.K, spec);
    CHECK(g.delta < 0.0);
    CHECK(g.delta >= -1.0);
}

TEST_CASE("fd subcommand: 1D risky solve and 2D surface shape") {
    auto c = parse_config(kTiny);
    c.fd_steps = {400, 400};
    c.out_dir = scratch("fd1");
    std::ostringstream log;
    CHECK(cmd_fd(c, log) == 0);
    const auto s = read_surface(c.out_dir / "surface_lambda_B_0.0400");
    const auto spec = model_for(c, sweep_values(c)[0]);
    double e = 0, r = 0;
    for (std::size_t n = 1; n < s.t.size(); ++n)
        for (std::size_t j = 0; j < s.axes[0].size(); ++j) {
            const double S = s.axes[0][j];
            if (S < 0.5 * spec.K || S > 1.5 * spec.K) continue;
            const double ref = risky_bs_price(s.t[n], S, spec);
            e += (s.at(n, j) - ref) * (s.at(n, j) - ref);
            r += ref * ref;
        }
    CHECK(std::sqrt(e / r) <= 1e-3);

    auto b = load_config(fs::path(XVAPINN_SOURCE_DIR) / "configs" / "basket_table3.json");
    b.fd_steps = {6, 10, 12};
    b.out_dir = scratch("fd2");
    CHECK(cmd_fd(b, log) == 0);
    const auto s2 = read_surface(b.out_dir / "surface_lambda_B_0.0200");
    CHECK(s2.slice_size() == 11u * 13u);
    CHECK(s2.values.size() == 7u * 11u * 13u);

    auto h = load_config(fs::path(XVAPINN_SOURCE_DIR) / "configs" / "heston_table4.json");
    h.fd_steps = {4, 8, 6};
    h.out_dir = scratch("fd3");
    std::ostringstream hlog;
    CHECK(cmd_fd(h, hlog) == 0);
    CHECK(hlog.str().find("feller=true") != std::string::npos);
}

TEST_CASE("compare: a surface against itself gives zero norms") {
    auto c = parse_config(kTiny);
    c.out_dir = scratch("cmp");
    std::ostringstream log;
    cmd_train(c, log);
    const auto spec = model_for(c, sweep_values(c)[0]);
    const auto s = fd_solve_1d(spec, 20, 20);
    const Oracle a = Oracle::from_surface(spec, s);
    const EvalGrid g = tensor_grid({s.t, s.axes[0]});
    const auto vals = a.values(g.points);
    const auto rep = relative_norms(vals, vals, std::vector<double>(g.weights.data(), g.weights.data() + g.size()));
    CHECK(rep.rel_L2 == 0.0);

    // a Heston surface is not comparable with a 1D checkpoint
    auto h = load_config(fs::path(XVAPINN_SOURCE_DIR) / "configs" / "heston_table4.json");
    h.fd_steps = {4, 8, 6};
    h.out_dir = scratch("cmp_h");
    cmd_fd(h, log);
    CHECK_THROWS_AS(cmd_compare(c.out_dir / "lambda_B_0.0400" / "seed_5.json", nullptr,
                                h.out_dir / "surface_lambda_B_0.0200", scratch("cmp_out"), log),
                    ValidationError);
}

TEST_CASE("fnv1a reference values") {
    CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
}
