#include "xvapinn/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "xvapinn/autodiff.hpp"
#include "xvapinn/errors.hpp"

namespace xvapinn {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config parsing

namespace {

class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

    std::string field(std::string_view key) const {
        return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
    }

    bool has(std::string_view key) const { return j_.contains(std::string(key)) && !j_.at(std::string(key)).is_null(); }

    Reader child(std::string_view key) const {
        if (!has(key) || !j_.at(std::string(key)).is_object())
            throw ValidationError(field(key), "missing or not an object");
        return Reader(j_.at(std::string(key)), field(key));
    }

    double number(std::string_view key) const {
        if (!has(key)) throw ValidationError(field(key), "required number is missing");
        const auto& v = j_.at(std::string(key));
        if (!v.is_number()) throw ValidationError(field(key), "must be a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) throw ValidationError(field(key), "must be finite");
        return d;
    }

    double number(std::string_view key, double fallback) const { return has(key) ? number(key) : fallback; }

    long integer(std::string_view key, long fallback) const {
        if (!has(key)) return fallback;
        const auto& v = j_.at(std::string(key));
        if (!v.is_number_integer()) throw ValidationError(field(key), "must be an integer");
        return v.get<long>();
    }

    bool boolean(std::string_view key, bool fallback) const {
        if (!has(key)) return fallback;
        const auto& v = j_.at(std::string(key));
        if (!v.is_boolean()) throw ValidationError(field(key), "must be true or false");
        return v.get<bool>();
    }

    std::string string(std::string_view key, std::string fallback) const {
        if (!has(key)) return fallback;
        const auto& v = j_.at(std::string(key));
        if (!v.is_string()) throw ValidationError(field(key), "must be a string");
        return v.get<std::string>();
    }

    std::vector<double> numbers(std::string_view key) const {
        std::vector<double> out;
        if (!has(key)) return out;
        const auto& v = j_.at(std::string(key));
        if (!v.is_array()) throw ValidationError(field(key), "must be an array of numbers");
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number())
                throw ValidationError(field(key) + "[" + std::to_string(i) + "]", "must be a number");
            out.push_back(v[i].get<double>());
        }
        return out;
    }

    std::vector<int> integers(std::string_view key) const {
        std::vector<int> out;
        if (!has(key)) return out;
        const auto& v = j_.at(std::string(key));
        if (!v.is_array()) throw ValidationError(field(key), "must be an array of integers");
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number_integer())
                throw ValidationError(field(key) + "[" + std::to_string(i) + "]", "must be an integer");
            out.push_back(v[i].get<int>());
        }
        return out;
    }

    const json& raw() const { return j_; }

private:
    const json& j_;
    std::string path_;
};

void check(bool ok, const std::string& field, const std::string& msg) {
    if (!ok) throw ValidationError(field, msg);
}

json spec_to_json(const ModelSpec& m) {
    json market;
    switch (m.kind) {
        case ModelKind::Bs1d: market = {{"sigma", m.bs().sigma}, {"r_R", m.bs().r_R}}; break;
        case ModelKind::BasketAverage:
        case ModelKind::BasketWorstOf: {
            const auto& b = m.basket();
            market = {{"sigma1", b.sigma1}, {"sigma2", b.sigma2}, {"r_R1", b.r_R1}, {"r_R2", b.r_R2}, {"rho", b.rho}};
            break;
        }
        case ModelKind::Heston: {
            const auto& h = m.heston();
            market = {{"r_R", h.r_R}, {"kappa", h.kappa}, {"eta", h.eta}, {"sigma", h.sigma}, {"rho", h.rho}};
            break;
        }
    }
    json axes = json::array();
    for (const auto& a : m.domain.axes) axes.push_back({{"name", a.name}, {"min", a.min}, {"max", a.max}});
    return {{"kind", to_string(m.kind)},
            {"alpha", m.alpha},
            {"K", m.K},
            {"T", m.domain.T},
            {"market", market},
            {"xva",
             {{"lambda_B", m.xva.lambda_B},
              {"lambda_C", m.xva.lambda_C},
              {"R_B", m.xva.R_B},
              {"R_C", m.xva.R_C},
              {"s_F", m.xva.s_F},
              {"r", m.xva.r}}},
            {"axes", axes},
            {"heston_strict_neumann", m.heston_strict_neumann}};
}

Market parse_market(const Reader& r, ModelKind kind) {
    switch (kind) {
        case ModelKind::Bs1d: return Bs1dMarket{r.number("sigma"), r.number("r_R")};
        case ModelKind::BasketAverage:
        case ModelKind::BasketWorstOf:
            return BasketMarket{r.number("sigma1"), r.number("sigma2"), r.number("r_R1"), r.number("r_R2"),
                                r.number("rho")};
        case ModelKind::Heston:
            return HestonMarket{r.number("r_R"), r.number("kappa"), r.number("eta"), r.number("sigma"),
                                r.number("rho")};
    }
    return Bs1dMarket{};
}

void check_lambda_B(double v, const std::string& field) {
    check(v >= 0.0 && v <= 0.1, field, "seller hazard rate must lie in [0, 0.1]");
}

}  // namespace

ExperimentConfig parse_config(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ValidationError("<document>", std::string("invalid JSON: ") + e.what());
    }
    check(doc.is_object(), "<document>", "must be a JSON object");
    const Reader root(doc, "");
    ExperimentConfig c;
    c.canonical = doc.dump();

    // model
    const Reader model = root.child("model");
    ModelSpec& m = c.spec;
    try {
        m.kind = model_kind_from_string(model.string("kind", ""));
    } catch (const ContractError& e) {
        throw ValidationError(model.field("kind"), e.what());
    }
    m.alpha = static_cast<int>(model.integer("alpha", -1));
    check(m.alpha == 1 || m.alpha == -1, model.field("alpha"), "must be +1 (call) or -1 (put)");
    m.K = model.number("K");
    check(m.K > 0.0, model.field("K"), "must be > 0");
    const double T = model.number("T");
    check(T > 0.0, model.field("T"), "must be > 0");
    m.market = parse_market(model.child("market"), m.kind);
    m.heston_strict_neumann = model.boolean("heston_strict_neumann", false);

    const Reader xva = model.child("xva");
    const double lambda_B = xva.number("lambda_B", 0.0);
    check_lambda_B(lambda_B, xva.field("lambda_B"));
    m.xva = XvaParams::with_default_funding(lambda_B, xva.number("lambda_C", 0.0), xva.number("R_B", 0.0),
                                            xva.number("R_C", 0.0), xva.number("r"));
    if (xva.has("s_F")) m.xva.s_F = xva.number("s_F");
    c.risk_free = model.boolean("risk_free", false);
    c.lambda_B_sweep = model.numbers("lambda_B_sweep");
    for (std::size_t i = 0; i < c.lambda_B_sweep.size(); ++i)
        check_lambda_B(c.lambda_B_sweep[i], model.field("lambda_B_sweep") + "[" + std::to_string(i) + "]");

    // grid
    const Reader grid = root.child("grid");
    const int d = m.space_dim();
    const std::vector<int> n = grid.integers("N");
    check(static_cast<int>(n.size()) == d, grid.field("N"),
          "needs " + std::to_string(d) + " entries for model " + std::string(to_string(m.kind)));
    const long n_t = grid.integer("N_T", 0);
    check(n_t >= 1, grid.field("N_T"), "must be >= 1");
    for (std::size_t i = 0; i < n.size(); ++i)
        check(n[i] >= 2, grid.field("N") + "[" + std::to_string(i) + "]", "must be >= 2");
    c.steps = {static_cast<int>(n_t)};
    c.steps.insert(c.steps.end(), n.begin(), n.end());
    const double mult = grid.number("domain_multiple", 4.0);
    check(mult > 1.0, grid.field("domain_multiple"), "must be > 1");
    m.domain.T = T;
    switch (m.kind) {
        case ModelKind::Bs1d: m.domain.axes = {Axis{"S", 0.0, mult * m.K}}; break;
        case ModelKind::BasketAverage:
        case ModelKind::BasketWorstOf:
            m.domain.axes = {Axis{"S1", 0.0, mult * m.K}, Axis{"S2", 0.0, mult * m.K}};
            break;
        case ModelKind::Heston: {
            const double nu_max = grid.number("nu_max", 3.0);
            check(nu_max > 0.0, grid.field("nu_max"), "must be > 0");
            m.domain.axes = {Axis{"S", 0.0, mult * m.K}, Axis{"nu", 0.0, nu_max}};
            break;
        }
    }
    try {
        m.validate();
    } catch (const ContractError& e) {
        throw ValidationError("model", e.what());
    }

    // network
    if (root.has("network")) {
        const Reader net = root.child("network");
        c.network.layers = static_cast<int>(net.integer("layers", 4));
        c.network.width = static_cast<int>(net.integer("width", 40));
        check(c.network.layers >= 1, net.field("layers"), "must be >= 1");
        check(c.network.width >= 1, net.field("width"), "must be >= 1");
        try {
            c.network.activation = activation_from_string(net.string("activation", "tanh"));
        } catch (const ContractError& e) {
            throw ValidationError(net.field("activation"), e.what());
        }
        const std::string scaling = net.string("input_scaling", "unit_box");
        check(scaling == "unit_box" || scaling == "none", net.field("input_scaling"),
              "must be \"unit_box\" or \"none\"");
        c.network.unit_box_scaling = scaling == "unit_box";
    }

    // training
    if (root.has("training")) {
        const Reader tr = root.child("training");
        c.train.adam_steps = tr.integer("adam_steps", c.train.adam_steps);
        c.train.lbfgs_steps = tr.integer("lbfgs_steps", c.train.lbfgs_steps);
        c.train.lr0 = tr.number("lr0", c.train.lr0);
        c.train.lbfgs_memory = static_cast<int>(tr.integer("lbfgs_memory", c.train.lbfgs_memory));
        c.train.log_every = tr.integer("log_every", c.train.log_every);
        if (tr.has("decay")) {
            const Reader dec = tr.child("decay");
            c.train.decay = InverseTimeDecay{dec.number("delta"), dec.integer("a", 0)};
        }
        c.n_trials = static_cast<int>(tr.integer("n_trials", 1));
        check(c.n_trials >= 1, tr.field("n_trials"), "must be >= 1");
        c.base_seed = static_cast<std::uint64_t>(tr.integer("base_seed", 1));
        if (tr.has("seeds")) {
            const auto& s = tr.raw().at("seeds");
            check(s.is_array(), tr.field("seeds"), "must be an array of integers");
            for (const auto& v : s) {
                check(v.is_number_unsigned(), tr.field("seeds"), "must hold non-negative integers");
                c.seeds.push_back(v.get<std::uint64_t>());
            }
        }
        try {
            c.train.validate();
        } catch (const ContractError& e) {
            throw ValidationError("training", e.what());
        }
    }

    // loss
    if (root.has("loss")) {
        const Reader loss = root.child("loss");
        try {
            c.loss.mode = boundary_mode_from_string(loss.string("mode", "pde-boundary"));
        } catch (const ContractError& e) {
            throw ValidationError(loss.field("mode"), e.what());
        }
        c.loss.region_weights = loss.numbers("region_weights");
        const std::size_t regions = static_cast<std::size_t>(2 + 2 * d);
        check(c.loss.region_weights.empty() || c.loss.region_weights.size() == regions,
              loss.field("region_weights"), "needs " + std::to_string(regions) + " entries");
    }

    // evaluation
    c.eval_steps = c.steps;
    for (int& s : c.eval_steps) s *= 2;
    c.fd_steps = d == 1 ? std::vector<int>{400, 400} : std::vector<int>{100, 160, 160};
    if (root.has("evaluation")) {
        const Reader ev = root.child("evaluation");
        if (ev.has("N_T") || ev.has("N")) {
            const auto en = ev.integers("N");
            check(static_cast<int>(en.size()) == d, ev.field("N"), "needs one entry per space axis");
            c.eval_steps = {static_cast<int>(ev.integer("N_T", c.eval_steps[0]))};
            c.eval_steps.insert(c.eval_steps.end(), en.begin(), en.end());
        }
        if (ev.has("fd")) {
            const Reader fd = ev.child("fd");
            const auto fn = fd.integers("N");
            check(static_cast<int>(fn.size()) == d, fd.field("N"), "needs one entry per space axis");
            c.fd_steps = {static_cast<int>(fd.integer("N_T", c.fd_steps[0]))};
            c.fd_steps.insert(c.fd_steps.end(), fn.begin(), fn.end());
            for (int v : c.fd_steps) check(v >= 4, fd.field("N"), "FD resolutions must be >= 4");
        }
        c.clamp_threshold = ev.number("clamp_threshold", c.clamp_threshold);
        check(c.clamp_threshold > 0.0, ev.field("clamp_threshold"), "must be > 0");
    }

    if (root.has("output")) {
        const Reader out = root.child("output");
        c.out_dir = out.string("directory", "out");
    }
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::vector<double> sweep_values(const ExperimentConfig& config) {
    if (config.lambda_B_sweep.empty()) return {config.spec.xva.lambda_B};
    return config.lambda_B_sweep;
}

ModelSpec model_for(const ExperimentConfig& config, double lambda_B) {
    ModelSpec m = config.spec;
    m.xva.lambda_B = lambda_B;
    m.xva.s_F = (1.0 - m.xva.R_B) * lambda_B;
    if (config.risk_free) m = risk_free(m);
    return m;
}

InputScaling unit_box_scaling(const DomainBox& domain) {
    std::vector<double> lo{0.0}, hi{domain.T};
    for (const auto& a : domain.axes) {
        lo.push_back(a.min);
        hi.push_back(a.max);
    }
    return InputScaling::unit_box(lo, hi);
}

Architecture architecture_for(const ExperimentConfig& config) {
    Architecture a = Architecture::uniform(config.spec.space_dim() + 1, config.network.layers,
                                           config.network.width, config.network.activation);
    if (config.network.unit_box_scaling) a.input_scaling = unit_box_scaling(config.spec.domain);
    return a;
}

CollocationSet grid_for(const ExperimentConfig& config) { return build_grid(config.spec.domain, config.steps); }

std::vector<std::uint64_t> trial_seeds(const ExperimentConfig& config) {
    if (!config.seeds.empty()) return config.seeds;
    std::vector<std::uint64_t> s;
    for (int i = 0; i < config.n_trials; ++i) s.push_back(config.base_seed + static_cast<std::uint64_t>(i));
    return s;
}

void apply_overrides(ExperimentConfig& config, const RunOptions& o) {
    if (o.out_dir) config.out_dir = *o.out_dir;
    if (o.mode) config.loss.mode = *o.mode;
    if (o.trials) {
        if (*o.trials < 1) throw ValidationError("--trials", "must be >= 1");
        config.n_trials = *o.trials;
        if (!config.seeds.empty()) config.seeds.resize(std::min<std::size_t>(config.seeds.size(), *o.trials));
    }
    if (o.seed) {
        config.base_seed = *o.seed;
        config.seeds.clear();
    }
}

// ---------------------------------------------------------------------------
// Evaluation

std::vector<Jet2> evaluate_jets(const NetworkParams& params, const Eigen::MatrixXd& points) {
    constexpr Eigen::Index kChunk = 4096;
    JetEngine engine;
    std::vector<Jet2> out;
    out.reserve(static_cast<std::size_t>(points.cols()));
    for (Eigen::Index c0 = 0; c0 < points.cols(); c0 += kChunk) {
        const Eigen::Index n = std::min(kChunk, points.cols() - c0);
        const JetBatch& b = engine.forward(params, points.middleCols(c0, n));
        for (Eigen::Index i = 0; i < n; ++i) out.push_back(b.at(i));
    }
    return out;
}

Oracle Oracle::for_spec(const ModelSpec& spec, const std::vector<int>& fd_steps) {
    Oracle o;
    o.spec_ = spec;
    if (spec.kind == ModelKind::Bs1d) return o;
    if (fd_steps.size() != 3) throw ContractError("2D oracle needs FD steps {N_T, N_1, N_2}");
    o.surface_ = std::make_shared<const SolutionSurface>(fd_solve_2d(spec, fd_steps[1], fd_steps[2], fd_steps[0]));
    return o;
}

Oracle Oracle::from_surface(const ModelSpec& spec, SolutionSurface surface) {
    Oracle o;
    o.spec_ = spec;
    o.surface_ = std::make_shared<const SolutionSurface>(std::move(surface));
    return o;
}

double Oracle::value(std::span<const double> point) const {
    if (surface_) return surface_->interpolate(point);
    return risky_bs_price(point[0], point[1], spec_);
}

std::vector<double> Oracle::values(const Eigen::MatrixXd& points) const {
    std::vector<double> v(static_cast<std::size_t>(points.cols()));
    for (Eigen::Index c = 0; c < points.cols(); ++c)
        v[static_cast<std::size_t>(c)] =
            value(std::span<const double>(points.col(c).data(), static_cast<std::size_t>(points.rows())));
    return v;
}

EvalGrid domain_grid(const DomainBox& domain, const std::vector<int>& steps) {
    if (static_cast<int>(steps.size()) != domain.space_dim() + 1)
        throw ContractError("evaluation steps do not match the domain");
    std::vector<std::vector<double>> axes{linspace(0.0, domain.T, steps[0])};
    for (int k = 0; k < domain.space_dim(); ++k)
        axes.push_back(linspace(domain.axes[k].min, domain.axes[k].max, steps[k + 1]));
    EvalGrid g = tensor_grid(std::move(axes));
    g.description = "domain " + g.description;
    return g;
}

EvalGrid near_strike_grid(const ModelSpec& spec, const std::vector<int>& steps) {
    if (static_cast<int>(steps.size()) != spec.space_dim() + 1)
        throw ContractError("evaluation steps do not match the model");
    std::vector<std::vector<double>> axes{linspace(0.0, spec.domain.T, steps[0])};
    for (int k = 0; k < spec.space_dim(); ++k) {
        if (spec.kind == ModelKind::Heston && k == 1)
            axes.push_back(linspace(spec.domain.axes[1].min, spec.domain.axes[1].max, steps[2]));
        else
            axes.push_back(linspace(0.8 * spec.K, 1.2 * spec.K, steps[k + 1]));
    }
    EvalGrid g = tensor_grid(std::move(axes));
    g.description = "near-strike " + g.description;
    return g;
}

ErrorReport compare(const NetworkParams& params, const Oracle& oracle, const EvalGrid& grid,
                    double clamp_threshold) {
    const auto jets = evaluate_jets(params, grid.points);
    std::vector<double> approx(jets.size());
    for (std::size_t i = 0; i < jets.size(); ++i) approx[i] = jets[i].value;
    const auto ref = oracle.values(grid.points);
    ErrorReport rep = relative_norms(approx, ref, std::span<const double>(grid.weights.data(), ref.size()),
                                     clamp_threshold);
    rep.grid = grid.description;
    return rep;
}

std::vector<NearStrikeRow> near_strike_errors(const NetworkParams& params, const ModelSpec& spec) {
    if (spec.kind != ModelKind::Bs1d) throw ContractError("near-strike Greeks table needs a Bs1d model");
    std::vector<NearStrikeRow> rows;
    const double T = spec.domain.T;
    for (double S : {spec.K * (1.0 - 1.0 / 6.0), spec.K, spec.K * (1.0 + 1.0 / 6.0)}) {
        const double p[2] = {T, S};
        const Jet2 u = input_jet(params, p);
        const BsGreeks g = risky_bs_greeks(T, S, spec);
        auto rel = [](double a, double r) { return std::abs(a - r) / std::abs(r); };
        rows.push_back({S, g.price, g.delta, g.gamma, rel(u.value, g.price), rel(u.d_x[0], g.delta),
                        rel(u.d_xx[0][0], g.gamma)});
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Training

const TrainResult& BestOf::best_result() const {
    if (best < 0) throw NumericError("every training trial failed");
    return *trials[static_cast<std::size_t>(best)].result;
}

BestOf train_best_of(const ModelSpec& spec, const CollocationSet& grid, const Architecture& arch,
                     const TrainConfig& train_cfg, const LossOptions& loss_opts,
                     std::span<const std::uint64_t> seeds, std::ostream* log) {
    LossFunction loss(spec, grid, loss_opts);
    BestOf out;
    for (const std::uint64_t seed : seeds) {
        TrialOutcome t;
        t.seed = seed;
        const auto start = std::chrono::steady_clock::now();
        try {
            TrainConfig cfg = train_cfg;
            cfg.seed = seed;
            t.result = train(loss, init(arch, seed), cfg);
        } catch (const NumericError& e) {
            t.error = e.what();
        }
        t.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (log) {
            *log << "seed " << seed << ": ";
            if (t.result)
                *log << "loss " << t.result->initial_loss.total << " -> " << t.result->final_loss.total << " ("
                     << to_string(t.result->lbfgs_status) << ", " << std::fixed << std::setprecision(1)
                     << t.seconds << " s)" << std::defaultfloat << std::setprecision(6) << '\n';
            else
                *log << "failed: " << t.error << '\n';
        }
        out.trials.push_back(std::move(t));
        const auto& last = out.trials.back();
        if (last.result && (out.best < 0 || last.result->final_loss.total <
                                                out.trials[static_cast<std::size_t>(out.best)].result->final_loss.total))
            out.best = static_cast<int>(out.trials.size()) - 1;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Manifest and files

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

namespace {

std::string hex(std::uint64_t v) {
    std::ostringstream ss;
    ss << std::hex << std::setw(16) << std::setfill('0') << v;
    return ss.str();
}

std::string timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

std::string case_dir(double lambda_B, bool risk_free) {
    if (risk_free) return "risk_free";
    std::ostringstream ss;
    ss << "lambda_B_" << std::fixed << std::setprecision(4) << lambda_B;
    return ss.str();
}

json report_json(const ErrorReport& r) { return json::parse(r.to_json()); }

}  // namespace

void write_manifest(const std::filesystem::path& dir, const ExperimentConfig& config, std::string_view command,
                    std::span<const std::uint64_t> seeds) {
    std::filesystem::create_directories(dir);
    const json m = {{"version", kVersion},
                    {"command", command},
                    {"config_hash", hex(fnv1a(config.canonical))},
                    {"config", json::parse(config.canonical)},
                    {"seeds", std::vector<std::uint64_t>(seeds.begin(), seeds.end())},
                    {"mode", to_string(config.loss.mode)},
                    {"created", timestamp()}};
    write_text(dir / "manifest.json", m.dump(2) + "\n");
}

Eigen::MatrixXd read_points_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read points file " + path.string());
    std::string line;
    std::getline(in, line);  // header
    std::vector<std::vector<double>> rows;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ValidationError(path.string(), "non-numeric cell '" + cell + "'");
            }
        }
        if (width == 0) width = row.size();
        if (row.size() != width || width < 2 || width > 3)
            throw ValidationError(path.string(), "rows must hold t and one or two space coordinates");
        rows.push_back(std::move(row));
    }
    Eigen::MatrixXd p(static_cast<Eigen::Index>(width), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t c = 0; c < rows.size(); ++c)
        for (std::size_t r = 0; r < width; ++r) p(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[c][r];
    return p;
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_train(const ExperimentConfig& config, std::ostream& log) {
    const auto seeds = trial_seeds(config);
    write_manifest(config.out_dir, config, "train", seeds);
    const CollocationSet grid = grid_for(config);
    const Architecture arch = architecture_for(config);
    log << "model " << to_string(config.spec.kind) << ", " << grid.total_points() << " collocation points, "
        << param_count(arch) << " parameters, mode " << to_string(config.loss.mode) << '\n';

    json summary = json::array();
    bool any_failed_case = false;
    for (const double lambda_B : sweep_values(config)) {
        const ModelSpec spec = model_for(config, lambda_B);
        const auto dir = config.out_dir / case_dir(lambda_B, config.risk_free);
        std::filesystem::create_directories(dir);
        log << "case " << dir.filename().string() << '\n';
        const BestOf runs = train_best_of(spec, grid, arch, config.train, config.loss, seeds, &log);

        json trials = json::array();
        for (std::size_t i = 0; i < runs.trials.size(); ++i) {
            const auto& t = runs.trials[i];
            json entry = {{"seed", t.seed}, {"seconds", t.seconds}, {"best", static_cast<int>(i) == runs.best}};
            if (!t.result) {
                entry["error"] = t.error;
                trials.push_back(entry);
                continue;
            }
            const json meta = {{"model", spec_to_json(spec)},
                               {"lambda_B", lambda_B},
                               {"risk_free", config.risk_free},
                               {"seed", t.seed},
                               {"mode", to_string(config.loss.mode)},
                               {"final_loss", t.result->final_loss.total}};
            const auto ck = dir / ("seed_" + std::to_string(t.seed) + ".json");
            save_checkpoint(t.result->params, ck, {meta.dump()});
            auto traj = open_out(dir / ("trajectory_seed_" + std::to_string(t.seed) + ".csv"));
            write_trajectory_csv(traj, t.result->trajectory);
            entry["checkpoint"] = ck.filename().string();
            entry["initial_loss"] = t.result->initial_loss.total;
            entry["final_loss"] = t.result->final_loss.total;
            entry["lbfgs_status"] = to_string(t.result->lbfgs_status);
            trials.push_back(entry);
        }
        json case_report = {{"lambda_B", lambda_B}, {"risk_free", config.risk_free}, {"trials", trials}};
        if (runs.best < 0) {
            any_failed_case = true;
            summary.push_back(case_report);
            continue;
        }
        const NetworkParams& best = runs.best_result().params;
        std::filesystem::copy_file(dir / ("seed_" + std::to_string(runs.trials[runs.best].seed) + ".json"),
                                   dir / "best.json", std::filesystem::copy_options::overwrite_existing);

        const Oracle oracle = Oracle::for_spec(spec, config.fd_steps);
        const EvalGrid eval = domain_grid(spec.domain, config.eval_steps);
        const ErrorReport whole = compare(best, oracle, eval, config.clamp_threshold);
        const ErrorReport near = compare(best, oracle, near_strike_grid(spec, config.eval_steps), config.clamp_threshold);
        case_report["report"] = report_json(whole);
        case_report["report_near_strike"] = report_json(near);
        log << "  log10 rel L1/L2/Linf: " << whole.log10_L1 << " / " << whole.log10_L2 << " / " << whole.log10_Linf
            << '\n';
        if (spec.kind == ModelKind::Bs1d) {
            json rows = json::array();
            for (const auto& r : near_strike_errors(best, spec)) {
                rows.push_back({{"S", r.S}, {"price_err", r.price_err}, {"delta_err", r.delta_err}, {"gamma_err", r.gamma_err}});
                log << "  S=" << r.S << " price " << r.price_err << " delta " << r.delta_err << " gamma "
                    << r.gamma_err << '\n';
            }
            case_report["near_strike_greeks"] = rows;
        }
        auto csv = open_out(dir / "comparison.csv");
        const auto jets = evaluate_jets(best, eval.points);
        std::vector<double> approx(jets.size());
        for (std::size_t i = 0; i < jets.size(); ++i) approx[i] = jets[i].value;
        std::vector<std::string> names;
        for (const auto& a : spec.domain.axes) names.push_back(a.name);
        write_error_csv(csv, eval.points, names, oracle.values(eval.points), approx, config.clamp_threshold);
        write_text(dir / "report.json", case_report.dump(2) + "\n");
        summary.push_back(case_report);
    }
    write_text(config.out_dir / "summary.json", summary.dump(2) + "\n");
    return any_failed_case ? 2 : 0;
}

int cmd_fd(const ExperimentConfig& config, std::ostream& log) {
    write_manifest(config.out_dir, config, "fd", {});
    for (const double lambda_B : sweep_values(config)) {
        const ModelSpec spec = model_for(config, lambda_B);
        if (spec.kind == ModelKind::Heston) log << "feller=" << (feller_check(spec) ? "true" : "false") << '\n';
        const auto& s = config.fd_steps;
        const SolutionSurface surf =
            spec.space_dim() == 1 ? fd_solve_1d(spec, s[1], s[0]) : fd_solve_2d(spec, s[1], s[2], s[0]);
        const auto base = config.out_dir / ("surface_" + case_dir(lambda_B, config.risk_free));
        write_surface(surf, base);
        log << "wrote " << base.string() << ".csv (" << surf.values.size() << " values, fixed-point iterations <= "
            << surf.max_fixed_point_iterations << (surf.converged ? "" : ", NOT converged") << ")\n";
        if (spec.kind == ModelKind::Bs1d) {
            const EvalGrid g = tensor_grid({surf.t, surf.axes[0]});
            const Oracle exact = Oracle::for_spec(spec, {});
            const ErrorReport r = relative_norms(std::vector<double>(surf.values), exact.values(g.points),
                                                 std::span<const double>(g.weights.data(), surf.values.size()));
            log << "rel L2 vs closed form: " << r.rel_L2 << '\n';
        }
        if (!surf.converged) return 2;
    }
    return 0;
}

namespace {

struct CheckpointInfo {
    NetworkParams params;
    json meta;
};

CheckpointInfo read_checkpoint(const std::filesystem::path& path) {
    CheckpointMetadata md;
    NetworkParams p = load_checkpoint(path, &md);
    json meta = json::object();
    if (!md.json.empty()) meta = json::parse(md.json);
    return {std::move(p), std::move(meta)};
}

}  // namespace

int cmd_greeks(const std::filesystem::path& checkpoint, const std::filesystem::path& points_file,
               const std::filesystem::path& out_path, std::ostream& log) {
    const CheckpointInfo ck = read_checkpoint(checkpoint);
    const Eigen::MatrixXd points = read_points_csv(points_file);
    const int d = ck.params.architecture().input_dim() - 1;
    if (points.rows() != d + 1)
        throw ValidationError("points", "dimension " + std::to_string(points.rows() - 1) +
                                            " does not match the network's " + std::to_string(d));
    std::string kind = d == 1 ? "bs1d" : "basket_average";
    if (ck.meta.contains("model")) kind = ck.meta["model"].value("kind", kind);
    std::vector<std::string> names = d == 1 ? std::vector<std::string>{"S"} : std::vector<std::string>{"x1", "x2"};
    if (ck.meta.contains("model") && ck.meta["model"].contains("axes")) {
        names.clear();
        for (const auto& a : ck.meta["model"]["axes"]) names.push_back(a.value("name", "x"));
    }
    const bool heston = kind == "heston";
    const auto jets = evaluate_jets(ck.params, points);

    std::filesystem::create_directories(out_path.parent_path().empty() ? "." : out_path.parent_path());
    auto out = open_out(out_path);
    out.precision(12);
    out << "t";
    for (const auto& n : names) out << ',' << n;
    out << ",price";
    if (d == 1) out << ",delta,gamma";
    else if (heston) out << ",delta,gamma,vega";
    else out << ",delta1,delta2,gamma11,gamma22,gamma12";
    out << '\n';
    for (Eigen::Index c = 0; c < points.cols(); ++c) {
        const Jet2& u = jets[static_cast<std::size_t>(c)];
        for (Eigen::Index r = 0; r < points.rows(); ++r) out << (r ? "," : "") << points(r, c);
        out << ',' << u.value;
        if (d == 1) out << ',' << u.d_x[0] << ',' << u.d_xx[0][0];
        else if (heston) out << ',' << u.d_x[0] << ',' << u.d_xx[0][0] << ',' << u.d_x[1];
        else out << ',' << u.d_x[0] << ',' << u.d_x[1] << ',' << u.d_xx[0][0] << ',' << u.d_xx[1][1] << ',' << u.d_xx[0][1];
        out << '\n';
    }
    log << "wrote " << points.cols() << " rows to " << out_path.string() << '\n';
    return 0;
}

int cmd_compare(const std::filesystem::path& checkpoint, const ExperimentConfig* config,
                const std::optional<std::filesystem::path>& surface, const std::filesystem::path& out_dir,
                std::ostream& log) {
    const CheckpointInfo ck = read_checkpoint(checkpoint);
    const std::string ck_kind = ck.meta.contains("model") ? ck.meta["model"].value("kind", "") : "";
    std::optional<Oracle> oracle;
    std::vector<int> steps;
    ModelSpec spec;
    if (surface) {
        SolutionSurface s = read_surface(*surface);
        if (!ck_kind.empty() && s.model != ck_kind)
            throw ValidationError("surface", "model '" + s.model + "' does not match checkpoint model '" + ck_kind + "'");
        if (config) spec = model_for(*config, ck.meta.value("lambda_B", config->spec.xva.lambda_B));
        std::vector<std::vector<double>> axes{s.t};
        axes.insert(axes.end(), s.axes.begin(), s.axes.end());
        const EvalGrid g = tensor_grid(axes);
        if (ck.params.architecture().input_dim() != s.space_dim() + 1)
            throw ValidationError("surface", "dimension does not match the checkpoint");
        const auto jets = evaluate_jets(ck.params, g.points);
        std::vector<double> approx(jets.size());
        for (std::size_t i = 0; i < jets.size(); ++i) approx[i] = jets[i].value;
        const ErrorReport rep = relative_norms(approx, s.values, std::span<const double>(g.weights.data(), approx.size()));
        std::filesystem::create_directories(out_dir);
        auto csv = open_out(out_dir / "comparison.csv");
        write_error_csv(csv, g.points, s.axis_names, s.values, approx);
        write_text(out_dir / "report.json", rep.to_json() + "\n");
        log << "log10 rel L1/L2/Linf: " << rep.log10_L1 << " / " << rep.log10_L2 << " / " << rep.log10_Linf << '\n';
        return 0;
    }
    if (!config) throw ValidationError("--config", "compare needs a config or a surface");
    if (!ck_kind.empty() && ck_kind != to_string(config->spec.kind))
        throw ValidationError("model.kind", "config model '" + std::string(to_string(config->spec.kind)) +
                                                "' does not match checkpoint model '" + ck_kind + "'");
    if (ck.params.architecture().input_dim() != config->spec.space_dim() + 1)
        throw ValidationError("model.kind", "checkpoint dimension does not match the config");
    spec = model_for(*config, ck.meta.value("lambda_B", config->spec.xva.lambda_B));
    const Oracle o = Oracle::for_spec(spec, config->fd_steps);
    const EvalGrid g = domain_grid(spec.domain, config->eval_steps);
    const ErrorReport rep = compare(ck.params, o, g, config->clamp_threshold);
    const auto jets = evaluate_jets(ck.params, g.points);
    std::vector<double> approx(jets.size());
    for (std::size_t i = 0; i < jets.size(); ++i) approx[i] = jets[i].value;
    std::vector<std::string> names;
    for (const auto& a : spec.domain.axes) names.push_back(a.name);
    std::filesystem::create_directories(out_dir);
    auto csv = open_out(out_dir / "comparison.csv");
    write_error_csv(csv, g.points, names, o.values(g.points), approx, config->clamp_threshold);
    write_text(out_dir / "report.json", rep.to_json() + "\n");
    log << "log10 rel L1/L2/Linf: " << rep.log10_L1 << " / " << rep.log10_L2 << " / " << rep.log10_Linf << '\n';
    return 0;
}

int cmd_price(const ExperimentConfig& config, const std::optional<std::filesystem::path>& points,
              const std::filesystem::path& out_path, std::ostream& log) {
    if (config.spec.kind != ModelKind::Bs1d)
        throw ValidationError("model.kind", "closed-form prices exist only for bs1d");
    Eigen::MatrixXd p;
    if (points) {
        p = read_points_csv(*points);
        if (p.rows() != 2) throw ValidationError("points", "bs1d points are t,S");
    } else {
        p = domain_grid(config.spec.domain, config.steps).points;
    }
    std::filesystem::create_directories(out_path.parent_path().empty() ? "." : out_path.parent_path());
    auto out = open_out(out_path);
    out.precision(12);
    out << "lambda_B,t,S,price,delta,gamma\n";
    for (const double lambda_B : sweep_values(config)) {
        const ModelSpec spec = model_for(config, lambda_B);
        for (Eigen::Index c = 0; c < p.cols(); ++c) {
            const BsGreeks g = risky_bs_greeks(p(0, c), p(1, c), spec);
            out << lambda_B << ',' << p(0, c) << ',' << p(1, c) << ',' << g.price << ',' << g.delta << ','
                << g.gamma << '\n';
        }
    }
    log << "wrote " << out_path.string() << '\n';
    return 0;
}

}  // namespace xvapinn
