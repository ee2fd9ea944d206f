#include "xvapinn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include "xvapinn/errors.hpp"

namespace xvapinn {

void TrainConfig::validate() const {
    if (adam_steps < 0 || lbfgs_steps < 0) throw ContractError("step counts must be >= 0");
    if (!(lr0 > 0.0) || !std::isfinite(lr0)) throw ContractError("lr0 must be > 0");
    if (decay && decay->a <= 0) throw ContractError("decay a must be > 0");
    if (decay && (!(decay->delta >= 0.0) || !std::isfinite(decay->delta)))
        throw ContractError("decay delta must be >= 0");
    if (lbfgs_memory < 1) throw ContractError("lbfgs_memory must be >= 1");
    if (log_every < 1) throw ContractError("log_every must be >= 1");
}

double lr_at(const TrainConfig& config, long k) {
    if (!config.decay) return config.lr0;
    return config.lr0 / (1.0 + config.decay->delta * static_cast<double>(k) / static_cast<double>(config.decay->a));
}

std::string_view to_string(OptimStatus s) {
    switch (s) {
        case OptimStatus::Converged: return "converged";
        case OptimStatus::StepLimit: return "step-limit";
        case OptimStatus::LineSearchFailure: return "line-search-failure";
        case OptimStatus::NonFinite: return "non-finite";
    }
    return "?";
}

namespace {

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace

OptimResult adam_minimize(const ObjectiveFn& f, std::vector<double> x0, const TrainConfig& config,
                          const StepCallback& callback, const AdamSettings& s) {
    config.validate();
    const std::size_t n = x0.size();
    OptimResult res;
    res.x = std::move(x0);
    std::vector<double> g(n), m(n, 0.0), v(n, 0.0), last_good = res.x;
    double b1t = 1.0, b2t = 1.0;
    for (long k = 0; k < config.adam_steps; ++k) {
        const double loss = f(res.x, g);
        if (!std::isfinite(loss) || !all_finite(g)) {
            res.x = last_good;
            res.status = OptimStatus::NonFinite;
            return res;
        }
        last_good = res.x;
        res.loss = loss;
        const double lr = lr_at(config, k);
        b1t *= s.beta1;
        b2t *= s.beta2;
        for (std::size_t i = 0; i < n; ++i) {
            m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
            v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g[i] * g[i];
            const double mh = m[i] / (1.0 - b1t);
            const double vh = v[i] / (1.0 - b2t);
            res.x[i] -= lr * mh / (std::sqrt(vh) + s.eps);
        }
        res.steps = k + 1;
        if (callback && !callback(k, res.x, loss)) break;
    }
    res.status = OptimStatus::StepLimit;
    return res;
}

namespace {

struct Trial {
    double alpha = 0.0;
    double f = 0.0;
    double dphi = 0.0;
    std::vector<double> x, g;
};

// Minimiser of the cubic through (a, fa, da) and (b, fb, db), kept away from
// the ends of the bracket; bisection when the cubic is degenerate.
double cubic_step(const Trial& lo, const Trial& hi) {
    const double a = lo.alpha, b = hi.alpha;
    const double d1 = lo.dphi + hi.dphi - 3.0 * (lo.f - hi.f) / (a - b);
    const double disc = d1 * d1 - lo.dphi * hi.dphi;
    double t = 0.5 * (a + b);
    if (disc >= 0.0 && std::isfinite(hi.f)) {
        const double d2 = std::copysign(std::sqrt(disc), b - a);
        const double c = b - (b - a) * (hi.dphi + d2 - d1) / (hi.dphi - lo.dphi + 2.0 * d2);
        if (std::isfinite(c)) t = c;
    }
    const double left = std::min(a, b), right = std::max(a, b), w = right - left;
    return std::clamp(t, left + 0.1 * w, right - 0.1 * w);
}

class LineSearch {
public:
    LineSearch(const ObjectiveFn& f, std::span<const double> x, std::span<const double> p, double f0,
               double dphi0, const LbfgsSettings& s)
        : f_(f), x_(x), p_(p), f0_(f0), dphi0_(dphi0), s_(s) {}

    // Strong-Wolfe point, or nullopt. `best` then holds the lowest trial.
    std::optional<Trial> run(double alpha0) {
        Trial prev{0.0, f0_, dphi0_, {}, {}};
        double alpha = alpha0;
        for (int i = 0; i < s_.max_line_search; ++i) {
            Trial cur = eval(alpha);
            if (!armijo(cur) || (i > 0 && cur.f >= prev.f)) return zoom(prev, cur);
            if (std::abs(cur.dphi) <= -s_.c2 * dphi0_) return cur;
            if (cur.dphi >= 0.0) return zoom(cur, prev);
            prev = std::move(cur);
            alpha *= 2.0;
        }
        return std::nullopt;
    }

    const std::optional<Trial>& best() const { return best_; }

private:
    bool armijo(const Trial& t) const {
        return std::isfinite(t.f) && t.f <= f0_ + s_.c1 * t.alpha * dphi0_;
    }

    Trial eval(double alpha) {
        Trial t;
        t.alpha = alpha;
        t.x.resize(x_.size());
        t.g.resize(x_.size());
        for (std::size_t i = 0; i < x_.size(); ++i) t.x[i] = x_[i] + alpha * p_[i];
        t.f = f_(t.x, t.g);
        if (!std::isfinite(t.f) || !all_finite(t.g)) {
            t.f = std::numeric_limits<double>::infinity();
            t.dphi = 0.0;
        } else {
            t.dphi = dot(t.g, p_);
        }
        ++evals_;
        if (armijo(t) && (!best_ || t.f < best_->f)) best_ = t;
        return t;
    }

    std::optional<Trial> zoom(Trial lo, Trial hi) {
        for (int i = 0; i < s_.max_line_search; ++i) {
            const double alpha = cubic_step(lo, hi);
            if (std::abs(hi.alpha - lo.alpha) < 1e-16 * std::max(1.0, std::abs(lo.alpha))) break;
            Trial cur = eval(alpha);
            if (!armijo(cur) || cur.f >= lo.f) {
                hi = std::move(cur);
                continue;
            }
            if (std::abs(cur.dphi) <= -s_.c2 * dphi0_) return cur;
            if (cur.dphi * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
            lo = std::move(cur);
        }
        return std::nullopt;
    }

    const ObjectiveFn& f_;
    std::span<const double> x_, p_;
    double f0_, dphi0_;
    const LbfgsSettings& s_;
    std::optional<Trial> best_;
    int evals_ = 0;
};

}  // namespace

OptimResult lbfgs_minimize(const ObjectiveFn& f, std::vector<double> x0, const TrainConfig& config,
                           const StepCallback& callback, const LbfgsSettings& s) {
    config.validate();
    const std::size_t n = x0.size();
    OptimResult res;
    res.x = std::move(x0);
    std::vector<double> g(n);
    res.loss = f(res.x, g);
    if (!std::isfinite(res.loss) || !all_finite(g)) {
        res.status = OptimStatus::NonFinite;
        return res;
    }

    std::deque<std::vector<double>> S, Y;
    std::deque<double> rho;
    std::vector<double> p(n), q(n), alpha_hist;
    res.status = OptimStatus::StepLimit;
    bool retried = false;
    for (long k = 0; k < config.lbfgs_steps;) {
        if (norm(g) < s.gradient_tol) {
            res.status = OptimStatus::Converged;
            return res;
        }
        // two-loop recursion
        q = g;
        alpha_hist.assign(S.size(), 0.0);
        for (std::size_t i = S.size(); i-- > 0;) {
            alpha_hist[i] = rho[i] * dot(S[i], q);
            for (std::size_t j = 0; j < n; ++j) q[j] -= alpha_hist[i] * Y[i][j];
        }
        double gamma = 1.0;
        if (!S.empty()) gamma = dot(S.back(), Y.back()) / dot(Y.back(), Y.back());
        for (std::size_t j = 0; j < n; ++j) q[j] *= gamma;
        for (std::size_t i = 0; i < S.size(); ++i) {
            const double beta = rho[i] * dot(Y[i], q);
            for (std::size_t j = 0; j < n; ++j) q[j] += S[i][j] * (alpha_hist[i] - beta);
        }
        for (std::size_t j = 0; j < n; ++j) p[j] = -q[j];
        double dphi0 = dot(g, p);
        if (!(dphi0 < 0.0)) {  // not a descent direction: restart from steepest descent
            S.clear();
            Y.clear();
            rho.clear();
            for (std::size_t j = 0; j < n; ++j) p[j] = -g[j];
            dphi0 = dot(g, p);
        }
        const double alpha0 = S.empty() ? std::min(1.0, 1.0 / norm(g)) : 1.0;

        LineSearch ls(f, res.x, p, res.loss, dphi0, s);
        std::optional<Trial> accepted = ls.run(alpha0);
        if (!accepted) accepted = ls.best();  // sufficient decrease without curvature
        if (!accepted) {
            if (!S.empty() && !retried) {  // drop the curvature history once
                S.clear();
                Y.clear();
                rho.clear();
                retried = true;
                continue;
            }
            res.status = OptimStatus::LineSearchFailure;
            return res;
        }
        retried = false;

        std::vector<double> sv(n), yv(n);
        for (std::size_t j = 0; j < n; ++j) {
            sv[j] = accepted->x[j] - res.x[j];
            yv[j] = accepted->g[j] - g[j];
        }
        const double sy = dot(sv, yv);
        if (sy > 1e-12 * norm(sv) * norm(yv)) {
            S.push_back(std::move(sv));
            Y.push_back(std::move(yv));
            rho.push_back(1.0 / sy);
            if (static_cast<int>(S.size()) > config.lbfgs_memory) {
                S.pop_front();
                Y.pop_front();
                rho.pop_front();
            }
        }
        const bool stalled = accepted->f == res.loss;
        res.x = std::move(accepted->x);
        g = std::move(accepted->g);
        res.loss = accepted->f;
        res.steps = ++k;
        if (callback && !callback(k, res.x, res.loss)) break;
        if (stalled && norm(g) < 1e-8) {
            res.status = OptimStatus::Converged;
            return res;
        }
    }
    if (norm(g) < s.gradient_tol) res.status = OptimStatus::Converged;
    return res;
}

TrainResult train(LossFunction& loss, const NetworkParams& params, const TrainConfig& config) {
    config.validate();
    LossBreakdown last;
    const ObjectiveFn objective = [&](std::span<const double> x, std::span<double> grad) {
        ParamGradient g;
        last = loss.assemble_with_gradient(params.with_flat(x), g);
        std::copy(g.begin(), g.end(), grad.begin());
        return last.total;
    };

    TrainResult out{params, loss.assemble(params), {}, {}, {}, OptimStatus::StepLimit, OptimStatus::StepLimit};

    const StepCallback adam_log = [&](long k, std::span<const double>, double) {
        if (k % config.log_every == 0) out.trajectory.push_back({k, last, lr_at(config, k)});
        return true;
    };
    const OptimResult adam = adam_minimize(objective, params.flatten(), config, adam_log);
    out.adam_status = adam.status;
    NetworkParams current = params.with_flat(adam.x);
    out.adam_loss = loss.assemble(current);
    out.trajectory.push_back({adam.steps, out.adam_loss, 0.0});

    const long offset = adam.steps;
    // `last` may belong to a rejected line-search trial; re-evaluate at the accepted point
    const StepCallback lbfgs_log = [&](long k, std::span<const double> x, double) {
        if (k % config.log_every == 0) out.trajectory.push_back({offset + k, loss.assemble(params.with_flat(x)), 0.0});
        return true;
    };
    if (config.lbfgs_steps > 0) {
        const OptimResult lb = lbfgs_minimize(objective, adam.x, config, lbfgs_log);
        out.lbfgs_status = lb.status;
        current = params.with_flat(lb.x);
        out.final_loss = loss.assemble(current);
        if (lb.steps % config.log_every != 0) out.trajectory.push_back({offset + lb.steps, out.final_loss, 0.0});
    } else {
        out.final_loss = out.adam_loss;
    }
    out.params = std::move(current);
    return out;
}

}  // namespace xvapinn
