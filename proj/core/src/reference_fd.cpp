// Crank-Nicolson solvers for the reference surfaces. Time runs forward in
// time to maturity from the payoff; the source term is treated by fixed-point
// iteration inside each step.

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "xvapinn/errors.hpp"
#include "xvapinn/reference.hpp"

namespace xvapinn {

namespace {

std::vector<double> uniform(double lo, double hi, int n) {
    std::vector<double> g(n + 1);
    const double h = (hi - lo) / n;
    for (int i = 0; i <= n; ++i) g[i] = i == n ? hi : lo + i * h;
    return g;
}

double initial_value(const ModelSpec& spec, const FdOptions& opts, std::span<const double> x) {
    return opts.initial ? opts.initial(x) : payoff(spec, x);
}

void check_resolution(int n, const char* what) {
    if (n < 4) throw ContractError(std::string(what) + " must be >= 4");
}

void check_origin(const ModelSpec& spec) {
    for (const auto& a : spec.domain.axes)
        if (a.min != 0.0) throw ContractError("FD solvers need every space axis to start at 0");
}

// Solves the tridiagonal system a_i x_{i-1} + b_i x_i + c_i x_{i+1} = d_i in place.
void thomas(const std::vector<double>& a, const std::vector<double>& b, const std::vector<double>& c,
            std::vector<double>& d) {
    const std::size_t n = d.size();
    std::vector<double> cp(n);
    double beta = b[0];
    cp[0] = c[0] / beta;
    d[0] /= beta;
    for (std::size_t i = 1; i < n; ++i) {
        beta = b[i] - a[i] * cp[i - 1];
        cp[i] = c[i] / beta;
        d[i] = (d[i] - a[i] * d[i - 1]) / beta;
    }
    for (std::size_t i = n - 1; i-- > 0;) d[i] -= cp[i] * d[i + 1];
}

// (theta, dt) of every step: Rannacher half steps first, then Crank-Nicolson.
struct SubStep {
    double theta;
    double dt;
};

std::vector<std::vector<SubStep>> schedule(int n_t, double k, int rannacher) {
    std::vector<std::vector<SubStep>> s(n_t);
    const int damped = std::min(n_t, rannacher / 2);
    for (int n = 0; n < n_t; ++n) {
        if (n < damped)
            s[n] = {{1.0, 0.5 * k}, {1.0, 0.5 * k}};
        else
            s[n] = {{0.5, k}};
    }
    return s;
}

}  // namespace

SolutionSurface fd_solve_1d(const ModelSpec& spec, int n_s, int n_t, const FdOptions& opts) {
    spec.validate();
    if (spec.kind != ModelKind::Bs1d) throw ContractError("fd_solve_1d needs a Bs1d spec");
    check_resolution(n_s, "N_S");
    check_resolution(n_t, "N_T");
    check_origin(spec);

    const auto& mk = spec.bs();
    const XvaParams& xva = spec.xva;
    SolutionSurface out;
    out.model = std::string(to_string(spec.kind));
    out.scheme = "crank-nicolson";
    out.fixed_point_tol = opts.fixed_point_tol;
    out.t = uniform(0.0, spec.domain.T, n_t);
    out.axes = {uniform(0.0, spec.domain.axes[0].max, n_s)};
    out.axis_names = {spec.domain.axes[0].name};
    const auto& S = out.axes[0];
    const double h = S[1] - S[0];
    const int N = n_s;

    // L = sigma^2 S^2/2 d2/dS2 + r_R S d/dS - r on rows 1..N-1
    std::vector<double> lo(N + 1, 0.0), di(N + 1, 0.0), up(N + 1, 0.0);
    for (int j = 1; j < N; ++j) {
        const double a = 0.5 * mk.sigma * mk.sigma * S[j] * S[j] / (h * h);
        const double b = mk.r_R * S[j] / (2.0 * h);
        lo[j] = a - b;
        di[j] = -2.0 * a - xva.r;
        up[j] = a + b;
    }
    // V_N = 2 V_{N-1} - V_{N-2} folded into row N-1
    lo[N - 1] -= up[N - 1];
    di[N - 1] += 2.0 * up[N - 1];
    up[N - 1] = 0.0;

    std::vector<double> V(N + 1);
    for (int j = 0; j <= N; ++j) V[j] = initial_value(spec, opts, std::span<const double>(&S[j], 1));
    out.values.reserve(static_cast<std::size_t>(n_t + 1) * (N + 1));
    out.values.insert(out.values.end(), V.begin(), V.end());

    // S = 0 carries the ODE u_t + r u + f(u) = 0, solved in closed form.
    const double u0 = V[0];
    const double slope = u0 >= 0.0 ? xva.positive_slope() : xva.negative_slope();
    auto left_value = [&](double t) {
        const double point[2] = {t, 0.0};
        return opts.initial ? u0 * std::exp(-(xva.r + slope) * t)
                            : dirichlet_value(spec, RegionId::lower(0), point);
    };

    const std::size_t m = static_cast<std::size_t>(N - 1);
    std::vector<double> a(m), b(m), c(m), explicit_part(m), rhs(m), W(N + 1);
    double t = 0.0;
    for (const auto& step : schedule(n_t, out.t[1] - out.t[0], opts.rannacher_steps)) {
        for (const auto& sub : step) {
            const double th = sub.theta, dt = sub.dt;
            for (std::size_t i = 0; i < m; ++i) {
                const int j = static_cast<int>(i) + 1;
                const double LV = lo[j] * V[j - 1] + di[j] * V[j] + up[j] * V[j + 1];
                explicit_part[i] = V[j] + (1.0 - th) * dt * (LV - source_term(V[j], xva));
                a[i] = -th * dt * lo[j];
                b[i] = 1.0 - th * dt * di[j];
                c[i] = -th * dt * up[j];
            }
            // row N-1 already holds the extrapolated V_N, so up[N-1] = 0 above
            const double v0 = left_value(t + dt);
            W = V;
            int iters = 0;
            bool ok = false;
            while (iters < opts.max_iters) {
                ++iters;
                for (std::size_t i = 0; i < m; ++i)
                    rhs[i] = explicit_part[i] - th * dt * source_term(W[i + 1], xva);
                rhs[0] -= a[0] * v0;
                thomas(a, b, c, rhs);
                double diff = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    diff = std::max(diff, std::abs(rhs[i] - W[i + 1]));
                    W[i + 1] = rhs[i];
                }
                W[0] = v0;
                W[N] = 2.0 * W[N - 1] - W[N - 2];
                if (!std::isfinite(diff)) throw NumericError("fd_solve_1d: non-finite iterate");
                if (diff < opts.fixed_point_tol) {
                    ok = true;
                    break;
                }
            }
            out.converged = out.converged && ok;
            out.max_fixed_point_iterations = std::max(out.max_fixed_point_iterations, iters);
            V = W;
            t += dt;
        }
        out.values.insert(out.values.end(), V.begin(), V.end());
    }
    return out;
}

namespace {

enum class RowKind { Pde, Dirichlet, Algebraic };

// Space discretisation of a 2D problem: L on PDE rows, constraint rows for
// the rest. Algebraic rows have a zero right-hand side.
struct Discretisation2d {
    std::vector<RowKind> kind;
    std::vector<int> dirichlet_axis;  // face providing the value on Dirichlet rows
    std::vector<Eigen::Triplet<double>> L;
    std::vector<Eigen::Triplet<double>> alg;
};

class Grid2d {
public:
    Grid2d(int n1, int n2) : n1_(n1), n2_(n2) {}
    int operator()(int j, int k) const { return j * (n2_ + 1) + k; }
    int size() const { return (n1_ + 1) * (n2_ + 1); }

private:
    int n1_, n2_;
};

Discretisation2d basket_discretisation(const ModelSpec& spec, const std::vector<double>& x1,
                                       const std::vector<double>& x2) {
    const auto& b = spec.basket();
    const int n1 = static_cast<int>(x1.size()) - 1, n2 = static_cast<int>(x2.size()) - 1;
    const double h1 = x1[1] - x1[0], h2 = x2[1] - x2[0];
    const Grid2d id(n1, n2);
    Discretisation2d d;
    d.kind.assign(id.size(), RowKind::Pde);
    d.dirichlet_axis.assign(id.size(), -1);
    for (int j = 0; j <= n1; ++j)
        for (int k = 0; k <= n2; ++k) {
            const int row = id(j, k);
            if (j == 0 || k == 0) {
                d.kind[row] = RowKind::Dirichlet;
                d.dirichlet_axis[row] = j == 0 ? 0 : 1;
            } else if (j == n1) {
                d.kind[row] = RowKind::Algebraic;
                d.alg.emplace_back(row, id(j, k), 1.0);
                d.alg.emplace_back(row, id(j - 1, k), -2.0);
                d.alg.emplace_back(row, id(j - 2, k), 1.0);
            } else if (k == n2) {
                d.kind[row] = RowKind::Algebraic;
                d.alg.emplace_back(row, id(j, k), 1.0);
                d.alg.emplace_back(row, id(j, k - 1), -2.0);
                d.alg.emplace_back(row, id(j, k - 2), 1.0);
            } else {
                const double S1 = x1[j], S2 = x2[k];
                const double a1 = 0.5 * b.sigma1 * b.sigma1 * S1 * S1 / (h1 * h1);
                const double a2 = 0.5 * b.sigma2 * b.sigma2 * S2 * S2 / (h2 * h2);
                const double c1 = b.r_R1 * S1 / (2.0 * h1);
                const double c2 = b.r_R2 * S2 / (2.0 * h2);
                const double m = b.rho * b.sigma1 * b.sigma2 * S1 * S2 / (4.0 * h1 * h2);
                d.L.emplace_back(row, id(j - 1, k), a1 - c1);
                d.L.emplace_back(row, id(j + 1, k), a1 + c1);
                d.L.emplace_back(row, id(j, k - 1), a2 - c2);
                d.L.emplace_back(row, id(j, k + 1), a2 + c2);
                d.L.emplace_back(row, id(j, k), -2.0 * a1 - 2.0 * a2 - spec.xva.r);
                d.L.emplace_back(row, id(j + 1, k + 1), m);
                d.L.emplace_back(row, id(j + 1, k - 1), -m);
                d.L.emplace_back(row, id(j - 1, k + 1), -m);
                d.L.emplace_back(row, id(j - 1, k - 1), m);
            }
        }
    return d;
}

Discretisation2d heston_discretisation(const ModelSpec& spec, const std::vector<double>& x1,
                                       const std::vector<double>& x2) {
    const auto& h = spec.heston();
    const int n1 = static_cast<int>(x1.size()) - 1, n2 = static_cast<int>(x2.size()) - 1;
    const double h1 = x1[1] - x1[0], h2 = x2[1] - x2[0];
    const double r = spec.xva.r;
    const Grid2d id(n1, n2);
    Discretisation2d d;
    d.kind.assign(id.size(), RowKind::Pde);
    d.dirichlet_axis.assign(id.size(), -1);
    for (int j = 0; j <= n1; ++j)
        for (int k = 0; k <= n2; ++k) {
            const int row = id(j, k);
            const double S = x1[j], nu = x2[k];
            if (j == n1) {  // linearity in S
                d.kind[row] = RowKind::Algebraic;
                d.alg.emplace_back(row, id(j, k), 1.0);
                d.alg.emplace_back(row, id(j - 1, k), -2.0);
                d.alg.emplace_back(row, id(j - 2, k), 1.0);
            } else if (k == n2) {  // d/dnu = 0, second-order one-sided
                d.kind[row] = RowKind::Algebraic;
                d.alg.emplace_back(row, id(j, k), 3.0);
                d.alg.emplace_back(row, id(j, k - 1), -4.0);
                d.alg.emplace_back(row, id(j, k - 2), 1.0);
            } else if (k == 0) {
                // nu = 0: u_t = r_R S u_S + kappa eta u_nu - r u - f, forward difference in nu
                const double q = h.kappa * h.eta / (2.0 * h2);
                d.L.emplace_back(row, id(j, 0), -3.0 * q - r);
                d.L.emplace_back(row, id(j, 1), 4.0 * q);
                d.L.emplace_back(row, id(j, 2), -q);
                if (j > 0) {
                    const double c1 = h.r_R * S / (2.0 * h1);
                    d.L.emplace_back(row, id(j - 1, k), -c1);
                    d.L.emplace_back(row, id(j + 1, k), c1);
                }
            } else {
                const double a2 = 0.5 * h.sigma * h.sigma * nu / (h2 * h2);
                const double c2 = h.kappa * (h.eta - nu) / (2.0 * h2);
                d.L.emplace_back(row, id(j, k - 1), a2 - c2);
                d.L.emplace_back(row, id(j, k + 1), a2 + c2);
                double diag = -2.0 * a2 - r;
                if (j > 0) {
                    const double a1 = 0.5 * S * S * nu / (h1 * h1);
                    const double c1 = h.r_R * S / (2.0 * h1);
                    const double m = h.rho * h.sigma * S * nu / (4.0 * h1 * h2);
                    d.L.emplace_back(row, id(j - 1, k), a1 - c1);
                    d.L.emplace_back(row, id(j + 1, k), a1 + c1);
                    diag -= 2.0 * a1;
                    d.L.emplace_back(row, id(j + 1, k + 1), m);
                    d.L.emplace_back(row, id(j + 1, k - 1), -m);
                    d.L.emplace_back(row, id(j - 1, k + 1), -m);
                    d.L.emplace_back(row, id(j - 1, k - 1), m);
                }
                d.L.emplace_back(row, id(j, k), diag);
            }
        }
    return d;
}

}  // namespace

SolutionSurface fd_solve_2d(const ModelSpec& spec, int n_1, int n_2, int n_t, const FdOptions& opts) {
    spec.validate();
    if (spec.space_dim() != 2) throw ContractError("fd_solve_2d needs a two-dimensional spec");
    check_resolution(n_1, "N_1");
    check_resolution(n_2, "N_2");
    check_resolution(n_t, "N_T");
    check_origin(spec);

    const XvaParams& xva = spec.xva;
    SolutionSurface out;
    out.model = std::string(to_string(spec.kind));
    out.scheme = "crank-nicolson";
    out.fixed_point_tol = opts.fixed_point_tol;
    out.t = uniform(0.0, spec.domain.T, n_t);
    out.axes = {uniform(0.0, spec.domain.axes[0].max, n_1), uniform(0.0, spec.domain.axes[1].max, n_2)};
    out.axis_names = {spec.domain.axes[0].name, spec.domain.axes[1].name};
    const auto& x1 = out.axes[0];
    const auto& x2 = out.axes[1];

    const Discretisation2d disc = spec.kind == ModelKind::Heston
                                      ? heston_discretisation(spec, x1, x2)
                                      : basket_discretisation(spec, x1, x2);
    const Grid2d id(n_1, n_2);
    const int M = id.size();
    Eigen::SparseMatrix<double> L(M, M);
    L.setFromTriplets(disc.L.begin(), disc.L.end());

    Eigen::VectorXd V(M);
    for (int j = 0; j <= n_1; ++j)
        for (int k = 0; k <= n_2; ++k) {
            const double x[2] = {x1[j], x2[k]};
            V(id(j, k)) = initial_value(spec, opts, x);
        }
    out.values.reserve(static_cast<std::size_t>(n_t + 1) * M);
    out.values.insert(out.values.end(), V.data(), V.data() + M);

    // Dirichlet rows follow the closed form unless a custom initial condition
    // is given, in which case the face is frozen at its initial value times
    // the discount of the S = 0 ODE.
    auto boundary_value = [&](int row, int j, int k, double t) {
        const double point[3] = {t, x1[j], x2[k]};
        if (!opts.initial)
            return dirichlet_value(spec, RegionId::lower(disc.dirichlet_axis[row]), point);
        const double u0 = out.values[static_cast<std::size_t>(row)];
        const double slope = u0 >= 0.0 ? xva.positive_slope() : xva.negative_slope();
        return u0 * std::exp(-(xva.r + slope) * t);
    };

    struct Factorised {
        double theta = -1.0, dt = -1.0;
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    };
    std::vector<std::unique_ptr<Factorised>> cache;
    auto factorise = [&](double th, double dt) -> Factorised& {
        for (auto& f : cache)
            if (f->theta == th && f->dt == dt) return *f;
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(disc.L.size() + disc.alg.size() + M);
        for (const auto& e : disc.L) trip.emplace_back(e.row(), e.col(), -th * dt * e.value());
        for (const auto& e : disc.alg) trip.push_back(e);
        for (int i = 0; i < M; ++i)
            if (disc.kind[i] != RowKind::Algebraic) trip.emplace_back(i, i, 1.0);
        Eigen::SparseMatrix<double> A(M, M);
        A.setFromTriplets(trip.begin(), trip.end());
        A.makeCompressed();
        auto f = std::make_unique<Factorised>();
        f->theta = th;
        f->dt = dt;
        f->lu.compute(A);
        if (f->lu.info() != Eigen::Success) throw NumericError("fd_solve_2d: factorisation failed");
        cache.push_back(std::move(f));
        return *cache.back();
    };

    Eigen::VectorXd explicit_part(M), rhs(M), W(M), LV(M);
    double t = 0.0;
    for (const auto& step : schedule(n_t, out.t[1] - out.t[0], opts.rannacher_steps)) {
        for (const auto& sub : step) {
            const double th = sub.theta, dt = sub.dt;
            Factorised& f = factorise(th, dt);
            LV = L * V;
            for (int i = 0; i < M; ++i) {
                if (disc.kind[i] == RowKind::Pde)
                    explicit_part(i) = V(i) + (1.0 - th) * dt * (LV(i) - source_term(V(i), xva));
                else
                    explicit_part(i) = 0.0;
            }
            for (int j = 0; j <= n_1; ++j)
                for (int k = 0; k <= n_2; ++k) {
                    const int i = id(j, k);
                    if (disc.kind[i] == RowKind::Dirichlet) explicit_part(i) = boundary_value(i, j, k, t + dt);
                }
            W = V;
            int iters = 0;
            bool ok = false;
            while (iters < opts.max_iters) {
                ++iters;
                rhs = explicit_part;
                for (int i = 0; i < M; ++i)
                    if (disc.kind[i] == RowKind::Pde) rhs(i) -= th * dt * source_term(W(i), xva);
                Eigen::VectorXd next = f.lu.solve(rhs);
                const double diff = (next - W).lpNorm<Eigen::Infinity>();
                W = std::move(next);
                if (!std::isfinite(diff)) throw NumericError("fd_solve_2d: non-finite iterate");
                if (diff < opts.fixed_point_tol) {
                    ok = true;
                    break;
                }
            }
            out.converged = out.converged && ok;
            out.max_fixed_point_iterations = std::max(out.max_fixed_point_iterations, iters);
            V = W;
            t += dt;
        }
        out.values.insert(out.values.end(), V.data(), V.data() + M);
    }
    return out;
}

}  // namespace xvapinn
