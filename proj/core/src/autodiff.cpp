#include "xvapinn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "xvapinn/errors.hpp"

namespace xvapinn {

// ---------------------------------------------------------------------------
// JetBatch

JetBatch::JetBatch(int space_dim, Eigen::Index size)
    : space_dim_(space_dim), size_(size),
      data_(Eigen::RowVectorXd::Zero(channel_count(space_dim) * size)) {}

int JetBatch::second_channel(int space_dim, int i, int j) {
    if (i > j) std::swap(i, j);
    // Packed upper triangle, row by row.
    int offset = 0;
    for (int r = 0; r < i; ++r) offset += space_dim - r;
    return 2 + space_dim + offset + (j - i);
}

Jet2 JetBatch::at(Eigen::Index i) const {
    Jet2 jet;
    jet.space_dim = space_dim_;
    jet.value = (*this)(0, i);
    jet.d_t = (*this)(first_channel(0), i);
    for (int k = 0; k < space_dim_; ++k) {
        jet.d_x[k] = (*this)(first_channel(k + 1), i);
        for (int m = k; m < space_dim_; ++m)
            jet.set_d_xx(k, m, (*this)(second_channel(space_dim_, k, m), i));
    }
    return jet;
}

void JetBatch::set(Eigen::Index i, const Jet2& jet) {
    (*this)(0, i) = jet.value;
    (*this)(first_channel(0), i) = jet.d_t;
    for (int k = 0; k < space_dim_; ++k) {
        (*this)(first_channel(k + 1), i) = jet.d_x[k];
        for (int m = k; m < space_dim_; ++m)
            (*this)(second_channel(space_dim_, k, m), i) = jet.d_xx[k][m];
    }
}

// ---------------------------------------------------------------------------
// Activation derivatives on whole blocks

namespace {

// Column chunk for the elementwise passes; keeps the working set in cache.
constexpr Eigen::Index kChunk = 256;

// Writes the activation value into `value` and its first two derivatives into
// d1, d2. tanh goes through e = exp(-2|x|): vectorised, no overflow, and
// 1 - tanh^2 keeps its relative accuracy in saturation. `tmp` is scratch.
template <class X, class V, class D>
void activate_block(Activation act, const X& x, V&& value, D&& d1, D&& d2, Eigen::ArrayXXd& tmp) {
    switch (act) {
        case Activation::Tanh:
            tmp = (-2.0 * x.abs()).exp();
            d2 = 1.0 / (1.0 + tmp);
            d1 = 4.0 * tmp * d2.square();
            value = (1.0 - tmp) * d2 * x.sign();
            d2 = -2.0 * value * d1;
            break;
        case Activation::Sigmoid:
            value = 1.0 / (1.0 + (-x).exp());
            d1 = value * (1.0 - value);
            d2 = d1 * (1.0 - 2.0 * value);
            break;
        case Activation::Identity:
            value = x;
            d1.setOnes();
            d2.setZero();
            break;
    }
}

template <class V, class D>
void third_derivative(Activation act, const V& value, const D& d1, const D& d2, Eigen::ArrayXXd& d3) {
    switch (act) {
        case Activation::Tanh: d3 = -2.0 * d1 * (d1 - 2.0 * value.square()); return;
        case Activation::Sigmoid: d3 = d2 * (1.0 - 2.0 * value) - 2.0 * d1.square(); return;
        case Activation::Identity: d3.setZero(value.rows(), value.cols()); return;
    }
}

struct SecondPair {
    int channel;
    int ci;  // first-derivative channel of space var i
    int cj;
};

std::vector<SecondPair> second_pairs(int d) {
    std::vector<SecondPair> pairs;
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j)
            pairs.push_back({JetBatch::second_channel(d, i, j), JetBatch::first_channel(i + 1),
                             JetBatch::first_channel(j + 1)});
    return pairs;
}

void check_finite(const NetworkParams& params) {
    const auto& layers = params.layers();
    for (std::size_t l = 0; l < layers.size(); ++l)
        if (!layers[l].weight.allFinite() || !layers[l].bias.allFinite())
            throw NumericError("non-finite network parameter in layer " + std::to_string(l));
}

}  // namespace

// ---------------------------------------------------------------------------
// JetEngine

const JetBatch& JetEngine::forward(const NetworkParams& params,
                                   const Eigen::Ref<const Eigen::MatrixXd>& points) {
    const Architecture& arch = params.architecture();
    const int din = arch.input_dim();
    if (points.rows() != din)
        throw ContractError("jet evaluation: point dimension " + std::to_string(points.rows()) +
                            " != network input " + std::to_string(din));
    const int d = din - 1;
    if (d < 0 || d > kMaxSpaceDim)
        throw ContractError("jet evaluation supports 0.." + std::to_string(kMaxSpaceDim) +
                            " space dimensions");
    check_finite(params);

    params_.emplace(params);
    const Eigen::Index N = points.cols();
    batch_ = N;
    const int C = JetBatch::channel_count(d);
    const auto& layers = params.layers();
    const std::size_t L = layers.size();
    pre_.resize(L);
    post_.resize(L);
    d1_.resize(L - 1);
    d2_.resize(L - 1);

    Eigen::MatrixXd& in = post_[0];
    in.setZero(din, C * N);
    for (int k = 0; k < din; ++k) {
        const double scale = arch.input_scaling ? arch.input_scaling->scale[k] : 1.0;
        const double shift = arch.input_scaling ? arch.input_scaling->shift[k] : 0.0;
        in.row(k).head(N) = ((points.row(k).array() - shift) * scale).matrix();
        in.row(k).segment(JetBatch::first_channel(k) * N, N).setConstant(scale);
    }

    const auto pairs = second_pairs(d);
    for (std::size_t l = 0; l < L; ++l) {
        Eigen::MatrixXd& P = pre_[l];
        P.noalias() = layers[l].weight * post_[l];
        P.leftCols(N).colwise() += layers[l].bias;
        if (l + 1 == L) break;

        Eigen::MatrixXd& A = post_[l + 1];
        A.resize(P.rows(), C * N);
        d1_[l].resize(P.rows(), N);
        d2_[l].resize(P.rows(), N);
        for (Eigen::Index c0 = 0; c0 < N; c0 += kChunk) {
            const Eigen::Index n = std::min(kChunk, N - c0);
            auto pc = [&](int c) { return P.middleCols(c * N + c0, n).array(); };
            auto s1 = d1_[l].middleCols(c0, n);
            auto s2 = d2_[l].middleCols(c0, n);
            x_ = pc(0);
            activate_block(arch.activation, x_, A.middleCols(c0, n).array(), s1, s2, tmp_);
            for (int c = 1; c <= 1 + d; ++c) A.middleCols(c * N + c0, n).array() = s1 * pc(c);
            for (const auto& p : pairs)
                A.middleCols(p.channel * N + c0, n).array() = s2 * pc(p.ci) * pc(p.cj) + s1 * pc(p.channel);
        }
    }

    out_ = JetBatch(d, N);
    out_.data() = pre_[L - 1].row(0);
    return out_;
}

ParamGradient JetEngine::backward(const JetBatch& adjoint) const {
    if (!params_) throw ContractError("JetEngine::backward called before forward");
    const NetworkParams& params = *params_;
    const Architecture& arch = params.architecture();
    const auto& layers = params.layers();
    const std::size_t L = layers.size();
    const Eigen::Index N = batch_;
    const int d = arch.input_dim() - 1;
    if (adjoint.size() != N || adjoint.space_dim() != d)
        throw ContractError("adjoint batch does not match the last forward pass");

    std::vector<std::size_t> offsets(L);
    std::size_t off = 0;
    for (std::size_t l = 0; l < L; ++l) {
        offsets[l] = off;
        off += static_cast<std::size_t>(layers[l].weight.size() + layers[l].bias.size());
    }
    ParamGradient grad(off, 0.0);
    const auto pairs = second_pairs(d);

    g_ = adjoint.data();  // adjoint of pre-activation of the output layer
    for (std::size_t l = L; l-- > 0;) {
        const Eigen::MatrixXd gW = g_ * post_[l].transpose();
        const Eigen::VectorXd gb = g_.leftCols(N).rowwise().sum();
        const Eigen::Index out = gW.rows(), inw = gW.cols();
        std::size_t pos = offsets[l];
        for (Eigen::Index i = 0; i < out; ++i)
            for (Eigen::Index j = 0; j < inw; ++j) grad[pos++] = gW(i, j);
        for (Eigen::Index i = 0; i < out; ++i) grad[pos++] = gb(i);
        if (l == 0) break;

        abar_.noalias() = layers[l].weight.transpose() * g_;
        const Eigen::MatrixXd& P = pre_[l - 1];
        gp_.resize(P.rows(), P.cols());
        for (Eigen::Index c0 = 0; c0 < N; c0 += kChunk) {
            const Eigen::Index n = std::min(kChunk, N - c0);
            auto blockP = [&](int c) { return P.middleCols(c * N + c0, n).array(); };
            auto blockA = [&](int c) { return abar_.middleCols(c * N + c0, n).array(); };
            auto out = [&](int c) { return gp_.middleCols(c * N + c0, n).array(); };
            const auto s1 = d1_[l - 1].middleCols(c0, n);
            const auto s2 = d2_[l - 1].middleCols(c0, n);
            if (!pairs.empty())
                third_derivative(arch.activation, post_[l].middleCols(c0, n).array(), s1, s2, s3_);

            g0_ = s1 * blockA(0);
            for (int c = 1; c <= 1 + d; ++c) {
                g0_ += s2 * blockP(c) * blockA(c);
                out(c) = s1 * blockA(c);
            }
            for (const auto& p : pairs) {
                const auto Ap = blockA(p.channel);
                g0_ += (s3_ * blockP(p.ci) * blockP(p.cj) + s2 * blockP(p.channel)) * Ap;
                out(p.ci) += s2 * Ap * blockP(p.cj);
                out(p.cj) += s2 * Ap * blockP(p.ci);
                out(p.channel) = s1 * Ap;
            }
            out(0) = g0_;
        }
        g_.swap(gp_);
    }
    return grad;
}

Jet2 input_jet(const NetworkParams& params, std::span<const double> point) {
    const auto din = static_cast<Eigen::Index>(params.architecture().input_dim());
    if (static_cast<Eigen::Index>(point.size()) != din)
        throw ContractError("input_jet: point dimension " + std::to_string(point.size()) +
                            " != network input " + std::to_string(din));
    Eigen::MatrixXd p(din, 1);
    for (Eigen::Index k = 0; k < din; ++k) p(k, 0) = point[k];
    JetEngine engine;
    return engine.forward(params, p).at(0);
}

// ---------------------------------------------------------------------------
// Generic jet objectives

namespace {

JetT<ad::Var> lift(const Jet2& j, ad::Tape* tape) {
    auto leaf = [&](double v) { return tape ? tape->variable(v) : ad::Var(v); };
    JetT<ad::Var> out;
    out.space_dim = j.space_dim;
    out.value = leaf(j.value);
    out.d_t = leaf(j.d_t);
    for (int k = 0; k < j.space_dim; ++k) {
        out.d_x[k] = leaf(j.d_x[k]);
        for (int m = k; m < j.space_dim; ++m) out.set_d_xx(k, m, leaf(j.d_xx[k][m]));
    }
    return out;
}

std::vector<JetT<ad::Var>> lift_batch(const JetBatch& batch, ad::Tape* tape) {
    std::vector<JetT<ad::Var>> jets;
    jets.reserve(static_cast<std::size_t>(batch.size()));
    for (Eigen::Index i = 0; i < batch.size(); ++i) {
        const Jet2 j = batch.at(i);
        if (!std::isfinite(j.value) || !std::isfinite(j.d_t))
            throw NumericError("non-finite network jet", "objective", i);
        jets.push_back(lift(j, tape));
    }
    return jets;
}

}  // namespace

ObjectiveGradient loss_gradient(const JetObjective& objective, const NetworkParams& params,
                                const Eigen::Ref<const Eigen::MatrixXd>& points) {
    JetEngine engine;
    const JetBatch& batch = engine.forward(params, points);
    ad::Tape tape;
    tape.reserve(static_cast<std::size_t>(batch.channels() * batch.size()) * 4);
    const auto jets = lift_batch(batch, &tape);
    const ad::Var loss = objective(jets);
    if (!std::isfinite(loss.value())) throw NumericError("non-finite objective value");

    const ad::Adjoints adj = tape.gradient(loss);
    JetBatch bar(batch.space_dim(), batch.size());
    for (Eigen::Index i = 0; i < batch.size(); ++i) {
        const auto& j = jets[static_cast<std::size_t>(i)];
        Jet2 g;
        g.space_dim = j.space_dim;
        g.value = adj[j.value];
        g.d_t = adj[j.d_t];
        for (int k = 0; k < j.space_dim; ++k) {
            g.d_x[k] = adj[j.d_x[k]];
            for (int m = k; m < j.space_dim; ++m) g.set_d_xx(k, m, adj[j.d_xx[k][m]]);
        }
        bar.set(i, g);
    }
    return {loss.value(), engine.backward(bar)};
}

double objective_value(const JetObjective& objective, const NetworkParams& params,
                       const Eigen::Ref<const Eigen::MatrixXd>& points) {
    JetEngine engine;
    const auto jets = lift_batch(engine.forward(params, points), nullptr);
    return objective(jets).value();
}

}  // namespace xvapinn
