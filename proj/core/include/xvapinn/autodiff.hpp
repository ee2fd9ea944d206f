#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "xvapinn/jet.hpp"
#include "xvapinn/network.hpp"
#include "xvapinn/tape.hpp"

namespace xvapinn {

/// Gradient of a scalar with respect to NetworkParams, in flatten() order.
using ParamGradient = std::vector<double>;

/// Jets of one scalar field over a batch of N points. Stored channel-major in a
/// single row: [value | d_t | d_x0 .. | d_xx packed upper triangle], N entries each.
class JetBatch {
public:
    JetBatch() = default;
    JetBatch(int space_dim, Eigen::Index size);

    static int channel_count(int space_dim) { return 2 + space_dim + space_dim * (space_dim + 1) / 2; }
    static int first_channel(int var) { return 1 + var; }  // var 0 is time
    static int second_channel(int space_dim, int i, int j);

    int space_dim() const noexcept { return space_dim_; }
    Eigen::Index size() const noexcept { return size_; }
    int channels() const noexcept { return channel_count(space_dim_); }

    double& operator()(int channel, Eigen::Index i) { return data_(channel * size_ + i); }
    double operator()(int channel, Eigen::Index i) const { return data_(channel * size_ + i); }

    Jet2 at(Eigen::Index i) const;
    void set(Eigen::Index i, const Jet2& jet);

    const Eigen::RowVectorXd& data() const noexcept { return data_; }
    Eigen::RowVectorXd& data() noexcept { return data_; }

private:
    int space_dim_ = 0;
    Eigen::Index size_ = 0;
    Eigen::RowVectorXd data_;
};

/// Forward-mode second-order input jets for a whole batch of points, with a
/// reverse sweep over that computation for parameter gradients. Buffers are
/// kept between calls so repeated evaluation does not reallocate.
class JetEngine {
public:
    /// `points` is (d+1) x N, one column per point, time in row 0.
    const JetBatch& forward(const NetworkParams& params,
                            const Eigen::Ref<const Eigen::MatrixXd>& points);

    const JetBatch& output() const noexcept { return out_; }

    /// Gradient of sum_{c,i} adjoint(c, i) * jet(c, i) with respect to the
    /// parameters used by the last forward().
    ParamGradient backward(const JetBatch& adjoint) const;

private:
    std::optional<NetworkParams> params_;
    Eigen::Index batch_ = 0;
    std::vector<Eigen::MatrixXd> pre_;   // pre-activation jets per layer
    std::vector<Eigen::MatrixXd> post_;  // input jets of each layer
    std::vector<Eigen::ArrayXXd> d1_, d2_;  // activation derivatives at each hidden layer
    // scratch reused across calls; large fresh allocations cost page faults
    Eigen::ArrayXXd x_, tmp_;
    mutable Eigen::MatrixXd g_, gp_, abar_;
    mutable Eigen::ArrayXXd g0_, s3_;
    JetBatch out_;
};

/// Exact value and input derivatives of the network at one space-time point.
Jet2 input_jet(const NetworkParams& params, std::span<const double> point);

/// Scalar objective built from the network's jets at a set of points.
using JetObjective = std::function<ad::Var(std::span<const JetT<ad::Var>> jets)>;

struct ObjectiveGradient {
    double loss;
    ParamGradient gradient;
};

/// Value and parameter gradient of `objective` evaluated on the jets at `points`.
ObjectiveGradient loss_gradient(const JetObjective& objective, const NetworkParams& params,
                                const Eigen::Ref<const Eigen::MatrixXd>& points);

/// Same objective without gradient tracking.
double objective_value(const JetObjective& objective, const NetworkParams& params,
                       const Eigen::Ref<const Eigen::MatrixXd>& points);

}  // namespace xvapinn
