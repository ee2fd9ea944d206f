#pragma once

#include <array>

namespace xvapinn {

/// Largest number of space dimensions handled by the shipped models (d <= 2).
inline constexpr int kMaxSpaceDim = 2;

/// Value, time derivative and first/second space derivatives of a scalar field
/// at one space-time point. `T` is `double` or `ad::Var`.
template <class T>
struct JetT {
    T value{};
    T d_t{};
    std::array<T, kMaxSpaceDim> d_x{};
    std::array<std::array<T, kMaxSpaceDim>, kMaxSpaceDim> d_xx{};
    int space_dim = 1;

    // Writes both mirror entries; the Hessian stays exactly symmetric.
    void set_d_xx(int i, int j, const T& v) {
        d_xx[i][j] = v;
        d_xx[j][i] = v;
    }
};

using Jet2 = JetT<double>;

}  // namespace xvapinn
