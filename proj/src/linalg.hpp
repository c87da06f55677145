#pragma once

// Small dense helpers shared by the library sources. Not installed.

#include <Eigen/Core>
#include <cmath>

namespace fenet::detail {

// Flips the sign of v so that its entry of largest absolute value is
// positive. Near-ties resolve to the lowest index.
template <class Derived>
void fix_sign(Eigen::MatrixBase<Derived>&& v)
{
    if (v.size() == 0) return;
    const double peak = v.cwiseAbs().maxCoeff();
    if (peak == 0.0) return;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (std::abs(v[i]) >= peak * (1.0 - 1e-8)) {
            if (v[i] < 0.0) v = -v;
            return;
        }
    }
}

template <class Derived>
void fix_sign(Eigen::MatrixBase<Derived>& v)
{
    fix_sign(std::move(v));
}

} // namespace fenet::detail
