#pragma once

#include <fenet/design.hpp>
#include <fenet/solver.hpp>

#include <Eigen/Core>
#include <cmath>
#include <numbers>
#include <random>

namespace fenet::testkit {

// Random smooth curve: a short trigonometric series with N(0,1) coefficients.
inline Eigen::VectorXd smooth_values(const Grid& grid, std::mt19937_64& rng, int terms = 6)
{
    std::normal_distribution<double> z;
    const auto& t = grid.points();
    Eigen::VectorXd v = Eigen::VectorXd::Constant(t.size(), z(rng));
    for (int k = 1; k <= terms; ++k) {
        const double a = z(rng) / k;
        const double b = z(rng) / k;
        v += a * (k * std::numbers::pi * t.array()).cos().matrix() + b * (k * std::numbers::pi * t.array()).sin().matrix();
    }
    return v;
}

inline Dataset random_dataset(grid_ptr grid, std::size_t n, std::size_t p, std::uint64_t seed, int terms = 6)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    Dataset d;
    d.grid = grid;
    d.curves.assign(p, Eigen::MatrixXd(n, grid->size()));
    for (std::size_t j = 0; j < p; ++j)
        for (std::size_t i = 0; i < n; ++i) d.curves[j].row(i) = smooth_values(*grid, rng, terms).transpose();
    d.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) d.y(i) = z(rng);
    return d;
}

// Centered random data used directly as the transformed predictors.
inline ReducedRankDesign random_design(std::size_t n, std::size_t p, std::size_t M, std::uint64_t seed,
                                       double theta = 0.1, psi_kind psi = psi_kind::cov_floor,
                                       std::size_t T = 41)
{
    const Dataset c = center(random_dataset(make_grid(T), n, p, seed));
    HyperParams hp;
    hp.s = M;
    hp.theta = theta;
    DesignOptions opt;
    opt.psi = psi;
    return build_design(c, hp, opt);
}

inline Eigen::VectorXd centered_response(const Eigen::VectorXd& y)
{
    return (y.array() - y.mean()).matrix();
}

} // namespace fenet::testkit
