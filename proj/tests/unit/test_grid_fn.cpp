#include <fenet/error.hpp>
#include <fenet/grid_fn.hpp>

#include <gtest/gtest.h>

#include "helpers.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace fenet;

namespace {

constexpr double pi = std::numbers::pi;

GridFunction fn(const grid_ptr& g, double (*f)(double))
{
    return GridFunction::from(g, f);
}

} // namespace

TEST(Grid, PointsAndWeights)
{
    const Grid g(201);
    EXPECT_EQ(g.size(), 201u);
    EXPECT_NEAR(g.weights().sum(), 1.0, 1e-14);
    EXPECT_EQ(g.points()(0), 0.0);
    EXPECT_EQ(g.points()(200), 1.0);
    for (Eigen::Index m = 1; m < 201; ++m) EXPECT_GT(g.points()(m), g.points()(m - 1));
    EXPECT_DOUBLE_EQ(g.weights()(0), 0.5 / 200);
    EXPECT_DOUBLE_EQ(g.weights()(100), 1.0 / 200);
    EXPECT_THROW(Grid(1), config_error);
}

TEST(Grid, WeightsSumToOneForManySizes)
{
    for (std::size_t T : {2u, 3u, 17u, 200u, 1001u}) EXPECT_NEAR(Grid(T).weights().sum(), 1.0, 1e-14) << T;
}

TEST(GridFunction, LengthMustMatch)
{
    auto g = make_grid(11);
    EXPECT_THROW(GridFunction(g, Eigen::VectorXd::Zero(10)), data_error);
    EXPECT_EQ(GridFunction(g).values().size(), 11);
}

TEST(Inner, ConstantsGiveOne)
{
    auto g = make_grid();
    const GridFunction one(g, Eigen::VectorXd::Ones(201));
    EXPECT_NEAR(inner(one, one), 1.0, 1e-14);
}

TEST(Inner, CosineOrthonormality)
{
    auto g = make_grid(201);
    const auto c1 = fn(g, [](double t) { return std::sqrt(2.0) * std::cos(pi * t); });
    const auto c2 = fn(g, [](double t) { return std::sqrt(2.0) * std::cos(2 * pi * t); });
    EXPECT_NEAR(inner(c1, c1), 1.0, 1e-4);
    EXPECT_NEAR(inner(c1, c2), 0.0, 1e-4);
}

TEST(Inner, GridMismatchIsAnError)
{
    const GridFunction a(make_grid(11));
    const GridFunction b(make_grid(21));
    EXPECT_THROW(inner(a, b), data_error);
    EXPECT_THROW(require_same_grid(a.grid(), b.grid()), data_error);
}

TEST(Inner, SymmetricAndBilinear)
{
    auto g = make_grid(101);
    std::mt19937_64 rng(3);
    const GridFunction f(g, testkit::smooth_values(*g, rng));
    const GridFunction h(g, testkit::smooth_values(*g, rng));
    const GridFunction k(g, testkit::smooth_values(*g, rng));
    EXPECT_DOUBLE_EQ(inner(f, h), inner(h, f));
    EXPECT_NEAR(inner(2.5 * f + h, k), 2.5 * inner(f, k) + inner(h, k), 1e-12);
}

TEST(Norm2, Examples)
{
    auto g = make_grid(201);
    EXPECT_EQ(norm2(GridFunction(g)), 0.0);
    EXPECT_NEAR(norm2(GridFunction(g, Eigen::VectorXd::Constant(201, 2.0))), 2.0, 1e-14);
    const auto s1 = fn(g, [](double t) { return std::sqrt(2.0) * std::sin(pi * t); });
    EXPECT_NEAR(norm2(s1), 1.0, 1e-4);
}

TEST(Norm2, ZeroOnlyForZeroValues)
{
    auto g = make_grid(21);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(21);
    v(20) = 1e-3;
    EXPECT_GT(norm2(GridFunction(g, v)), 0.0);
}

TEST(InnerProperty, CauchySchwarzOnRandomPairs)
{
    auto g = make_grid(201);
    std::mt19937_64 rng(11);
    std::normal_distribution<double> z;
    for (int trial = 0; trial < 1000; ++trial) {
        Eigen::VectorXd a(201), b(201);
        for (int m = 0; m < 201; ++m) {
            a(m) = z(rng);
            b(m) = z(rng);
        }
        if (trial % 2 == 0) b = 0.7 * a + 0.1 * b;
        const GridFunction f(g, a), h(g, b);
        EXPECT_LE(std::abs(inner(f, h)), norm2(f) * norm2(h) * (1 + 1e-14));
    }
}

TEST(InnerProperty, TrapezoidExactForLinearFunctions)
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-3, 3);
    for (std::size_t T : {2u, 5u, 201u, 1000u}) {
        auto g = make_grid(T);
        for (int trial = 0; trial < 20; ++trial) {
            const double a = u(rng), b = u(rng);
            Eigen::VectorXd v = (a + b * g->points().array()).matrix();
            const GridFunction f(g, v);
            const GridFunction one(g, Eigen::VectorXd::Ones(T));
            EXPECT_NEAR(inner(f, one), a + b / 2, 1e-13);
        }
    }
}

TEST(InnerProperty, RefinementConvergesQuadratically)
{
    auto f = [](double t) { return std::exp(t) * std::cos(3 * t); };
    // int_0^1 e^{2t} cos^2(3t) dt
    const double exact = (std::exp(2.0) - 1) / 4 + (std::exp(2.0) * (2 * std::cos(6.0) + 6 * std::sin(6.0)) - 2) / 80;
    double prev_err = 0.0;
    for (std::size_t T : {11u, 21u, 41u, 81u, 161u}) {
        const auto g = GridFunction::from(make_grid(T), f);
        const double err = std::abs(inner(g, g) - exact);
        if (prev_err > 0) {
            const double ratio = prev_err / err;
            EXPECT_GT(ratio, 3.6) << T;
            EXPECT_LT(ratio, 4.4) << T;
        }
        prev_err = err;
    }
}

TEST(InnerRows, MatchesPairwiseInner)
{
    auto g = make_grid(31);
    std::mt19937_64 rng(1);
    Eigen::MatrixXd a(3, 31), b(2, 31);
    for (int i = 0; i < 3; ++i) a.row(i) = testkit::smooth_values(*g, rng).transpose();
    for (int i = 0; i < 2; ++i) b.row(i) = testkit::smooth_values(*g, rng).transpose();
    const Eigen::MatrixXd G = inner_rows(*g, a, b);
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 2; ++k)
            EXPECT_NEAR(G(i, k), inner(GridFunction(g, a.row(i).transpose()), GridFunction(g, b.row(k).transpose())), 1e-13);
    EXPECT_THROW(inner_rows(*g, a, Eigen::MatrixXd::Zero(1, 30)), data_error);
}
