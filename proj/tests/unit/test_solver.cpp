#include <fenet/error.hpp>
#include <fenet/solver.hpp>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "oracle.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <random>

using namespace fenet;
using fenet::testkit::random_design;

namespace {

Eigen::MatrixXd random_spd(int M, std::mt19937_64& rng)
{
    std::normal_distribution<double> z;
    Eigen::MatrixXd A(M, M);
    for (int i = 0; i < M; ++i)
        for (int k = 0; k < M; ++k) A(i, k) = z(rng);
    return A * A.transpose() + 0.5 * Eigen::MatrixXd::Identity(M, M);
}

Eigen::VectorXd random_response(std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    for (auto& v : y) v = z(rng);
    return fenet::testkit::centered_response(y);
}

HyperParams hp_of(double lambda, double alpha, std::size_t s = 2, double theta = 0.1)
{
    HyperParams hp;
    hp.lambda = lambda;
    hp.alpha = alpha;
    hp.s = s;
    hp.theta = theta;
    return hp;
}

Eigen::VectorXd stack(const CoefBlocks& d)
{
    Eigen::Index total = 0;
    for (const auto& b : d) total += b.size();
    Eigen::VectorXd out(total);
    Eigen::Index at = 0;
    for (const auto& b : d) {
        out.segment(at, b.size()) = b;
        at += b.size();
    }
    return out;
}

} // namespace

TEST(SolveBlock, BoundaryGivesExactZero)
{
    BlockProblem prob{Eigen::MatrixXd::Identity(2, 2), Eigen::Vector2d(0.6, 0.8), 1.0};
    const Eigen::VectorXd d = solve_block(prob, Eigen::VectorXd::Zero(2));
    EXPECT_EQ(d(0), 0.0);
    EXPECT_EQ(d(1), 0.0);
    EXPECT_EQ(solve_block_diagonal(Eigen::Vector2d(1, 3), Eigen::Vector2d(0.6, 0.8), 1.0), Eigen::Vector2d::Zero());
}

TEST(SolveBlock, IsotropicClosedForm)
{
    BlockProblem prob{Eigen::MatrixXd::Identity(2, 2), Eigen::Vector2d(2, 0), 1.0};
    const Eigen::VectorXd d = solve_block(prob, Eigen::VectorXd::Zero(2));
    EXPECT_NEAR(d(0), 1.0, 1e-12);
    EXPECT_EQ(d(1), 0.0);
}

TEST(SolveBlock, RidgeLimit)
{
    std::mt19937_64 rng(1);
    for (int M : {1, 2, 5}) {
        BlockProblem prob{random_spd(M, rng), Eigen::VectorXd::Random(M), 0.0};
        const Eigen::VectorXd d = solve_block(prob, Eigen::VectorXd::Zero(M));
        EXPECT_LE((d - prob.omega.llt().solve(prob.varrho)).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(SolveBlock, DenseResidualAndFixedPointAgree)
{
    std::mt19937_64 rng(2);
    std::normal_distribution<double> z;
    for (int trial = 0; trial < 50; ++trial) {
        const int M = 1 + trial % 5;
        BlockProblem prob;
        prob.omega = random_spd(M, rng);
        prob.varrho = Eigen::VectorXd(M);
        for (auto& v : prob.varrho) v = 3 * z(rng);
        prob.lambda1 = 0.5 * prob.varrho.norm() * (trial % 3 == 0 ? 0.1 : 0.8);
        const Eigen::VectorXd d = solve_block(prob, Eigen::VectorXd::Zero(M));
        ASSERT_GT(d.norm(), 0.0);
        EXPECT_LE(block_residual(prob, d), 1e-10 * (1 + prob.varrho.cwiseAbs().maxCoeff()));
        const Eigen::VectorXd fp = solve_block_fixed_point(prob, Eigen::VectorXd::Ones(M));
        EXPECT_LE((d - fp).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(SolveBlock, DiagonalMatchesDense)
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(1e-6, 2.0);
    for (int trial = 0; trial < 50; ++trial) {
        const int M = 1 + trial % 6;
        Eigen::VectorXd w(M), r(M);
        for (int k = 0; k < M; ++k) {
            w(k) = u(rng);
            r(k) = u(rng) - 1.0;
        }
        const double l1 = 0.3 * r.norm();
        const Eigen::VectorXd a = solve_block_diagonal(w, r, l1);
        BlockProblem prob{Eigen::MatrixXd(w.asDiagonal()), r, l1};
        EXPECT_LE(block_residual(prob, a), 1e-10 * (1 + r.cwiseAbs().maxCoeff()));
        EXPECT_LE((a - solve_block(prob, Eigen::VectorXd::Zero(M))).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(SolveBlock, Errors)
{
    BlockProblem bad{Eigen::Matrix2d::Zero(), Eigen::Vector2d(1, 1), 0.1};
    EXPECT_THROW(solve_block(bad, Eigen::Vector2d::Zero()), numerical_error);
    Eigen::Matrix2d asym;
    asym << 1, 0.5, 0, 1;
    EXPECT_THROW(solve_block({asym, Eigen::Vector2d(1, 1), 0.1}, Eigen::Vector2d::Zero()), numerical_error);
    EXPECT_THROW(solve_block_diagonal(Eigen::Vector2d(1, -1), Eigen::Vector2d(1, 1), 0.1), numerical_error);
    EXPECT_THROW(solve_block_diagonal(Eigen::Vector2d(1, 1), Eigen::Vector2d(1, 1), -0.1), config_error);
}

TEST(SolveBlock, HandBuiltActiveResidual)
{
    BlockProblem prob{Eigen::Vector3d(0.5, 1.0, 4.0).asDiagonal(), Eigen::Vector3d(1.0, -2.0, 0.5), 0.7};
    const Eigen::VectorXd d = solve_block(prob, Eigen::VectorXd::Zero(3));
    const Eigen::VectorXd r = prob.omega * d - prob.varrho + prob.lambda1 * d / d.norm();
    EXPECT_LE(r.cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Objective, ZeroBlocksAndLeastSquares)
{
    const ReducedRankDesign des = random_design(10, 2, 2, 1);
    const Eigen::VectorXd y = random_response(10, 2);
    const CoefBlocks zero = {Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero()};
    EXPECT_NEAR(objective(des, y, zero, hp_of(1.0, 0.5)), y.squaredNorm() / 20, 1e-14);

    const FEnetFit ls = fit_fenet(des, y, hp_of(0.0, 1.0));
    const Eigen::VectorXd resid = y - fitted_values(des, ls.c);
    EXPECT_NEAR(ls.objective(), resid.squaredNorm() / 20, 1e-14);
    // normal equations of the stacked least squares problem
    Eigen::MatrixXd G(10, 4);
    G << des.block(0).gamma, des.block(1).gamma;
    EXPECT_LE((G.transpose() * resid).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Objective, CurveRouteAgrees)
{
    auto g = make_grid(61);
    const Dataset data = center(fenet::testkit::random_dataset(g, 9, 3, 5));
    const HyperParams hp = hp_of(0.05, 0.6, 3, 0.2);
    const ReducedRankDesign des = build_design(data, hp);
    const FEnetFit fit = fit_fenet(des, data.y, hp);
    const Eigen::MatrixXd f = surrogate_curves(des, fit.c);

    Eigen::VectorXd pred = Eigen::VectorXd::Zero(9);
    double pen1 = 0.0, pen2 = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
        pred += inner_rows(*g, data.curves[j], f.row(j));
        // |H^{1/2} c|: H = (1/n) Gamma^T Gamma + theta I computed from the curve scores
        const Eigen::MatrixXd scores = inner_rows(*g, data.curves[j], des.block(j).phi.transpose());
        const Eigen::MatrixXd H = scores.transpose() * scores / 9.0 + 0.2 * Eigen::MatrixXd::Identity(3, 3);
        pen1 += std::sqrt(fit.c[j].dot(H * fit.c[j]));
        pen2 += norm2(GridFunction(g, f.row(j).transpose())) * norm2(GridFunction(g, f.row(j).transpose()));
    }
    const double curve_obj = (data.y - pred).squaredNorm() / 18 + hp.lambda1() * pen1 + 0.5 * hp.lambda2() * pen2;
    EXPECT_NEAR(curve_obj, fit.objective(), 1e-8 * (1 + std::abs(curve_obj)));
    EXPECT_NEAR(objective(des, data.y, fit.d, hp), fit.objective(), 1e-12 * (1 + fit.objective()));
}

TEST(FitFenet, ZeroResponseSelectsNothing)
{
    const ReducedRankDesign des = random_design(8, 3, 2, 4);
    const FEnetFit fit = fit_fenet(des, Eigen::VectorXd::Zero(8), hp_of(0.1, 0.5));
    EXPECT_TRUE(fit.selected.empty());
    EXPECT_EQ(fit.objective(), 0.0);
    EXPECT_TRUE(fit.converged);
}

TEST(FitFenet, UniversalThreshold)
{
    const ReducedRankDesign des = random_design(12, 4, 3, 6);
    const Eigen::VectorXd y = random_response(12, 7);
    double want = 0.0;
    for (const auto& b : des.blocks())
        want = std::max(want, (b.gamma.transpose() * y / 12.0).cwiseQuotient(b.h.cwiseSqrt()).norm());
    const double thr = universal_threshold(des, y);
    EXPECT_NEAR(thr, want, 1e-14 * want);

    const FEnetFit above = fit_fenet(des, y, hp_of(thr, 1.0, 3));
    EXPECT_TRUE(above.selected.empty());
    const FEnetFit below = fit_fenet(des, y, hp_of(0.9 * thr, 1.0, 3));
    EXPECT_FALSE(below.selected.empty());
}

TEST(FitFenet, MatchesProximalGradientOracle)
{
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0, 1);
    for (int inst = 0; inst < 20; ++inst) {
        const ReducedRankDesign des = random_design(6, 2, 2, 1000 + inst, 0.05 + u(rng));
        const Eigen::VectorXd y = random_response(6, 2000 + inst);
        const double thr = universal_threshold(des, y);
        const HyperParams hp = hp_of(thr * (0.05 + 0.9 * u(rng)), 0.2 + 0.8 * u(rng));
        const FEnetFit fit = fit_fenet(des, y, hp);
        ASSERT_TRUE(fit.converged);
        const fenet::testkit::ProxOracle oracle(des);
        const Eigen::VectorXd ref = oracle.solve(y, hp.lambda1(), hp.lambda2());
        const double fo = oracle.value(y, ref, hp.lambda1(), hp.lambda2());
        const double fs = oracle.value(y, stack(fit.d), hp.lambda1(), hp.lambda2());
        EXPECT_LE(std::abs(fs - fo), 1e-4 * std::abs(fo)) << inst;
        EXPECT_LE(fs, fo + 1e-12) << inst;
    }
}

TEST(FitFenet, KktCertificateAndSensitivity)
{
    const ReducedRankDesign des = random_design(20, 5, 3, 8, 0.1, psi_kind::cov_floor, 61);
    const Eigen::VectorXd y = random_response(20, 9);
    const HyperParams hp = hp_of(0.3 * universal_threshold(des, y), 0.7, 3);
    const FEnetFit fit = fit_fenet(des, y, hp);
    ASSERT_TRUE(fit.converged);
    const double scale = 1 + y.cwiseAbs().maxCoeff();
    EXPECT_LE(fit.kkt.max_violation, 1e-8 * scale);
    EXPECT_LE(kkt_check(fit.d, des, y, hp).max_violation, 1e-8 * scale);

    ASSERT_FALSE(fit.selected.empty());
    CoefBlocks bumped = fit.d;
    bumped[fit.selected.front()](0) += 0.1;
    EXPECT_GT(kkt_check(bumped, des, y, hp).max_violation, 1e-3);
}

TEST(FitFenet, MonotoneTraceAndExactZeros)
{
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const ReducedRankDesign des = random_design(15, 6, 3, 30 + seed);
        const Eigen::VectorXd y = random_response(15, 60 + seed);
        const HyperParams hp = hp_of(0.4 * universal_threshold(des, y), 0.9, 3);
        const FEnetFit fit = fit_fenet(des, y, hp);
        for (std::size_t i = 1; i < fit.objective_trace.size(); ++i)
            EXPECT_LE(fit.objective_trace[i], fit.objective_trace[i - 1] + 1e-12);
        for (std::size_t j = 0; j < des.p(); ++j) {
            const bool sel = std::find(fit.selected.begin(), fit.selected.end(), j) != fit.selected.end();
            EXPECT_EQ(sel, fit.d[j].norm() > 0.0);
            if (!sel) {
                for (Eigen::Index k = 0; k < fit.d[j].size(); ++k) EXPECT_EQ(fit.d[j](k), 0.0);
            }
        }
    }
}

TEST(FitFenet, WarmStartEquivalence)
{
    const ReducedRankDesign des = random_design(15, 6, 3, 77);
    const Eigen::VectorXd y = random_response(15, 78);
    const HyperParams hp = hp_of(0.2 * universal_threshold(des, y), 0.8, 3);
    const FEnetFit cold = fit_fenet(des, y, hp);
    const FEnetFit warm = fit_fenet(des, y, hp, {}, &cold.d);
    EXPECT_NEAR(warm.objective(), cold.objective(), 1e-10);
    EXPECT_TRUE(warm.converged);
}

TEST(FitFenet, PathSelectionShrinks)
{
    const ReducedRankDesign des = random_design(20, 8, 3, 123);
    const Eigen::VectorXd y = random_response(20, 124);
    const double thr = universal_threshold(des, y);
    std::size_t prev = des.p() + 1;
    int bad = 0, pairs = 0;
    CoefBlocks warm;
    for (double frac : {1.01, 0.8, 0.6, 0.4, 0.3, 0.2, 0.1, 0.05, 0.02, 0.01}) {
        const FEnetFit fit = fit_fenet(des, y, hp_of(frac * thr, 1.0, 3), {}, warm.empty() ? nullptr : &warm);
        warm = fit.d;
        if (prev <= des.p()) {
            ++pairs;
            if (fit.selected.size() < prev) ++bad;
        }
        if (frac > 1) EXPECT_TRUE(fit.selected.empty());
        prev = fit.selected.size();
    }
    EXPECT_LE(bad, 0.05 * pairs + 1e-9);
}

TEST(FitFenet, InputValidation)
{
    const ReducedRankDesign des = random_design(8, 2, 2, 1);
    EXPECT_THROW(fit_fenet(des, Eigen::VectorXd::Zero(7), hp_of(0.1, 0.5)), data_error);
    EXPECT_THROW(fit_fenet(des, Eigen::VectorXd::Zero(8), hp_of(-0.1, 0.5)), config_error);
}
