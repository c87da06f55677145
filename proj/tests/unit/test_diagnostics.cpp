#include <fenet/diagnostics.hpp>
#include <fenet/error.hpp>
#include <fenet/experiment.hpp>

#include <gtest/gtest.h>

#include <Eigen/LU>
#include <cmath>

using namespace fenet;

namespace {

PartSepCov cov(corr_kind kind, double rho, std::size_t q, std::size_t K = 50)
{
    PartSepCov c;
    c.kind = kind;
    c.rho = rho;
    c.q = q;
    c.nu = PartSepCov::default_nu(K);
    return c;
}

} // namespace

TEST(PartSepCov, Validation)
{
    EXPECT_NO_THROW(cov(corr_kind::ma1, 0.49, 5).validate());
    EXPECT_THROW(cov(corr_kind::ma1, 0.5, 5).validate(), config_error);
    EXPECT_THROW(cov(corr_kind::ar1, 1.0, 5).validate(), config_error);
    auto c = cov(corr_kind::ar1, 0.3, 5);
    c.nu(3) = 2.0;
    EXPECT_THROW(c.validate(), config_error);
    c = cov(corr_kind::ar1, 0.3, 0);
    EXPECT_THROW(c.validate(), config_error);
    EXPECT_EQ(corr_kind_from_string("MA1"), corr_kind::ma1);
    EXPECT_EQ(to_string(corr_kind::ar1), "AR1");
}

TEST(PartSepCov, Correlation)
{
    const Eigen::MatrixXd R = cov(corr_kind::ar1, 0.5, 4).correlation();
    EXPECT_DOUBLE_EQ(R(0, 3), 0.125);
    const Eigen::MatrixXd M = cov(corr_kind::ma1, 0.4, 4).correlation();
    EXPECT_DOUBLE_EQ(M(1, 2), 0.4);
    EXPECT_EQ(M(0, 2), 0.0);
    EXPECT_EQ(M(3, 3), 1.0);
}

TEST(BMatrix, MatchesDefinition)
{
    const auto c = cov(corr_kind::ar1, 0.4, 5);
    const Eigen::MatrixXd R = c.correlation();
    const double l2 = 0.3;
    for (std::size_t k = 0; k < 3; ++k) {
        const double vt = l2 / c.nu(static_cast<Eigen::Index>(k));
        const Eigen::MatrixXd want = R * (R + vt * Eigen::MatrixXd::Identity(5, 5)).inverse();
        EXPECT_LE((b_matrix(c, l2, k) - want).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(KappaBound, UncorrelatedIsDiagonal)
{
    for (auto kind : {corr_kind::ar1, corr_kind::ma1}) {
        const KappaBound kb = kappa_bound(cov(kind, 0.0, 6), 0.25);
        EXPECT_NEAR(kb.upper, 1.0 / 1.25, 1e-12);
        EXPECT_NEAR(kb.lower, 1.0 / 1.25, 1e-12);
        EXPECT_EQ(aleph(cov(kind, 0.0, 6), 0.25), 0.0);
    }
}

TEST(KappaBound, ClosedFormCeilings)
{
    EXPECT_NEAR(kappa_ceiling(corr_kind::ar1, 0.3), 1 + 0.9 / 0.7, 1e-12);
    EXPECT_NEAR(kappa_ceiling(corr_kind::ma1, 0.4), 1 + 2.0 / 0.6, 1e-12);
    EXPECT_NEAR(aleph_ceiling(corr_kind::ma1, 0.4), 0.8, 1e-15);
    EXPECT_NEAR(aleph_ceiling(corr_kind::ar1, 0.3), 0.6 / 0.7, 1e-15);
    EXPECT_EQ(kappa_ceiling(corr_kind::ma1, 0.0), 1.0);
}

TEST(KappaBound, CeilingsDominateAndBracket)
{
    for (auto kind : {corr_kind::ar1, corr_kind::ma1}) {
        for (double rho : {0.1, 0.3, 0.45}) {
            for (std::size_t q : {2u, 10u, 50u}) {
                const auto c = cov(kind, rho, q);
                double prev = std::numeric_limits<double>::infinity();
                for (double l2 : {1e-4, 1e-3, 1e-2, 0.1, 1.0, 10.0}) {
                    const KappaBound kb = kappa_bound(c, l2, 16);
                    EXPECT_LE(kb.lower, kb.upper + 1e-12);
                    EXPECT_LE(kb.upper, kappa_ceiling(kind, rho) + 1e-9);
                    EXPECT_LE(kb.upper, prev + 1e-12);
                    EXPECT_LE(aleph(c, l2), aleph_ceiling(kind, rho) + 1e-9);
                    prev = kb.upper;
                }
            }
        }
    }
}

TEST(Aleph, Examples)
{
    EXPECT_NEAR(aleph(cov(corr_kind::ma1, 0.4, 20), 1e-12), 0.8, 1e-9);
    EXPECT_LT(aleph(cov(corr_kind::ar1, 0.3, 50), 1e-10), 0.6 / 0.7);
    EXPECT_LT(aleph(cov(corr_kind::ar1, 0.3, 50), 1e-10), 1.0);
    EXPECT_GT(aleph(cov(corr_kind::ar1, 0.5, 50), 1e-6), 1.0);
}

TEST(CheckConditions, Report)
{
    const ConditionReport a = check_conditions(cov(corr_kind::ar1, 0.2, 50), 1e-4);
    EXPECT_TRUE(a.c4_satisfied);
    EXPECT_EQ(a.kind, "AR1");
    EXPECT_EQ(a.K, 50u);
    const ConditionReport b = check_conditions(cov(corr_kind::ar1, 0.5, 20), 1e-4);
    EXPECT_FALSE(b.c4_satisfied);
    EXPECT_GE(b.kappa_upper, b.kappa_lower);
}

TEST(CheckConditions, TauIsSumOfSpectrum)
{
    PartSepCov c = cov(corr_kind::ar1, 0.2, 5);
    c.nu.resize(100);
    for (int k = 1; k <= 100; ++k) c.nu(k - 1) = std::exp(-k / 4.0);
    const ConditionReport r = check_conditions(c, 0.1);
    EXPECT_NEAR(r.tau, std::exp(-0.25) / (1 - std::exp(-0.25)), 1e-9);
    EXPECT_NEAR(r.tail_bound, std::exp(-25.0) * 5, 1e-20);
    EXPECT_NEAR(PartSepCov::default_nu(3)(0), 1.0, 0.0);
}
