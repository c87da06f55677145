#include <fenet/diagnostics.hpp>
#include <fenet/error.hpp>

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace fenet {

std::string to_string(corr_kind kind)
{
    return kind == corr_kind::ma1 ? "MA1" : "AR1";
}

corr_kind corr_kind_from_string(std::string_view name)
{
    if (name == "MA1" || name == "ma1") return corr_kind::ma1;
    if (name == "AR1" || name == "ar1") return corr_kind::ar1;
    throw config_error("unknown correlation kind '" + std::string(name) + "' (expected MA1 or AR1)");
}

Eigen::VectorXd PartSepCov::default_nu(std::size_t K)
{
    Eigen::VectorXd nu(static_cast<Eigen::Index>(K));
    for (Eigen::Index k = 0; k < nu.size(); ++k) nu[k] = std::exp(-static_cast<double>(k) / 4.0);
    return nu;
}

void PartSepCov::validate() const
{
    if (q < 1) throw config_error("q must be >= 1");
    if (nu.size() < 1) throw config_error("nu needs at least one term");
    if (kind == corr_kind::ma1 && !(std::abs(rho) < 0.5)) throw config_error("MA(1) needs |rho| < 1/2");
    if (kind == corr_kind::ar1 && !(std::abs(rho) < 1.0)) throw config_error("AR(1) needs |rho| < 1");
    for (Eigen::Index k = 0; k < nu.size(); ++k) {
        if (!(nu[k] > 0.0) || !std::isfinite(nu[k])) throw config_error("nu must be positive and finite");
        if (k > 0 && nu[k] > nu[k - 1]) throw config_error("nu must be non-increasing");
    }
}

Eigen::MatrixXd PartSepCov::correlation() const
{
    const auto Q = static_cast<Eigen::Index>(q);
    Eigen::MatrixXd R = Eigen::MatrixXd::Identity(Q, Q);
    for (Eigen::Index j = 0; j < Q; ++j) {
        for (Eigen::Index l = 0; l < Q; ++l) {
            if (j == l) continue;
            const auto gap = std::abs(j - l);
            if (kind == corr_kind::ar1) R(j, l) = std::pow(rho, static_cast<double>(gap));
            else if (gap == 1) R(j, l) = rho;
        }
    }
    return R;
}

namespace {

Eigen::MatrixXd b_from(const Eigen::MatrixXd& R, double vartheta)
{
    const auto Q = R.rows();
    Eigen::LLT<Eigen::MatrixXd> llt(R + vartheta * Eigen::MatrixXd::Identity(Q, Q));
    if (llt.info() != Eigen::Success) throw numerical_error("R + vartheta I is not positive definite");
    // R and (R + vartheta I)^{-1} commute, so B = (R + vartheta I)^{-1} R.
    return llt.solve(R);
}

void check_lambda2(double lambda2)
{
    if (!(lambda2 > 0.0) || !std::isfinite(lambda2)) throw config_error("lambda2 must be positive");
}

} // namespace

Eigen::MatrixXd b_matrix(const PartSepCov& cov, double lambda2, std::size_t k)
{
    cov.validate();
    check_lambda2(lambda2);
    if (k >= static_cast<std::size_t>(cov.nu.size())) throw config_error("k beyond the truncation");
    return b_from(cov.correlation(), lambda2 / cov.nu[static_cast<Eigen::Index>(k)]);
}

KappaBound kappa_bound(const PartSepCov& cov, double lambda2, std::size_t random_probes, std::uint64_t seed)
{
    cov.validate();
    check_lambda2(lambda2);
    const Eigen::MatrixXd R = cov.correlation();
    const auto Q = R.rows();
    const auto K = cov.nu.size();

    std::vector<Eigen::MatrixXd> B;
    B.reserve(static_cast<std::size_t>(K));
    Eigen::MatrixXd max_abs = Eigen::MatrixXd::Zero(Q, Q);
    KappaBound out;
    for (Eigen::Index k = 0; k < K; ++k) {
        B.push_back(b_from(R, lambda2 / cov.nu[k]));
        max_abs = max_abs.cwiseMax(B.back().cwiseAbs());
        // Probe f_j' = sign(B_k,jj') psi_k attains the k-th absolute row sum.
        out.lower = std::max(out.lower, B.back().cwiseAbs().rowwise().sum().maxCoeff());
    }
    out.upper = max_abs.rowwise().sum().maxCoeff();

    // Random probes: f_j = sum_k F(j,k) psi_k with unit-norm rows of F.
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd F(Q, K), G(Q, K);
    for (std::size_t probe = 0; probe < random_probes; ++probe) {
        for (Eigen::Index j = 0; j < Q; ++j) {
            for (Eigen::Index k = 0; k < K; ++k) F(j, k) = normal(gen);
            F.row(j).normalize();
        }
        for (Eigen::Index k = 0; k < K; ++k) G.col(k) = B[static_cast<std::size_t>(k)] * F.col(k);
        out.lower = std::max(out.lower, G.rowwise().norm().maxCoeff());
    }
    return out;
}

double aleph(const PartSepCov& cov, double lambda2)
{
    cov.validate();
    check_lambda2(lambda2);
    const double shrink = cov.nu[0] / (cov.nu[0] + lambda2); // largest over k since nu is non-increasing
    Eigen::MatrixXd off = cov.correlation().cwiseAbs();
    off.diagonal().setZero();
    return shrink * off.rowwise().sum().maxCoeff();
}

double kappa_ceiling(corr_kind kind, double rho)
{
    const double r = std::abs(rho);
    if (kind == corr_kind::ar1) return 1.0 + 3.0 * r / (1.0 - r);
    if (r == 0.0) return 1.0;
    const double root = std::sqrt(1.0 - 4.0 * r * r);
    const double theta = (1.0 - root) / (2.0 * r);
    return 1.0 + 2.0 * theta / ((1.0 - theta) * root);
}

double aleph_ceiling(corr_kind kind, double rho)
{
    const double r = std::abs(rho);
    return kind == corr_kind::ar1 ? 2.0 * r / (1.0 - r) : 2.0 * r;
}

ConditionReport check_conditions(const PartSepCov& cov, double lambda2)
{
    const KappaBound kb = kappa_bound(cov, lambda2);
    ConditionReport rep;
    rep.kind = to_string(cov.kind);
    rep.rho = cov.rho;
    rep.q = cov.q;
    rep.K = static_cast<std::size_t>(cov.nu.size());
    rep.lambda2 = lambda2;
    rep.kappa_upper = kb.upper;
    rep.kappa_lower = kb.lower;
    rep.kappa_ceiling = kappa_ceiling(cov.kind, cov.rho);
    rep.aleph = aleph(cov, lambda2);
    rep.aleph_ceiling = aleph_ceiling(cov.kind, cov.rho);
    rep.c4_satisfied = rep.aleph < 1.0;
    rep.tau = cov.nu.sum();
    rep.tail_bound = cov.nu[cov.nu.size() - 1] * static_cast<double>(cov.q);
    return rep;
}

} // namespace fenet
