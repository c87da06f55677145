#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace fenet {

enum class corr_kind { ma1, ar1 };

std::string to_string(corr_kind kind);
corr_kind corr_kind_from_string(std::string_view name);

/**
 * Partially separable covariance of q signal predictors: the k-th score
 * vector has covariance nu_k R, with R an MA(1) or AR(1) correlation matrix
 * and all predictors sharing the eigenfunctions psi_k. nu is truncated at K.
 */
struct PartSepCov
{
    corr_kind kind = corr_kind::ar1;
    double rho = 0.0;
    Eigen::VectorXd nu = default_nu(50);
    std::size_t q = 5;

    /// nu_k = exp(-(k-1)/4), so nu_1 = 1.
    static Eigen::VectorXd default_nu(std::size_t K);

    void validate() const;
    Eigen::MatrixXd correlation() const;
};

/// B_k = R (R + (lambda2/nu_k) I)^{-1} for the 0-based index k into nu.
Eigen::MatrixXd b_matrix(const PartSepCov& cov, double lambda2, std::size_t k);

struct KappaBound
{
    double upper = 0.0; // max_j sum_j' max_k |B_k,jj'|
    double lower = 0.0; // best probe value of |T (T + lambda2)^{-1} f|_inf with |f|_inf <= 1
};

KappaBound kappa_bound(const PartSepCov& cov, double lambda2, std::size_t random_probes = 64,
                       std::uint64_t seed = 1);

/// max_j sum_{j' != j} max_k nu_k/(nu_k + lambda2) |R_jj'|.
double aleph(const PartSepCov& cov, double lambda2);

/// Closed-form ceilings valid for every lambda2 and q.
double kappa_ceiling(corr_kind kind, double rho);
double aleph_ceiling(corr_kind kind, double rho);

struct ConditionReport
{
    std::string kind;
    double rho = 0.0;
    std::size_t q = 0;
    std::size_t K = 0;
    double lambda2 = 0.0;
    double kappa_upper = 0.0;
    double kappa_lower = 0.0;
    double kappa_ceiling = 0.0;
    double aleph = 0.0;
    double aleph_ceiling = 0.0;
    bool c4_satisfied = false;
    double tau = 0.0;        // sum of the retained nu_k
    double tail_bound = 0.0; // nu_K q, bounds the neglected nu_{K+1} q
};

ConditionReport check_conditions(const PartSepCov& cov, double lambda2);

} // namespace fenet
