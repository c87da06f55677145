#pragma once

#include <fenet/design.hpp>
#include <fenet/solver.hpp>

#include <Eigen/Core>
#include <cstddef>
#include <vector>

namespace fenet {

struct SelectionRates
{
    double fpr = 0.0;
    double fnr = 0.0;
};

/// FPR = |S^ n S^c| / |S^c| (0 when S^c is empty), FNR = |S^c^ n S| / |S| (0 when S is empty).
/// Indices are 0-based and must be < p.
SelectionRates selection_rates(const std::vector<std::size_t>& selected,
                               const std::vector<std::size_t>& signal, std::size_t p);

/// max_j |beta_hat_j - beta0_j|_2 over the rows of two p x T matrices.
double mnd(const Grid& grid, const Eigen::MatrixXd& beta_hat, const Eigen::MatrixXd& beta0);

/**
 * Relative excess risk from the generator series. With
 * a_jk = <sqrt2 cos(k pi .), beta_hat_j> - basis_coef(j,k) the numerator is
 * sum_k nu_k a_k^T Sigma_p a_k, Sigma_p[j,l] = rho^|j-l|; the denominator is
 * the same form in basis_coef.
 */
double rer_analytic(const Grid& grid, const Eigen::MatrixXd& beta_hat, const Truth& truth);

struct McEstimate
{
    double value = 0.0;
    double se = 0.0;
};

/**
 * Relative excess risk estimated on a simulated test set (raw, uncentered
 * curves with the noiseless `signal`): mean(e^2) / mean(signal^2) with
 * e_i = sum_j <X_ij, beta_hat_j> - signal_i. The standard error is the
 * delta-method error of the ratio.
 */
McEstimate rer_monte_carlo(const Eigen::MatrixXd& beta_hat, const Dataset& test);

/// (1/n) |y - sum_j scores_j c_j|^2 for centered test responses.
double mspe(const std::vector<Eigen::MatrixXd>& test_scores, const CoefBlocks& coef,
            const Eigen::VectorXd& y_centered);

struct RocPoint
{
    double lambda = 0.0;
    double fpr = 0.0;
    double tpr = 0.0;
    bool converged = true;
};

/**
 * Selection path over `lambdas` (ascending, all > 0) with the remaining
 * hyperparameters fixed. Fits run from the largest lambda down, each warm
 * started from the previous one; the result is returned in ascending order.
 */
std::vector<RocPoint> roc(const ReducedRankDesign& design, const Eigen::VectorXd& y, const HyperParams& hp,
                          const std::vector<double>& lambdas, const std::vector<std::size_t>& signal,
                          const FitOptions& options = {});

/// Trapezoid area under the (fpr, tpr) points closed with (0,0) and (1,1).
double roc_auc(const std::vector<RocPoint>& points);

/// Quantile by linear interpolation between order statistics, position prob*(n-1).
double quantile(std::vector<double> values, double prob);

struct Summary
{
    double median = 0.0;
    double lo = 0.0; // 2.5%
    double hi = 0.0; // 97.5%
    double mean = 0.0;
};

Summary summarize(const std::vector<double>& values);

} // namespace fenet
