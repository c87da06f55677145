#pragma once

#include <fenet/design.hpp>

#include <Eigen/Core>
#include <cstddef>
#include <vector>

namespace fenet {

/**
 * One block of the coordinate-descent problem,
 *
 *   min_d  (1/2) d^T Omega d - varrho^T d + lambda1 |d|_2,
 *
 * with Omega symmetric positive definite.
 */
struct BlockProblem
{
    Eigen::MatrixXd omega;
    Eigen::VectorXd varrho;
    double lambda1 = 0.0;
};

/**
 * Exact block minimizer.
 *
 * Returns the zero vector when |varrho|_2 <= lambda1. Otherwise solves
 * Omega d - varrho + lambda1 d / |d| = 0. A diagonal Omega is handled by a
 * bracketed scalar root find on s = |d|; a dense Omega is rotated to its
 * eigenbasis first, which leaves |d| unchanged and makes it diagonal.
 * `d_init` is accepted for interface symmetry with the iterative solver and
 * does not affect the result.
 */
Eigen::VectorXd solve_block(const BlockProblem& prob, const Eigen::VectorXd& d_init);

/// Diagonal fast path, omega given by its diagonal.
Eigen::VectorXd solve_block_diagonal(const Eigen::VectorXd& omega, const Eigen::VectorXd& varrho,
                                     double lambda1);

/// Fixed-point iteration d <- (Omega + lambda1/|d| I)^{-1} varrho. Slower and
/// only linearly convergent; kept as an independent check on solve_block.
Eigen::VectorXd solve_block_fixed_point(const BlockProblem& prob, const Eigen::VectorXd& d_init,
                                        std::size_t max_iter = 100000, double tol = 1e-14);

/// Stationarity residual |Omega d - varrho + lambda1 d/|d||_inf for d != 0,
/// or the slack lambda1 - |varrho| for d = 0 (negative means violated).
double block_residual(const BlockProblem& prob, const Eigen::VectorXd& d);

struct FitOptions
{
    double tol_outer = 1e-9;   // relative objective decrease between sweeps
    std::size_t max_sweeps = 500;
    double kkt_tol = 1e-8;     // acceptance: max violation <= kkt_tol * (1 + |Y|_inf)
};

struct KktReport
{
    // Active blocks: stationarity residual (inf-norm). Inactive blocks: slack
    // lambda1 - |varrho_j|, negative when violated.
    std::vector<double> block_value;
    std::vector<bool> active;
    double max_violation = 0.0;
};

/**
 * Result of a functional elastic-net fit.
 *
 * d holds the blocks in the H^{1/2}-scaled parameterization, c = H^{-1/2} d the
 * coefficient vectors on the eigenfunctions. Deselected blocks are exact zeros.
 * objective_trace[0] is the starting objective, followed by one entry per sweep.
 */
struct FEnetFit
{
    CoefBlocks d;
    CoefBlocks c;
    std::vector<std::size_t> selected;
    std::vector<double> objective_trace;
    std::size_t sweeps = 0;
    bool converged = false;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    KktReport kkt;

    double objective() const { return objective_trace.empty() ? 0.0 : objective_trace.back(); }
};

/// Penalized objective in the d parameterization:
/// (1/2n)|Y - sum Gamma_j H_j^{-1/2} d_j|^2 + lambda1 sum |d_j| + (lambda2/2) sum d_j^T H_j^{-1} d_j.
double objective(const ReducedRankDesign& design, const Eigen::VectorXd& y, const CoefBlocks& d,
                 const HyperParams& hp);

/// Stationarity check of every block at the given point.
KktReport kkt_check(const CoefBlocks& d, const ReducedRankDesign& design, const Eigen::VectorXd& y,
                    const HyperParams& hp);

/**
 * Cyclic block coordinate descent.
 *
 * Starts from zero, or from `warm_start` (a previous fit's d blocks on the same
 * design). Stops once the relative objective decrease falls below tol_outer and
 * the KKT violation is within tolerance; returns converged = false after
 * max_sweeps. lambda = 0 is solved as unpenalized least squares.
 */
FEnetFit fit_fenet(const ReducedRankDesign& design, const Eigen::VectorXd& y, const HyperParams& hp,
                   const FitOptions& options = {}, const CoefBlocks* warm_start = nullptr);

/// Smallest lambda1 for which the first sweep from zero selects nothing.
double universal_threshold(const ReducedRankDesign& design, const Eigen::VectorXd& y);

} // namespace fenet
