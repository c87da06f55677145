#pragma once

#include <fenet/design.hpp>

#include <Eigen/Core>
#include <vector>

namespace fenet {

/// Post-selection ridge refit on a selected set. c has one entry per predictor
/// of the design; entries outside `selected` are empty.
struct RefinedFit
{
    std::vector<std::size_t> selected;
    CoefBlocks c;
    double lambda3 = 0.0;
};

/**
 * Stacked ridge solution on the selected predictors,
 *
 *   c = (1/n) ((1/n) G^T G + lambda3 I)^{-1} G^T Y,   G = [Gamma_j, j in selected],
 *
 * solved with a Cholesky factorization of the full cross-block Gram.
 * Throws config_error for an empty selection and numerical_error when the
 * system is singular (lambda3 = 0 with rank-deficient G).
 */
RefinedFit fit_refined(const ReducedRankDesign& design, const Eigen::VectorXd& y,
                       const std::vector<std::size_t>& selected, double lambda3);

/// Coefficients for every predictor of the design, zero outside the selected set.
CoefBlocks refined_blocks(const ReducedRankDesign& design, const RefinedFit& fit);

} // namespace fenet
