#pragma once

#include <fenet/grid_fn.hpp>
#include <fenet/kernels.hpp>

#include <Eigen/Core>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fenet {

/**
 * Ground truth attached to simulated data.
 *
 * `beta` holds the true coefficient curves on the grid (rows for predictors
 * outside the signal set are zero). The generator fields describe the
 * predictor distribution X_j = sqrt(2) sum_k z_jk sqrt(nu_k) cos(k pi t)
 * with corr(z_jk, z_j'k) = rho^|j-j'|; `basis_coef(j, k-1)` is
 * <sqrt(2) cos(k pi .), beta_j>. They are empty when unknown.
 */
struct Truth
{
    std::vector<std::size_t> signal_set;
    Eigen::MatrixXd beta;       // p x T
    Eigen::MatrixXd basis_coef; // p x K
    Eigen::VectorXd nu;         // K
    double rho = 0.0;
    Eigen::MatrixXi signs;      // q x K sign draws u_jk
    std::string scenario;

    bool has_generator() const noexcept { return nu.size() > 0 && basis_coef.rows() > 0; }
};

struct CenteringMeans
{
    std::vector<Eigen::VectorXd> curve_means; // p vectors of length T
    double response_mean = 0.0;
};

/**
 * n samples of p functional predictors and a scalar response.
 *
 * curves[j] is an n x T matrix whose row i is X_ij on the grid.
 */
struct Dataset
{
    grid_ptr grid;
    std::vector<Eigen::MatrixXd> curves;
    Eigen::VectorXd y;
    Eigen::VectorXd signal; // noiseless mean response when simulated, else empty
    std::optional<double> noise_sd;
    std::shared_ptr<const Truth> truth;
    std::optional<CenteringMeans> centering;

    std::size_t n() const noexcept { return static_cast<std::size_t>(y.size()); }
    std::size_t p() const noexcept { return curves.size(); }

    // Throws data_error on inconsistent shapes.
    void validate() const;
};

enum class psi_kind { identity, cov_floor };

std::string to_string(psi_kind kind);
psi_kind psi_kind_from_string(std::string_view name);

/**
 * Tuning parameters. The sparsity and ridge levels are lambda1 = alpha*lambda
 * and lambda2 = (1-alpha)*lambda; s is the number of eigenfunctions per
 * predictor, theta the eigenvalue floor inside the penalty operator and
 * lambda3 the ridge level of the refined estimator.
 */
struct HyperParams
{
    double lambda = 0.0;
    double alpha = 1.0;
    std::size_t s = 5;
    double theta = 0.1;
    double lambda3 = 0.0;

    double lambda1() const noexcept { return alpha * lambda; }
    double lambda2() const noexcept { return (1.0 - alpha) * lambda; }

    void validate() const;
};

/// Subtracts per-predictor mean curves and the response mean.
Dataset center(const Dataset& data);

/// Centers with externally supplied means, e.g. training means applied to test data.
Dataset center_with(const Dataset& data, const CenteringMeans& means);

/// Replaces every curve by its image under the square-root kernel operator.
/// `ops` holds one operator per predictor or a single shared one.
Dataset transform_predictors(const Dataset& data, std::span<const SqrtKernelOp> ops);

enum class eigen_route { automatic, dual, primal };

/**
 * Leading eigenpairs of the empirical covariance operator of one predictor.
 *
 * phi is T x M with quadrature-orthonormal columns, scores(i,k) = <X_i, phi_k>
 * and rho(k) = |scores(:,k)|^2 / n. M is the requested count truncated to the
 * numerical rank of the sample.
 */
struct EmpiricalEigen
{
    Eigen::MatrixXd phi;
    Eigen::VectorXd rho;
    Eigen::MatrixXd scores;
    std::size_t requested = 0;
    std::size_t rank = 0;

    std::size_t size() const noexcept { return static_cast<std::size_t>(rho.size()); }
};

inline constexpr double eigen_rank_tolerance = 1e-10;

/// The dual route factors the n x n Gram (1/n) X W X^T; the primal route the
/// T x T matrix (1/n) W^{1/2} X^T X W^{1/2}. `automatic` picks the smaller.
EmpiricalEigen empirical_eigen(const Grid& grid, const Eigen::Ref<const Eigen::MatrixXd>& curves,
                               std::size_t M, eigen_route route = eigen_route::automatic);

struct DesignOptions
{
    psi_kind psi = psi_kind::cov_floor;
    bool standardize = false; // rescale each predictor so its top eigenvalue is 1
    eigen_route route = eigen_route::automatic;
};

/**
 * Eigen bases of every predictor at the largest s of a search, computed once
 * and sliced per s.
 */
struct DesignBasis
{
    grid_ptr grid;
    std::size_t n = 0;
    std::vector<EmpiricalEigen> blocks;
    std::vector<double> scale; // per-predictor standardization factor (1 when off)

    std::size_t p() const noexcept { return blocks.size(); }
};

DesignBasis compute_basis(const Dataset& transformed, std::size_t s_max, const DesignOptions& options = {});

/**
 * Reduced-rank view of the data used by the solvers.
 *
 * For predictor j: gamma is the n x M_j score matrix, rho the empirical
 * eigenvalues (the diagonal of gamma^T gamma / n), h the diagonal of the
 * penalty matrix H_j and phi the eigenfunctions.
 */
struct DesignBlock
{
    Eigen::MatrixXd phi;
    Eigen::VectorXd rho;
    Eigen::MatrixXd gamma;
    Eigen::VectorXd h;
    double scale = 1.0;

    std::size_t size() const noexcept { return static_cast<std::size_t>(rho.size()); }
};

class ReducedRankDesign
{
public:
    ReducedRankDesign(grid_ptr grid, std::size_t n, std::vector<DesignBlock> blocks,
                      psi_kind psi, double theta);

    const Grid& grid() const noexcept { return *grid_; }
    const grid_ptr& grid_handle() const noexcept { return grid_; }
    std::size_t n() const noexcept { return n_; }
    std::size_t p() const noexcept { return blocks_.size(); }
    const DesignBlock& block(std::size_t j) const { return blocks_.at(j); }
    const std::vector<DesignBlock>& blocks() const noexcept { return blocks_; }
    psi_kind psi() const noexcept { return psi_; }
    double theta() const noexcept { return theta_; }

private:
    grid_ptr grid_;
    std::size_t n_;
    std::vector<DesignBlock> blocks_;
    psi_kind psi_;
    double theta_;
};

/// Slices a precomputed basis to s eigenfunctions and attaches the penalty matrices.
ReducedRankDesign slice_design(const DesignBasis& basis, std::size_t s, psi_kind psi, double theta);

/// One-shot construction from transformed, centered data.
ReducedRankDesign build_design(const Dataset& transformed, const HyperParams& hp,
                               const DesignOptions& options = {});

/// Per-block coefficient vectors c_j. A block that is empty or exactly zero is unselected.
using CoefBlocks = std::vector<Eigen::VectorXd>;

/// Scores of new (transformed, centered) curves against the design eigenfunctions,
/// including the standardization factor. One n_new x M_j matrix per predictor.
std::vector<Eigen::MatrixXd> project_scores(const ReducedRankDesign& design, const Dataset& transformed);
std::vector<Eigen::MatrixXd> project_scores(const DesignBasis& basis, const Dataset& transformed);

/// sum_j scores_j * c_j; scores may carry more columns than c_j.
Eigen::VectorXd linear_predictor(const std::vector<Eigen::MatrixXd>& scores, const CoefBlocks& coef);

/// Training-side fitted values sum_j gamma_j c_j.
Eigen::VectorXd fitted_values(const ReducedRankDesign& design, const CoefBlocks& coef);

/// Surrogate coefficient curves f_j = scale_j * phi_j c_j, as a p x T matrix.
Eigen::MatrixXd surrogate_curves(const ReducedRankDesign& design, const CoefBlocks& coef);

/// Coefficient curves beta_j = L_{K^{1/2}} f_j in the original predictor space.
Eigen::MatrixXd beta_curves(const Eigen::MatrixXd& surrogate, std::span<const SqrtKernelOp> ops);

std::vector<std::size_t> selected_blocks(const CoefBlocks& coef);

} // namespace fenet
