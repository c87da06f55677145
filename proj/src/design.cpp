#include <fenet/design.hpp>
#include <fenet/error.hpp>
#include "linalg.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <string>

namespace fenet {

void Dataset::validate() const
{
    if (!grid) throw data_error("dataset has no grid");
    const auto T = static_cast<Eigen::Index>(grid->size());
    const auto nn = y.size();
    for (std::size_t j = 0; j < curves.size(); ++j) {
        if (curves[j].rows() != nn || curves[j].cols() != T) {
            throw data_error("predictor " + std::to_string(j) + " has shape " +
                             std::to_string(curves[j].rows()) + "x" + std::to_string(curves[j].cols()) +
                             ", expected " + std::to_string(nn) + "x" + std::to_string(T));
        }
    }
    if (signal.size() != 0 && signal.size() != nn) {
        throw data_error("signal vector length does not match the number of samples");
    }
}

std::string to_string(psi_kind kind)
{
    return kind == psi_kind::identity ? "identity" : "cov_floor";
}

psi_kind psi_kind_from_string(std::string_view name)
{
    if (name == "identity") return psi_kind::identity;
    if (name == "cov_floor") return psi_kind::cov_floor;
    throw config_error("unknown penalty operator '" + std::string(name) + "'");
}

void HyperParams::validate() const
{
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw config_error("lambda must be >= 0");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw config_error("alpha must lie in [0,1]");
    if (s < 1) throw config_error("s must be >= 1");
    if (!(theta >= 0.0)) throw config_error("theta must be >= 0");
    if (!(lambda3 >= 0.0)) throw config_error("lambda3 must be >= 0");
}

Dataset center_with(const Dataset& data, const CenteringMeans& means)
{
    data.validate();
    if (means.curve_means.size() != data.p()) {
        throw data_error("centering means cover " + std::to_string(means.curve_means.size()) +
                         " predictors, data has " + std::to_string(data.p()));
    }
    Dataset out = data;
    for (std::size_t j = 0; j < data.p(); ++j) {
        if (means.curve_means[j].size() != data.curves[j].cols()) {
            throw data_error("centering mean curve does not match the grid");
        }
        out.curves[j].rowwise() -= means.curve_means[j].transpose();
    }
    out.y.array() -= means.response_mean;
    out.centering = means;
    return out;
}

Dataset center(const Dataset& data)
{
    data.validate();
    if (data.n() < 2) throw data_error("centering needs at least 2 samples");
    CenteringMeans means;
    means.curve_means.reserve(data.p());
    for (const auto& X : data.curves) means.curve_means.push_back(X.colwise().mean().transpose());
    means.response_mean = data.y.mean();
    return center_with(data, means);
}

Dataset transform_predictors(const Dataset& data, std::span<const SqrtKernelOp> ops)
{
    data.validate();
    if (ops.size() != 1 && ops.size() != data.p()) {
        throw config_error("need one kernel per predictor or a single shared kernel");
    }
    Dataset out = data;
    for (std::size_t j = 0; j < data.p(); ++j) {
        const auto& op = ops.size() == 1 ? ops[0] : ops[j];
        require_same_grid(op.grid(), *data.grid);
        out.curves[j] = apply_sqrt_rows(op, data.curves[j]);
    }
    if (data.centering) {
        for (std::size_t j = 0; j < data.p(); ++j) {
            const auto& op = ops.size() == 1 ? ops[0] : ops[j];
            out.centering->curve_means[j] = op.matrix() * data.centering->curve_means[j];
        }
    }
    return out;
}

namespace {

EmpiricalEigen finish_eigen(const Grid& grid, const Eigen::Ref<const Eigen::MatrixXd>& curves,
                            Eigen::MatrixXd phi, std::size_t requested, std::size_t rank)
{
    const double n = static_cast<double>(curves.rows());
    for (Eigen::Index k = 0; k < phi.cols(); ++k) detail::fix_sign(phi.col(k));
    EmpiricalEigen out;
    out.scores = (curves * grid.weights().asDiagonal()) * phi;
    out.rho = out.scores.colwise().squaredNorm().transpose() / n;
    out.phi = std::move(phi);
    out.requested = requested;
    out.rank = rank;
    return out;
}

std::size_t numerical_rank(const Eigen::VectorXd& desc)
{
    if (desc.size() == 0 || !(desc[0] > 0.0)) return 0;
    std::size_t r = 0;
    while (static_cast<Eigen::Index>(r) < desc.size() && desc[r] > eigen_rank_tolerance * desc[0]) ++r;
    return r;
}

} // namespace

EmpiricalEigen empirical_eigen(const Grid& grid, const Eigen::Ref<const Eigen::MatrixXd>& curves,
                               std::size_t M, eigen_route route)
{
    const auto T = static_cast<Eigen::Index>(grid.size());
    if (curves.cols() != T) throw data_error("curve matrix does not match the grid");
    const Eigen::Index nn = curves.rows();
    if (nn < 1) throw data_error("empirical eigendecomposition needs at least one curve");
    if (M < 1) throw config_error("number of eigenfunctions must be >= 1");
    const double n = static_cast<double>(nn);

    if (route == eigen_route::automatic) route = nn <= T ? eigen_route::dual : eigen_route::primal;

    if (route == eigen_route::dual) {
        const Eigen::MatrixXd G = inner_rows(grid, curves, curves) / n;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(G);
        if (solver.info() != Eigen::Success) throw numerical_error("Gram eigendecomposition failed");
        const Eigen::VectorXd evals = solver.eigenvalues().reverse();
        const std::size_t rank = numerical_rank(evals);
        const auto m = static_cast<Eigen::Index>(std::min(M, rank));
        Eigen::MatrixXd phi(T, m);
        for (Eigen::Index k = 0; k < m; ++k) {
            const auto v = solver.eigenvectors().col(nn - 1 - k);
            phi.col(k) = curves.transpose() * v / std::sqrt(n * evals[k]);
        }
        return finish_eigen(grid, curves, std::move(phi), M, rank);
    }

    const Eigen::VectorXd sqrt_w = grid.weights().cwiseSqrt();
    const Eigen::MatrixXd Xw = curves * sqrt_w.asDiagonal();
    const Eigen::MatrixXd C = (Xw.transpose() * Xw) / n;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(C);
    if (solver.info() != Eigen::Success) throw numerical_error("covariance eigendecomposition failed");
    const Eigen::VectorXd evals = solver.eigenvalues().reverse();
    const std::size_t rank = numerical_rank(evals);
    const auto m = static_cast<Eigen::Index>(std::min(M, rank));
    Eigen::MatrixXd phi(T, m);
    for (Eigen::Index k = 0; k < m; ++k) {
        phi.col(k) = solver.eigenvectors().col(T - 1 - k).cwiseQuotient(sqrt_w);
    }
    return finish_eigen(grid, curves, std::move(phi), M, rank);
}

DesignBasis compute_basis(const Dataset& transformed, std::size_t s_max, const DesignOptions& options)
{
    transformed.validate();
    DesignBasis basis;
    basis.grid = transformed.grid;
    basis.n = transformed.n();
    basis.blocks.reserve(transformed.p());
    basis.scale.assign(transformed.p(), 1.0);
    for (std::size_t j = 0; j < transformed.p(); ++j) {
        auto eig = empirical_eigen(*transformed.grid, transformed.curves[j], s_max, options.route);
        if (options.standardize && eig.size() > 0) {
            const double c = 1.0 / std::sqrt(eig.rho[0]);
            eig.scores *= c;
            eig.rho *= c * c;
            basis.scale[j] = c;
        }
        basis.blocks.push_back(std::move(eig));
    }
    return basis;
}

ReducedRankDesign::ReducedRankDesign(grid_ptr grid, std::size_t n, std::vector<DesignBlock> blocks,
                                     psi_kind psi, double theta)
    : grid_(std::move(grid)), n_(n), blocks_(std::move(blocks)), psi_(psi), theta_(theta)
{
    for (const auto& b : blocks_) {
        if (static_cast<std::size_t>(b.gamma.rows()) != n_ || b.gamma.cols() != b.rho.size() ||
            b.h.size() != b.rho.size() || b.phi.cols() != b.rho.size()) {
            throw data_error("inconsistent design block shapes");
        }
    }
}

ReducedRankDesign slice_design(const DesignBasis& basis, std::size_t s, psi_kind psi, double theta)
{
    if (s < 1) throw config_error("s must be >= 1");
    if (!(theta >= 0.0)) throw config_error("theta must be >= 0");
    std::vector<DesignBlock> blocks;
    blocks.reserve(basis.p());
    for (std::size_t j = 0; j < basis.p(); ++j) {
        const auto& eig = basis.blocks[j];
        const auto m = static_cast<Eigen::Index>(std::min(s, eig.size()));
        if (psi == psi_kind::cov_floor && theta == 0.0 && static_cast<std::size_t>(m) < s) {
            throw numerical_error("predictor " + std::to_string(j) + " has rank " +
                                  std::to_string(eig.rank) + " < s = " + std::to_string(s) +
                                  ", so H is singular with theta = 0; use theta > 0 or the identity penalty");
        }
        DesignBlock b;
        b.phi = eig.phi.leftCols(m);
        b.rho = eig.rho.head(m);
        b.gamma = eig.scores.leftCols(m);
        b.h = psi == psi_kind::cov_floor ? Eigen::VectorXd(b.rho.array() + theta)
                                         : Eigen::VectorXd::Ones(m);
        if (m > 0 && !(b.h.minCoeff() > 0.0)) {
            throw numerical_error("penalty matrix of predictor " + std::to_string(j) + " is singular");
        }
        b.scale = basis.scale[j];
        blocks.push_back(std::move(b));
    }
    return ReducedRankDesign(basis.grid, basis.n, std::move(blocks), psi, theta);
}

ReducedRankDesign build_design(const Dataset& transformed, const HyperParams& hp, const DesignOptions& options)
{
    hp.validate();
    return slice_design(compute_basis(transformed, hp.s, options), hp.s, options.psi, hp.theta);
}

namespace {

template <class PhiOf, class ScaleOf>
std::vector<Eigen::MatrixXd> project_impl(const Grid& grid, std::size_t p, const Dataset& transformed,
                                          PhiOf phi_of, ScaleOf scale_of)
{
    transformed.validate();
    require_same_grid(grid, *transformed.grid);
    if (transformed.p() != p) {
        throw data_error("data has " + std::to_string(transformed.p()) + " predictors, design has " +
                         std::to_string(p));
    }
    std::vector<Eigen::MatrixXd> out(p);
    for (std::size_t j = 0; j < p; ++j) {
        out[j] = (transformed.curves[j] * grid.weights().asDiagonal()) * phi_of(j);
        out[j] *= scale_of(j);
    }
    return out;
}

} // namespace

std::vector<Eigen::MatrixXd> project_scores(const ReducedRankDesign& design, const Dataset& transformed)
{
    return project_impl(
        design.grid(), design.p(), transformed,
        [&](std::size_t j) -> const Eigen::MatrixXd& { return design.block(j).phi; },
        [&](std::size_t j) { return design.block(j).scale; });
}

std::vector<Eigen::MatrixXd> project_scores(const DesignBasis& basis, const Dataset& transformed)
{
    return project_impl(
        *basis.grid, basis.p(), transformed,
        [&](std::size_t j) -> const Eigen::MatrixXd& { return basis.blocks[j].phi; },
        [&](std::size_t j) { return basis.scale[j]; });
}

namespace {

bool is_active(const Eigen::VectorXd& c)
{
    return c.size() > 0 && (c.array() != 0.0).any();
}

} // namespace

Eigen::VectorXd linear_predictor(const std::vector<Eigen::MatrixXd>& scores, const CoefBlocks& coef)
{
    if (scores.size() != coef.size()) throw data_error("score and coefficient block counts differ");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(scores.empty() ? 0 : scores[0].rows());
    for (std::size_t j = 0; j < coef.size(); ++j) {
        if (!is_active(coef[j])) continue;
        if (scores[j].cols() < coef[j].size()) throw data_error("score block narrower than coefficients");
        out.noalias() += scores[j].leftCols(coef[j].size()) * coef[j];
    }
    return out;
}

Eigen::VectorXd fitted_values(const ReducedRankDesign& design, const CoefBlocks& coef)
{
    if (coef.size() != design.p()) throw data_error("coefficient block count does not match design");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(design.n()));
    for (std::size_t j = 0; j < coef.size(); ++j) {
        if (!is_active(coef[j])) continue;
        out.noalias() += design.block(j).gamma.leftCols(coef[j].size()) * coef[j];
    }
    return out;
}

Eigen::MatrixXd surrogate_curves(const ReducedRankDesign& design, const CoefBlocks& coef)
{
    if (coef.size() != design.p()) throw data_error("coefficient block count does not match design");
    const auto T = static_cast<Eigen::Index>(design.grid().size());
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(design.p()), T);
    for (std::size_t j = 0; j < coef.size(); ++j) {
        if (!is_active(coef[j])) continue;
        const auto& b = design.block(j);
        out.row(static_cast<Eigen::Index>(j)) =
            (b.scale * (b.phi.leftCols(coef[j].size()) * coef[j])).transpose();
    }
    return out;
}

Eigen::MatrixXd beta_curves(const Eigen::MatrixXd& surrogate, std::span<const SqrtKernelOp> ops)
{
    const auto p = static_cast<std::size_t>(surrogate.rows());
    if (ops.size() != 1 && ops.size() != p) {
        throw config_error("need one kernel per predictor or a single shared kernel");
    }
    Eigen::MatrixXd out(surrogate.rows(), surrogate.cols());
    for (std::size_t j = 0; j < p; ++j) {
        const auto& op = ops.size() == 1 ? ops[0] : ops[j];
        const auto row = static_cast<Eigen::Index>(j);
        out.row(row) = surrogate.row(row) * op.matrix().transpose();
    }
    return out;
}

std::vector<std::size_t> selected_blocks(const CoefBlocks& coef)
{
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < coef.size(); ++j) {
        if (is_active(coef[j])) out.push_back(j);
    }
    return out;
}

} // namespace fenet
