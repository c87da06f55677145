#include <fenet/kernels.hpp>
#include <fenet/error.hpp>
#include "linalg.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <string>

namespace fenet {

std::string to_string(kernel_kind kind)
{
    switch (kind) {
        case kernel_kind::cosine_bernoulli: return "cosine_bernoulli";
        case kernel_kind::sine_bernoulli: return "sine_bernoulli";
        case kernel_kind::custom: return "custom";
    }
    return "unknown";
}

kernel_kind kernel_kind_from_string(std::string_view name)
{
    if (name == "cosine_bernoulli" || name == "cosine") return kernel_kind::cosine_bernoulli;
    if (name == "sine_bernoulli" || name == "sine") return kernel_kind::sine_bernoulli;
    if (name == "custom") return kernel_kind::custom;
    throw config_error("unknown kernel kind '" + std::string(name) + "'");
}

KernelSpec KernelSpec::from_matrix(Eigen::MatrixXd values)
{
    if (values.rows() != values.cols() || values.rows() == 0) {
        throw data_error("custom kernel must be a non-empty square matrix");
    }
    return {kernel_kind::custom, std::move(values)};
}

double bernoulli4(double x)
{
    // x^4 - 2x^3 + x^2 - 1/30 in Horner form
    return ((x - 2.0) * x + 1.0) * x * x - 1.0 / 30.0;
}

double eval_kernel(const KernelSpec& spec, double s, double t)
{
    if (!(s >= 0.0 && s <= 1.0 && t >= 0.0 && t <= 1.0)) {
        throw config_error("kernel arguments must lie in [0,1]");
    }
    const double diff = bernoulli4(std::abs(s - t) / 2.0);
    const double sum = bernoulli4((s + t) / 2.0);
    switch (spec.kind) {
        case kernel_kind::cosine_bernoulli: return -(diff + sum) / 3.0;
        case kernel_kind::sine_bernoulli: return -(diff - sum) / 3.0;
        case kernel_kind::custom: break;
    }
    throw config_error("custom kernels are only defined on their grid; use kernel_matrix");
}

Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, const Grid& grid)
{
    const auto T = static_cast<Eigen::Index>(grid.size());
    if (spec.kind == kernel_kind::custom) {
        if (spec.custom.rows() != T || spec.custom.cols() != T) {
            throw data_error("custom kernel is " + std::to_string(spec.custom.rows()) + "x" +
                             std::to_string(spec.custom.cols()) + " but the grid has " +
                             std::to_string(T) + " points");
        }
        const double scale = std::max(1.0, spec.custom.cwiseAbs().maxCoeff());
        const double asym = (spec.custom - spec.custom.transpose()).cwiseAbs().maxCoeff();
        if (asym > 1e-12 * scale) {
            throw numerical_error("custom kernel is not symmetric (max asymmetry " +
                                  std::to_string(asym) + ")");
        }
        return 0.5 * (spec.custom + spec.custom.transpose());
    }
    Eigen::MatrixXd K(T, T);
    const auto& pts = grid.points();
    for (Eigen::Index m = 0; m < T; ++m) {
        for (Eigen::Index l = 0; l <= m; ++l) {
            const double v = eval_kernel(spec, pts[m], pts[l]);
            K(m, l) = v;
            K(l, m) = v;
        }
    }
    return K;
}

SqrtKernelOp::SqrtKernelOp(grid_ptr grid, Eigen::VectorXd eigenvalues, Eigen::MatrixXd eigenfunctions)
    : grid_(std::move(grid)), eigenvalues_(std::move(eigenvalues)),
      eigenfunctions_(std::move(eigenfunctions))
{
    const auto T = static_cast<Eigen::Index>(grid_->size());
    if (eigenfunctions_.rows() != T || eigenfunctions_.cols() != eigenvalues_.size()) {
        throw data_error("eigenfunction matrix does not match grid and spectrum sizes");
    }
    // S f = sum_m sqrt(theta_m) <phi_m, f> phi_m = Phi diag(sqrt theta) Phi^T W f
    const Eigen::MatrixXd scaled = eigenfunctions_ * eigenvalues_.cwiseSqrt().asDiagonal();
    sqrt_matrix_ = scaled * (eigenfunctions_.transpose() * grid_->weights().asDiagonal());
}

SqrtKernelOp spectral_sqrt(const KernelSpec& spec, grid_ptr grid, double floor_ratio)
{
    if (!(floor_ratio > 0.0 && floor_ratio < 1.0)) {
        throw config_error("floor_ratio must lie in (0,1)");
    }
    const Eigen::MatrixXd K = kernel_matrix(spec, *grid);
    const Eigen::VectorXd sqrt_w = grid->weights().cwiseSqrt();
    const Eigen::MatrixXd A = sqrt_w.asDiagonal() * K * sqrt_w.asDiagonal();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(A);
    if (solver.info() != Eigen::Success) {
        throw numerical_error("kernel eigendecomposition failed");
    }
    // ascending -> descending
    const Eigen::VectorXd evals = solver.eigenvalues().reverse();
    const Eigen::MatrixXd evecs = solver.eigenvectors().rowwise().reverse();

    const double top = evals.size() ? evals[0] : 0.0;
    const double bottom = evals.size() ? evals[evals.size() - 1] : 0.0;
    if (bottom < -1e-10 * std::max(top, 0.0) && bottom < -1e-300) {
        throw numerical_error("kernel is not positive semi-definite (min eigenvalue " +
                              std::to_string(bottom) + ", max " + std::to_string(top) + ")");
    }

    Eigen::Index kept = 0;
    if (top > 0.0) {
        while (kept < evals.size() && evals[kept] > 0.0 && evals[kept] >= floor_ratio * top) ++kept;
    }

    Eigen::MatrixXd phi = sqrt_w.cwiseInverse().asDiagonal() * evecs.leftCols(kept);
    for (Eigen::Index m = 0; m < kept; ++m) {
        detail::fix_sign(phi.col(m));
    }
    return SqrtKernelOp(std::move(grid), evals.head(kept), std::move(phi));
}

GridFunction apply_sqrt(const SqrtKernelOp& op, const GridFunction& f)
{
    require_same_grid(op.grid(), f.grid());
    return GridFunction(f.grid_handle(), op.matrix() * f.values());
}

Eigen::MatrixXd apply_sqrt_rows(const SqrtKernelOp& op, const Eigen::Ref<const Eigen::MatrixXd>& curves)
{
    if (static_cast<std::size_t>(curves.cols()) != op.grid().size()) {
        throw data_error("curve matrix does not match the kernel grid");
    }
    return curves * op.matrix().transpose();
}

GridFunction apply_kernel(const KernelSpec& spec, const GridFunction& f)
{
    const Eigen::MatrixXd K = kernel_matrix(spec, f.grid());
    return GridFunction(f.grid_handle(), K * (f.grid().weights().asDiagonal() * f.values()));
}

} // namespace fenet
