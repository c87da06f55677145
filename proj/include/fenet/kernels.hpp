#pragma once

#include <fenet/grid_fn.hpp>

#include <Eigen/Core>
#include <string>
#include <string_view>

namespace fenet {

enum class kernel_kind { cosine_bernoulli, sine_bernoulli, custom };

std::string to_string(kernel_kind kind);
kernel_kind kernel_kind_from_string(std::string_view name);

/**
 * Reproducing kernel on [0,1].
 *
 * The two closed-form kernels are built from the fourth Bernoulli polynomial
 * B4(x) = x^4 - 2x^3 + x^2 - 1/30:
 *
 *   cosine: K(s,t) = -(1/3) [B4(|s-t|/2) + B4((s+t)/2)]  = sum_k 2cos(k pi s)cos(k pi t)/(k pi)^4
 *   sine:   K(s,t) = -(1/3) [B4(|s-t|/2) - B4((s+t)/2)]  = sum_k 2sin(k pi s)sin(k pi t)/(k pi)^4
 *
 * A custom kernel is an explicit symmetric T x T matrix of values on a grid.
 */
struct KernelSpec
{
    kernel_kind kind = kernel_kind::cosine_bernoulli;
    Eigen::MatrixXd custom; // only for kernel_kind::custom

    static KernelSpec cosine() { return {kernel_kind::cosine_bernoulli, {}}; }
    static KernelSpec sine() { return {kernel_kind::sine_bernoulli, {}}; }
    static KernelSpec from_matrix(Eigen::MatrixXd values);
};

double bernoulli4(double x);

// Closed-form kernels only; s, t must lie in [0,1].
double eval_kernel(const KernelSpec& spec, double s, double t);

// Kernel values on the grid, K[m, l] = K(t_m, t_l). Validates symmetry and
// positive semi-definiteness for custom kernels.
Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, const Grid& grid);

/**
 * Spectral square root of a kernel's integral operator on a grid.
 *
 * Holds the retained eigenpairs (theta_m, phi_m) of f -> int K(s,.) f(s) ds,
 * with phi_m orthonormal under the quadrature inner product and theta
 * non-increasing. The operator itself is precomputed as a T x T matrix that
 * acts on value vectors.
 */
class SqrtKernelOp
{
public:
    SqrtKernelOp(grid_ptr grid, Eigen::VectorXd eigenvalues, Eigen::MatrixXd eigenfunctions);

    const Grid& grid() const noexcept { return *grid_; }
    const grid_ptr& grid_handle() const noexcept { return grid_; }
    std::size_t rank() const noexcept { return static_cast<std::size_t>(eigenvalues_.size()); }

    // theta_1 >= theta_2 >= ... > floor.
    const Eigen::VectorXd& eigenvalues() const noexcept { return eigenvalues_; }
    // T x rank; column m holds phi_m on the grid.
    const Eigen::MatrixXd& eigenfunctions() const noexcept { return eigenfunctions_; }

    // Row-vector form: applying to each row of a (n x T) matrix X gives X * matrix()^T.
    const Eigen::MatrixXd& matrix() const noexcept { return sqrt_matrix_; }

private:
    grid_ptr grid_;
    Eigen::VectorXd eigenvalues_;
    Eigen::MatrixXd eigenfunctions_;
    Eigen::MatrixXd sqrt_matrix_;
};

inline constexpr double default_floor_ratio = 1e-12;

SqrtKernelOp spectral_sqrt(const KernelSpec& spec, grid_ptr grid,
                           double floor_ratio = default_floor_ratio);

GridFunction apply_sqrt(const SqrtKernelOp& op, const GridFunction& f);

// Applies the square-root operator to every row of an (n x T) curve matrix.
Eigen::MatrixXd apply_sqrt_rows(const SqrtKernelOp& op, const Eigen::Ref<const Eigen::MatrixXd>& curves);

// Full integral operator by quadrature, (L_K f)(t_l) = sum_m w_m K(t_m, t_l) f(t_m).
GridFunction apply_kernel(const KernelSpec& spec, const GridFunction& f);

} // namespace fenet
