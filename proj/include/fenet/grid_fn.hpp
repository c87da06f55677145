#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <functional>
#include <memory>

namespace fenet {

/**
 * Uniform grid on [0,1] with trapezoid quadrature weights.
 *
 * Points are t_m = m / (T-1) for m = 0..T-1; weights are (h/2, h, ..., h, h/2)
 * with h = 1/(T-1), so they sum to one.
 */
class Grid
{
public:
    static constexpr std::size_t default_size = 201;

    explicit Grid(std::size_t num_points = default_size);

    std::size_t size() const noexcept { return static_cast<std::size_t>(points_.size()); }
    double spacing() const noexcept { return spacing_; }
    const Eigen::VectorXd& points() const noexcept { return points_; }
    const Eigen::VectorXd& weights() const noexcept { return weights_; }

    // Uniform grids are identified by their size.
    bool operator==(const Grid& other) const noexcept { return size() == other.size(); }

private:
    Eigen::VectorXd points_;
    Eigen::VectorXd weights_;
    double spacing_;
};

using grid_ptr = std::shared_ptr<const Grid>;

inline grid_ptr make_grid(std::size_t num_points = Grid::default_size)
{
    return std::make_shared<const Grid>(num_points);
}

// Throws data_error when the two grids differ.
void require_same_grid(const Grid& a, const Grid& b);

/// A real function on [0,1] held by its values on a grid.
class GridFunction
{
public:
    GridFunction(grid_ptr grid, Eigen::VectorXd values);

    // Zero function.
    explicit GridFunction(grid_ptr grid);

    static GridFunction from(grid_ptr grid, const std::function<double(double)>& f);

    const Grid& grid() const noexcept { return *grid_; }
    const grid_ptr& grid_handle() const noexcept { return grid_; }
    const Eigen::VectorXd& values() const noexcept { return values_; }
    Eigen::VectorXd& values() noexcept { return values_; }

    GridFunction& operator+=(const GridFunction& other);
    GridFunction& operator-=(const GridFunction& other);
    GridFunction& operator*=(double scale);

private:
    grid_ptr grid_;
    Eigen::VectorXd values_;
};

GridFunction operator+(GridFunction a, const GridFunction& b);
GridFunction operator-(GridFunction a, const GridFunction& b);
GridFunction operator*(double scale, GridFunction f);

/// Quadrature inner product sum_m w_m f(t_m) g(t_m).
double inner(const GridFunction& f, const GridFunction& g);

double norm2(const GridFunction& f);

// Batched quadrature on raw value arrays. Rows of `curves` are functions on
// `grid`; the result is curves * diag(w) * other^T.
Eigen::MatrixXd inner_rows(const Grid& grid,
                           const Eigen::Ref<const Eigen::MatrixXd>& curves,
                           const Eigen::Ref<const Eigen::MatrixXd>& other);

double inner_values(const Grid& grid,
                    const Eigen::Ref<const Eigen::VectorXd>& f,
                    const Eigen::Ref<const Eigen::VectorXd>& g);

} // namespace fenet
