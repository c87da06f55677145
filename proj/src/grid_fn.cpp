#include <algorithm>
#include <fenet/grid_fn.hpp>
#include <fenet/error.hpp>

#include <cmath>
#include <string>

namespace fenet {

Grid::Grid(std::size_t num_points)
{
    if (num_points < 2) {
        throw config_error("grid needs at least 2 points, got " + std::to_string(num_points));
    }
    const auto T = static_cast<Eigen::Index>(num_points);
    spacing_ = 1.0 / static_cast<double>(T - 1);
    points_.resize(T);
    weights_.setConstant(T, spacing_);
    for (Eigen::Index m = 0; m < T; ++m) {
        points_[m] = static_cast<double>(m) / static_cast<double>(T - 1);
    }
    weights_[0] = 0.5 * spacing_;
    weights_[T - 1] = 0.5 * spacing_;
}

void require_same_grid(const Grid& a, const Grid& b)
{
    if (!(a == b)) {
        throw data_error("incompatible discretizations: grid of " + std::to_string(a.size()) +
                         " points vs grid of " + std::to_string(b.size()) + " points");
    }
}

GridFunction::GridFunction(grid_ptr grid, Eigen::VectorXd values)
    : grid_(std::move(grid)), values_(std::move(values))
{
    if (!grid_) throw config_error("GridFunction requires a grid");
    if (static_cast<std::size_t>(values_.size()) != grid_->size()) {
        throw data_error("GridFunction has " + std::to_string(values_.size()) +
                         " values for a grid of " + std::to_string(grid_->size()) + " points");
    }
}

GridFunction::GridFunction(grid_ptr grid)
    : GridFunction(grid, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid ? grid->size() : 0)))
{}

GridFunction GridFunction::from(grid_ptr grid, const std::function<double(double)>& f)
{
    Eigen::VectorXd values(static_cast<Eigen::Index>(grid->size()));
    for (Eigen::Index m = 0; m < values.size(); ++m) values[m] = f(grid->points()[m]);
    return GridFunction(std::move(grid), std::move(values));
}

GridFunction& GridFunction::operator+=(const GridFunction& other)
{
    require_same_grid(*grid_, *other.grid_);
    values_ += other.values_;
    return *this;
}

GridFunction& GridFunction::operator-=(const GridFunction& other)
{
    require_same_grid(*grid_, *other.grid_);
    values_ -= other.values_;
    return *this;
}

GridFunction& GridFunction::operator*=(double scale)
{
    values_ *= scale;
    return *this;
}

GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
GridFunction operator*(double scale, GridFunction f) { return f *= scale; }

double inner(const GridFunction& f, const GridFunction& g)
{
    require_same_grid(f.grid(), g.grid());
    return inner_values(f.grid(), f.values(), g.values());
}

double norm2(const GridFunction& f)
{
    return std::sqrt(std::max(0.0, inner(f, f)));
}

double inner_values(const Grid& grid,
                    const Eigen::Ref<const Eigen::VectorXd>& f,
                    const Eigen::Ref<const Eigen::VectorXd>& g)
{
    if (static_cast<std::size_t>(f.size()) != grid.size() ||
        static_cast<std::size_t>(g.size()) != grid.size()) {
        throw data_error("inner product arguments do not match the grid size");
    }
    return (grid.weights().array() * f.array() * g.array()).sum();
}

Eigen::MatrixXd inner_rows(const Grid& grid,
                           const Eigen::Ref<const Eigen::MatrixXd>& curves,
                           const Eigen::Ref<const Eigen::MatrixXd>& other)
{
    const auto T = static_cast<Eigen::Index>(grid.size());
    if (curves.cols() != T || other.cols() != T) {
        throw data_error("curve matrices must have one column per grid point (" +
                         std::to_string(T) + ")");
    }
    return (curves * grid.weights().asDiagonal()) * other.transpose();
}

} // namespace fenet
