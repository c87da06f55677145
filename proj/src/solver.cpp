#include <fenet/solver.hpp>
#include <fenet/error.hpp>
#include <fenet/refine.hpp>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <boost/math/tools/toms748_solve.hpp>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

namespace fenet {

Eigen::VectorXd solve_block_diagonal(const Eigen::VectorXd& omega, const Eigen::VectorXd& varrho,
                                     double lambda1)
{
    if (omega.size() != varrho.size()) throw data_error("block problem dimensions differ");
    if (!(lambda1 >= 0.0)) throw config_error("lambda1 must be >= 0");
    const Eigen::Index M = varrho.size();
    if (M == 0) return {};
    if (!(omega.minCoeff() > 0.0)) throw numerical_error("block matrix is not positive definite");

    const double norm = varrho.norm();
    if (norm <= lambda1) return Eigen::VectorXd::Zero(M);
    if (lambda1 == 0.0) return varrho.cwiseQuotient(omega);

    // |d| = s solves sum_k (varrho_k / (omega_k s + lambda1))^2 = 1, with the
    // left side strictly decreasing in s.
    auto excess = [&](double s) {
        return (varrho.array() / (omega.array() * s + lambda1)).square().sum() - 1.0;
    };
    double lo = (norm - lambda1) / omega.maxCoeff();
    double hi = (norm - lambda1) / omega.minCoeff();
    double flo = excess(lo);
    double fhi = excess(hi);

    // The root lies in [lo, hi] analytically; rounding can push a bracket end
    // value to the wrong sign when the bracket is very narrow.
    double s = 0.0;
    if (!std::isfinite(flo) || !std::isfinite(fhi)) {
        std::ostringstream msg;
        msg << "block root bracket failure: |varrho| = " << norm << ", lambda1 = " << lambda1
            << ", bracket [" << lo << ", " << hi << "] with values " << flo << ", " << fhi;
        throw numerical_error(msg.str());
    } else if (flo <= 0.0) {
        s = lo;
    } else if (fhi >= 0.0) {
        s = hi;
    } else {
        std::uintmax_t max_iter = 200;
        const auto [a, b] = boost::math::tools::toms748_solve(
            excess, lo, hi, flo, fhi, boost::math::tools::eps_tolerance<double>(52), max_iter);
        s = 0.5 * (a + b);
    }
    return (varrho.array() * s / (omega.array() * s + lambda1)).matrix();
}

namespace {

void check_block(const BlockProblem& prob)
{
    const auto M = prob.varrho.size();
    if (prob.omega.rows() != M || prob.omega.cols() != M) {
        throw data_error("block matrix must be " + std::to_string(M) + "x" + std::to_string(M));
    }
    if (!(prob.lambda1 >= 0.0)) throw config_error("lambda1 must be >= 0");
    if (M == 0) return;
    const double scale = std::max(1.0, prob.omega.cwiseAbs().maxCoeff());
    if ((prob.omega - prob.omega.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
        throw numerical_error("block matrix is not symmetric");
    }
}

bool is_diagonal(const Eigen::MatrixXd& A)
{
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
        for (Eigen::Index i = 0; i < A.rows(); ++i) {
            if (i != j && A(i, j) != 0.0) return false;
        }
    }
    return true;
}

} // namespace

Eigen::VectorXd solve_block(const BlockProblem& prob, const Eigen::VectorXd& /*d_init*/)
{
    check_block(prob);
    if (prob.varrho.size() == 0) return {};
    if (is_diagonal(prob.omega)) {
        return solve_block_diagonal(prob.omega.diagonal(), prob.varrho, prob.lambda1);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(prob.omega);
    if (eig.info() != Eigen::Success || !(eig.eigenvalues().minCoeff() > 0.0)) {
        throw numerical_error("block matrix is not positive definite");
    }
    const Eigen::MatrixXd& Q = eig.eigenvectors();
    const Eigen::VectorXd rotated = Q.transpose() * prob.varrho;
    if (prob.varrho.norm() <= prob.lambda1) return Eigen::VectorXd::Zero(prob.varrho.size());
    return Q * solve_block_diagonal(eig.eigenvalues(), rotated, prob.lambda1);
}

Eigen::VectorXd solve_block_fixed_point(const BlockProblem& prob, const Eigen::VectorXd& d_init,
                                        std::size_t max_iter, double tol)
{
    check_block(prob);
    const auto M = prob.varrho.size();
    if (M == 0) return {};
    if (prob.varrho.norm() <= prob.lambda1) return Eigen::VectorXd::Zero(M);

    Eigen::LLT<Eigen::MatrixXd> llt(prob.omega);
    if (llt.info() != Eigen::Success) throw numerical_error("block matrix is not positive definite");
    Eigen::VectorXd d = d_init.size() == M && d_init.norm() > 0.0 ? d_init : llt.solve(prob.varrho);
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(M, M);
    for (std::size_t it = 0; it < max_iter; ++it) {
        const Eigen::MatrixXd A = prob.omega + (prob.lambda1 / d.norm()) * I;
        Eigen::VectorXd next = A.llt().solve(prob.varrho);
        const double change = (next - d).cwiseAbs().maxCoeff();
        d = std::move(next);
        if (change <= tol * (1.0 + d.cwiseAbs().maxCoeff())) return d;
    }
    throw numerical_error("fixed-point block iteration did not converge");
}

double block_residual(const BlockProblem& prob, const Eigen::VectorXd& d)
{
    const double dn = d.norm();
    if (dn == 0.0) return prob.lambda1 - prob.varrho.norm();
    const Eigen::VectorXd r = prob.omega * d - prob.varrho + (prob.lambda1 / dn) * d;
    return r.cwiseAbs().maxCoeff();
}

namespace {

void check_inputs(const ReducedRankDesign& design, const Eigen::VectorXd& y, const CoefBlocks& d)
{
    if (static_cast<std::size_t>(y.size()) != design.n()) {
        throw data_error("response has " + std::to_string(y.size()) + " entries, design has " +
                         std::to_string(design.n()) + " samples");
    }
    if (d.size() != design.p()) throw data_error("coefficient block count does not match design");
    for (std::size_t j = 0; j < d.size(); ++j) {
        if (static_cast<std::size_t>(d[j].size()) != design.block(j).size()) {
            throw data_error("coefficient block " + std::to_string(j) + " has the wrong size");
        }
    }
}

CoefBlocks to_c(const ReducedRankDesign& design, const CoefBlocks& d)
{
    CoefBlocks c(d.size());
    for (std::size_t j = 0; j < d.size(); ++j) {
        c[j] = d[j].cwiseQuotient(design.block(j).h.cwiseSqrt());
    }
    return c;
}

double objective_from(const ReducedRankDesign& design, const Eigen::VectorXd& residual,
                      const CoefBlocks& d, double lambda1, double lambda2)
{
    double pen1 = 0.0;
    double pen2 = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) {
        if (d[j].size() == 0) continue;
        pen1 += d[j].norm();
        pen2 += (d[j].array().square() / design.block(j).h.array()).sum();
    }
    const double n = static_cast<double>(design.n());
    return residual.squaredNorm() / (2.0 * n) + lambda1 * pen1 + 0.5 * lambda2 * pen2;
}

CoefBlocks zero_blocks(const ReducedRankDesign& design)
{
    CoefBlocks d(design.p());
    for (std::size_t j = 0; j < design.p(); ++j) {
        d[j] = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(design.block(j).size()));
    }
    return d;
}

} // namespace

double objective(const ReducedRankDesign& design, const Eigen::VectorXd& y, const CoefBlocks& d,
                 const HyperParams& hp)
{
    check_inputs(design, y, d);
    const Eigen::VectorXd residual = y - fitted_values(design, to_c(design, d));
    return objective_from(design, residual, d, hp.lambda1(), hp.lambda2());
}

KktReport kkt_check(const CoefBlocks& d, const ReducedRankDesign& design, const Eigen::VectorXd& y,
                    const HyperParams& hp)
{
    check_inputs(design, y, d);
    const double n = static_cast<double>(design.n());
    const double lambda1 = hp.lambda1();
    const double lambda2 = hp.lambda2();
    const CoefBlocks c = to_c(design, d);
    const Eigen::VectorXd residual = y - fitted_values(design, c);

    KktReport report;
    report.block_value.resize(design.p(), 0.0);
    report.active.resize(design.p(), false);
    for (std::size_t j = 0; j < design.p(); ++j) {
        const auto& b = design.block(j);
        if (b.size() == 0) continue;
        const Eigen::VectorXd partial = residual + b.gamma * c[j];
        const Eigen::VectorXd inv_sqrt_h = b.h.cwiseSqrt().cwiseInverse();
        const Eigen::VectorXd varrho = inv_sqrt_h.cwiseProduct(b.gamma.transpose() * partial) / n;
        const Eigen::VectorXd omega = (b.rho.array() + lambda2).matrix().cwiseQuotient(b.h);
        const double dn = d[j].norm();
        if (dn > 0.0) {
            report.active[j] = true;
            const Eigen::VectorXd r = omega.cwiseProduct(d[j]) - varrho + (lambda1 / dn) * d[j];
            report.block_value[j] = r.cwiseAbs().maxCoeff();
            report.max_violation = std::max(report.max_violation, report.block_value[j]);
        } else {
            report.block_value[j] = lambda1 - varrho.norm();
            report.max_violation = std::max(report.max_violation, -report.block_value[j]);
        }
    }
    return report;
}

double universal_threshold(const ReducedRankDesign& design, const Eigen::VectorXd& y)
{
    if (static_cast<std::size_t>(y.size()) != design.n()) throw data_error("response length mismatch");
    const double n = static_cast<double>(design.n());
    double out = 0.0;
    for (const auto& b : design.blocks()) {
        if (b.size() == 0) continue;
        const Eigen::VectorXd varrho = b.h.cwiseSqrt().cwiseInverse().cwiseProduct(b.gamma.transpose() * y) / n;
        out = std::max(out, varrho.norm());
    }
    return out;
}

namespace {

FEnetFit least_squares_fit(const ReducedRankDesign& design, const Eigen::VectorXd& y,
                           const HyperParams& hp, const FitOptions& options)
{
    std::vector<std::size_t> all;
    for (std::size_t j = 0; j < design.p(); ++j) {
        if (design.block(j).size() > 0) all.push_back(j);
    }
    if (all.empty()) throw numerical_error("least squares fit needs at least one non-degenerate predictor");
    const RefinedFit ls = fit_refined(design, y, all, 0.0);

    FEnetFit fit;
    fit.lambda1 = 0.0;
    fit.lambda2 = 0.0;
    fit.d = zero_blocks(design);
    fit.c = fit.d;
    for (std::size_t j : all) {
        fit.c[j] = ls.c[j];
        fit.d[j] = ls.c[j].cwiseProduct(design.block(j).h.cwiseSqrt());
    }
    fit.selected = selected_blocks(fit.d);
    fit.objective_trace = {objective(design, y, fit.d, hp)};
    fit.sweeps = 0;
    fit.kkt = kkt_check(fit.d, design, y, hp);
    fit.converged = fit.kkt.max_violation <= options.kkt_tol * (1.0 + y.cwiseAbs().maxCoeff());
    return fit;
}

} // namespace

FEnetFit fit_fenet(const ReducedRankDesign& design, const Eigen::VectorXd& y, const HyperParams& hp,
                   const FitOptions& options, const CoefBlocks* warm_start)
{
    hp.validate();
    if (static_cast<std::size_t>(y.size()) != design.n()) {
        throw data_error("response has " + std::to_string(y.size()) + " entries, design has " +
                         std::to_string(design.n()) + " samples");
    }
    if (hp.lambda == 0.0) return least_squares_fit(design, y, hp, options);

    const double n = static_cast<double>(design.n());
    const double lambda1 = hp.lambda1();
    const double lambda2 = hp.lambda2();
    const std::size_t p = design.p();

    std::vector<Eigen::VectorXd> omega(p);
    std::vector<Eigen::VectorXd> inv_sqrt_h(p);
    for (std::size_t j = 0; j < p; ++j) {
        const auto& b = design.block(j);
        omega[j] = (b.rho.array() + lambda2).matrix().cwiseQuotient(b.h);
        inv_sqrt_h[j] = b.h.cwiseSqrt().cwiseInverse();
        if (b.size() > 0 && !(omega[j].minCoeff() > 0.0)) {
            throw numerical_error("block " + std::to_string(j) +
                                  " is not strictly convex; increase lambda2 or use fewer eigenfunctions");
        }
    }

    FEnetFit fit;
    fit.lambda1 = lambda1;
    fit.lambda2 = lambda2;
    if (warm_start) {
        check_inputs(design, y, *warm_start);
        fit.d = *warm_start;
    } else {
        fit.d = zero_blocks(design);
    }
    fit.c = to_c(design, fit.d);

    Eigen::VectorXd residual = y - fitted_values(design, fit.c);
    double current = objective_from(design, residual, fit.d, lambda1, lambda2);
    if (!std::isfinite(current)) throw numerical_error("objective is not finite at the starting point");
    fit.objective_trace.push_back(current);

    const double accept = options.kkt_tol * (1.0 + (y.size() ? y.cwiseAbs().maxCoeff() : 0.0));
    Eigen::VectorXd g;
    auto update = [&](std::size_t j) {
        const auto& b = design.block(j);
        if (b.size() == 0) return;
        // Gamma_j^T (r + Gamma_j c_j) / n, with Gamma_j^T Gamma_j / n = diag(rho_j)
        g.noalias() = b.gamma.transpose() * residual;
        const Eigen::VectorXd varrho = inv_sqrt_h[j].cwiseProduct(g / n + b.rho.cwiseProduct(fit.c[j]));
        Eigen::VectorXd d_new = solve_block_diagonal(omega[j], varrho, lambda1);
        if (d_new == fit.d[j]) return;
        Eigen::VectorXd c_new = d_new.cwiseProduct(inv_sqrt_h[j]);
        residual.noalias() -= b.gamma * (c_new - fit.c[j]);
        fit.d[j] = std::move(d_new);
        fit.c[j] = std::move(c_new);
    };

    // Sweeps alternate between the active blocks only and, once those settle,
    // a full pass that may add blocks; convergence is only declared after a full pass.
    bool full = true;
    std::vector<std::size_t> active;
    for (std::size_t sweep = 1; sweep <= options.max_sweeps; ++sweep) {
        if (full) {
            for (std::size_t j = 0; j < p; ++j) update(j);
        } else {
            for (std::size_t j : active) update(j);
        }
        const double next = objective_from(design, residual, fit.d, lambda1, lambda2);
        if (!std::isfinite(next)) {
            throw numerical_error("objective became non-finite at sweep " + std::to_string(sweep));
        }
        fit.objective_trace.push_back(next);
        fit.sweeps = sweep;
        const double previous = current;
        current = next;

        const double rel = (previous - current) / std::max(std::abs(previous), std::numeric_limits<double>::min());
        const bool was_full = full;
        full = false;
        if (rel < options.tol_outer) {
            if (!was_full) {
                full = true;
            } else {
                residual = y - fitted_values(design, fit.c);
                fit.kkt = kkt_check(fit.d, design, y, hp);
                if (fit.kkt.max_violation <= accept) {
                    fit.converged = true;
                    break;
                }
            }
        }
        if (was_full) {
            active.clear();
            for (std::size_t j = 0; j < p; ++j) {
                if (fit.d[j].size() > 0 && (fit.d[j].array() != 0.0).any()) active.push_back(j);
            }
        }
    }
    if (!fit.converged) fit.kkt = kkt_check(fit.d, design, y, hp);
    fit.selected = selected_blocks(fit.d);
    return fit;
}

} // namespace fenet
