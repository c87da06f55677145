#pragma once

#include <fenet/design.hpp>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

namespace fenet::testkit {

// Reference solver for the penalized objective in the d parameterization,
// written from the objective alone: accelerated proximal gradient on the
// stacked design A = [Gamma_j H_j^{-1/2}] with group soft-thresholding.
struct ProxOracle
{
    Eigen::MatrixXd A;
    Eigen::VectorXd inv_h; // stacked diag(H^{-1})
    std::vector<Eigen::Index> offset;
    std::vector<Eigen::Index> width;
    double n = 0;

    explicit ProxOracle(const ReducedRankDesign& design)
    {
        Eigen::Index total = 0;
        for (const auto& b : design.blocks()) {
            offset.push_back(total);
            width.push_back(b.gamma.cols());
            total += b.gamma.cols();
        }
        n = static_cast<double>(design.n());
        A.resize(static_cast<Eigen::Index>(design.n()), total);
        inv_h.resize(total);
        for (std::size_t j = 0; j < design.p(); ++j) {
            const auto& b = design.block(j);
            for (Eigen::Index k = 0; k < b.gamma.cols(); ++k) {
                A.col(offset[j] + k) = b.gamma.col(k) / std::sqrt(b.h(k));
                inv_h(offset[j] + k) = 1.0 / b.h(k);
            }
        }
    }

    double value(const Eigen::VectorXd& y, const Eigen::VectorXd& d, double l1, double l2) const
    {
        double groups = 0.0;
        for (std::size_t j = 0; j < offset.size(); ++j) groups += d.segment(offset[j], width[j]).norm();
        return (y - A * d).squaredNorm() / (2 * n) + l1 * groups + 0.5 * l2 * d.cwiseProduct(inv_h).dot(d);
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& y, double l1, double l2, int iters = 200000) const
    {
        const Eigen::MatrixXd Q = A.transpose() * A / n + Eigen::MatrixXd(l2 * inv_h.asDiagonal());
        const Eigen::VectorXd b = A.transpose() * y / n;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q, Eigen::EigenvaluesOnly);
        const double L = es.eigenvalues().maxCoeff();
        Eigen::VectorXd x = Eigen::VectorXd::Zero(A.cols());
        Eigen::VectorXd z = x;
        double t = 1.0;
        double fx = value(y, x, l1, l2);
        for (int it = 0; it < iters; ++it) {
            Eigen::VectorXd v = z - (Q * z - b) / L;
            for (std::size_t j = 0; j < offset.size(); ++j) {
                auto seg = v.segment(offset[j], width[j]);
                const double nv = seg.norm();
                seg *= nv > l1 / L ? 1.0 - (l1 / L) / nv : 0.0;
            }
            const double fv = value(y, v, l1, l2);
            if (fv > fx) { // adaptive restart
                t = 1.0;
                z = x;
                continue;
            }
            const double tn = 0.5 * (1 + std::sqrt(1 + 4 * t * t));
            z = v + ((t - 1) / tn) * (v - x);
            if ((v - x).cwiseAbs().maxCoeff() < 1e-15 && it > 10) {
                x = v;
                break;
            }
            x = v;
            fx = fv;
            t = tn;
        }
        return x;
    }
};

} // namespace fenet::testkit
