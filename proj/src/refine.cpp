#include <fenet/refine.hpp>
#include <fenet/error.hpp>

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <string>

namespace fenet {

RefinedFit fit_refined(const ReducedRankDesign& design, const Eigen::VectorXd& y,
                       const std::vector<std::size_t>& selected, double lambda3)
{
    if (selected.empty()) {
        throw config_error("refined fit needs a nonempty selected set; the null model predicts the response mean");
    }
    if (!(lambda3 >= 0.0)) throw config_error("lambda3 must be >= 0");
    if (static_cast<std::size_t>(y.size()) != design.n()) throw data_error("response length mismatch");

    Eigen::Index width = 0;
    std::vector<Eigen::Index> offset;
    for (std::size_t j : selected) {
        if (j >= design.p()) throw config_error("selected index " + std::to_string(j) + " out of range");
        offset.push_back(width);
        width += static_cast<Eigen::Index>(design.block(j).size());
    }
    if (width == 0) throw numerical_error("selected predictors carry no eigenfunctions");

    const double n = static_cast<double>(design.n());
    Eigen::MatrixXd G(static_cast<Eigen::Index>(design.n()), width);
    for (std::size_t a = 0; a < selected.size(); ++a) {
        const auto& gamma = design.block(selected[a]).gamma;
        G.middleCols(offset[a], gamma.cols()) = gamma;
    }

    Eigen::MatrixXd A = (G.transpose() * G) / n;
    A.diagonal().array() += lambda3;
    const Eigen::VectorXd rhs = G.transpose() * y / n;

    Eigen::LLT<Eigen::MatrixXd> llt(A);
    bool ok = llt.info() == Eigen::Success;
    if (ok) {
        // LLT succeeds on numerically singular matrices with tiny pivots.
        const Eigen::VectorXd diag = llt.matrixLLT().diagonal();
        ok = diag.minCoeff() > 1e-7 * std::sqrt(std::max(A.diagonal().maxCoeff(), 1e-300));
    }
    if (!ok) {
        throw numerical_error("refined system is singular; use lambda3 > 0 or fewer eigenfunctions");
    }
    const Eigen::VectorXd coef = llt.solve(rhs);

    RefinedFit fit;
    fit.selected = selected;
    std::sort(fit.selected.begin(), fit.selected.end());
    fit.lambda3 = lambda3;
    fit.c.assign(design.p(), Eigen::VectorXd());
    for (std::size_t a = 0; a < selected.size(); ++a) {
        const auto m = static_cast<Eigen::Index>(design.block(selected[a]).size());
        fit.c[selected[a]] = coef.segment(offset[a], m);
    }
    return fit;
}

CoefBlocks refined_blocks(const ReducedRankDesign& design, const RefinedFit& fit)
{
    if (fit.c.size() != design.p()) throw data_error("refined fit does not match the design");
    CoefBlocks out(design.p());
    for (std::size_t j = 0; j < design.p(); ++j) {
        out[j] = fit.c[j].size() ? fit.c[j] : Eigen::VectorXd::Zero(static_cast<Eigen::Index>(design.block(j).size()));
    }
    return out;
}

} // namespace fenet
