#include <fenet/metrics.hpp>
#include <fenet/error.hpp>
#include <fenet/simgen.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace fenet {

SelectionRates selection_rates(const std::vector<std::size_t>& selected,
                               const std::vector<std::size_t>& signal, std::size_t p)
{
    std::vector<char> in_signal(p, 0), in_selected(p, 0);
    for (std::size_t j : signal) {
        if (j >= p) throw config_error("signal index " + std::to_string(j) + " out of range");
        in_signal[j] = 1;
    }
    for (std::size_t j : selected) {
        if (j >= p) throw config_error("selected index " + std::to_string(j) + " out of range");
        in_selected[j] = 1;
    }
    std::size_t pos = 0, neg = 0, false_pos = 0, false_neg = 0;
    for (std::size_t j = 0; j < p; ++j) {
        if (in_signal[j]) {
            ++pos;
            if (!in_selected[j]) ++false_neg;
        } else {
            ++neg;
            if (in_selected[j]) ++false_pos;
        }
    }
    SelectionRates r;
    r.fpr = neg == 0 ? 0.0 : static_cast<double>(false_pos) / static_cast<double>(neg);
    r.fnr = pos == 0 ? 0.0 : static_cast<double>(false_neg) / static_cast<double>(pos);
    return r;
}

double mnd(const Grid& grid, const Eigen::MatrixXd& beta_hat, const Eigen::MatrixXd& beta0)
{
    const auto T = static_cast<Eigen::Index>(grid.size());
    if (beta_hat.cols() != T || beta0.cols() != T) throw data_error("coefficient curves do not match the grid");
    if (beta_hat.rows() != beta0.rows()) throw data_error("coefficient curves cover different predictor counts");
    const Eigen::MatrixXd diff = beta_hat - beta0;
    const Eigen::VectorXd sq = (diff.array().square().matrix() * grid.weights());
    return diff.rows() == 0 ? 0.0 : std::sqrt(std::max(sq.maxCoeff(), 0.0));
}

double rer_analytic(const Grid& grid, const Eigen::MatrixXd& beta_hat, const Truth& truth)
{
    if (!truth.has_generator()) throw config_error("analytic RER needs generator metadata");
    const auto p = truth.basis_coef.rows();
    const auto K = truth.basis_coef.cols();
    const auto T = static_cast<Eigen::Index>(grid.size());
    if (beta_hat.rows() != p || beta_hat.cols() != T) throw data_error("coefficient curves do not match the truth");

    Eigen::MatrixXd cosines(T, K);
    const double pi = std::numbers::pi;
    for (Eigen::Index k = 0; k < K; ++k) {
        for (Eigen::Index m = 0; m < T; ++m) {
            cosines(m, k) = std::sqrt(2.0) * std::cos(static_cast<double>(k + 1) * pi * grid.points()[m]);
        }
    }
    const Eigen::MatrixXd a = beta_hat * grid.weights().asDiagonal() * cosines - truth.basis_coef;
    const Eigen::MatrixXd S = ar1_corr(static_cast<std::size_t>(p), truth.rho);

    auto form = [&](const Eigen::MatrixXd& A) {
        const Eigen::MatrixXd SA = S * A;
        return ((A.array() * SA.array()).colwise().sum().transpose() * truth.nu.array()).sum();
    };
    const double den = form(truth.basis_coef);
    if (!(den > 0.0)) throw numerical_error("relative excess risk undefined: true coefficients are zero");
    return form(a) / den;
}

McEstimate rer_monte_carlo(const Eigen::MatrixXd& beta_hat, const Dataset& test)
{
    test.validate();
    if (test.signal.size() != static_cast<Eigen::Index>(test.n())) {
        throw data_error("Monte Carlo RER needs the noiseless signal of the test set");
    }
    if (static_cast<std::size_t>(beta_hat.rows()) != test.p()) throw data_error("coefficient curves do not match the test set");
    const auto n = static_cast<Eigen::Index>(test.n());
    if (n < 2) throw data_error("Monte Carlo RER needs at least 2 test samples");

    Eigen::VectorXd pred = Eigen::VectorXd::Zero(n);
    for (std::size_t j = 0; j < test.p(); ++j) {
        const auto row = beta_hat.row(static_cast<Eigen::Index>(j));
        if (row.isZero(0.0)) continue;
        pred.noalias() += test.curves[j] * (test.grid->weights().array() * row.transpose().array()).matrix();
    }
    const Eigen::ArrayXd e2 = (pred - test.signal).array().square();
    const Eigen::ArrayXd s2 = test.signal.array().square();
    const double num = e2.mean();
    const double den = s2.mean();
    if (!(den > 0.0)) throw numerical_error("relative excess risk undefined: test signal is zero");

    McEstimate out;
    out.value = num / den;
    const Eigen::ArrayXd infl = (e2 - out.value * s2) / den;
    const double var = (infl - infl.mean()).square().sum() / static_cast<double>(n - 1);
    out.se = std::sqrt(var / static_cast<double>(n));
    return out;
}

double mspe(const std::vector<Eigen::MatrixXd>& test_scores, const CoefBlocks& coef,
            const Eigen::VectorXd& y_centered)
{
    if (y_centered.size() == 0) throw data_error("empty test set");
    const Eigen::VectorXd pred = linear_predictor(test_scores, coef);
    if (pred.size() != y_centered.size()) throw data_error("test scores and responses differ in length");
    return (y_centered - pred).squaredNorm() / static_cast<double>(y_centered.size());
}

std::vector<RocPoint> roc(const ReducedRankDesign& design, const Eigen::VectorXd& y, const HyperParams& hp,
                          const std::vector<double>& lambdas, const std::vector<std::size_t>& signal,
                          const FitOptions& options)
{
    if (lambdas.empty()) throw config_error("ROC needs a nonempty lambda grid");
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        if (!(lambdas[i] > 0.0)) throw config_error("ROC lambda grid must be positive");
        if (i > 0 && !(lambdas[i] > lambdas[i - 1])) throw config_error("ROC lambda grid must be ascending");
    }
    std::vector<RocPoint> out(lambdas.size());
    CoefBlocks warm;
    for (std::size_t i = lambdas.size(); i-- > 0;) {
        HyperParams h = hp;
        h.lambda = lambdas[i];
        const FEnetFit fit = fit_fenet(design, y, h, options, warm.empty() ? nullptr : &warm);
        const auto rates = selection_rates(fit.selected, signal, design.p());
        out[i] = {lambdas[i], rates.fpr, 1.0 - rates.fnr, fit.converged};
        warm = fit.d;
    }
    return out;
}

double roc_auc(const std::vector<RocPoint>& points)
{
    std::vector<std::pair<double, double>> pts{{0.0, 0.0}, {1.0, 1.0}};
    for (const auto& pt : points) pts.emplace_back(pt.fpr, pt.tpr);
    std::sort(pts.begin(), pts.end());
    double area = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        area += (pts[i].first - pts[i - 1].first) * (pts[i].second + pts[i - 1].second) / 2.0;
    }
    return area;
}

double quantile(std::vector<double> values, double prob)
{
    if (values.empty()) throw config_error("quantile of an empty sample");
    if (!(prob >= 0.0 && prob <= 1.0)) throw config_error("quantile probability must lie in [0,1]");
    std::sort(values.begin(), values.end());
    const double pos = prob * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

Summary summarize(const std::vector<double>& values)
{
    Summary s;
    s.median = quantile(values, 0.5);
    s.lo = quantile(values, 0.025);
    s.hi = quantile(values, 0.975);
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    return s;
}

} // namespace fenet
