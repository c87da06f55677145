#include <fenet/experiment.hpp>
#include <fenet/error.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

namespace fenet {

std::vector<double> log_spaced(double lo, double hi, std::size_t count)
{
    if (!(lo > 0.0 && hi >= lo) || count == 0) throw config_error("log-spaced grid needs 0 < lo <= hi and count >= 1");
    std::vector<double> out(count);
    if (count == 1) {
        out[0] = lo;
        return out;
    }
    const double a = std::log10(lo);
    const double b = std::log10(hi);
    for (std::size_t i = 0; i < count; ++i) {
        out[i] = std::pow(10.0, a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1));
    }
    out.back() = hi;
    out.front() = lo;
    return out;
}

std::vector<double> SearchGrids::default_lambda3()
{
    std::vector<double> out{0.0};
    const auto tail = log_spaced(1e-12, 1e-2, 21);
    out.insert(out.end(), tail.begin(), tail.end());
    return out;
}

void SearchGrids::validate() const
{
    if (lambda.empty() || alpha.empty() || s.empty() || theta.empty() || lambda3.empty()) {
        throw config_error("hyperparameter grids must be nonempty");
    }
    for (double v : lambda) {
        if (!(v > 0.0) || !std::isfinite(v)) throw config_error("lambda grid values must be positive and finite");
    }
    for (double v : alpha) {
        if (!(v > 0.0 && v <= 1.0)) throw config_error("alpha grid values must lie in (0,1]");
    }
    for (std::size_t v : s) {
        if (v < 1) throw config_error("s grid values must be >= 1");
    }
    for (double v : theta) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw config_error("theta grid values must be >= 0");
    }
    for (double v : lambda3) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw config_error("lambda3 grid values must be >= 0");
    }
}

void ExperimentConfig::validate() const
{
    if (schema_version != current_schema) {
        throw config_error("unsupported schema_version " + std::to_string(schema_version) + " (expected " +
                           std::to_string(current_schema) + ")");
    }
    scenario.validate();
    if (scenario.test_n < 1) throw config_error("the tuning split needs test_n >= 1");
    if (replicates < 1) throw config_error("replicates must be >= 1");
    if (grid_points < 2) throw config_error("grid_points must be >= 2");
    if (threads < 1) throw config_error("threads must be >= 1");
    if (!(max_nonconverged_fraction >= 0.0 && max_nonconverged_fraction <= 1.0)) {
        throw config_error("max_nonconverged_fraction must lie in [0,1]");
    }
    if (kernel != "auto") kernel_kind_from_string(kernel);
    grids.validate();
}

KernelSpec scenario_kernel(const ExperimentConfig& cfg)
{
    if (cfg.kernel == "auto") {
        return cfg.scenario.kind == scenario::II ? KernelSpec::sine() : KernelSpec::cosine();
    }
    switch (kernel_kind_from_string(cfg.kernel)) {
        case kernel_kind::cosine_bernoulli: return KernelSpec::cosine();
        case kernel_kind::sine_bernoulli: return KernelSpec::sine();
        case kernel_kind::custom: break;
    }
    throw config_error("experiments support the cosine_bernoulli and sine_bernoulli kernels");
}

PreparedData prepare(const Dataset& train, const Dataset& tune, const SqrtKernelOp& op)
{
    const std::span<const SqrtKernelOp> ops(&op, 1);
    PreparedData out;
    out.train = transform_predictors(center(train), ops);
    out.means = *out.train.centering;
    // Centering commutes with the linear map, so the transformed training means
    // apply directly to transformed tuning curves.
    Dataset tune_t = transform_predictors(tune, ops);
    tune_t.centering.reset();
    out.tune = center_with(tune_t, out.means);
    return out;
}

std::size_t select_best(const std::vector<CellResult>& cells)
{
    std::size_t best = cells.size();
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const auto& c = cells[i];
        if (c.failed || !std::isfinite(c.mspe)) continue;
        if (best == cells.size()) {
            best = i;
            continue;
        }
        const auto& b = cells[best];
        if (c.mspe < b.mspe ||
            (c.mspe == b.mspe && (c.hp.lambda > b.hp.lambda ||
                                  (c.hp.lambda == b.hp.lambda && c.hp.alpha > b.hp.alpha)))) {
            best = i;
        }
    }
    if (best == cells.size()) throw numerical_error("every grid cell failed");
    return best;
}

SearchResult grid_search(const DesignBasis& basis, const Eigen::VectorXd& y,
                         const std::vector<Eigen::MatrixXd>& tune_scores, const Eigen::VectorXd& tune_y,
                         const SearchGrids& grids, psi_kind psi, const FitOptions& options)
{
    grids.validate();
    std::vector<double> lambdas = grids.lambda;
    std::sort(lambdas.begin(), lambdas.end(), std::greater<>());
    std::vector<double> thetas = grids.theta;
    if (psi == psi_kind::identity) thetas.resize(1);

    std::vector<CellResult> cells;
    for (std::size_t s : grids.s) {
        for (double theta : thetas) {
            std::optional<ReducedRankDesign> design;
            try {
                design.emplace(slice_design(basis, s, psi, theta));
            } catch (const error&) {
                for (double alpha : grids.alpha) {
                    for (double lambda : lambdas) {
                        CellResult c;
                        c.hp = {lambda, alpha, s, theta, 0.0};
                        c.failed = true;
                        cells.push_back(c);
                    }
                }
                continue;
            }
            for (double alpha : grids.alpha) {
                CoefBlocks warm;
                for (double lambda : lambdas) {
                    CellResult c;
                    c.hp = {lambda, alpha, s, theta, 0.0};
                    try {
                        const FEnetFit fit = fit_fenet(*design, y, c.hp, options, warm.empty() ? nullptr : &warm);
                        c.mspe = mspe(tune_scores, fit.c, tune_y);
                        c.converged = fit.converged;
                        warm = fit.d;
                    } catch (const error&) {
                        c.failed = true;
                        warm.clear();
                    }
                    cells.push_back(c);
                }
            }
        }
    }

    SearchResult out;
    out.cells = cells.size();
    for (const auto& c : cells) {
        out.failed += c.failed ? 1 : 0;
        out.nonconverged += (!c.failed && !c.converged) ? 1 : 0;
    }
    const std::size_t best = select_best(cells);
    out.best = cells[best].hp;
    out.best_mspe = cells[best].mspe;
    return out;
}

double tune_lambda3(const ReducedRankDesign& design, const Eigen::VectorXd& y,
                    const std::vector<std::size_t>& selected, const std::vector<Eigen::MatrixXd>& tune_scores,
                    const Eigen::VectorXd& tune_y, const std::vector<double>& grid)
{
    if (grid.empty()) throw config_error("lambda3 grid must be nonempty");
    double best = std::numeric_limits<double>::quiet_NaN();
    double best_err = std::numeric_limits<double>::infinity();
    for (double l3 : grid) {
        try {
            const RefinedFit rf = fit_refined(design, y, selected, l3);
            const double err = mspe(tune_scores, rf.c, tune_y);
            // Ties go to the larger ridge level.
            if (err < best_err || (err == best_err && l3 > best)) {
                best_err = err;
                best = l3;
            }
        } catch (const numerical_error&) {
        }
    }
    if (std::isnan(best)) throw numerical_error("refined fit failed for every lambda3");
    return best;
}

ReplicateResult run_replicate(const ExperimentConfig& cfg, std::size_t index)
{
    ReplicateResult res;
    res.index = index;
    res.seed = replicate_seed(cfg.seed, index);

    ScenarioConfig sc = cfg.scenario;
    sc.seed = res.seed;
    const grid_ptr grid = make_grid(cfg.grid_points);
    const SimulatedData sim = generate(sc, grid);
    const SqrtKernelOp op = spectral_sqrt(scenario_kernel(cfg), grid);
    const std::span<const SqrtKernelOp> ops(&op, 1);
    const PreparedData prep = prepare(sim.train, sim.test, op);

    const std::size_t s_max = *std::max_element(cfg.grids.s.begin(), cfg.grids.s.end());
    const DesignBasis basis = compute_basis(prep.train, s_max, cfg.design);
    const auto tune_scores = project_scores(basis, prep.tune);

    const SearchResult search =
        grid_search(basis, prep.train.y, tune_scores, prep.tune.y, cfg.grids, cfg.design.psi, cfg.search_fit);
    res.cells = search.cells;
    res.cells_failed = search.failed;
    res.cells_nonconverged = search.nonconverged;
    res.hp = search.best;

    const ReducedRankDesign design = slice_design(basis, res.hp.s, cfg.design.psi, res.hp.theta);
    const FEnetFit fit = fit_fenet(design, prep.train.y, res.hp, cfg.fit);
    res.converged = fit.converged;
    res.selected_count = fit.selected.size();
    const Eigen::MatrixXd beta = beta_curves(surrogate_curves(design, fit.c), ops);
    const Truth& truth = *sim.truth;

    const auto rates = selection_rates(fit.selected, truth.signal_set, sc.p);
    res.fpr = rates.fpr;
    res.fnr = rates.fnr;
    res.mnd = mnd(*grid, beta, truth.beta);
    res.rer = rer_analytic(*grid, beta, truth);
    res.mspe = mspe(tune_scores, fit.c, prep.tune.y);

    Eigen::MatrixXd beta_ref = Eigen::MatrixXd::Zero(beta.rows(), beta.cols());
    CoefBlocks c_ref(design.p());
    for (std::size_t j = 0; j < design.p(); ++j) c_ref[j] = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(design.block(j).size()));
    if (!fit.selected.empty()) {
        res.hp.lambda3 = tune_lambda3(design, prep.train.y, fit.selected, tune_scores, prep.tune.y, cfg.grids.lambda3);
        c_ref = refined_blocks(design, fit_refined(design, prep.train.y, fit.selected, res.hp.lambda3));
        beta_ref = beta_curves(surrogate_curves(design, c_ref), ops);
    }
    res.rer_refined = rer_analytic(*grid, beta_ref, truth);
    res.mnd_refined = mnd(*grid, beta_ref, truth.beta);
    res.mspe_refined = mspe(tune_scores, c_ref, prep.tune.y);
    res.re = res.rer_refined > 0.0 ? res.rer / res.rer_refined : std::numeric_limits<double>::quiet_NaN();

    if (cfg.mc_test_n > 0) {
        const Dataset mc = sample_dataset(sc, grid, sim.truth, cfg.mc_test_n, 3);
        const McEstimate est = rer_monte_carlo(beta, mc);
        res.rer_mc = est.value;
        res.rer_mc_se = est.se;
    }
    return res;
}

std::vector<MetricSummary> aggregate(const std::vector<ReplicateResult>& reps)
{
    if (reps.empty()) return {};
    auto collect = [&](auto member) {
        std::vector<double> v;
        for (const auto& r : reps) {
            const double x = member(r);
            if (std::isfinite(x)) v.push_back(x);
        }
        return v;
    };
    std::vector<std::pair<std::string, std::vector<double>>> cols = {
        {"fpr", collect([](const ReplicateResult& r) { return r.fpr; })},
        {"fnr", collect([](const ReplicateResult& r) { return r.fnr; })},
        {"mnd", collect([](const ReplicateResult& r) { return r.mnd; })},
        {"rer", collect([](const ReplicateResult& r) { return r.rer; })},
        {"rer_refined", collect([](const ReplicateResult& r) { return r.rer_refined; })},
        {"re", collect([](const ReplicateResult& r) { return r.re; })},
        {"mnd_refined", collect([](const ReplicateResult& r) { return r.mnd_refined; })},
        {"mspe", collect([](const ReplicateResult& r) { return r.mspe; })},
        {"mspe_refined", collect([](const ReplicateResult& r) { return r.mspe_refined; })},
    };
    if (reps.front().rer_mc) {
        cols.emplace_back("rer_mc", collect([](const ReplicateResult& r) { return r.rer_mc.value_or(NAN); }));
    }
    std::vector<MetricSummary> out;
    for (auto& [name, values] : cols) {
        if (values.empty()) continue;
        out.push_back({name, summarize(values)});
    }
    return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::function<void(std::size_t)>& progress)
{
    cfg.validate();
    ExperimentResult out;
    out.replicates.resize(cfg.replicates);

    std::atomic<std::size_t> next{0};
    std::mutex mutex;
    std::exception_ptr failure;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cfg.replicates) return;
            {
                std::lock_guard lock(mutex);
                if (failure) return;
            }
            try {
                out.replicates[i] = run_replicate(cfg, i);
                if (progress) {
                    std::lock_guard lock(mutex);
                    progress(i);
                }
            } catch (...) {
                std::lock_guard lock(mutex);
                if (!failure) failure = std::current_exception();
                return;
            }
        }
    };
    const std::size_t nthreads = std::min(cfg.threads, cfg.replicates);
    if (nthreads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < nthreads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);

    std::size_t bad = 0;
    for (const auto& r : out.replicates) bad += r.converged ? 0 : 1;
    out.nonconverged_fraction = static_cast<double>(bad) / static_cast<double>(cfg.replicates);
    out.failed = out.nonconverged_fraction >= cfg.max_nonconverged_fraction && bad > 0;
    out.summaries = aggregate(out.replicates);
    return out;
}

} // namespace fenet
