#include <fenet/diagnostics.hpp>
#include <fenet/error.hpp>
#include <fenet/experiment.hpp>
#include <fenet/io.hpp>
#include <fenet/metrics.hpp>
#include <fenet/pipeline.hpp>
#include <fenet/simgen.hpp>
#include <fenet/version.hpp>

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace fenet;

namespace {

enum exit_code { ok = 0, other = 1, config = 2, data = 3, numerical = 4 };

struct Common
{
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<std::size_t> threads;
    std::optional<std::size_t> grid_points;
};

ExperimentConfig load_config(const Common& c)
{
    ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : load_experiment_config(c.config);
    if (c.seed) cfg.seed = *c.seed;
    if (c.threads) cfg.threads = *c.threads;
    if (c.grid_points) cfg.grid_points = *c.grid_points;
    cfg.validate();
    return cfg;
}

std::string utc_now()
{
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

std::string csv_of(const std::function<void(std::ostream&)>& write)
{
    std::ostringstream os;
    write(os);
    return os.str();
}

Dataset load_data(const std::string& curves, const std::string& response, std::size_t grid_points)
{
    return read_dataset(curves, response, make_grid(grid_points));
}

// ---- subcommands -----------------------------------------------------------

int run_simulate(const Common& c)
{
    ExperimentConfig cfg = load_config(c);
    ScenarioConfig sc = cfg.scenario;
    sc.seed = cfg.seed;
    const SimulatedData sim = generate(sc, make_grid(cfg.grid_points));
    const fs::path dir = c.out;
    write_dataset(dir, "train", sim.train);
    if (sc.test_n > 0) write_dataset(dir, "test", sim.test);
    json truth = to_json(*sim.truth);
    truth["config"] = to_json(cfg);
    truth["rng_algorithm_id"] = rng_algorithm_id;
    write_json_file(dir / "truth.json", truth);
    std::cout << "wrote " << sc.n << " training and " << sc.test_n << " test samples to " << dir.string() << '\n';
    return ok;
}

struct FitArgs
{
    std::string curves, response, tune_curves, tune_response, kernel, kernel_csv;
    std::optional<double> lambda, alpha, theta;
    std::optional<std::size_t> s;
    bool export_design = false;
};

std::string resolve_kernel(const ExperimentConfig& cfg, const std::string& flag)
{
    if (!flag.empty()) return flag;
    return to_string(scenario_kernel(cfg).kind);
}

int run_fit(const Common& c, const FitArgs& a)
{
    const ExperimentConfig cfg = load_config(c);
    FitRequest req;
    req.kernel = resolve_kernel(cfg, a.kernel);
    if (!a.kernel_csv.empty()) {
        std::ifstream in(a.kernel_csv);
        if (!in) throw data_error("cannot open " + a.kernel_csv);
        req.kernel_matrix = read_matrix_csv(in, a.kernel_csv);
        req.kernel = "custom";
    }
    req.design = cfg.design;
    req.fit = cfg.fit;
    req.grids = cfg.grids;
    req.search_fit = cfg.search_fit;
    const Dataset train = load_data(a.curves, a.response, cfg.grid_points);
    std::optional<Dataset> tune;
    if (!a.tune_curves.empty() || !a.tune_response.empty()) {
        if (a.tune_curves.empty() || a.tune_response.empty()) {
            throw config_error("tuning needs both --tune-curves and --tune-response");
        }
        tune = load_data(a.tune_curves, a.tune_response, cfg.grid_points);
    } else {
        if (!a.lambda) throw config_error("give --lambda, or a tuning split to search the grids");
        req.hp.lambda = *a.lambda;
        if (a.alpha) req.hp.alpha = *a.alpha;
        if (a.s) req.hp.s = *a.s;
        if (a.theta) req.hp.theta = *a.theta;
    }

    const FitOutcome res = fit_dataset(train, tune ? &*tune : nullptr, req);
    const fs::path dir = c.out;
    write_json_file(dir / "fit.json", to_json(res.artifact));
    write_text_file(dir / "beta.csv", csv_of([&](std::ostream& os) { write_beta_csv(os, *train.grid, res.artifact.beta); }));
    if (res.search) {
        write_json_file(dir / "search.json", {{"best", to_json(res.search->best)},
                                              {"best_mspe", res.search->best_mspe},
                                              {"cells", res.search->cells},
                                              {"failed", res.search->failed},
                                              {"nonconverged", res.search->nonconverged}});
    }
    if (a.export_design) {
        const SqrtKernelOp op = spectral_sqrt(artifact_kernel(res.artifact), train.grid);
        const Dataset t = transform_predictors(center(train), std::span<const SqrtKernelOp>(&op, 1));
        write_design_csv(dir, build_design(t, res.artifact.hp, cfg.design));
    }
    std::cout << "selected " << res.artifact.selected.size() << " of " << train.p() << " predictors"
              << (res.artifact.converged ? "" : " (not converged)") << '\n';
    return res.artifact.converged ? ok : numerical;
}

int run_refine(const Common& c, const std::string& fit_path, const FitArgs& a, std::optional<double> lambda3)
{
    const ExperimentConfig cfg = load_config(c);
    const FitArtifact base = fit_from_json(read_json_file(fit_path));
    const Dataset train = load_data(a.curves, a.response, base.grid_points);
    std::optional<Dataset> tune;
    if (!a.tune_curves.empty() && !a.tune_response.empty()) {
        tune = load_data(a.tune_curves, a.tune_response, base.grid_points);
    } else if (!lambda3) {
        throw config_error("give --lambda3, or a tuning split to search the lambda3 grid");
    }
    const FitArtifact ref =
        refine_dataset(train, base, cfg.design, lambda3.value_or(0.0), tune ? &*tune : nullptr, cfg.grids.lambda3);
    const fs::path dir = c.out;
    write_json_file(dir / "refined.json", to_json(ref));
    write_text_file(dir / "beta.csv", csv_of([&](std::ostream& os) { write_beta_csv(os, *train.grid, ref.beta); }));
    std::cout << "refined on " << ref.selected.size() << " predictors, lambda3 = " << format_double(ref.hp.lambda3)
              << '\n';
    return ok;
}

int run_predict(const Common& c, const std::string& fit_path, const std::string& curves_path)
{
    const FitArtifact fit = fit_from_json(read_json_file(fit_path));
    const grid_ptr grid = make_grid(fit.grid_points);
    std::ifstream in(curves_path);
    if (!in) throw data_error("cannot open " + curves_path);
    const auto curves = read_curves(in, *grid, curves_path);
    const Eigen::VectorXd yhat = predict(fit, curves, spectral_sqrt(artifact_kernel(fit), grid));
    std::ostringstream os;
    os << "sample,prediction\n";
    for (Eigen::Index i = 0; i < yhat.size(); ++i) os << i << ',' << format_double(yhat[i]) << '\n';
    if (c.out.empty()) std::cout << os.str();
    else write_text_file(c.out, os.str());
    return ok;
}

int run_evaluate(const Common& c, const std::string& fit_path, const std::string& truth_path, const FitArgs& a)
{
    const FitArtifact fit = fit_from_json(read_json_file(fit_path));
    const Truth truth = truth_from_json(read_json_file(truth_path));
    const grid_ptr grid = make_grid(fit.grid_points);
    const auto p = static_cast<std::size_t>(fit.beta.rows());
    const auto rates = selection_rates(fit.selected, truth.signal_set, p);
    json out = {{"fpr", rates.fpr}, {"fnr", rates.fnr}, {"selected", fit.selected.size()},
                {"mnd", mnd(*grid, fit.beta, truth.beta)}};
    if (truth.has_generator()) out["rer"] = rer_analytic(*grid, fit.beta, truth);
    if (!a.curves.empty() && !a.response.empty()) {
        const Dataset d = load_data(a.curves, a.response, fit.grid_points);
        const Eigen::VectorXd yhat = predict(fit, d.curves, spectral_sqrt(artifact_kernel(fit), grid));
        out["mspe"] = (d.y - yhat).squaredNorm() / static_cast<double>(d.n());
    }
    if (c.out.empty()) std::cout << out.dump(2) << '\n';
    else write_json_file(c.out, out);
    return ok;
}

int run_roc(const Common& c, const std::string& fit_path, const std::string& truth_path, const FitArgs& a)
{
    const ExperimentConfig cfg = load_config(c);
    const FitArtifact base = fit_from_json(read_json_file(fit_path));
    const Truth truth = truth_from_json(read_json_file(truth_path));
    const Dataset train = load_data(a.curves, a.response, base.grid_points);
    std::vector<double> lambdas = cfg.grids.lambda;
    std::sort(lambdas.begin(), lambdas.end());
    const auto points = roc_dataset(train, base, cfg.design, lambdas, truth.signal_set, cfg.fit);
    const std::string csv = csv_of([&](std::ostream& os) { write_roc_csv(os, points); });
    if (c.out.empty()) std::cout << csv;
    else write_text_file(c.out, csv);
    std::cerr << "auc " << format_double(roc_auc(points)) << '\n';
    return ok;
}

struct DiagnoseArgs
{
    std::string kind = "AR1";
    double rho = 0.3;
    std::vector<double> lambda2 = {1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0};
    std::size_t q = 10;
    std::size_t K = 50;
};

int run_diagnose(const Common& c, const DiagnoseArgs& a)
{
    PartSepCov cov;
    cov.kind = corr_kind_from_string(a.kind);
    cov.rho = a.rho;
    cov.q = a.q;
    cov.nu = PartSepCov::default_nu(a.K);
    json reports = json::array();
    for (double l2 : a.lambda2) reports.push_back(to_json(check_conditions(cov, l2)));
    if (c.out.empty()) std::cout << reports.dump(2) << '\n';
    else write_json_file(c.out, reports);
    return ok;
}

int run_experiment_cmd(const Common& c)
{
    const ExperimentConfig cfg = load_config(c);
    if (c.out.empty()) throw config_error("experiment needs --out");
    const fs::path dir = c.out;
    fs::create_directories(dir);
    const std::string started = utc_now();
    const ExperimentResult res = run_experiment(cfg, [&](std::size_t i) {
        std::cerr << "replicate " << i << " done\n";
    });

    json seeds = json::array();
    for (const auto& r : res.replicates) seeds.push_back({{"replicate", r.index}, {"seed", r.seed}});
    write_json_file(dir / "manifest.json", {{"config", to_json(cfg)},
                                            {"rng_algorithm_id", rng_algorithm_id},
                                            {"version", version},
                                            {"replicate_seeds", seeds},
                                            {"started", started},
                                            {"finished", utc_now()}});
    write_text_file(dir / "replicates.csv", csv_of([&](std::ostream& os) { write_replicates_csv(os, res.replicates); }));
    write_text_file(dir / "summary.csv", csv_of([&](std::ostream& os) { write_summary_csv(os, res.summaries); }));
    write_json_file(dir / "summary.json", summary_json(res));

    for (const auto& m : res.summaries) {
        std::cout << m.name << ": " << format_double(m.summary.median) << " (" << format_double(m.summary.lo) << ", "
                  << format_double(m.summary.hi) << ")\n";
    }
    if (res.failed) {
        std::cerr << "run failed: non-converged fraction " << res.nonconverged_fraction << '\n';
        return numerical;
    }
    return ok;
}

void add_common(CLI::App* cmd, Common& c, bool seed, bool threads)
{
    cmd->add_option("--config", c.config, "JSON configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--out", c.out, "output path");
    cmd->add_option("--grid-points", c.grid_points, "number of grid points on [0,1]");
    if (seed) cmd->add_option("--seed", c.seed, "master seed");
    if (threads) cmd->add_option("--threads", c.threads, "worker threads");
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Functional elastic-net variable selection for functional linear models"};
    app.require_subcommand(1);
    app.set_version_flag("--version", version);

    Common common;
    FitArgs fa;
    DiagnoseArgs da;
    std::string fit_path, truth_path;
    std::optional<double> lambda3;

    auto* sim = app.add_subcommand("simulate", "draw a simulated dataset with its ground truth");
    add_common(sim, common, true, false);
    sim->get_option("--out")->required();

    auto* fit = app.add_subcommand("fit", "fit at given hyperparameters, or tune them on a split");
    add_common(fit, common, false, false);
    fit->get_option("--out")->required();
    fit->add_option("--curves", fa.curves, "training curves CSV")->required();
    fit->add_option("--response", fa.response, "training response CSV")->required();
    fit->add_option("--tune-curves", fa.tune_curves, "tuning curves CSV");
    fit->add_option("--tune-response", fa.tune_response, "tuning response CSV");
    fit->add_option("--lambda", fa.lambda, "overall penalty level");
    fit->add_option("--alpha", fa.alpha, "share of the sparsity penalty, in (0,1]");
    fit->add_option("--s", fa.s, "eigenfunctions per predictor");
    fit->add_option("--theta", fa.theta, "eigenvalue floor in the penalty");
    fit->add_option("--kernel", fa.kernel, "cosine_bernoulli or sine_bernoulli");
    fit->add_option("--kernel-csv", fa.kernel_csv, "custom T x T kernel matrix")->check(CLI::ExistingFile);
    fit->add_flag("--export-design", fa.export_design, "also write phi.csv and gamma.csv");

    auto* ref = app.add_subcommand("refine", "ridge refit on the selected predictors");
    add_common(ref, common, false, false);
    ref->get_option("--out")->required();
    ref->add_option("--fit", fit_path, "fit.json from `fit`")->required()->check(CLI::ExistingFile);
    ref->add_option("--curves", fa.curves, "training curves CSV")->required();
    ref->add_option("--response", fa.response, "training response CSV")->required();
    ref->add_option("--tune-curves", fa.tune_curves, "tuning curves CSV");
    ref->add_option("--tune-response", fa.tune_response, "tuning response CSV");
    ref->add_option("--lambda3", lambda3, "ridge level");

    auto* pred = app.add_subcommand("predict", "predict responses for new curves");
    add_common(pred, common, false, false);
    pred->add_option("--fit", fit_path, "fit.json or refined.json")->required()->check(CLI::ExistingFile);
    pred->add_option("--curves", fa.curves, "curves CSV")->required();

    auto* eval = app.add_subcommand("evaluate", "selection and estimation metrics against a known truth");
    add_common(eval, common, false, false);
    eval->add_option("--fit", fit_path, "fit.json or refined.json")->required()->check(CLI::ExistingFile);
    eval->add_option("--truth", truth_path, "truth.json from `simulate`")->required()->check(CLI::ExistingFile);
    eval->add_option("--curves", fa.curves, "test curves CSV for MSPE");
    eval->add_option("--response", fa.response, "test response CSV for MSPE");

    auto* roc_cmd = app.add_subcommand("roc", "selection path over the lambda grid");
    add_common(roc_cmd, common, false, false);
    roc_cmd->add_option("--fit", fit_path, "fit.json supplying the fixed hyperparameters")
        ->required()
        ->check(CLI::ExistingFile);
    roc_cmd->add_option("--truth", truth_path, "truth.json supplying the signal set")
        ->required()
        ->check(CLI::ExistingFile);
    roc_cmd->add_option("--curves", fa.curves, "training curves CSV")->required();
    roc_cmd->add_option("--response", fa.response, "training response CSV")->required();

    auto* diag = app.add_subcommand("diagnose", "condition diagnostics for partially separable covariances");
    add_common(diag, common, false, false);
    diag->add_option("--kind", da.kind, "MA1 or AR1")->capture_default_str();
    diag->add_option("--rho", da.rho, "correlation parameter")->capture_default_str();
    diag->add_option("--lambda2", da.lambda2, "ridge levels")->delimiter(',');
    diag->add_option("--q", da.q, "signal set size")->capture_default_str();
    diag->add_option("--K", da.K, "eigenvalue truncation")->capture_default_str();

    auto* exp = app.add_subcommand("experiment", "Monte Carlo simulation study");
    add_common(exp, common, true, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : config;
    }

    try {
        if (*sim) return run_simulate(common);
        if (*fit) return run_fit(common, fa);
        if (*ref) return run_refine(common, fit_path, fa, lambda3);
        if (*pred) return run_predict(common, fit_path, fa.curves);
        if (*eval) return run_evaluate(common, fit_path, truth_path, fa);
        if (*roc_cmd) return run_roc(common, fit_path, truth_path, fa);
        if (*diag) return run_diagnose(common, da);
        if (*exp) return run_experiment_cmd(common);
    } catch (const fenet::error& e) {
        std::cerr << "error: " << e.what() << '\n';
        switch (e.kind()) {
            case error_kind::config: return config;
            case error_kind::data: return data;
            case error_kind::numerical: return numerical;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return other;
    }
    return other;
}
