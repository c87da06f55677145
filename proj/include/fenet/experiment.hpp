#pragma once

#include <fenet/design.hpp>
#include <fenet/kernels.hpp>
#include <fenet/metrics.hpp>
#include <fenet/refine.hpp>
#include <fenet/simgen.hpp>
#include <fenet/solver.hpp>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace fenet {

std::vector<double> log_spaced(double lo, double hi, std::size_t count);

// Defaults sized to the whitened scale of the transformed predictors, whose
// leading score variances are O(1e-2) and decay to O(1e-7) by k = 10.
struct SearchGrids
{
    std::vector<double> lambda = log_spaced(1e-4, 1e1, 30);
    std::vector<double> alpha = {1 - 1e-1, 1 - 1e-3, 1 - 1e-5, 1 - 1e-7, 1 - 1e-9};
    std::vector<std::size_t> s = {4, 6, 8, 10, 12, 14};
    std::vector<double> theta = {1e-7, 1e-6, 1e-5};
    std::vector<double> lambda3 = default_lambda3();

    static std::vector<double> default_lambda3();
    void validate() const;
};

struct ExperimentConfig
{
    static constexpr int current_schema = 1;

    int schema_version = current_schema;
    ScenarioConfig scenario;
    std::size_t replicates = 1;
    std::uint64_t seed = 1;
    std::size_t grid_points = Grid::default_size;
    std::string kernel = "auto"; // auto, cosine_bernoulli, sine_bernoulli
    SearchGrids grids;
    DesignOptions design;
    FitOptions fit{.max_sweeps = 5000}; // the final fit at the tuned cell
    FitOptions search_fit{.max_sweeps = 100}; // every grid cell
    std::size_t threads = 1;
    std::size_t mc_test_n = 0; // > 0 adds a Monte Carlo RER column on a separate test draw
    double max_nonconverged_fraction = 0.1;

    void validate() const;
};

/// The kernel a scenario is fitted with: sine for Scenario II, cosine otherwise,
/// unless the config names one explicitly.
KernelSpec scenario_kernel(const ExperimentConfig& cfg);

/**
 * Training data centered and mapped through the square-root kernel operator,
 * and a tuning split centered with the training means.
 */
struct PreparedData
{
    Dataset train;
    Dataset tune;
    CenteringMeans means;
};

PreparedData prepare(const Dataset& train, const Dataset& tune, const SqrtKernelOp& op);

struct CellResult
{
    HyperParams hp;
    double mspe = 0.0;
    bool converged = false;
    bool failed = false;
};

struct SearchResult
{
    HyperParams best;
    double best_mspe = 0.0;
    std::size_t cells = 0;
    std::size_t failed = 0;
    std::size_t nonconverged = 0;
};

/// Index of the best cell: smallest MSPE, then larger lambda, then larger alpha,
/// then the earlier cell. Failed cells never win. Throws when all failed.
std::size_t select_best(const std::vector<CellResult>& cells);

/**
 * Exhaustive search over s x theta x alpha x lambda, scored by MSPE on the
 * tuning split. For each (s, theta, alpha) the lambda path runs from largest
 * to smallest with warm starts.
 */
SearchResult grid_search(const DesignBasis& basis, const Eigen::VectorXd& y,
                         const std::vector<Eigen::MatrixXd>& tune_scores, const Eigen::VectorXd& tune_y,
                         const SearchGrids& grids, psi_kind psi, const FitOptions& options);

/// Best lambda3 for the refined estimator on a fixed selected set.
double tune_lambda3(const ReducedRankDesign& design, const Eigen::VectorXd& y,
                    const std::vector<std::size_t>& selected, const std::vector<Eigen::MatrixXd>& tune_scores,
                    const Eigen::VectorXd& tune_y, const std::vector<double>& grid);

struct ReplicateResult
{
    std::size_t index = 0;
    std::uint64_t seed = 0;
    HyperParams hp;
    std::size_t selected_count = 0;
    double fpr = 0.0;
    double fnr = 0.0;
    double mnd = 0.0;
    double rer = 0.0;
    double rer_refined = 0.0;
    double re = 0.0;
    double mnd_refined = 0.0;
    double mspe = 0.0;
    double mspe_refined = 0.0;
    std::optional<double> rer_mc;
    std::optional<double> rer_mc_se;
    bool converged = false;
    std::size_t cells = 0;
    std::size_t cells_failed = 0;
    std::size_t cells_nonconverged = 0;
};

ReplicateResult run_replicate(const ExperimentConfig& cfg, std::size_t index);

struct MetricSummary
{
    std::string name;
    Summary summary;
};

struct ExperimentResult
{
    std::vector<ReplicateResult> replicates;
    std::vector<MetricSummary> summaries;
    double nonconverged_fraction = 0.0;
    bool failed = false;
};

/// Runs every replicate (in parallel over `threads`) and aggregates in replicate order.
/// `progress`, when set, is called after each finished replicate.
ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const std::function<void(std::size_t)>& progress = {});

std::vector<MetricSummary> aggregate(const std::vector<ReplicateResult>& reps);

} // namespace fenet
