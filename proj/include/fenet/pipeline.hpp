#pragma once

#include <fenet/experiment.hpp>
#include <fenet/io.hpp>

#include <optional>
#include <string>

namespace fenet {

/// Kernel by name: cosine_bernoulli, sine_bernoulli, or custom with its matrix.
KernelSpec kernel_from_name(const std::string& name, const Eigen::MatrixXd& custom = {});
KernelSpec artifact_kernel(const FitArtifact& fit);

struct FitRequest
{
    std::string kernel = "cosine_bernoulli";
    Eigen::MatrixXd kernel_matrix; // custom kernel only
    HyperParams hp;                // used when no tuning split is given
    DesignOptions design;
    FitOptions fit{.max_sweeps = 5000};
    SearchGrids grids;             // used with a tuning split
    FitOptions search_fit{.max_sweeps = 100};
};

struct FitOutcome
{
    FitArtifact artifact;
    std::optional<SearchResult> search;
};

/**
 * Centers raw training data, maps it through the square-root kernel and fits
 * at req.hp, or at the MSPE-best grid cell when a tuning split is given.
 */
FitOutcome fit_dataset(const Dataset& train, const Dataset* tune, const FitRequest& req);

/**
 * Ridge refit on the predictors selected by `base`, rebuilt from the same
 * training data. lambda3 is taken as given, or tuned over `lambda3_grid`
 * on the tuning split when one is passed.
 */
FitArtifact refine_dataset(const Dataset& train, const FitArtifact& base, const DesignOptions& design,
                           double lambda3, const Dataset* tune = nullptr,
                           const std::vector<double>& lambda3_grid = {});

/// ROC path at base's hyperparameters, for lambdas ascending.
std::vector<RocPoint> roc_dataset(const Dataset& train, const FitArtifact& base, const DesignOptions& design,
                                  const std::vector<double>& lambdas, const std::vector<std::size_t>& signal,
                                  const FitOptions& options);

} // namespace fenet
