#pragma once

#include <fenet/design.hpp>
#include <fenet/diagnostics.hpp>
#include <fenet/experiment.hpp>
#include <fenet/kernels.hpp>
#include <fenet/solver.hpp>

#include <json.hpp>

#include <Eigen/Core>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace fenet {

using json = nlohmann::json;

/// Shortest decimal form that reads back to the same double.
std::string format_double(double v);

// ---- configuration -------------------------------------------------------

/// Missing keys keep their defaults; unknown keys and a schema_version other
/// than the current one are config errors.
ExperimentConfig experiment_config_from_json(const json& j);
json to_json(const ExperimentConfig& cfg);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

json to_json(const HyperParams& hp);
HyperParams hyperparams_from_json(const json& j);

// ---- datasets --------------------------------------------------------------

/// Long format: header `sample,predictor,grid_index,value`, 0-based indices.
void write_curves_csv(std::ostream& out, const Dataset& data);
/// Header `sample,response`.
void write_response_csv(std::ostream& out, const Eigen::VectorXd& y);

/**
 * Reads a curves/response pair. Columns may come in any order; every
 * (sample, predictor, grid_index) cell must appear exactly once and the
 * sample ids must match between the files. Errors name the file and line.
 */
Dataset read_dataset(std::istream& curves, std::istream& response, grid_ptr grid,
                     const std::string& curves_name = "curves", const std::string& response_name = "response");
Dataset read_dataset(const std::filesystem::path& curves, const std::filesystem::path& response, grid_ptr grid);

/// Curves only, for prediction on new data.
std::vector<Eigen::MatrixXd> read_curves(std::istream& curves, const Grid& grid, const std::string& name = "curves");

/// Headerless numeric matrix, one row per line (custom kernels).
Eigen::MatrixXd read_matrix_csv(std::istream& in, const std::string& name = "matrix");

void write_dataset(const std::filesystem::path& dir, const std::string& prefix, const Dataset& data);

json to_json(const Truth& truth);
Truth truth_from_json(const json& j);

// ---- fits ------------------------------------------------------------------

/**
 * Everything needed to predict from a fit: centering means, the kernel,
 * per-predictor eigenfunctions (selected blocks only) with their scale,
 * and the coefficient blocks. Plus the fit record itself.
 */
struct FitArtifact
{
    std::string kind = "fenet"; // or "refined"
    HyperParams hp;
    psi_kind psi = psi_kind::cov_floor;
    std::string kernel;
    Eigen::MatrixXd kernel_matrix; // only for a custom kernel
    std::size_t grid_points = 0;
    std::size_t n = 0;
    CenteringMeans means;
    std::vector<std::size_t> selected;
    std::vector<Eigen::MatrixXd> phi; // T x M_j, empty when unselected
    std::vector<double> scale;
    CoefBlocks c;
    std::vector<double> block_norms;
    Eigen::MatrixXd beta; // p x T
    std::vector<double> objective_trace;
    std::size_t sweeps = 0;
    bool converged = true;
    double kkt_max_violation = 0.0;
};

FitArtifact make_artifact(const ReducedRankDesign& design, const CoefBlocks& c, const CenteringMeans& means,
                          const SqrtKernelOp& op, const HyperParams& hp, const std::string& kernel);
FitArtifact make_artifact(const ReducedRankDesign& design, const FEnetFit& fit, const CenteringMeans& means,
                          const SqrtKernelOp& op, const HyperParams& hp, const std::string& kernel);

/// Predictions for raw (uncentered, untransformed) curves.
Eigen::VectorXd predict(const FitArtifact& fit, const std::vector<Eigen::MatrixXd>& curves, const SqrtKernelOp& op);

json to_json(const FitArtifact& fit);
FitArtifact fit_from_json(const json& j);

/// Header `predictor,grid_index,t,value`.
void write_beta_csv(std::ostream& out, const Grid& grid, const Eigen::MatrixXd& beta);

/// Eigenfunctions `predictor,k,grid_index,value` and scores `sample,predictor,k,value`.
void write_design_csv(const std::filesystem::path& dir, const ReducedRankDesign& design);

// ---- reports ---------------------------------------------------------------

void write_roc_csv(std::ostream& out, const std::vector<RocPoint>& points);
json to_json(const ConditionReport& rep);

void write_replicates_csv(std::ostream& out, const std::vector<ReplicateResult>& reps);
void write_summary_csv(std::ostream& out, const std::vector<MetricSummary>& summaries);
json summary_json(const ExperimentResult& res);

json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& j);
void write_text_file(const std::filesystem::path& path, const std::string& text);

} // namespace fenet
