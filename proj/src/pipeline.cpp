#include <fenet/pipeline.hpp>
#include <fenet/error.hpp>

#include <algorithm>

namespace fenet {

KernelSpec kernel_from_name(const std::string& name, const Eigen::MatrixXd& custom)
{
    switch (kernel_kind_from_string(name)) {
        case kernel_kind::cosine_bernoulli: return KernelSpec::cosine();
        case kernel_kind::sine_bernoulli: return KernelSpec::sine();
        case kernel_kind::custom: break;
    }
    if (custom.size() == 0) throw config_error("a custom kernel needs its matrix");
    return KernelSpec::from_matrix(custom);
}

KernelSpec artifact_kernel(const FitArtifact& fit)
{
    return kernel_from_name(fit.kernel, fit.kernel_matrix);
}

namespace {

struct Prepared
{
    Dataset transformed;
    CenteringMeans raw_means;
};

Prepared prepare_train(const Dataset& train, const SqrtKernelOp& op)
{
    Prepared out;
    const Dataset centered = center(train);
    out.raw_means = *centered.centering;
    out.transformed = transform_predictors(centered, std::span<const SqrtKernelOp>(&op, 1));
    return out;
}

FitArtifact finish(FitArtifact a, const std::string& kernel, const Eigen::MatrixXd& kernel_matrix)
{
    a.kernel = kernel;
    a.kernel_matrix = kernel_matrix;
    return a;
}

} // namespace

FitOutcome fit_dataset(const Dataset& train, const Dataset* tune, const FitRequest& req)
{
    const KernelSpec spec = kernel_from_name(req.kernel, req.kernel_matrix);
    const SqrtKernelOp op = spectral_sqrt(spec, train.grid);
    const std::string name = to_string(spec.kind);
    FitOutcome out;

    if (!tune) {
        req.hp.validate();
        const Prepared prep = prepare_train(train, op);
        const ReducedRankDesign design = build_design(prep.transformed, req.hp, req.design);
        const FEnetFit fit = fit_fenet(design, prep.transformed.y, req.hp, req.fit);
        out.artifact = finish(make_artifact(design, fit, prep.raw_means, op, req.hp, name), name, req.kernel_matrix);
        return out;
    }

    req.grids.validate();
    const PreparedData prep = prepare(train, *tune, op);
    const std::size_t s_max = *std::max_element(req.grids.s.begin(), req.grids.s.end());
    const DesignBasis basis = compute_basis(prep.train, s_max, req.design);
    const auto tune_scores = project_scores(basis, prep.tune);
    out.search = grid_search(basis, prep.train.y, tune_scores, prep.tune.y, req.grids, req.design.psi, req.search_fit);

    const HyperParams hp = out.search->best;
    const ReducedRankDesign design = slice_design(basis, hp.s, req.design.psi, hp.theta);
    const FEnetFit fit = fit_fenet(design, prep.train.y, hp, req.fit);
    CenteringMeans raw = *center(train).centering;
    out.artifact = finish(make_artifact(design, fit, raw, op, hp, name), name, req.kernel_matrix);
    return out;
}

FitArtifact refine_dataset(const Dataset& train, const FitArtifact& base, const DesignOptions& design_opts,
                           double lambda3, const Dataset* tune, const std::vector<double>& lambda3_grid)
{
    if (base.selected.empty()) throw config_error("the fit selected no predictors; nothing to refine");
    const SqrtKernelOp op = spectral_sqrt(artifact_kernel(base), train.grid);
    const Prepared prep = prepare_train(train, op);
    DesignOptions opts = design_opts;
    opts.psi = base.psi;
    HyperParams hp = base.hp;
    const ReducedRankDesign design = build_design(prep.transformed, hp, opts);

    if (tune) {
        const PreparedData split = prepare(train, *tune, op);
        const auto tune_scores = project_scores(design, split.tune);
        hp.lambda3 = tune_lambda3(design, prep.transformed.y, base.selected, tune_scores, split.tune.y, lambda3_grid);
    } else {
        hp.lambda3 = lambda3;
    }
    const RefinedFit rf = fit_refined(design, prep.transformed.y, base.selected, hp.lambda3);
    FitArtifact a = make_artifact(design, refined_blocks(design, rf), prep.raw_means, op, hp, base.kernel);
    a.kind = "refined";
    a.kernel_matrix = base.kernel_matrix;
    return a;
}

std::vector<RocPoint> roc_dataset(const Dataset& train, const FitArtifact& base, const DesignOptions& design_opts,
                                  const std::vector<double>& lambdas, const std::vector<std::size_t>& signal,
                                  const FitOptions& options)
{
    const SqrtKernelOp op = spectral_sqrt(artifact_kernel(base), train.grid);
    const Prepared prep = prepare_train(train, op);
    DesignOptions opts = design_opts;
    opts.psi = base.psi;
    const ReducedRankDesign design = build_design(prep.transformed, base.hp, opts);
    return roc(design, prep.transformed.y, base.hp, lambdas, signal, options);
}

} // namespace fenet
