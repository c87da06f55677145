#include <fenet/error.hpp>
#include <fenet/io.hpp>
#include <fenet/pipeline.hpp>

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <sys/wait.h>

using namespace fenet;
namespace fs = std::filesystem;

namespace {

SimulatedData tiny_sim(std::size_t T = 51)
{
    ScenarioConfig sc;
    sc.n = 25;
    sc.p = 4;
    sc.q = 2;
    sc.rho = 0.3;
    sc.test_n = 15;
    sc.seed = 5;
    return generate(sc, make_grid(T));
}

Dataset roundtrip(const Dataset& d)
{
    std::stringstream curves, response;
    write_curves_csv(curves, d);
    write_response_csv(response, d.y);
    return read_dataset(curves, response, d.grid);
}

HyperParams fixed_hp()
{
    HyperParams hp;
    hp.lambda = 2e-3;
    hp.alpha = 0.99;
    hp.s = 4;
    hp.theta = 1e-6;
    return hp;
}

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("fenet_unit_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int run_cli(const std::string& args)
{
    const std::string cmd = std::string(FENET_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST(FormatDouble, RoundTrips)
{
    for (double v : {0.1, 1.0 / 3, -2.5e-300, 6.02214076e23, 0.0}) EXPECT_EQ(std::stod(format_double(v)), v);
    EXPECT_EQ(format_double(std::numeric_limits<double>::quiet_NaN()), "nan");
}

TEST(Config, RoundTrip)
{
    ExperimentConfig cfg;
    cfg.scenario.kind = scenario::III;
    cfg.scenario.rho = 0.25;
    cfg.replicates = 9;
    cfg.grids.alpha = {0.5, 0.75};
    cfg.design.psi = psi_kind::identity;
    cfg.search_fit.max_sweeps = 42;
    const json j = to_json(cfg);
    const ExperimentConfig back = experiment_config_from_json(j);
    EXPECT_EQ(to_json(back), j);
    EXPECT_EQ(back.scenario.kind, scenario::III);
    EXPECT_EQ(back.search_fit.max_sweeps, 42u);
}

TEST(Config, StrictKeysAndSchema)
{
    json j = {{"schema_version", 1}, {"replicates", 2}};
    EXPECT_EQ(experiment_config_from_json(j).replicates, 2u);
    EXPECT_THROW(experiment_config_from_json({{"replicates", 2}}), config_error);
    EXPECT_THROW(experiment_config_from_json({{"schema_version", 2}}), config_error);
    EXPECT_THROW(experiment_config_from_json({{"schema_version", 1}, {"replicate", 2}}), config_error);
    EXPECT_THROW(experiment_config_from_json({{"schema_version", 1}, {"scenario", {{"nn", 3}}}}), config_error);
    EXPECT_THROW(experiment_config_from_json({{"schema_version", 1}, {"replicates", "two"}}), config_error);
}

TEST(Config, LogSpacedGridObject)
{
    const json j = {{"schema_version", 1}, {"grids", {{"lambda", {{"lo", 1e-3}, {"hi", 1.0}, {"count", 4}}}}}};
    const ExperimentConfig cfg = experiment_config_from_json(j);
    ASSERT_EQ(cfg.grids.lambda.size(), 4u);
    EXPECT_DOUBLE_EQ(cfg.grids.lambda[0], 1e-3);
    EXPECT_DOUBLE_EQ(cfg.grids.lambda[3], 1.0);
}

TEST(Csv, DatasetRoundTripIsExact)
{
    const SimulatedData sim = tiny_sim();
    const Dataset back = roundtrip(sim.train);
    ASSERT_EQ(back.p(), sim.train.p());
    for (std::size_t j = 0; j < back.p(); ++j) EXPECT_EQ(back.curves[j], sim.train.curves[j]);
    EXPECT_EQ(back.y, sim.train.y);
}

TEST(Csv, FitFromFilesEqualsInMemoryFit)
{
    const SimulatedData sim = tiny_sim();
    FitRequest req;
    req.hp = fixed_hp();
    const FitOutcome mem = fit_dataset(sim.train, nullptr, req);
    const FitOutcome file = fit_dataset(roundtrip(sim.train), nullptr, req);
    ASSERT_EQ(mem.artifact.selected, file.artifact.selected);
    EXPECT_LE((mem.artifact.beta - file.artifact.beta).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(mem.artifact.objective_trace.back(), file.artifact.objective_trace.back(), 1e-12);
}

TEST(Csv, MalformedHeaderNamesMissingColumn)
{
    std::stringstream curves("sample,predictor,index,value\n0,0,0,1.0\n");
    std::stringstream response("sample,response\n0,1.0\n");
    try {
        read_dataset(curves, response, make_grid(2), "train_curves.csv", "train_response.csv");
        FAIL() << "expected a data error";
    } catch (const data_error& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("grid_index"), std::string::npos) << msg;
        EXPECT_NE(msg.find("train_curves.csv:1"), std::string::npos) << msg;
    }
}

TEST(Csv, SchemaViolationsAreLineNumbered)
{
    auto expect_error = [](const std::string& curves_text, const std::string& resp_text, const std::string& needle) {
        std::stringstream c(curves_text), r(resp_text);
        try {
            read_dataset(c, r, make_grid(2));
            ADD_FAILURE() << "no error for " << needle;
        } catch (const data_error& e) {
            EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
        }
    };
    const std::string head = "sample,predictor,grid_index,value\n";
    const std::string resp = "sample,response\n0,1\n";
    expect_error(head + "0,0,0,1\n0,0,5,1\n", resp, "curves:3");
    expect_error(head + "0,0,0,1\n0,0,1\n", resp, "curves:3");
    expect_error(head + "0,0,0,1\n0,0,1,abc\n", resp, "curves:3");
    expect_error(head + "0,0,0,1\n0,0,0,1\n", resp, "curves:3");
    expect_error(head + "0,0,0,1\n", resp, "missing");
    expect_error(head + "0,0,0,1\n0,0,1,2\n", "sample,response\n1,1\n", "response");
}

TEST(Artifact, PredictOnTrainingReproducesFittedValues)
{
    const SimulatedData sim = tiny_sim();
    FitRequest req;
    req.hp = fixed_hp();
    const FitOutcome out = fit_dataset(sim.train, nullptr, req);
    const SqrtKernelOp op = spectral_sqrt(KernelSpec::cosine(), sim.train.grid);

    const Dataset centered = center(sim.train);
    const Dataset tr = transform_predictors(centered, std::span<const SqrtKernelOp>(&op, 1));
    const ReducedRankDesign des = build_design(tr, req.hp);
    const FEnetFit fit = fit_fenet(des, tr.y, req.hp, req.fit);
    const Eigen::VectorXd in_memory = (fitted_values(des, fit.c).array() + centered.centering->response_mean).matrix();

    const Eigen::VectorXd pred = predict(out.artifact, sim.train.curves, op);
    EXPECT_LE((pred - in_memory).cwiseAbs().maxCoeff(), 1e-12);

    const FitArtifact back = fit_from_json(json::parse(to_json(out.artifact).dump()));
    EXPECT_LE((predict(back, sim.train.curves, op) - pred).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(back.selected, out.artifact.selected);
    EXPECT_EQ(back.beta, out.artifact.beta);
}

TEST(Artifact, RefinedPredictionsUseSelectedBlocks)
{
    const SimulatedData sim = tiny_sim();
    FitRequest req;
    req.hp = fixed_hp();
    const FitArtifact base = fit_dataset(sim.train, nullptr, req).artifact;
    ASSERT_FALSE(base.selected.empty());
    const FitArtifact ref = refine_dataset(sim.train, base, {}, 1e-6);
    EXPECT_EQ(ref.kind, "refined");
    EXPECT_EQ(ref.selected, base.selected);
    const SqrtKernelOp op = spectral_sqrt(KernelSpec::cosine(), sim.train.grid);
    EXPECT_EQ(predict(ref, sim.test.curves, op).size(), 15);
}

TEST(Truth, JsonRoundTrip)
{
    const SimulatedData sim = tiny_sim();
    const Truth back = truth_from_json(json::parse(to_json(*sim.truth).dump()));
    EXPECT_EQ(back.signal_set, sim.truth->signal_set);
    EXPECT_EQ(back.signs, sim.truth->signs);
    EXPECT_EQ(back.basis_coef, sim.truth->basis_coef);
    EXPECT_EQ(back.beta, sim.truth->beta);
    EXPECT_EQ(back.nu, sim.truth->nu);
}

TEST(Reports, ReplicateCsvHeader)
{
    std::ostringstream os;
    write_replicates_csv(os, {ReplicateResult{}});
    const std::string first = os.str().substr(0, os.str().find('\n'));
    EXPECT_EQ(first.rfind("replicate,seed,lambda,alpha,s,theta,lambda3,selected,fpr,fnr,mnd,rer", 0), 0u);
    std::ostringstream roc;
    write_roc_csv(roc, {{0.5, 0.25, 1.0, true}});
    EXPECT_EQ(roc.str(), "lambda,fpr,tpr\n0.5,0.25,1\n");
}

TEST(Cli, EndToEndAndExitCodes)
{
    const fs::path dir = scratch("cli");
    {
        std::ofstream cfg(dir / "cfg.json");
        cfg << R"({"schema_version": 1, "scenario": {"n": 30, "p": 4, "q": 2, "test_n": 20}})";
    }
    const std::string d = dir.string();
    ASSERT_EQ(run_cli("simulate --config " + d + "/cfg.json --seed 3 --grid-points 51 --out " + d + "/sim"), 0);
    EXPECT_TRUE(fs::exists(dir / "sim" / "truth.json"));
    const std::string train = " --grid-points 51 --curves " + d + "/sim/train_curves.csv --response " + d + "/sim/train_response.csv";
    ASSERT_EQ(run_cli("fit" + train + " --lambda 0.002 --alpha 0.99 --s 4 --theta 1e-6 --out " + d + "/fit"), 0);
    EXPECT_TRUE(fs::exists(dir / "fit" / "beta.csv"));
    ASSERT_EQ(run_cli("predict --grid-points 51 --fit " + d + "/fit/fit.json --curves " + d + "/sim/train_curves.csv --out " + d + "/pred.csv"), 0);
    EXPECT_EQ(slurp(dir / "pred.csv").rfind("sample,prediction\n", 0), 0u);
    EXPECT_EQ(run_cli("evaluate --grid-points 51 --fit " + d + "/fit/fit.json --truth " + d + "/sim/truth.json --out " + d + "/eval.json"), 0);
    EXPECT_EQ(run_cli("diagnose --kind AR1 --rho 0.3 --lambda2 0.01,0.1 --out " + d + "/diag.json"), 0);

    // exit codes: config 2, data 3
    EXPECT_EQ(run_cli("fit" + train + " --lambda -1 --out " + d + "/bad"), 2);
    EXPECT_EQ(run_cli("fit --grid-points 51 --curves " + d + "/nope.csv --response " + d + "/nope.csv --lambda 0.1 --out " + d + "/bad"), 3);
    EXPECT_EQ(run_cli("fit --grid-points 52" + train.substr(17) + " --lambda 0.1 --out " + d + "/bad"), 3);
    EXPECT_EQ(run_cli("frobnicate"), 2);
    {
        std::ofstream cfg(dir / "bad.json");
        cfg << R"({"schema_version": 1, "bogus": 1})";
    }
    EXPECT_EQ(run_cli("simulate --config " + d + "/bad.json --out " + d + "/sim2"), 2);
    fs::remove_all(dir);
}
