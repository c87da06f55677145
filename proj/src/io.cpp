#include <fenet/io.hpp>
#include <fenet/error.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <system_error>

namespace fenet {

std::string format_double(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace {

// ---- json helpers ----------------------------------------------------------

json vec_json(const Eigen::VectorXd& v)
{
    return json(std::vector<double>(v.data(), v.data() + v.size()));
}

json mat_json(const Eigen::MatrixXd& m)
{
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vec_json(m.row(i).transpose()));
    return rows;
}

Eigen::VectorXd json_vec(const json& j)
{
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd json_mat(const json& j)
{
    if (!j.is_array()) throw data_error("expected an array of rows");
    if (j.empty()) return {};
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto row = j[static_cast<std::size_t>(i)].get<std::vector<double>>();
        if (static_cast<Eigen::Index>(row.size()) != cols) throw data_error("ragged matrix rows");
        for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = row[static_cast<std::size_t>(k)];
    }
    return m;
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where)
{
    if (!j.is_object()) throw config_error(where + " must be an object");
    for (const auto& item : j.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return item.key() == a; })) {
            throw config_error("unknown key '" + item.key() + "' in " + where);
        }
    }
}

template <class T>
void read_key(const json& j, const char* key, T& out, const std::string& where)
{
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw config_error(where + "." + key + ": " + e.what());
    }
}

std::vector<double> read_real_grid(const json& j, const std::string& where)
{
    if (j.is_object()) {
        check_keys(j, {"lo", "hi", "count"}, where);
        if (!j.contains("lo") || !j.contains("hi") || !j.contains("count")) {
            throw config_error(where + " needs lo, hi and count");
        }
        try {
            return log_spaced(j.at("lo").get<double>(), j.at("hi").get<double>(), j.at("count").get<std::size_t>());
        } catch (const json::exception& e) {
            throw config_error(where + ": " + e.what());
        }
    }
    try {
        return j.get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw config_error(where + ": " + e.what());
    }
}

json options_json(const FitOptions& o)
{
    return {{"tol_outer", o.tol_outer}, {"max_sweeps", o.max_sweeps}, {"kkt_tol", o.kkt_tol}};
}

FitOptions options_from(const json& j, FitOptions o, const std::string& where)
{
    check_keys(j, {"tol_outer", "max_sweeps", "kkt_tol"}, where);
    read_key(j, "tol_outer", o.tol_outer, where);
    read_key(j, "max_sweeps", o.max_sweeps, where);
    read_key(j, "kkt_tol", o.kkt_tol, where);
    return o;
}

std::string route_name(eigen_route r)
{
    switch (r) {
        case eigen_route::dual: return "dual";
        case eigen_route::primal: return "primal";
        case eigen_route::automatic: break;
    }
    return "automatic";
}

eigen_route route_from(const std::string& name)
{
    if (name == "automatic") return eigen_route::automatic;
    if (name == "dual") return eigen_route::dual;
    if (name == "primal") return eigen_route::primal;
    throw config_error("unknown eigen route '" + name + "'");
}

// ---- csv helpers -----------------------------------------------------------

std::vector<std::string_view> split(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        auto field = line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
        while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
        while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) {
            field.remove_suffix(1);
        }
        out.push_back(field);
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

[[noreturn]] void fail_at(const std::string& name, std::size_t line, const std::string& what)
{
    throw data_error(name + ":" + std::to_string(line) + ": " + what);
}

double parse_real(std::string_view s, const std::string& name, std::size_t line, std::string_view column)
{
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
        fail_at(name, line, "column '" + std::string(column) + "': '" + std::string(s) + "' is not a finite number");
    }
    return v;
}

std::size_t parse_index(std::string_view s, const std::string& name, std::size_t line, std::string_view column)
{
    std::size_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        fail_at(name, line, "column '" + std::string(column) + "': '" + std::string(s) +
                                "' is not a non-negative integer");
    }
    return v;
}

struct CsvTable
{
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_of;

    // Column positions for `required`, in that order; a missing one is named.
    std::vector<std::size_t> columns(std::initializer_list<const char*> required, const std::string& name) const
    {
        std::vector<std::size_t> pos;
        for (const char* col : required) {
            const auto it = std::find(header.begin(), header.end(), col);
            if (it == header.end()) fail_at(name, 1, std::string("header is missing column '") + col + "'");
            pos.push_back(static_cast<std::size_t>(it - header.begin()));
        }
        return pos;
    }
};

CsvTable read_table(std::istream& in, const std::string& name)
{
    CsvTable t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (lineno == 1) {
            for (auto f : split(line)) t.header.emplace_back(f);
            continue;
        }
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        auto fields = split(line);
        if (fields.size() != t.header.size()) {
            fail_at(name, lineno, "expected " + std::to_string(t.header.size()) + " fields, found " +
                                      std::to_string(fields.size()));
        }
        t.rows.emplace_back(fields.begin(), fields.end());
        t.line_of.push_back(lineno);
    }
    if (lineno == 0) fail_at(name, 1, "empty file, expected a header");
    return t;
}

std::ifstream open_in(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw data_error("cannot open " + path.string());
    return in;
}

std::ofstream open_out(const std::filesystem::path& path)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw data_error("cannot write " + path.string());
    return out;
}

} // namespace

// ---- configuration ---------------------------------------------------------

json to_json(const HyperParams& hp)
{
    return {{"lambda", hp.lambda}, {"alpha", hp.alpha}, {"s", hp.s}, {"theta", hp.theta}, {"lambda3", hp.lambda3}};
}

HyperParams hyperparams_from_json(const json& j)
{
    HyperParams hp;
    check_keys(j, {"lambda", "alpha", "s", "theta", "lambda3"}, "hyperparameters");
    read_key(j, "lambda", hp.lambda, "hyperparameters");
    read_key(j, "alpha", hp.alpha, "hyperparameters");
    read_key(j, "s", hp.s, "hyperparameters");
    read_key(j, "theta", hp.theta, "hyperparameters");
    read_key(j, "lambda3", hp.lambda3, "hyperparameters");
    return hp;
}

json to_json(const ExperimentConfig& cfg)
{
    const auto& sc = cfg.scenario;
    const auto& g = cfg.grids;
    return {
        {"schema_version", cfg.schema_version},
        {"scenario",
         {{"kind", to_string(sc.kind)},
          {"n", sc.n},
          {"p", sc.p},
          {"q", sc.q},
          {"rho", sc.rho},
          {"sigma", sc.sigma},
          {"k_max", sc.k_max},
          {"k0", sc.k0},
          {"test_n", sc.test_n}}},
        {"replicates", cfg.replicates},
        {"seed", cfg.seed},
        {"grid_points", cfg.grid_points},
        {"kernel", cfg.kernel},
        {"grids", {{"lambda", g.lambda}, {"alpha", g.alpha}, {"s", g.s}, {"theta", g.theta}, {"lambda3", g.lambda3}}},
        {"design",
         {{"psi", to_string(cfg.design.psi)},
          {"standardize", cfg.design.standardize},
          {"eigen_route", route_name(cfg.design.route)}}},
        {"fit", options_json(cfg.fit)},
        {"search_fit", options_json(cfg.search_fit)},
        {"threads", cfg.threads},
        {"mc_test_n", cfg.mc_test_n},
        {"max_nonconverged_fraction", cfg.max_nonconverged_fraction},
    };
}

ExperimentConfig experiment_config_from_json(const json& j)
{
    ExperimentConfig cfg;
    check_keys(j,
               {"schema_version", "scenario", "replicates", "seed", "grid_points", "kernel", "grids", "design", "fit",
                "search_fit", "threads", "mc_test_n", "max_nonconverged_fraction"},
               "config");
    if (!j.contains("schema_version")) throw config_error("config is missing schema_version");
    read_key(j, "schema_version", cfg.schema_version, "config");
    if (cfg.schema_version != ExperimentConfig::current_schema) {
        throw config_error("unsupported schema_version " + std::to_string(cfg.schema_version) + " (expected " +
                           std::to_string(ExperimentConfig::current_schema) + ")");
    }
    if (j.contains("scenario")) {
        const auto& s = j.at("scenario");
        check_keys(s, {"kind", "n", "p", "q", "rho", "sigma", "k_max", "k0", "test_n"}, "scenario");
        std::string kind = to_string(cfg.scenario.kind);
        read_key(s, "kind", kind, "scenario");
        cfg.scenario.kind = scenario_from_string(kind);
        read_key(s, "n", cfg.scenario.n, "scenario");
        read_key(s, "p", cfg.scenario.p, "scenario");
        read_key(s, "q", cfg.scenario.q, "scenario");
        read_key(s, "rho", cfg.scenario.rho, "scenario");
        read_key(s, "sigma", cfg.scenario.sigma, "scenario");
        read_key(s, "k_max", cfg.scenario.k_max, "scenario");
        read_key(s, "k0", cfg.scenario.k0, "scenario");
        read_key(s, "test_n", cfg.scenario.test_n, "scenario");
    }
    read_key(j, "replicates", cfg.replicates, "config");
    read_key(j, "seed", cfg.seed, "config");
    read_key(j, "grid_points", cfg.grid_points, "config");
    read_key(j, "kernel", cfg.kernel, "config");
    if (j.contains("grids")) {
        const auto& g = j.at("grids");
        check_keys(g, {"lambda", "alpha", "s", "theta", "lambda3"}, "grids");
        if (g.contains("lambda")) cfg.grids.lambda = read_real_grid(g.at("lambda"), "grids.lambda");
        if (g.contains("alpha")) cfg.grids.alpha = read_real_grid(g.at("alpha"), "grids.alpha");
        if (g.contains("theta")) cfg.grids.theta = read_real_grid(g.at("theta"), "grids.theta");
        if (g.contains("lambda3")) cfg.grids.lambda3 = read_real_grid(g.at("lambda3"), "grids.lambda3");
        read_key(g, "s", cfg.grids.s, "grids");
    }
    if (j.contains("design")) {
        const auto& d = j.at("design");
        check_keys(d, {"psi", "standardize", "eigen_route"}, "design");
        std::string psi = to_string(cfg.design.psi);
        std::string route = route_name(cfg.design.route);
        read_key(d, "psi", psi, "design");
        read_key(d, "standardize", cfg.design.standardize, "design");
        read_key(d, "eigen_route", route, "design");
        cfg.design.psi = psi_kind_from_string(psi);
        cfg.design.route = route_from(route);
    }
    if (j.contains("fit")) cfg.fit = options_from(j.at("fit"), cfg.fit, "fit");
    if (j.contains("search_fit")) cfg.search_fit = options_from(j.at("search_fit"), cfg.search_fit, "search_fit");
    read_key(j, "threads", cfg.threads, "config");
    read_key(j, "mc_test_n", cfg.mc_test_n, "config");
    read_key(j, "max_nonconverged_fraction", cfg.max_nonconverged_fraction, "config");
    cfg.validate();
    return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path)
{
    json j;
    try {
        j = read_json_file(path);
    } catch (const data_error& e) {
        throw config_error(e.what());
    }
    return experiment_config_from_json(j);
}

// ---- datasets --------------------------------------------------------------

void write_curves_csv(std::ostream& out, const Dataset& data)
{
    out << "sample,predictor,grid_index,value\n";
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(data.n()); ++i) {
        for (std::size_t j = 0; j < data.p(); ++j) {
            const auto& X = data.curves[j];
            for (Eigen::Index m = 0; m < X.cols(); ++m) {
                out << i << ',' << j << ',' << m << ',' << format_double(X(i, m)) << '\n';
            }
        }
    }
}

void write_response_csv(std::ostream& out, const Eigen::VectorXd& y)
{
    out << "sample,response\n";
    for (Eigen::Index i = 0; i < y.size(); ++i) out << i << ',' << format_double(y[i]) << '\n';
}

std::vector<Eigen::MatrixXd> read_curves(std::istream& in, const Grid& grid, const std::string& name)
{
    const CsvTable t = read_table(in, name);
    const auto col = t.columns({"sample", "predictor", "grid_index", "value"}, name);
    const auto T = static_cast<Eigen::Index>(grid.size());

    std::size_t n = 0, p = 0;
    struct Cell
    {
        std::size_t i, j, m;
        double v;
    };
    std::vector<Cell> cells;
    cells.reserve(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const auto line = t.line_of[r];
        Cell c{parse_index(row[col[0]], name, line, "sample"), parse_index(row[col[1]], name, line, "predictor"),
               parse_index(row[col[2]], name, line, "grid_index"), parse_real(row[col[3]], name, line, "value")};
        if (c.m >= static_cast<std::size_t>(T)) {
            fail_at(name, line, "grid_index " + std::to_string(c.m) + " outside the declared grid of " +
                                    std::to_string(T) + " points");
        }
        n = std::max(n, c.i + 1);
        p = std::max(p, c.j + 1);
        cells.push_back(c);
    }
    if (cells.empty()) fail_at(name, 2, "no data rows");
    std::vector<Eigen::MatrixXd> curves(p, Eigen::MatrixXd(static_cast<Eigen::Index>(n), T));
    std::vector<std::vector<unsigned char>> seen(p, std::vector<unsigned char>(n * static_cast<std::size_t>(T), 0));
    for (std::size_t r = 0; r < cells.size(); ++r) {
        const auto& c = cells[r];
        auto& flag = seen[c.j][c.i * static_cast<std::size_t>(T) + c.m];
        if (flag) {
            fail_at(name, t.line_of[r], "duplicate entry for sample " + std::to_string(c.i) + ", predictor " +
                                            std::to_string(c.j) + ", grid_index " + std::to_string(c.m));
        }
        flag = 1;
        curves[c.j](static_cast<Eigen::Index>(c.i), static_cast<Eigen::Index>(c.m)) = c.v;
    }
    for (std::size_t j = 0; j < p; ++j) {
        const auto it = std::find(seen[j].begin(), seen[j].end(), 0);
        if (it != seen[j].end()) {
            const auto k = static_cast<std::size_t>(it - seen[j].begin());
            throw data_error(name + ": missing entry for sample " + std::to_string(k / static_cast<std::size_t>(T)) +
                             ", predictor " + std::to_string(j) + ", grid_index " +
                             std::to_string(k % static_cast<std::size_t>(T)));
        }
    }
    return curves;
}

Dataset read_dataset(std::istream& curves, std::istream& response, grid_ptr grid, const std::string& curves_name,
                     const std::string& response_name)
{
    Dataset out;
    out.grid = grid;
    out.curves = read_curves(curves, *grid, curves_name);
    const auto n = static_cast<std::size_t>(out.curves[0].rows());

    const CsvTable t = read_table(response, response_name);
    const auto col = t.columns({"sample", "response"}, response_name);
    out.y.resize(static_cast<Eigen::Index>(n));
    std::vector<unsigned char> seen(n, 0);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto line = t.line_of[r];
        const auto i = parse_index(t.rows[r][col[0]], response_name, line, "sample");
        if (i >= n) {
            fail_at(response_name, line, "sample " + std::to_string(i) + " has no curves (curves cover " +
                                             std::to_string(n) + " samples)");
        }
        if (seen[i]) fail_at(response_name, line, "duplicate sample " + std::to_string(i));
        seen[i] = 1;
        out.y[static_cast<Eigen::Index>(i)] = parse_real(t.rows[r][col[1]], response_name, line, "response");
    }
    const auto it = std::find(seen.begin(), seen.end(), 0);
    if (it != seen.end()) {
        throw data_error(response_name + ": missing response for sample " + std::to_string(it - seen.begin()));
    }
    out.validate();
    return out;
}

Dataset read_dataset(const std::filesystem::path& curves, const std::filesystem::path& response, grid_ptr grid)
{
    auto c = open_in(curves);
    auto r = open_in(response);
    return read_dataset(c, r, std::move(grid), curves.string(), response.string());
}

Eigen::MatrixXd read_matrix_csv(std::istream& in, const std::string& name)
{
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::vector<double> row;
        for (auto f : split(line)) row.push_back(parse_real(f, name, lineno, std::to_string(row.size())));
        if (!rows.empty() && row.size() != rows[0].size()) {
            fail_at(name, lineno, "expected " + std::to_string(rows[0].size()) + " fields, found " +
                                      std::to_string(row.size()));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw data_error(name + ": empty matrix");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t k = 0; k < rows[i].size(); ++k) {
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
        }
    }
    return m;
}

void write_dataset(const std::filesystem::path& dir, const std::string& prefix, const Dataset& data)
{
    auto c = open_out(dir / (prefix + "_curves.csv"));
    write_curves_csv(c, data);
    auto r = open_out(dir / (prefix + "_response.csv"));
    write_response_csv(r, data.y);
}

json to_json(const Truth& truth)
{
    json signs = json::array();
    for (Eigen::Index j = 0; j < truth.signs.rows(); ++j) {
        std::vector<int> row(static_cast<std::size_t>(truth.signs.cols()));
        for (Eigen::Index k = 0; k < truth.signs.cols(); ++k) row[static_cast<std::size_t>(k)] = truth.signs(j, k);
        signs.push_back(row);
    }
    return {{"scenario", truth.scenario}, {"rho", truth.rho},           {"signal_set", truth.signal_set},
            {"signs", signs},             {"nu", vec_json(truth.nu)},   {"basis_coef", mat_json(truth.basis_coef)},
            {"beta", mat_json(truth.beta)}};
}

Truth truth_from_json(const json& j)
{
    Truth t;
    try {
        t.scenario = j.value("scenario", std::string());
        t.rho = j.value("rho", 0.0);
        t.signal_set = j.at("signal_set").get<std::vector<std::size_t>>();
        t.beta = json_mat(j.at("beta"));
        if (j.contains("nu")) t.nu = json_vec(j.at("nu"));
        if (j.contains("basis_coef")) t.basis_coef = json_mat(j.at("basis_coef"));
        if (j.contains("signs")) {
            const auto& s = j.at("signs");
            t.signs.resize(static_cast<Eigen::Index>(s.size()), s.empty() ? 0 : static_cast<Eigen::Index>(s[0].size()));
            for (Eigen::Index r = 0; r < t.signs.rows(); ++r) {
                const auto row = s[static_cast<std::size_t>(r)].get<std::vector<int>>();
                for (Eigen::Index k = 0; k < t.signs.cols(); ++k) t.signs(r, k) = row.at(static_cast<std::size_t>(k));
            }
        }
    } catch (const json::exception& e) {
        throw data_error(std::string("truth: ") + e.what());
    }
    return t;
}

// ---- fits ------------------------------------------------------------------

FitArtifact make_artifact(const ReducedRankDesign& design, const CoefBlocks& c, const CenteringMeans& means,
                          const SqrtKernelOp& op, const HyperParams& hp, const std::string& kernel)
{
    if (c.size() != design.p()) throw data_error("coefficient block count does not match design");
    FitArtifact a;
    a.hp = hp;
    a.psi = design.psi();
    a.kernel = kernel;
    a.grid_points = design.grid().size();
    a.n = design.n();
    a.means = means;
    a.selected = selected_blocks(c);
    a.c = c;
    a.phi.resize(design.p());
    a.scale.resize(design.p());
    a.block_norms.resize(design.p());
    for (std::size_t j = 0; j < design.p(); ++j) {
        const auto& b = design.block(j);
        a.scale[j] = b.scale;
        a.block_norms[j] = c[j].size() > 0 ? c[j].norm() : 0.0;
        if (c[j].size() > 0 && (c[j].array() != 0.0).any()) a.phi[j] = b.phi.leftCols(c[j].size());
    }
    a.beta = beta_curves(surrogate_curves(design, c), std::span<const SqrtKernelOp>(&op, 1));
    return a;
}

FitArtifact make_artifact(const ReducedRankDesign& design, const FEnetFit& fit, const CenteringMeans& means,
                          const SqrtKernelOp& op, const HyperParams& hp, const std::string& kernel)
{
    FitArtifact a = make_artifact(design, fit.c, means, op, hp, kernel);
    a.objective_trace = fit.objective_trace;
    a.sweeps = fit.sweeps;
    a.converged = fit.converged;
    a.kkt_max_violation = fit.kkt.max_violation;
    return a;
}

Eigen::VectorXd predict(const FitArtifact& fit, const std::vector<Eigen::MatrixXd>& curves, const SqrtKernelOp& op)
{
    if (curves.size() != fit.c.size()) {
        throw data_error("data has " + std::to_string(curves.size()) + " predictors, fit has " +
                         std::to_string(fit.c.size()));
    }
    if (op.grid().size() != fit.grid_points) throw data_error("grid size does not match the fit");
    const Eigen::Index n = curves.empty() ? 0 : curves[0].rows();
    Eigen::VectorXd out = Eigen::VectorXd::Constant(n, fit.means.response_mean);
    const auto& w = op.grid().weights();
    for (std::size_t j = 0; j < curves.size(); ++j) {
        if (curves[j].rows() != n) throw data_error("predictors disagree on the sample count");
        if (curves[j].cols() != static_cast<Eigen::Index>(fit.grid_points)) {
            throw data_error("curve length does not match the grid");
        }
        if (fit.phi[j].size() == 0) continue;
        Eigen::MatrixXd X = curves[j];
        X.rowwise() -= fit.means.curve_means[j].transpose();
        const Eigen::MatrixXd Xt = apply_sqrt_rows(op, X);
        const Eigen::MatrixXd scores = ((Xt * w.asDiagonal()) * fit.phi[j]) * fit.scale[j];
        out.noalias() += scores * fit.c[j];
    }
    return out;
}

json to_json(const FitArtifact& fit)
{
    json blocks = json::array();
    for (std::size_t j = 0; j < fit.c.size(); ++j) {
        json b = {{"predictor", j}, {"norm", fit.block_norms[j]}, {"scale", fit.scale[j]}};
        if (fit.phi[j].size() > 0) {
            b["c"] = vec_json(fit.c[j]);
            b["phi"] = mat_json(fit.phi[j].transpose());
        }
        blocks.push_back(b);
    }
    json means = json::array();
    for (const auto& m : fit.means.curve_means) means.push_back(vec_json(m));
    json out = {{"kind", fit.kind},
                {"hyperparameters", to_json(fit.hp)},
                {"psi", to_string(fit.psi)},
                {"kernel", fit.kernel},
                {"grid_points", fit.grid_points},
                {"n", fit.n},
                {"response_mean", fit.means.response_mean},
                {"curve_means", means},
                {"selected", fit.selected},
                {"blocks", blocks},
                {"beta", mat_json(fit.beta)},
                {"objective_trace", fit.objective_trace},
                {"sweeps", fit.sweeps},
                {"converged", fit.converged},
                {"kkt_max_violation", fit.kkt_max_violation}};
    if (fit.kernel_matrix.size() > 0) out["kernel_matrix"] = mat_json(fit.kernel_matrix);
    return out;
}

FitArtifact fit_from_json(const json& j)
{
    FitArtifact a;
    try {
        a.kind = j.at("kind").get<std::string>();
        a.hp = hyperparams_from_json(j.at("hyperparameters"));
        a.psi = psi_kind_from_string(j.at("psi").get<std::string>());
        a.kernel = j.at("kernel").get<std::string>();
        if (j.contains("kernel_matrix")) a.kernel_matrix = json_mat(j.at("kernel_matrix"));
        a.grid_points = j.at("grid_points").get<std::size_t>();
        a.n = j.at("n").get<std::size_t>();
        a.means.response_mean = j.at("response_mean").get<double>();
        for (const auto& m : j.at("curve_means")) a.means.curve_means.push_back(json_vec(m));
        a.selected = j.at("selected").get<std::vector<std::size_t>>();
        const auto& blocks = j.at("blocks");
        const std::size_t p = blocks.size();
        a.c.resize(p);
        a.phi.resize(p);
        a.scale.resize(p);
        a.block_norms.resize(p);
        for (std::size_t k = 0; k < p; ++k) {
            const auto& b = blocks[k];
            const auto idx = b.at("predictor").get<std::size_t>();
            if (idx >= p) throw data_error("fit block index out of range");
            a.scale[idx] = b.at("scale").get<double>();
            a.block_norms[idx] = b.at("norm").get<double>();
            if (b.contains("c")) {
                a.c[idx] = json_vec(b.at("c"));
                a.phi[idx] = json_mat(b.at("phi")).transpose();
            }
        }
        a.beta = json_mat(j.at("beta"));
        if (static_cast<std::size_t>(a.beta.rows()) != p) throw data_error("fit file: beta rows do not match blocks");
        a.objective_trace = j.value("objective_trace", std::vector<double>{});
        a.sweeps = j.value("sweeps", std::size_t{0});
        a.converged = j.value("converged", true);
        a.kkt_max_violation = j.value("kkt_max_violation", 0.0);
    } catch (const json::exception& e) {
        throw data_error(std::string("fit file: ") + e.what());
    }
    if (a.means.curve_means.size() != a.c.size()) throw data_error("fit file: centering means do not cover all blocks");
    return a;
}

void write_beta_csv(std::ostream& out, const Grid& grid, const Eigen::MatrixXd& beta)
{
    out << "predictor,grid_index,t,value\n";
    for (Eigen::Index j = 0; j < beta.rows(); ++j) {
        for (Eigen::Index m = 0; m < beta.cols(); ++m) {
            out << j << ',' << m << ',' << format_double(grid.points()[m]) << ',' << format_double(beta(j, m)) << '\n';
        }
    }
}

void write_design_csv(const std::filesystem::path& dir, const ReducedRankDesign& design)
{
    auto phi = open_out(dir / "phi.csv");
    phi << "predictor,k,grid_index,value\n";
    auto gamma = open_out(dir / "gamma.csv");
    gamma << "sample,predictor,k,value\n";
    for (std::size_t j = 0; j < design.p(); ++j) {
        const auto& b = design.block(j);
        for (Eigen::Index k = 0; k < b.phi.cols(); ++k) {
            for (Eigen::Index m = 0; m < b.phi.rows(); ++m) {
                phi << j << ',' << k << ',' << m << ',' << format_double(b.phi(m, k)) << '\n';
            }
        }
    }
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(design.n()); ++i) {
        for (std::size_t j = 0; j < design.p(); ++j) {
            const auto& g = design.block(j).gamma;
            for (Eigen::Index k = 0; k < g.cols(); ++k) {
                gamma << i << ',' << j << ',' << k << ',' << format_double(g(i, k)) << '\n';
            }
        }
    }
}

// ---- reports ---------------------------------------------------------------

void write_roc_csv(std::ostream& out, const std::vector<RocPoint>& points)
{
    out << "lambda,fpr,tpr\n";
    for (const auto& pt : points) {
        out << format_double(pt.lambda) << ',' << format_double(pt.fpr) << ',' << format_double(pt.tpr) << '\n';
    }
}

json to_json(const ConditionReport& rep)
{
    return {{"kind", rep.kind},
            {"rho", rep.rho},
            {"q", rep.q},
            {"K", rep.K},
            {"lambda2", rep.lambda2},
            {"kappa_upper", rep.kappa_upper},
            {"kappa_lower", rep.kappa_lower},
            {"kappa_ceiling", rep.kappa_ceiling},
            {"aleph", rep.aleph},
            {"aleph_ceiling", rep.aleph_ceiling},
            {"c4_satisfied", rep.c4_satisfied},
            {"tau", rep.tau},
            {"tail_bound", rep.tail_bound}};
}

void write_replicates_csv(std::ostream& out, const std::vector<ReplicateResult>& reps)
{
    out << "replicate,seed,lambda,alpha,s,theta,lambda3,selected,fpr,fnr,mnd,rer,rer_refined,re,mnd_refined,"
           "mspe,mspe_refined,rer_mc,rer_mc_se,converged,cells,cells_failed,cells_nonconverged\n";
    const auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
    for (const auto& r : reps) {
        out << r.index << ',' << r.seed << ',' << format_double(r.hp.lambda) << ',' << format_double(r.hp.alpha)
            << ',' << r.hp.s << ',' << format_double(r.hp.theta) << ',' << format_double(r.hp.lambda3) << ','
            << r.selected_count << ',' << format_double(r.fpr) << ',' << format_double(r.fnr) << ','
            << format_double(r.mnd) << ',' << format_double(r.rer) << ',' << format_double(r.rer_refined) << ','
            << format_double(r.re) << ',' << format_double(r.mnd_refined) << ',' << format_double(r.mspe) << ','
            << format_double(r.mspe_refined) << ',' << opt(r.rer_mc) << ',' << opt(r.rer_mc_se) << ','
            << (r.converged ? 1 : 0) << ',' << r.cells << ',' << r.cells_failed << ',' << r.cells_nonconverged
            << '\n';
    }
}

void write_summary_csv(std::ostream& out, const std::vector<MetricSummary>& summaries)
{
    out << "metric,median,q025,q975,mean\n";
    for (const auto& m : summaries) {
        out << m.name << ',' << format_double(m.summary.median) << ',' << format_double(m.summary.lo) << ','
            << format_double(m.summary.hi) << ',' << format_double(m.summary.mean) << '\n';
    }
}

json summary_json(const ExperimentResult& res)
{
    json metrics = json::object();
    for (const auto& m : res.summaries) {
        metrics[m.name] = {{"median", m.summary.median},
                           {"q025", m.summary.lo},
                           {"q975", m.summary.hi},
                           {"mean", m.summary.mean}};
    }
    return {{"replicates", res.replicates.size()},
            {"nonconverged_fraction", res.nonconverged_fraction},
            {"failed", res.failed},
            {"metrics", metrics}};
}

json read_json_file(const std::filesystem::path& path)
{
    auto in = open_in(path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw data_error(path.string() + ": " + e.what());
    }
}

void write_json_file(const std::filesystem::path& path, const json& j)
{
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

void write_text_file(const std::filesystem::path& path, const std::string& text)
{
    auto out = open_out(path);
    out << text;
}

} // namespace fenet
