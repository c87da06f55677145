#include <fenet/simgen.hpp>
#include <fenet/error.hpp>

#include <Eigen/Cholesky>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace fenet {

std::string to_string(scenario sc)
{
    switch (sc) {
        case scenario::I: return "I";
        case scenario::II: return "II";
        case scenario::III: return "III";
    }
    return "?";
}

scenario scenario_from_string(std::string_view name)
{
    if (name == "I" || name == "1") return scenario::I;
    if (name == "II" || name == "2") return scenario::II;
    if (name == "III" || name == "3") return scenario::III;
    throw config_error("unknown scenario '" + std::string(name) + "'");
}

void ScenarioConfig::validate() const
{
    if (n < 2) throw config_error("scenario needs n >= 2");
    if (p < 1) throw config_error("scenario needs p >= 1");
    if (q > p) throw config_error("q must not exceed p");
    if (!(rho >= 0.0 && rho < 1.0)) throw config_error("rho must lie in [0,1)");
    if (!(sigma >= 0.0)) throw config_error("sigma must be >= 0");
    if (k_max < 1) throw config_error("k_max must be >= 1");
    if (kind == scenario::III && k_max < k0 + 5) throw config_error("scenario III needs k_max >= k0 + 5");
}

Eigen::MatrixXd ar1_corr(std::size_t p, double rho)
{
    const auto P = static_cast<Eigen::Index>(p);
    Eigen::MatrixXd S(P, P);
    for (Eigen::Index j = 0; j < P; ++j) {
        for (Eigen::Index k = 0; k < P; ++k) S(j, k) = std::pow(rho, static_cast<double>(std::abs(j - k)));
    }
    return S;
}

Eigen::MatrixXd ar1_chol(std::size_t p, double rho)
{
    if (!(rho >= 0.0 && rho < 1.0)) throw config_error("rho must lie in [0,1)");
    Eigen::LLT<Eigen::MatrixXd> llt(ar1_corr(p, rho));
    if (llt.info() != Eigen::Success) throw numerical_error("AR(1) correlation is not positive definite");
    return llt.matrixL();
}

Eigen::VectorXd scenario_nu(const ScenarioConfig& cfg)
{
    const auto K = static_cast<Eigen::Index>(cfg.k_max);
    Eigen::VectorXd nu(K);
    for (Eigen::Index i = 0; i < K; ++i) {
        const double k = static_cast<double>(i + 1);
        if (cfg.kind == scenario::III) {
            const double gap = std::abs(k - static_cast<double>(cfg.k0)) + 1.0;
            nu[i] = 1.0 / (gap * gap);
        } else {
            nu[i] = std::exp(-k / 4.0);
        }
    }
    return nu;
}

Eigen::VectorXd scenario_r(const ScenarioConfig& cfg)
{
    const auto K = static_cast<Eigen::Index>(cfg.k_max);
    Eigen::VectorXd r(K);
    for (Eigen::Index i = 0; i < K; ++i) {
        const double k = static_cast<double>(i + 1);
        r[i] = cfg.kind == scenario::III ? 1.0 / (k * k) : std::exp(-k / 4.0);
    }
    return r;
}

Eigen::MatrixXd cos_sin_gram(std::size_t K)
{
    const auto KK = static_cast<Eigen::Index>(K);
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(KK, KK);
    const double pi = std::numbers::pi;
    for (Eigen::Index a = 0; a < KK; ++a) {
        for (Eigen::Index b = 0; b < KK; ++b) {
            const auto k = a + 1;
            const auto l = b + 1;
            if ((k + l) % 2 == 1) {
                G(a, b) = 2.0 * (1.0 / (pi * static_cast<double>(k + l)) +
                                 1.0 / (pi * static_cast<double>(l - k)));
            }
        }
    }
    return G;
}

std::uint64_t replicate_seed(std::uint64_t master, std::uint64_t replicate)
{
    std::uint64_t x = master + 0x9E3779B97F4A7C15ULL * (replicate + 1);
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

namespace {

std::mt19937_64 make_stream(std::uint64_t seed, std::uint32_t stream)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffULL),
                      static_cast<std::uint32_t>(seed >> 32), stream};
    return std::mt19937_64(seq);
}

// Values of sqrt2 cos(k pi t) (or sin) for k = 1..K on the grid, K x T.
Eigen::MatrixXd basis_values(const Grid& grid, std::size_t K, bool sine)
{
    const auto T = static_cast<Eigen::Index>(grid.size());
    Eigen::MatrixXd B(static_cast<Eigen::Index>(K), T);
    const double pi = std::numbers::pi;
    for (Eigen::Index a = 0; a < B.rows(); ++a) {
        const double k = static_cast<double>(a + 1);
        for (Eigen::Index m = 0; m < T; ++m) {
            const double x = k * pi * grid.points()[m];
            B(a, m) = std::sqrt(2.0) * (sine ? std::sin(x) : std::cos(x));
        }
    }
    return B;
}

Dataset sample(const ScenarioConfig& cfg, const grid_ptr& grid, const Eigen::MatrixXd& cos_basis,
               const Eigen::VectorXd& nu, const Truth& truth, std::size_t count, std::uint32_t stream)
{
    if (count < 1) throw config_error("sample size must be >= 1");
    const auto n = static_cast<Eigen::Index>(count);
    const auto p = static_cast<Eigen::Index>(cfg.p);
    const auto K = static_cast<Eigen::Index>(cfg.k_max);
    const double rho = cfg.rho;
    const double innov = std::sqrt(1.0 - rho * rho);

    auto gen = make_stream(cfg.seed, stream);
    std::normal_distribution<double> normal(0.0, 1.0);

    // Scores scaled by sqrt(nu_k): zs[j](i, k) = z_ijk sqrt(nu_k).
    std::vector<Eigen::MatrixXd> zs(static_cast<std::size_t>(p), Eigen::MatrixXd(n, K));
    Eigen::VectorXd noise(n);
    const Eigen::VectorXd sqrt_nu = nu.cwiseSqrt();
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < K; ++k) {
            // z = L w for the AR(1) Cholesky factor L, via its two-term recursion.
            double z = 0.0;
            for (Eigen::Index j = 0; j < p; ++j) {
                const double w = normal(gen);
                z = j == 0 ? w : rho * z + innov * w;
                zs[static_cast<std::size_t>(j)](i, k) = z * sqrt_nu[k];
            }
        }
        noise[i] = normal(gen);
    }

    Dataset out;
    out.grid = grid;
    out.curves.resize(static_cast<std::size_t>(p));
    out.signal = Eigen::VectorXd::Zero(n);
    for (Eigen::Index j = 0; j < p; ++j) {
        const auto& Z = zs[static_cast<std::size_t>(j)];
        out.curves[static_cast<std::size_t>(j)] = Z * cos_basis;
        const auto coef = truth.basis_coef.row(j);
        if ((coef.array() != 0.0).any()) out.signal.noalias() += Z * coef.transpose();
    }
    out.y = out.signal + cfg.sigma * noise;
    out.noise_sd = cfg.sigma;
    return out;
}

} // namespace

SimulatedData generate(const ScenarioConfig& cfg, grid_ptr grid)
{
    cfg.validate();
    const auto K = static_cast<Eigen::Index>(cfg.k_max);
    const auto p = static_cast<Eigen::Index>(cfg.p);
    const auto q = static_cast<Eigen::Index>(cfg.q);
    const bool sine = cfg.kind == scenario::II;

    auto truth = std::make_shared<Truth>();
    truth->scenario = to_string(cfg.kind);
    truth->rho = cfg.rho;
    truth->nu = scenario_nu(cfg);
    const Eigen::VectorXd r = scenario_r(cfg);
    for (Eigen::Index j = 0; j < q; ++j) truth->signal_set.push_back(static_cast<std::size_t>(j));

    auto gen = make_stream(cfg.seed, 0);
    std::bernoulli_distribution coin(0.5);
    truth->signs.resize(q, K);
    for (Eigen::Index j = 0; j < q; ++j) {
        for (Eigen::Index k = 0; k < K; ++k) truth->signs(j, k) = coin(gen) ? 1 : 0;
    }

    // Coefficients of beta_j on its own basis phi_k, then on sqrt2 cos(k pi t).
    Eigen::MatrixXd own = Eigen::MatrixXd::Zero(p, K);
    for (Eigen::Index j = 0; j < q; ++j) {
        for (Eigen::Index k = 0; k < K; ++k) own(j, k) = 4.0 * (truth->signs(j, k) ? -1.0 : 1.0) * r[k];
    }
    truth->basis_coef = sine ? Eigen::MatrixXd(own * cos_sin_gram(cfg.k_max).transpose()) : own;

    const Eigen::MatrixXd cos_basis = basis_values(*grid, cfg.k_max, false);
    truth->beta = own * (sine ? basis_values(*grid, cfg.k_max, true) : cos_basis);

    SimulatedData out;
    out.truth = truth;
    out.train = sample(cfg, grid, cos_basis, truth->nu, *truth, cfg.n, 1);
    out.train.truth = truth;
    if (cfg.test_n > 0) {
        out.test = sample(cfg, grid, cos_basis, truth->nu, *truth, cfg.test_n, 2);
        out.test.truth = truth;
    }
    return out;
}

Dataset sample_dataset(const ScenarioConfig& cfg, grid_ptr grid, std::shared_ptr<const Truth> truth,
                       std::size_t count, std::uint32_t stream)
{
    cfg.validate();
    if (!truth || !truth->has_generator()) throw config_error("sampling needs generator metadata");
    if (static_cast<std::size_t>(truth->basis_coef.rows()) != cfg.p ||
        static_cast<std::size_t>(truth->basis_coef.cols()) != cfg.k_max) {
        throw config_error("truth does not match the scenario dimensions");
    }
    Dataset out = sample(cfg, grid, basis_values(*grid, cfg.k_max, false), truth->nu, *truth, count, stream);
    out.truth = std::move(truth);
    return out;
}

} // namespace fenet
