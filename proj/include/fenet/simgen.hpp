#pragma once

#include <fenet/design.hpp>

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <string>

namespace fenet {

enum class scenario { I = 1, II = 2, III = 3 };

std::string to_string(scenario sc);
scenario scenario_from_string(std::string_view name);

/**
 * Simulation setting.
 *
 * Predictors are X_ij(t) = sqrt(2) sum_{k<=k_max} z_ijk sqrt(nu_k) cos(k pi t) with
 * z_{i.k} ~ N(0, Sigma_p), Sigma_p[j,l] = rho^|j-l|. Signals j < q carry
 * beta_j = 4 sum_k (-1)^{u_jk} r_k phi_k with phi_k the scenario basis.
 *
 *   I:   phi_k = sqrt2 cos(k pi t), nu_k = r_k = exp(-k/4)
 *   II:  phi_k = sqrt2 sin(k pi t), nu_k = r_k = exp(-k/4)
 *   III: phi_k = sqrt2 cos(k pi t), r_k = k^-2, nu_k = (|k - k0| + 1)^-2
 */
struct ScenarioConfig
{
    scenario kind = scenario::I;
    std::size_t n = 200;
    std::size_t p = 100;
    std::size_t q = 5;
    double rho = 0.0;
    double sigma = 0.5;
    std::size_t k_max = 100;
    std::size_t k0 = 10;
    std::size_t test_n = 100;
    std::uint64_t seed = 1;

    void validate() const;
};

/// Lower-triangular Cholesky factor of the AR(1) correlation matrix.
Eigen::MatrixXd ar1_chol(std::size_t p, double rho);
Eigen::MatrixXd ar1_corr(std::size_t p, double rho);

Eigen::VectorXd scenario_nu(const ScenarioConfig& cfg);
Eigen::VectorXd scenario_r(const ScenarioConfig& cfg);

/// G(k-1, l-1) = <sqrt2 cos(k pi .), sqrt2 sin(l pi .)> for k, l = 1..K, evaluated
/// in closed form: 2 (1/(pi(k+l)) + 1/(pi(l-k))) when k+l is odd, else 0.
Eigen::MatrixXd cos_sin_gram(std::size_t K);

struct SimulatedData
{
    Dataset train;
    Dataset test;
    std::shared_ptr<const Truth> truth;
};

/**
 * Draws one replicate. Random streams: the generator is std::mt19937_64 seeded
 * through std::seed_seq from (seed, stream id) with stream 0 for the sign
 * draws u_jk, 1 for training data and 2 for test data, so changing test_n
 * never perturbs the training sample. Responses are computed from the series
 * coefficients, not by quadrature.
 */
SimulatedData generate(const ScenarioConfig& cfg, grid_ptr grid);

/// Extra sample from the same truth on its own random stream (3 and up are free).
Dataset sample_dataset(const ScenarioConfig& cfg, grid_ptr grid, std::shared_ptr<const Truth> truth,
                       std::size_t count, std::uint32_t stream);

/// Per-replicate seed derived from a master seed (splitmix64 of master and index).
std::uint64_t replicate_seed(std::uint64_t master, std::uint64_t replicate);

inline constexpr const char* rng_algorithm_id = "std::mt19937_64+std::seed_seq(seed_lo,seed_hi,stream);"
                                                "std::normal_distribution;std::bernoulli_distribution(0.5);"
                                                "replicate_seed=splitmix64";

} // namespace fenet
