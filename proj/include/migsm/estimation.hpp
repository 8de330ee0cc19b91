#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "migsm/equilibrium.hpp"
#include "migsm/types.hpp"

namespace migsm {

// The 17 targets matched in estimation: net real wages, monthly job-finding
// rates, unemployment rates (all four classes), labour-income share of
// value added, real GDP, real GDP per worker, and the native shares of
// unemployment by market.
struct MomentVector {
    static constexpr int n = 17;
    std::array<double, n> m{};

    double& operator[](int i) { return m[i]; }
    const double& operator[](int i) const { return m[i]; }

    static const std::array<std::string, n>& names();

    // Index helpers mirroring the class order hN, lN, hI, lI.
    double& net_wage(int k) { return m[k]; }
    double& job_finding(int k) { return m[4 + k]; }
    double& unemployment_rate(int k) { return m[8 + k]; }
    double& labour_share() { return m[12]; }
    double& gdp() { return m[13]; }
    double& gdp_per_worker() { return m[14]; }
    double& pi_hN() { return m[15]; }
    double& pi_lN() { return m[16]; }
    const double& net_wage(int k) const { return m[k]; }
    const double& job_finding(int k) const { return m[4 + k]; }
    const double& unemployment_rate(int k) const { return m[8 + k]; }
    const double& labour_share() const { return m[12]; }
    const double& gdp() const { return m[13]; }
    const double& gdp_per_worker() const { return m[14]; }
    const double& pi_hN() const { return m[15]; }
    const double& pi_lN() const { return m[16]; }

    void validate() const;
};

struct EstimationConfig {
    // Row-major 17x17 weighting matrix; empty means identity. Must be
    // symmetric positive-definite when supplied.
    std::vector<double> W;

    int multi_start = 16;
    std::uint64_t seed = 0;

    // Simplex stage budgets (per start).
    int simplex_max_iterations = 500;
    double simplex_tolerance = 1e-12;

    // Derivative-based polish of the best simplex point.
    bool polish = true;
    int polish_max_iterations = 80;
    double polish_tolerance = 1e-15;

    // Optional one-dimensional coordinate refinement pass.
    bool coordinate_pass = false;
    int coordinate_iterations = 2;

    // Box bounds in parameter order beta, gamma, x_h, x_l, t, kappa (4),
    // W_FC_h, W_FC_l.
    std::array<double, EstimatedParameters::n_params> lower = {
        0.05, 0.2, 0.5, 0.5, 0.3, 1e-3, 1e-3, 1e-3, 1e-3, 1.0, 1.0};
    std::array<double, EstimatedParameters::n_params> upper = {
        0.30, 0.5, 15.0, 15.0, 0.7, 1.0, 1.0, 1.0, 1.0, 500.0, 500.0};

    bool concurrent_starts = true;

    SolverConfig solver;

    void validate() const;
};

struct StartOutcome {
    std::array<double, EstimatedParameters::n_params> omega{};
    double objective = 0.0;
    int evaluations = 0;
    bool penalized = false; // best point never produced a solvable economy
};

struct EstimateResult {
    static constexpr int n_params = EstimatedParameters::n_params;

    EstimatedParameters omega_hat;
    double objective = 0.0;
    MomentVector fitted;
    std::array<double, MomentVector::n> moment_rel_errors{};
    std::vector<StartOutcome> starts;
    int evaluations = 0;

    std::array<bool, n_params> at_lower{}, at_upper{};
    bool boundary_flagged = false;

    // Spectrum of the scaled finite-difference moment Jacobian at the
    // optimum; a near-zero trailing singular value with its right singular
    // vector exposes locally unidentified parameter combinations.
    std::array<double, n_params> jacobian_singular_values{};
    std::array<double, n_params> null_direction{};
};

// Observation mapping applied to an already-solved economy.
MomentVector moments_from_solution(const EquilibriumSolution& sol);

// Moments implied by the model at the given parameters: solves the
// equilibrium and applies the observation mapping. Net wages apply the
// fiscal wedge (1-t)(w+tau) to the bargained gross wage.
MomentVector simulated_moments(const CalibratedParameters& calibrated,
                               const EstimatedParameters& estimated,
                               const PreferenceConfig& prefs,
                               const SolverConfig& solver = {});

// Quadratic moment-gap form (M - M_s)' W (M - M_s). Economies that fail to
// solve are mapped to a large finite penalty; `penalized`, when supplied,
// reports that this happened instead of throwing.
double msm_objective(const EstimatedParameters& omega, const MomentVector& target,
                     const std::vector<double>& W,
                     const CalibratedParameters& calibrated,
                     const PreferenceConfig& prefs, const SolverConfig& solver = {},
                     bool* penalized = nullptr);

// Multi-start simplex minimization of the moment-gap objective inside the
// configured box, optionally followed by a damped Gauss-Newton polish and a
// coordinate refinement pass. Deterministic for a fixed seed.
EstimateResult estimate(const MomentVector& target,
                        const CalibratedParameters& calibrated,
                        const PreferenceConfig& prefs,
                        const EstimationConfig& config = {});

} // namespace migsm
