#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "migsm/fiscal_goods.hpp"
#include "migsm/labor_market.hpp"
#include "migsm/types.hpp"

// The 17-equation steady-state system and its solvers: a damped Newton
// iteration on all 17 unknowns (primary) and a nested fixed-point scheme
// (outer root-find on the two tightnesses, inner closed forms) that doubles
// as an independent verification oracle.

namespace migsm {

// gamma is estimated; the preference block used in a solve carries it.
inline PreferenceConfig effective_prefs(const PreferenceConfig& prefs,
                                        const EstimatedParameters& est) {
    PreferenceConfig p = prefs;
    p.gamma = est.gamma;
    return p;
}

inline FiscalConfig make_fiscal(const CalibratedParameters& calib,
                                const EstimatedParameters& est, double g_h, double g_l) {
    return FiscalConfig{est.t, calib.t_p, calib.b, calib.tau_tilde, g_h, g_l};
}

// Ordered unknowns: e_hN,e_lN,e_hI,e_lI, u_hN,u_lN,u_hI,u_lI,
// w_hN,w_lN,w_hI,w_lI, theta_h,theta_l, p_h,p_l, nu.
struct UnknownVector {
    static constexpr int n = 17;
    std::array<double, n> v{};

    double& e(int k) { return v[k]; }
    double& u(int k) { return v[4 + k]; }
    double& w(int k) { return v[8 + k]; }
    double& theta_h() { return v[12]; }
    double& theta_l() { return v[13]; }
    double& p_h() { return v[14]; }
    double& p_l() { return v[15]; }
    double& nu() { return v[16]; }
    double e(int k) const { return v[k]; }
    double u(int k) const { return v[4 + k]; }
    double w(int k) const { return v[8 + k]; }
    double theta_h() const { return v[12]; }
    double theta_l() const { return v[13]; }
    double p_h() const { return v[14]; }
    double p_l() const { return v[15]; }
    double nu() const { return v[16]; }

    static const std::array<std::string, n>& names();

    EquilibriumState to_state(const CalibratedParameters& calib) const;
};

struct SolverConfig {
    enum class Strategy { newton, fixed_point, hybrid };

    double tolerance = 1e-10; // inf-norm of the scaled residuals
    int max_iterations = 200;
    double fd_step = 1e-6; // relative central-difference step
    Strategy strategy = Strategy::hybrid;
    int multi_start = 1;     // >1 adds randomized starts to detect multiplicity
    std::uint64_t seed = 0;

    // Balanced-budget closure: adjust g_h = g_l so DT + IT = TGE at the
    // solved equilibrium. When off, g_h/g_l below are used as given and the
    // budget identity is the user's responsibility.
    bool balance_budget = true;
    double g_h = 0.3, g_l = 0.3; // initial guess (closure on) or fixed shares (off)
    double closure_tol = 1e-14;
    int closure_max_iterations = 80;

    double theta_min = 1e-9, theta_max = 1e9; // clamp for theta inside the solvers
};

struct SolveDiagnostics {
    double residual_norm = 0.0;
    int iterations = 0;
    std::string path; // which strategy produced the accepted solution
    bool boundary_hit = false;
    int closure_iterations = 0;
    bool multiple_equilibria = false;
    std::vector<std::array<double, UnknownVector::n>> alternates;
};

struct EquilibriumSolution {
    UnknownVector y;
    double pi_hN = 1.0, pi_lN = 1.0;
    ValueSet values;
    GovernmentAccounts accounts;
    FiscalConfig fiscal; // g_h/g_l as actually used (post closure)
    CalibratedParameters calib;
    EstimatedParameters est;
    PreferenceConfig prefs; // gamma already replaced by the estimated value
    SolveDiagnostics diag;

    EquilibriumState state() const { return y.to_state(calib); }
};

// Every solution is re-verified from scratch with these identity residuals,
// independent of how it was found.
struct VerificationReport {
    double residual_inf = 0.0;      // 17-equation system, scaled
    double flow_balance_max = 0.0;  // max over classes of |e/u - ktq/delta| rel
    double free_entry_max = 0.0;    // max |V_i| / (c * p x_i)
    double budget_gap_rel = 0.0;    // |DT + IT - TGE| / max(TGE, 1)
    double clearing_h = 0.0, clearing_l = 0.0; // relative goods residuals
    double normalization = 0.0;     // real-price identity residual
    double pass_tolerance = 1e-8;
    bool ok() const;
};

// Scaled residuals (LHS - RHS)/max(|RHS|,1) of the 17 equations at the
// given point; the native unemployment shares are recomputed from the
// current u entries. Non-finite components are mapped to 1e6.
std::array<double, UnknownVector::n> residual_vector(const UnknownVector& y,
                                                     const CalibratedParameters& calib,
                                                     const EstimatedParameters& est,
                                                     const PreferenceConfig& prefs,
                                                     const FiscalConfig& fiscal);

EquilibriumSolution solve_equilibrium(const CalibratedParameters& calib,
                                      const EstimatedParameters& est,
                                      const PreferenceConfig& prefs,
                                      const SolverConfig& config = {});

VerificationReport verify_solution(const EquilibriumSolution& sol);

// Lifetime values at a state (workers per class, employers per market and
// hire origin), from the closed forms in labor_market.hpp.
ValueSet compute_values(const EquilibriumState& s, const CalibratedParameters& calib,
                        const EstimatedParameters& est, const PreferenceConfig& prefs,
                        const FiscalConfig& fiscal);

} // namespace migsm
