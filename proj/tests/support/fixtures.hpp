#pragma once

// Shared fixture economy, frozen reference values, and random-economy
// draws used across the test binaries.

#include <array>
#include <cmath>
#include <cstdlib>
#include <string>

#include "migsm/equilibrium.hpp"
#include "migsm/estimation.hpp"
#include "migsm/rng.hpp"

namespace fixtures {

inline migsm::CalibratedParameters demo_calib() {
    migsm::CalibratedParameters c;
    c.r = 0.01;
    c.alpha = 0.4;
    c.b = 0.65;
    c.t_p = 0.15;
    c.tau_tilde = 0.17;
    c.F = 1.5;
    c.c = 5.0;
    c.phi = 0.5;
    c.eta = 0.007;
    c.lambda = 0.009;
    c.delta = {0.005, 0.009, 0.008, 0.015};
    c.sigma = {6.0, 15.0, 0.35, 3.4};
    c.chi = 5.0;
    c.IP = 31.0;
    c.ssc_wedge = 0.25;
    return c;
}

inline migsm::EstimatedParameters demo_est() {
    migsm::EstimatedParameters e;
    e.beta = 0.13;
    e.gamma = 0.335;
    e.x_h = 7.5;
    e.x_l = 4.2;
    e.t = 0.505;
    e.kappa = {0.55, 0.50, 0.45, 0.60};
    e.W_FC_h = 164.0;
    e.W_FC_l = 86.0;
    return e;
}

inline migsm::PreferenceConfig demo_prefs() { return {}; } // Cobb-Douglas, iota = zeta = 1

// Moments of the demo economy under the balanced-budget closure, frozen
// from an independent implementation of the full system (g* below).
inline constexpr double demo_g_star = 0.53289684313689178;
inline constexpr std::array<double, 17> demo_moments = {
    1.5651127112761098,   1.1230575907534961,   1.4186600810699677,
    0.91360877026066212,  0.10404119411862839,  0.10305607897752049,
    0.085124613369786856, 0.12366729477302459,  0.045854230049612144,
    0.080316927757265941, 0.085906396928950926, 0.10817258694310375,
    0.85663876399565664,  70.479019139307752,   3.1365525325575283,
    0.91040231010921358,  0.78864002836368707};

inline double rel_diff(double a, double b) {
    return std::abs(a - b) / std::max(1.0, std::abs(b));
}

// Random economy in ranges centered on the demo fixture. Roughly half the
// draws use the Cobb-Douglas branch, the rest a CES curvature.
struct RandomEconomy {
    migsm::CalibratedParameters calib;
    migsm::EstimatedParameters est;
    migsm::PreferenceConfig prefs;
};

inline RandomEconomy draw_economy(std::mt19937_64& rng) {
    RandomEconomy d;
    auto U = [&](double lo, double hi) { return migsm::uniform(rng, lo, hi); };

    d.calib.r = U(0.008, 0.012);
    d.calib.alpha = U(0.3, 0.5);
    d.calib.b = U(0.4, 0.7);
    d.calib.t_p = U(0.1, 0.2);
    d.calib.tau_tilde = U(0.05, 0.3);
    d.calib.F = U(0.5, 3.0);
    d.calib.c = U(2.0, 8.0);
    d.calib.phi = U(0.3, 0.7);
    d.calib.eta = U(0.004, 0.012);
    d.calib.lambda = U(0.004, 0.015);
    for (int k = 0; k < 4; ++k) d.calib.delta[k] = U(0.004, 0.02);
    d.calib.sigma = {U(3.0, 9.0), U(8.0, 20.0), U(0.2, 1.5), U(1.5, 5.0)};
    d.calib.chi = U(2.0, 8.0);
    d.calib.IP = U(20.0, 40.0);

    d.est.beta = U(0.08, 0.25);
    d.est.gamma = U(0.25, 0.45);
    d.est.x_h = U(4.0, 10.0);
    d.est.x_l = U(2.5, 7.0);
    d.est.t = U(0.4, 0.6);
    for (int k = 0; k < 4; ++k) d.est.kappa[k] = U(0.3, 0.9);
    d.est.W_FC_h = U(80.0, 250.0);
    d.est.W_FC_l = U(40.0, 130.0);

    d.prefs.rho = migsm::u01(rng) < 0.5 ? 0.0 : U(-0.5, 0.5);
    d.prefs.iota = U(0.5, 1.5);
    d.prefs.zeta = U(0.5, 1.5);
    return d;
}

// Draws until the economy solves; returns the draw and its solution.
inline RandomEconomy draw_solvable(std::mt19937_64& rng, migsm::EquilibriumSolution& sol,
                                   const migsm::SolverConfig& config = {},
                                   int max_attempts = 50) {
    for (int a = 0; a < max_attempts; ++a) {
        RandomEconomy d = draw_economy(rng);
        try {
            sol = migsm::solve_equilibrium(d.calib, d.est, d.prefs, config);
            return d;
        } catch (const migsm::error&) {
            continue;
        }
    }
    throw migsm::error("no solvable random economy found in the attempt budget");
}

inline std::string data_dir() {
    const char* v = std::getenv("MIGSM_DATA_DIR");
    return v ? v : "data";
}

inline std::string cli_path() {
    const char* v = std::getenv("MIGSM_CLI");
    return v ? v : "";
}

} // namespace fixtures
