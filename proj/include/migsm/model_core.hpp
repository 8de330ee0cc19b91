#pragma once

#include <cmath>
#include <utility>

#include "migsm/errors.hpp"
#include "migsm/types.hpp"

// Preference and technology primitives: CES utility, the aggregate price
// index, the demand system, matching rates, and indirect utility.

namespace migsm {

inline double elasticity_of_substitution(double rho) {
    if (!(rho < 1.0)) throw validation_error("rho", "must be < 1");
    return 1.0 / (1.0 - rho);
}

// Aggregate price index over the two goods. For |rho| < 1e-8 this is the
// Cobb-Douglas closed form p_h^g p_l^(1-g) / (g^g (1-g)^(1-g)); otherwise
// the CES dual P = [g^(1/(1-r)) p_h^(r/(r-1)) + (1-g)^(1/(1-r)) p_l^(r/(r-1))]^((r-1)/r).
inline double price_index(double p_h, double p_l, const PreferenceConfig& prefs) {
    prefs.validate();
    if (!(p_h > 0.0)) throw validation_error("p_h", "must be > 0");
    if (!(p_l > 0.0)) throw validation_error("p_l", "must be > 0");
    const double g = prefs.gamma, rho = prefs.rho;
    if (prefs.cobb_douglas())
        return std::pow(p_h, g) * std::pow(p_l, 1.0 - g) /
               (std::pow(g, g) * std::pow(1.0 - g, 1.0 - g));
    const double s = rho / (rho - 1.0); // exponent on prices
    const double base = std::pow(g, 1.0 / (1.0 - rho)) * std::pow(p_h, s) +
                        std::pow(1.0 - g, 1.0 / (1.0 - rho)) * std::pow(p_l, s);
    return std::pow(base, (rho - 1.0) / rho);
}

struct DemandResult {
    double d_h = 0.0, d_l = 0.0;       // quantities
    double share_h = 0.0, share_l = 0.0; // expenditure shares, sum to 1 for y > 0
};

// Marshallian demands at real prices. The budget is exhausted exactly for
// any positive price pair; at prices satisfying the real-price
// normalization the spending normalizer equals 1, reproducing the model's
// demand equations verbatim.
inline DemandResult demand(double y, const RealPrices& prices, const PreferenceConfig& prefs) {
    prefs.validate();
    prices.validate();
    if (y < 0.0) throw validation_error("y", "must be >= 0");
    DemandResult out;
    if (y == 0.0) return out;
    const double g = prefs.gamma;
    if (prefs.cobb_douglas()) {
        out.d_h = g * y / prices.p_h;
        out.d_l = (1.0 - g) * y / prices.p_l;
    } else {
        const double e = 1.0 / (prefs.rho - 1.0);
        const double q_h = std::pow(prices.p_h / g, e);
        const double q_l = std::pow(prices.p_l / (1.0 - g), e);
        const double norm = prices.p_h * q_h + prices.p_l * q_l;
        out.d_h = q_h * y / norm;
        out.d_l = q_l * y / norm;
    }
    out.share_h = prices.p_h * out.d_h / y;
    out.share_l = prices.p_l * out.d_l / y;
    return out;
}

// Residual of the real-price normalization identity
//   p_h (p_h/g)^(1/(r-1)) + p_l (p_l/(1-g))^(1/(r-1)) - 1.
// Holds at every equilibrium price pair; identically zero for rho = 0.
inline double normalization_residual(double p_h, double p_l, const PreferenceConfig& prefs) {
    const double g = prefs.gamma;
    if (prefs.cobb_douglas()) return g + (1.0 - g) - 1.0;
    const double e = 1.0 / (prefs.rho - 1.0);
    return p_h * std::pow(p_h / g, e) + p_l * std::pow(p_l / (1.0 - g), e) - 1.0;
}

// Meeting rates of the Cobb-Douglas matching technology. Both are Poisson
// rates, legally above 1; theta itself must be positive (solvers clamp it
// to [1e-9, 1e9] before calling, see equilibrium.hpp).
inline std::pair<double, double> matching_rates(double theta, double alpha) {
    MatchingConfig{alpha}.validate();
    if (!(theta > 0.0)) throw validation_error("theta", "must be > 0");
    return {std::pow(theta, -alpha), std::pow(theta, 1.0 - alpha)};
}

// Per-period indirect utility: real income plus the public-good term.
inline double indirect_utility(double y, double P, double iota, double nu) {
    if (!(P > 0.0)) throw validation_error("P", "must be > 0");
    return y / P + iota * nu;
}

} // namespace migsm
