#pragma once

#include <cmath>
#include <utility>

#include "migsm/errors.hpp"
#include "migsm/model_core.hpp"
#include "migsm/types.hpp"

// Goods-market equilibrium prices, public-good provision, and the
// government accounts with the balanced-budget identity.

namespace migsm {

// Equilibrium real prices from relative effective supplies. Both formulas
// depend on supplies only through R = ((1-g_l) x_l e_l) / ((1-g_h) x_h e_h)
// and jointly satisfy the real-price normalization identity.
inline RealPrices equilibrium_prices(double x_h, double x_l, double e_h_total,
                                     double e_l_total, const PreferenceConfig& prefs,
                                     double g_h, double g_l) {
    prefs.validate();
    if (!(x_h * e_h_total > 0.0))
        throw validation_error("e_h_total", "zero production of the high-skilled good");
    if (!(x_l * e_l_total > 0.0))
        throw validation_error("e_l_total", "zero production of the low-skilled good");
    const double R = ((1.0 - g_l) * x_l * e_l_total) / ((1.0 - g_h) * x_h * e_h_total);
    const double g = prefs.gamma, rho = prefs.rho;
    RealPrices p;
    if (prefs.cobb_douglas()) {
        p.p_h = g * std::pow(R, 1.0 - g);
        p.p_l = (1.0 - g) * std::pow(R, -g);
        return p;
    }
    const double e = 1.0 / (1.0 - rho);
    p.p_h = std::pow(std::pow(g, e) + (1.0 - g) * std::pow(g, rho * e) * std::pow(R, rho),
                     (1.0 - rho) / rho);
    p.p_l = std::pow(std::pow(1.0 - g, e) + g * std::pow(1.0 - g, rho * e) * std::pow(R, -rho),
                     (1.0 - rho) / rho);
    return p;
}

// Per-capita public goods, congestion-adjusted. p_tilde_x_i is the real
// value added per worker of good i.
inline double public_goods(double g_h, double g_l, double p_tilde_x_h, double p_tilde_x_l,
                           double e_h_total, double e_l_total, double population_total,
                           double zeta) {
    if (!(population_total > 0.0))
        throw validation_error("population_total", "must be > 0");
    return (g_h * p_tilde_x_h * e_h_total + g_l * p_tilde_x_l * e_l_total) /
           std::pow(population_total, zeta);
}

namespace detail {
inline double total_population(const EquilibriumState& s, const CalibratedParameters& c) {
    // natives enter with their full workforce; non-natives only with the
    // in-country part (employed + unemployed); plus employers and inactives
    return c.sigma[0] + c.sigma[1] + s.labor.e[2] + s.labor.u[2] + s.labor.e[3] +
           s.labor.u[3] + c.chi + c.IP;
}
inline double gross_value_added(const EquilibriumState& s, double x_h, double x_l) {
    return s.prices.p_h * x_h * (s.labor.e[0] + s.labor.e[2]) +
           s.prices.p_l * x_l * (s.labor.e[1] + s.labor.e[3]);
}
} // namespace detail

// DT, IT and TGE per the government's budget. Direct taxes fall on all
// household income including transfers; transfers are benefits plus the
// tax subsidy paid to workers and (scaled by b) to the unemployed; the
// goods purchase g_i p x e is grossed up by the indirect tax to its
// market cost.
inline GovernmentAccounts government_accounts(const EquilibriumState& s,
                                              const CalibratedParameters& calib,
                                              const FiscalConfig& fiscal, double x_h,
                                              double x_l, double zeta) {
    const auto& L = s.labor;
    GovernmentAccounts a;
    a.GVA = detail::gross_value_added(s, x_h, x_l);
    double wage_bill_u = 0.0, e_sum = 0.0, u_sum = 0.0;
    for (int k = 0; k < 4; ++k) {
        wage_bill_u += L.w[k] * L.u[k];
        e_sum += L.e[k];
        u_sum += L.u[k];
    }
    a.transfers = fiscal.b * wage_bill_u + fiscal.tau_tilde * (e_sum + fiscal.b * u_sum);
    a.DT = fiscal.t * (a.GVA + a.transfers);
    a.IT = fiscal.t_p / (1.0 - fiscal.t_p) * a.GVA;
    const double gterm = fiscal.g_h * s.prices.p_h * x_h * (L.e[0] + L.e[2]) +
                         fiscal.g_l * s.prices.p_l * x_l * (L.e[1] + L.e[3]);
    a.TGE = a.transfers + gterm / (1.0 - fiscal.t_p);
    a.nu = public_goods(fiscal.g_h, fiscal.g_l, s.prices.p_h * x_h, s.prices.p_l * x_l,
                        L.e[0] + L.e[2], L.e[1] + L.e[3],
                        detail::total_population(s, calib), zeta);
    return a;
}

// Demand-minus-supply per good, relative to gross supply. Demand aggregates
// all after-tax household income (value added plus transfers) through the
// expenditure shares, plus government purchases g_i * S_i.
inline std::pair<double, double> market_clearing_residuals(
    const EquilibriumState& s, const CalibratedParameters& calib,
    const FiscalConfig& fiscal, const PreferenceConfig& prefs, double x_h, double x_l) {
    const auto a = government_accounts(s, calib, fiscal, x_h, x_l, prefs.zeta);
    const double agg = a.GVA + a.transfers;
    double sh_h, sh_l;
    if (prefs.cobb_douglas()) {
        sh_h = prefs.gamma;
        sh_l = 1.0 - prefs.gamma;
    } else {
        const double e = 1.0 / (prefs.rho - 1.0);
        sh_h = s.prices.p_h * std::pow(s.prices.p_h / prefs.gamma, e);
        sh_l = s.prices.p_l * std::pow(s.prices.p_l / (1.0 - prefs.gamma), e);
    }
    const double S_h = s.prices.p_h * x_h * (s.labor.e[0] + s.labor.e[2]) / (1.0 - fiscal.t_p);
    const double S_l = s.prices.p_l * x_l * (s.labor.e[1] + s.labor.e[3]) / (1.0 - fiscal.t_p);
    const double r_h = sh_h * (1.0 - fiscal.t) * agg + fiscal.g_h * S_h - S_h;
    const double r_l = sh_l * (1.0 - fiscal.t) * agg + fiscal.g_l * S_l - S_l;
    return {r_h / S_h, r_l / S_l};
}

} // namespace migsm
