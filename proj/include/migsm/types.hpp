#pragma once

#include <array>
#include <cmath>
#include <string>

#include "migsm/errors.hpp"

namespace migsm {

// Worker-class order used everywhere in this library:
//   0 = high-skilled native (hN)   1 = low-skilled native (lN)
//   2 = high-skilled non-native (hI)   3 = low-skilled non-native (lI)
// Market order: 0 = high-skilled market (h), 1 = low-skilled market (l).
inline constexpr int n_classes = 4;
inline constexpr int n_markets = 2;

enum class Skill { high = 0, low = 1 };
enum class Origin { native = 0, nonnative = 1 };

struct WorkerClass {
    Skill skill;
    Origin origin;
};

constexpr int class_index(Skill s, Origin o) {
    return static_cast<int>(s) + 2 * static_cast<int>(o);
}
constexpr int class_index(WorkerClass c) { return class_index(c.skill, c.origin); }
constexpr int market_of(int class_idx) { return class_idx % 2; }
constexpr bool is_native(int class_idx) { return class_idx < 2; }

inline const std::array<std::string, 4> class_names = {"hN", "lN", "hI", "lI"};
inline const std::array<std::string, 2> market_names = {"h", "l"};

namespace detail {
inline void require(bool ok, const char* field, const char* msg) {
    if (!ok) throw validation_error(field, msg);
}
inline void require(bool ok, const std::string& field, const char* msg) {
    if (!ok) throw validation_error(field, msg);
}
inline bool finite(double v) { return std::isfinite(v); }
} // namespace detail

// CES preference block. epsilon = 1/(1-rho) is the elasticity of
// substitution between the two goods; |rho| < 1e-8 selects the
// Cobb-Douglas closed forms everywhere.
struct PreferenceConfig {
    double rho = 0.0;    // CES curvature, rho < 1
    double gamma = 0.5;  // taste weight on the high-skilled good, in (0,1)
    double iota = 1.0;   // public-good utility weight, > 0
    double zeta = 1.0;   // congestion exponent, >= 0

    static constexpr double cobb_douglas_eps = 1e-8;
    bool cobb_douglas() const { return std::abs(rho) < cobb_douglas_eps; }
    double epsilon() const { return 1.0 / (1.0 - rho); }

    void validate() const {
        detail::require(detail::finite(rho) && rho < 1.0, "rho", "must be < 1");
        detail::require(gamma > 0.0 && gamma < 1.0, "gamma", "must lie strictly inside (0,1)");
        detail::require(iota > 0.0, "iota", "must be > 0");
        detail::require(zeta >= 0.0, "zeta", "must be >= 0");
    }
};

// Cobb-Douglas matching technology m(u,v): q(theta)=theta^-alpha,
// theta*q(theta)=theta^(1-alpha). Values above 1 are legal (Poisson rates).
struct MatchingConfig {
    double alpha = 0.4; // elasticity of matches w.r.t. unemployment, in (0,1)

    void validate() const {
        detail::require(alpha > 0.0 && alpha < 1.0, "alpha", "must lie strictly inside (0,1)");
    }
};

// Real (price-index-deflated) goods prices.
struct RealPrices {
    double p_h = 1.0;
    double p_l = 1.0;

    void validate() const {
        detail::require(p_h > 0.0, "p_h", "must be > 0");
        detail::require(p_l > 0.0, "p_l", "must be > 0");
    }
};

struct IncomeBundle {
    double y = 0.0; // real income per period
    bool employed = false;

    void validate() const { detail::require(y >= 0.0, "y", "must be >= 0"); }
};

// Government instruments. b < 1 keeps the bargaining denominators away
// from zero (see labor_market.hpp).
struct FiscalConfig {
    double t = 0.0;         // direct tax rate, [0,1)
    double t_p = 0.0;       // indirect tax rate, [0,1)
    double b = 0.0;         // unemployment-benefit replacement rate, [0,1)
    double tau_tilde = 0.0; // real tax subsidy, >= 0
    double g_h = 0.0;       // government expenditure share of good-h value added, [0,1)
    double g_l = 0.0;       // same for good l; g_h == g_l reproduces the single-g system

    void validate() const {
        detail::require(t >= 0.0 && t < 1.0, "t", "must lie in [0,1)");
        detail::require(t_p >= 0.0 && t_p < 1.0, "t_p", "must lie in [0,1)");
        detail::require(b >= 0.0 && b < 1.0, "b", "must lie in [0,1)");
        detail::require(tau_tilde >= 0.0, "tau_tilde", "must be >= 0");
        detail::require(g_h >= 0.0 && g_h < 1.0, "g_h", "must lie in [0,1)");
        detail::require(g_l >= 0.0 && g_l < 1.0, "g_l", "must lie in [0,1)");
    }
};

struct PopulationConfig {
    double chi = 0.0; // employer mass
    double IP = 0.0;  // inactive / non-working-age population mass

    void validate() const {
        detail::require(chi >= 0.0, "chi", "must be >= 0");
        detail::require(IP >= 0.0, "IP", "must be >= 0");
    }
};

// Per-class hiring/separation primitives.
struct ClassRates {
    double kappa = 1.0; // offer-signing probability, (0,1]
    double delta = 0.0; // exogenous separation rate (monthly), > 0
    double sigma = 0.0; // workforce stock (persons), >= 0

    void validate() const {
        detail::require(kappa > 0.0 && kappa <= 1.0, "kappa", "must lie in (0,1]");
        detail::require(delta > 0.0, "delta", "must be > 0");
        detail::require(sigma >= 0.0, "sigma", "must be >= 0");
    }
};

// Non-native inflow/outflow (monthly rates).
struct MigrationRates {
    double eta = 0.0;    // entry rate from abroad
    double lambda = 0.0; // exit rate of unemployed non-natives

    void validate() const {
        detail::require(detail::finite(eta) && eta >= 0.0, "eta", "must be finite and >= 0");
        detail::require(detail::finite(lambda) && lambda >= 0.0, "lambda", "must be finite and >= 0");
    }
};

// The 20 externally-set yearly inputs. All rates are monthly; stocks are
// persons (any consistent unit, e.g. millions). ssc_wedge is an accounting
// extra used only for the social-security-contribution delta in reports:
// contributions = wedge share of the gross bargained wage bill.
struct CalibratedParameters {
    double r = 0.01;       // monthly discount rate
    double alpha = 0.4;    // matching elasticity
    double b = 0.0;        // benefit replacement rate
    double t_p = 0.0;      // indirect tax rate
    double tau_tilde = 0.0;// real tax subsidy (monthly)
    double F = 0.0;        // firing cost as a share of monthly value added
    double c = 0.0;        // vacancy cost as a share of monthly value added
    double phi = 0.0;      // transfer share of firing costs accruing to the worker
    double eta = 0.0;      // non-native entry rate
    double lambda = 0.0;   // non-native exit rate
    std::array<double, 4> delta{};  // separation rates, class order hN,lN,hI,lI
    std::array<double, 4> sigma{};  // workforce stocks, class order
    double chi = 0.0;      // employer mass
    double IP = 0.0;       // inactive population mass
    double ssc_wedge = 0.25;

    void validate() const {
        detail::require(r > 0.0, "r", "must be > 0");
        MatchingConfig{alpha}.validate();
        detail::require(b >= 0.0 && b < 1.0, "b", "must lie in [0,1)");
        detail::require(t_p >= 0.0 && t_p < 1.0, "t_p", "must lie in [0,1)");
        detail::require(tau_tilde >= 0.0, "tau_tilde", "must be >= 0");
        detail::require(F >= 0.0, "F", "must be >= 0");
        detail::require(c >= 0.0, "c", "must be >= 0");
        detail::require(phi >= 0.0 && phi <= 1.0, "phi", "must lie in [0,1]");
        MigrationRates{eta, lambda}.validate();
        for (int k = 0; k < 4; ++k) {
            detail::require(delta[k] > 0.0, "delta", "must be > 0 for every class");
            detail::require(sigma[k] >= 0.0, "sigma", "must be >= 0 for every class");
        }
        detail::require(lambda == 0.0 || eta > 0.0, "eta",
                        "eta = 0 with lambda > 0 puts all non-native mass abroad");
        PopulationConfig{chi, IP}.validate();
        detail::require(ssc_wedge >= 0.0 && ssc_wedge < 1.0, "ssc_wedge", "must lie in [0,1)");
    }
};

// The 11 free parameters recovered by the moment-matching estimator.
// Bargaining power is shared by natives and non-natives (the two cannot be
// separately identified); the wage formulas still accept distinct values.
struct EstimatedParameters {
    double beta = 0.13;   // bargaining power, shared across origins
    double gamma = 0.335; // CES taste weight
    double x_h = 1.0;     // productivity, high-skilled good
    double x_l = 1.0;     // productivity, low-skilled good
    double t = 0.5;       // direct tax rate
    std::array<double, 4> kappa{1.0, 1.0, 1.0, 1.0}; // signing probabilities, class order
    double W_FC_h = 0.0;  // outside lifetime utility abroad, high-skilled
    double W_FC_l = 0.0;  // outside lifetime utility abroad, low-skilled

    static constexpr int n_params = 11;

    static const std::array<std::string, n_params>& names() {
        static const std::array<std::string, n_params> v = {
            "beta", "gamma", "x_h", "x_l", "t",
            "kappa_hN", "kappa_lN", "kappa_hI", "kappa_lI",
            "W_FC_h", "W_FC_l"};
        return v;
    }

    std::array<double, n_params> to_array() const {
        return {beta, gamma, x_h, x_l, t,
                kappa[0], kappa[1], kappa[2], kappa[3], W_FC_h, W_FC_l};
    }

    static EstimatedParameters from_array(const std::array<double, n_params>& a) {
        EstimatedParameters p;
        p.beta = a[0]; p.gamma = a[1]; p.x_h = a[2]; p.x_l = a[3]; p.t = a[4];
        p.kappa = {a[5], a[6], a[7], a[8]};
        p.W_FC_h = a[9]; p.W_FC_l = a[10];
        return p;
    }

    void validate() const {
        detail::require(beta > 0.0 && beta < 1.0, "beta", "must lie strictly inside (0,1)");
        detail::require(gamma > 0.0 && gamma < 1.0, "gamma", "must lie strictly inside (0,1)");
        detail::require(x_h > 0.0, "x_h", "must be > 0");
        detail::require(x_l > 0.0, "x_l", "must be > 0");
        detail::require(t >= 0.0 && t < 1.0, "t", "must lie in [0,1)");
        for (int k = 0; k < 4; ++k)
            detail::require(kappa[k] > 0.0 && kappa[k] <= 1.0, "kappa", "must lie in (0,1]");
        detail::require(detail::finite(W_FC_h), "W_FC_h", "must be finite");
        detail::require(detail::finite(W_FC_l), "W_FC_l", "must be finite");
    }
};

// Per-class stocks and wages at an equilibrium, plus tightness and the
// native shares among the unemployed of each market.
struct LaborBlock {
    std::array<double, 4> e{};  // employed stocks
    std::array<double, 4> u{};  // unemployed stocks
    std::array<double, 4> fc{}; // non-native mass abroad (0 for natives)
    std::array<double, 4> w{};  // gross real bargained wages
    double theta_h = 1.0, theta_l = 1.0;
    double pi_hN = 1.0, pi_lN = 1.0; // u_iN / (u_iN + u_iI)

    double theta(int market) const { return market == 0 ? theta_h : theta_l; }
    double pi(int market) const { return market == 0 ? pi_hN : pi_lN; }
};

// Lifetime values at an equilibrium. J is per class (market x hire origin);
// V is per market and ~0 under free entry.
struct ValueSet {
    std::array<double, 4> W_u{};
    std::array<double, 4> W_e{};
    std::array<double, 4> J{};
    std::array<double, 2> V{};
    double W_FC_h = 0.0, W_FC_l = 0.0;
};

struct GovernmentAccounts {
    double DT = 0.0;  // direct taxes
    double IT = 0.0;  // indirect taxes
    double TGE = 0.0; // total government expenditure
    double nu = 0.0;  // per-capita public goods
    double GVA = 0.0; // gross value added (real)
    double transfers = 0.0;
};

// Everything jointly determined at an equilibrium, before diagnostics.
struct EquilibriumState {
    LaborBlock labor;
    RealPrices prices;
    double nu = 0.0;
};

} // namespace migsm
