#pragma once

#include <cmath>
#include <vector>

#include "migsm/errors.hpp"
#include "migsm/types.hpp"

namespace migsm {

// One year-over-year observation of the unemployment pledger used to back
// out job-finding and separation rates. u_s_next is the short-term slice of
// u_next: workers whose current spell began within the period.
struct FlowObservation {
    double u_t = 0.0;      // unemployed at the start of the period
    double u_next = 0.0;   // unemployed at the end
    double u_s_next = 0.0; // of those, unemployed for less than one period
    double l_t = 0.0;      // labor force

    void validate() const {
        detail::require(u_t > 0.0, "u_t", "must be positive");
        detail::require(u_s_next >= 0.0, "u_s_next", "must be non-negative");
        detail::require(u_s_next <= u_next, "u_s_next", "cannot exceed u_next");
        detail::require(u_next <= l_t, "u_next", "cannot exceed the labor force");
        detail::require(u_t <= l_t, "u_t", "cannot exceed the labor force");
    }
};

struct ShimerRates {
    double Q = 0.0;     // job-finding probability over the period
    double Delta = 0.0; // employment-exit probability over the period
    double q = 0.0;     // instantaneous job-finding rate, -log(1-Q)
    double delta = 0.0; // instantaneous separation rate, -log(1-Delta)
};

// Recovers (Q, Delta, q, delta) from unemployment stocks. Q comes straight
// from the share of u_next that is not short-term; Delta solves the
// period-aggregated law of motion for unemployment by bisection.
ShimerRates shimer_rates(const FlowObservation& obs);

// Trend component of the Hodrick-Prescott penalized least-squares problem,
// solved exactly via the banded normal equations. Same length as the input.
std::vector<double> hp_filter(const std::vector<double>& series, double lambda_hp);

// Non-native stocks entering the inflow-rate estimators, both markets.
struct EtaStocks {
    double e_h = 0.0, e_l = 0.0; // employed non-natives by market
    double u_h = 0.0, u_l = 0.0; // unemployed non-natives by market
    double sigma_total = 0.0;    // total non-native allocation, both markets
};

struct EtaRates {
    double ktq_h = 0.0, ktq_l = 0.0;     // job-meeting rates (kappa theta q)
    double delta_h = 0.0, delta_l = 0.0; // separation rates
};

enum class EtaVia { employment, unemployment };

// Inflow rate of non-natives backed out from the total inflow TII and the
// steady-state stock equations. With lambda = 0 the inflow identity inverts
// directly as TII / sigma_total; otherwise the selected stock-based
// estimator applies. Negative or non-finite results raise data_error.
double eta_from_inflows(double TII, double lambda, const EtaStocks& stocks,
                        const EtaRates& rates, EtaVia via);

// Components of the expected dismissal cost, all expressed per dismissal.
// Rates ss/pp accrue per month of trial; sp/lc are lump sums in monthly
// wages; n_fd/n_a are first-degree and appeal trial lengths in months.
struct FiringCostInputs {
    double p_f = 0.0, p_s = 0.0, p_w = 0.0, p_a = 0.0;
    double n_fd = 1.0, n_a = 1.0;
    double ss = 0.0, pp = 0.0;
    double sp = 0.0, lc = 0.0;
    double fornero_flag = 0.0;
    double wage_to_va = 0.0; // wage as a share of per-worker value added

    void validate() const {
        auto prob = [](double p, const char* name) {
            detail::require(p >= 0.0 && p <= 1.0, name, "must lie in [0,1]");
        };
        prob(p_f, "p_f");
        prob(p_s, "p_s");
        prob(p_w, "p_w");
        prob(p_a, "p_a");
        prob(fornero_flag, "fornero_flag");
        detail::require(n_fd > 0.0, "n_fd", "must be positive");
        detail::require(n_a > 0.0, "n_a", "must be positive");
        detail::require(ss >= 0.0, "ss", "must be non-negative");
        detail::require(pp >= 0.0, "pp", "must be non-negative");
        detail::require(sp >= 0.0, "sp", "must be non-negative");
        detail::require(lc >= 0.0, "lc", "must be non-negative");
        detail::require(wage_to_va >= 0.0, "wage_to_va", "must be non-negative");
    }
};

// Expected firing cost as a share of per-worker value added: the levy plus
// the two litigation branches (first degree, then appeal), each weighted by
// its probability and costed as trial months, rates and lump sums in wages.
double firing_cost(const FiringCostInputs& inputs);

// Monthly labor-trial flow used to measure how long trials last.
struct TrialFlow {
    double ST_m = 0.0;    // trials settled in the month
    double PT_prev = 0.0; // pending stock at the start of the month
    double ET_m = 0.0;    // trials ensued in the month

    void validate() const {
        detail::require(ST_m >= 0.0, "ST_m", "must be non-negative");
        detail::require(PT_prev >= 0.0, "PT_prev", "must be non-negative");
        detail::require(ET_m >= 0.0, "ET_m", "must be non-negative");
        detail::require(PT_prev + ET_m > 0.0, "PT_prev",
                        "pending plus ensued trials must be positive");
    }
};

// Average trial length in months: open caseload over monthly settlements.
double average_trial_length(const TrialFlow& flow);

// Flow cost of keeping a vacancy open, as a share of per-worker value
// added: expected hires per month times the total cost per hire.
double vacancy_cost(double kappa_q_monthly, double direct_cost,
                    double opportunity_cost, double p_tilde_x_monthly);

struct TaxSubsidy {
    double tau = 0.0;              // lump-sum subsidy in w_bar units
    double no_tax_threshold = 0.0; // wage below which no tax is due
};

// Lump-sum subsidy that reconciles the observed average rate at 0.67*w_bar
// with the marginal rate under a linear tax-less-subsidy schedule.
TaxSubsidy tax_subsidy(double w_bar, double t_avg, double t_marginal);

// Average tax rate implied by (tau, t_marginal) at a given wage; zero below
// the no-tax threshold.
double average_tax_rate(double wage, double tau, double t_marginal);

// Probability conversions: compounding for rates, division for flows.
inline double monthly_rate_from_annual(double rate_a) {
    detail::require(rate_a >= 0.0 && rate_a < 1.0, "rate_a", "must lie in [0,1)");
    return 1.0 - std::pow(1.0 - rate_a, 1.0 / 12.0);
}

inline double annual_rate_from_monthly(double rate_m) {
    detail::require(rate_m >= 0.0 && rate_m < 1.0, "rate_m", "must lie in [0,1)");
    return 1.0 - std::pow(1.0 - rate_m, 12.0);
}

inline double monthly_flow_from_annual(double flow_a) { return flow_a / 12.0; }

} // namespace migsm
