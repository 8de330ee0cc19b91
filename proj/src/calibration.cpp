#include "migsm/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace migsm {

namespace {

// Unemployment predicted by the period-aggregated law of motion when flows
// run at constant rates (q, delta) within the period.
double unemployment_law_of_motion(double u_t, double l_t, double q, double delta) {
    const double s = q + delta;
    return (1.0 - std::exp(-s)) * delta / s * l_t + std::exp(-s) * u_t;
}

} // namespace

ShimerRates shimer_rates(const FlowObservation& obs) {
    obs.validate();
    ShimerRates out;
    out.Q = 1.0 - (obs.u_next - obs.u_s_next) / obs.u_t;
    if (out.Q < 0.0 || out.Q > 1.0)
        throw data_error("job-finding probability " + std::to_string(out.Q) +
                         " outside [0,1]; unemployment stocks inconsistent");
    out.q = -std::log1p(-out.Q);

    if (obs.u_s_next == 0.0) {
        // no short-term unemployed means no inflow into unemployment at all
        out.Delta = out.delta = 0.0;
        return out;
    }
    if (obs.u_next == obs.l_t) {
        // the whole labor force ends unemployed
        out.Delta = 1.0;
        out.delta = std::numeric_limits<double>::infinity();
        return out;
    }

    // Delta solves u_next = law_of_motion(delta) by bisection; the law is
    // increasing in delta, from u_t*exp(-q) at 0 toward l_t at infinity.
    auto gap = [&](double Delta) {
        const double delta = -std::log1p(-Delta);
        return unemployment_law_of_motion(obs.u_t, obs.l_t, out.q, delta) - obs.u_next;
    };
    double lo = 1e-12, hi = 1.0 - 1e-12;
    double glo = gap(lo), ghi = gap(hi);
    if (!(glo <= 0.0 && ghi >= 0.0))
        throw data_error("no employment-exit probability in (0,1) reproduces the "
                         "observed unemployment stocks");
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (gap(mid) <= 0.0)
            lo = mid;
        else
            hi = mid;
    }
    out.Delta = 0.5 * (lo + hi);
    out.delta = -std::log1p(-out.Delta);
    return out;
}

std::vector<double> hp_filter(const std::vector<double>& series, double lambda_hp) {
    const int n = static_cast<int>(series.size());
    if (n < 4) throw validation_error("series", "needs at least 4 observations");
    if (!(lambda_hp > 0.0))
        throw validation_error("lambda_hp", "must be positive");

    // Normal equations (I + lambda D'D) trend = series with D the second
    // difference operator; the matrix is symmetric pentadiagonal.
    std::vector<double> d0(n, 1.0), d1(n - 1, 0.0), d2(n - 2, 0.0);
    for (int k = 0; k + 2 < n; ++k) {
        // row k of D has stencil (1, -2, 1) at columns k, k+1, k+2
        d0[k] += lambda_hp;
        d0[k + 1] += 4.0 * lambda_hp;
        d0[k + 2] += lambda_hp;
        d1[k] += -2.0 * lambda_hp;
        d1[k + 1] += -2.0 * lambda_hp;
        d2[k] += lambda_hp;
    }

    // LDL^T factorization specialized to bandwidth 2; the matrix is
    // positive definite so no pivoting is needed.
    std::vector<double> D(n), L1(n - 1), L2(n - 2);
    for (int i = 0; i < n; ++i) {
        double di = d0[i];
        if (i >= 1) di -= L1[i - 1] * L1[i - 1] * D[i - 1];
        if (i >= 2) di -= L2[i - 2] * L2[i - 2] * D[i - 2];
        D[i] = di;
        if (i + 1 < n) {
            double v = d1[i];
            if (i >= 1) v -= L2[i - 1] * L1[i - 1] * D[i - 1];
            L1[i] = v / D[i];
        }
        if (i + 2 < n) L2[i] = d2[i] / D[i];
    }

    std::vector<double> y(series.begin(), series.end());
    for (int i = 0; i < n; ++i) {
        if (i >= 1) y[i] -= L1[i - 1] * y[i - 1];
        if (i >= 2) y[i] -= L2[i - 2] * y[i - 2];
    }
    for (int i = 0; i < n; ++i) y[i] /= D[i];
    for (int i = n - 1; i >= 0; --i) {
        if (i + 1 < n) y[i] -= L1[i] * y[i + 1];
        if (i + 2 < n) y[i] -= L2[i] * y[i + 2];
    }
    return y;
}

double eta_from_inflows(double TII, double lambda, const EtaStocks& stocks,
                        const EtaRates& rates, EtaVia via) {
    detail::require(TII >= 0.0, "TII", "must be non-negative");
    detail::require(lambda >= 0.0, "lambda", "must be non-negative");

    if (lambda == 0.0) {
        detail::require(stocks.sigma_total > 0.0, "sigma_total", "must be positive");
        return TII / stocks.sigma_total;
    }

    detail::require(rates.ktq_h > 0.0 && rates.ktq_l > 0.0, "ktq",
                    "job-meeting rates must be positive");
    detail::require(rates.delta_h > 0.0 && rates.delta_l > 0.0, "delta",
                    "separation rates must be positive");

    double num, den;
    if (via == EtaVia::employment) {
        num = TII - lambda * (stocks.e_h * rates.delta_h / rates.ktq_h +
                              stocks.e_l * rates.delta_l / rates.ktq_l);
        den = stocks.e_h * (rates.ktq_h + rates.delta_h) / rates.ktq_h +
              stocks.e_l * (rates.ktq_l + rates.delta_l) / rates.ktq_l;
    } else {
        num = TII - lambda * (stocks.u_h + stocks.u_l);
        den = stocks.u_h * (rates.ktq_h + rates.delta_h) / rates.delta_h +
              stocks.u_l * (rates.ktq_l + rates.delta_l) / rates.delta_l;
    }
    if (!(den > 0.0))
        throw data_error("inflow-rate estimator has non-positive denominator");
    const double eta = num / den;
    if (!(eta >= 0.0) || !std::isfinite(eta))
        throw data_error("implied non-native inflow rate is negative: recorded "
                         "outflows exceed the total inflow");
    return eta;
}

double firing_cost(const FiringCostInputs& in) {
    in.validate();
    const double first_degree = in.n_fd + (in.ss + in.pp) * in.n_fd + in.sp + in.lc;
    const double appeal = in.n_a + (in.ss + in.pp) * in.n_a + in.sp + in.lc;
    return in.p_f *
           (in.fornero_flag + in.p_s * in.p_w * first_degree +
            in.p_s * (1.0 - in.p_w) * in.p_a * in.p_w * appeal) *
           in.wage_to_va;
}

double average_trial_length(const TrialFlow& flow) {
    flow.validate();
    if (flow.ST_m == 0.0)
        throw validation_error("ST_m", "no trials settled; trial length undefined");
    return (flow.PT_prev + flow.ET_m) / flow.ST_m;
}

double vacancy_cost(double kappa_q_monthly, double direct_cost,
                    double opportunity_cost, double p_tilde_x_monthly) {
    detail::require(kappa_q_monthly >= 0.0, "kappa_q_monthly", "must be non-negative");
    detail::require(direct_cost >= 0.0, "direct_cost", "must be non-negative");
    detail::require(opportunity_cost >= 0.0, "opportunity_cost",
                    "must be non-negative");
    detail::require(p_tilde_x_monthly > 0.0, "p_tilde_x_monthly", "must be positive");
    return kappa_q_monthly * (direct_cost + opportunity_cost) / p_tilde_x_monthly;
}

TaxSubsidy tax_subsidy(double w_bar, double t_avg, double t_marginal) {
    detail::require(w_bar > 0.0, "w_bar", "must be positive");
    detail::require(t_avg >= 0.0, "t_avg", "must be non-negative");
    detail::require(t_avg <= t_marginal, "t_avg", "cannot exceed the marginal rate");
    detail::require(t_marginal < 1.0, "t_marginal", "must be below 1");
    TaxSubsidy out;
    out.tau = 0.67 * w_bar * (t_marginal - t_avg) / (1.0 - t_marginal);
    out.no_tax_threshold =
        t_marginal > 0.0 ? (1.0 - t_marginal) * out.tau / t_marginal : 0.0;
    return out;
}

double average_tax_rate(double wage, double tau, double t_marginal) {
    detail::require(wage > 0.0, "wage", "must be positive");
    detail::require(t_marginal >= 0.0 && t_marginal < 1.0, "t_marginal",
                    "must lie in [0,1)");
    return std::max(0.0, t_marginal - tau * (1.0 - t_marginal) / wage);
}

} // namespace migsm
