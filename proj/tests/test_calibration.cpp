#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "migsm/calibration.hpp"
#include "migsm/rng.hpp"
#include "support/shimer_mc.hpp"

using namespace migsm;

namespace {

// Unemployment after one period when finding/separation run at constant
// instantaneous rates: the solution of u' = delta*(l-u) - q*u.
double u_after_one_period(double u0, double l, double q, double delta) {
    const double s = q + delta;
    const double ubar = delta * l / s;
    return ubar + (u0 - ubar) * std::exp(-s);
}

FlowObservation synthetic_obs(double u0, double l, double q, double delta) {
    FlowObservation obs;
    obs.u_t = u0;
    obs.l_t = l;
    obs.u_next = u_after_one_period(u0, l, q, delta);
    // Survivors of the initial unemployment pool leave only by finding, so
    // the short-term slice is everything above u0 * exp(-q).
    obs.u_s_next = obs.u_next - u0 * std::exp(-q);
    return obs;
}

} // namespace

TEST_CASE("worker-flow recovery round-trips the generating rates") {
    for (double q : {0.05, 0.1, 0.22314355131420976, 0.5}) {
        for (double delta : {0.005, 0.02, 0.05, 0.12}) {
            const auto obs = synthetic_obs(0.1, 1.0, q, delta);
            const auto r = shimer_rates(obs);
            INFO("q ", q, " delta ", delta);
            CHECK(r.q == doctest::Approx(q).epsilon(1e-10));
            CHECK(r.delta == doctest::Approx(delta).epsilon(1e-10));
            CHECK(r.Q == doctest::Approx(1.0 - std::exp(-q)).epsilon(1e-12));
            CHECK(r.Delta == doctest::Approx(1.0 - std::exp(-delta)).epsilon(1e-10));
        }
    }
}

TEST_CASE("worker-flow corner cases") {
    // No short-term unemployed: nobody entered, so no separations happened.
    FlowObservation none;
    none.u_t = 0.1;
    none.u_next = 0.08;
    none.u_s_next = 0.0;
    none.l_t = 1.0;
    const auto r0 = shimer_rates(none);
    CHECK(r0.Delta == 0.0);
    CHECK(r0.delta == 0.0);
    CHECK(r0.Q == doctest::Approx(0.2).epsilon(1e-14));

    // The whole labor force ends unemployed: exit probability one.
    FlowObservation all;
    all.u_t = 0.5;
    all.u_next = 1.0;
    all.u_s_next = 0.8;
    all.l_t = 1.0;
    const auto r1 = shimer_rates(all);
    CHECK(r1.Delta == 1.0);
    CHECK(std::isinf(r1.delta));

    // More long-term unemployed at the end than unemployed at the start.
    FlowObservation bad;
    bad.u_t = 0.05;
    bad.u_next = 0.2;
    bad.u_s_next = 0.05;
    bad.l_t = 1.0;
    CHECK_THROWS_AS((void)shimer_rates(bad), data_error);

    // Short-term slice exceeding the unemployment stock is malformed.
    FlowObservation malformed;
    malformed.u_t = 0.1;
    malformed.u_next = 0.1;
    malformed.u_s_next = 0.2;
    malformed.l_t = 1.0;
    CHECK_THROWS_AS((void)shimer_rates(malformed), validation_error);
}

TEST_CASE("worker-flow recovery agrees with an agent-level simulation") {
    const double q = 0.25, delta = 0.04;
    const auto obs = fixtures::simulate_flows(1000000, 0.12, q, delta, 2024);
    const auto r = shimer_rates(obs);
    CHECK(std::abs(r.q - q) / q < 0.02);
    CHECK(std::abs(r.delta - delta) / delta < 0.02);
}

namespace {

// Dense reference solution of the trend normal equations, written without
// any banded shortcuts: A = I + lambda * K'K with K the second-difference
// operator, solved by Gaussian elimination with partial pivoting.
std::vector<double> hp_dense(const std::vector<double>& y, double lambda_hp) {
    const int n = static_cast<int>(y.size());
    std::vector<std::vector<double>> A(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i) A[i][i] = 1.0;
    for (int k = 0; k + 2 < n; ++k) {
        const double st[3] = {1.0, -2.0, 1.0};
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) A[k + a][k + b] += lambda_hp * st[a] * st[b];
    }
    std::vector<double> x(y);
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
        std::swap(A[col], A[piv]);
        std::swap(x[col], x[piv]);
        for (int r = col + 1; r < n; ++r) {
            const double f = A[r][col] / A[col][col];
            for (int cc = col; cc < n; ++cc) A[r][cc] -= f * A[col][cc];
            x[r] -= f * x[col];
        }
    }
    for (int r = n - 1; r >= 0; --r) {
        for (int cc = r + 1; cc < n; ++cc) x[r] -= A[r][cc] * x[cc];
        x[r] /= A[r][r];
    }
    return x;
}

} // namespace

TEST_CASE("trend extraction matches a dense reference solve") {
    std::mt19937_64 rng(41);
    std::vector<double> y(30);
    for (auto& v : y) v = 1.0 + 0.05 * std::sin(0.7 * (&v - y.data())) + uniform(rng, -0.02, 0.02);
    for (double lam : {6.25, 100.0, 1600.0}) {
        const auto fast = hp_filter(y, lam);
        const auto slow = hp_dense(y, lam);
        for (int i = 0; i < 30; ++i) {
            INFO("lambda ", lam, " index ", i);
            CHECK(fast[i] == doctest::Approx(slow[i]).epsilon(1e-10));
        }
    }
}

TEST_CASE("trend extraction is exact on polynomial series and preserves the mean") {
    std::vector<double> constant(12, 3.25);
    const auto tc = hp_filter(constant, 100.0);
    for (double v : tc) CHECK(v == doctest::Approx(3.25).epsilon(1e-12));

    std::vector<double> linear(15);
    for (int i = 0; i < 15; ++i) linear[i] = 0.4 + 0.1 * i;
    const auto tl = hp_filter(linear, 1600.0);
    for (int i = 0; i < 15; ++i) CHECK(tl[i] == doctest::Approx(linear[i]).epsilon(1e-11));

    std::mt19937_64 rng(42);
    std::vector<double> y(28);
    for (auto& v : y) v = uniform(rng, 0.5, 1.5);
    const double mean_y = std::accumulate(y.begin(), y.end(), 0.0);
    for (double lam : {6.25, 100.0, 1600.0}) {
        const auto trend = hp_filter(y, lam);
        const double mean_t = std::accumulate(trend.begin(), trend.end(), 0.0);
        CHECK(mean_t == doctest::Approx(mean_y).epsilon(1e-11));
    }

    CHECK_THROWS_AS((void)hp_filter(std::vector<double>{1.0, 2.0, 3.0}, 100.0),
                    validation_error);
    CHECK_THROWS_AS((void)hp_filter(constant, 0.0), validation_error);
}

TEST_CASE("inflow-rate estimators round-trip a synthetic steady state") {
    const double eta = 0.0123, lambda = 0.011;
    EtaRates rates;
    rates.ktq_h = 0.09;
    rates.ktq_l = 0.13;
    rates.delta_h = 0.007;
    rates.delta_l = 0.016;

    EtaStocks st;
    st.e_h = 0.3;
    st.e_l = 2.0;
    st.u_h = st.e_h * rates.delta_h / rates.ktq_h;
    st.u_l = st.e_l * rates.delta_l / rates.ktq_l;
    const double in_country = st.e_h + st.u_h + st.e_l + st.u_l;
    const double TII = eta * in_country + lambda * (st.u_h + st.u_l);

    CHECK(eta_from_inflows(TII, lambda, st, rates, EtaVia::employment) ==
          doctest::Approx(eta).epsilon(1e-12));
    CHECK(eta_from_inflows(TII, lambda, st, rates, EtaVia::unemployment) ==
          doctest::Approx(eta).epsilon(1e-12));
}

TEST_CASE("inflow-rate estimators on the bundled raw inputs") {
    EtaRates rates;
    rates.ktq_h = 0.085124613369786856;
    rates.ktq_l = 0.12366729477302459;
    rates.delta_h = 0.008;
    rates.delta_l = 0.015;

    EtaStocks st;
    st.e_h = 0.28811063029100126;
    st.e_l = 2.6619866549799092;
    st.u_h = 0.027076599247686912;
    st.u_l = 0.32288083844628968;
    st.sigma_total = 3.75;

    const double TII = 0.026249999999999999, lambda = 0.009;
    CHECK(eta_from_inflows(TII, lambda, st, rates, EtaVia::employment) ==
          doctest::Approx(0.007).epsilon(1e-10));
    CHECK(eta_from_inflows(TII, lambda, st, rates, EtaVia::unemployment) ==
          doctest::Approx(0.007).epsilon(1e-10));

    // Without exit the total allocation inverts the inflow directly.
    CHECK(eta_from_inflows(TII, 0.0, st, rates, EtaVia::employment) ==
          doctest::Approx(TII / 3.75).epsilon(1e-14));

    // Outflows exceeding the recorded inflow imply a negative rate.
    CHECK_THROWS_AS(
        (void)eta_from_inflows(0.0, lambda, st, rates, EtaVia::unemployment),
        data_error);
}

TEST_CASE("expected dismissal cost term by term") {
    FiringCostInputs in;
    in.p_f = 0.1;
    in.p_s = 0.3;
    in.p_w = 0.5;
    in.p_a = 0.5;
    in.n_fd = 12.0;
    in.n_a = 24.0;
    in.ss = 4.0 / 12.0;
    in.pp = 3.0 / 12.0;
    in.sp = 15.0;
    in.lc = 3.0;
    in.fornero_flag = 1.0;
    in.wage_to_va = 0.7;

    // first degree: 12 + (7/12)*12 + 15 + 3 = 37; appeal: 24 + 14 + 18 = 56
    // F = 0.1 * (1 + 0.15*37 + 0.0375*56) * 0.7 = 0.1 * 8.65 * 0.7
    CHECK(firing_cost(in) == doctest::Approx(0.6055).epsilon(1e-12));

    auto zero_dismissals = in;
    zero_dismissals.p_f = 0.0;
    CHECK(firing_cost(zero_dismissals) == 0.0);

    auto no_suits = in;
    no_suits.p_s = 0.0;
    no_suits.fornero_flag = 0.0;
    CHECK(firing_cost(no_suits) == 0.0);

    // Local monotonicity around the bundled inputs.
    auto longer_trials = in;
    longer_trials.n_fd = 18.0;
    CHECK(firing_cost(longer_trials) > firing_cost(in));
    auto higher_wage_share = in;
    higher_wage_share.wage_to_va = 0.8;
    CHECK(firing_cost(higher_wage_share) > firing_cost(in));

    auto invalid = in;
    invalid.p_w = 1.5;
    CHECK_THROWS_AS((void)firing_cost(invalid), validation_error);
}

TEST_CASE("average trial length") {
    CHECK(average_trial_length({50.0, 40.0, 10.0}) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(average_trial_length({10.0, 90.0, 10.0}) == doctest::Approx(10.0).epsilon(1e-14));
    CHECK_THROWS_AS((void)average_trial_length({0.0, 90.0, 10.0}), validation_error);
}

TEST_CASE("vacancy flow cost") {
    CHECK(vacancy_cost(0.3, 0.2, 0.1, 1.0) == doctest::Approx(0.09).epsilon(1e-14));
    CHECK(vacancy_cost(0.3, 0.2, 0.1, 2.0) == doctest::Approx(0.045).epsilon(1e-14));
    CHECK_THROWS_AS((void)vacancy_cost(0.3, 0.2, 0.1, 0.0), validation_error);
}

TEST_CASE("tax subsidy reconciles the observed average and marginal rates") {
    const auto ts = tax_subsidy(1.0, 0.129, 0.309);
    CHECK(ts.tau == doctest::Approx(0.17452966714905932).epsilon(1e-12));
    CHECK(ts.no_tax_threshold == doctest::Approx(0.39029126213592236).epsilon(1e-12));

    // The implied schedule reproduces the average rate it was fit to.
    CHECK(average_tax_rate(0.67, ts.tau, 0.309) == doctest::Approx(0.129).epsilon(1e-12));
    // No tax at or below the threshold.
    CHECK(average_tax_rate(ts.no_tax_threshold, ts.tau, 0.309) ==
          doctest::Approx(0.0).epsilon(1e-12));
    CHECK(average_tax_rate(0.5 * ts.no_tax_threshold, ts.tau, 0.309) == 0.0);

    CHECK_THROWS_AS((void)tax_subsidy(1.0, 0.4, 0.309), validation_error);
}

TEST_CASE("period conversions") {
    const double annual = 0.058;
    const double monthly = monthly_rate_from_annual(annual);
    CHECK(monthly == doctest::Approx(1.0 - std::pow(1.0 - annual, 1.0 / 12.0)).epsilon(1e-15));
    CHECK(annual_rate_from_monthly(monthly) == doctest::Approx(annual).epsilon(1e-12));
    CHECK(monthly_flow_from_annual(2.4) == doctest::Approx(0.2).epsilon(1e-15));
    CHECK_THROWS_AS((void)monthly_rate_from_annual(1.0), validation_error);
    CHECK_THROWS_AS((void)annual_rate_from_monthly(-0.1), validation_error);
}
