#include "migsm/counterfactual.hpp"

#include <cmath>
#include <future>

namespace migsm {

namespace {

double pct(double now, double was) { return 100.0 * (now - was) / was; }

double urate(const LaborBlock& L, int k) { return L.u[k] / (L.e[k] + L.u[k]); }

// Employment-weighted gross wage of a market.
double market_wage(const EquilibriumState& s, int m) {
    const int iN = m, iI = m + 2;
    return (s.labor.w[iN] * s.labor.e[iN] + s.labor.w[iI] * s.labor.e[iI]) /
           (s.labor.e[iN] + s.labor.e[iI]);
}

double gdp_of(const EquilibriumSolution& sol) {
    return sol.accounts.GVA / (1.0 - sol.fiscal.t_p);
}

double employment_of(const EquilibriumSolution& sol) {
    double e = 0.0;
    for (int k = 0; k < n_classes; ++k) e += sol.y.e(k);
    return e;
}

} // namespace

void Scenario::validate(const CalibratedParameters& calib) const {
    if (kind == Kind::stock_shock)
        for (int k = 0; k < n_classes; ++k)
            detail::require(calib.sigma[k] + dsigma[k] >= 0.0,
                            "dsigma[" + std::string(class_names[k]) + "]",
                            "resulting workforce allocation must be non-negative");
    detail::require(calib.IP + dIP >= 0.0, "dIP",
                    "resulting outside population must be non-negative");
}

CalibratedParameters Scenario::apply(const CalibratedParameters& calib) const {
    validate(calib);
    CalibratedParameters out = calib;
    if (kind == Kind::remove_all_nonnatives) {
        out.sigma[class_index(Skill::high, Origin::nonnative)] = 0.0;
        out.sigma[class_index(Skill::low, Origin::nonnative)] = 0.0;
    } else {
        for (int k = 0; k < n_classes; ++k) out.sigma[k] += dsigma[k];
    }
    out.IP += dIP;
    return out;
}

double social_security_contributions(const EquilibriumSolution& sol) {
    double ssc = 0.0;
    for (int k = 0; k < n_classes; ++k)
        ssc += sol.y.e(k) * sol.y.w(k) * sol.calib.ssc_wedge;
    return ssc;
}

CounterfactualReport make_report(EquilibriumSolution baseline,
                                 EquilibriumSolution scenario,
                                 const Scenario& applied) {
    CounterfactualReport r;
    r.applied = applied;

    r.gdp_pct = pct(gdp_of(scenario), gdp_of(baseline));
    r.gdp_per_worker_pct = pct(gdp_of(scenario) / employment_of(scenario),
                               gdp_of(baseline) / employment_of(baseline));
    r.DT_pct = pct(scenario.accounts.DT, baseline.accounts.DT);
    r.IT_pct = pct(scenario.accounts.IT, baseline.accounts.IT);
    r.ssc_pct = pct(social_security_contributions(scenario),
                    social_security_contributions(baseline));
    r.nu_pct = pct(scenario.y.nu(), baseline.y.nu());
    for (int k = 0; k < n_classes; ++k) {
        r.wage_pct[k] = pct(scenario.y.w(k), baseline.y.w(k));
        r.W_e_pct[k] = pct(scenario.values.W_e[k], baseline.values.W_e[k]);
        r.W_u_pct[k] = pct(scenario.values.W_u[k], baseline.values.W_u[k]);
        r.J_pct[k] = pct(scenario.values.J[k], baseline.values.J[k]);
    }
    r.price_pct[0] = pct(scenario.y.p_h(), baseline.y.p_h());
    r.price_pct[1] = pct(scenario.y.p_l(), baseline.y.p_l());

    const EquilibriumState sb = baseline.state(), ss = scenario.state();
    for (int k = 0; k < n_classes; ++k) {
        // classes emptied by the scenario have no unemployment rate
        const bool b_ok = sb.labor.e[k] + sb.labor.u[k] > 0.0;
        const bool s_ok = ss.labor.e[k] + ss.labor.u[k] > 0.0;
        const double ub = b_ok ? urate(sb.labor, k) : 0.0;
        const double us = s_ok ? urate(ss.labor, k) : 0.0;
        r.urate_abs[k] = us - ub;
    }

    r.baseline = std::move(baseline);
    r.scenario = std::move(scenario);
    return r;
}

CounterfactualReport run_scenario(const BaselineParams& bp, const Scenario& scenario) {
    scenario.validate(bp.calib);
    const CalibratedParameters shocked = scenario.apply(bp.calib);
    auto solve_leg = [&](const CalibratedParameters& calib) {
        return solve_equilibrium(calib, bp.est, bp.prefs, bp.solver);
    };
    auto base_fut = std::async(std::launch::async, solve_leg, bp.calib);
    auto scen_fut = std::async(std::launch::async, solve_leg, shocked);
    EquilibriumSolution base = base_fut.get();
    EquilibriumSolution scen = scen_fut.get();
    return make_report(std::move(base), std::move(scen), scenario);
}

WinnersLosersTable winners_losers(const CounterfactualReport& report) {
    WinnersLosersTable t;
    for (int k = 0; k < n_classes; ++k) {
        t.employed_pct[k] =
            pct(report.scenario.values.W_e[k], report.baseline.values.W_e[k]);
        t.unemployed_pct[k] =
            pct(report.scenario.values.W_u[k], report.baseline.values.W_u[k]);
        t.employers_pct[k] =
            pct(report.scenario.values.J[k], report.baseline.values.J[k]);
    }
    return t;
}

ElasticityDiagnostics firm_value_elasticity_test(const BaselineParams& bp,
                                                 double perturbation) {
    detail::require(perturbation > 0.0, "perturbation", "must be positive");
    const int lI = class_index(Skill::low, Origin::nonnative);
    const int lN = class_index(Skill::low, Origin::native);
    const double sigma_l = bp.calib.sigma[lN] + bp.calib.sigma[lI];
    detail::require(bp.calib.sigma[lI] > 0.0, "sigma[lI]",
                    "low-skilled non-natives must be present to perturb");
    // keep the downward leg feasible
    const double d = std::min(perturbation * sigma_l, 0.5 * bp.calib.sigma[lI]);

    auto solve_at = [&](double shift) {
        CalibratedParameters c = bp.calib;
        c.sigma[lI] += shift;
        return solve_equilibrium(c, bp.est, bp.prefs, bp.solver);
    };
    auto up_fut = std::async(std::launch::async, solve_at, +d);
    auto dn_fut = std::async(std::launch::async, solve_at, -d);
    const EquilibriumSolution mid = solve_at(0.0);
    const EquilibriumSolution up = up_fut.get();
    const EquilibriumSolution dn = dn_fut.get();

    const double dlns =
        std::log((bp.calib.sigma[lI] + d) / (bp.calib.sigma[lI] - d));
    auto elas = [&](double vup, double vdn) {
        return std::log(vup / vdn) / dlns;
    };

    ElasticityDiagnostics out;
    out.eps_w_h = elas(up.y.w(0), dn.y.w(0));
    out.eps_w_l = elas(up.y.w(1), dn.y.w(1));
    out.eps_p_h = elas(up.y.p_h(), dn.y.p_h());
    out.eps_p_l = elas(up.y.p_l(), dn.y.p_l());

    const std::array<double, n_classes> eps_w = {
        out.eps_w_h, out.eps_w_l, elas(up.y.w(2), dn.y.w(2)),
        elas(up.y.w(3), dn.y.w(3))};
    const std::array<double, n_markets> eps_p = {out.eps_p_h, out.eps_p_l};

    double max_abs_J = 0.0;
    for (int k = 0; k < n_classes; ++k)
        max_abs_J = std::max(max_abs_J, std::abs(mid.values.J[k]));
    out.consistent = true;
    for (int k = 0; k < n_classes; ++k) {
        const int m = market_of(k);
        const double px =
            (m == 0 ? mid.y.p_h() * mid.est.x_h : mid.y.p_l() * mid.est.x_l);
        const double A =
            (1.0 - mid.fiscal.t - mid.calib.delta[k] * mid.calib.F) * px;
        const double B = (1.0 - mid.fiscal.t) * mid.y.w(k);
        // profit rises iff the price response outweighs the wage response;
        // in the low-skilled market, where both move down, this is the
        // |eps_w| > |eps_p| * A/B magnitude comparison
        out.condition[k] = A * eps_p[m] - B * eps_w[k] > 0.0;
        out.dJ[k] = up.values.J[k] - dn.values.J[k];
        const bool sign_match = out.condition[k] == (out.dJ[k] > 0.0);
        if (!sign_match && std::abs(out.dJ[k]) > out.fd_noise_floor * max_abs_J)
            out.consistent = false;
    }

    const EquilibriumState su = up.state(), sd = dn.state();
    out.xi = aggregate_elasticity(pct(market_wage(su, 0), market_wage(sd, 0)),
                                  pct(market_wage(su, 1), market_wage(sd, 1)), 0.0,
                                  100.0 * (2.0 * d) / sigma_l);
    return out;
}

double aggregate_elasticity(double dw_h_pct, double dw_l_pct, double dsigma_h_pct,
                            double dsigma_l_pct) {
    const double dw = dw_h_pct - dw_l_pct;
    if (dw == 0.0)
        throw validation_error("dw", "wage-change difference must be nonzero");
    return -(dsigma_h_pct - dsigma_l_pct) / dw;
}

std::vector<std::pair<double, CounterfactualReport>>
epsilon_sweep(const BaselineParams& bp, const Scenario& scenario,
              const std::vector<double>& epsilons) {
    std::vector<std::future<CounterfactualReport>> futs;
    futs.reserve(epsilons.size());
    for (double eps : epsilons) {
        detail::require(eps > 0.0, "epsilon", "must be positive");
        BaselineParams grid = bp;
        grid.prefs.rho = 1.0 - 1.0 / eps;
        futs.push_back(std::async(
            std::launch::async,
            [grid, scenario] { return run_scenario(grid, scenario); }));
    }
    std::vector<std::pair<double, CounterfactualReport>> out;
    out.reserve(epsilons.size());
    for (std::size_t i = 0; i < epsilons.size(); ++i)
        out.emplace_back(epsilons[i], futs[i].get());
    return out;
}

} // namespace migsm
