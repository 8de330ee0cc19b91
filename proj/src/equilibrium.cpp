#include "migsm/equilibrium.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "migsm/rng.hpp"

namespace migsm {

const std::array<std::string, UnknownVector::n>& UnknownVector::names() {
    static const std::array<std::string, n> v = {
        "e_hN", "e_lN", "e_hI", "e_lI", "u_hN", "u_lN", "u_hI", "u_lI",
        "w_hN", "w_lN", "w_hI", "w_lI", "theta_h", "theta_l", "p_h", "p_l", "nu"};
    return v;
}

EquilibriumState UnknownVector::to_state(const CalibratedParameters& calib) const {
    EquilibriumState s;
    for (int k = 0; k < 4; ++k) {
        s.labor.e[k] = e(k);
        s.labor.u[k] = u(k);
        s.labor.w[k] = w(k);
        // abroad mass is whatever workforce is neither employed nor unemployed
        s.labor.fc[k] = is_native(k) ? 0.0 : calib.sigma[k] - e(k) - u(k);
    }
    s.labor.theta_h = theta_h();
    s.labor.theta_l = theta_l();
    const double den_h = u(0) + u(2), den_l = u(1) + u(3);
    s.labor.pi_hN = den_h > 0.0 ? u(0) / den_h : 1.0;
    s.labor.pi_lN = den_l > 0.0 ? u(1) / den_l : 1.0;
    s.prices = {p_h(), p_l()};
    s.nu = nu();
    return s;
}

namespace {

constexpr double k_penalty = 1e6;

struct ModelSlice {
    const CalibratedParameters& calib;
    const EstimatedParameters& est;
    const PreferenceConfig& prefs;
    const FiscalConfig& fiscal;

    double x_of_market(int m) const { return m == 0 ? est.x_h : est.x_l; }
    double W_FC_of_market(int m) const { return m == 0 ? est.W_FC_h : est.W_FC_l; }
};

// Appendix-level closed form: the price each market's job-creation curve
// implies at given tightness, unemployment composition and wages.
double jcc_implied_price(const ModelSlice& ms, int market, double q, double pi_N,
                         double w_N, double w_I) {
    const int iN = market, iI = market + 2;
    const double r = ms.calib.r, t = ms.fiscal.t, F = ms.calib.F, c = ms.calib.c;
    const double dN = ms.calib.delta[iN], dI = ms.calib.delta[iI];
    const double kN = ms.est.kappa[iN], kI = ms.est.kappa[iI];
    const double num = q * (1.0 - t) *
                       (pi_N * kN * (r + dI) * w_N + (1.0 - pi_N) * kI * (r + dN) * w_I);
    const double den =
        ms.x_of_market(market) *
        (q * (pi_N * kN * (r + dI) * (1.0 - t - dN * F) +
              (1.0 - pi_N) * kI * (r + dN) * (1.0 - t - dI * F)) -
         c * (r + dN) * (r + dI));
    return num / den;
}

struct InnerPoint {
    std::array<double, 4> e{}, u{}, w{}, ktq{};
    std::array<double, 2> fc{};
    double p_h = 0.0, p_l = 0.0, nu = 0.0;
    double pi_h = 1.0, pi_l = 1.0;
    double q_h = 0.0, q_l = 0.0;
    double th_h = 0.0, th_l = 0.0;
};

// Closed-form inner block of the nested scheme: stocks, prices, public
// goods and wages all follow from the two tightnesses.
InnerPoint inner_given_theta(const ModelSlice& ms, double th_h, double th_l) {
    const auto& c = ms.calib;
    InnerPoint s;
    s.th_h = th_h;
    s.th_l = th_l;
    const double tq_h = std::pow(th_h, 1.0 - c.alpha), tq_l = std::pow(th_l, 1.0 - c.alpha);
    s.q_h = std::pow(th_h, -c.alpha);
    s.q_l = std::pow(th_l, -c.alpha);
    for (int k = 0; k < 4; ++k) s.ktq[k] = ms.est.kappa[k] * (market_of(k) == 0 ? tq_h : tq_l);

    for (int k = 0; k < 2; ++k) {
        const Stocks st = native_stocks_from_rate(c.sigma[k], s.ktq[k], c.delta[k]);
        s.e[k] = st.e;
        s.u[k] = st.u;
    }
    for (int k = 2; k < 4; ++k) {
        const Stocks st =
            nonnative_stocks_from_rate(c.sigma[k], s.ktq[k], c.delta[k], c.eta, c.lambda);
        s.e[k] = st.e;
        s.u[k] = st.u;
        s.fc[k - 2] = st.fc;
    }
    const double e_h = s.e[0] + s.e[2], e_l = s.e[1] + s.e[3];
    const RealPrices p = equilibrium_prices(ms.est.x_h, ms.est.x_l, e_h, e_l, ms.prefs,
                                            ms.fiscal.g_h, ms.fiscal.g_l);
    s.p_h = p.p_h;
    s.p_l = p.p_l;
    const double pop =
        c.sigma[0] + c.sigma[1] + s.e[2] + s.u[2] + s.e[3] + s.u[3] + c.chi + c.IP;
    s.nu = public_goods(ms.fiscal.g_h, ms.fiscal.g_l, s.p_h * ms.est.x_h,
                        s.p_l * ms.est.x_l, e_h, e_l, pop, ms.prefs.zeta);
    const std::array<double, 4> px = {s.p_h * ms.est.x_h, s.p_l * ms.est.x_l,
                                      s.p_h * ms.est.x_h, s.p_l * ms.est.x_l};
    for (int k = 0; k < 2; ++k)
        s.w[k] = wage_native(ms.est.beta, c.r, c.delta[k], s.ktq[k], c.b, ms.fiscal.t,
                             c.phi, px[k], c.tau_tilde, c.F);
    for (int k = 2; k < 4; ++k)
        s.w[k] = wage_nonnative(ms.est.beta, c.r, c.delta[k], s.ktq[k], c.b, ms.fiscal.t,
                                c.phi, c.lambda, px[k], c.tau_tilde, c.F,
                                ms.W_FC_of_market(market_of(k)),
                                ms.prefs.iota * s.nu);
    const double den_h = s.u[0] + s.u[2], den_l = s.u[1] + s.u[3];
    s.pi_h = den_h > 0.0 ? s.u[0] / den_h : 1.0;
    s.pi_l = den_l > 0.0 ? s.u[1] / den_l : 1.0;
    return s;
}

// Free-entry residuals of both markets, scaled by the vacancy cost so the
// outer tolerance is relative.
std::array<double, 2> jcc_residuals_scaled(const ModelSlice& ms, const InnerPoint& s) {
    std::array<double, 2> res{};
    for (int m = 0; m < 2; ++m) {
        const int iN = m, iI = m + 2;
        const double px = (m == 0 ? s.p_h : s.p_l) * ms.x_of_market(m);
        const double q = m == 0 ? s.q_h : s.q_l;
        const double pi = m == 0 ? s.pi_h : s.pi_l;
        const double JN = match_value(px, s.w[iN], ms.fiscal.t, ms.calib.F, ms.calib.r,
                                      ms.calib.delta[iN]);
        const double JI = match_value(px, s.w[iI], ms.fiscal.t, ms.calib.F, ms.calib.r,
                                      ms.calib.delta[iI]);
        const double raw = pi * ms.est.kappa[iN] * q * JN +
                           (1.0 - pi) * ms.est.kappa[iI] * q * JI - ms.calib.c * px;
        res[m] = raw / (ms.calib.c * px);
    }
    return res;
}

UnknownVector pack(const InnerPoint& s) {
    UnknownVector y;
    for (int k = 0; k < 4; ++k) {
        y.e(k) = s.e[k];
        y.u(k) = s.u[k];
        y.w(k) = s.w[k];
    }
    y.theta_h() = s.th_h;
    y.theta_l() = s.th_l;
    y.p_h() = s.p_h;
    y.p_l() = s.p_l;
    y.nu() = s.nu;
    return y;
}

double inf_norm(const std::array<double, 17>& r) {
    double m = 0.0;
    for (double v : r) m = std::max(m, std::abs(v));
    return m;
}

double two_norm(const std::array<double, 17>& r) {
    double s = 0.0;
    for (double v : r) s += v * v;
    return std::sqrt(s);
}

// Solver variable transform: theta and prices are iterated in logs to keep
// them positive without constraints.
std::array<double, 17> to_solver_space(const UnknownVector& y) {
    std::array<double, 17> z = y.v;
    for (int j = 12; j <= 15; ++j) z[j] = std::log(y.v[j]);
    return z;
}

UnknownVector from_solver_space(const std::array<double, 17>& z,
                                const SolverConfig& cfg, bool* clamped = nullptr) {
    UnknownVector y;
    y.v = z;
    const double lo = std::log(cfg.theta_min), hi = std::log(cfg.theta_max);
    for (int j = 12; j <= 13; ++j) {
        double c = std::clamp(z[j], lo, hi);
        if (clamped && c != z[j]) *clamped = true;
        y.v[j] = std::exp(c);
    }
    y.v[14] = std::exp(z[14]);
    y.v[15] = std::exp(z[15]);
    return y;
}

struct NewtonOutcome {
    UnknownVector y;
    double residual_inf = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
    bool boundary = false;
};

NewtonOutcome newton17(const ModelSlice& ms, const UnknownVector& start,
                       const SolverConfig& cfg) {
    NewtonOutcome out;
    auto z = to_solver_space(start);
    auto eval = [&](const std::array<double, 17>& zz, bool* clamped = nullptr) {
        const UnknownVector y = from_solver_space(zz, cfg, clamped);
        return residual_vector(y, ms.calib, ms.est, ms.prefs, ms.fiscal);
    };
    auto r = eval(z);
    Eigen::Matrix<double, 17, 17> J;
    Eigen::Matrix<double, 17, 1> rhs;
    for (out.iterations = 0; out.iterations < cfg.max_iterations; ++out.iterations) {
        out.residual_inf = inf_norm(r);
        if (out.residual_inf < cfg.tolerance) {
            out.converged = true;
            break;
        }
        for (int j = 0; j < 17; ++j) {
            const double h = cfg.fd_step * std::max(std::abs(z[j]), 1.0);
            auto zp = z, zm = z;
            zp[j] += h;
            zm[j] -= h;
            const auto rp = eval(zp), rm = eval(zm);
            for (int i = 0; i < 17; ++i) J(i, j) = (rp[i] - rm[i]) / (2.0 * h);
        }
        for (int i = 0; i < 17; ++i) rhs(i) = -r[i];
        const Eigen::Matrix<double, 17, 1> dz = J.partialPivLu().solve(rhs);
        if (!dz.allFinite()) break;
        const double n0 = two_norm(r);
        double lam = 1.0;
        std::array<double, 17> z_try{};
        std::array<double, 17> r_try{};
        while (true) {
            for (int j = 0; j < 17; ++j) z_try[j] = z[j] + lam * dz(j);
            r_try = eval(z_try);
            if (two_norm(r_try) <= (1.0 - 1e-4 * lam) * n0 || lam <= 1e-8) break;
            lam *= 0.5;
        }
        z = z_try;
        r = r_try;
    }
    bool clamped = false;
    out.y = from_solver_space(z, cfg, &clamped);
    out.boundary = clamped ||
                   out.y.theta_h() <= cfg.theta_min || out.y.theta_h() >= cfg.theta_max ||
                   out.y.theta_l() <= cfg.theta_min || out.y.theta_l() >= cfg.theta_max;
    out.residual_inf = inf_norm(eval(z));
    return out;
}

struct NestedOutcome {
    InnerPoint point;
    double residual_inf = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
};

// Outer 2-d damped Newton on (log theta_h, log theta_l) over the scaled
// free-entry residuals; everything else is closed-form.
NestedOutcome nested_solve(const ModelSlice& ms, double th0_h, double th0_l,
                           const SolverConfig& cfg) {
    NestedOutcome out;
    const double lo = std::log(cfg.theta_min), hi = std::log(cfg.theta_max);
    std::array<double, 2> x = {std::log(th0_h), std::log(th0_l)};
    auto eval = [&](const std::array<double, 2>& lx) {
        const double a = std::clamp(lx[0], lo, hi), b = std::clamp(lx[1], lo, hi);
        const InnerPoint s = inner_given_theta(ms, std::exp(a), std::exp(b));
        auto r = jcc_residuals_scaled(ms, s);
        for (double& v : r)
            if (!std::isfinite(v)) v = k_penalty;
        return r;
    };
    auto r = eval(x);
    const double h = 1e-7;
    for (out.iterations = 0; out.iterations < cfg.max_iterations; ++out.iterations) {
        out.residual_inf = std::max(std::abs(r[0]), std::abs(r[1]));
        if (out.residual_inf < 1e-12) {
            out.converged = true;
            break;
        }
        double Jm[2][2];
        for (int j = 0; j < 2; ++j) {
            auto xp = x, xm = x;
            xp[j] += h;
            xm[j] -= h;
            const auto rp = eval(xp), rm = eval(xm);
            for (int i = 0; i < 2; ++i) Jm[i][j] = (rp[i] - rm[i]) / (2.0 * h);
        }
        const double det = Jm[0][0] * Jm[1][1] - Jm[0][1] * Jm[1][0];
        if (det == 0.0 || !std::isfinite(det)) break;
        const double dx0 = (-r[0] * Jm[1][1] + r[1] * Jm[0][1]) / det;
        const double dx1 = (-r[1] * Jm[0][0] + r[0] * Jm[1][0]) / det;
        const double n0 = std::hypot(r[0], r[1]);
        double lam = 1.0;
        std::array<double, 2> x_try{};
        std::array<double, 2> r_try{};
        while (true) {
            x_try = {x[0] + lam * dx0, x[1] + lam * dx1};
            r_try = eval(x_try);
            if (std::hypot(r_try[0], r_try[1]) <= (1.0 - 1e-4 * lam) * n0 || lam <= 1e-8)
                break;
            lam *= 0.5;
        }
        x = x_try;
        r = r_try;
    }
    x = {std::clamp(x[0], lo, hi), std::clamp(x[1], lo, hi)};
    out.point = inner_given_theta(ms, std::exp(x[0]), std::exp(x[1]));
    auto rf = jcc_residuals_scaled(ms, out.point);
    out.residual_inf = std::max(std::abs(rf[0]), std::abs(rf[1]));
    return out;
}

UnknownVector initial_guess(const ModelSlice& ms) {
    // theta = 1 everywhere, prices at full employment, wages at 0.7 of
    // value added, stocks at the theta = 1 closed forms.
    const auto& c = ms.calib;
    const double e_h_full = c.sigma[0] + c.sigma[2], e_l_full = c.sigma[1] + c.sigma[3];
    const RealPrices p = equilibrium_prices(ms.est.x_h, ms.est.x_l, e_h_full, e_l_full,
                                            ms.prefs, ms.fiscal.g_h, ms.fiscal.g_l);
    InnerPoint s = inner_given_theta(ms, 1.0, 1.0);
    UnknownVector y = pack(s);
    y.p_h() = p.p_h;
    y.p_l() = p.p_l;
    for (int k = 0; k < 4; ++k)
        y.w(k) = 0.7 * (market_of(k) == 0 ? p.p_h * ms.est.x_h : p.p_l * ms.est.x_l);
    return y;
}

struct CoreOutcome {
    UnknownVector y;
    double residual_inf = std::numeric_limits<double>::infinity();
    int iterations = 0;
    std::string path;
    bool boundary = false;
    bool converged = false;
};

CoreOutcome solve_core(const ModelSlice& ms, const SolverConfig& cfg,
                       const std::optional<UnknownVector>& warm) {
    CoreOutcome out;
    const auto run_newton = [&](const UnknownVector& start) {
        const NewtonOutcome n = newton17(ms, start, cfg);
        out.y = n.y;
        out.residual_inf = n.residual_inf;
        out.iterations += n.iterations;
        out.boundary = n.boundary;
        out.converged = n.converged;
    };
    const auto run_nested = [&](bool polish) {
        static constexpr double starts[] = {0.05, 1.0, 0.5, 5.0};
        for (double t0 : starts) {
            const NestedOutcome ns = nested_solve(ms, t0, t0, cfg);
            out.iterations += ns.iterations;
            if (!ns.converged) continue;
            if (!polish) {
                out.y = pack(ns.point);
                out.residual_inf =
                    inf_norm(residual_vector(out.y, ms.calib, ms.est, ms.prefs, ms.fiscal));
                out.converged = out.residual_inf < 10.0 * cfg.tolerance;
                if (out.converged) return;
                continue;
            }
            run_newton(pack(ns.point));
            if (out.converged) return;
        }
    };

    switch (cfg.strategy) {
    case SolverConfig::Strategy::newton:
        run_newton(warm ? *warm : initial_guess(ms));
        out.path = "newton";
        break;
    case SolverConfig::Strategy::fixed_point:
        run_nested(false);
        out.path = "fixed-point";
        break;
    case SolverConfig::Strategy::hybrid:
        run_newton(warm ? *warm : initial_guess(ms));
        out.path = "newton";
        if (!out.converged) {
            out.path = "fixed-point+newton";
            run_nested(true);
        }
        break;
    }
    return out;
}

} // namespace

std::array<double, UnknownVector::n> residual_vector(const UnknownVector& y,
                                                     const CalibratedParameters& calib,
                                                     const EstimatedParameters& est,
                                                     const PreferenceConfig& prefs,
                                                     const FiscalConfig& fiscal) {
    const ModelSlice ms{calib, est, prefs, fiscal};
    std::array<double, 17> res{};
    const auto scaled = [](double lhs, double rhs) {
        const double r = (lhs - rhs) / std::max(std::abs(rhs), 1.0);
        return std::isfinite(r) ? r : k_penalty;
    };

    const double th_h = y.theta_h(), th_l = y.theta_l();
    if (!(th_h > 0.0) || !(th_l > 0.0)) {
        res.fill(k_penalty);
        return res;
    }
    const double tq_h = std::pow(th_h, 1.0 - calib.alpha);
    const double tq_l = std::pow(th_l, 1.0 - calib.alpha);
    const double q_h = std::pow(th_h, -calib.alpha), q_l = std::pow(th_l, -calib.alpha);

    std::array<double, 4> ktq{};
    for (int k = 0; k < 4; ++k)
        ktq[k] = est.kappa[k] * (market_of(k) == 0 ? tq_h : tq_l);

    // stocks
    for (int k = 0; k < 2; ++k) {
        const Stocks st = native_stocks_from_rate(calib.sigma[k], ktq[k], calib.delta[k]);
        res[k] = scaled(y.e(k), st.e);
        res[4 + k] = scaled(y.u(k), st.u);
    }
    for (int k = 2; k < 4; ++k) {
        const Stocks st = nonnative_stocks_from_rate(calib.sigma[k], ktq[k],
                                                     calib.delta[k], calib.eta,
                                                     calib.lambda);
        res[k] = scaled(y.e(k), st.e);
        res[4 + k] = scaled(y.u(k), st.u);
    }

    // wages at the current prices and public goods
    const std::array<double, 4> px = {y.p_h() * est.x_h, y.p_l() * est.x_l,
                                      y.p_h() * est.x_h, y.p_l() * est.x_l};
    for (int k = 0; k < 2; ++k) {
        const double wf = wage_native(est.beta, calib.r, calib.delta[k], ktq[k], calib.b,
                                      fiscal.t, calib.phi, px[k], calib.tau_tilde,
                                      calib.F);
        res[8 + k] = scaled(y.w(k), wf);
    }
    for (int k = 2; k < 4; ++k) {
        const double wf = wage_nonnative(
            est.beta, calib.r, calib.delta[k], ktq[k], calib.b, fiscal.t, calib.phi,
            calib.lambda, px[k], calib.tau_tilde, calib.F,
            ms.W_FC_of_market(market_of(k)), prefs.iota * y.nu());
        res[8 + k] = scaled(y.w(k), wf);
    }

    // native unemployment shares from the current u entries
    const double den_h = y.u(0) + y.u(2), den_l = y.u(1) + y.u(3);
    const double pi_h = den_h > 0.0 ? y.u(0) / den_h : 1.0;
    const double pi_l = den_l > 0.0 ? y.u(1) / den_l : 1.0;

    // job-creation curves, written as implied prices
    res[12] = scaled(y.p_h(), jcc_implied_price(ms, 0, q_h, pi_h, y.w(0), y.w(2)));
    res[13] = scaled(y.p_l(), jcc_implied_price(ms, 1, q_l, pi_l, y.w(1), y.w(3)));

    // goods-market prices from the current employment stocks
    const double e_h = y.e(0) + y.e(2), e_l = y.e(1) + y.e(3);
    if (e_h > 0.0 && e_l > 0.0) {
        const RealPrices p = equilibrium_prices(est.x_h, est.x_l, e_h, e_l, prefs,
                                                fiscal.g_h, fiscal.g_l);
        res[14] = scaled(y.p_h(), p.p_h);
        res[15] = scaled(y.p_l(), p.p_l);
    } else {
        res[14] = res[15] = k_penalty;
    }

    // public goods
    const double pop = calib.sigma[0] + calib.sigma[1] + y.e(2) + y.u(2) + y.e(3) +
                       y.u(3) + calib.chi + calib.IP;
    if (pop > 0.0) {
        const double nu_f = public_goods(fiscal.g_h, fiscal.g_l, y.p_h() * est.x_h,
                                         y.p_l() * est.x_l, e_h, e_l, pop, prefs.zeta);
        res[16] = scaled(y.nu(), nu_f);
    } else {
        res[16] = k_penalty;
    }
    return res;
}

ValueSet compute_values(const EquilibriumState& s, const CalibratedParameters& calib,
                        const EstimatedParameters& est, const PreferenceConfig& prefs,
                        const FiscalConfig& fiscal) {
    ValueSet out;
    out.W_FC_h = est.W_FC_h;
    out.W_FC_l = est.W_FC_l;
    const std::array<double, 4> px = {s.prices.p_h * est.x_h, s.prices.p_l * est.x_l,
                                      s.prices.p_h * est.x_h, s.prices.p_l * est.x_l};
    std::array<double, 4> ktq{};
    for (int k = 0; k < 4; ++k) {
        const double tq = std::pow(s.labor.theta(market_of(k)), 1.0 - calib.alpha);
        ktq[k] = est.kappa[k] * tq;
        out.J[k] = match_value(px[k], s.labor.w[k], fiscal.t, calib.F, calib.r,
                               calib.delta[k]);
    }
    for (int m = 0; m < 2; ++m) {
        const double q = std::pow(s.labor.theta(m), -calib.alpha);
        out.V[m] = vacancy_value(calib.c, px[m], q, s.labor.pi(m), est.kappa[m],
                                 est.kappa[m + 2], out.J[m], out.J[m + 2], calib.r);
    }
    const double iota_nu = prefs.iota * s.nu;
    for (int k = 0; k < 2; ++k) {
        const ClassValues v = worker_values_native(
            s.labor.w[k], calib.tau_tilde, fiscal.t, calib.b, iota_nu, px[k], calib.F,
            calib.phi, calib.r, calib.delta[k], ktq[k], est.beta, out.J[k]);
        out.W_u[k] = v.W_u;
        out.W_e[k] = v.W_e;
    }
    for (int k = 2; k < 4; ++k) {
        const double W_FC = market_of(k) == 0 ? est.W_FC_h : est.W_FC_l;
        const ClassValues v = worker_values_nonnative(
            s.labor.w[k], calib.tau_tilde, fiscal.t, calib.b, iota_nu, px[k], calib.F,
            calib.phi, calib.r, calib.delta[k], ktq[k], est.beta, out.J[k],
            calib.lambda, W_FC);
        out.W_u[k] = v.W_u;
        out.W_e[k] = v.W_e;
    }
    return out;
}

bool VerificationReport::ok() const {
    return residual_inf < pass_tolerance && flow_balance_max < pass_tolerance &&
           free_entry_max < pass_tolerance && budget_gap_rel < pass_tolerance &&
           std::abs(clearing_h) < pass_tolerance && std::abs(clearing_l) < pass_tolerance &&
           std::abs(normalization) < pass_tolerance;
}

VerificationReport verify_solution(const EquilibriumSolution& sol) {
    VerificationReport rep;
    const auto r =
        residual_vector(sol.y, sol.calib, sol.est, sol.prefs, sol.fiscal);
    rep.residual_inf = inf_norm(r);

    const EquilibriumState s = sol.state();
    for (int k = 0; k < 4; ++k) {
        const double tq = std::pow(s.labor.theta(market_of(k)), 1.0 - sol.calib.alpha);
        const double ktq = sol.est.kappa[k] * tq;
        if (s.labor.u[k] > 0.0 && ktq > 0.0)
            rep.flow_balance_max =
                std::max(rep.flow_balance_max,
                         std::abs(s.labor.e[k] * sol.calib.delta[k] /
                                      (s.labor.u[k] * ktq) - 1.0));
    }

    const ValueSet vals =
        compute_values(s, sol.calib, sol.est, sol.prefs, sol.fiscal);
    const std::array<double, 2> px = {s.prices.p_h * sol.est.x_h,
                                      s.prices.p_l * sol.est.x_l};
    for (int m = 0; m < 2; ++m)
        rep.free_entry_max = std::max(
            rep.free_entry_max, std::abs(vals.V[m]) / (sol.calib.c * px[m]));

    const GovernmentAccounts a = government_accounts(
        s, sol.calib, sol.fiscal, sol.est.x_h, sol.est.x_l, sol.prefs.zeta);
    rep.budget_gap_rel = std::abs(a.DT + a.IT - a.TGE) / std::max(std::abs(a.TGE), 1.0);

    const auto [ch, cl] = market_clearing_residuals(s, sol.calib, sol.fiscal, sol.prefs,
                                                    sol.est.x_h, sol.est.x_l);
    rep.clearing_h = ch;
    rep.clearing_l = cl;
    rep.normalization =
        normalization_residual(s.prices.p_h, s.prices.p_l, sol.prefs);
    return rep;
}

EquilibriumSolution solve_equilibrium(const CalibratedParameters& calib,
                                      const EstimatedParameters& est,
                                      const PreferenceConfig& prefs_in,
                                      const SolverConfig& config) {
    calib.validate();
    est.validate();
    const PreferenceConfig prefs = effective_prefs(prefs_in, est);
    prefs.validate();
    if (calib.sigma[0] + calib.sigma[2] <= 0.0)
        throw degenerate_economy("no workforce in the high-skilled market");
    if (calib.sigma[1] + calib.sigma[3] <= 0.0)
        throw degenerate_economy("no workforce in the low-skilled market");

    FiscalConfig fiscal = make_fiscal(calib, est, config.g_h, config.g_l);
    fiscal.validate();

    CoreOutcome best;
    std::optional<UnknownVector> warm;
    int closure_iterations = 0;

    if (config.balance_budget) {
        double g = 0.5 * (config.g_h + config.g_l);
        bool closed = false;
        for (closure_iterations = 0; closure_iterations < config.closure_max_iterations;
             ++closure_iterations) {
            fiscal.g_h = fiscal.g_l = g;
            const ModelSlice ms{calib, est, prefs, fiscal};
            best = solve_core(ms, config, warm);
            if (!best.converged) break;
            warm = best.y;
            const EquilibriumState s = best.y.to_state(calib);
            const GovernmentAccounts a =
                government_accounts(s, calib, fiscal, est.x_h, est.x_l, prefs.zeta);
            // g that balances the budget at this equilibrium's accounts
            const double g_new =
                (a.DT + a.IT - a.transfers) * (1.0 - fiscal.t_p) / a.GVA;
            if (!(g_new > 0.0 && g_new < 1.0))
                throw no_convergence(
                    "balanced-budget closure infeasible (required g = " +
                        std::to_string(g_new) + ")",
                    best.residual_inf, closure_iterations);
            if (std::abs(g_new - g) < config.closure_tol) {
                g = g_new;
                fiscal.g_h = fiscal.g_l = g;
                const ModelSlice ms2{calib, est, prefs, fiscal};
                best = solve_core(ms2, config, warm);
                closed = best.converged;
                break;
            }
            g = g_new;
        }
        if (best.converged && !closed)
            throw no_convergence("balanced-budget closure did not converge",
                                 best.residual_inf, closure_iterations);
    } else {
        const ModelSlice ms{calib, est, prefs, fiscal};
        best = solve_core(ms, config, std::nullopt);
    }

    if (!best.converged)
        throw no_convergence("equilibrium solve failed (best scaled residual " +
                                 std::to_string(best.residual_inf) + ")",
                             best.residual_inf, best.iterations,
                             std::vector<double>(best.y.v.begin(), best.y.v.end()));
    if (best.boundary)
        throw boundary_hit("tightness pinned at its clamp bound; economy has no "
                           "interior equilibrium under these parameters");

    EquilibriumSolution sol;
    sol.y = best.y;
    sol.calib = calib;
    sol.est = est;
    sol.prefs = prefs;
    sol.fiscal = fiscal;
    sol.diag.residual_norm = best.residual_inf;
    sol.diag.iterations = best.iterations;
    sol.diag.path = best.path;
    sol.diag.boundary_hit = best.boundary;
    sol.diag.closure_iterations = closure_iterations;

    const EquilibriumState s = sol.state();
    if (s.labor.e[0] + s.labor.e[2] <= 0.0 || s.labor.e[1] + s.labor.e[3] <= 0.0)
        throw degenerate_economy("zero employment in a skill market at the solution");
    sol.pi_hN = s.labor.pi_hN;
    sol.pi_lN = s.labor.pi_lN;
    sol.values = compute_values(s, calib, est, prefs, sol.fiscal);
    sol.accounts =
        government_accounts(s, calib, sol.fiscal, est.x_h, est.x_l, prefs.zeta);

    // optional randomized restarts to detect equilibrium multiplicity
    if (config.multi_start > 1) {
        std::mt19937_64 gen(config.seed);
        const ModelSlice ms{calib, est, prefs, sol.fiscal};
        for (int i = 1; i < config.multi_start; ++i) {
            const double th0 = std::exp(uniform(gen, std::log(1e-3), std::log(1e3)));
            const double tl0 = std::exp(uniform(gen, std::log(1e-3), std::log(1e3)));
            InnerPoint ip;
            try {
                ip = inner_given_theta(ms, th0, tl0);
            } catch (const error&) {
                continue;
            }
            const NewtonOutcome n = newton17(ms, pack(ip), config);
            if (!n.converged) continue;
            double dist = 0.0;
            for (int k = 0; k < 17; ++k)
                dist = std::max(dist, std::abs(n.y.v[k] - sol.y.v[k]) /
                                          std::max({1.0, std::abs(n.y.v[k]),
                                                    std::abs(sol.y.v[k])}));
            if (dist > 1e-6) {
                sol.diag.multiple_equilibria = true;
                sol.diag.alternates.push_back(n.y.v);
            }
        }
    }
    return sol;
}

} // namespace migsm
