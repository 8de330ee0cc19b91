#include "migsm/estimation.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>

#include "migsm/rng.hpp"

namespace migsm {

namespace {

constexpr double k_objective_penalty = 1e10;
constexpr int n_p = EstimatedParameters::n_params;
constexpr int n_m = MomentVector::n;

using ParamArray = std::array<double, n_p>;

Eigen::Map<const Eigen::Matrix<double, n_m, n_m, Eigen::RowMajor>>
weight_view(const std::vector<double>& W) {
    return Eigen::Map<const Eigen::Matrix<double, n_m, n_m, Eigen::RowMajor>>(
        W.data());
}

void check_weight_matrix(const std::vector<double>& W) {
    if (W.empty()) return;
    if (W.size() != static_cast<std::size_t>(n_m) * n_m)
        throw validation_error("W", "weighting matrix must be 17x17");
    const auto M = weight_view(W);
    for (int i = 0; i < n_m; ++i)
        for (int j = 0; j < i; ++j)
            if (std::abs(M(i, j) - M(j, i)) >
                1e-12 * std::max(1.0, std::abs(M(i, j))))
                throw validation_error("W", "weighting matrix must be symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(M);
    if (llt.info() != Eigen::Success)
        throw validation_error("W", "weighting matrix must be positive-definite");
}

} // namespace

const std::array<std::string, MomentVector::n>& MomentVector::names() {
    static const std::array<std::string, n> v = {
        "net_wage_hN", "net_wage_lN", "net_wage_hI", "net_wage_lI",
        "jfr_hN",      "jfr_lN",      "jfr_hI",      "jfr_lI",
        "urate_hN",    "urate_lN",    "urate_hI",    "urate_lI",
        "labour_share", "gdp",        "gdp_per_worker", "pi_hN",   "pi_lN"};
    return v;
}

void MomentVector::validate() const {
    const auto& nm = names();
    for (int k = 0; k < 4; ++k) {
        detail::require(m[k] > 0.0 && std::isfinite(m[k]), nm[k],
                        "net wage must be positive");
        detail::require(m[4 + k] > 0.0 && m[4 + k] < 1.0, nm[4 + k],
                        "job-finding rate must lie in (0,1)");
        detail::require(m[8 + k] > 0.0 && m[8 + k] < 1.0, nm[8 + k],
                        "unemployment rate must lie in (0,1)");
    }
    detail::require(m[12] > 0.0 && m[12] < 1.0, nm[12],
                    "labour share must lie in (0,1)");
    detail::require(m[13] > 0.0 && std::isfinite(m[13]), nm[13],
                    "GDP must be positive");
    detail::require(m[14] > 0.0 && std::isfinite(m[14]), nm[14],
                    "GDP per worker must be positive");
    detail::require(m[15] > 0.0 && m[15] <= 1.0, nm[15],
                    "native unemployment share must lie in (0,1]");
    detail::require(m[16] > 0.0 && m[16] <= 1.0, nm[16],
                    "native unemployment share must lie in (0,1]");
}

MomentVector moments_from_solution(const EquilibriumSolution& sol) {
    MomentVector mv;
    const EquilibriumState s = sol.state();
    double employment = 0.0, wage_bill = 0.0;
    for (int k = 0; k < 4; ++k) {
        mv.net_wage(k) =
            (1.0 - sol.fiscal.t) * (s.labor.w[k] + sol.calib.tau_tilde);
        mv.job_finding(k) =
            sol.est.kappa[k] *
            std::pow(s.labor.theta(market_of(k)), 1.0 - sol.calib.alpha);
        mv.unemployment_rate(k) = s.labor.u[k] / (s.labor.e[k] + s.labor.u[k]);
        employment += s.labor.e[k];
        wage_bill += s.labor.w[k] * s.labor.e[k];
    }
    mv.labour_share() = wage_bill / sol.accounts.GVA;
    mv.gdp() = sol.accounts.GVA / (1.0 - sol.fiscal.t_p);
    mv.gdp_per_worker() = mv.gdp() / employment;
    mv.pi_hN() = sol.pi_hN;
    mv.pi_lN() = sol.pi_lN;
    return mv;
}

MomentVector simulated_moments(const CalibratedParameters& calibrated,
                               const EstimatedParameters& estimated,
                               const PreferenceConfig& prefs,
                               const SolverConfig& solver) {
    return moments_from_solution(
        solve_equilibrium(calibrated, estimated, prefs, solver));
}

double msm_objective(const EstimatedParameters& omega, const MomentVector& target,
                     const std::vector<double>& W,
                     const CalibratedParameters& calibrated,
                     const PreferenceConfig& prefs, const SolverConfig& solver,
                     bool* penalized) {
    check_weight_matrix(W);
    if (penalized) *penalized = false;
    MomentVector sim;
    try {
        sim = simulated_moments(calibrated, omega, prefs, solver);
    } catch (const error&) {
        if (penalized) *penalized = true;
        return k_objective_penalty;
    }
    Eigen::Matrix<double, n_m, 1> d;
    for (int i = 0; i < n_m; ++i) d(i) = sim[i] - target[i];
    if (!d.allFinite()) {
        if (penalized) *penalized = true;
        return k_objective_penalty;
    }
    if (W.empty()) return d.squaredNorm();
    return d.dot(weight_view(W) * d);
}

void EstimationConfig::validate() const {
    check_weight_matrix(W);
    detail::require(multi_start >= 1, "multi_start", "must be at least 1");
    detail::require(simplex_max_iterations >= 1, "simplex_max_iterations",
                    "must be at least 1");
    for (int j = 0; j < n_p; ++j)
        detail::require(lower[j] < upper[j], EstimatedParameters::names()[j],
                        "lower bound must be below upper bound");
}

namespace {

struct BoxObjective {
    const MomentVector& target;
    const std::vector<double>& W;
    const CalibratedParameters& calib;
    const PreferenceConfig& prefs;
    const EstimationConfig& cfg;
    int evaluations = 0;

    ParamArray clamp(const ParamArray& p) const {
        ParamArray c = p;
        for (int j = 0; j < n_p; ++j)
            c[j] = std::clamp(c[j], cfg.lower[j], cfg.upper[j]);
        return c;
    }

    // Out-of-box points are evaluated at their projection plus a smooth
    // penalty, so boundary optima stay exactly representable.
    double operator()(const ParamArray& p) {
        const ParamArray c = clamp(p);
        double pen = 0.0;
        for (int j = 0; j < n_p; ++j) {
            const double d = (p[j] - c[j]) / (cfg.upper[j] - cfg.lower[j]);
            pen += 1e8 * d * d;
        }
        ++evaluations;
        return msm_objective(EstimatedParameters::from_array(c), target, W, calib,
                             prefs, cfg.solver) +
               pen;
    }
};

struct SimplexResult {
    ParamArray x{};
    double f = std::numeric_limits<double>::infinity();
    int evaluations = 0;
};

SimplexResult nelder_mead(BoxObjective& obj, const ParamArray& x0,
                          const EstimationConfig& cfg) {
    constexpr int n = n_p;
    std::array<ParamArray, n + 1> xs;
    std::array<double, n + 1> fs;
    xs[0] = obj.clamp(x0);
    fs[0] = obj(xs[0]);
    for (int j = 0; j < n; ++j) {
        xs[j + 1] = xs[0];
        double step = 0.05 * (cfg.upper[j] - cfg.lower[j]);
        if (xs[0][j] + step > cfg.upper[j]) step = -step;
        xs[j + 1][j] += step;
        fs[j + 1] = obj(xs[j + 1]);
    }
    std::array<int, n + 1> order;
    std::iota(order.begin(), order.end(), 0);

    for (int it = 0; it < cfg.simplex_max_iterations; ++it) {
        std::sort(order.begin(), order.end(),
                  [&](int a, int b) { return fs[a] < fs[b]; });
        const int best = order[0], worst = order[n], second = order[n - 1];
        if (fs[worst] - fs[best] <=
            cfg.simplex_tolerance * (1.0 + std::abs(fs[best])))
            break;

        ParamArray centroid{};
        for (int i = 0; i <= n; ++i) {
            if (i == worst) continue;
            for (int j = 0; j < n; ++j) centroid[j] += xs[i][j] / n;
        }
        auto blend = [&](double coef) {
            ParamArray p;
            for (int j = 0; j < n; ++j)
                p[j] = centroid[j] + coef * (xs[worst][j] - centroid[j]);
            return p;
        };

        const ParamArray xr = blend(-1.0);
        const double fr = obj(xr);
        if (fr < fs[order[0]]) {
            const ParamArray xe = blend(-2.0);
            const double fe = obj(xe);
            if (fe < fr) {
                xs[worst] = xe;
                fs[worst] = fe;
            } else {
                xs[worst] = xr;
                fs[worst] = fr;
            }
            continue;
        }
        if (fr < fs[second]) {
            xs[worst] = xr;
            fs[worst] = fr;
            continue;
        }
        const ParamArray xc = blend(fr < fs[worst] ? -0.5 : 0.5);
        const double fc = obj(xc);
        if (fc < std::min(fr, fs[worst])) {
            xs[worst] = xc;
            fs[worst] = fc;
            continue;
        }
        for (int i = 0; i <= n; ++i) {
            if (i == best) continue;
            for (int j = 0; j < n; ++j)
                xs[i][j] = xs[best][j] + 0.5 * (xs[i][j] - xs[best][j]);
            fs[i] = obj(xs[i]);
        }
    }
    SimplexResult out;
    const int best =
        static_cast<int>(std::min_element(fs.begin(), fs.end()) - fs.begin());
    out.x = obj.clamp(xs[best]);
    out.f = fs[best];
    out.evaluations = obj.evaluations;
    return out;
}

// Damped Gauss-Newton on the weighted moment residuals with a
// finite-difference Jacobian, projected into the box.
void polish_gauss_newton(BoxObjective& obj, ParamArray& x, double& f,
                         const MomentVector& target,
                         const CalibratedParameters& calib,
                         const PreferenceConfig& prefs,
                         const EstimationConfig& cfg) {
    Eigen::MatrixXd Lt = Eigen::MatrixXd::Identity(n_m, n_m);
    if (!cfg.W.empty()) {
        Eigen::LLT<Eigen::MatrixXd> llt(weight_view(cfg.W));
        Lt = llt.matrixL().transpose();
    }
    auto residuals = [&](const ParamArray& p, Eigen::VectorXd& r) {
        MomentVector sim;
        try {
            sim = simulated_moments(calib, EstimatedParameters::from_array(p),
                                    prefs, cfg.solver);
        } catch (const error&) {
            return false;
        }
        ++obj.evaluations;
        Eigen::VectorXd d(n_m);
        for (int i = 0; i < n_m; ++i) d(i) = sim[i] - target[i];
        if (!d.allFinite()) return false;
        r = Lt * d;
        return true;
    };

    Eigen::VectorXd r(n_m);
    if (!residuals(x, r)) return;
    f = r.squaredNorm();
    double mu = 1e-6;
    int stalled = 0;
    for (int it = 0; it < cfg.polish_max_iterations && stalled < 2; ++it) {
        Eigen::MatrixXd J(n_m, n_p);
        bool jac_ok = true;
        for (int j = 0; j < n_p && jac_ok; ++j) {
            const double h =
                std::max(1e-7 * (cfg.upper[j] - cfg.lower[j]), 1e-10);
            ParamArray pp = x, pm = x;
            pp[j] = std::min(pp[j] + h, cfg.upper[j]);
            pm[j] = std::max(pm[j] - h, cfg.lower[j]);
            Eigen::VectorXd rp(n_m), rm(n_m);
            jac_ok = residuals(pp, rp) && residuals(pm, rm);
            if (jac_ok) J.col(j) = (rp - rm) / (pp[j] - pm[j]);
        }
        if (!jac_ok) return;
        const Eigen::MatrixXd JtJ = J.transpose() * J;
        const Eigen::VectorXd g = J.transpose() * r;
        if (g.lpNorm<Eigen::Infinity>() < 1e-16) break;
        bool accepted = false;
        for (int tries = 0; tries < 25; ++tries) {
            Eigen::MatrixXd A = JtJ;
            for (int j = 0; j < n_p; ++j)
                A(j, j) += mu * std::max(JtJ(j, j), 1e-12);
            const Eigen::VectorXd d = A.ldlt().solve(-g);
            ParamArray xn = x;
            for (int j = 0; j < n_p; ++j)
                xn[j] = std::clamp(x[j] + d(j), cfg.lower[j], cfg.upper[j]);
            Eigen::VectorXd rn(n_m);
            if (residuals(xn, rn) && rn.squaredNorm() < f) {
                const double f_new = rn.squaredNorm();
                stalled = (f - f_new <= cfg.polish_tolerance * std::max(1.0, f))
                              ? stalled + 1
                              : 0;
                x = xn;
                r = rn;
                f = f_new;
                mu = std::max(mu * 0.35, 1e-12);
                accepted = true;
                break;
            }
            mu *= 4.0;
        }
        if (!accepted) break;
    }
}

void coordinate_refine(BoxObjective& obj, ParamArray& x, double& f,
                       const EstimationConfig& cfg) {
    constexpr double inv_phi = 0.6180339887498949;
    for (int sweep = 0; sweep < cfg.coordinate_iterations; ++sweep) {
        for (int j = 0; j < n_p; ++j) {
            const double range = cfg.upper[j] - cfg.lower[j];
            double a = std::max(cfg.lower[j], x[j] - 0.1 * range);
            double b = std::min(cfg.upper[j], x[j] + 0.1 * range);
            auto at = [&](double v) {
                ParamArray p = x;
                p[j] = v;
                return std::pair<double, ParamArray>(obj(p), p);
            };
            double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
            double fc = at(c).first, fd = at(d).first;
            for (int it = 0; it < 40 && b - a > 1e-12 * range; ++it) {
                if (fc < fd) {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - inv_phi * (b - a);
                    fc = at(c).first;
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + inv_phi * (b - a);
                    fd = at(d).first;
                }
            }
            const double xj = 0.5 * (a + b);
            auto [fj, pj] = at(xj);
            if (fj < f) {
                x = pj;
                f = fj;
            }
        }
    }
}

} // namespace

EstimateResult estimate(const MomentVector& target,
                        const CalibratedParameters& calibrated,
                        const PreferenceConfig& prefs,
                        const EstimationConfig& config) {
    config.validate();
    for (int i = 0; i < n_m; ++i)
        detail::require(std::isfinite(target[i]), MomentVector::names()[i],
                        "target moment must be finite");

    const auto points =
        low_discrepancy_points(config.multi_start, n_p, config.seed);
    auto run_start = [&](int i) {
        ParamArray x0;
        for (int j = 0; j < n_p; ++j)
            x0[j] = config.lower[j] +
                    points[i][j] * (config.upper[j] - config.lower[j]);
        BoxObjective obj{target, config.W, calibrated, prefs, config};
        const SimplexResult sr = nelder_mead(obj, x0, config);
        StartOutcome out;
        out.omega = sr.x;
        out.objective = sr.f;
        out.evaluations = sr.evaluations;
        bool pen = false;
        msm_objective(EstimatedParameters::from_array(sr.x), target, config.W,
                      calibrated, prefs, config.solver, &pen);
        out.penalized = pen;
        return out;
    };

    EstimateResult res;
    res.starts.resize(config.multi_start);
    if (config.concurrent_starts && config.multi_start > 1) {
        std::vector<std::future<StartOutcome>> futs;
        futs.reserve(config.multi_start);
        for (int i = 0; i < config.multi_start; ++i)
            futs.push_back(std::async(std::launch::async, run_start, i));
        for (int i = 0; i < config.multi_start; ++i) res.starts[i] = futs[i].get();
    } else {
        for (int i = 0; i < config.multi_start; ++i) res.starts[i] = run_start(i);
    }

    std::vector<int> ranked;
    for (int i = 0; i < config.multi_start; ++i) {
        res.evaluations += res.starts[i].evaluations;
        if (!res.starts[i].penalized) ranked.push_back(i);
    }
    if (ranked.empty())
        throw all_starts_failed("no multi-start point produced a solvable economy");
    std::sort(ranked.begin(), ranked.end(), [&](int a, int b) {
        return res.starts[a].objective < res.starts[b].objective;
    });

    // The simplex stage only has to land in the right basin; polishing the
    // best few outcomes (not just the single best) makes the combination
    // robust to simplex stalls at local plateaus.
    BoxObjective obj{target, config.W, calibrated, prefs, config};
    ParamArray x = res.starts[ranked[0]].omega;
    double f = res.starts[ranked[0]].objective;
    if (config.polish) {
        const int n_polish = std::min<int>(static_cast<int>(ranked.size()), 6);
        for (int k = 0; k < n_polish; ++k) {
            ParamArray xk = res.starts[ranked[k]].omega;
            double fk = res.starts[ranked[k]].objective;
            polish_gauss_newton(obj, xk, fk, target, calibrated, prefs, config);
            if (fk < f) {
                x = xk;
                f = fk;
            }
        }
    }
    if (config.coordinate_pass) coordinate_refine(obj, x, f, config);
    res.evaluations += obj.evaluations;

    res.omega_hat = EstimatedParameters::from_array(x);
    res.objective = msm_objective(res.omega_hat, target, config.W, calibrated,
                                  prefs, config.solver);
    res.fitted = simulated_moments(calibrated, res.omega_hat, prefs, config.solver);
    for (int i = 0; i < n_m; ++i)
        res.moment_rel_errors[i] = std::abs(res.fitted[i] - target[i]) /
                                   std::max(std::abs(target[i]), 1e-12);
    for (int j = 0; j < n_p; ++j) {
        const double range = config.upper[j] - config.lower[j];
        res.at_lower[j] = x[j] - config.lower[j] <= 1e-8 * range;
        res.at_upper[j] = config.upper[j] - x[j] <= 1e-8 * range;
        res.boundary_flagged |= res.at_lower[j] || res.at_upper[j];
    }

    // Scaled moment-map Jacobian spectrum at the optimum: rows in relative
    // moment units, columns in box-relative parameter units.
    try {
        Eigen::MatrixXd J(n_m, n_p);
        for (int j = 0; j < n_p; ++j) {
            const double h = 1e-6 * (config.upper[j] - config.lower[j]);
            ParamArray pp = x, pm = x;
            pp[j] = std::min(pp[j] + h, config.upper[j]);
            pm[j] = std::max(pm[j] - h, config.lower[j]);
            const MomentVector pup = simulated_moments(
                calibrated, EstimatedParameters::from_array(pp), prefs,
                config.solver);
            const MomentVector pdn = simulated_moments(
                calibrated, EstimatedParameters::from_array(pm), prefs,
                config.solver);
            for (int i = 0; i < n_m; ++i)
                J(i, j) = (pup[i] - pdn[i]) / (pp[j] - pm[j]) *
                          (config.upper[j] - config.lower[j]) /
                          std::max(std::abs(target[i]), 1e-8);
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(
            J, Eigen::ComputeThinU | Eigen::ComputeThinV);
        for (int j = 0; j < n_p; ++j)
            res.jacobian_singular_values[j] = svd.singularValues()(j);
        for (int j = 0; j < n_p; ++j)
            res.null_direction[j] = svd.matrixV()(j, n_p - 1);
    } catch (const error&) {
        // diagnostics are best-effort; a failed perturbed solve leaves zeros
    }
    return res;
}

} // namespace migsm
