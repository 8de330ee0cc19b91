#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "migsm/calibration.hpp"
#include "migsm/counterfactual.hpp"
#include "migsm/equilibrium.hpp"
#include "migsm/estimation.hpp"
#include "migsm/io.hpp"

namespace py = pybind11;
using namespace migsm;

namespace {

py::dict solution_to_dict(const EquilibriumSolution& s) {
    py::dict d;
    py::dict unknowns;
    for (int i = 0; i < UnknownVector::n; ++i)
        unknowns[UnknownVector::names()[i].c_str()] = s.y.v[i];
    d["unknowns"] = unknowns;
    d["pi_hN"] = s.pi_hN;
    d["pi_lN"] = s.pi_lN;
    d["g_h"] = s.fiscal.g_h;
    d["g_l"] = s.fiscal.g_l;
    py::dict acc;
    acc["DT"] = s.accounts.DT;
    acc["IT"] = s.accounts.IT;
    acc["TGE"] = s.accounts.TGE;
    acc["nu"] = s.accounts.nu;
    acc["GVA"] = s.accounts.GVA;
    acc["transfers"] = s.accounts.transfers;
    d["accounts"] = acc;
    py::dict vals;
    vals["W_u"] = s.values.W_u;
    vals["W_e"] = s.values.W_e;
    vals["J"] = s.values.J;
    vals["V"] = s.values.V;
    d["values"] = vals;
    py::dict diag;
    diag["residual_norm"] = s.diag.residual_norm;
    diag["iterations"] = s.diag.iterations;
    diag["path"] = s.diag.path;
    diag["closure_iterations"] = s.diag.closure_iterations;
    diag["multiple_equilibria"] = s.diag.multiple_equilibria;
    d["diagnostics"] = diag;
    return d;
}

py::dict report_to_dict(const CounterfactualReport& r) {
    py::dict d;
    d["gdp_pct"] = r.gdp_pct;
    d["gdp_per_worker_pct"] = r.gdp_per_worker_pct;
    d["DT_pct"] = r.DT_pct;
    d["IT_pct"] = r.IT_pct;
    d["ssc_pct"] = r.ssc_pct;
    d["nu_pct"] = r.nu_pct;
    d["wage_pct"] = r.wage_pct;
    d["price_pct"] = r.price_pct;
    d["urate_abs"] = r.urate_abs;
    d["W_e_pct"] = r.W_e_pct;
    d["W_u_pct"] = r.W_u_pct;
    d["J_pct"] = r.J_pct;
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Two-good search-and-matching immigration equilibrium toolkit";
    m.attr("__version__") = "1.0.0";

    py::register_exception<migsm::error>(m, "ModelError");

    py::class_<CalibratedParameters>(m, "CalibratedParameters")
        .def(py::init<>())
        .def_readwrite("r", &CalibratedParameters::r)
        .def_readwrite("alpha", &CalibratedParameters::alpha)
        .def_readwrite("b", &CalibratedParameters::b)
        .def_readwrite("t_p", &CalibratedParameters::t_p)
        .def_readwrite("tau_tilde", &CalibratedParameters::tau_tilde)
        .def_readwrite("F", &CalibratedParameters::F)
        .def_readwrite("c", &CalibratedParameters::c)
        .def_readwrite("phi", &CalibratedParameters::phi)
        .def_readwrite("eta", &CalibratedParameters::eta)
        .def_readwrite("lambda_", &CalibratedParameters::lambda)
        .def_readwrite("delta", &CalibratedParameters::delta)
        .def_readwrite("sigma", &CalibratedParameters::sigma)
        .def_readwrite("chi", &CalibratedParameters::chi)
        .def_readwrite("IP", &CalibratedParameters::IP)
        .def_readwrite("ssc_wedge", &CalibratedParameters::ssc_wedge);

    py::class_<EstimatedParameters>(m, "EstimatedParameters")
        .def(py::init<>())
        .def_readwrite("beta", &EstimatedParameters::beta)
        .def_readwrite("gamma", &EstimatedParameters::gamma)
        .def_readwrite("x_h", &EstimatedParameters::x_h)
        .def_readwrite("x_l", &EstimatedParameters::x_l)
        .def_readwrite("t", &EstimatedParameters::t)
        .def_readwrite("kappa", &EstimatedParameters::kappa)
        .def_readwrite("W_FC_h", &EstimatedParameters::W_FC_h)
        .def_readwrite("W_FC_l", &EstimatedParameters::W_FC_l);

    py::class_<PreferenceConfig>(m, "PreferenceConfig")
        .def(py::init<>())
        .def_readwrite("rho", &PreferenceConfig::rho)
        .def_readwrite("gamma", &PreferenceConfig::gamma)
        .def_readwrite("iota", &PreferenceConfig::iota)
        .def_readwrite("zeta", &PreferenceConfig::zeta);

    py::class_<SolverConfig> sc(m, "SolverConfig");
    sc.def(py::init<>())
        .def_readwrite("tolerance", &SolverConfig::tolerance)
        .def_readwrite("max_iterations", &SolverConfig::max_iterations)
        .def_readwrite("strategy", &SolverConfig::strategy)
        .def_readwrite("multi_start", &SolverConfig::multi_start)
        .def_readwrite("seed", &SolverConfig::seed)
        .def_readwrite("balance_budget", &SolverConfig::balance_budget)
        .def_readwrite("g_h", &SolverConfig::g_h)
        .def_readwrite("g_l", &SolverConfig::g_l);
    py::enum_<SolverConfig::Strategy>(sc, "Strategy")
        .value("newton", SolverConfig::Strategy::newton)
        .value("fixed_point", SolverConfig::Strategy::fixed_point)
        .value("hybrid", SolverConfig::Strategy::hybrid);

    py::class_<Scenario> scen(m, "Scenario");
    scen.def(py::init<>())
        .def_readwrite("kind", &Scenario::kind)
        .def_readwrite("dsigma", &Scenario::dsigma)
        .def_readwrite("dIP", &Scenario::dIP);
    py::enum_<Scenario::Kind>(scen, "Kind")
        .value("remove_all_nonnatives", Scenario::Kind::remove_all_nonnatives)
        .value("stock_shock", Scenario::Kind::stock_shock);

    m.def(
        "solve",
        [](const CalibratedParameters& calib, const EstimatedParameters& est,
           const PreferenceConfig& prefs, const SolverConfig& solver) {
            return solution_to_dict(solve_equilibrium(calib, est, prefs, solver));
        },
        py::arg("calib"), py::arg("est"), py::arg("prefs") = PreferenceConfig{},
        py::arg("solver") = SolverConfig{},
        "Solve the 17-unknown steady state; returns a nested dict.");

    m.def(
        "verify",
        [](const CalibratedParameters& calib, const EstimatedParameters& est,
           const PreferenceConfig& prefs, const SolverConfig& solver) {
            EquilibriumSolution s = solve_equilibrium(calib, est, prefs, solver);
            VerificationReport v = verify_solution(s);
            py::dict d;
            d["residual_inf"] = v.residual_inf;
            d["flow_balance_max"] = v.flow_balance_max;
            d["free_entry_max"] = v.free_entry_max;
            d["budget_gap_rel"] = v.budget_gap_rel;
            d["clearing_h"] = v.clearing_h;
            d["clearing_l"] = v.clearing_l;
            d["ok"] = v.ok();
            return d;
        },
        py::arg("calib"), py::arg("est"), py::arg("prefs") = PreferenceConfig{},
        py::arg("solver") = SolverConfig{},
        "Solve, then re-verify every equilibrium identity from scratch.");

    m.def(
        "simulated_moments",
        [](const CalibratedParameters& calib, const EstimatedParameters& est,
           const PreferenceConfig& prefs, const SolverConfig& solver) {
            MomentVector mv = simulated_moments(calib, est, prefs, solver);
            py::dict d;
            for (int i = 0; i < MomentVector::n; ++i)
                d[MomentVector::names()[i].c_str()] = mv[i];
            return d;
        },
        py::arg("calib"), py::arg("est"), py::arg("prefs") = PreferenceConfig{},
        py::arg("solver") = SolverConfig{});

    m.def(
        "estimate",
        [](const std::map<std::string, double>& target, const CalibratedParameters& calib,
           const PreferenceConfig& prefs, int multi_start, std::uint64_t seed) {
            MomentVector mv;
            for (int i = 0; i < MomentVector::n; ++i) {
                auto it = target.find(MomentVector::names()[i]);
                if (it == target.end()) throw missing_field(MomentVector::names()[i]);
                mv[i] = it->second;
            }
            EstimationConfig cfg;
            cfg.multi_start = multi_start;
            cfg.seed = seed;
            EstimateResult res = estimate(mv, calib, prefs, cfg);
            py::dict d;
            py::dict omega;
            auto a = res.omega_hat.to_array();
            for (int i = 0; i < EstimatedParameters::n_params; ++i)
                omega[EstimatedParameters::names()[i].c_str()] = a[i];
            d["omega_hat"] = omega;
            d["objective"] = res.objective;
            d["boundary_flagged"] = res.boundary_flagged;
            d["jacobian_singular_values"] = res.jacobian_singular_values;
            return d;
        },
        py::arg("target"), py::arg("calib"), py::arg("prefs") = PreferenceConfig{},
        py::arg("multi_start") = 16, py::arg("seed") = 0,
        "Moment-matching estimation; target maps moment names to values.");

    m.def(
        "run_scenario",
        [](const CalibratedParameters& calib, const EstimatedParameters& est,
           const PreferenceConfig& prefs, const Scenario& scenario, const SolverConfig& solver) {
            return report_to_dict(run_scenario({calib, est, prefs, solver}, scenario));
        },
        py::arg("calib"), py::arg("est"), py::arg("prefs"), py::arg("scenario"),
        py::arg("solver") = SolverConfig{},
        "Baseline vs counterfactual percentage and absolute deltas.");

    m.def("aggregate_elasticity", &aggregate_elasticity, py::arg("dw_h_pct"),
          py::arg("dw_l_pct"), py::arg("dsigma_h_pct"), py::arg("dsigma_l_pct"));

    m.def(
        "shimer_rates",
        [](double u_t, double u_next, double u_s_next, double l_t) {
            ShimerRates r = shimer_rates({u_t, u_next, u_s_next, l_t});
            py::dict d;
            d["Q"] = r.Q;
            d["Delta"] = r.Delta;
            d["q"] = r.q;
            d["delta"] = r.delta;
            return d;
        },
        py::arg("u_t"), py::arg("u_next"), py::arg("u_s_next"), py::arg("l_t"));

    m.def("hp_filter", &hp_filter, py::arg("series"), py::arg("lambda_hp") = 100.0);

    m.def(
        "firing_cost",
        [](double p_f, double p_s, double p_w, double p_a, double n_fd, double n_a, double ss,
           double pp, double sp, double lc, double fornero_flag, double wage_to_va) {
            FiringCostInputs in;
            in.p_f = p_f; in.p_s = p_s; in.p_w = p_w; in.p_a = p_a;
            in.n_fd = n_fd; in.n_a = n_a; in.ss = ss; in.pp = pp;
            in.sp = sp; in.lc = lc; in.fornero_flag = fornero_flag;
            in.wage_to_va = wage_to_va;
            return firing_cost(in);
        },
        py::arg("p_f"), py::arg("p_s"), py::arg("p_w"), py::arg("p_a"), py::arg("n_fd"),
        py::arg("n_a"), py::arg("ss"), py::arg("pp"), py::arg("sp"), py::arg("lc"),
        py::arg("fornero_flag"), py::arg("wage_to_va"));

    m.def(
        "tax_subsidy",
        [](double w_bar, double t_avg, double t_marginal) {
            TaxSubsidy ts = tax_subsidy(w_bar, t_avg, t_marginal);
            return py::make_tuple(ts.tau, ts.no_tax_threshold);
        },
        py::arg("w_bar"), py::arg("t_avg"), py::arg("t_marginal"));

    m.def("run_pipeline",
          [](const std::string& manifest_path) {
              PipelineResult r = run_pipeline(load_manifest(manifest_path));
              py::dict d;
              d["ok"] = r.ok();
              d["years_completed"] = r.years_completed;
              d["summary_path"] = r.summary_path;
              py::list fails;
              for (const auto& f : r.failures) {
                  py::dict fd;
                  fd["year"] = f.year;
                  fd["stage"] = f.stage;
                  fd["message"] = f.message;
                  fails.append(fd);
              }
              d["failures"] = fails;
              return d;
          },
          py::arg("manifest_path"), "Run the full report pipeline from a manifest file.");
}
