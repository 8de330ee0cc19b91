// Command-line front end: calibrate raw inputs, estimate parameters, solve
// equilibria, run counterfactual scenarios, and drive full report pipelines.
// Set MIGSM_LOG=info or MIGSM_LOG=debug for progress output on stderr.

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "migsm/calibration.hpp"
#include "migsm/counterfactual.hpp"
#include "migsm/equilibrium.hpp"
#include "migsm/estimation.hpp"
#include "migsm/io.hpp"
#include "migsm/model_core.hpp"

using json = nlohmann::ordered_json;
using namespace migsm;

namespace {

EstimatedParameters params_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open for reading: " + path);
    json j = json::parse(in, nullptr, true, true);
    const json* src = nullptr;
    if (j.contains("omega_hat"))
        src = &j["omega_hat"];
    else if (j.contains("estimated"))
        src = &j["estimated"];
    else
        throw io_error(path + ": expected an estimate (omega_hat) or solution (estimated) file");
    std::array<double, EstimatedParameters::n_params> a{};
    for (int i = 0; i < EstimatedParameters::n_params; ++i) {
        const std::string& name = EstimatedParameters::names()[i];
        if (!src->contains(name)) throw missing_field(name);
        a[i] = (*src)[name].get<double>();
    }
    return EstimatedParameters::from_array(a);
}

// A small solvable economy used by the self test.
BaselineParams demo_baseline() {
    BaselineParams b;
    b.calib.r = 0.01;
    b.calib.alpha = 0.4;
    b.calib.b = 0.65;
    b.calib.t_p = 0.15;
    b.calib.tau_tilde = 0.17;
    b.calib.F = 1.5;
    b.calib.c = 5.0;
    b.calib.phi = 0.5;
    b.calib.eta = 0.007;
    b.calib.lambda = 0.009;
    b.calib.delta = {0.005, 0.009, 0.008, 0.015};
    b.calib.sigma = {6.0, 15.0, 0.35, 3.4};
    b.calib.chi = 5.0;
    b.calib.IP = 31.0;
    b.est.beta = 0.13;
    b.est.gamma = 0.335;
    b.est.x_h = 7.5;
    b.est.x_l = 4.2;
    b.est.t = 0.505;
    b.est.kappa = {0.55, 0.50, 0.45, 0.60};
    b.est.W_FC_h = 164.0;
    b.est.W_FC_l = 86.0;
    return b;
}

int run_selftest() {
    int failures = 0;
    auto check = [&](const char* name, bool ok) {
        std::printf("[%s] %s\n", ok ? " ok " : "FAIL", name);
        if (!ok) ++failures;
    };

    BaselineParams base = demo_baseline();
    try {
        EquilibriumSolution sol = solve_equilibrium(base.calib, base.est, base.prefs, base.solver);
        check("equilibrium solve and identity verification", verify_solution(sol).ok());

        SolverConfig newton_cfg = base.solver;
        newton_cfg.strategy = SolverConfig::Strategy::newton;
        SolverConfig nested_cfg = base.solver;
        nested_cfg.strategy = SolverConfig::Strategy::fixed_point;
        EquilibriumSolution a = solve_equilibrium(base.calib, base.est, base.prefs, newton_cfg);
        EquilibriumSolution c = solve_equilibrium(base.calib, base.est, base.prefs, nested_cfg);
        double dmax = 0.0;
        for (int i = 0; i < UnknownVector::n; ++i)
            dmax = std::max(dmax, std::abs(a.y.v[i] - c.y.v[i]) /
                                      std::max(1.0, std::abs(c.y.v[i])));
        check("direct and nested solvers agree", dmax < 1e-8);

        Scenario null_shock;
        CounterfactualReport rep = run_scenario(base, null_shock);
        bool zeros = std::abs(rep.gdp_pct) < 1e-7 && std::abs(rep.nu_pct) < 1e-7;
        for (int k = 0; k < 4; ++k) zeros = zeros && std::abs(rep.wage_pct[k]) < 1e-7;
        check("null scenario leaves the economy unchanged", zeros);
    } catch (const std::exception& e) {
        std::printf("[FAIL] equilibrium block: %s\n", e.what());
        ++failures;
    }

    try {
        ShimerRates sr = shimer_rates({0.10, 0.1208569164302021, 0.040856916430202089, 1.0});
        check("worker-flow recovery round trip",
              std::abs(sr.Q - 0.2) < 1e-10 && std::abs(sr.Delta - 0.05) < 1e-10);
    } catch (const std::exception& e) {
        std::printf("[FAIL] worker-flow recovery: %s\n", e.what());
        ++failures;
    }

    try {
        TaxSubsidy ts = tax_subsidy(1.0, 0.129, 0.309);
        double tau = 0.67 * 1.0 * (0.309 - 0.129) / (1.0 - 0.309);
        check("tax subsidy closed form",
              std::abs(ts.tau - tau) < 1e-12 &&
                  std::abs(ts.no_tax_threshold - (1.0 - 0.309) * tau / 0.309) < 1e-12);
    } catch (const std::exception& e) {
        std::printf("[FAIL] tax subsidy: %s\n", e.what());
        ++failures;
    }

    try {
        PreferenceConfig cd;
        cd.gamma = 0.335;
        PreferenceConfig near = cd;
        near.rho = 1e-7;
        double a = price_index(1.3, 0.8, cd), b2 = price_index(1.3, 0.8, near);
        check("unit-elasticity preference limit", std::abs(a - b2) / a < 1e-5);
    } catch (const std::exception& e) {
        std::printf("[FAIL] preference limit: %s\n", e.what());
        ++failures;
    }

    std::printf("%s (%d failure%s)\n", failures == 0 ? "self test passed" : "self test FAILED",
                failures, failures == 1 ? "" : "s");
    return failures;
}

void write_scenario_outputs(const BaselineParams& base, const Scenario& scenario,
                            const std::vector<double>& epsilons, const std::string& out_dir) {
    std::vector<std::pair<double, CounterfactualReport>> sweep;
    if (epsilons.empty()) {
        CounterfactualReport rep = run_scenario(base, scenario);
        write_report(rep, out_dir);
        sweep.emplace_back(base.prefs.epsilon(), std::move(rep));
    } else {
        sweep = epsilon_sweep(base, scenario, epsilons);
        for (const auto& [eps, rep] : sweep) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%g", eps);
            write_report(rep, out_dir + "/eps_" + buf);
        }
    }
    std::string series = write_sweep_series(sweep, out_dir);
    std::printf("wrote %s\n", series.c_str());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"migsm: search-and-matching immigration equilibrium toolkit"};
    app.require_subcommand(1);
    app.footer("Set MIGSM_LOG=info or MIGSM_LOG=debug for progress output.");

    std::string input, out, params_path, scenario_arg;
    std::vector<double> epsilons;
    std::uint64_t seed = 0;
    bool seed_given = false;
    int year = 0, starts = 0;
    double fixed_g = 0.0;
    bool g_given = false;

    auto* cal = app.add_subcommand("calibrate", "Derive model parameters from raw inputs");
    cal->add_option("--input", input, "raw calibration CSV (field,value)")->required();
    cal->add_option("--out", out, "output JSON path (default: stdout)");

    auto* est = app.add_subcommand("estimate", "Match moments by multi-start minimization");
    est->add_option("--input", input, "year input CSV")->required();
    est->add_option("--out", out, "output JSON path (default: estimate.json)");
    est->add_option("--seed", seed, "estimation seed");
    est->add_option("--starts", starts, "number of multi-start points");

    auto* sol = app.add_subcommand("solve", "Solve the steady-state equilibrium");
    sol->add_option("--input", input, "year input CSV")->required();
    sol->add_option("--params", params_path, "estimate.json or solution.json with parameters");
    sol->add_option("--out", out, "output JSON path (default: solution.json)");
    sol->add_option("--seed", seed, "solver seed (randomized extra starts)");
    sol->add_option("--g", fixed_g, "fix the expenditure share instead of balancing the budget")
        ->check(CLI::Range(0.0, 1.0));

    auto* cf = app.add_subcommand("counterfactual", "Re-solve under a scenario and report deltas");
    cf->add_option("--input", input, "baseline solution.json")->required();
    cf->add_option("--scenario", scenario_arg,
                   "'remove_all_nonnatives' or a scenario JSON path")
        ->required();
    cf->add_option("--epsilon", epsilons, "substitution elasticities to sweep (repeatable)");
    cf->add_option("--out", out, "output directory (default: counterfactual_out)");

    auto* rep = app.add_subcommand("report", "Run the full manifest pipeline");
    rep->add_option("--input", input, "run manifest JSON")->required();
    rep->add_option("--out", out, "override the manifest output directory");
    rep->add_option("--year", year, "process only this year");
    rep->add_option("--seed", seed, "override the manifest seed");

    auto* st = app.add_subcommand("selftest", "Run built-in invariant checks");

    CLI11_PARSE(app, argc, argv);
    seed_given = est->count("--seed") > 0 || rep->count("--seed") > 0 || sol->count("--seed") > 0;
    g_given = sol->count("--g") > 0;

    try {
        if (*cal) {
            auto rows = read_csv(input);
            std::map<std::string, double> raw;
            size_t start_row = !rows.empty() && rows[0][0] == "field" ? 1 : 0;
            for (size_t i = start_row; i < rows.size(); ++i)
                if (rows[i].size() >= 2) raw[rows[i][0]] = std::stod(rows[i][1]);
            if (auto it = raw.find("schema_version"); it != raw.end()) {
                if (static_cast<int>(it->second) != k_schema_version)
                    throw schema_version_mismatch(static_cast<int>(it->second), k_schema_version);
            }
            json j;
            j["schema_version"] = k_schema_version;
            json derived;
            for (const auto& [k, v] : calibrate_from_raw(raw)) derived[k] = v;
            j["derived"] = derived;
            if (out.empty()) {
                std::printf("%s\n", j.dump(2).c_str());
            } else {
                std::ofstream f(out);
                if (!f) throw io_error("cannot open for writing: " + out);
                f << j.dump(2) << "\n";
                std::printf("wrote %s\n", out.c_str());
            }
        } else if (*est) {
            YearInputBundle b = load_year_inputs(input);
            EstimationConfig cfg;
            if (seed_given) cfg.seed = seed;
            if (starts > 0) cfg.multi_start = starts;
            EstimateResult res = estimate(b.moments, b.calib, PreferenceConfig{}, cfg);
            if (out.empty()) out = "estimate.json";
            write_estimate(res, out);
            std::printf("wrote %s (objective %.6g)\n", out.c_str(), res.objective);
        } else if (*sol) {
            YearInputBundle b = load_year_inputs(input);
            EstimatedParameters omega =
                params_path.empty() ? EstimatedParameters{} : params_from_file(params_path);
            SolverConfig cfg;
            if (seed_given) {
                cfg.seed = seed;
                cfg.multi_start = 8;
            }
            if (g_given) {
                cfg.balance_budget = false;
                cfg.g_h = cfg.g_l = fixed_g;
            } else if (b.has_g) {
                cfg.g_h = cfg.g_l = b.g; // warm start for the budget closure
            }
            EquilibriumSolution s = solve_equilibrium(b.calib, omega, PreferenceConfig{}, cfg);
            if (out.empty()) out = "solution.json";
            write_solution(s, out);
            std::printf("wrote %s (residual %.3g, %s)\n", out.c_str(), s.diag.residual_norm,
                        s.diag.path.c_str());
        } else if (*cf) {
            EquilibriumSolution s = read_solution(input);
            BaselineParams base{s.calib, s.est, s.prefs, SolverConfig{}};
            Scenario scenario;
            if (scenario_arg == "remove_all_nonnatives" || scenario_arg == "remove") {
                scenario.kind = Scenario::Kind::remove_all_nonnatives;
            } else {
                scenario = load_scenario(scenario_arg).scenario;
            }
            if (out.empty()) out = "counterfactual_out";
            write_scenario_outputs(base, scenario, epsilons, out);
        } else if (*rep) {
            RunManifest m = load_manifest(input);
            if (!out.empty()) m.output_dir = out;
            if (seed_given) m.seed = seed;
            if (year != 0) m.year_filter = year;
            PipelineResult r = run_pipeline(m);
            for (const auto& f : r.failures)
                std::fprintf(stderr, "year %d, stage %s: %s\n", f.year, f.stage.c_str(),
                             f.message.c_str());
            std::printf("wrote %s (%zu year%s, %zu failure%s)\n", r.summary_path.c_str(),
                        r.years_completed.size(), r.years_completed.size() == 1 ? "" : "s",
                        r.failures.size(), r.failures.size() == 1 ? "" : "s");
            return r.ok() ? 0 : 1;
        } else if (*st) {
            return run_selftest();
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
