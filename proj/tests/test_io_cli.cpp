// File formats, manifest pipeline, and command-line front end. Table layouts
// and JSON schemas are frozen here so downstream consumers can rely on them;
// numeric fields are written at 17 significant digits and must round trip
// bit for bit.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "migsm/counterfactual.hpp"
#include "migsm/equilibrium.hpp"
#include "migsm/errors.hpp"
#include "migsm/estimation.hpp"
#include "migsm/io.hpp"
#include "support/fixtures.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace migsm;

namespace {

std::string slurp_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), "cannot open " << path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void spill_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    REQUIRE_MESSAGE(out.good(), "cannot write " << path);
    out << text;
}

// Fresh scratch tree per run; removed up front so stale files from an
// earlier run cannot mask a missing write.
fs::path scratch_root() {
    static const fs::path root = [] {
        fs::path p = fs::temp_directory_path() / "migsm_io_cli_tests";
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return root;
}

fs::path scratch_dir(const std::string& name) {
    fs::path p = scratch_root() / name;
    fs::create_directories(p);
    return p;
}

std::string year_csv_path() {
    return fixtures::data_dir() + "/years/italy_like_2017.csv";
}

// Copy of the demo year CSV with the row for `field` dropped, or replaced
// when `replacement_line` is non-empty.
std::string mutated_year_csv(const std::string& name, const std::string& field,
                             const std::string& replacement_line = "") {
    std::istringstream in(slurp_file(year_csv_path()));
    std::ostringstream out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind(field + ",", 0) == 0) {
            if (!replacement_line.empty()) out << replacement_line << '\n';
        } else {
            out << line << '\n';
        }
    }
    std::string path = (scratch_dir("years") / name).string();
    spill_file(path, out.str());
    return path;
}

std::string appended_year_csv(const std::string& name, const std::string& extra_line) {
    std::string path = (scratch_dir("years") / name).string();
    spill_file(path, slurp_file(year_csv_path()) + extra_line + "\n");
    return path;
}

std::vector<std::string> first_column(const std::string& csv_text) {
    std::istringstream in(csv_text);
    std::vector<std::string> names;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) names.push_back(line.substr(0, line.find(',')));
    return names;
}

std::vector<double> second_column(const std::string& csv_text) {
    std::istringstream in(csv_text);
    std::vector<double> values;
    std::string line;
    std::getline(in, line); // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        values.push_back(std::stod(line.substr(line.find(',') + 1)));
    }
    return values;
}

int run_cli(const std::string& args) {
    std::string cmd = fixtures::cli_path() + " " + args + " > /dev/null 2>&1";
    return std::system(cmd.c_str());
}

json parse_json_file(const std::string& path) { return json::parse(slurp_file(path)); }

// Row order of table_main_variables.csv: aggregates first, then per-class
// blocks grouped by skill (natives before non-natives within a skill),
// then the two goods prices.
const std::vector<std::string> k_expected_main_rows = {
    "Real GDP per worker",
    "Public goods",
    "Wages of high-skilled natives",
    "Wages of high-skilled non-natives",
    "Wages of low-skilled natives",
    "Wages of low-skilled non-natives",
    "Unemployment rate of high-skilled natives (absolute change)",
    "Unemployment rate of high-skilled non-natives (absolute change)",
    "Unemployment rate of low-skilled natives (absolute change)",
    "Unemployment rate of low-skilled non-natives (absolute change)",
    "Lifetime utility of employed high-skilled natives",
    "Lifetime utility of employed high-skilled non-natives",
    "Lifetime utility of employed low-skilled natives",
    "Lifetime utility of employed low-skilled non-natives",
    "Lifetime utility of unemployed high-skilled natives",
    "Lifetime utility of unemployed high-skilled non-natives",
    "Lifetime utility of unemployed low-skilled natives",
    "Lifetime utility of unemployed low-skilled non-natives",
    "Lifetime utility of employers hiring high-skilled natives",
    "Lifetime utility of employers hiring high-skilled non-natives",
    "Lifetime utility of employers hiring low-skilled natives",
    "Lifetime utility of employers hiring low-skilled non-natives",
    "Price of high-skilled good",
    "Price of low-skilled good",
};

} // namespace

TEST_CASE("year input loader reproduces the bundled demo economy") {
    YearInputBundle b = load_year_inputs(year_csv_path());
    CHECK(b.year == 2017);
    CHECK_FALSE(b.has_g);

    CalibratedParameters ref = fixtures::demo_calib();
    CHECK(b.calib.r == ref.r);
    CHECK(b.calib.alpha == ref.alpha);
    CHECK(b.calib.b == ref.b);
    CHECK(b.calib.t_p == ref.t_p);
    CHECK(b.calib.tau_tilde == ref.tau_tilde);
    CHECK(b.calib.F == ref.F);
    CHECK(b.calib.c == ref.c);
    CHECK(b.calib.phi == ref.phi);
    CHECK(b.calib.eta == ref.eta);
    CHECK(b.calib.lambda == ref.lambda);
    for (int k = 0; k < 4; ++k) {
        CHECK(b.calib.delta[k] == ref.delta[k]);
        CHECK(b.calib.sigma[k] == ref.sigma[k]);
    }
    CHECK(b.calib.chi == ref.chi);
    CHECK(b.calib.IP == ref.IP);
    CHECK(b.calib.ssc_wedge == ref.ssc_wedge);

    // 17 significant digits round trip exactly through the CSV.
    for (int i = 0; i < MomentVector::n; ++i) {
        INFO("moment ", MomentVector::names()[i]);
        CHECK(b.moments[i] == fixtures::demo_moments[i]);
    }
}

TEST_CASE("year input loader names the missing field") {
    std::string path = mutated_year_csv("missing_delta.csv", "delta_l_I");
    try {
        load_year_inputs(path);
        FAIL("expected missing_field");
    } catch (const missing_field& e) {
        CHECK(std::string(e.what()).find("delta_l_I") != std::string::npos);
    }
}

TEST_CASE("year input loader rejects out-of-range and mis-scaled values") {
    CHECK_THROWS_AS(
        load_year_inputs(mutated_year_csv("bad_urate.csv", "urate_hN", "urate_hN,1.3")),
        validation_error);

    // A separation rate of 1.5/month only makes sense as an annual or
    // percent figure; the loader flags the unit rather than the domain.
    try {
        load_year_inputs(mutated_year_csv("bad_delta.csv", "delta_h_N", "delta_h_N,1.5"));
        FAIL("expected unit_mismatch");
    } catch (const unit_mismatch& e) {
        CHECK(std::string(e.what()).find("delta_h_N") != std::string::npos);
    }

    try {
        load_year_inputs(mutated_year_csv("bad_jfr.csv", "jfr_hN", "jfr_hN,1.2"));
        FAIL("expected unit_mismatch");
    } catch (const unit_mismatch& e) {
        CHECK(std::string(e.what()).find("jfr_hN") != std::string::npos);
    }

    CHECK_THROWS_AS(load_year_inputs(mutated_year_csv("bad_schema.csv", "schema_version",
                                                      "schema_version,2")),
                    schema_version_mismatch);

    try {
        load_year_inputs(appended_year_csv("extra_field.csv", "bogus_field,1"));
        FAIL("expected io_error");
    } catch (const io_error& e) {
        CHECK(std::string(e.what()).find("bogus_field") != std::string::npos);
    }
}

TEST_CASE("solution files round trip bit for bit") {
    EquilibriumSolution sol = solve_equilibrium(fixtures::demo_calib(), fixtures::demo_est(),
                                                fixtures::demo_prefs(), SolverConfig{});
    std::string path = (scratch_dir("solution") / "solution.json").string();
    write_solution(sol, path);
    EquilibriumSolution back = read_solution(path);

    for (int i = 0; i < UnknownVector::n; ++i) {
        INFO("unknown ", UnknownVector::names()[i]);
        CHECK(back.y.v[i] == sol.y.v[i]);
    }
    CHECK(back.pi_hN == sol.pi_hN);
    CHECK(back.pi_lN == sol.pi_lN);
    for (int k = 0; k < 4; ++k) {
        CHECK(back.values.W_u[k] == sol.values.W_u[k]);
        CHECK(back.values.W_e[k] == sol.values.W_e[k]);
        CHECK(back.values.J[k] == sol.values.J[k]);
    }
    CHECK(back.values.V[0] == sol.values.V[0]);
    CHECK(back.values.V[1] == sol.values.V[1]);
    CHECK(back.values.W_FC_h == sol.values.W_FC_h);
    CHECK(back.values.W_FC_l == sol.values.W_FC_l);
    CHECK(back.accounts.DT == sol.accounts.DT);
    CHECK(back.accounts.IT == sol.accounts.IT);
    CHECK(back.accounts.TGE == sol.accounts.TGE);
    CHECK(back.accounts.nu == sol.accounts.nu);
    CHECK(back.accounts.GVA == sol.accounts.GVA);
    CHECK(back.accounts.transfers == sol.accounts.transfers);
    CHECK(back.fiscal.t == sol.fiscal.t);
    CHECK(back.fiscal.g_h == sol.fiscal.g_h);
    CHECK(back.fiscal.g_l == sol.fiscal.g_l);
    CHECK(back.calib.F == sol.calib.F);
    CHECK(back.calib.sigma == sol.calib.sigma);
    CHECK(back.calib.delta == sol.calib.delta);
    CHECK(back.calib.ssc_wedge == sol.calib.ssc_wedge);
    CHECK(back.est.to_array() == sol.est.to_array());
    CHECK(back.prefs.rho == sol.prefs.rho);
    CHECK(back.prefs.gamma == sol.prefs.gamma);
    CHECK(back.diag.residual_norm == sol.diag.residual_norm);
    CHECK(back.diag.iterations == sol.diag.iterations);
    CHECK(back.diag.path == sol.diag.path);

    // A reread solution is a valid warm object: identity checks still pass.
    CHECK(verify_solution(back).ok());
}

TEST_CASE("counterfactual tables freeze the published row layout") {
    BaselineParams base{fixtures::demo_calib(), fixtures::demo_est(), fixtures::demo_prefs(),
                        SolverConfig{}};
    Scenario rm;
    rm.kind = Scenario::Kind::remove_all_nonnatives;
    CounterfactualReport rep = run_scenario(base, rm);

    fs::path dir = scratch_dir("tables");
    auto files = write_report(rep, dir.string());
    CHECK(files.size() == 3);
    CHECK(fs::exists(dir / "report.json"));

    std::string mv = slurp_file((dir / "table_main_variables.csv").string());
    CHECK(mv.rfind("variable,change\n", 0) == 0);
    auto names = first_column(mv);
    REQUIRE(names.size() == k_expected_main_rows.size() + 1);
    for (size_t i = 0; i < k_expected_main_rows.size(); ++i) {
        INFO("row ", i);
        CHECK(names[i + 1] == k_expected_main_rows[i]);
    }

    // Values in skill-grouped order, written at full precision.
    const std::array<int, 4> row_order = {0, 2, 1, 3};
    std::vector<double> expected = {rep.gdp_per_worker_pct, rep.nu_pct};
    for (int k : row_order) expected.push_back(rep.wage_pct[k]);
    for (int k : row_order) expected.push_back(rep.urate_abs[k]);
    for (int k : row_order) expected.push_back(rep.W_e_pct[k]);
    for (int k : row_order) expected.push_back(rep.W_u_pct[k]);
    for (int k : row_order) expected.push_back(rep.J_pct[k]);
    expected.push_back(rep.price_pct[0]);
    expected.push_back(rep.price_pct[1]);
    auto values = second_column(mv);
    REQUIRE(values.size() == expected.size());
    for (size_t i = 0; i < expected.size(); ++i) {
        INFO("row ", k_expected_main_rows[i]);
        CHECK(values[i] == expected[i]);
    }

    std::string agg = slurp_file((dir / "table_aggregates.csv").string());
    CHECK(agg.rfind("variable,percentage_change,absolute_change\n", 0) == 0);
    auto agg_names = first_column(agg);
    REQUIRE(agg_names.size() == 5);
    CHECK(agg_names[1] == "Monthly GDP");
    CHECK(agg_names[2] == "Direct taxes");
    CHECK(agg_names[3] == "Indirect taxes");
    CHECK(agg_names[4] == "Social security contributions");
}

TEST_CASE("scenario loader defaults the label to the file stem") {
    fs::path dir = scratch_dir("scenarios");
    std::string path = (dir / "boost_inflow.json").string();
    spill_file(path, "{\"kind\": \"stock_shock\", \"dsigma\": [0, 0, 0.1, 0], \"dIP\": 0.5}\n");
    ScenarioSpec spec = load_scenario(path);
    CHECK(spec.label == "boost_inflow");
    CHECK(spec.scenario.kind == Scenario::Kind::stock_shock);
    CHECK(spec.scenario.dsigma[2] == 0.1);
    CHECK(spec.scenario.dIP == 0.5);

    std::string named = (dir / "other.json").string();
    spill_file(named, "{\"label\": \"removal\", \"kind\": \"remove_all_nonnatives\"}\n");
    ScenarioSpec spec2 = load_scenario(named);
    CHECK(spec2.label == "removal");
    CHECK(spec2.scenario.kind == Scenario::Kind::remove_all_nonnatives);

    std::string bad = (dir / "bad.json").string();
    spill_file(bad, "{\"kind\": \"tax_holiday\"}\n");
    CHECK_THROWS_AS(load_scenario(bad), io_error);
}

TEST_CASE("manifest loader resolves paths and validates structure") {
    std::string example = fixtures::data_dir() + "/manifests/example_manifest.json";
    RunManifest m = load_manifest(example);
    REQUIRE(m.inputs.size() == 1);
    CHECK(fs::path(m.inputs[0]).is_absolute() == fs::path(example).is_absolute());
    CHECK(fs::exists(m.inputs[0])); // relative entries resolve against the manifest dir
    CHECK(m.seed == 42);
    CHECK(m.epsilons == std::vector<double>{1.0});
    REQUIRE(m.scenarios.size() == 2);
    CHECK(m.scenarios[0].label == "inflow_2017");
    CHECK(m.scenarios[1].label == "remove_nonnatives");
    CHECK_FALSE(m.smooth_moments);

    fs::path dir = scratch_dir("manifests");
    auto write_manifest = [&](const std::string& name, const std::string& body) {
        std::string path = (dir / name).string();
        spill_file(path, body);
        return path;
    };

    CHECK_THROWS_AS(load_manifest(write_manifest(
                        "no_schema.json",
                        "{\"inputs\": [\"x.csv\"], \"output_dir\": \"out\"}\n")),
                    missing_field);
    CHECK_THROWS_AS(load_manifest(write_manifest(
                        "empty_inputs.json",
                        "{\"schema_version\": 1, \"inputs\": [], \"output_dir\": \"out\"}\n")),
                    io_error);
    CHECK_THROWS_AS(
        load_manifest(write_manifest(
            "dup_labels.json",
            "{\"schema_version\": 1, \"inputs\": [\"x.csv\"], \"output_dir\": \"out\","
            " \"scenarios\": [{\"label\": \"a\", \"kind\": \"remove_all_nonnatives\"},"
            " {\"label\": \"a\", \"kind\": \"remove_all_nonnatives\"}]}\n")),
        io_error);
    CHECK_THROWS_AS(load_manifest(write_manifest(
                        "bad_eps.json",
                        "{\"schema_version\": 1, \"inputs\": [\"x.csv\"],"
                        " \"output_dir\": \"out\", \"epsilons\": [1.0, -0.5]}\n")),
                    validation_error);
    CHECK_THROWS_AS(load_manifest(write_manifest("not_json.json", "{oops\n")), io_error);
}

TEST_CASE("manifest pipeline recovers the generating parameters and reruns byte-identically") {
    std::string manifest_path = fixtures::data_dir() + "/manifests/example_manifest.json";
    RunManifest m = load_manifest(manifest_path);
    m.output_dir = scratch_dir("pipeline_a").string();
    PipelineResult r = run_pipeline(m);
    for (const auto& f : r.failures) {
        INFO("stage ", f.stage, ": ", f.message);
        CHECK(false);
    }
    REQUIRE(r.ok());
    CHECK(r.years_completed == std::vector<int>{2017});

    fs::path ydir = fs::path(m.output_dir) / "year_2017";
    CHECK(fs::exists(fs::path(m.output_dir) / "summary.json"));
    CHECK(fs::exists(ydir / "estimate.json"));
    CHECK(fs::exists(ydir / "solution.json"));
    CHECK(fs::exists(ydir / "scenario_inflow_2017" / "eps_1" / "report.json"));
    CHECK(fs::exists(ydir / "scenario_inflow_2017" / "series_long.csv"));
    CHECK(fs::exists(ydir / "scenario_remove_nonnatives" / "eps_1" / "table_main_variables.csv"));

    // The demo year CSV was generated from known parameters; with one
    // productivity pinned by the manifest bounds, the estimator should
    // recover all of them to within a percent.
    json est = parse_json_file((ydir / "estimate.json").string());
    CHECK(est["objective"].get<double>() < 1e-8);
    EstimatedParameters truth = fixtures::demo_est();
    auto ta = truth.to_array();
    for (int i = 0; i < EstimatedParameters::n_params; ++i) {
        const std::string& name = EstimatedParameters::names()[i];
        double v = est["omega_hat"][name].get<double>();
        INFO("parameter ", name);
        CHECK(fixtures::rel_diff(v, ta[i]) < 1e-2);
    }

    std::string series =
        slurp_file((ydir / "scenario_inflow_2017" / "series_long.csv").string());
    CHECK(series.rfind("epsilon,variable,value\n", 0) == 0);
    CHECK(series.find("1,Monthly GDP,") != std::string::npos);

    json summary = parse_json_file((fs::path(m.output_dir) / "summary.json").string());
    CHECK(summary["years"][0]["status"] == "ok");
    CHECK(summary["failures"].empty());

    // Rerun with the same seed: estimation and solve artifacts must be
    // byte-identical. The epsilon list only affects scenario sweeps, so
    // widening it exercises the eps_* layout without touching those files.
    RunManifest m2 = load_manifest(manifest_path);
    m2.output_dir = scratch_dir("pipeline_b").string();
    m2.scenarios.resize(1); // keep only inflow_2017
    m2.epsilons = {0.5, 2.0};
    PipelineResult r2 = run_pipeline(m2);
    REQUIRE(r2.ok());

    fs::path ydir2 = fs::path(m2.output_dir) / "year_2017";
    CHECK(slurp_file((ydir2 / "estimate.json").string()) ==
          slurp_file((ydir / "estimate.json").string()));
    CHECK(slurp_file((ydir2 / "solution.json").string()) ==
          slurp_file((ydir / "solution.json").string()));

    CHECK(fs::exists(ydir2 / "scenario_inflow_2017" / "eps_0.5" / "report.json"));
    CHECK(fs::exists(ydir2 / "scenario_inflow_2017" / "eps_2" / "report.json"));
    std::string sweep =
        slurp_file((ydir2 / "scenario_inflow_2017" / "series_long.csv").string());
    CHECK(sweep.rfind("epsilon,variable,value\n", 0) == 0);
    CHECK(sweep.find("\n0.5,") != std::string::npos);
    CHECK(sweep.find("\n2,") != std::string::npos);
}

TEST_CASE("pipeline reports stage-tagged failures and keeps going") {
    RunManifest m;
    m.inputs = {"/nonexistent/year.csv", year_csv_path()};
    m.output_dir = scratch_dir("pipeline_fail").string();
    m.seed = 7;
    // Starve the inner solver so every objective evaluation fails and the
    // estimation stage aborts with all starts penalized.
    m.solver.strategy = SolverConfig::Strategy::newton;
    m.solver.max_iterations = 1;
    m.estimation.multi_start = 1;
    m.estimation.simplex_max_iterations = 3;
    m.estimation.polish = false;

    PipelineResult r = run_pipeline(m);
    CHECK_FALSE(r.ok());
    CHECK(r.years_completed.empty());
    REQUIRE(r.failures.size() == 2);
    CHECK(r.failures[0].stage == "load");
    CHECK(r.failures[0].year == 0);
    CHECK(r.failures[1].stage == "estimate");
    CHECK(r.failures[1].year == 2017);

    // The summary still lands on disk with the failures recorded.
    json summary = parse_json_file(r.summary_path);
    CHECK(summary["failures"].size() == 2);
    CHECK(summary["years"][0]["status"] == "failed");
    CHECK(summary["years"][0]["stage"] == "estimate");
}

TEST_CASE("command line selftest passes") { CHECK(run_cli("selftest") == 0); }

TEST_CASE("command line solve and counterfactual produce consumable files") {
    fs::path dir = scratch_dir("cli");

    // Parameters travel via a solution file (the CLI accepts either an
    // estimate or a solution as --params).
    EquilibriumSolution sol = solve_equilibrium(fixtures::demo_calib(), fixtures::demo_est(),
                                                fixtures::demo_prefs(), SolverConfig{});
    std::string params = (dir / "params.json").string();
    write_solution(sol, params);

    std::string out = (dir / "sol_cli.json").string();
    REQUIRE(run_cli("solve --input " + year_csv_path() + " --params " + params + " --out " +
                    out) == 0);
    EquilibriumSolution back = read_solution(out);
    CHECK(verify_solution(back).ok());

    std::string cf_dir = (dir / "cf").string();
    REQUIRE(run_cli("counterfactual --input " + out +
                    " --scenario remove_all_nonnatives --out " + cf_dir) == 0);
    CHECK(fs::exists(fs::path(cf_dir) / "report.json"));
    CHECK(fs::exists(fs::path(cf_dir) / "table_main_variables.csv"));
    CHECK(fs::exists(fs::path(cf_dir) / "series_long.csv"));
}

TEST_CASE("command line calibrate emits the derived parameters") {
    fs::path dir = scratch_dir("cli_cal");
    std::string out = (dir / "calib.json").string();
    REQUIRE(run_cli("calibrate --input " + fixtures::data_dir() +
                    "/raw/calibration_raw_2017.csv --out " + out) == 0);
    json j = parse_json_file(out);
    const json& d = j["derived"];
    CHECK(d["Q"].get<double>() == doctest::Approx(0.2).epsilon(1e-10));
    CHECK(d["Delta"].get<double>() == doctest::Approx(0.05).epsilon(1e-10));
    CHECK(d["eta"].get<double>() == doctest::Approx(0.007).epsilon(1e-10));
    CHECK(d["eta_via_employment"].get<double>() ==
          doctest::Approx(d["eta_via_unemployment"].get<double>()).epsilon(1e-10));
    CHECK(d["F"].get<double>() == doctest::Approx(0.6055).epsilon(1e-12));
    CHECK(d["average_trial_length"].get<double>() == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(d["c"].get<double>() == doctest::Approx(0.09).epsilon(1e-12));
    CHECK(d["tau_tilde"].get<double>() ==
          doctest::Approx(0.17452966714905932).epsilon(1e-12));
    CHECK(d["no_tax_threshold"].get<double>() ==
          doctest::Approx(0.39029126213592236).epsilon(1e-12));
}

TEST_CASE("command line failures exit nonzero") {
    CHECK(run_cli("report --input /nonexistent/manifest.json") != 0);
    CHECK(run_cli("solve --input /nonexistent/year.csv") != 0);
    CHECK(run_cli("solve") != 0); // --input is required
}
