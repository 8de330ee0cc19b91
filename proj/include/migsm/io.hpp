#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "migsm/counterfactual.hpp"
#include "migsm/equilibrium.hpp"
#include "migsm/estimation.hpp"

namespace migsm {

inline constexpr int k_schema_version = 1;

// Everything a single year of data provides: the externally calibrated
// parameters, the observed moment targets, and any optional raw series
// consumed by the calibration helpers.
struct YearInputBundle {
    int year = 0;
    CalibratedParameters calib;
    MomentVector moments;
    bool has_g = false;
    double g = 0.3; // public-good share when the budget is not re-balanced
    std::map<std::string, double> raw;
};

// Reads a long-format CSV (header "field,value", '.' decimal separator,
// schema_version row mandatory) and validates every field.
YearInputBundle load_year_inputs(const std::string& path);

struct ScenarioSpec {
    std::string label;
    Scenario scenario;
};

struct RunManifest {
    std::vector<std::string> inputs; // year CSV paths
    std::string output_dir;
    PreferenceConfig prefs;
    SolverConfig solver;
    EstimationConfig estimation;
    std::vector<ScenarioSpec> scenarios;
    std::vector<double> epsilons; // non-empty: sweep each scenario over these
    std::uint64_t seed = 0;
    bool smooth_moments = false; // HP-filter moment series across years
    double hp_lambda = 100.0;
    int year_filter = 0; // 0 = all years
};

RunManifest load_manifest(const std::string& path);

// Single scenario from a JSON file {label?, kind, dsigma?, dIP?}; the label
// defaults to the file stem.
ScenarioSpec load_scenario(const std::string& path);

struct StageFailure {
    int year = 0;
    std::string stage;
    std::string message;
};

struct PipelineResult {
    std::vector<int> years_completed;
    std::vector<StageFailure> failures;
    std::string summary_path;
    std::vector<std::string> files_written;
    bool ok() const { return failures.empty() && !years_completed.empty(); }
};

// Per year: (optionally smoothed) targets -> estimate -> solve -> scenarios
// -> report files, continuing across years and aggregating failures.
// Deterministic for a fixed manifest and seed.
PipelineResult run_pipeline(const RunManifest& manifest);

// Machine-readable artifacts. All numeric output is full precision (17
// significant digits), so re-parsing reproduces values exactly.
void write_solution(const EquilibriumSolution& sol, const std::string& path);
EquilibriumSolution read_solution(const std::string& path);

void write_estimate(const EstimateResult& res, const std::string& path);

// Emits report.json plus the two delta tables (aggregate and per-variable
// CSVs) into dir; returns the paths written.
std::vector<std::string> write_report(const CounterfactualReport& report,
                                      const std::string& dir);

// Plot-ready long-format CSV (epsilon,variable,value) for a sweep.
std::string write_sweep_series(
    const std::vector<std::pair<double, CounterfactualReport>>& sweep,
    const std::string& dir);

// Raw calibration inputs -> derived parameters, as name/value pairs.
std::map<std::string, double> calibrate_from_raw(
    const std::map<std::string, double>& raw);

// Minimal CSV access for tests and the CLI; no quoting of separators is
// needed by any writer in this library.
std::vector<std::vector<std::string>> read_csv(const std::string& path);

} // namespace migsm
