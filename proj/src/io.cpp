#include "migsm/io.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "migsm/calibration.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace migsm {

namespace {

// ---------------------------------------------------------------- logging

int log_level() {
    static const int level = [] {
        const char* v = std::getenv("MIGSM_LOG");
        if (!v) return 0;
        std::string s(v);
        if (s == "debug" || s == "2") return 2;
        if (s == "info" || s == "1") return 1;
        return 0;
    }();
    return level;
}

void log_info(const std::string& msg) {
    if (log_level() >= 1) std::fprintf(stderr, "[migsm] %s\n", msg.c_str());
}

void log_debug(const std::string& msg) {
    if (log_level() >= 2) std::fprintf(stderr, "[migsm] %s\n", msg.c_str());
}

// ------------------------------------------------------------ file basics

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open for reading: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spill(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open for writing: " + path);
    out << content;
    if (!out) throw io_error("write failed: " + path);
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw io_error("cannot create directory " + dir + ": " + ec.message());
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

double parse_number(const std::string& field, const std::string& text) {
    try {
        size_t pos = 0;
        double v = std::stod(text, &pos);
        if (pos != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw io_error("field " + field + ": cannot parse number from '" + text + "'");
    }
}

// field -> value map from a long-format CSV with a "field,value" header.
std::map<std::string, double> read_long_map(const std::string& path) {
    auto rows = read_csv(path);
    if (rows.empty()) throw io_error("empty file: " + path);
    size_t start = 0;
    if (rows[0].size() >= 2 && rows[0][0] == "field" && rows[0][1] == "value") start = 1;
    std::map<std::string, double> out;
    for (size_t i = start; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.empty() || (r.size() == 1 && r[0].empty())) continue;
        if (r.size() < 2)
            throw io_error(path + ": line " + std::to_string(i + 1) +
                           " needs two columns (field,value)");
        std::string key = trim(r[0]);
        if (key.empty() || key[0] == '#') continue;
        if (out.count(key)) throw io_error(path + ": duplicate field " + key);
        out[key] = parse_number(key, trim(r[1]));
    }
    return out;
}

double take(std::map<std::string, double>& m, const std::string& key) {
    auto it = m.find(key);
    if (it == m.end()) throw missing_field(key);
    double v = it->second;
    m.erase(it);
    return v;
}

bool take_optional(std::map<std::string, double>& m, const std::string& key, double& out) {
    auto it = m.find(key);
    if (it == m.end()) return false;
    out = it->second;
    m.erase(it);
    return true;
}

void check_schema(double found) {
    int v = static_cast<int>(found);
    if (v != k_schema_version) throw schema_version_mismatch(v, k_schema_version);
}

// Monthly rates near or above 1 are almost always annual figures or
// percentages that were not divided by 100.
void check_monthly_rate(const std::string& field, double v) {
    if (!(v >= 0.0 && v < 1.0))
        throw unit_mismatch(field,
                            "expected a monthly rate in [0,1); received " + fmt(v) +
                                " (annual or percent figure?)");
}

// --------------------------------------------------------- json utilities

const json& jget(const json& j, const std::string& key) {
    auto it = j.find(key);
    if (it == j.end()) throw missing_field(key);
    return *it;
}

double jnum(const json& j, const std::string& key) {
    const json& v = jget(j, key);
    if (!v.is_number()) throw io_error("field " + key + " must be a number");
    return v.get<double>();
}

template <size_t N>
std::array<double, N> jarr(const json& j, const std::string& key) {
    const json& v = jget(j, key);
    if (!v.is_array() || v.size() != N)
        throw io_error("field " + key + " must be an array of " + std::to_string(N));
    std::array<double, N> out{};
    for (size_t i = 0; i < N; ++i) out[i] = v[i].get<double>();
    return out;
}

json calib_to_json(const CalibratedParameters& c) {
    json j;
    j["r"] = c.r;
    j["alpha"] = c.alpha;
    j["b"] = c.b;
    j["t_p"] = c.t_p;
    j["tau_tilde"] = c.tau_tilde;
    j["F"] = c.F;
    j["c"] = c.c;
    j["phi"] = c.phi;
    j["eta"] = c.eta;
    j["lambda"] = c.lambda;
    j["delta"] = c.delta;
    j["sigma"] = c.sigma;
    j["chi"] = c.chi;
    j["IP"] = c.IP;
    j["ssc_wedge"] = c.ssc_wedge;
    return j;
}

CalibratedParameters calib_from_json(const json& j) {
    CalibratedParameters c;
    c.r = jnum(j, "r");
    c.alpha = jnum(j, "alpha");
    c.b = jnum(j, "b");
    c.t_p = jnum(j, "t_p");
    c.tau_tilde = jnum(j, "tau_tilde");
    c.F = jnum(j, "F");
    c.c = jnum(j, "c");
    c.phi = jnum(j, "phi");
    c.eta = jnum(j, "eta");
    c.lambda = jnum(j, "lambda");
    c.delta = jarr<4>(j, "delta");
    c.sigma = jarr<4>(j, "sigma");
    c.chi = jnum(j, "chi");
    c.IP = jnum(j, "IP");
    if (j.contains("ssc_wedge")) c.ssc_wedge = jnum(j, "ssc_wedge");
    return c;
}

json est_to_json(const EstimatedParameters& e) {
    json j;
    auto a = e.to_array();
    for (int i = 0; i < EstimatedParameters::n_params; ++i)
        j[EstimatedParameters::names()[i]] = a[i];
    return j;
}

EstimatedParameters est_from_json(const json& j) {
    std::array<double, EstimatedParameters::n_params> a{};
    for (int i = 0; i < EstimatedParameters::n_params; ++i)
        a[i] = jnum(j, EstimatedParameters::names()[i]);
    return EstimatedParameters::from_array(a);
}

json prefs_to_json(const PreferenceConfig& p) {
    return json{{"rho", p.rho}, {"gamma", p.gamma}, {"iota", p.iota}, {"zeta", p.zeta}};
}

PreferenceConfig prefs_from_json(const json& j) {
    PreferenceConfig p;
    if (j.contains("rho")) p.rho = jnum(j, "rho");
    if (j.contains("gamma")) p.gamma = jnum(j, "gamma");
    if (j.contains("iota")) p.iota = jnum(j, "iota");
    if (j.contains("zeta")) p.zeta = jnum(j, "zeta");
    return p;
}

json fiscal_to_json(const FiscalConfig& f) {
    return json{{"t", f.t},         {"t_p", f.t_p}, {"b", f.b},
                {"tau_tilde", f.tau_tilde}, {"g_h", f.g_h}, {"g_l", f.g_l}};
}

FiscalConfig fiscal_from_json(const json& j) {
    return FiscalConfig{jnum(j, "t"),        jnum(j, "t_p"), jnum(j, "b"),
                        jnum(j, "tau_tilde"), jnum(j, "g_h"), jnum(j, "g_l")};
}

SolverConfig solver_from_json(const json& j) {
    SolverConfig s;
    if (j.contains("strategy")) {
        std::string v = jget(j, "strategy").get<std::string>();
        if (v == "newton")
            s.strategy = SolverConfig::Strategy::newton;
        else if (v == "fixed_point")
            s.strategy = SolverConfig::Strategy::fixed_point;
        else if (v == "hybrid")
            s.strategy = SolverConfig::Strategy::hybrid;
        else
            throw io_error("unknown solver strategy: " + v);
    }
    if (j.contains("tolerance")) s.tolerance = jnum(j, "tolerance");
    if (j.contains("max_iterations")) s.max_iterations = jget(j, "max_iterations").get<int>();
    if (j.contains("fd_step")) s.fd_step = jnum(j, "fd_step");
    if (j.contains("multi_start")) s.multi_start = jget(j, "multi_start").get<int>();
    if (j.contains("seed")) s.seed = jget(j, "seed").get<std::uint64_t>();
    if (j.contains("balance_budget")) s.balance_budget = jget(j, "balance_budget").get<bool>();
    if (j.contains("g_h")) s.g_h = jnum(j, "g_h");
    if (j.contains("g_l")) s.g_l = jnum(j, "g_l");
    if (j.contains("closure_tol")) s.closure_tol = jnum(j, "closure_tol");
    if (j.contains("closure_max_iterations"))
        s.closure_max_iterations = jget(j, "closure_max_iterations").get<int>();
    if (j.contains("theta_min")) s.theta_min = jnum(j, "theta_min");
    if (j.contains("theta_max")) s.theta_max = jnum(j, "theta_max");
    return s;
}

EstimationConfig estimation_from_json(const json& j) {
    EstimationConfig c;
    if (j.contains("W")) {
        const json& w = jget(j, "W");
        if (!w.is_array()) throw io_error("estimation W must be a flat array");
        c.W.assign(w.begin(), w.end());
    }
    if (j.contains("multi_start")) c.multi_start = jget(j, "multi_start").get<int>();
    if (j.contains("seed")) c.seed = jget(j, "seed").get<std::uint64_t>();
    if (j.contains("simplex_max_iterations"))
        c.simplex_max_iterations = jget(j, "simplex_max_iterations").get<int>();
    if (j.contains("simplex_tolerance")) c.simplex_tolerance = jnum(j, "simplex_tolerance");
    if (j.contains("polish")) c.polish = jget(j, "polish").get<bool>();
    if (j.contains("polish_max_iterations"))
        c.polish_max_iterations = jget(j, "polish_max_iterations").get<int>();
    if (j.contains("polish_tolerance")) c.polish_tolerance = jnum(j, "polish_tolerance");
    if (j.contains("coordinate_pass")) c.coordinate_pass = jget(j, "coordinate_pass").get<bool>();
    if (j.contains("coordinate_iterations"))
        c.coordinate_iterations = jget(j, "coordinate_iterations").get<int>();
    if (j.contains("lower")) c.lower = jarr<EstimatedParameters::n_params>(j, "lower");
    if (j.contains("upper")) c.upper = jarr<EstimatedParameters::n_params>(j, "upper");
    if (j.contains("bounds")) {
        const json& b = jget(j, "bounds");
        if (!b.is_object()) throw io_error("estimation bounds must map name -> [lo, hi]");
        const auto& names = EstimatedParameters::names();
        for (auto it = b.begin(); it != b.end(); ++it) {
            auto pos = std::find(names.begin(), names.end(), it.key());
            if (pos == names.end())
                throw validation_error("bounds", "unknown parameter " + it.key());
            int idx = static_cast<int>(pos - names.begin());
            if (!it.value().is_array() || it.value().size() != 2)
                throw io_error("bounds." + it.key() + " must be [lo, hi]");
            c.lower[idx] = it.value()[0].get<double>();
            c.upper[idx] = it.value()[1].get<double>();
        }
    }
    if (j.contains("concurrent_starts"))
        c.concurrent_starts = jget(j, "concurrent_starts").get<bool>();
    if (j.contains("solver")) c.solver = solver_from_json(jget(j, "solver"));
    return c;
}

Scenario scenario_from_json(const json& j) {
    Scenario s;
    std::string kind = jget(j, "kind").get<std::string>();
    if (kind == "remove_all_nonnatives")
        s.kind = Scenario::Kind::remove_all_nonnatives;
    else if (kind == "stock_shock")
        s.kind = Scenario::Kind::stock_shock;
    else
        throw io_error("unknown scenario kind: " + kind);
    if (j.contains("dsigma")) s.dsigma = jarr<4>(j, "dsigma");
    if (j.contains("dIP")) s.dIP = jnum(j, "dIP");
    return s;
}

json scenario_to_json(const Scenario& s) {
    json j;
    j["kind"] = s.kind == Scenario::Kind::remove_all_nonnatives ? "remove_all_nonnatives"
                                                                : "stock_shock";
    j["dsigma"] = s.dsigma;
    j["dIP"] = s.dIP;
    return j;
}

// ------------------------------------------------------- table row layout

// Per-class rows are grouped by skill: hN, hI, lN, lI.
constexpr std::array<int, 4> k_row_order = {0, 2, 1, 3};

// Indexed by class (hN, lN, hI, lI).
const std::array<std::string, 4> k_class_labels = {
    "high-skilled natives", "low-skilled natives",
    "high-skilled non-natives", "low-skilled non-natives"};

double gdp_level(const EquilibriumSolution& s) {
    return s.accounts.GVA / (1.0 - s.fiscal.t_p);
}

struct LongRow {
    std::string variable;
    double value;
};

// The per-variable delta table: percentage changes except where the label
// says otherwise.
std::vector<LongRow> main_variable_rows(const CounterfactualReport& r) {
    std::vector<LongRow> rows;
    rows.push_back({"Real GDP per worker", r.gdp_per_worker_pct});
    rows.push_back({"Public goods", r.nu_pct});
    for (int i : k_row_order)
        rows.push_back({"Wages of " + k_class_labels[i], r.wage_pct[i]});
    for (int i : k_row_order)
        rows.push_back({"Unemployment rate of " + k_class_labels[i] + " (absolute change)",
                        r.urate_abs[i]});
    for (int i : k_row_order)
        rows.push_back({"Lifetime utility of employed " + k_class_labels[i], r.W_e_pct[i]});
    for (int i : k_row_order)
        rows.push_back({"Lifetime utility of unemployed " + k_class_labels[i], r.W_u_pct[i]});
    for (int i : k_row_order)
        rows.push_back({"Lifetime utility of employers hiring " + k_class_labels[i],
                        r.J_pct[i]});
    rows.push_back({"Price of high-skilled good", r.price_pct[0]});
    rows.push_back({"Price of low-skilled good", r.price_pct[1]});
    return rows;
}

struct AggregateRow {
    std::string variable;
    double pct;
    double abs;
};

std::vector<AggregateRow> aggregate_rows(const CounterfactualReport& r) {
    double ssc_b = social_security_contributions(r.baseline);
    double ssc_s = social_security_contributions(r.scenario);
    return {
        {"Monthly GDP", r.gdp_pct, gdp_level(r.scenario) - gdp_level(r.baseline)},
        {"Direct taxes", r.DT_pct, r.scenario.accounts.DT - r.baseline.accounts.DT},
        {"Indirect taxes", r.IT_pct, r.scenario.accounts.IT - r.baseline.accounts.IT},
        {"Social security contributions", r.ssc_pct, ssc_s - ssc_b},
    };
}

json solution_to_json(const EquilibriumSolution& sol) {
    json j;
    j["schema_version"] = k_schema_version;
    json unknowns;
    for (int i = 0; i < UnknownVector::n; ++i)
        unknowns[UnknownVector::names()[i]] = sol.y.v[i];
    j["unknowns"] = unknowns;
    j["pi"] = json{{"hN", sol.pi_hN}, {"lN", sol.pi_lN}};
    j["values"] = json{{"W_u", sol.values.W_u}, {"W_e", sol.values.W_e},
                       {"J", sol.values.J},     {"V", sol.values.V},
                       {"W_FC_h", sol.values.W_FC_h}, {"W_FC_l", sol.values.W_FC_l}};
    j["accounts"] = json{{"DT", sol.accounts.DT},   {"IT", sol.accounts.IT},
                         {"TGE", sol.accounts.TGE}, {"nu", sol.accounts.nu},
                         {"GVA", sol.accounts.GVA}, {"transfers", sol.accounts.transfers}};
    j["fiscal"] = fiscal_to_json(sol.fiscal);
    j["calibrated"] = calib_to_json(sol.calib);
    j["estimated"] = est_to_json(sol.est);
    j["preferences"] = prefs_to_json(sol.prefs);
    j["diagnostics"] = json{{"residual_norm", sol.diag.residual_norm},
                            {"iterations", sol.diag.iterations},
                            {"path", sol.diag.path},
                            {"boundary_hit", sol.diag.boundary_hit},
                            {"closure_iterations", sol.diag.closure_iterations},
                            {"multiple_equilibria", sol.diag.multiple_equilibria}};
    return j;
}

json report_to_json(const CounterfactualReport& r) {
    json j;
    j["schema_version"] = k_schema_version;
    j["scenario"] = scenario_to_json(r.applied);
    json deltas;
    deltas["gdp_pct"] = r.gdp_pct;
    deltas["gdp_per_worker_pct"] = r.gdp_per_worker_pct;
    deltas["DT_pct"] = r.DT_pct;
    deltas["IT_pct"] = r.IT_pct;
    deltas["ssc_pct"] = r.ssc_pct;
    deltas["nu_pct"] = r.nu_pct;
    deltas["wage_pct"] = r.wage_pct;
    deltas["price_pct"] = r.price_pct;
    deltas["urate_abs"] = r.urate_abs;
    deltas["W_e_pct"] = r.W_e_pct;
    deltas["W_u_pct"] = r.W_u_pct;
    deltas["J_pct"] = r.J_pct;
    j["deltas"] = deltas;
    j["baseline"] = solution_to_json(r.baseline);
    j["counterfactual"] = solution_to_json(r.scenario);
    return j;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

} // namespace

// ----------------------------------------------------------------- csv in

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
    std::string text = slurp(path);
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string cell;
    bool quoted = false;
    auto end_cell = [&] { row.push_back(cell); cell.clear(); };
    auto end_row = [&] {
        end_cell();
        if (!(row.size() == 1 && row[0].empty())) rows.push_back(row);
        row.clear();
    };
    for (size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') { cell += '"'; ++i; }
                else quoted = false;
            } else cell += c;
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            end_cell();
        } else if (c == '\n') {
            if (!cell.empty() && cell.back() == '\r') cell.pop_back();
            end_row();
        } else {
            cell += c;
        }
    }
    if (!cell.empty() || !row.empty()) {
        if (!cell.empty() && cell.back() == '\r') cell.pop_back();
        end_row();
    }
    return rows;
}

// ------------------------------------------------------------- year input

YearInputBundle load_year_inputs(const std::string& path) {
    auto fields = read_long_map(path);

    check_schema(take(fields, "schema_version"));

    YearInputBundle b;
    b.year = static_cast<int>(take(fields, "year"));

    CalibratedParameters& c = b.calib;
    c.r = take(fields, "r");
    c.alpha = take(fields, "alpha");
    c.b = take(fields, "b");
    c.t_p = take(fields, "t_p");
    c.tau_tilde = take(fields, "tau_tilde");
    c.F = take(fields, "F");
    c.c = take(fields, "c");
    c.phi = take(fields, "phi");
    c.eta = take(fields, "eta");
    c.lambda = take(fields, "lambda");
    const std::array<std::string, 4> delta_names = {"delta_h_N", "delta_l_N", "delta_h_I",
                                                    "delta_l_I"};
    const std::array<std::string, 4> sigma_names = {"sigma_h_N", "sigma_l_N", "sigma_h_I",
                                                    "sigma_l_I"};
    for (int k = 0; k < 4; ++k) c.delta[k] = take(fields, delta_names[k]);
    for (int k = 0; k < 4; ++k) c.sigma[k] = take(fields, sigma_names[k]);
    c.chi = take(fields, "chi");
    c.IP = take(fields, "IP");
    take_optional(fields, "ssc_wedge", c.ssc_wedge);

    // Unit sanity before the domain checks: monthly rates must look monthly.
    check_monthly_rate("r", c.r);
    check_monthly_rate("eta", c.eta);
    check_monthly_rate("lambda", c.lambda);
    for (int k = 0; k < 4; ++k) check_monthly_rate(delta_names[k], c.delta[k]);
    c.validate();

    const auto& mn = MomentVector::names();
    for (int i = 0; i < MomentVector::n; ++i) b.moments[i] = take(fields, mn[i]);
    for (int k = 0; k < 4; ++k) {
        if (b.moments[4 + k] >= 1.0)
            throw unit_mismatch(mn[4 + k],
                                "expected a monthly job-finding probability below 1; received " +
                                    fmt(b.moments[4 + k]));
    }
    b.moments.validate();

    b.has_g = take_optional(fields, "g", b.g);
    if (b.has_g)
        detail::require(b.g > 0.0 && b.g < 1.0, "g", "must lie strictly inside (0,1)");

    // Remaining raw:* fields feed the calibration helpers; anything else is
    // unrecognized and most likely a typo.
    for (auto it = fields.begin(); it != fields.end();) {
        if (it->first.rfind("raw:", 0) == 0) {
            b.raw[it->first.substr(4)] = it->second;
            it = fields.erase(it);
        } else {
            ++it;
        }
    }
    if (!fields.empty()) throw io_error(path + ": unrecognized field " + fields.begin()->first);

    log_debug("loaded year " + std::to_string(b.year) + " from " + path);
    return b;
}

// --------------------------------------------------------------- manifest

RunManifest load_manifest(const std::string& path) {
    json j;
    try {
        j = json::parse(slurp(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw io_error(path + ": " + e.what());
    }
    if (!j.contains("schema_version")) throw missing_field("schema_version");
    check_schema(j["schema_version"].get<double>());

    RunManifest m;
    const json& inputs = jget(j, "inputs");
    if (!inputs.is_array() || inputs.empty())
        throw io_error("manifest inputs must be a non-empty array of paths");
    fs::path base = fs::path(path).parent_path();
    auto resolve = [&](const std::string& p) {
        fs::path q(p);
        return q.is_absolute() ? q.string() : (base / q).string();
    };
    for (const auto& p : inputs) m.inputs.push_back(resolve(p.get<std::string>()));
    m.output_dir = resolve(jget(j, "output_dir").get<std::string>());

    if (j.contains("seed")) m.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("preferences")) m.prefs = prefs_from_json(j["preferences"]);
    if (j.contains("solver")) m.solver = solver_from_json(j["solver"]);
    if (j.contains("estimation")) m.estimation = estimation_from_json(j["estimation"]);
    if (j.contains("epsilons")) {
        for (const auto& e : j["epsilons"]) m.epsilons.push_back(e.get<double>());
        for (double e : m.epsilons)
            detail::require(e > 0.0, "epsilons", "every elasticity must be > 0");
    }
    if (j.contains("smooth_moments")) m.smooth_moments = j["smooth_moments"].get<bool>();
    if (j.contains("hp_lambda")) m.hp_lambda = jnum(j, "hp_lambda");
    if (j.contains("scenarios")) {
        std::set<std::string> seen;
        for (const auto& s : j["scenarios"]) {
            ScenarioSpec spec;
            spec.label = jget(s, "label").get<std::string>();
            if (spec.label.empty() || !seen.insert(spec.label).second)
                throw io_error("scenario labels must be non-empty and unique");
            spec.scenario = scenario_from_json(s);
            m.scenarios.push_back(std::move(spec));
        }
    }
    m.prefs.validate();
    return m;
}

ScenarioSpec load_scenario(const std::string& path) {
    json j;
    try {
        j = json::parse(slurp(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw io_error(path + ": " + e.what());
    }
    ScenarioSpec spec;
    spec.label = j.contains("label") ? j["label"].get<std::string>()
                                     : fs::path(path).stem().string();
    spec.scenario = scenario_from_json(j);
    return spec;
}

// -------------------------------------------------------------- artifacts

void write_solution(const EquilibriumSolution& sol, const std::string& path) {
    spill(path, solution_to_json(sol).dump(2) + "\n");
}

EquilibriumSolution read_solution(const std::string& path) {
    json j;
    try {
        j = json::parse(slurp(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw io_error(path + ": " + e.what());
    }
    check_schema(jnum(j, "schema_version"));

    EquilibriumSolution sol;
    const json& unknowns = jget(j, "unknowns");
    for (int i = 0; i < UnknownVector::n; ++i)
        sol.y.v[i] = jnum(unknowns, UnknownVector::names()[i]);
    const json& pi = jget(j, "pi");
    sol.pi_hN = jnum(pi, "hN");
    sol.pi_lN = jnum(pi, "lN");
    const json& vals = jget(j, "values");
    sol.values.W_u = jarr<4>(vals, "W_u");
    sol.values.W_e = jarr<4>(vals, "W_e");
    sol.values.J = jarr<4>(vals, "J");
    sol.values.V = jarr<2>(vals, "V");
    sol.values.W_FC_h = jnum(vals, "W_FC_h");
    sol.values.W_FC_l = jnum(vals, "W_FC_l");
    const json& acc = jget(j, "accounts");
    sol.accounts.DT = jnum(acc, "DT");
    sol.accounts.IT = jnum(acc, "IT");
    sol.accounts.TGE = jnum(acc, "TGE");
    sol.accounts.nu = jnum(acc, "nu");
    sol.accounts.GVA = jnum(acc, "GVA");
    sol.accounts.transfers = jnum(acc, "transfers");
    sol.fiscal = fiscal_from_json(jget(j, "fiscal"));
    sol.calib = calib_from_json(jget(j, "calibrated"));
    sol.est = est_from_json(jget(j, "estimated"));
    sol.prefs = prefs_from_json(jget(j, "preferences"));
    const json& d = jget(j, "diagnostics");
    sol.diag.residual_norm = jnum(d, "residual_norm");
    sol.diag.iterations = d["iterations"].get<int>();
    sol.diag.path = d["path"].get<std::string>();
    sol.diag.boundary_hit = d["boundary_hit"].get<bool>();
    sol.diag.closure_iterations = d["closure_iterations"].get<int>();
    sol.diag.multiple_equilibria = d["multiple_equilibria"].get<bool>();
    return sol;
}

void write_estimate(const EstimateResult& res, const std::string& path) {
    json j;
    j["schema_version"] = k_schema_version;
    j["omega_hat"] = est_to_json(res.omega_hat);
    j["objective"] = res.objective;
    json fitted, rel, null_dir;
    for (int i = 0; i < MomentVector::n; ++i) {
        fitted[MomentVector::names()[i]] = res.fitted[i];
        rel[MomentVector::names()[i]] = res.moment_rel_errors[i];
    }
    j["fitted_moments"] = fitted;
    j["moment_rel_errors"] = rel;
    j["evaluations"] = res.evaluations;
    json at_lower = json::array(), at_upper = json::array();
    for (int i = 0; i < EstimateResult::n_params; ++i) {
        if (res.at_lower[i]) at_lower.push_back(EstimatedParameters::names()[i]);
        if (res.at_upper[i]) at_upper.push_back(EstimatedParameters::names()[i]);
        null_dir[EstimatedParameters::names()[i]] = res.null_direction[i];
    }
    j["boundary"] = json{{"flagged", res.boundary_flagged},
                         {"at_lower", at_lower},
                         {"at_upper", at_upper}};
    j["jacobian_singular_values"] = res.jacobian_singular_values;
    j["null_direction"] = null_dir;
    json starts = json::array();
    for (const auto& s : res.starts)
        starts.push_back(json{{"objective", s.objective},
                              {"evaluations", s.evaluations},
                              {"penalized", s.penalized}});
    j["starts"] = starts;
    spill(path, j.dump(2) + "\n");
}

std::vector<std::string> write_report(const CounterfactualReport& report,
                                      const std::string& dir) {
    ensure_dir(dir);
    std::vector<std::string> written;

    std::string jpath = (fs::path(dir) / "report.json").string();
    spill(jpath, report_to_json(report).dump(2) + "\n");
    written.push_back(jpath);

    std::ostringstream agg;
    agg << "variable,percentage_change,absolute_change\n";
    for (const auto& row : aggregate_rows(report))
        agg << csv_escape(row.variable) << ',' << fmt(row.pct) << ',' << fmt(row.abs) << '\n';
    std::string apath = (fs::path(dir) / "table_aggregates.csv").string();
    spill(apath, agg.str());
    written.push_back(apath);

    std::ostringstream mv;
    mv << "variable,change\n";
    for (const auto& row : main_variable_rows(report))
        mv << csv_escape(row.variable) << ',' << fmt(row.value) << '\n';
    std::string mpath = (fs::path(dir) / "table_main_variables.csv").string();
    spill(mpath, mv.str());
    written.push_back(mpath);

    return written;
}

std::string write_sweep_series(
    const std::vector<std::pair<double, CounterfactualReport>>& sweep,
    const std::string& dir) {
    ensure_dir(dir);
    std::ostringstream out;
    out << "epsilon,variable,value\n";
    for (const auto& [eps, report] : sweep) {
        for (const auto& row : aggregate_rows(report))
            out << fmt(eps) << ',' << csv_escape(row.variable) << ',' << fmt(row.pct) << '\n';
        for (const auto& row : main_variable_rows(report))
            out << fmt(eps) << ',' << csv_escape(row.variable) << ',' << fmt(row.value) << '\n';
    }
    std::string path = (fs::path(dir) / "series_long.csv").string();
    spill(path, out.str());
    return path;
}

// ---------------------------------------------------- raw calibration map

std::map<std::string, double> calibrate_from_raw(const std::map<std::string, double>& raw) {
    std::map<std::string, double> work = raw;
    work.erase("schema_version");
    work.erase("year");
    std::map<std::string, double> out;
    auto has = [&](std::initializer_list<const char*> keys) {
        for (const char* k : keys)
            if (!work.count(k)) return false;
        return true;
    };

    if (has({"u_t", "u_next", "u_s_next", "l_t"})) {
        ShimerRates sr = shimer_rates(
            {work["u_t"], work["u_next"], work["u_s_next"], work["l_t"]});
        out["Q"] = sr.Q;
        out["Delta"] = sr.Delta;
        out["q"] = sr.q;
        out["delta"] = sr.delta;
    }

    if (has({"TII", "lambda", "e_h_I", "e_l_I", "u_h_I", "u_l_I", "sigma_I_total", "ktq_h",
             "ktq_l", "delta_h_I", "delta_l_I"})) {
        EtaStocks stocks{work["e_h_I"], work["e_l_I"], work["u_h_I"], work["u_l_I"],
                         work["sigma_I_total"]};
        EtaRates rates{work["ktq_h"], work["ktq_l"], work["delta_h_I"], work["delta_l_I"]};
        out["eta_via_employment"] = eta_from_inflows(work["TII"], work["lambda"], stocks,
                                                     rates, EtaVia::employment);
        out["eta_via_unemployment"] = eta_from_inflows(work["TII"], work["lambda"], stocks,
                                                       rates, EtaVia::unemployment);
        out["eta"] = out["eta_via_unemployment"];
    }

    if (has({"p_f", "p_s", "p_w", "p_a", "n_fd", "n_a", "ss", "pp", "sp", "lc",
             "fornero_flag", "wage_to_va"})) {
        FiringCostInputs in;
        in.p_f = work["p_f"];
        in.p_s = work["p_s"];
        in.p_w = work["p_w"];
        in.p_a = work["p_a"];
        in.n_fd = work["n_fd"];
        in.n_a = work["n_a"];
        in.ss = work["ss"];
        in.pp = work["pp"];
        in.sp = work["sp"];
        in.lc = work["lc"];
        in.fornero_flag = work["fornero_flag"];
        in.wage_to_va = work["wage_to_va"];
        out["F"] = firing_cost(in);
    }

    if (has({"ST_m", "PT_prev", "ET_m"}))
        out["average_trial_length"] =
            average_trial_length({work["ST_m"], work["PT_prev"], work["ET_m"]});

    if (has({"kappa_q_monthly", "direct_cost", "opportunity_cost", "p_tilde_x_monthly"}))
        out["c"] = vacancy_cost(work["kappa_q_monthly"], work["direct_cost"],
                                work["opportunity_cost"], work["p_tilde_x_monthly"]);

    if (has({"w_bar", "t_avg", "t_marginal"})) {
        TaxSubsidy ts = tax_subsidy(work["w_bar"], work["t_avg"], work["t_marginal"]);
        out["tau_tilde"] = ts.tau;
        out["no_tax_threshold"] = ts.no_tax_threshold;
    }

    // Generic unit conversions: *_annual_rate -> *_monthly_rate, and
    // *_annual_flow -> *_monthly_flow.
    for (const auto& [key, value] : work) {
        const std::string rate_suffix = "_annual_rate", flow_suffix = "_annual_flow";
        if (key.size() > rate_suffix.size() &&
            key.compare(key.size() - rate_suffix.size(), rate_suffix.size(), rate_suffix) == 0)
            out[key.substr(0, key.size() - rate_suffix.size()) + "_monthly_rate"] =
                monthly_rate_from_annual(value);
        else if (key.size() > flow_suffix.size() &&
                 key.compare(key.size() - flow_suffix.size(), flow_suffix.size(),
                             flow_suffix) == 0)
            out[key.substr(0, key.size() - flow_suffix.size()) + "_monthly_flow"] =
                monthly_flow_from_annual(value);
    }

    if (out.empty())
        throw data_error("no recognized raw calibration fields; see docs/schemas.md");
    return out;
}

// ----------------------------------------------------------------- pipeline

PipelineResult run_pipeline(const RunManifest& manifest) {
    PipelineResult result;
    ensure_dir(manifest.output_dir);

    struct Loaded {
        YearInputBundle bundle;
        std::string path;
    };
    std::vector<Loaded> loaded;
    for (const auto& path : manifest.inputs) {
        try {
            Loaded l{load_year_inputs(path), path};
            if (manifest.year_filter != 0 && l.bundle.year != manifest.year_filter) continue;
            loaded.push_back(std::move(l));
        } catch (const std::exception& e) {
            result.failures.push_back({0, "load", path + ": " + e.what()});
        }
    }
    std::stable_sort(loaded.begin(), loaded.end(),
                     [](const Loaded& a, const Loaded& b) { return a.bundle.year < b.bundle.year; });

    // Cross-year smoothing of the moment targets. With fewer than four
    // years the penalized trend is essentially the series itself, so the
    // pass is skipped.
    if (manifest.smooth_moments && loaded.size() >= 4) {
        for (int i = 0; i < MomentVector::n; ++i) {
            std::vector<double> series;
            series.reserve(loaded.size());
            for (const auto& l : loaded) series.push_back(l.bundle.moments[i]);
            std::vector<double> trend = hp_filter(series, manifest.hp_lambda);
            for (size_t k = 0; k < loaded.size(); ++k) loaded[k].bundle.moments[i] = trend[k];
        }
        for (auto it = loaded.begin(); it != loaded.end();) {
            try {
                it->bundle.moments.validate();
                ++it;
            } catch (const std::exception& e) {
                result.failures.push_back({it->bundle.year, "smooth", e.what()});
                it = loaded.erase(it);
            }
        }
    }

    json summary;
    summary["schema_version"] = k_schema_version;
    summary["seed"] = manifest.seed;
    json years = json::array();

    for (const auto& l : loaded) {
        const YearInputBundle& b = l.bundle;
        std::string year_dir =
            (fs::path(manifest.output_dir) / ("year_" + std::to_string(b.year))).string();
        json yj;
        yj["year"] = b.year;
        std::string stage = "setup";
        try {
            ensure_dir(year_dir);

            SolverConfig solver = manifest.solver;
            if (b.has_g && !solver.balance_budget) solver.g_h = solver.g_l = b.g;

            EstimationConfig est_cfg = manifest.estimation;
            est_cfg.solver = solver;
            est_cfg.seed = manifest.seed * 1000003ull +
                           static_cast<std::uint64_t>(static_cast<std::int64_t>(b.year));

            stage = "estimate";
            log_info("year " + std::to_string(b.year) + ": estimating");
            EstimateResult est = estimate(b.moments, b.calib, manifest.prefs, est_cfg);
            std::string est_path = (fs::path(year_dir) / "estimate.json").string();
            write_estimate(est, est_path);
            result.files_written.push_back(est_path);

            stage = "solve";
            EquilibriumSolution sol =
                solve_equilibrium(b.calib, est.omega_hat, manifest.prefs, solver);
            std::string sol_path = (fs::path(year_dir) / "solution.json").string();
            write_solution(sol, sol_path);
            result.files_written.push_back(sol_path);

            BaselineParams base{b.calib, est.omega_hat, manifest.prefs, solver};
            json scen_summary = json::array();
            for (const auto& spec : manifest.scenarios) {
                stage = "scenario " + spec.label;
                log_info("year " + std::to_string(b.year) + ": scenario " + spec.label);
                std::string scen_dir =
                    (fs::path(year_dir) / ("scenario_" + spec.label)).string();
                ensure_dir(scen_dir);

                std::vector<std::pair<double, CounterfactualReport>> sweep;
                if (manifest.epsilons.empty()) {
                    CounterfactualReport rep = run_scenario(base, spec.scenario);
                    auto files = write_report(rep, scen_dir);
                    result.files_written.insert(result.files_written.end(), files.begin(),
                                                files.end());
                    sweep.emplace_back(manifest.prefs.epsilon(), std::move(rep));
                } else {
                    sweep = epsilon_sweep(base, spec.scenario, manifest.epsilons);
                    for (const auto& [eps, rep] : sweep) {
                        std::string eps_dir =
                            (fs::path(scen_dir) / ("eps_" + fmt(eps))).string();
                        auto files = write_report(rep, eps_dir);
                        result.files_written.insert(result.files_written.end(), files.begin(),
                                                    files.end());
                    }
                }
                result.files_written.push_back(write_sweep_series(sweep, scen_dir));
                scen_summary.push_back(spec.label);
            }

            yj["status"] = "ok";
            yj["dir"] = year_dir;
            yj["objective"] = est.objective;
            yj["scenarios"] = scen_summary;
            result.years_completed.push_back(b.year);
        } catch (const std::exception& e) {
            result.failures.push_back({b.year, stage, e.what()});
            yj["status"] = "failed";
            yj["stage"] = stage;
            yj["message"] = e.what();
        }
        years.push_back(yj);
    }

    summary["years"] = years;
    json fails = json::array();
    for (const auto& f : result.failures)
        fails.push_back(json{{"year", f.year}, {"stage", f.stage}, {"message", f.message}});
    summary["failures"] = fails;

    result.summary_path = (fs::path(manifest.output_dir) / "summary.json").string();
    spill(result.summary_path, summary.dump(2) + "\n");
    result.files_written.push_back(result.summary_path);
    return result;
}

} // namespace migsm
