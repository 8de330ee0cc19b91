#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace migsm {

// Base class for every error thrown by this library.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A parameter or function argument lies outside its documented domain.
// `field` names the offending quantity so callers can report it precisely.
struct validation_error : error {
    std::string field;
    validation_error(std::string field_, const std::string& msg)
        : error(field_ + ": " + msg), field(std::move(field_)) {}
};

// An iterative solver exhausted its budget. Carries the best residual and
// iterate seen so callers can distinguish "nearly there" from "diverged".
struct no_convergence : error {
    double best_residual;
    int iterations;
    std::vector<double> best_iterate;
    no_convergence(const std::string& msg, double best_residual_, int iterations_,
                   std::vector<double> best_iterate_ = {})
        : error(msg), best_residual(best_residual_), iterations(iterations_),
          best_iterate(std::move(best_iterate_)) {}
};

// A solved economy has zero employment in one of the skill markets, so
// prices and downstream accounts are undefined.
struct degenerate_economy : error {
    using error::error;
};

// The accepted solution sits on a tightness clamp bound, i.e. the reported
// equilibrium is constrained rather than interior.
struct boundary_hit : error {
    using error::error;
};

// Observed (calibration) data violates a requirement of the model formulas,
// e.g. a job-finding probability outside (0,1).
struct data_error : error {
    using error::error;
};

// File and schema failures.
struct io_error : error {
    using error::error;
};

struct missing_field : io_error {
    std::string field;
    explicit missing_field(const std::string& field_)
        : io_error("missing field: " + field_), field(field_) {}
};

struct unit_mismatch : io_error {
    std::string field;
    unit_mismatch(const std::string& field_, const std::string& msg)
        : io_error(field_ + ": " + msg), field(field_) {}
};

struct schema_version_mismatch : io_error {
    int found, expected;
    schema_version_mismatch(int found_, int expected_)
        : io_error("schema_version " + std::to_string(found_) +
                   " but this build reads " + std::to_string(expected_)),
          found(found_), expected(expected_) {}
};

struct all_starts_failed : error {
    using error::error;
};

} // namespace migsm
