#pragma once

#include <cmath>

#include "migsm/errors.hpp"
#include "migsm/model_core.hpp"
#include "migsm/types.hpp"

// Wage-bargaining closed forms, steady-state stocks, the job-creation
// condition, and lifetime-value closed forms. All rates are monthly.

namespace migsm {

// Native bargained wage: w = A*px - B*tau + C*px*F, all coefficients
// positive for admissible inputs.
struct WageCoefficients {
    double A = 0.0, B = 0.0, C = 0.0;
};

// Non-native analogue: w = D*px - E*tau + G*px*F + K*W_FC - H*iota_nu.
struct NonnativeWageCoefficients {
    double D = 0.0, E = 0.0, G = 0.0, K = 0.0, H = 0.0;
};

namespace detail {
inline void check_wage_inputs(double beta, double r, double delta, double ktq,
                              double b, double t) {
    require(beta > 0.0 && beta < 1.0, "beta", "must lie strictly inside (0,1)");
    require(r > 0.0, "r", "must be > 0");
    require(delta > 0.0, "delta", "must be > 0");
    require(ktq >= 0.0, "theta", "kappa*theta*q must be >= 0");
    require(b >= 0.0 && b < 1.0, "b", "must lie in [0,1)");
    require(t >= 0.0 && t < 1.0, "t", "must lie in [0,1)");
}
} // namespace detail

inline WageCoefficients native_wage_coefficients(double beta, double r, double delta,
                                                 double ktq, double b, double t,
                                                 double phi) {
    detail::check_wage_inputs(beta, r, delta, ktq, b, t);
    const double den = (r + delta) * (1.0 - b * (1.0 - beta)) + beta * ktq;
    // reachable only for b >= 1 or negative rates, which validation forbids
    if (!(den > 0.0)) throw validation_error("denominator", "bargaining denominator not positive");
    WageCoefficients k;
    k.A = beta * (r + delta + ktq) / den;
    k.B = (1.0 - beta) * (r + delta) * (1.0 - b) / den;
    k.C = (beta * r * (r + delta + ktq) + phi * (r + delta) * (1.0 - beta) * (r + ktq)) /
          ((1.0 - t) * den);
    return k;
}

inline double wage_native(const WageCoefficients& k, double p_tilde_x,
                          double tau_tilde, double F) {
    return k.A * p_tilde_x - k.B * tau_tilde + k.C * p_tilde_x * F;
}

inline double wage_native(double beta, double r, double delta, double ktq, double b,
                          double t, double phi, double p_tilde_x, double tau_tilde,
                          double F) {
    return wage_native(native_wage_coefficients(beta, r, delta, ktq, b, t, phi),
                       p_tilde_x, tau_tilde, F);
}

// lambda = 0 collapses these to the native coefficients (the whole
// denominator gains a common factor r), so K = H = 0 and the wage equals
// wage_native at the non-native rates. The severance term in G carries the
// factor (r + lambda)(r + ktq - lambda) rather than r (r + lambda + ktq),
// so for phi * lambda > 0 the wage sits a fixed, known wedge away from the
// exact surplus-sharing solution (the sharing-rule test pins its closed
// form); the two factors, and hence the wages, coincide when phi = 0 or
// lambda = 0.
inline NonnativeWageCoefficients nonnative_wage_coefficients(double beta, double r,
                                                             double delta, double ktq,
                                                             double b, double t,
                                                             double phi, double lambda) {
    detail::check_wage_inputs(beta, r, delta, ktq, b, t);
    detail::require(lambda >= 0.0, "lambda", "must be >= 0");
    const double den = (r + delta) * ((lambda + r) - r * b * (1.0 - beta)) + beta * r * ktq;
    if (!(den > 0.0)) throw validation_error("denominator", "bargaining denominator not positive");
    NonnativeWageCoefficients k;
    k.D = beta * ((r + lambda) * (r + delta) + r * ktq) / den;
    k.E = (1.0 - beta) * (r + delta) * ((1.0 - b) * r + lambda) / den;
    k.G = (phi * (r + delta) * (1.0 - beta) * (r + lambda) * (r + ktq - lambda) +
           beta * r * ((r + delta) * (r + lambda) + r * ktq)) /
          ((1.0 - t) * den);
    k.K = lambda * r * (1.0 - beta) * (r + delta) / ((1.0 - t) * den);
    k.H = lambda * (1.0 - beta) * (r + delta) / ((1.0 - t) * den);
    return k;
}

inline double wage_nonnative(const NonnativeWageCoefficients& k, double p_tilde_x,
                             double tau_tilde, double F, double W_FC, double iota_nu) {
    return k.D * p_tilde_x - k.E * tau_tilde + k.G * p_tilde_x * F + k.K * W_FC -
           k.H * iota_nu;
}

inline double wage_nonnative(double beta, double r, double delta, double ktq, double b,
                             double t, double phi, double lambda, double p_tilde_x,
                             double tau_tilde, double F, double W_FC, double iota_nu) {
    return wage_nonnative(
        nonnative_wage_coefficients(beta, r, delta, ktq, b, t, phi, lambda),
        p_tilde_x, tau_tilde, F, W_FC, iota_nu);
}

struct Stocks {
    double e = 0.0, u = 0.0, fc = 0.0; // employed, unemployed, mass abroad
};

// Steady-state native stocks from the flow balance delta*e = ktq*u with
// e + u = sigma.
inline Stocks native_stocks_from_rate(double sigma, double ktq, double delta) {
    const double den = delta + ktq;
    return {sigma * ktq / den, sigma * delta / den, 0.0};
}

inline Stocks native_stocks(double sigma, double kappa, double theta, double alpha,
                            double delta) {
    ClassRates{kappa, delta, sigma}.validate();
    const double ktq = kappa * matching_rates(theta, alpha).second;
    return native_stocks_from_rate(sigma, ktq, delta);
}

// Non-natives additionally flow abroad (rate lambda from unemployment) and
// back (rate eta). lambda = 0 is special-cased so the reduction to the
// native formulas is exact at machine precision; e + u + fc = sigma holds
// identically in both branches.
inline Stocks nonnative_stocks_from_rate(double sigma, double ktq, double delta,
                                         double eta, double lambda) {
    if (lambda == 0.0) return native_stocks_from_rate(sigma, ktq, delta);
    if (!(eta > 0.0))
        throw validation_error("eta", "eta = 0 with lambda > 0 puts all mass abroad");
    const double den = lambda * delta + eta * (ktq + delta);
    return {sigma * eta * ktq / den, sigma * eta * delta / den, sigma * lambda * delta / den};
}

inline Stocks nonnative_stocks(double sigma, double kappa, double theta, double alpha,
                               double delta, double eta, double lambda) {
    ClassRates{kappa, delta, sigma}.validate();
    MigrationRates{eta, lambda}.validate();
    const double ktq = kappa * matching_rates(theta, alpha).second;
    return nonnative_stocks_from_rate(sigma, ktq, delta, eta, lambda);
}

// Value of a filled job: per-period after-tax profit net of expected firing
// costs, discounted at r + delta.
inline double match_value(double p_tilde_x, double w_tilde, double t, double F,
                          double r, double delta) {
    return ((1.0 - t) * (p_tilde_x - w_tilde) - delta * p_tilde_x * F) / (r + delta);
}

// Value of an open vacancy; zero at equilibrium tightness (free entry).
inline double vacancy_value(double c, double p_tilde_x, double q, double pi_N,
                            double kappa_N, double kappa_I, double J_N, double J_I,
                            double r) {
    const double kbar = pi_N * kappa_N + (1.0 - pi_N) * kappa_I;
    return (-c * p_tilde_x + q * (pi_N * kappa_N * J_N + (1.0 - pi_N) * kappa_I * J_I)) /
           (r + q * kbar);
}

// LHS - RHS of the free-entry job-creation condition: expected discounted
// hiring surplus minus the vacancy cost, both per unit vacancy.
inline double job_creation_residual(double theta, double alpha, double pi_N,
                                    double w_N, double w_I, double p_tilde_x,
                                    double r, double delta_N, double delta_I,
                                    double kappa_N, double kappa_I, double t,
                                    double F, double c) {
    detail::require(pi_N >= 0.0 && pi_N <= 1.0, "pi_N", "must lie in [0,1]");
    const double q = matching_rates(theta, alpha).first;
    const double J_N = match_value(p_tilde_x, w_N, t, F, r, delta_N);
    const double J_I = match_value(p_tilde_x, w_I, t, F, r, delta_I);
    return q * (pi_N * kappa_N * J_N + (1.0 - pi_N) * kappa_I * J_I) - c * p_tilde_x;
}

struct ClassValues {
    double W_u = 0.0, W_e = 0.0;
};

// Native lifetime utilities. Z_u = b(1-t)(w+tau) + iota*nu is the
// unemployed flow; the employment premium discounts the benefit-adjusted
// net wage and the worker's firing-cost transfer.
inline ClassValues worker_values_native(double w_tilde, double tau_tilde, double t,
                                        double b, double iota_nu, double p_tilde_x,
                                        double F, double phi, double r, double delta,
                                        double ktq, double beta, double J) {
    const double X = p_tilde_x * F;
    const double Z_u = b * (1.0 - t) * (w_tilde + tau_tilde) + iota_nu;
    ClassValues v;
    v.W_u = Z_u / r + (ktq / r) * ((beta / (1.0 - beta)) * (J + X) + phi * X);
    v.W_e = v.W_u + ((1.0 - b) * (1.0 - t) * (w_tilde + tau_tilde) + delta * phi * X) /
                        (r + delta + ktq);
    return v;
}

// Non-native analogue: unemployed exit abroad at rate lambda to W_FC, and
// the employed premium nets out the option value of that exit.
inline ClassValues worker_values_nonnative(double w_tilde, double tau_tilde, double t,
                                           double b, double iota_nu, double p_tilde_x,
                                           double F, double phi, double r, double delta,
                                           double ktq, double beta, double J,
                                           double lambda, double W_FC) {
    const double X = p_tilde_x * F;
    const double Z_u = b * (1.0 - t) * (w_tilde + tau_tilde) + iota_nu;
    ClassValues v;
    v.W_u = (Z_u + lambda * W_FC) / (r + lambda) +
            (ktq / (r + lambda)) * ((beta / (1.0 - beta)) * (J + X) + phi * X);
    v.W_e = v.W_u + ((1.0 - b) * (1.0 - t) * (w_tilde + tau_tilde) -
                     lambda * (W_FC - v.W_u) + delta * phi * X) /
                        (r + delta + ktq);
    return v;
}

} // namespace migsm
