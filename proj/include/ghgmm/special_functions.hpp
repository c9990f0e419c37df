#pragma once

namespace ghgmm {

// K_order(x) together with its logarithm. The log stays finite long after
// the value itself under- or overflows.
struct BesselEval {
    double order;
    double argument;
    double value;
    double log_value;
};

// Modified Bessel function of the third kind, real order, x > 0.
BesselEval bessel_k_eval(double order, double x);
double bessel_k(double order, double x);
double log_bessel_k(double order, double x);

// log(e^x K_order(x)); free of the -x term that swamps large arguments.
double log_bessel_k_scaled(double order, double x);

// K_{order+1}(x) / K_order(x), computed without forming either factor.
double bessel_k_ratio(double order, double x);

// d/d(order) of log K_order(x).
double dlog_bessel_k_dorder(double order, double x);

// psi(x) = d/dx log Gamma(x), x > 0.
double digamma(double x);

}  // namespace ghgmm
