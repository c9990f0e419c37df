#include "ghgmm/special_functions.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "ghgmm/errors.hpp"

namespace ghgmm {
namespace {

constexpr double kEps = 1e-16;
constexpr int kMaxIter = 100000;

void check_args(double order, double x) {
    if (!std::isfinite(order) || !std::isfinite(x))
        throw DomainError("bessel_k: non-finite argument");
    if (x <= 0.0)
        throw DomainError("bessel_k: argument must be positive, got " + std::to_string(x));
}

// Even-index Taylor coefficients of 1/Gamma(1+z) (Abramowitz & Stegun 6.1.34),
// used where (1/Gamma(1-mu) - 1/Gamma(1+mu)) / (2 mu) cancels.
double temme_gam1(double mu) {
    if (std::abs(mu) >= 0.05)
        return (1.0 / std::tgamma(1.0 - mu) - 1.0 / std::tgamma(1.0 + mu)) / (2.0 * mu);
    static constexpr double a[] = {0.5772156649015329, -0.0420026350340952, -0.0421977345555443,
                                   0.0072189432466630, -0.0002152416741149, -0.0000201348547807};
    const double m2 = mu * mu;
    double s = 0.0;
    for (int k = 5; k >= 0; --k) s = s * m2 + a[k];
    return -s;
}

// log K_nu(x), K_{nu+1}/K_nu and, when nu >= 1/2, K_{nu-1}/K_nu, for nu >= 0.
struct KState {
    double log_k;
    double ratio;
    double ratio_below;
};

KState k_state(double nu, double x, bool scaled = false) {
    const int nl = static_cast<int>(std::floor(nu + 0.5));
    const double mu = nu - nl;  // in [-1/2, 1/2)
    const double mu2 = mu * mu;
    double log_kmu = 0.0;
    double r = 0.0;  // K_{mu+1}/K_mu

    if (x < 2.0) {
        // Temme's series.
        const double x2 = 0.5 * x;
        const double pimu = std::numbers::pi * mu;
        const double fact = std::abs(pimu) < kEps ? 1.0 : pimu / std::sin(pimu);
        double d = -std::log(x2);
        double e = mu * d;
        const double fact2 = std::abs(e) < kEps ? 1.0 : std::sinh(e) / e;
        const double gampl = 1.0 / std::tgamma(1.0 + mu);
        const double gammi = 1.0 / std::tgamma(1.0 - mu);
        const double gam1 = temme_gam1(mu);
        const double gam2 = 0.5 * (gammi + gampl);
        double ff = fact * (gam1 * std::cosh(e) + gam2 * fact2 * d);
        double sum = ff;
        e = std::exp(e);
        double p = 0.5 * e / gampl;
        double q = 0.5 / (e * gammi);
        double c = 1.0;
        d = x2 * x2;
        double sum1 = p;
        for (int i = 1; i <= kMaxIter; ++i) {
            ff = (i * ff + p + q) / (i * static_cast<double>(i) - mu2);
            c *= d / i;
            p /= (i - mu);
            q /= (i + mu);
            const double del = c * ff;
            sum += del;
            sum1 += c * (p - i * ff);
            if (std::abs(del) < std::abs(sum) * kEps) break;
        }
        log_kmu = std::log(sum) + (scaled ? x : 0.0);
        r = sum1 * (2.0 / x) / sum;
    } else {
        // Steed's continued fraction CF2 (Thompson-Barnett), scaled by e^x.
        double b = 2.0 * (1.0 + x);
        double d = 1.0 / b;
        double h = d;
        double delh = d;
        double q1 = 0.0;
        double q2 = 1.0;
        const double a1 = 0.25 - mu2;
        double q = a1;
        double c = a1;
        double a = -a1;
        double s = 1.0 + q * delh;
        for (int i = 2; i <= kMaxIter; ++i) {
            a -= 2 * (i - 1);
            c = -a * c / i;
            const double qnew = (q1 - b * q2) / a;
            q1 = q2;
            q2 = qnew;
            q += c * qnew;
            b += 2.0;
            d = 1.0 / (b + a * d);
            delh = (b * d - 1.0) * delh;
            h += delh;
            const double dels = q * delh;
            s += dels;
            if (std::abs(dels / s) < kEps) break;
        }
        h *= a1;
        log_kmu = 0.5 * std::log(std::numbers::pi / (2.0 * x)) - (scaled ? 0.0 : x) - std::log(s);
        r = (mu + x + 0.5 - h) / x;
    }

    // Forward recurrence on ratios; every ratio is >= 1 so the running
    // product only grows and is folded into the log before it overflows.
    double log_acc = log_kmu;
    double prod = 1.0;
    double below = std::numeric_limits<double>::quiet_NaN();
    for (int i = 1; i <= nl; ++i) {
        prod *= r;
        if (prod > 1e250) {
            log_acc += std::log(prod);
            prod = 1.0;
        }
        below = 1.0 / r;
        r = 2.0 * (mu + i) / x + below;
    }
    return {log_acc + std::log(prod), r, below};
}

}  // namespace

double log_bessel_k(double order, double x) {
    check_args(order, x);
    return k_state(std::abs(order), x).log_k;
}

double log_bessel_k_scaled(double order, double x) {
    check_args(order, x);
    return k_state(std::abs(order), x, true).log_k;
}

double bessel_k(double order, double x) { return std::exp(log_bessel_k(order, x)); }

BesselEval bessel_k_eval(double order, double x) {
    const double lk = log_bessel_k(order, x);
    return {order, x, std::exp(lk), lk};
}

double bessel_k_ratio(double order, double x) {
    check_args(order, x);
    if (order >= 0.0) return k_state(order, x).ratio;
    // K_{order+1}/K_order = K_{a-1}/K_a with a = -order.
    const double a = -order;
    if (a >= 1.0) {
        const KState s = k_state(a, x);
        if (std::isfinite(s.ratio_below)) return s.ratio_below;
        return 1.0 / k_state(a - 1.0, x).ratio;
    }
    return std::exp(k_state(1.0 - a, x).log_k - k_state(a, x).log_k);
}

double dlog_bessel_k_dorder(double order, double x) {
    check_args(order, x);
    const double h = 1e-5 * std::max(1.0, std::abs(order));
    auto f = [x](double v) { return k_state(std::abs(v), x).log_k; };
    return (-f(order + 2 * h) + 8 * f(order + h) - 8 * f(order - h) + f(order - 2 * h)) / (12 * h);
}

double digamma(double x) {
    if (!std::isfinite(x) || x <= 0.0)
        throw DomainError("digamma: argument must be positive and finite");
    double acc = 0.0;
    while (x < 10.0) {
        acc -= 1.0 / x;
        x += 1.0;
    }
    const double r = 1.0 / (x * x);
    // Asymptotic series in 1/x^2 with Bernoulli-number coefficients.
    const double tail =
        r * (1.0 / 12 -
             r * (1.0 / 120 -
                  r * (1.0 / 252 - r * (1.0 / 240 - r * (1.0 / 132 - r * (691.0 / 32760 - r / 12))))));
    return acc + std::log(x) - 0.5 / x - tail;
}

}  // namespace ghgmm
