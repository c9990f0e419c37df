#include "ghgmm/gig.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "ghgmm/errors.hpp"
#include "ghgmm/special_functions.hpp"

namespace ghgmm {

void validate(const GigParams& p) {
    if (!(p.omega > 0.0) || !(p.eta > 0.0) || !std::isfinite(p.omega) || !std::isfinite(p.eta) ||
        !std::isfinite(p.lambda))
        throw DomainError("GIG parameters require omega > 0, eta > 0 and finite lambda");
}

void validate(const InvGammaParams& p) {
    if (!(p.shape > 0.0) || !(p.rate > 0.0) || !std::isfinite(p.shape) || !std::isfinite(p.rate))
        throw DomainError("inverse-gamma parameters require shape > 0 and rate > 0");
}

GigParams to_gig_params(const GigPsiChi& p) {
    if (!(p.psi > 0.0) || !(p.chi > 0.0))
        throw DomainError("GIG (psi, chi) form requires psi > 0 and chi > 0");
    return {std::sqrt(p.psi * p.chi), std::sqrt(p.chi / p.psi), p.lambda};
}

double gig_log_density(double w, const GigParams& p) {
    validate(p);
    if (!(w > 0.0)) throw DomainError("gig_density: w must be positive");
    const double z = w / p.eta;
    return (p.lambda - 1.0) * std::log(z) - std::log(2.0 * p.eta) - log_bessel_k(p.lambda, p.omega) -
           0.5 * p.omega * (z + 1.0 / z);
}

double gig_density(double w, const GigParams& p) { return std::exp(gig_log_density(w, p)); }

GigMoments gig_moments(const GigParams& p) {
    validate(p);
    const double r = bessel_k_ratio(p.lambda, p.omega);
    GigMoments m;
    m.e_w = p.eta * r;
    // K_{l+1}/K_l - 2l/omega equals K_{l-1}/K_l; for l > 0 the difference
    // cancels, so take the ratio one order down instead.
    m.e_winv = p.lambda > 0.0 ? 1.0 / (p.eta * bessel_k_ratio(p.lambda - 1.0, p.omega))
                              : (r - 2.0 * p.lambda / p.omega) / p.eta;
    m.e_logw = std::log(p.eta) + dlog_bessel_k_dorder(p.lambda, p.omega);
    return m;
}

GigMoments gig_moments(const GigPsiChi& p) {
    if (!(p.chi > 0.0) || !(p.psi >= 0.0) || !std::isfinite(p.lambda))
        throw DomainError("GIG (psi, chi) moments require chi > 0, psi >= 0");
    if (p.psi * p.chi < 1e-20) {
        if (p.lambda >= 0.0) throw DomainError("GIG with psi = 0 needs lambda < 0");
        const double shape = -p.lambda;
        const double scale = 0.5 * p.chi;
        return {shape > 1.0 ? scale / (shape - 1.0) : std::numeric_limits<double>::infinity(),
                shape / scale, std::log(scale) - digamma(shape)};
    }
    return gig_moments(to_gig_params(p));
}

double invgamma_log_density(double w, const InvGammaParams& p) {
    validate(p);
    if (!(w > 0.0)) throw DomainError("invgamma_density: w must be positive");
    return p.shape * std::log(p.rate) - std::lgamma(p.shape) - (p.shape + 1.0) * std::log(w) - p.rate / w;
}

namespace {

// Standardized GIG (eta = 1) with lambda >= 0: log of x^(lambda-1) exp(-omega/2 (x + 1/x)).
struct StdGig {
    double lambda;
    double omega;
    double log_g(double x) const { return (lambda - 1.0) * std::log(x) - 0.5 * omega * (x + 1.0 / x); }
    double mode() const {
        return lambda >= 1.0 ? (std::sqrt((lambda - 1.0) * (lambda - 1.0) + omega * omega) + lambda - 1.0) / omega
                             : omega / (std::sqrt((1.0 - lambda) * (1.0 - lambda) + omega * omega) + 1.0 - lambda);
    }
};

double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

// Ratio-of-uniforms with mode shift; bounding box from the cubic's roots.
double rou_shifted(Rng& rng, const StdGig& g) {
    const double m = g.mode();
    const double lm = g.log_g(m);
    const double a = -2.0 * (g.lambda + 1.0) / g.omega - m;
    const double b = 2.0 * (g.lambda - 1.0) * m / g.omega - 1.0;
    const double p = b - a * a / 3.0;
    const double q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + m;
    const double phi = std::acos(std::clamp(-0.5 * q * std::sqrt(-27.0 / (p * p * p)), -1.0, 1.0));
    const double r = std::sqrt(-4.0 * p / 3.0);
    const double xm = r * std::cos(phi / 3.0 + 4.0 * std::numbers::pi / 3.0) - a / 3.0;
    const double xp = r * std::cos(phi / 3.0) - a / 3.0;
    const double um = (xm - m) * std::exp(0.5 * (g.log_g(xm) - lm));
    const double up = (xp - m) * std::exp(0.5 * (g.log_g(xp) - lm));
    for (;;) {
        const double u = um + (up - um) * uniform01(rng);
        const double v = uniform01(rng);
        const double x = u / v + m;
        if (x <= 0.0 || !std::isfinite(x)) continue;
        if (std::log(v) <= 0.5 * (g.log_g(x) - lm)) return x;
    }
}

// Ratio-of-uniforms without shift, for moderate lambda and omega.
double rou_plain(Rng& rng, const StdGig& g) {
    const double m = g.mode();
    const double lm = g.log_g(m);
    const double xp = (1.0 + g.lambda + std::sqrt((1.0 + g.lambda) * (1.0 + g.lambda) + g.omega * g.omega)) / g.omega;
    const double up = xp * std::exp(0.5 * (g.log_g(xp) - lm));
    for (;;) {
        const double u = up * uniform01(rng);
        const double v = uniform01(rng);
        const double x = u / v;
        if (x <= 0.0 || !std::isfinite(x)) continue;
        if (std::log(v) <= 0.5 * (g.log_g(x) - lm)) return x;
    }
}

// Rejection from a three-piece dominating density, small omega and lambda < 1.
double rejection_small(Rng& rng, const StdGig& g) {
    const double lam = g.lambda;
    const double om = g.omega;
    const double m = g.mode();
    const double x0 = om / (1.0 - lam);
    const double xs = std::max(x0, 2.0 / om);
    const double k1 = std::exp(g.log_g(m));
    const double a1 = k1 * x0;
    double k2 = 0.0;
    double a2 = 0.0;
    const double x0_pow = std::pow(x0, lam);
    if (x0 < 2.0 / om) {
        k2 = std::exp(-om);
        a2 = lam > 0.0 ? k2 * (std::pow(2.0 / om, lam) - x0_pow) / lam : k2 * std::log(2.0 / (om * om));
    }
    const double k3 = std::pow(xs, lam - 1.0);
    const double a3 = 2.0 * k3 * std::exp(-xs * om / 2.0) / om;
    const double total = a1 + a2 + a3;
    for (;;) {
        const double u = uniform01(rng);
        double v = total * uniform01(rng);
        double x;
        double h;
        if (v <= a1) {
            x = x0 * v / a1;
            h = k1;
        } else if (v <= a1 + a2) {
            v -= a1;
            x = lam > 0.0 ? std::pow(x0_pow + v * lam / k2, 1.0 / lam) : om * std::exp(v * std::exp(om));
            h = k2 * std::pow(x, lam - 1.0);
        } else {
            v -= a1 + a2;
            x = -(2.0 / om) * std::log(std::exp(-xs * om / 2.0) - v * om / (2.0 * k3));
            h = k3 * std::exp(-x * om / 2.0);
        }
        if (!(x > 0.0) || !std::isfinite(x)) continue;
        if (u * h <= std::exp(g.log_g(x))) return x;
    }
}

}  // namespace

double gig_draw(Rng& rng, const GigParams& p) {
    validate(p);
    // 1/X ~ GIG(omega, 1, -lambda) for the standardized law.
    const StdGig g{std::abs(p.lambda), p.omega};
    double x;
    if (g.lambda > 1.0 || g.omega > 1.0)
        x = rou_shifted(rng, g);
    else if (g.omega <= std::min(0.5, 2.0 / 3.0 * std::sqrt(1.0 - g.lambda)))
        x = rejection_small(rng, g);
    else
        x = rou_plain(rng, g);
    if (p.lambda < 0.0) x = 1.0 / x;
    return p.eta * x;
}

Eigen::VectorXd gig_sample(Rng& rng, const GigParams& p, Eigen::Index n) {
    Eigen::VectorXd out(n);
    for (Eigen::Index i = 0; i < n; ++i) out[i] = gig_draw(rng, p);
    return out;
}

double invgamma_draw(Rng& rng, const InvGammaParams& p) {
    validate(p);
    std::gamma_distribution<double> gamma(p.shape, 1.0 / p.rate);
    return 1.0 / gamma(rng);
}

Eigen::VectorXd invgamma_sample(Rng& rng, const InvGammaParams& p, Eigen::Index n) {
    validate(p);
    std::gamma_distribution<double> gamma(p.shape, 1.0 / p.rate);
    Eigen::VectorXd out(n);
    for (Eigen::Index i = 0; i < n; ++i) out[i] = 1.0 / gamma(rng);
    return out;
}

}  // namespace ghgmm
