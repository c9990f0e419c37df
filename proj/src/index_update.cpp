#include <algorithm>
#include <cmath>
#include <limits>

#include "ghgmm/em.hpp"
#include "ghgmm/special_functions.hpp"

namespace ghgmm {
namespace {

constexpr double kOmegaMin = 1e-4;
constexpr double kOmegaMax = 200.0;
constexpr double kLambdaMax = 50.0;
constexpr double kNuMin = 2.001;
constexpr double kNuMax = 200.0;
constexpr int kMaxHalvings = 40;

}  // namespace

double ghd_index_objective(double omega, double lambda, const IndexAggregates& agg) {
    return -log_bessel_k(lambda, omega) + (lambda - 1.0) * agg.d_bar - 0.5 * omega * (agg.a_bar + agg.b_bar);
}

GhdIndex update_ghd_index(const IndexAggregates& agg, GhdIndex prev) {
    auto q = [&agg](double om, double la) { return ghd_index_objective(om, la, agg); };

    // Lambda: fixed-point proposal lambda * d / (d/dlambda log K), Newton when
    // the derivative vanishes, then backtrack toward the old value until q
    // does not drop.
    const double la0 = prev.lambda;
    const double om0 = prev.omega;
    const double q0 = q(om0, la0);
    const double dk = dlog_bessel_k_dorder(la0, om0);
    double prop = std::abs(dk) > 1e-8 && std::abs(la0) > 1e-8 ? agg.d_bar * la0 / dk
                                                               : std::numeric_limits<double>::quiet_NaN();
    if (!std::isfinite(prop)) {
        const double h = 1e-4 * std::max(1.0, std::abs(la0));
        const double d2 = -(dlog_bessel_k_dorder(la0 + h, om0) - dlog_bessel_k_dorder(la0 - h, om0)) / (2 * h);
        const double d1 = agg.d_bar - dk;
        prop = d2 < 0.0 ? la0 - d1 / d2 : la0 + (d1 > 0 ? 1.0 : -1.0);
    }
    prop = std::clamp(prop, -kLambdaMax, kLambdaMax);
    double la = la0;
    double t = 1.0;
    for (int i = 0; i < kMaxHalvings; ++i, t *= 0.5) {
        const double cand = la0 + t * (prop - la0);
        if (q(om0, cand) >= q0) {
            la = cand;
            break;
        }
    }

    // Omega: Newton on q(., lambda) with central-difference derivatives.
    const double qa = q(om0, la);
    const double h = 1e-5 * std::max(1.0, om0);
    const double qp = q(om0 + h, la);
    const double qm = q(om0 - h, la);
    const double d1 = (qp - qm) / (2 * h);
    const double d2 = (qp - 2 * qa + qm) / (h * h);
    const double step = d2 < 0.0 ? -d1 / d2 : (d1 > 0 ? om0 : -0.5 * om0);
    double om = om0;
    t = 1.0;
    for (int i = 0; i < kMaxHalvings; ++i, t *= 0.5) {
        const double cand = std::clamp(om0 + t * step, kOmegaMin, kOmegaMax);
        if (q(cand, la) >= qa) {
            om = cand;
            break;
        }
    }
    return {la, om};
}

NuUpdate update_nu(double c) {
    auto f = [c](double nu) { return std::log(0.5 * nu) + 1.0 - digamma(0.5 * nu) - c; };
    double lo = kNuMin;
    double hi = kNuMax;
    if (f(lo) <= 0.0) return {lo, true};
    if (f(hi) >= 0.0) return {hi, true};
    while (hi - lo > 1e-12 * hi) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) > 0.0 ? lo : hi) = mid;
    }
    return {0.5 * (lo + hi), false};
}

IndexAggregates index_aggregates(const EStepCache& cache, int k) {
    const Eigen::MatrixXd& p = cache.responsibilities;
    if (k >= 0) {
        const double nk = p.col(k).sum();
        return {p.col(k).dot(cache.e1.col(k)) / nk, p.col(k).dot(cache.e2.col(k)) / nk,
                p.col(k).dot(cache.e3.col(k)) / nk};
    }
    const double n = p.sum();
    return {p.cwiseProduct(cache.e1).sum() / n, p.cwiseProduct(cache.e2).sum() / n,
            p.cwiseProduct(cache.e3).sum() / n};
}

}  // namespace ghgmm
