#include "ghgmm/densities.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ghgmm/errors.hpp"
#include "ghgmm/linalg.hpp"
#include "ghgmm/special_functions.hpp"

namespace ghgmm {
namespace {

constexpr double kLog2Pi = 1.8378770664093453;
constexpr double kArgFloor = 1e-12;
constexpr double kBetaSmall = 1e-8;

void check_dims(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma,
                const Eigen::VectorXd& beta) {
    const auto p = y.size();
    if (p == 0 || mu.size() != p || beta.size() != p || sigma.rows() != p || sigma.cols() != p)
        throw InputError("density: dimension mismatch between y, mu, sigma and beta");
}

double gram_of(const NmvmQuadratics& q) {
    return q.gram >= 0.0 ? q.gram : std::max(q.rho * q.delta - q.cross * q.cross, 0.0);
}

// log K_order(z) + cross with z = sqrt(z2). When cross is close to z the two
// terms cancel, so z - cross is formed as (z^2 - cross^2) / (z + cross) with
// z^2 - cross^2 = excess supplied without cancellation by the caller.
double log_bessel_plus_cross(double order, double z2, double excess, double cross) {
    const double z = std::sqrt(z2);
    if (z < kArgFloor) return log_bessel_k(order, kArgFloor) + cross;
    const double gap = cross > 0.0 ? excess / (z + cross) : z - cross;
    return log_bessel_k_scaled(order, z) - gap;
}

bool gst_symmetric(double nu, const NmvmQuadratics& q, bool beta_small) {
    return beta_small || q.rho * (nu + q.delta) < 1e-20;
}

}  // namespace

NmvmQuadratics nmvm_quadratics(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma,
                               const Eigen::VectorXd& beta) {
    check_dims(y, mu, sigma, beta);
    const auto llt = spd_factor(sigma, "scale matrix");
    const Eigen::VectorXd zr = llt.matrixL().solve(y - mu);
    const Eigen::VectorXd zb = llt.matrixL().solve(beta);
    // Lagrange's identity keeps rho * delta - cross^2 exact when y - mu is nearly parallel to beta.
    double gram = 0.0;
    for (Eigen::Index i = 0; i < zr.size(); ++i)
        for (Eigen::Index j = i + 1; j < zr.size(); ++j) gram += std::pow(zr[i] * zb[j] - zr[j] * zb[i], 2);
    return {zr.squaredNorm(), zb.squaredNorm(), zr.dot(zb), log_det(llt), static_cast<int>(y.size()), gram};
}

double ghd_log_kernel(double lambda, double omega, const NmvmQuadratics& q) {
    const double psi = omega + q.rho;
    const double chi = omega + q.delta;
    const double order = lambda - 0.5 * q.dim;
    const double excess = omega * omega + omega * (q.rho + q.delta) + gram_of(q);
    return 0.5 * order * (std::log(chi) - std::log(psi)) + log_bessel_plus_cross(order, psi * chi, excess, q.cross) -
           0.5 * q.dim * kLog2Pi - 0.5 * q.log_det - log_bessel_k(lambda, std::max(omega, kArgFloor));
}

double gst_log_kernel(double nu, const NmvmQuadratics& q, bool beta_small) {
    const double p = q.dim;
    if (gst_symmetric(nu, q, beta_small)) {
        return std::lgamma(0.5 * (nu + p)) - std::lgamma(0.5 * nu) - 0.5 * p * std::log(nu * std::numbers::pi) -
               0.5 * q.log_det - 0.5 * (nu + p) * std::log1p(q.delta / nu) + q.cross;
    }
    // Integrating the inverse-gamma mixture in closed form gives
    // 2 (nu/2)^(nu/2) / Gamma(nu/2) * ((nu+delta)/rho)^(-(nu+p)/4) K_{(nu+p)/2}(sqrt(rho (nu+delta)))
    // times the Gaussian constant and exp(cross).
    const double chi = nu + q.delta;
    const double order = 0.5 * (nu + p);
    return std::log(2.0) + 0.5 * nu * std::log(0.5 * nu) - std::lgamma(0.5 * nu) - 0.5 * p * kLog2Pi -
           0.5 * q.log_det - 0.5 * order * (std::log(chi) - std::log(q.rho)) +
           log_bessel_plus_cross(order, q.rho * chi, q.rho * nu + gram_of(q), q.cross);
}

double gaussian_log_kernel(const NmvmQuadratics& q) {
    return -0.5 * (q.dim * kLog2Pi + q.log_det + q.delta);
}

double ghd_logdensity(const Eigen::VectorXd& y, const GhdParams& p) {
    validate(GigParams{p.omega, 1.0, p.lambda});
    return ghd_log_kernel(p.lambda, p.omega, nmvm_quadratics(y, p.mu, p.sigma, p.beta));
}

double gst_logdensity(const Eigen::VectorXd& y, const GstParams& p) {
    if (!(p.nu > 0.0) || !std::isfinite(p.nu)) throw DomainError("gst_logdensity: nu must be positive");
    return gst_log_kernel(p.nu, nmvm_quadratics(y, p.mu, p.sigma, p.beta), p.beta.norm() < kBetaSmall);
}

GigPsiChi ghd_posterior(double lambda, double omega, const NmvmQuadratics& q) {
    return {omega + q.rho, omega + q.delta, lambda - 0.5 * q.dim};
}

GigPsiChi gst_posterior(double nu, const NmvmQuadratics& q) {
    return {q.rho, nu + q.delta, -0.5 * (nu + q.dim)};
}

GigPsiChi gig_posterior_of_w(const Eigen::VectorXd& y, const GhdParams& p) {
    validate(GigParams{p.omega, 1.0, p.lambda});
    return ghd_posterior(p.lambda, p.omega, nmvm_quadratics(y, p.mu, p.sigma, p.beta));
}

GigPsiChi gig_posterior_of_w(const Eigen::VectorXd& y, const GstParams& p) {
    if (!(p.nu > 0.0)) throw DomainError("gig_posterior_of_w: nu must be positive");
    return gst_posterior(p.nu, nmvm_quadratics(y, p.mu, p.sigma, p.beta));
}

double draw_weight(Rng& rng, const WeightLaw& law) {
    if (const auto* g = std::get_if<GigParams>(&law)) return gig_draw(rng, *g);
    if (const auto* ig = std::get_if<InvGammaParams>(&law)) return invgamma_draw(rng, *ig);
    return 1.0;
}

Eigen::MatrixXd nmvm_sample(Rng& rng, const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma,
                            const Eigen::VectorXd& beta, const WeightLaw& law, Eigen::Index n) {
    check_dims(mu, mu, sigma, beta);
    const Eigen::MatrixXd l = spd_factor(sigma, "scale matrix").matrixL();
    std::normal_distribution<double> normal;
    Eigen::MatrixXd out(n, mu.size());
    Eigen::VectorXd z(mu.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        const double w = draw_weight(rng, law);
        for (Eigen::Index j = 0; j < z.size(); ++j) z[j] = normal(rng);
        out.row(i) = (mu + w * beta + std::sqrt(w) * (l * z)).transpose();
    }
    return out;
}

}  // namespace ghgmm
