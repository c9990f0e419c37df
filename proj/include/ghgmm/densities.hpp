#pragma once

#include <Eigen/Core>
#include <variant>

#include "ghgmm/gig.hpp"
#include "ghgmm/random.hpp"

namespace ghgmm {

struct GhdParams {
    double lambda;
    double omega;
    Eigen::VectorXd mu;
    Eigen::MatrixXd sigma;
    Eigen::VectorXd beta;
};

struct GstParams {
    Eigen::VectorXd mu;
    Eigen::MatrixXd sigma;
    Eigen::VectorXd beta;
    double nu;
};

// W = 1 almost surely: the mixture collapses to a Gaussian.
struct UnitWeight {};

using WeightLaw = std::variant<GigParams, InvGammaParams, UnitWeight>;

// Everything the mixture densities need from y, mu, Sigma, beta:
// delta = (y-mu)' S^-1 (y-mu), rho = b' S^-1 b, cross = (y-mu)' S^-1 b.
struct NmvmQuadratics {
    double delta;
    double rho;
    double cross;
    double log_det;
    int dim;
    // rho * delta - cross^2 >= 0; negative means "derive from the fields above".
    double gram = -1.0;
};

NmvmQuadratics nmvm_quadratics(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma,
                               const Eigen::VectorXd& beta);

double ghd_log_kernel(double lambda, double omega, const NmvmQuadratics& q);
// beta_small selects the symmetric closed form.
double gst_log_kernel(double nu, const NmvmQuadratics& q, bool beta_small);
double gaussian_log_kernel(const NmvmQuadratics& q);

double ghd_logdensity(const Eigen::VectorXd& y, const GhdParams& p);
double gst_logdensity(const Eigen::VectorXd& y, const GstParams& p);

// Posterior of W given y, in (psi, chi, lambda) form.
GigPsiChi ghd_posterior(double lambda, double omega, const NmvmQuadratics& q);
GigPsiChi gst_posterior(double nu, const NmvmQuadratics& q);
GigPsiChi gig_posterior_of_w(const Eigen::VectorXd& y, const GhdParams& p);
GigPsiChi gig_posterior_of_w(const Eigen::VectorXd& y, const GstParams& p);

double draw_weight(Rng& rng, const WeightLaw& law);

// Rows are draws of mu + W beta + sqrt(W) Z, Z ~ N(0, Sigma).
Eigen::MatrixXd nmvm_sample(Rng& rng, const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma,
                            const Eigen::VectorXd& beta, const WeightLaw& law, Eigen::Index n);

}  // namespace ghgmm
