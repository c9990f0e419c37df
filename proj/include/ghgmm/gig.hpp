#pragma once

#include <Eigen/Core>

#include "ghgmm/random.hpp"

namespace ghgmm {

// Generalized inverse Gaussian law with density
//   h(w) = (w/eta)^(lambda-1) / (2 eta K_lambda(omega)) * exp(-omega/2 (w/eta + eta/w)).
struct GigParams {
    double omega;
    double eta;
    double lambda;
};

// W ~ IG(shape, rate): density rate^shape / Gamma(shape) w^(-shape-1) exp(-rate/w).
struct InvGammaParams {
    double shape;
    double rate;
};

// The (psi, chi, lambda) form: density proportional to
// w^(lambda-1) exp(-(chi/w + psi w)/2).
struct GigPsiChi {
    double psi;
    double chi;
    double lambda;
};

struct GigMoments {
    double e_w;
    double e_winv;
    double e_logw;
};

void validate(const GigParams& p);
void validate(const InvGammaParams& p);

// omega = sqrt(psi chi), eta = sqrt(chi / psi). Requires psi, chi > 0.
GigParams to_gig_params(const GigPsiChi& p);

double gig_log_density(double w, const GigParams& p);
double gig_density(double w, const GigParams& p);

GigMoments gig_moments(const GigParams& p);

// Moments in (psi, chi, lambda) form. As psi -> 0 with lambda < 0 the law
// tends to IG(-lambda, chi/2), which is used directly below a tiny psi*chi.
GigMoments gig_moments(const GigPsiChi& p);

double invgamma_log_density(double w, const InvGammaParams& p);

double gig_draw(Rng& rng, const GigParams& p);
Eigen::VectorXd gig_sample(Rng& rng, const GigParams& p, Eigen::Index n);

double invgamma_draw(Rng& rng, const InvGammaParams& p);
Eigen::VectorXd invgamma_sample(Rng& rng, const InvGammaParams& p, Eigen::Index n);

}  // namespace ghgmm
