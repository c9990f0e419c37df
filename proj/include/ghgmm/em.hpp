#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ghgmm/model.hpp"
#include "ghgmm/random.hpp"

namespace ghgmm {

enum class InitMethod { RandomPartition, KMeansLike, Supplied };

struct FitConfig {
    int max_iter = 1000;
    double aitken_eps = 1e-5;
    int n_starts = 3;
    InitMethod init = InitMethod::KMeansLike;
    std::uint64_t seed = 1;
    double ridge = 1e-4;
    int max_restarts = 3;
    // Newton steps of the observed-likelihood index/scale update after each
    // M-step; 0 gives plain EM.
    int index_steps = 1;
    // Used when init == Supplied.
    std::vector<ClassParameters> initial_params;
    MixingWeights initial_weights;
};

// Conditional expectations given y_i and membership in class k.
// e1 = E[W], e2 = E[1/W], e3 = E[log W], e4 = E[eta], e5 = E[eta/W], e6 = E[eta eta'/W].
// Given (y, w) the growth factors are N(m0 + w g, w V); m0 and g are kept
// because the covariance updates are better conditioned in those terms.
struct EStepCache {
    Eigen::MatrixXd responsibilities;  // n x K
    Eigen::MatrixXd e1, e2, e3;        // n x K
    std::vector<Eigen::MatrixXd> e4;   // per class, n x q
    std::vector<Eigen::MatrixXd> e5;   // per class, n x q
    std::vector<std::vector<Eigen::MatrixXd>> e6;  // per class, per subject, q x q
    std::vector<Eigen::MatrixXd> v;    // per class, q x q
    std::vector<Eigen::MatrixXd> m0;   // per class, n x q
    std::vector<Eigen::VectorXd> g;    // per class, q
    Eigen::MatrixXd log_joint;         // n x K, log pi_ik + log f_k(y_i)
    double loglik = 0.0;
};

// Growth factors given (y, w): N(c (a + w beta_eta) + b (y - w beta_y), w V)
// with V = (Psi^-1 + L' Theta^-1 L)^-1, c = V Psi^-1, b = V L' Theta^-1.
struct GrowthPosterior {
    Eigen::MatrixXd v;
    Eigen::MatrixXd c;
    Eigen::MatrixXd b;

    Eigen::VectorXd mean(const Eigen::VectorXd& a, const Eigen::VectorXd& y, double w,
                         const Eigen::VectorXd& beta_eta, const Eigen::VectorXd& beta_y) const {
        return c * (a + w * beta_eta) + b * (y - w * beta_y);
    }
};

GrowthPosterior growth_posterior(const Eigen::MatrixXd& psi, const Eigen::MatrixXd& lam, const Eigen::VectorXd& theta);

EStepCache estep(const LongitudinalDataset& data, const ModelSpec& spec, const std::vector<ClassParameters>& params,
                 const MixingWeights& weights);

// Observed-data log-likelihood (the E-step's by-product, without the expectations).
double log_likelihood(const LongitudinalDataset& data, const ModelSpec& spec,
                      const std::vector<ClassParameters>& params, const MixingWeights& weights);

// Class averages of E[W], E[1/W] and E[log W] under the responsibilities.
struct IndexAggregates {
    double a_bar;
    double b_bar;
    double d_bar;
};

struct GhdIndex {
    double lambda;
    double omega;
};

struct NuUpdate {
    double nu;
    bool at_boundary;
};

// q(omega, lambda) = -log K_lambda(omega) + (lambda - 1) d - omega (a + b) / 2.
double ghd_index_objective(double omega, double lambda, const IndexAggregates& agg);
GhdIndex update_ghd_index(const IndexAggregates& agg, GhdIndex prev);

// Raises the observed log-likelihood jointly over the weight-law index
// ((lambda, omega) or nu) and a common scale s applied as Psi, Theta -> s Psi,
// s Theta and beta -> s beta, with every other parameter held. Per class, or
// shared when constrained. Never lowers the likelihood; a no-op for the
// Gaussian baseline.
std::vector<ClassParameters> maximize_index_likelihood(const LongitudinalDataset& data, const ModelSpec& spec,
                                                       const std::vector<ClassParameters>& params,
                                                       const MixingWeights& weights, int max_steps = 8);

// Root of log(nu/2) + 1 - digamma(nu/2) - c on [2.001, 200], c = mean of E[log W] + E[1/W].
NuUpdate update_nu(double c);

// Aggregates for class k, or pooled over all classes when k < 0.
IndexAggregates index_aggregates(const EStepCache& cache, int k);

struct MStepResult {
    std::vector<ClassParameters> params;
    MixingWeights weights;
    std::vector<std::string> flags;
};

MStepResult mstep(const LongitudinalDataset& data, const ModelSpec& spec, const EStepCache& cache,
                  const std::vector<ClassParameters>& params, const MixingWeights& weights, double ridge = 1e-4);

// Moment start from a hard partition (labels in 0..K-1).
std::pair<std::vector<ClassParameters>, MixingWeights> moment_start(const LongitudinalDataset& data,
                                                                    const ModelSpec& spec,
                                                                    const std::vector<int>& labels, double ridge);

std::pair<std::vector<ClassParameters>, MixingWeights> initialize(const LongitudinalDataset& data,
                                                                  const ModelSpec& spec, const FitConfig& config,
                                                                  Rng& rng);

// Stopping rule on three consecutive log-likelihoods.
bool aitken_converged(double l_prev, double l_cur, double l_next, double eps);

FittedModel fit(const LongitudinalDataset& data, const ModelSpec& spec, const FitConfig& config);

}  // namespace ghgmm
