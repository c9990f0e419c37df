#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "ghgmm/errors.hpp"
#include "ghgmm/linalg.hpp"

namespace ghgmm {

// I, II: generalized hyperbolic weights. III, IV: skew-t weights.
// I, III carry skewness on the growth factors, II, IV on the measurement errors.
enum class Variant { ModelI, ModelII, ModelIII, ModelIV, GaussianBaseline };

// General: every class block free. Constrained: classes share everything
// except the class intercepts or skewness (see count_free_parameters).
enum class Parameterization { General, Constrained };

inline bool ghd_weights(Variant v) { return v == Variant::ModelI || v == Variant::ModelII; }
inline bool gst_weights(Variant v) { return v == Variant::ModelIII || v == Variant::ModelIV; }
inline bool latent_skew(Variant v) { return v == Variant::ModelI || v == Variant::ModelIII; }
inline bool observed_skew(Variant v) { return v == Variant::ModelII || v == Variant::ModelIV; }

std::string to_string(Variant v);
std::string to_string(Parameterization p);

struct ModelSpec {
    Variant variant = Variant::ModelI;
    Parameterization parameterization = Parameterization::General;
    int K = 1;
    int q = 2;
    bool use_covariate_mixing = false;
};

// Complete-case wide data: row i holds subject i's T outcomes.
struct LongitudinalDataset {
    Eigen::MatrixXd outcomes;
    Eigen::MatrixXd covariates;  // n x m, m may be 0
    Eigen::VectorXd time_scores;
    double center = 0.0;

    Eigen::Index n() const { return outcomes.rows(); }
    Eigen::Index T() const { return outcomes.cols(); }
    Eigen::Index m() const { return covariates.cols(); }
};

// Time scores default to 0, 1, ..., T-1 with center 0.
LongitudinalDataset make_dataset(Eigen::MatrixXd outcomes, Eigen::MatrixXd covariates = {},
                                 Eigen::VectorXd time_scores = {}, double center = 0.0);
void validate(const LongitudinalDataset& data);
void validate(const ModelSpec& spec, Eigen::Index T, Eigen::Index n);

struct ClassParameters {
    Eigen::VectorXd alpha;     // q
    Eigen::MatrixXd gamma;     // q x m
    Eigen::VectorXd beta_eta;  // q, zero unless latent skew
    Eigen::VectorXd beta_y;    // T, zero unless observed skew
    Eigen::MatrixXd psi;       // q x q
    Eigen::VectorXd theta;     // diagonal of the T x T error covariance
    double lambda = -0.5;
    double omega = 1.0;
    double nu = 10.0;
};

struct MixingWeights {
    Eigen::VectorXd pi;        // simplex form
    Eigen::VectorXd alpha_c;   // K-1 logit intercepts, class K is the reference
    Eigen::MatrixXd gamma_c;   // (K-1) x m
    bool covariate_dependent = false;
};

// n x K matrix of log class probabilities.
Eigen::MatrixXd log_mixing_probs(const MixingWeights& w, const Eigen::MatrixXd& covariates, Eigen::Index n, int K);

struct FittedModel {
    ModelSpec spec;
    std::vector<ClassParameters> params;
    MixingWeights weights;
    std::vector<double> loglik_trace;
    Eigen::MatrixXd responsibilities;
    std::vector<int> map_labels;  // 1..K
    double loglik = 0.0;
    double bic = 0.0;
    int n_free = 0;
    bool converged = false;
    int iterations = 0;
    int restarts = 0;
    std::vector<std::string> flags;
};

// Column j holds (a_t - a_0)^j.
template <typename Derived>
Mat<typename Derived::Scalar> build_design_matrix(const Eigen::MatrixBase<Derived>& time_scores,
                                                   typename Derived::Scalar center, int q) {
    using S = typename Derived::Scalar;
    const Eigen::Index T = time_scores.size();
    if (q < 1) throw IdentifiabilityError("growth order q must be at least 1");
    if (q > T) throw IdentifiabilityError("growth order q exceeds the number of occasions T");
    Mat<S> lam(T, q);
    for (Eigen::Index t = 0; t < T; ++t) {
        S v(1);
        for (int j = 0; j < q; ++j) {
            lam(t, j) = v;
            v *= time_scores[t] - center;
        }
    }
    return lam;
}

struct MarginalMoments {
    Eigen::VectorXd mu;
    Eigen::MatrixXd sigma;
    Eigen::VectorXd total_skew;
};

// mu = L (alpha + Gamma x), Sigma = L Psi L' + Theta, skew = L beta_eta + beta_y.
MarginalMoments marginal_moments(const ModelSpec& spec, const Eigen::MatrixXd& lambda_y, const ClassParameters& c,
                                 const Eigen::VectorXd& x);

int count_free_parameters(const ModelSpec& spec, int T, int q, int m);

}  // namespace ghgmm
