#include "ghgmm/model.hpp"

#include <cmath>

namespace ghgmm {

std::string to_string(Variant v) {
    switch (v) {
        case Variant::ModelI: return "I";
        case Variant::ModelII: return "II";
        case Variant::ModelIII: return "III";
        case Variant::ModelIV: return "IV";
        case Variant::GaussianBaseline: return "gaussian";
    }
    return "unknown";
}

std::string to_string(Parameterization p) {
    return p == Parameterization::General ? "general" : "constrained";
}

LongitudinalDataset make_dataset(Eigen::MatrixXd outcomes, Eigen::MatrixXd covariates, Eigen::VectorXd time_scores,
                                 double center) {
    LongitudinalDataset d;
    const Eigen::Index n = outcomes.rows();
    const Eigen::Index T = outcomes.cols();
    d.outcomes = std::move(outcomes);
    d.covariates = covariates.size() == 0 ? Eigen::MatrixXd(n, 0) : std::move(covariates);
    d.time_scores = time_scores.size() == 0 ? Eigen::VectorXd::LinSpaced(T, 0.0, static_cast<double>(T - 1))
                                            : std::move(time_scores);
    d.center = center;
    validate(d);
    return d;
}

void validate(const LongitudinalDataset& d) {
    if (d.n() < 1) throw InputError("dataset has no subjects");
    if (d.T() < 2) throw InputError("dataset needs at least two occasions");
    if (d.time_scores.size() != d.T()) throw InputError("time_scores length differs from the number of occasions");
    for (Eigen::Index t = 1; t < d.T(); ++t)
        if (!(d.time_scores[t] > d.time_scores[t - 1])) throw InputError("time_scores must be strictly increasing");
    if (d.covariates.rows() != d.n()) throw InputError("covariate rows differ from the number of subjects");
    if (!d.outcomes.allFinite()) throw InputError("outcomes contain missing or non-finite cells");
    if (!d.covariates.allFinite()) throw InputError("covariates contain missing or non-finite cells");
    if (!std::isfinite(d.center)) throw InputError("center must be finite");
}

void validate(const ModelSpec& spec, Eigen::Index T, Eigen::Index n) {
    if (spec.K < 1) throw InputError("class count K must be at least 1");
    if (spec.q < 1) throw IdentifiabilityError("growth order q must be at least 1");
    if (spec.q > T) throw IdentifiabilityError("growth order q exceeds the number of occasions T");
    if (n < spec.K) throw IdentifiabilityError("fewer subjects than classes");
}

Eigen::MatrixXd log_mixing_probs(const MixingWeights& w, const Eigen::MatrixXd& covariates, Eigen::Index n, int K) {
    Eigen::MatrixXd out(n, K);
    if (!w.covariate_dependent) {
        const Eigen::RowVectorXd lp = w.pi.array().log().matrix().transpose();
        out.rowwise() = lp;
        return out;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::VectorXd eta = Eigen::VectorXd::Zero(K);
        eta.head(K - 1) = w.alpha_c + w.gamma_c * covariates.row(i).transpose();
        const double mx = eta.maxCoeff();
        const double lse = mx + std::log((eta.array() - mx).exp().sum());
        out.row(i) = (eta.array() - lse).matrix().transpose();
    }
    return out;
}

MarginalMoments marginal_moments(const ModelSpec& spec, const Eigen::MatrixXd& lambda_y, const ClassParameters& c,
                                 const Eigen::VectorXd& x) {
    const Eigen::Index T = lambda_y.rows();
    const Eigen::Index q = lambda_y.cols();
    if (c.alpha.size() != q || c.psi.rows() != q || c.psi.cols() != q || c.theta.size() != T ||
        c.gamma.rows() != q || c.gamma.cols() != x.size())
        throw InputError("marginal_moments: dimension mismatch");
    MarginalMoments m;
    m.mu = lambda_y * (c.alpha + c.gamma * x);
    m.sigma = lambda_y * c.psi * lambda_y.transpose();
    m.sigma.diagonal() += c.theta;
    m.total_skew = Eigen::VectorXd::Zero(T);
    if (latent_skew(spec.variant) && c.beta_eta.size() == q) m.total_skew += lambda_y * c.beta_eta;
    if (observed_skew(spec.variant) && c.beta_y.size() == T) m.total_skew += c.beta_y;
    return m;
}

int count_free_parameters(const ModelSpec& spec, int T, int q, int m) {
    const int K = spec.K;
    const int cov = q * (q + 1) / 2;
    const bool general = spec.parameterization == Parameterization::General;
    int n = 0;
    switch (spec.variant) {
        case Variant::ModelI:
            n = general ? K * T + 3 * K - 1 + K * (cov + 2 * q + q * m) : T + K + 1 + cov + q * (K + 1) + q * m;
            break;
        case Variant::ModelII:
            n = general ? 2 * T * K + 3 * K - 1 + K * (cov + q + q * m) : 2 * T + K + 1 + cov + q * K + q * m;
            break;
        case Variant::ModelIII:
            n = general ? K * T + 2 * K - 1 + K * (cov + 2 * q + q * m) : T + K + cov + q * (K + 1) + q * m;
            break;
        case Variant::ModelIV:
            n = general ? 2 * T * K + 2 * K - 1 + K * (cov + q + q * m) : 2 * T + K + cov + q * K + q * m;
            break;
        case Variant::GaussianBaseline:
            n = general ? K * T + K - 1 + K * (cov + q + q * m) : T + K - 1 + cov + q * K + q * m;
            break;
    }
    // Logit mixing replaces the K-1 simplex weights by (K-1)(1+m) coefficients.
    if (spec.use_covariate_mixing) n += (K - 1) * m;
    return n;
}

}  // namespace ghgmm
