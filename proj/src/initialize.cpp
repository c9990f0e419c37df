#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "ghgmm/em.hpp"
#include "ghgmm/linalg.hpp"

namespace ghgmm {
namespace {

constexpr double kThetaInitFloor = 1e-4;

// Lloyd iterations from k-means++ seeds on the raw trajectories.
std::vector<int> kmeans_partition(const Eigen::MatrixXd& y, int K, Rng& rng) {
    const Eigen::Index n = y.rows();
    Eigen::MatrixXd centers(K, y.cols());
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    centers.row(0) = y.row(pick(rng));
    Eigen::VectorXd d2 = (y.rowwise() - centers.row(0)).rowwise().squaredNorm();
    for (int k = 1; k < K; ++k) {
        std::discrete_distribution<Eigen::Index> dd(d2.data(), d2.data() + n);
        const Eigen::Index idx = d2.sum() > 0.0 ? dd(rng) : pick(rng);
        centers.row(k) = y.row(idx);
        d2 = d2.cwiseMin((y.rowwise() - centers.row(k)).rowwise().squaredNorm());
    }
    std::vector<int> labels(n, -1);
    for (int it = 0; it < 100; ++it) {
        bool changed = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::Index best;
            (centers.rowwise() - y.row(i)).rowwise().squaredNorm().minCoeff(&best);
            if (labels[i] != best) {
                labels[i] = static_cast<int>(best);
                changed = true;
            }
        }
        if (!changed) break;
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(K, y.cols());
        Eigen::VectorXd counts = Eigen::VectorXd::Zero(K);
        for (Eigen::Index i = 0; i < n; ++i) {
            sums.row(labels[i]) += y.row(i);
            counts[labels[i]] += 1.0;
        }
        for (int k = 0; k < K; ++k)
            if (counts[k] > 0) centers.row(k) = sums.row(k) / counts[k];
    }
    return labels;
}

std::vector<int> random_partition(Eigen::Index n, int K, Rng& rng) {
    std::vector<int> labels(n);
    std::uniform_int_distribution<int> pick(0, K - 1);
    for (auto& l : labels) l = pick(rng);
    // Every class gets at least one member.
    for (int k = 0; k < K && k < n; ++k) labels[k] = k;
    std::shuffle(labels.begin(), labels.end(), rng);
    return labels;
}

}  // namespace

std::pair<std::vector<ClassParameters>, MixingWeights> moment_start(const LongitudinalDataset& data,
                                                                    const ModelSpec& spec,
                                                                    const std::vector<int>& labels, double ridge) {
    const int K = spec.K;
    const int q = spec.q;
    const Eigen::Index n = data.n();
    const Eigen::Index T = data.T();
    const Eigen::Index m = data.m();
    const Eigen::MatrixXd lam = build_design_matrix(data.time_scores, data.center, q);
    const double floor = std::max(ridge, kThetaInitFloor);

    // Per-subject least-squares growth factors and their residuals.
    const Eigen::MatrixXd proj = (lam.transpose() * lam).ldlt().solve(lam.transpose());
    const Eigen::MatrixXd eta = data.outcomes * proj.transpose();
    const Eigen::MatrixXd resid = data.outcomes - eta * lam.transpose();
    Eigen::MatrixXd design(n, 1 + m);
    design.col(0).setOnes();
    if (m > 0) design.rightCols(m) = data.covariates;

    auto fit_block = [&](const std::vector<Eigen::Index>& rows, ClassParameters& c) {
        const Eigen::Index nk = static_cast<Eigen::Index>(rows.size());
        Eigen::MatrixXd X(nk, 1 + m);
        Eigen::MatrixXd E(nk, q);
        Eigen::MatrixXd R(nk, T);
        for (Eigen::Index r = 0; r < nk; ++r) {
            X.row(r) = design.row(rows[r]);
            E.row(r) = eta.row(rows[r]);
            R.row(r) = resid.row(rows[r]);
        }
        Eigen::MatrixXd xtx = X.transpose() * X;
        xtx.diagonal().array() += 1e-10;
        const Eigen::MatrixXd coef = xtx.ldlt().solve(X.transpose() * E);  // (1+m) x q
        c.alpha = coef.row(0).transpose();
        c.gamma = coef.bottomRows(m).transpose();
        const Eigen::MatrixXd dev = E - X * coef;
        c.psi = dev.transpose() * dev / std::max<double>(1.0, static_cast<double>(nk - 1));
        c.psi.diagonal().array() += ridge;
        c.psi = symmetrized(c.psi);
        c.theta = (R.array().square().colwise().sum() / std::max<double>(1.0, static_cast<double>(nk)))
                      .matrix()
                      .transpose()
                      .cwiseMax(floor);
    };

    std::vector<std::vector<Eigen::Index>> members(K);
    for (Eigen::Index i = 0; i < n; ++i) members[labels[i]].push_back(i);
    std::vector<Eigen::Index> everyone(n);
    for (Eigen::Index i = 0; i < n; ++i) everyone[i] = i;

    ClassParameters global;
    fit_block(everyone, global);

    std::vector<ClassParameters> params(K);
    for (int k = 0; k < K; ++k) {
        ClassParameters& c = params[k];
        if (static_cast<int>(members[k].size()) >= std::max<int>(q + 1, static_cast<int>(m) + 2))
            fit_block(members[k], c);
        else
            c = global;
        c.beta_eta = Eigen::VectorXd::Zero(q);
        c.beta_y = Eigen::VectorXd::Zero(T);
        c.lambda = -0.5;
        c.omega = 1.0;
        c.nu = 10.0;
        if (static_cast<Eigen::Index>(c.psi.rows()) != q) c.psi = Eigen::MatrixXd::Identity(q, q);
        spd_factor(c.psi, "initial growth-factor covariance");
    }

    MixingWeights w;
    w.pi.resize(K);
    for (int k = 0; k < K; ++k) w.pi[k] = (static_cast<double>(members[k].size()) + 1.0) / (n + K);

    // Constrained forms pool the shared blocks with class-size weights.
    if (spec.parameterization == Parameterization::Constrained) {
        Eigen::MatrixXd psi = Eigen::MatrixXd::Zero(q, q);
        Eigen::VectorXd theta = Eigen::VectorXd::Zero(T);
        Eigen::VectorXd alpha = Eigen::VectorXd::Zero(q);
        Eigen::MatrixXd gamma = Eigen::MatrixXd::Zero(q, m);
        for (int k = 0; k < K; ++k) {
            psi += w.pi[k] * params[k].psi;
            theta += w.pi[k] * params[k].theta;
            alpha += w.pi[k] * params[k].alpha;
            gamma += w.pi[k] * params[k].gamma;
        }
        for (auto& c : params) {
            c.psi = psi;
            c.theta = theta;
            c.gamma = gamma;
            if (latent_skew(spec.variant)) c.alpha = alpha;
        }
    }

    if (spec.use_covariate_mixing && m > 0) {
        w.covariate_dependent = true;
        w.alpha_c = (w.pi.head(K - 1).array() / w.pi[K - 1]).log().matrix();
        w.gamma_c = Eigen::MatrixXd::Zero(K - 1, m);
    }
    return {params, w};
}

std::pair<std::vector<ClassParameters>, MixingWeights> initialize(const LongitudinalDataset& data,
                                                                  const ModelSpec& spec, const FitConfig& config,
                                                                  Rng& rng) {
    validate(spec, data.T(), data.n());
    switch (config.init) {
        case InitMethod::Supplied: {
            if (static_cast<int>(config.initial_params.size()) != spec.K)
                throw InputError("supplied initial parameters do not match K");
            return {config.initial_params, config.initial_weights};
        }
        case InitMethod::RandomPartition:
            return moment_start(data, spec, random_partition(data.n(), spec.K, rng), config.ridge);
        case InitMethod::KMeansLike:
            break;
    }
    return moment_start(data, spec, kmeans_partition(data.outcomes, spec.K, rng), config.ridge);
}

}  // namespace ghgmm
