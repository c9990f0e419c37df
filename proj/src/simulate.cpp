#include "ghgmm/simulate.hpp"

#include <cmath>
#include <random>

#include "ghgmm/densities.hpp"
#include "ghgmm/linalg.hpp"
#include "ghgmm/random.hpp"

namespace ghgmm {

void validate(const ScenarioConfig& c) {
    if (c.n < 1 || c.K < 1 || c.T < 2 || c.q < 1) throw InputError("scenario: n, K, q must be positive and T >= 2");
    if (c.q > c.T) throw IdentifiabilityError("scenario: q exceeds T");
    if (c.mixing.size() != c.K || (c.mixing.array() <= 0.0).any() || std::abs(c.mixing.sum() - 1.0) > 1e-9)
        throw InputError("scenario: mixing must be a K-simplex with positive entries");
    if (c.time_scores.size() != c.T) throw InputError("scenario: time_scores length must equal T");
    for (int t = 1; t < c.T; ++t)
        if (!(c.time_scores[t] > c.time_scores[t - 1])) throw InputError("scenario: time_scores must increase");
    if (static_cast<int>(c.classes.size()) != c.K) throw InputError("scenario: need one class block per class");
    for (const auto& k : c.classes) {
        if (k.alpha.size() != c.q || k.psi.rows() != c.q || k.psi.cols() != c.q || k.theta.size() != c.T)
            throw InputError("scenario: class block dimensions do not match q and T");
        if (latent_skew(c.variant) && k.beta_eta.size() != c.q)
            throw InputError("scenario: latent skewness must have length q");
        if (observed_skew(c.variant) && k.beta_y.size() != c.T)
            throw InputError("scenario: observed skewness must have length T");
        if ((k.theta.array() <= 0.0).any()) throw InputError("scenario: error variances must be positive");
        if (ghd_weights(c.variant) && !(k.omega > 0.0)) throw InputError("scenario: omega must be positive");
        if (gst_weights(c.variant) && !(k.nu > 0.0)) throw InputError("scenario: nu must be positive");
        spd_factor(k.psi, "scenario growth-factor covariance");
    }
}

SimulatedData generate(const ScenarioConfig& cfg) {
    validate(cfg);
    const Eigen::MatrixXd lam = build_design_matrix(cfg.time_scores, cfg.center, cfg.q);
    std::vector<Eigen::MatrixXd> chol(cfg.K);
    for (int k = 0; k < cfg.K; ++k) chol[k] = spd_factor(cfg.classes[k].psi, "growth-factor covariance").matrixL();

    Eigen::MatrixXd y(cfg.n, cfg.T);
    std::vector<int> labels(cfg.n);
    std::normal_distribution<double> normal;
    for (int i = 0; i < cfg.n; ++i) {
        Rng rng = make_rng(cfg.seed, static_cast<std::uint64_t>(i));
        std::discrete_distribution<int> pick(cfg.mixing.data(), cfg.mixing.data() + cfg.K);
        const int k = pick(rng);
        const ClassParameters& c = cfg.classes[k];
        WeightLaw law = UnitWeight{};
        if (ghd_weights(cfg.variant)) law = GigParams{c.omega, 1.0, c.lambda};
        if (gst_weights(cfg.variant)) law = InvGammaParams{0.5 * c.nu, 0.5 * c.nu};
        const double w = draw_weight(rng, law);
        const double sw = std::sqrt(w);

        Eigen::VectorXd z(cfg.q);
        for (auto& v : z) v = normal(rng);
        Eigen::VectorXd eta = c.alpha + sw * (chol[k] * z);
        if (latent_skew(cfg.variant)) eta += w * c.beta_eta;
        Eigen::VectorXd e(cfg.T);
        for (auto& v : e) v = normal(rng);
        Eigen::VectorXd yi = lam * eta + sw * c.theta.cwiseSqrt().cwiseProduct(e);
        if (observed_skew(cfg.variant)) yi += w * c.beta_y;
        y.row(i) = yi.transpose();
        labels[i] = k + 1;
    }
    return {make_dataset(std::move(y), {}, cfg.time_scores, cfg.center), std::move(labels)};
}

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

ClassParameters block(Eigen::VectorXd alpha, Eigen::VectorXd psi_diag, int T) {
    ClassParameters c;
    const Eigen::Index q = alpha.size();
    c.alpha = std::move(alpha);
    c.gamma = Eigen::MatrixXd(q, 0);
    c.psi = psi_diag.asDiagonal();
    c.theta = Eigen::VectorXd::Constant(T, 0.25);
    c.beta_eta = Eigen::VectorXd::Zero(q);
    c.beta_y = Eigen::VectorXd::Zero(T);
    return c;
}

}  // namespace

ScenarioConfig builtin_scenario(int id) {
    ScenarioConfig s;
    switch (id) {
        case 1: {
            s.variant = Variant::ModelI;
            s.n = 400, s.K = 2, s.T = 50, s.q = 3;
            ClassParameters c1 = block(vec({15, 8, -6}), vec({1, 0.7, 2}), s.T);
            ClassParameters c2 = block(vec({-14, -10, 6}), vec({1.5, 0.8, 0.9}), s.T);
            c1.beta_eta = vec({1, 1, 1});
            c2.beta_eta = vec({-1, -1, -1});
            c1.lambda = -1, c1.omega = 2;
            c2.lambda = 2, c2.omega = 3;
            s.classes = {c1, c2};
            break;
        }
        case 2: {
            s.variant = Variant::ModelII;
            s.n = 800, s.K = 2, s.T = 5, s.q = 2;
            ClassParameters c1 = block(vec({4, 5}), vec({1, 0.7}), s.T);
            ClassParameters c2 = block(vec({2, 3}), vec({1.5, 0.8}), s.T);
            c1.beta_y = vec({1, -1, 1, 1, 1});
            c2.beta_y = vec({-1, 1, -1, -1, -1});
            c1.lambda = -1, c1.omega = 2;
            c2.lambda = -2, c2.omega = 3;
            s.classes = {c1, c2};
            break;
        }
        case 3: {
            s.variant = Variant::ModelIII;
            s.n = 1500, s.K = 3, s.T = 20, s.q = 2;
            ClassParameters c1 = block(vec({4, 5}), vec({1, 0.7}), s.T);
            ClassParameters c2 = block(vec({0, 0}), vec({0.7, 0.6}), s.T);
            ClassParameters c3 = block(vec({-4, -5}), vec({1.5, 0.8}), s.T);
            c1.beta_eta = vec({1, 1});
            c3.beta_eta = vec({-1, -1});
            c1.nu = 7, c2.nu = 5, c3.nu = 6;
            s.classes = {c1, c2, c3};
            break;
        }
        case 4: {
            s.variant = Variant::ModelIV;
            s.n = 1000, s.K = 2, s.T = 8, s.q = 3;
            ClassParameters c1 = block(vec({8, 7, -3}), vec({1, 0.7, 0.8}), s.T);
            ClassParameters c2 = block(vec({-8, -7, 3}), vec({1.5, 0.8, 0.9}), s.T);
            c1.beta_y = Eigen::VectorXd::Ones(s.T);
            c2.beta_y = -Eigen::VectorXd::Ones(s.T);
            c1.nu = 7, c2.nu = 6;
            s.classes = {c1, c2};
            break;
        }
        default:
            throw InputError("unknown scenario " + std::to_string(id));
    }
    s.name = "simulation-" + std::to_string(id);
    s.mixing = Eigen::VectorXd::Constant(s.K, 1.0 / s.K);
    s.time_scores = Eigen::VectorXd::LinSpaced(s.T, 0.0, s.T - 1.0);
    s.center = 0.0;
    return s;
}

}  // namespace ghgmm
