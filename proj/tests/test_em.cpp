#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "ghgmm/em.hpp"
#include "ghgmm/errors.hpp"
#include "ghgmm/gig.hpp"
#include "ghgmm/simulate.hpp"
#include "estep_oracle.hpp"
#include "oracles.hpp"

using namespace ghgmm;

namespace {

const std::vector<Variant> kAllVariants{Variant::ModelI, Variant::ModelII, Variant::ModelIII, Variant::ModelIV,
                                        Variant::GaussianBaseline};

ClassParameters example_class(Variant v, int m = 0) {
    ClassParameters c;
    c.alpha = Eigen::Vector2d(1.0, 0.5);
    c.gamma = Eigen::MatrixXd::Zero(2, m);
    if (m > 0) c.gamma.col(0) = Eigen::Vector2d(0.7, -0.4);
    c.psi.resize(2, 2);
    c.psi << 1.0, 0.3, 0.3, 0.5;
    c.theta = Eigen::Vector4d(0.4, 0.5, 0.6, 0.7);
    c.beta_eta = latent_skew(v) ? Eigen::VectorXd(Eigen::Vector2d(0.8, -0.3)) : Eigen::VectorXd::Zero(2);
    c.beta_y = observed_skew(v) ? Eigen::VectorXd(Eigen::Vector4d(0.2, -0.1, 0.3, 0.1)) : Eigen::VectorXd::Zero(4);
    c.lambda = 0.7;
    c.omega = 1.5;
    c.nu = 6.0;
    return c;
}

LongitudinalDataset example_data(int m = 0) {
    Eigen::MatrixXd y(4, 4);
    y << 1.2, 1.9, 2.1, 3.5,  //
        0.1, 0.4, 0.2, 0.9,   //
        3.0, 4.1, 5.5, 7.9,   //
        -0.5, 0.3, 1.4, 1.1;
    Eigen::MatrixXd x(4, m);
    if (m > 0) x.col(0) = Eigen::Vector4d(0.5, -1.0, 2.0, 0.0);
    return make_dataset(y, x, Eigen::Vector4d(0.0, 1.0, 2.0, 3.0), 0.0);
}

MixingWeights single_class() {
    MixingWeights w;
    w.pi = Eigen::VectorXd::Ones(1);
    return w;
}

ScenarioConfig small_scenario(Variant v, int n, std::uint64_t seed) {
    ScenarioConfig s;
    s.name = "small";
    s.variant = v;
    s.n = n;
    s.K = 2;
    s.T = 4;
    s.q = 2;
    s.mixing = Eigen::Vector2d(0.45, 0.55);
    s.time_scores = Eigen::Vector4d(0.0, 1.0, 2.0, 3.0);
    s.center = 0.0;
    ClassParameters a = example_class(v);
    ClassParameters b = example_class(v);
    b.alpha = Eigen::Vector2d(-3.0, 2.0);
    b.lambda = -1.2;
    b.nu = 9.0;
    if (latent_skew(v)) b.beta_eta = Eigen::Vector2d(-0.5, 0.4);
    s.classes = {a, b};
    s.seed = seed;
    return s;
}

ModelSpec spec_for(Variant v, int K, Parameterization p = Parameterization::General) { return {v, p, K, 2, false}; }

}  // namespace

TEST_CASE("growth-factor posterior matches the Schur complement form") {
    const ClassParameters c = example_class(Variant::ModelI);
    const Eigen::MatrixXd lam = build_design_matrix(Eigen::Vector4d(0, 1, 2, 3), 0.0, 2);
    const GrowthPosterior gp = growth_posterior(c.psi, lam, c.theta);
    const Eigen::VectorXd y = Eigen::Vector4d(1.2, 1.9, 2.1, 3.5);
    const Eigen::VectorXd by = Eigen::Vector4d(0.2, -0.1, 0.3, 0.1);
    for (double w : {0.3, 1.0, 2.7}) {
        const auto s = oracle::schur_conditional(c.psi, lam, c.theta.asDiagonal(), c.alpha, c.beta_eta, by, y, w);
        CHECK((gp.v - s.cov_over_w).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((gp.mean(c.alpha, y, w, c.beta_eta, by) - s.mean).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("e-step expectations match the Bayes quadrature oracle") {
    for (int m : {0, 1}) {
        const LongitudinalDataset data = example_data(m);
        const Eigen::MatrixXd lam = build_design_matrix(data.time_scores, data.center, 2);
        for (Variant v : kAllVariants) {
            CAPTURE(to_string(v));
            CAPTURE(m);
            const ClassParameters c = example_class(v, m);
            const EStepCache cache = estep(data, spec_for(v, 1), {c}, single_class());
            double ll = 0.0;
            for (Eigen::Index i = 0; i < data.n(); ++i) {
                const oracle::Posterior p = oracle::estep_posterior(v, c, lam, data.outcomes.row(i).transpose(),
                                                     data.covariates.row(i).transpose());
                ll += p.log_f;
                CHECK(cache.responsibilities(i, 0) == doctest::Approx(1.0));
                CHECK(cache.log_joint(i, 0) == doctest::Approx(p.log_f).epsilon(1e-8));
                CHECK(cache.e1(i, 0) == doctest::Approx(p.e1).epsilon(1e-7));
                CHECK(cache.e2(i, 0) == doctest::Approx(p.e2).epsilon(1e-7));
                if (v != Variant::GaussianBaseline) CHECK(std::abs(cache.e3(i, 0) - p.e3) < 1e-7);
                CHECK((cache.e4[0].row(i).transpose() - p.e4).cwiseAbs().maxCoeff() < 1e-7);
                CHECK((cache.e5[0].row(i).transpose() - p.e5).cwiseAbs().maxCoeff() < 1e-7);
                CHECK((cache.e6[0][i] - p.e6).cwiseAbs().maxCoeff() < 1e-7);
            }
            CHECK(cache.loglik == doctest::Approx(ll).epsilon(1e-9));
            CHECK(log_likelihood(data, spec_for(v, 1), {c}, single_class()) == doctest::Approx(ll).epsilon(1e-12));
        }
    }
}

TEST_CASE("e-step growth-factor means agree with Monte Carlo") {
    // Importance sampling from the prior of w, weighted by the likelihood of y.
    const LongitudinalDataset data = example_data();
    const Eigen::MatrixXd lam = build_design_matrix(data.time_scores, data.center, 2);
    const Eigen::VectorXd y = data.outcomes.row(0).transpose();
    for (Variant v : {Variant::ModelI, Variant::ModelII, Variant::ModelIII, Variant::ModelIV}) {
        CAPTURE(to_string(v));
        const ClassParameters c = example_class(v);
        const EStepCache cache = estep(data, spec_for(v, 1), {c}, single_class());
        const Eigen::MatrixXd sigma = lam * c.psi * lam.transpose() + Eigen::MatrixXd(c.theta.asDiagonal());
        Rng rng = make_rng(17, static_cast<std::uint64_t>(v));
        std::gamma_distribution<double> gam(0.5 * c.nu, 1.0);
        const int n = 200000;
        Eigen::VectorXd wt(n), ew(n), eta0(n);
        for (int j = 0; j < n; ++j) {
            const double w = ghd_weights(v) ? gig_draw(rng, {c.omega, 1.0, c.lambda}) : 0.5 * c.nu / gam(rng);
            wt[j] = oracle::mvn_pdf(y, lam * (c.alpha + w * c.beta_eta) + w * c.beta_y, w * sigma);
            ew[j] = w;
            eta0[j] = oracle::schur_conditional(c.psi, lam, c.theta.asDiagonal(), c.alpha, c.beta_eta, c.beta_y, y, w).mean[0];
        }
        const double sw = wt.sum();
        for (const auto& [h, target] : {std::pair{ew, cache.e1(0, 0)}, std::pair{eta0, cache.e4[0](0, 0)}}) {
            const double est = wt.dot(h) / sw;
            // Delta-method standard error of a self-normalized estimator.
            const double se = std::sqrt((wt.array().square() * (h.array() - est).square()).sum()) / sw;
            CHECK(std::abs(est - target) < 4 * se);
        }
    }
}

TEST_CASE("e-step invariants") {
    const SimulatedData sim = generate(small_scenario(Variant::ModelIII, 150, 3));
    for (Variant v : kAllVariants) {
        CAPTURE(to_string(v));
        std::vector<ClassParameters> params{example_class(v), example_class(v)};
        params[1].alpha = Eigen::Vector2d(-3.0, 2.0);
        MixingWeights w;
        w.pi = Eigen::Vector2d(0.3, 0.7);
        const EStepCache cache = estep(sim.data, spec_for(v, 2), params, w);
        CHECK((cache.responsibilities.array() >= 0.0).all());
        CHECK((cache.responsibilities.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
        // Jensen: E[w] E[1/w] >= 1.
        CHECK(((cache.e1.array() * cache.e2.array()) >= 1.0 - 1e-12).all());
        // Responsibilities are the normalized joint densities.
        const Eigen::Index i = 7;
        const double r0 = 1.0 / (1.0 + std::exp(cache.log_joint(i, 1) - cache.log_joint(i, 0)));
        CHECK(cache.responsibilities(i, 0) == doctest::Approx(r0).epsilon(1e-12));
    }
}

TEST_CASE("e-step rejects singular parameters") {
    const LongitudinalDataset data = example_data();
    ClassParameters c = example_class(Variant::ModelI);
    c.theta[2] = 0.0;
    CHECK_THROWS_AS(estep(data, spec_for(Variant::ModelI, 1), {c}, single_class()), ConditioningError);
    c = example_class(Variant::ModelI);
    c.psi << 1.0, 2.0, 2.0, 1.0;
    CHECK_THROWS_AS(estep(data, spec_for(Variant::ModelI, 1), {c}, single_class()), ConditioningError);
    CHECK_THROWS(estep(data, spec_for(Variant::ModelI, 2), {c}, single_class()));
}

TEST_CASE("ghd index update never lowers its objective and finds the truth") {
    // Aggregates equal to exact GIG moments make the generating index the maximizer.
    const GigMoments mom = gig_moments(GigParams{2.0, 1.0, 1.5});
    const IndexAggregates agg{mom.e_w, mom.e_winv, mom.e_logw};
    GhdIndex idx{-0.5, 1.0};
    double prev = ghd_index_objective(idx.omega, idx.lambda, agg);
    for (int it = 0; it < 2000; ++it) {
        idx = update_ghd_index(agg, idx);
        const double cur = ghd_index_objective(idx.omega, idx.lambda, agg);
        CHECK(cur >= prev - 1e-12);
        prev = cur;
    }
    CHECK(idx.lambda == doctest::Approx(1.5).epsilon(1e-3));
    CHECK(idx.omega == doctest::Approx(2.0).epsilon(1e-3));
}

TEST_CASE("degrees-of-freedom update") {
    // c = E[1/w] + E[log w] under IG(nu/2, nu/2) is 1 + log(nu/2) - digamma(nu/2).
    for (double nu : {3.0, 7.0, 25.0}) {
        const NuUpdate u = update_nu(1.0 + std::log(0.5 * nu) - oracle::digamma(0.5 * nu));
        CHECK_FALSE(u.at_boundary);
        CHECK(u.nu == doctest::Approx(nu).epsilon(1e-9));
    }
    CHECK(update_nu(5.0).at_boundary);
    CHECK(update_nu(5.0).nu == doctest::Approx(2.001));
    CHECK(update_nu(1.0001).at_boundary);
    CHECK(update_nu(1.0001).nu == doctest::Approx(200.0));
}

TEST_CASE("aitken stopping rule") {
    // Acceleration 0.5 gives an asymptotic estimate of -100, 2.5 above the last value.
    CHECK(aitken_converged(-110.0, -105.0, -102.5, 3.0));
    CHECK_FALSE(aitken_converged(-110.0, -105.0, -102.5, 2.0));
    CHECK_FALSE(aitken_converged(-110.0, -105.0, -99.0, 10.0));  // acceleration above one
    CHECK(aitken_converged(-110.0, -110.0 + 1e-3, -110.0 + 1e-3 + 1e-11, 1e-5));
    CHECK_FALSE(aitken_converged(-110.0, -110.0, -109.0, 1e-5));
}

TEST_CASE("each iteration of the fit is an ascent step") {
    for (Variant v : kAllVariants)
        for (Parameterization par : {Parameterization::General, Parameterization::Constrained}) {
            CAPTURE(to_string(v));
            CAPTURE(to_string(par));
            const SimulatedData sim = generate(small_scenario(v, 200, 11));
            for (int steps : {0, 1}) {
                FitConfig cfg;
                cfg.max_iter = 60;
                cfg.n_starts = 1;
                cfg.index_steps = steps;
                cfg.seed = 5;
                const FittedModel fm = fit(sim.data, spec_for(v, 2, par), cfg);
                const auto& tr = fm.loglik_trace;
                REQUIRE(tr.size() >= 2);
                bool ascent = true;
                for (std::size_t t = 1; t < tr.size(); ++t) ascent = ascent && tr[t] >= tr[t - 1] - 1e-8 * std::abs(tr[t - 1]);
                CHECK(ascent);
                CHECK((fm.responsibilities.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-10);
            }
        }
}

TEST_CASE("observed-likelihood index step never lowers the likelihood") {
    const SimulatedData sim = generate(small_scenario(Variant::ModelI, 120, 21));
    Rng rng = make_rng(99, 0);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (Variant v : kAllVariants)
        for (Parameterization par : {Parameterization::General, Parameterization::Constrained})
            for (int trial = 0; trial < 3; ++trial) {
                std::vector<ClassParameters> params{example_class(v), example_class(v)};
                params[1].alpha = Eigen::Vector2d(-3.0 + u(rng), 2.0 + u(rng));
                if (par == Parameterization::General) {
                    params[1].lambda = 2.0 * u(rng);
                    params[1].nu = 5.0 + 2.0 * u(rng);
                }
                MixingWeights w;
                w.pi = Eigen::Vector2d(0.4, 0.6);
                const ModelSpec spec = spec_for(v, 2, par);
                const double before = log_likelihood(sim.data, spec, params, w);
                const auto after_params = maximize_index_likelihood(sim.data, spec, params, w);
                CHECK(log_likelihood(sim.data, spec, after_params, w) >= before - 1e-9 * std::abs(before));
                if (v == Variant::GaussianBaseline) CHECK(after_params[0].alpha == params[0].alpha);
            }
}

TEST_CASE("gaussian fit reaches the generalized least-squares intercept") {
    // At a stationary point alpha solves the GLS normal equations for the fitted covariance.
    ScenarioConfig s = small_scenario(Variant::GaussianBaseline, 300, 8);
    s.K = 1;
    s.mixing = Eigen::VectorXd::Ones(1);
    s.classes.resize(1);
    const SimulatedData sim = generate(s);
    FitConfig cfg;
    cfg.n_starts = 1;
    cfg.aitken_eps = 1e-10;
    const FittedModel fm = fit(sim.data, spec_for(Variant::GaussianBaseline, 1), cfg);
    const ClassParameters& c = fm.params[0];
    const Eigen::MatrixXd lam = build_design_matrix(sim.data.time_scores, sim.data.center, 2);
    Eigen::MatrixXd sigma = lam * c.psi * lam.transpose();
    sigma.diagonal() += c.theta;
    const Eigen::MatrixXd si = sigma.inverse();
    const Eigen::VectorXd ybar = sim.data.outcomes.colwise().mean().transpose();
    const Eigen::VectorXd gls = (lam.transpose() * si * lam).ldlt().solve(lam.transpose() * si * ybar);
    CHECK((c.alpha - gls).cwiseAbs().maxCoeff() < 1e-5);
    // The unstructured sample covariance bounds the structured fit from above.
    const Eigen::MatrixXd centered = sim.data.outcomes.rowwise() - ybar.transpose();
    const Eigen::MatrixXd s_hat = centered.transpose() * centered / double(sim.data.n());
    const double n = double(sim.data.n());
    const double saturated = -0.5 * n * (4 * std::log(2 * oracle::kPi) + std::log(s_hat.determinant()) + 4.0);
    CHECK(fm.loglik <= saturated + 1e-6);
}

TEST_CASE("initialization") {
    const SimulatedData sim = generate(small_scenario(Variant::ModelI, 100, 4));
    const LongitudinalDataset& d = sim.data;
    const Eigen::MatrixXd lam = build_design_matrix(d.time_scores, d.center, 2);

    // One class: alpha is the least-squares fit of the mean trajectory.
    const auto [p1, w1] = moment_start(d, spec_for(Variant::ModelI, 1), std::vector<int>(d.n(), 0), 1e-4);
    const Eigen::VectorXd ybar = d.outcomes.colwise().mean().transpose();
    CHECK((p1[0].alpha - (lam.transpose() * lam).ldlt().solve(lam.transpose() * ybar)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(w1.pi[0] == doctest::Approx(1.0));

    // Exact linear trajectories leave no residual; theta is floored.
    Eigen::MatrixXd y(5, 4);
    for (int i = 0; i < 5; ++i)
        for (int t = 0; t < 4; ++t) y(i, t) = i + 0.5 * i * i * t;
    const LongitudinalDataset lin = make_dataset(y);
    const auto [p2, w2] = moment_start(lin, spec_for(Variant::ModelI, 1), std::vector<int>(5, 0), 1e-6);
    CHECK(p2[0].theta.minCoeff() == doctest::Approx(1e-4));

    // Constrained forms share psi and theta across classes.
    std::vector<int> labels(d.n());
    for (Eigen::Index i = 0; i < d.n(); ++i) labels[i] = sim.labels[i] - 1;
    const auto [p3, w3] = moment_start(d, spec_for(Variant::ModelIII, 2, Parameterization::Constrained), labels, 1e-4);
    CHECK(p3[0].psi == p3[1].psi);
    CHECK(p3[0].theta == p3[1].theta);
    CHECK(w3.pi.sum() == doctest::Approx(1.0));

    FitConfig cfg;
    cfg.init = InitMethod::Supplied;
    Rng rng = make_rng(1, 1);
    CHECK_THROWS_AS(initialize(d, spec_for(Variant::ModelI, 2), cfg, rng), InputError);
}

TEST_CASE("fit is deterministic and equivariant to subject order") {
    const SimulatedData sim = generate(small_scenario(Variant::ModelIII, 150, 12));
    FitConfig cfg;
    cfg.max_iter = 40;
    cfg.n_starts = 2;
    cfg.seed = 77;
    const ModelSpec spec = spec_for(Variant::ModelIII, 2);
    const FittedModel a = fit(sim.data, spec, cfg);
    const FittedModel b = fit(sim.data, spec, cfg);
    CHECK(a.loglik_trace == b.loglik_trace);
    CHECK(a.map_labels == b.map_labels);

    // Reverse the subjects and start from the same supplied parameters. Plain
    // EM only reorders sums; the finite-difference index step (h = 1e-4)
    // magnifies that roundoff, hence the looser bound in the second pass.
    const LongitudinalDataset rev = make_dataset(sim.data.outcomes.colwise().reverse(), {}, sim.data.time_scores,
                                                 sim.data.center);
    for (const auto& [steps, tol] : {std::pair{0, 1e-9}, std::pair{1, 1e-6}}) {
        FitConfig sup;
        sup.max_iter = 40;
        sup.init = InitMethod::Supplied;
        sup.index_steps = steps;
        sup.initial_params = a.params;
        sup.initial_weights = a.weights;
        const FittedModel c = fit(sim.data, spec, sup);
        const FittedModel r = fit(rev, spec, sup);
        CHECK(r.loglik == doctest::Approx(c.loglik).epsilon(1e-10));
        for (int k = 0; k < 2; ++k) CHECK((r.params[k].alpha - c.params[k].alpha).cwiseAbs().maxCoeff() < tol);
        std::vector<int> back(r.map_labels.rbegin(), r.map_labels.rend());
        CHECK(back == c.map_labels);
    }
}

TEST_CASE("fit reports consistent bookkeeping") {
    const SimulatedData sim = generate(small_scenario(Variant::GaussianBaseline, 80, 2));
    FitConfig cfg;
    cfg.n_starts = 1;
    const FittedModel fm = fit(sim.data, spec_for(Variant::GaussianBaseline, 1), cfg);
    CHECK(fm.n_free == count_free_parameters(spec_for(Variant::GaussianBaseline, 1), 4, 2, 0));
    CHECK(fm.bic == doctest::Approx(2 * fm.loglik - fm.n_free * std::log(80.0)));
    CHECK(fm.iterations == static_cast<int>(fm.loglik_trace.size()));
    CHECK(fm.loglik == fm.loglik_trace.back());
    CHECK(std::all_of(fm.map_labels.begin(), fm.map_labels.end(), [](int l) { return l == 1; }));
    CHECK_THROWS_AS(fit(sim.data, ModelSpec{Variant::ModelI, Parameterization::General, 1, 5, false}, cfg),
                    IdentifiabilityError);
}

TEST_CASE("a start that loses a class is retried from a random partition") {
    // Two far outliers draw a k-means start into a class of two subjects.
    Rng rng = make_rng(3, 0);
    std::normal_distribution<double> z;
    Eigen::MatrixXd y(60, 4);
    for (int i = 0; i < 60; ++i)
        for (int t = 0; t < 4; ++t) y(i, t) = (i < 30 ? 1.0 : -1.0) + z(rng);
    y.row(0).setConstant(15.0);
    y.row(1).setConstant(16.0);
    const LongitudinalDataset data = make_dataset(y);
    FitConfig cfg;
    cfg.n_starts = 1;
    cfg.max_iter = 50;
    cfg.max_restarts = 0;
    CHECK_THROWS_AS(fit(data, spec_for(Variant::ModelI, 2), cfg), FitError);
    cfg.max_restarts = 3;
    const FittedModel fm = fit(data, spec_for(Variant::ModelI, 2), cfg);
    CHECK(fm.restarts == 1);
    CHECK(fm.responsibilities.colwise().sum().minCoeff() >= 3.0);
}
