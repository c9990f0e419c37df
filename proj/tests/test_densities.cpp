#include <doctest.h>

#include <cmath>

#include "ghgmm/densities.hpp"
#include "ghgmm/errors.hpp"
#include "ghgmm/gig.hpp"
#include "ghgmm/linalg.hpp"
#include "oracles.hpp"

using namespace ghgmm;

namespace {

Eigen::VectorXd v1(double a) { return Eigen::VectorXd::Constant(1, a); }
Eigen::MatrixXd m1(double a) { return Eigen::MatrixXd::Constant(1, 1, a); }

GhdParams ghd1(double lambda, double omega, double mu, double sigma, double beta) {
    return {lambda, omega, v1(mu), m1(sigma), v1(beta)};
}

GstParams gst1(double mu, double sigma, double beta, double nu) { return {v1(mu), m1(sigma), v1(beta), nu}; }

// Mixture-representation densities by quadrature over w.
double ghd_mixture(double y, double lambda, double omega, double mu, double sigma, double beta) {
    return oracle::integrate_half_line(
        [&](double w) { return oracle::normal_pdf(y, mu + w * beta, w * sigma) * oracle::gig_pdf(w, omega, 1.0, lambda); },
        1.0);
}

double gst_mixture(double y, double mu, double sigma, double beta, double nu) {
    return oracle::integrate_half_line(
        [&](double w) { return oracle::normal_pdf(y, mu + w * beta, w * sigma) * oracle::invgamma_pdf(w, nu / 2, nu / 2); },
        1.0);
}

}  // namespace

TEST_CASE("mahalanobis distance") {
    Eigen::Vector2d mu(1.0, -2.0);
    CHECK(mahalanobis_sq(mu, mu, Eigen::Matrix2d::Identity()) == doctest::Approx(0.0));
    CHECK(mahalanobis_sq(Eigen::Vector2d(4.0, 2.0), mu, Eigen::Matrix2d::Identity()) == doctest::Approx(25.0));
    Eigen::Matrix2d s = Eigen::Vector2d(2.0, 0.5).asDiagonal();
    CHECK(mahalanobis_sq(Eigen::Vector2d(3.0, -1.0), mu, s) == doctest::Approx(4.0));
    Eigen::Matrix2d bad;
    bad << 1, 2, 2, 1;
    CHECK_THROWS_AS(mahalanobis_sq(mu, mu, bad), ConditioningError);
}

TEST_CASE("mahalanobis distance scales inversely with the scale matrix") {
    Eigen::Matrix3d s;
    s << 2.0, 0.3, 0.1, 0.3, 1.0, -0.2, 0.1, -0.2, 1.5;
    const Eigen::Vector3d y(0.4, -1.0, 2.2), mu(0.1, 0.2, 0.3);
    for (double c : {0.01, 0.7, 3.0, 250.0})
        CHECK(mahalanobis_sq(y, mu, c * s) == doctest::Approx(mahalanobis_sq(y, mu, s) / c).epsilon(1e-12));
}

TEST_CASE("ghd symmetric when beta = 0") {
    const GhdParams p = ghd1(1.0, 2.0, 0.0, 1.0, 0.0);
    for (double d : {0.5, 1.0, 2.0}) CHECK(ghd_logdensity(v1(d), p) == doctest::Approx(ghd_logdensity(v1(-d), p)).epsilon(1e-14));
}

TEST_CASE("ghd matches the mixture representation") {
    for (double y : {-1.0, 0.0, 1.5})
        CHECK(std::exp(ghd_logdensity(v1(y), ghd1(0.5, 2.0, 0.0, 1.0, 0.7))) ==
              doctest::Approx(ghd_mixture(y, 0.5, 2.0, 0.0, 1.0, 0.7)).epsilon(1e-6));
    for (double la : {-2.5, -0.5, 1.0, 3.0})
        for (double y : {-2.0, 0.3, 4.0})
            CHECK(std::exp(ghd_logdensity(v1(y), ghd1(la, 1.3, 0.4, 0.8, -0.6))) ==
                  doctest::Approx(ghd_mixture(y, la, 1.3, 0.4, 0.8, -0.6)).epsilon(1e-6));
}

TEST_CASE("ghd index changes the density") {
    const double a = std::exp(ghd_logdensity(v1(3.0), ghd1(-2.0, 1.0, 0.0, 1.0, 0.0)));
    const double b = std::exp(ghd_logdensity(v1(3.0), ghd1(2.0, 1.0, 0.0, 1.0, 0.0)));
    CHECK(std::abs(a - b) > 1e-3);
}

TEST_CASE("gst symmetric case is Student t") {
    CHECK(gst_logdensity(v1(0.0), gst1(0.0, 1.0, 0.0, 5.0)) == doctest::Approx(-0.96861).epsilon(1e-5));
    const double t0 = std::exp(std::lgamma(3.0) - std::lgamma(2.5)) / std::sqrt(5.0 * oracle::kPi);
    CHECK(std::exp(gst_logdensity(v1(0.0), gst1(0.0, 1.0, 0.0, 5.0))) == doctest::Approx(t0).epsilon(1e-12));
    CHECK(t0 == doctest::Approx(0.379607).epsilon(1e-6));
    const GstParams p = gst1(0.3, 2.0, 0.0, 4.0);
    for (double d : {0.5, 1.0, 2.0})
        CHECK(gst_logdensity(v1(0.3 + d), p) == doctest::Approx(gst_logdensity(v1(0.3 - d), p)).epsilon(1e-14));
}

TEST_CASE("gst matches the inverse-gamma mixture") {
    for (double y : {-1.0, 0.0, 2.0})
        CHECK(std::exp(gst_logdensity(v1(y), gst1(0.0, 1.0, 0.5, 6.0))) ==
              doctest::Approx(gst_mixture(y, 0.0, 1.0, 0.5, 6.0)).epsilon(1e-6));
    for (double nu : {2.5, 4.0, 11.0})
        for (double y : {-3.0, 0.2, 5.0})
            CHECK(std::exp(gst_logdensity(v1(y), gst1(-0.2, 1.4, -0.9, nu))) ==
                  doctest::Approx(gst_mixture(y, -0.2, 1.4, -0.9, nu)).epsilon(1e-6));
}

TEST_CASE("gst with tiny skewness equals the multivariate t") {
    Eigen::Matrix2d s;
    s << 1.5, 0.4, 0.4, 0.9;
    const Eigen::Vector2d mu(0.5, -1.0), y(1.7, 0.2);
    const double nu = 5.5;
    const double p = 2.0;
    const double delta = mahalanobis_sq(y, mu, s);
    const double t = std::lgamma((nu + p) / 2) - std::lgamma(nu / 2) - 0.5 * p * std::log(nu * oracle::kPi) -
                     0.5 * std::log(s.determinant()) - 0.5 * (nu + p) * std::log1p(delta / nu);
    CHECK(gst_logdensity(y, {mu, s, Eigen::Vector2d(1e-12, 0.0), nu}) == doctest::Approx(t).epsilon(1e-8));
    CHECK(gst_logdensity(y, {mu, s, Eigen::Vector2d::Zero(), nu}) == doctest::Approx(t).epsilon(1e-12));
    // Just above the switch the general form agrees with the limit.
    CHECK(gst_logdensity(y, {mu, s, Eigen::Vector2d(1e-6, 0.0), nu}) == doctest::Approx(t).epsilon(1e-5));
}

TEST_CASE("univariate densities integrate to one") {
    for (double la : {-1.5, 0.5, 2.0})
        for (double be : {0.0, 0.8}) {
            const GhdParams p = ghd1(la, 1.5, 0.2, 1.1, be);
            const double total = oracle::integrate([&](double y) { return std::exp(ghd_logdensity(v1(y), p)); }, -40.0, 40.0, 0.2);
            CHECK(total == doctest::Approx(1.0).epsilon(1e-5));
        }
    for (double nu : {5.0, 9.0})
        for (double be : {0.0, -0.5}) {
            const GstParams p = gst1(0.0, 1.0, be, nu);
            boost::math::quadrature::exp_sinh<double> es;
            const auto f = [&](double y) { return std::exp(gst_logdensity(v1(y), p)); };
            const double inf = std::numeric_limits<double>::infinity();
            const double total = es.integrate(f, 0.0, inf) + es.integrate([&](double y) { return f(-y); }, 0.0, inf);
            CHECK(total == doctest::Approx(1.0).epsilon(1e-5));
        }
}

TEST_CASE("densities reject bad scale matrices and degrees of freedom") {
    Eigen::Matrix2d bad;
    bad << 1, 2, 2, 1;
    CHECK_THROWS(ghd_logdensity(Eigen::Vector2d::Zero(), {0.5, 1.0, Eigen::Vector2d::Zero(), bad, Eigen::Vector2d::Zero()}));
    CHECK_THROWS(gst_logdensity(v1(0.0), gst1(0.0, 1.0, 0.0, 0.0)));
    CHECK_THROWS(gst_logdensity(v1(0.0), gst1(0.0, 1.0, 0.0, -2.0)));
}

TEST_CASE("posterior of w: parameters") {
    const GigPsiChi a = gig_posterior_of_w(Eigen::Vector2d(1.0, 2.0),
                                           GhdParams{0.3, 1.7, Eigen::Vector2d(1.0, 2.0), Eigen::Matrix2d::Identity(), Eigen::Vector2d::Zero()});
    CHECK(a.psi == doctest::Approx(1.7));
    CHECK(a.chi == doctest::Approx(1.7));
    CHECK(a.lambda == doctest::Approx(0.3 - 1.0));
    const GigPsiChi b = gig_posterior_of_w(v1(0.0), gst1(0.0, 1.0, 0.5, 6.0));
    CHECK(b.psi == doctest::Approx(0.25));
    CHECK(b.chi == doctest::Approx(6.0));
    CHECK(b.lambda == doctest::Approx(-3.5));
}

TEST_CASE("posterior of w matches Bayes' rule pointwise") {
    const GhdParams p = ghd1(0.5, 2.0, 0.0, 1.0, 0.7);
    const double y = 1.0;
    auto joint = [&](double w) { return oracle::normal_pdf(y, 0.7 * w, w) * oracle::gig_pdf(w, 2.0, 1.0, 0.5); };
    const double norm = oracle::integrate_half_line(joint, 1.0);
    const GigParams post = to_gig_params(gig_posterior_of_w(v1(y), p));
    for (double w : {0.2, 0.9, 1.7, 4.0}) CHECK(gig_density(w, post) == doctest::Approx(joint(w) / norm).epsilon(1e-6));

    const GstParams s = gst1(0.5, 1.3, -0.4, 7.0);
    for (double yy : {-1.0, 2.0}) {
        auto js = [&](double w) { return oracle::normal_pdf(yy, 0.5 - 0.4 * w, 1.3 * w) * oracle::invgamma_pdf(w, 3.5, 3.5); };
        const double ns = oracle::integrate_half_line(js, 1.0);
        const GigParams ps = to_gig_params(gig_posterior_of_w(v1(yy), s));
        for (double w : {0.3, 1.0, 2.5}) CHECK(gig_density(w, ps) == doctest::Approx(js(w) / ns).epsilon(1e-6));
    }
}

TEST_CASE("mean-variance mixture sampler") {
    Rng rng = make_rng(3, 0);
    const Eigen::MatrixXd x = nmvm_sample(rng, Eigen::Vector2d::Zero(), Eigen::Matrix2d::Identity(), Eigen::Vector2d(1.0, 0.0),
                                          GigParams{2.0, 1.0, 0.5}, 1000000);
    for (int j = 0; j < 2; ++j) {
        const Eigen::VectorXd c = x.col(j);
        const double m = c.mean();
        const double se = std::sqrt((c.array() - m).square().sum() / (c.size() - 1.0) / c.size());
        CHECK(std::abs(m - (j == 0 ? 1.5 : 0.0)) < 4 * se);
    }

    Eigen::Matrix2d s;
    s << 2.0, 0.6, 0.6, 1.0;
    Rng r2 = make_rng(3, 1);
    const Eigen::MatrixXd z = nmvm_sample(r2, Eigen::Vector2d(1.0, -1.0), s, Eigen::Vector2d::Zero(), UnitWeight{}, 200000);
    const Eigen::MatrixXd centered = z.rowwise() - z.colwise().mean();
    const Eigen::MatrixXd cov = centered.transpose() * centered / (z.rows() - 1.0);
    CHECK((cov - s).cwiseAbs().maxCoeff() < 0.03);

    Rng a = make_rng(9, 9), b = make_rng(9, 9);
    CHECK(nmvm_sample(a, Eigen::Vector2d::Zero(), s, Eigen::Vector2d::Ones(), InvGammaParams{3.0, 3.0}, 20) ==
          nmvm_sample(b, Eigen::Vector2d::Zero(), s, Eigen::Vector2d::Ones(), InvGammaParams{3.0, 3.0}, 20));
}

TEST_CASE("skewed tails stay accurate far from the centre") {
    // Along the skewness direction the gst log density decays like -(nu/2 + 1) log|y|.
    const GstParams p = gst1(0.0, 1.0, -0.5, 5.0);
    const double a = gst_logdensity(v1(-1e20), p);
    const double b = gst_logdensity(v1(-1e50), p);
    CHECK(std::isfinite(a));
    CHECK((b - a) / (30.0 * std::log(10.0)) == doctest::Approx(-3.5).epsilon(1e-6));
    // Moderate values agree with the mixture form on both sides.
    for (double y : {-60.0, 60.0})
        CHECK(gst_logdensity(v1(y), p) == doctest::Approx(std::log(gst_mixture(y, 0.0, 1.0, -0.5, 5.0))).epsilon(1e-6));
    // ghd in two dimensions with y - mu parallel to beta: the log density is
    // roughly linear in |y| with slope sqrt(omega + rho) - beta'y / |y| < 0.
    const GhdParams g{1.0, 1.0, Eigen::Vector2d::Zero(), Eigen::Matrix2d::Identity(), Eigen::Vector2d(0.6, 0.8)};
    const double l1 = ghd_logdensity(Eigen::Vector2d(0.6e15, 0.8e15), g);
    const double l2 = ghd_logdensity(Eigen::Vector2d(1.2e15, 1.6e15), g);
    CHECK(std::isfinite(l1));
    CHECK(l2 < l1);
    CHECK((l2 - l1) / 1e15 == doctest::Approx(1.0 - std::sqrt(2.0)).epsilon(1e-6));
}
