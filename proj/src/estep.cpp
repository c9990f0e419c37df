#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ghgmm/densities.hpp"
#include "ghgmm/em.hpp"
#include "ghgmm/gig.hpp"
#include "ghgmm/linalg.hpp"

namespace ghgmm {
namespace {

// Everything about class k that does not depend on the subject.
struct ClassGeometry {
    Eigen::MatrixXd a;      // n x q, alpha + Gamma x_i
    Eigen::VectorXd delta;  // n
    Eigen::VectorXd cross;  // n
    double rho = 0.0;
    double log_det = 0.0;
    bool skew_small = true;
};

ClassGeometry class_geometry(const LongitudinalDataset& data, const ModelSpec& spec, const Eigen::MatrixXd& lam,
                             const ClassParameters& c, int k) {
    const std::string label = "class " + std::to_string(k + 1);
    if ((c.theta.array() <= 0.0).any() || !c.theta.allFinite())
        throw ConditioningError(label + ": measurement-error variances must be positive");
    spd_factor(c.psi, label + " growth-factor covariance");

    ClassGeometry geo;
    geo.a = Eigen::MatrixXd(data.n(), spec.q);
    geo.a.rowwise() = c.alpha.transpose();
    if (data.m() > 0) geo.a += data.covariates * c.gamma.transpose();

    Eigen::MatrixXd sigma = lam * c.psi * lam.transpose();
    sigma.diagonal() += c.theta;
    const auto llt = spd_factor(sigma, label + " marginal covariance");
    const Eigen::MatrixXd resid = (data.outcomes - geo.a * lam.transpose()).transpose();
    const Eigen::MatrixXd z = llt.matrixL().solve(resid);
    Eigen::VectorXd skew = Eigen::VectorXd::Zero(data.T());
    if (latent_skew(spec.variant)) skew += lam * c.beta_eta;
    if (observed_skew(spec.variant)) skew += c.beta_y;
    const Eigen::VectorXd zb = llt.matrixL().solve(skew);
    geo.delta = z.colwise().squaredNorm().transpose();
    geo.cross = z.transpose() * zb;
    geo.rho = zb.squaredNorm();
    geo.log_det = log_det(llt);
    geo.skew_small = skew.norm() < 1e-8;
    return geo;
}

}  // namespace

GrowthPosterior growth_posterior(const Eigen::MatrixXd& psi, const Eigen::MatrixXd& lam, const Eigen::VectorXd& theta) {
    GrowthPosterior gp;
    gp.v = woodbury_posterior_cov(psi, lam, theta);
    const Eigen::Index q = psi.rows();
    gp.c = gp.v * spd_factor(psi, "growth-factor covariance").solve(Eigen::MatrixXd::Identity(q, q));
    gp.b = gp.v * lam.transpose() * theta.cwiseInverse().asDiagonal();
    return gp;
}

EStepCache estep(const LongitudinalDataset& data, const ModelSpec& spec, const std::vector<ClassParameters>& params,
                 const MixingWeights& weights) {
    const Eigen::Index n = data.n();
    const int K = spec.K;
    const int q = spec.q;
    const int T = static_cast<int>(data.T());
    if (static_cast<int>(params.size()) != K) throw InputError("estep: parameter blocks differ from K");
    const Eigen::MatrixXd lam = build_design_matrix(data.time_scores, data.center, q);

    EStepCache cache;
    cache.e1.resize(n, K);
    cache.e2.resize(n, K);
    cache.e3.resize(n, K);
    cache.e4.resize(K);
    cache.e5.resize(K);
    cache.e6.resize(K);
    cache.v.resize(K);
    cache.m0.resize(K);
    cache.g.resize(K);
    cache.log_joint = log_mixing_probs(weights, data.covariates, n, K);

    for (int k = 0; k < K; ++k) {
        const ClassParameters& c = params[k];
        const ClassGeometry geo = class_geometry(data, spec, lam, c, k);
        for (Eigen::Index i = 0; i < n; ++i) {
            const NmvmQuadratics qf{geo.delta[i], geo.rho, geo.cross[i], geo.log_det, T};
            double logf = 0.0;
            GigMoments mom{1.0, 1.0, 0.0};
            if (ghd_weights(spec.variant)) {
                logf = ghd_log_kernel(c.lambda, c.omega, qf);
                mom = gig_moments(ghd_posterior(c.lambda, c.omega, qf));
            } else if (gst_weights(spec.variant)) {
                logf = gst_log_kernel(c.nu, qf, geo.skew_small);
                mom = gig_moments(gst_posterior(c.nu, qf));
            } else {
                logf = gaussian_log_kernel(qf);
            }
            cache.log_joint(i, k) += logf;
            cache.e1(i, k) = mom.e_w;
            cache.e2(i, k) = mom.e_winv;
            cache.e3(i, k) = mom.e_logw;
        }

        // Growth factors given (y, w): N(m0 + w g, w V).
        const GrowthPosterior gp = growth_posterior(c.psi, lam, c.theta);
        const Eigen::MatrixXd& v = gp.v;
        const Eigen::MatrixXd& b = gp.b;
        const Eigen::MatrixXd& cmat = gp.c;
        Eigen::MatrixXd m0 = geo.a * cmat.transpose() + data.outcomes * b.transpose();
        Eigen::VectorXd g = Eigen::VectorXd::Zero(q);
        if (latent_skew(spec.variant)) g += cmat * c.beta_eta;
        if (observed_skew(spec.variant)) g -= b * c.beta_y;

        Eigen::MatrixXd e4 = m0;
        Eigen::MatrixXd e5(n, q);
        std::vector<Eigen::MatrixXd> e6(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const Eigen::VectorXd mi = m0.row(i).transpose();
            const double w1 = cache.e1(i, k);
            const double w2 = cache.e2(i, k);
            e4.row(i) = (mi + w1 * g).transpose();
            e5.row(i) = (w2 * mi + g).transpose();
            e6[i] = v + w2 * mi * mi.transpose() + mi * g.transpose() + g * mi.transpose() + w1 * g * g.transpose();
        }
        cache.e4[k] = std::move(e4);
        cache.e5[k] = std::move(e5);
        cache.e6[k] = std::move(e6);
        cache.v[k] = v;
        cache.m0[k] = std::move(m0);
        cache.g[k] = g;
    }

    cache.responsibilities.resize(n, K);
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mx = cache.log_joint.row(i).maxCoeff();
        const Eigen::ArrayXd ex = (cache.log_joint.row(i).array() - mx).exp().transpose();
        const double s = ex.sum();
        cache.responsibilities.row(i) = (ex / s).matrix().transpose();
        ll += mx + std::log(s);
    }
    if (!std::isfinite(ll)) throw ConditioningError("log-likelihood is not finite");
    cache.loglik = ll;
    return cache;
}

double log_likelihood(const LongitudinalDataset& data, const ModelSpec& spec,
                      const std::vector<ClassParameters>& params, const MixingWeights& weights) {
    const Eigen::MatrixXd lam = build_design_matrix(data.time_scores, data.center, spec.q);
    Eigen::MatrixXd lj = log_mixing_probs(weights, data.covariates, data.n(), spec.K);
    const int T = static_cast<int>(data.T());
    for (int k = 0; k < spec.K; ++k) {
        const ClassParameters& c = params[k];
        const ClassGeometry geo = class_geometry(data, spec, lam, c, k);
        for (Eigen::Index i = 0; i < data.n(); ++i) {
            const NmvmQuadratics qf{geo.delta[i], geo.rho, geo.cross[i], geo.log_det, T};
            if (ghd_weights(spec.variant))
                lj(i, k) += ghd_log_kernel(c.lambda, c.omega, qf);
            else if (gst_weights(spec.variant))
                lj(i, k) += gst_log_kernel(c.nu, qf, geo.skew_small);
            else
                lj(i, k) += gaussian_log_kernel(qf);
        }
    }
    double ll = 0.0;
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        const double mx = lj.row(i).maxCoeff();
        ll += mx + std::log((lj.row(i).array() - mx).exp().sum());
    }
    return ll;
}

namespace {

constexpr double kLambdaBound = 50.0;
constexpr double kLogOmegaMin = -9.21;  // log 1e-4
constexpr double kLogOmegaMax = 5.29;   // log 200
constexpr double kNuMin = 2.001;
constexpr double kNuMax = 200.0;
constexpr double kLogScaleStep = 2.0;

double logsumexp_rows(const Eigen::MatrixXd& lj) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < lj.rows(); ++i) {
        const double mx = lj.row(i).maxCoeff();
        ll += mx + std::log((lj.row(i).array() - mx).exp().sum());
    }
    return ll;
}

// Damped Newton with finite-difference derivatives, gradient ascent when the
// Hessian is not negative definite, and only improving steps taken.
template <class F, class Box>
Eigen::VectorXd ascend(const F& f, const Box& box, Eigen::VectorXd x, int max_steps) {
    const Eigen::Index d = x.size();
    const double h = 1e-4;
    double fx = f(x);
    if (!std::isfinite(fx)) return x;
    for (int it = 0; it < max_steps; ++it) {
        Eigen::VectorXd fp(d), fm(d);
        Eigen::VectorXd grad(d);
        Eigen::MatrixXd hess(d, d);
        for (Eigen::Index i = 0; i < d; ++i) {
            const Eigen::VectorXd e = Eigen::VectorXd::Unit(d, i) * h;
            fp[i] = f(x + e);
            fm[i] = f(x - e);
            grad[i] = (fp[i] - fm[i]) / (2 * h);
            hess(i, i) = (fp[i] - 2 * fx + fm[i]) / (h * h);
        }
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = i + 1; j < d; ++j) {
                const Eigen::VectorXd e = (Eigen::VectorXd::Unit(d, i) + Eigen::VectorXd::Unit(d, j)) * h;
                hess(i, j) = hess(j, i) = (f(x + e) - fp[i] - fp[j] + fx) / (h * h);
            }
        if (!grad.allFinite() || !hess.allFinite()) break;
        Eigen::LLT<Eigen::MatrixXd> neg(-hess);
        const Eigen::VectorXd step = neg.info() == Eigen::Success ? Eigen::VectorXd(neg.solve(grad))
                                                                  : Eigen::VectorXd(grad / std::max(1.0, grad.norm()));
        double t = 1.0;
        bool moved = false;
        for (int b = 0; b < 40; ++b, t *= 0.5) {
            const Eigen::VectorXd cand = box(x + t * step);
            const double fc = f(cand);
            if (fc > fx) {
                moved = true;
                x = cand;
                fx = fc;
                break;
            }
        }
        if (!moved || (t * step).norm() < 1e-9) break;
    }
    return x;
}

// Class quantities that let the quadratics follow alpha -> alpha + a and
// beta -> beta + L b without new triangular solves.
struct ShiftGeometry {
    ClassGeometry geo;
    Eigen::MatrixXd mz;   // n x q, rows z_i' M with M = L^{-1} Lambda
    Eigen::MatrixXd mtm;  // q x q
    Eigen::VectorXd mzb;  // q, M' L^{-1} beta
    Eigen::VectorXd skew; // T, current total skewness
};

ShiftGeometry shift_geometry(const LongitudinalDataset& data, const ModelSpec& spec, const Eigen::MatrixXd& lam,
                             const ClassParameters& c, int k) {
    ShiftGeometry sg;
    sg.geo = class_geometry(data, spec, lam, c, k);
    Eigen::MatrixXd sigma = lam * c.psi * lam.transpose();
    sigma.diagonal() += c.theta;
    const auto llt = spd_factor(sigma, "marginal covariance");
    const Eigen::MatrixXd mm = llt.matrixL().solve(lam);
    const Eigen::MatrixXd resid = (data.outcomes - sg.geo.a * lam.transpose()).transpose();
    sg.mz = llt.matrixL().solve(resid).transpose() * mm;
    sg.mtm = mm.transpose() * mm;
    sg.skew = Eigen::VectorXd::Zero(data.T());
    if (latent_skew(spec.variant)) sg.skew += lam * c.beta_eta;
    if (observed_skew(spec.variant)) sg.skew += c.beta_y;
    sg.mzb = mm.transpose() * llt.matrixL().solve(sg.skew);
    return sg;
}

// Layout of the search vector: index coordinates ((lambda, log omega) or nu),
// then log s, then the shifts a and b when the skewness is observed.
struct SearchLayout {
    bool ghd;
    bool shifts;
    int q;
    int n_index() const { return ghd ? 2 : 1; }
    int scale() const { return n_index(); }
    int size() const { return n_index() + 1 + (shifts ? 2 * q : 0); }
};

double shifted_kernel(const SearchLayout& sl, const ShiftGeometry& sg, const Eigen::MatrixXd& lam, Eigen::Index i,
                      int T, const Eigen::VectorXd& x) {
    const double ls = x[sl.scale()];
    const double s = std::exp(ls);
    double delta = sg.geo.delta[i];
    double cross = sg.geo.cross[i];
    double rho = sg.geo.rho;
    bool small = sg.geo.skew_small;
    if (sl.shifts) {
        const auto a = x.segment(sl.scale() + 1, sl.q);
        const auto b = x.segment(sl.scale() + 1 + sl.q, sl.q);
        const Eigen::VectorXd mta = sg.mtm * a;
        delta += -2.0 * sg.mz.row(i).dot(a) + a.dot(mta);
        cross += sg.mz.row(i).dot(b) - a.dot(sg.mzb) - mta.dot(b);
        rho += 2.0 * b.dot(sg.mzb) + b.dot(sg.mtm * b);
        small = (sg.skew + lam * b).norm() < 1e-8;
    }
    const NmvmQuadratics qf{delta / s, rho * s, cross, sg.geo.log_det + T * ls, T};
    if (sl.ghd) return ghd_log_kernel(x[0], std::exp(x[1]), qf);
    return gst_log_kernel(x[0], qf, small);
}

}  // namespace

std::vector<ClassParameters> maximize_index_likelihood(const LongitudinalDataset& data, const ModelSpec& spec,
                                                       const std::vector<ClassParameters>& params,
                                                       const MixingWeights& weights, int max_steps) {
    const bool ghd = ghd_weights(spec.variant);
    if ((!ghd && !gst_weights(spec.variant)) || max_steps < 1) return params;
    const Eigen::Index n = data.n();
    const int K = spec.K;
    const int T = static_cast<int>(data.T());
    const SearchLayout sl{ghd, observed_skew(spec.variant), spec.q};
    const Eigen::MatrixXd lam = build_design_matrix(data.time_scores, data.center, spec.q);
    const Eigen::MatrixXd log_pi = log_mixing_probs(weights, data.covariates, n, K);
    std::vector<ShiftGeometry> geo;
    geo.reserve(K);
    for (int k = 0; k < K; ++k) geo.push_back(shift_geometry(data, spec, lam, params[k], k));

    auto start = [&](const ClassParameters& c) {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(sl.size());
        if (ghd) {
            x[0] = c.lambda;
            x[1] = std::log(c.omega);
        } else {
            x[0] = c.nu;
        }
        return x;
    };
    auto box = [&](Eigen::VectorXd x) {
        if (ghd) {
            x[0] = std::clamp(x[0], -kLambdaBound, kLambdaBound);
            x[1] = std::clamp(x[1], kLogOmegaMin, kLogOmegaMax);
        } else {
            x[0] = std::clamp(x[0], kNuMin, kNuMax);
        }
        x[sl.scale()] = std::clamp(x[sl.scale()], -kLogScaleStep, kLogScaleStep);
        return x;
    };
    auto column = [&](int k, const Eigen::VectorXd& x, Eigen::MatrixXd& lj) {
        for (Eigen::Index i = 0; i < n; ++i) lj(i, k) = log_pi(i, k) + shifted_kernel(sl, geo[k], lam, i, T, x);
    };
    auto apply = [&](ClassParameters& c, const Eigen::VectorXd& x) {
        const double s = std::exp(x[sl.scale()]);
        if (ghd) {
            c.lambda = x[0];
            c.omega = std::exp(x[1]);
        } else {
            c.nu = x[0];
        }
        if (sl.shifts) {
            c.alpha += x.segment(sl.scale() + 1, sl.q);
            c.beta_y += lam * x.segment(sl.scale() + 1 + sl.q, sl.q);
        }
        c.psi *= s;
        c.theta *= s;
        c.beta_eta *= s;
        c.beta_y *= s;
    };
    const double neg_inf = -std::numeric_limits<double>::infinity();
    auto evaluate = [&](Eigen::MatrixXd& trial, auto&& fill) {
        try {
            fill(trial);
        } catch (const DomainError&) {
            return neg_inf;
        }
        const double v = logsumexp_rows(trial);
        return std::isfinite(v) ? v : neg_inf;
    };

    Eigen::MatrixXd lj(n, K);
    for (int k = 0; k < K; ++k) column(k, start(params[k]), lj);
    std::vector<ClassParameters> out = params;
    if (spec.parameterization == Parameterization::Constrained) {
        auto f = [&](const Eigen::VectorXd& x) {
            Eigen::MatrixXd trial(n, K);
            return evaluate(trial, [&](Eigen::MatrixXd& t) {
                for (int k = 0; k < K; ++k) column(k, x, t);
            });
        };
        const Eigen::VectorXd x = ascend(f, box, start(params[0]), max_steps);
        for (auto& c : out) apply(c, x);
        return out;
    }
    for (int k = 0; k < K; ++k) {
        auto f = [&](const Eigen::VectorXd& x) {
            Eigen::MatrixXd trial = lj;
            return evaluate(trial, [&](Eigen::MatrixXd& t) { column(k, x, t); });
        };
        const Eigen::VectorXd x = ascend(f, box, start(params[k]), max_steps);
        column(k, x, lj);
        apply(out[k], x);
    }
    return out;
}

}  // namespace ghgmm
