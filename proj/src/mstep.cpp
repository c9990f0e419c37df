#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <string>

#include "ghgmm/em.hpp"
#include "ghgmm/linalg.hpp"

namespace ghgmm {
namespace {

constexpr double kThetaFloor = 1e-8;
constexpr double kSkewDegenerate = 1e-8;

// Which columns of the stacked coefficient matrix M = [a-part, beta-part]
// enter subject i's growth-factor mean when it sits in class k:
// mean = M_a u + w M_b v.
struct EtaLayout {
    enum Kind { PerClass, SharedIntercept, ClassIntercept } kind;
    int pa = 0;
    int pb = 0;
};

void fill_u(const EtaLayout& lay, const Eigen::MatrixXd& x, Eigen::Index i, int k, int K, Eigen::VectorXd& u) {
    u.setZero(lay.pa);
    const Eigen::Index m = x.cols();
    if (lay.kind == EtaLayout::ClassIntercept) {
        u[k] = 1.0;
        if (m > 0) u.tail(m) = x.row(i).transpose();
    } else {
        u[0] = 1.0;
        if (m > 0) u.tail(m) = x.row(i).transpose();
    }
    (void)K;
}

int beta_slot(const EtaLayout& lay, int k) { return lay.kind == EtaLayout::SharedIntercept ? k : 0; }

// Solves the joint normal equations for intercepts, covariate effects and
// latent skewness over the classes in `group`, then updates Psi.
void update_eta_block(const LongitudinalDataset& data, const ModelSpec& spec, const EStepCache& cache,
                      const std::vector<int>& group, const EtaLayout& lay, std::vector<ClassParameters>& params,
                      double ridge, std::vector<std::string>& flags) {
    const int q = spec.q;
    const int K = spec.K;
    const Eigen::Index n = data.n();
    const Eigen::Index m = data.m();
    const int P = lay.pa + lay.pb;
    const Eigen::MatrixXd& p = cache.responsibilities;

    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(P, P);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(q, P);
    Eigen::VectorXd u;
    for (int k : group) {
        const int slot = lay.pa + beta_slot(lay, k);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double w = p(i, k);
            if (w <= 0.0) continue;
            fill_u(lay, data.covariates, i, k, K, u);
            const double e1 = cache.e1(i, k);
            const double e2 = cache.e2(i, k);
            G.topLeftCorner(lay.pa, lay.pa).noalias() += (w * e2) * u * u.transpose();
            H.leftCols(lay.pa).noalias() += w * cache.e5[k].row(i).transpose() * u.transpose();
            if (lay.pb > 0) {
                G.block(0, slot, lay.pa, 1) += w * u;
                G(slot, slot) += w * e1;
                H.col(slot) += w * cache.e4[k].row(i).transpose();
            }
        }
    }
    if (lay.pb > 0) G.bottomLeftCorner(lay.pb, lay.pa) = G.topRightCorner(lay.pa, lay.pb).transpose();

    // Current coefficients, needed for any skewness column held fixed.
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(q, P);
    std::vector<bool> held(P, false);
    for (int k : group) {
        if (lay.pb == 0) break;
        const int slot = lay.pa + beta_slot(lay, k);
        M.col(slot) = params[k].beta_eta;
        const double nk = p.col(k).sum();
        const double a_bar = p.col(k).dot(cache.e1.col(k)) / nk;
        const double b_bar = p.col(k).dot(cache.e2.col(k)) / nk;
        if (!(a_bar * b_bar - 1.0 >= kSkewDegenerate)) {
            held[slot] = true;
            flags.push_back("skewness held for class " + std::to_string(k + 1));
        }
    }
    std::vector<int> free_idx;
    std::vector<int> fixed_idx;
    for (int j = 0; j < P; ++j) (held[j] ? fixed_idx : free_idx).push_back(j);
    const Eigen::Index nf = static_cast<Eigen::Index>(free_idx.size());
    Eigen::MatrixXd Gff(nf, nf);
    Eigen::MatrixXd rhs(q, nf);
    for (Eigen::Index a = 0; a < nf; ++a) {
        rhs.col(a) = H.col(free_idx[a]);
        for (int j : fixed_idx) rhs.col(a) -= M.col(j) * G(j, free_idx[a]);
        for (Eigen::Index b = 0; b < nf; ++b) Gff(a, b) = G(free_idx[a], free_idx[b]);
    }
    Eigen::LLT<Eigen::MatrixXd> llt(Gff);
    if (llt.info() != Eigen::Success || (llt.matrixLLT().diagonal().array() <= 1e-12 * Gff.diagonal().maxCoeff()).any())
        throw ConditioningError("growth-factor normal equations are singular");
    const Eigen::MatrixXd sol = llt.solve(rhs.transpose()).transpose();
    for (Eigen::Index a = 0; a < nf; ++a) M.col(free_idx[a]) = sol.col(a);

    for (int k : group) {
        ClassParameters& c = params[k];
        if (lay.kind == EtaLayout::ClassIntercept) {
            c.alpha = M.col(k);
            c.gamma = M.middleCols(K, m);
        } else {
            c.alpha = M.col(0);
            c.gamma = M.middleCols(1, m);
        }
        if (lay.pb > 0) c.beta_eta = M.col(lay.pa + beta_slot(lay, k));
    }

    // Psi from E[(eta - a - w beta)(eta - a - w beta)' / W]
    //   = E2 d d' + d h' + h d' + E1 h h' + V,  d = m0 - a, h = g - beta.
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(q, q);
    double total = 0.0;
    for (int k : group) {
        const ClassParameters& c = params[k];
        Eigen::VectorXd h = cache.g[k];
        if (latent_skew(spec.variant)) h -= c.beta_eta;
        double nk = 0.0;
        Eigen::MatrixXd Sk = Eigen::MatrixXd::Zero(q, q);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double w = p(i, k);
            if (w <= 0.0) continue;
            Eigen::VectorXd a = c.alpha;
            if (m > 0) a += c.gamma * data.covariates.row(i).transpose();
            const Eigen::VectorXd d = cache.m0[k].row(i).transpose() - a;
            Sk.noalias() += (w * cache.e2(i, k)) * d * d.transpose();
            Sk.noalias() += w * (d * h.transpose() + h * d.transpose());
            nk += w;
        }
        Sk += p.col(k).dot(cache.e1.col(k)) * h * h.transpose() + nk * cache.v[k];
        S += Sk;
        total += nk;
    }
    Eigen::MatrixXd psi = symmetrized(S / total);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(psi, Eigen::EigenvaluesOnly);
    if (!(es.eigenvalues().minCoeff() > 0.0)) {
        psi.diagonal().array() += ridge;
        flags.push_back("growth-factor covariance ridged");
    }
    for (int k : group) params[k].psi = psi;
}

// Measurement-error block: observed skewness, then the diagonal of Theta.
// With r = y - L m0 and c = L g + beta_y the per-subject expectation is
// E2 r r' - r c' - c r' + E1 c c' + L V L'.
void update_y_block(const LongitudinalDataset& data, const ModelSpec& spec, const EStepCache& cache,
                    const std::vector<int>& group, std::vector<ClassParameters>& params) {
    const Eigen::MatrixXd lam = build_design_matrix(data.time_scores, data.center, spec.q);
    const Eigen::MatrixXd& p = cache.responsibilities;
    const Eigen::Index T = data.T();

    std::vector<Eigen::MatrixXd> resid(spec.K);
    for (int k : group) resid[k] = data.outcomes - cache.m0[k] * lam.transpose();

    Eigen::VectorXd beta_y = Eigen::VectorXd::Zero(T);
    if (observed_skew(spec.variant)) {
        double s1 = 0.0;
        for (int k : group) {
            const double s1k = p.col(k).dot(cache.e1.col(k));
            beta_y += resid[k].transpose() * p.col(k) - s1k * (lam * cache.g[k]);
            s1 += s1k;
        }
        beta_y /= s1;
    }

    Eigen::VectorXd theta = Eigen::VectorXd::Zero(T);
    double total = 0.0;
    for (int k : group) {
        const Eigen::VectorXd c = lam * cache.g[k] + beta_y;
        const Eigen::VectorXd pk = p.col(k);
        const double nk = pk.sum();
        const Eigen::VectorXd w2 = pk.cwiseProduct(cache.e2.col(k));
        theta += resid[k].array().square().matrix().transpose() * w2;
        theta -= 2.0 * c.cwiseProduct(resid[k].transpose() * pk);
        theta += pk.dot(cache.e1.col(k)) * c.cwiseProduct(c);
        theta += nk * (lam * cache.v[k] * lam.transpose()).diagonal();
        total += nk;
    }
    theta = (theta / total).cwiseMax(kThetaFloor);
    for (int k : group) {
        params[k].theta = theta;
        if (observed_skew(spec.variant)) params[k].beta_y = beta_y;
    }
}

// Fractional-response multinomial logit, class K as reference; damped Newton.
void update_logit_weights(const LongitudinalDataset& data, const Eigen::MatrixXd& p, MixingWeights& w) {
    const Eigen::Index n = data.n();
    const Eigen::Index m = data.m();
    const int K = static_cast<int>(p.cols());
    const int C = K - 1;
    const Eigen::Index d = 1 + m;
    if (C == 0) return;
    Eigen::MatrixXd Z(n, d);
    Z.col(0).setOnes();
    if (m > 0) Z.rightCols(m) = data.covariates;

    auto pack = [&](const MixingWeights& mw) {
        Eigen::VectorXd th(C * d);
        for (int c = 0; c < C; ++c) {
            th[c * d] = mw.alpha_c[c];
            if (m > 0) th.segment(c * d + 1, m) = mw.gamma_c.row(c).transpose();
        }
        return th;
    };
    auto unpack = [&](const Eigen::VectorXd& th, MixingWeights& mw) {
        for (int c = 0; c < C; ++c) {
            mw.alpha_c[c] = th[c * d];
            if (m > 0) mw.gamma_c.row(c) = th.segment(c * d + 1, m).transpose();
        }
    };
    auto objective = [&](const MixingWeights& mw) {
        return p.cwiseProduct(log_mixing_probs(mw, data.covariates, n, K)).sum();
    };

    Eigen::VectorXd th = pack(w);
    double f = objective(w);
    for (int it = 0; it < 25; ++it) {
        const Eigen::MatrixXd pr = log_mixing_probs(w, data.covariates, n, K).array().exp().matrix();
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(C * d);
        Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(C * d, C * d);
        for (Eigen::Index i = 0; i < n; ++i) {
            const Eigen::VectorXd zi = Z.row(i).transpose();
            const Eigen::MatrixXd zz = zi * zi.transpose();
            const double pi_sum = p.row(i).sum();
            for (int a = 0; a < C; ++a) {
                grad.segment(a * d, d) += (p(i, a) - pi_sum * pr(i, a)) * zi;
                for (int b = 0; b < C; ++b) {
                    const double wab = pi_sum * pr(i, a) * ((a == b ? 1.0 : 0.0) - pr(i, b));
                    hess.block(a * d, b * d, d, d) += wab * zz;
                }
            }
        }
        hess.diagonal().array() += 1e-10;
        const Eigen::VectorXd step = hess.ldlt().solve(grad);
        double t = 1.0;
        bool moved = false;
        for (int h = 0; h < 30; ++h, t *= 0.5) {
            MixingWeights cand = w;
            unpack(th + t * step, cand);
            const double fc = objective(cand);
            if (fc >= f) {
                moved = fc > f;
                th += t * step;
                w = cand;
                f = fc;
                break;
            }
        }
        if (!moved || grad.norm() < 1e-10) break;
    }
}

}  // namespace

MStepResult mstep(const LongitudinalDataset& data, const ModelSpec& spec, const EStepCache& cache,
                  const std::vector<ClassParameters>& params, const MixingWeights& weights, double ridge) {
    const int K = spec.K;
    const Eigen::Index n = data.n();
    const Eigen::MatrixXd& p = cache.responsibilities;
    const Eigen::VectorXd nk = p.colwise().sum().transpose();
    for (int k = 0; k < K; ++k)
        if (!(nk[k] > 1e-8)) throw ConditioningError("class " + std::to_string(k + 1) + " is empty");

    MStepResult out{params, weights, {}};

    if (weights.covariate_dependent)
        update_logit_weights(data, p, out.weights);
    else
        out.weights.pi = nk / static_cast<double>(n);

    const bool general = spec.parameterization == Parameterization::General;
    std::vector<int> all(K);
    for (int k = 0; k < K; ++k) all[k] = k;
    const int m = static_cast<int>(data.m());

    if (general) {
        EtaLayout lay{EtaLayout::PerClass, 1 + m, latent_skew(spec.variant) ? 1 : 0};
        for (int k = 0; k < K; ++k) {
            update_eta_block(data, spec, cache, {k}, lay, out.params, ridge, out.flags);
            update_y_block(data, spec, cache, {k}, out.params);
        }
    } else {
        EtaLayout lay = latent_skew(spec.variant) ? EtaLayout{EtaLayout::SharedIntercept, 1 + m, K}
                                                  : EtaLayout{EtaLayout::ClassIntercept, K + m, 0};
        update_eta_block(data, spec, cache, all, lay, out.params, ridge, out.flags);
        update_y_block(data, spec, cache, all, out.params);
    }

    if (ghd_weights(spec.variant)) {
        if (general) {
            for (int k = 0; k < K; ++k) {
                const GhdIndex idx = update_ghd_index(index_aggregates(cache, k), {params[k].lambda, params[k].omega});
                out.params[k].lambda = idx.lambda;
                out.params[k].omega = idx.omega;
            }
        } else {
            const GhdIndex idx = update_ghd_index(index_aggregates(cache, -1), {params[0].lambda, params[0].omega});
            for (auto& c : out.params) {
                c.lambda = idx.lambda;
                c.omega = idx.omega;
            }
        }
    } else if (gst_weights(spec.variant)) {
        auto solve = [&](int k) {
            const IndexAggregates agg = index_aggregates(cache, k);
            const NuUpdate nu = update_nu(agg.d_bar + agg.b_bar);
            if (nu.at_boundary)
                out.flags.push_back("degrees of freedom at bracket boundary" +
                                    (k >= 0 ? " for class " + std::to_string(k + 1) : std::string()));
            return nu.nu;
        };
        if (general) {
            for (int k = 0; k < K; ++k) out.params[k].nu = solve(k);
        } else {
            const double nu = solve(-1);
            for (auto& c : out.params) c.nu = nu;
        }
    }
    return out;
}

}  // namespace ghgmm
