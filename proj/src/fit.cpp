#include <cmath>
#include <exception>
#include <string>

#include "ghgmm/em.hpp"
#include "ghgmm/selection.hpp"

namespace ghgmm {

bool aitken_converged(double l_prev, double l_cur, double l_next, double eps) {
    const double d_prev = l_cur - l_prev;
    const double d_next = l_next - l_cur;
    if (std::abs(d_next) < 1e-10) return true;
    if (d_prev == 0.0) return false;
    const double a = d_next / d_prev;
    if (a >= 1.0) return false;
    const double l_inf = l_cur + d_next / (1.0 - a);
    const double gap = l_inf - l_next;
    return gap > 0.0 && gap < eps;
}

namespace {

struct RunOutcome {
    FittedModel model;
    bool degenerate = false;
};

RunOutcome run_em(const LongitudinalDataset& data, const ModelSpec& spec, const FitConfig& config, Rng& rng) {
    auto [params, weights] = initialize(data, spec, config, rng);
    RunOutcome out;
    FittedModel& fm = out.model;
    fm.spec = spec;
    EStepCache cache;
    std::vector<std::string> flags;
    for (int it = 0; it < config.max_iter; ++it) {
        cache = estep(data, spec, params, weights);
        fm.loglik_trace.push_back(cache.loglik);
        const Eigen::VectorXd nk = cache.responsibilities.colwise().sum().transpose();
        if (spec.K > 1 && nk.minCoeff() < spec.q + 1) {
            out.degenerate = true;
            return out;
        }
        const auto& tr = fm.loglik_trace;
        const std::size_t s = tr.size();
        if (s >= 3 && aitken_converged(tr[s - 3], tr[s - 2], tr[s - 1], config.aitken_eps)) {
            fm.converged = true;
            break;
        }
        if (it + 1 == config.max_iter) break;
        MStepResult ms = mstep(data, spec, cache, params, weights, config.ridge);
        params = maximize_index_likelihood(data, spec, ms.params, ms.weights, config.index_steps);
        weights = std::move(ms.weights);
        flags = std::move(ms.flags);
    }
    fm.params = std::move(params);
    fm.weights = std::move(weights);
    fm.flags = std::move(flags);
    fm.iterations = static_cast<int>(fm.loglik_trace.size());
    fm.loglik = cache.loglik;
    fm.responsibilities = cache.responsibilities;
    fm.map_labels.resize(data.n());
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        Eigen::Index k;
        fm.responsibilities.row(i).maxCoeff(&k);
        fm.map_labels[i] = static_cast<int>(k) + 1;
    }
    fm.n_free = count_free_parameters(spec, static_cast<int>(data.T()), spec.q, static_cast<int>(data.m()));
    fm.bic = bic(fm.loglik, fm.n_free, data.n());
    return out;
}

}  // namespace

FittedModel fit(const LongitudinalDataset& data, const ModelSpec& spec, const FitConfig& config) {
    validate(data);
    validate(spec, data.T(), data.n());
    if (config.max_iter < 1) throw InputError("max_iter must be at least 1");
    if (!(config.aitken_eps > 0.0)) throw InputError("aitken_eps must be positive");
    if (spec.use_covariate_mixing && data.m() == 0)
        throw InputError("covariate-dependent mixing needs covariates");

    const bool supplied = config.init == InitMethod::Supplied;
    const int starts = supplied ? 1 : std::max(1, config.n_starts);
    FittedModel best;
    bool have = false;
    int restarts = 0;
    std::string last_error;
    for (int s = 0; s < starts; ++s) {
        bool done = false;
        for (int attempt = 0; attempt <= config.max_restarts && !done; ++attempt) {
            Rng rng = make_rng(config.seed, static_cast<std::uint64_t>(s) * 1024 + attempt);
            // A k-means start that failed tends to fail again the same way on
            // outlying subjects; restarts use a random partition instead.
            FitConfig run_config = config;
            if (attempt > 0 && config.init == InitMethod::KMeansLike) run_config.init = InitMethod::RandomPartition;
            try {
                RunOutcome r = run_em(data, spec, run_config, rng);
                if (r.degenerate) {
                    last_error = "a class fell below q+1 effective members";
                    ++restarts;
                } else {
                    if (!have || r.model.loglik > best.loglik) {
                        best = std::move(r.model);
                        have = true;
                    }
                    done = true;
                }
            } catch (const ConditioningError& e) {
                last_error = e.what();
                ++restarts;
            } catch (const DomainError& e) {
                last_error = e.what();
                ++restarts;
            }
            if (supplied) break;
        }
    }
    if (!have) throw FitError("all starts failed: " + last_error);
    best.restarts = restarts;
    if (restarts > 0) best.flags.push_back("restarted " + std::to_string(restarts) + " run(s): " + last_error);
    return best;
}

}  // namespace ghgmm
