#include "ghgmm/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ghgmm {

double bic(double loglik, int n_free, Eigen::Index n) {
    if (n < 1) throw InputError("bic: n must be at least 1");
    return 2.0 * loglik - n_free * std::log(static_cast<double>(n));
}

SelectionReport sweep(const LongitudinalDataset& data, const std::vector<Variant>& variants,
                      const std::vector<Parameterization>& parameterizations, int k_min, int k_max,
                      const ModelSpec& base, const FitConfig& config) {
    if (variants.empty() || parameterizations.empty()) throw InputError("sweep: empty variant or parameterization list");
    if (k_min < 1 || k_max < k_min) throw InputError("sweep: empty K range");
    SelectionReport rep;
    for (Variant v : variants) {
        for (Parameterization p : parameterizations) {
            for (int K = k_min; K <= k_max; ++K) {
                ModelSpec spec = base;
                spec.variant = v;
                spec.parameterization = p;
                spec.K = K;
                SweepEntry e;
                e.spec = spec;
                e.K = K;
                e.n_free = count_free_parameters(spec, static_cast<int>(data.T()), spec.q, static_cast<int>(data.m()));
                try {
                    const FittedModel fm = fit(data, spec, config);
                    e.loglik = fm.loglik;
                    e.bic = fm.bic;
                    e.converged = fm.converged;
                } catch (const FitError& ex) {
                    e.failed = true;
                    e.error = ex.what();
                    e.loglik = e.bic = std::numeric_limits<double>::quiet_NaN();
                }
                rep.entries.push_back(e);
            }
        }
    }
    bool any_ok = false;
    for (std::size_t j = 0; j < rep.entries.size(); ++j) {
        const SweepEntry& e = rep.entries[j];
        any_ok = any_ok || !e.failed;
        if (e.failed || !e.converged) continue;
        if (rep.best < 0 || e.bic > rep.entries[rep.best].bic) rep.best = static_cast<int>(j);
    }
    if (!any_ok) throw FitError("sweep: all fits failed");
    return rep;
}

namespace {

void check_lengths(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) throw InputError("label vectors differ in length");
    if (a.empty()) throw InputError("label vectors are empty");
}

std::vector<int> distinct(const std::vector<int>& v) {
    std::vector<int> d(v);
    std::sort(d.begin(), d.end());
    d.erase(std::unique(d.begin(), d.end()), d.end());
    return d;
}

int index_of(const std::vector<int>& sorted, int v) {
    return static_cast<int>(std::lower_bound(sorted.begin(), sorted.end(), v) - sorted.begin());
}

double choose2(double x) { return 0.5 * x * (x - 1.0); }

// Minimum-cost perfect assignment on a square matrix (Hungarian method with
// potentials). Returns row_of[col].
std::vector<int> hungarian(const Eigen::MatrixXd& cost) {
    const int n = static_cast<int>(cost.rows());
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    std::vector<bool> used(n + 1);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), false);
        do {
            used[j0] = true;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> row_of(n);
    for (int j = 1; j <= n; ++j) row_of[j - 1] = p[j] - 1;
    return row_of;
}

}  // namespace

Eigen::MatrixXi confusion(const std::vector<int>& a, const std::vector<int>& b) {
    check_lengths(a, b);
    const auto da = distinct(a);
    const auto db = distinct(b);
    Eigen::MatrixXi c = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(da.size()), static_cast<Eigen::Index>(db.size()));
    for (std::size_t i = 0; i < a.size(); ++i) c(index_of(da, a[i]), index_of(db, b[i])) += 1;
    return c;
}

double ari(const std::vector<int>& a, const std::vector<int>& b) {
    const Eigen::MatrixXd c = confusion(a, b).cast<double>();
    const double n = static_cast<double>(a.size());
    double index = 0.0;
    for (Eigen::Index i = 0; i < c.size(); ++i) index += choose2(c.data()[i]);
    double sa = 0.0;
    double sb = 0.0;
    for (Eigen::Index i = 0; i < c.rows(); ++i) sa += choose2(c.row(i).sum());
    for (Eigen::Index j = 0; j < c.cols(); ++j) sb += choose2(c.col(j).sum());
    const double total = choose2(n);
    const double expected = total > 0 ? sa * sb / total : 0.0;
    const double max_index = 0.5 * (sa + sb);
    if (max_index == expected) return 1.0;  // both partitions trivial and identical
    return (index - expected) / (max_index - expected);
}

std::map<int, int> match_labels(const std::vector<int>& truth, const std::vector<int>& predicted) {
    check_lengths(truth, predicted);
    const auto dt = distinct(truth);
    const auto dp = distinct(predicted);
    const Eigen::MatrixXi c = confusion(predicted, truth);  // rows predicted, cols truth
    const Eigen::Index s = std::max(c.rows(), c.cols());
    Eigen::MatrixXd cost = Eigen::MatrixXd::Zero(s, s);
    cost.topLeftCorner(c.rows(), c.cols()) = -c.cast<double>();
    const std::vector<int> row_of = hungarian(cost);
    std::map<int, int> out;
    for (Eigen::Index j = 0; j < s; ++j) {
        const int r = row_of[j];
        if (r < c.rows() && j < c.cols()) out[dp[r]] = dt[j];
    }
    return out;
}

double err(const std::vector<int>& truth, const std::vector<int>& predicted) {
    const auto map = match_labels(truth, predicted);
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const auto it = map.find(predicted[i]);
        if (it == map.end() || it->second != truth[i]) ++wrong;
    }
    return static_cast<double>(wrong) / static_cast<double>(truth.size());
}

}  // namespace ghgmm
