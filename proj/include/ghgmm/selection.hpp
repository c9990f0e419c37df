#pragma once

#include <Eigen/Core>
#include <map>
#include <string>
#include <vector>

#include "ghgmm/em.hpp"
#include "ghgmm/model.hpp"

namespace ghgmm {

// 2 l - n_free log n; larger is better.
double bic(double loglik, int n_free, Eigen::Index n);

struct SweepEntry {
    ModelSpec spec;
    int K = 0;
    double loglik = 0.0;
    int n_free = 0;
    double bic = 0.0;
    bool converged = false;
    bool failed = false;
    std::string error;
};

struct SelectionReport {
    std::vector<SweepEntry> entries;
    int best = -1;
};

// Fits every (variant, parameterization, K) cell. q and covariate use come
// from `base`. Non-converged or failed cells stay in the report but cannot
// be best.
SelectionReport sweep(const LongitudinalDataset& data, const std::vector<Variant>& variants,
                      const std::vector<Parameterization>& parameterizations, int k_min, int k_max,
                      const ModelSpec& base, const FitConfig& config);

double ari(const std::vector<int>& a, const std::vector<int>& b);
double err(const std::vector<int>& truth, const std::vector<int>& predicted);
Eigen::MatrixXi confusion(const std::vector<int>& a, const std::vector<int>& b);

// Misclassification-minimizing one-to-one map from predicted to true labels.
// Predicted labels left without a partner are absent from the map.
std::map<int, int> match_labels(const std::vector<int>& truth, const std::vector<int>& predicted);

}  // namespace ghgmm
