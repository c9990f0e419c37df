#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "ghgmm/model.hpp"

namespace ghgmm {

// Truths for one scenario. Class blocks reuse ClassParameters: beta_eta for
// Models I/III, beta_y for II/IV, (lambda, omega) or nu for the weight law.
struct ScenarioConfig {
    std::string name;
    Variant variant = Variant::ModelI;
    int n = 0;
    int K = 0;
    int T = 0;
    int q = 0;
    Eigen::VectorXd mixing;
    Eigen::VectorXd time_scores;
    double center = 0.0;
    std::vector<ClassParameters> classes;
    std::uint64_t seed = 1;
};

struct SimulatedData {
    LongitudinalDataset data;
    std::vector<int> labels;  // 1..K
};

void validate(const ScenarioConfig& cfg);

// Subject i uses its own generator stream derived from (seed, i).
SimulatedData generate(const ScenarioConfig& cfg);

// The four built-in simulation designs, id in 1..4.
ScenarioConfig builtin_scenario(int id);

}  // namespace ghgmm
