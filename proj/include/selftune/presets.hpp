#pragma once

#include "selftune/learner.hpp"
#include "selftune/policy.hpp"
#include "selftune/sim.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace selftune::presets {

/// Everything needed to run one pipeline end to end on a bundled plant.
struct CasePreset {
    std::string name;
    std::string description;
    nlohmann::json plant_config;
    /// Plant the policy dataset is generated on (the learning plant unless
    /// the model is shared with another case).
    nlohmann::json dataset_plant_config;
    sim::ControllerParams kstar;
    sim::ControllerParams init;
    policy::SamplingConfig sampling;
    double alpha = 0.1;
    policy::Augmentation augmentation;
    policy::Architecture arch;
    policy::TrainHyper hyper;
    learner::LearnConfig learn;
};

/// case-a (alias of case-a-text), case-a-text, case-a-figure, case-a-random,
/// case-b-g2a, case-b-g2b.
CasePreset by_name(const std::string& name);
std::vector<std::string> names();

nlohmann::json g1_config();
nlohmann::json g2a_config();
nlohmann::json g2b_config();

}  // namespace selftune::presets
