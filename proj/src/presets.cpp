#include "selftune/presets.hpp"

#include <stdexcept>

namespace selftune::presets {

using nlohmann::json;

json g1_config() { return {{"type", "tf"}, {"num", {8.0}}, {"den", {1.0, 0.878, 21.5}}}; }

json g2a_config() {
    return {{"type", "tf"}, {"num", {0.069, 8.41, 0.91}}, {"den", {1.0, 25.14, 161.8, 16.75, 1.28}}};
}

json g2b_config() {
    return {{"type", "tf"}, {"num", {0.8, 9.40, 1.04}}, {"den", {1.0, 25.01, 159.8, 17.17, -0.46}}};
}

namespace {

CasePreset case_a(const std::string& name, const sim::ControllerParams& init, const std::string& what) {
    CasePreset p;
    p.name = name;
    p.description = "second-order circuit plant 8/(s^2+0.878s+21.5), " + what;
    p.plant_config = g1_config();
    p.dataset_plant_config = p.plant_config;
    p.kstar = {32.17, 18.6, 12.36, 11320.0};
    p.init = init;

    sim::SimConfig sc;
    sc.step = 1e-4;
    sc.horizon = 0.1;
    p.sampling.samples = 5000;
    p.sampling.sim = sc;

    auto& L = p.learn;
    L.max_iterations = 100;
    L.alpha = 0.1;
    L.targets.target = {0.0055, 0.01, 0.034, 0.021};
    L.targets.cost_threshold = 0.015;
    L.weights = {0.6, 0.3, 0.2, 0.3};
    L.weight_increments = false;
    L.clamp.max_increment = {10.0, 10.0, 10.0};
    L.clamp.min_gain = policy::Increment{0.1, 0.1, 0.01};
    L.clamp.max_gain = policy::Increment{500.0, 500.0, 200.0};
    L.sim = sc;
    return p;
}

CasePreset case_b(const std::string& name, const json& plant, const std::string& what) {
    CasePreset p;
    p.name = name;
    p.description = "morphing-wing attitude plant, " + what;
    p.plant_config = plant;
    // One policy, trained on cruise-state data, serves both wingspans.
    p.dataset_plant_config = g2a_config();
    p.kstar = {210.0, 0.7, 27.0, 100.0};
    p.init = {20.0, 1.0, 2.0, 100.0};

    sim::SimConfig sc;
    sc.step = 1e-3;
    sc.horizon = 2.0;
    p.sampling.samples = 5000;
    p.sampling.sim = sc;

    auto& L = p.learn;
    L.max_iterations = 100;
    L.alpha = 0.1;
    L.targets.target = {0.02, 0.01, 0.1, 0.25};
    L.targets.cost_threshold = 0.04;
    L.weights = {0.6, 0.3, 0.2, 0.3};
    L.weight_increments = false;
    L.clamp.max_increment = {50.0, 50.0, 50.0};
    L.clamp.min_gain = policy::Increment{0.5, 0.05, 0.05};
    L.clamp.max_gain = policy::Increment{5000.0, 500.0, 500.0};
    L.sim = sc;
    return p;
}

}  // namespace

std::vector<std::string> names() {
    return {"case-a", "case-a-text", "case-a-figure", "case-a-random", "case-b-g2a", "case-b-g2b"};
}

CasePreset by_name(const std::string& name) {
    if (name == "case-a" || name == "case-a-text")
        return case_a(name, {90.0, 3.0, 1.0, 11320.0}, "initial gains (90, 3, 1)");
    if (name == "case-a-figure") return case_a(name, {90.0, 10.0, 10.0, 11320.0}, "initial gains (90, 10, 10)");
    if (name == "case-a-random") return case_a(name, {10.0, 1.0, 1.0, 11320.0}, "initial gains (10, 1, 1)");
    if (name == "case-b-g2a") return case_b(name, g2a_config(), "wingspan A (cruise)");
    if (name == "case-b-g2b") return case_b(name, g2b_config(), "wingspan B (take-off and landing)");
    throw std::invalid_argument("unknown preset '" + name + "'");
}

}  // namespace selftune::presets
