#pragma once

#include "selftune/io.hpp"
#include "selftune/learner.hpp"
#include "selftune/policy.hpp"
#include "selftune/presets.hpp"

#include <filesystem>
#include <string>

namespace selftune::pipeline {

/// Configuration document a run's artifacts are hashed over.
nlohmann::json preset_document(const presets::CasePreset& p);

policy::Dataset build_dataset(const presets::CasePreset& p, std::uint64_t seed);
policy::PolicyModel train_model(const std::vector<policy::PolicyRecord>& records, const presets::CasePreset& p,
                                std::uint64_t seed);
std::string model_hash(const policy::PolicyModel& model);

learner::LearningReport learn(const presets::CasePreset& p, const policy::PolicyModel& model,
                              bool keep_trajectories = false);

/// dataset.csv and dataset.json.
void write_dataset_bundle(const std::filesystem::path& dir, const policy::Dataset& ds,
                          const presets::CasePreset& p, const io::Provenance& prov);
/// model.json with provenance fields added.
void write_model(const std::filesystem::path& path, const policy::PolicyModel& model, const io::Provenance& prov);
policy::PolicyModel read_model(const std::filesystem::path& path);

/// report.csv, summary.json and, when `plots` is set, four SVG charts.
void write_learning_bundle(const std::filesystem::path& dir, const learner::LearningReport& report,
                           const presets::CasePreset& p, const std::string& model_hash,
                           const io::Provenance& prov, bool plots);

struct Bundle {
    learner::LearningReport report;
    nlohmann::json summary;
    sim::Plant plant;
    learner::LearnConfig cfg;
};
/// Reads report.csv and summary.json back from a bundle directory.
Bundle read_learning_bundle(const std::filesystem::path& dir);

}  // namespace selftune::pipeline
