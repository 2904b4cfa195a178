#pragma once

#include "selftune/learner.hpp"
#include "selftune/policy.hpp"
#include "selftune/sim.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace selftune::io {

using nlohmann::json;

class PlantFileNotFound : public std::runtime_error {
   public:
    explicit PlantFileNotFound(const std::string& path) : std::runtime_error("plant file not found: " + path) {}
};

/// 64-bit FNV-1a as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

/// Hash of a JSON document's canonical (key-sorted, compact) dump.
std::string config_hash(const json& doc);

/// Plant from a config document:
///   {"type": "tf", "num": [...], "den": [...]}
///   {"type": "nonlinear", "preset": "sin-tanh" | "pendulum" | "zero",
///    "L1": ..., "L2": ..., "w": ..., "a1": ..., "a2": ...}
sim::Plant plant_from_json(const json& doc);
json load_json_file(const std::filesystem::path& path);
/// Reads a plant config file; throws PlantFileNotFound when it is missing.
json load_plant_config(const std::filesystem::path& path);

json to_json(const sim::ControllerParams& k);
sim::ControllerParams gains_from_json(const json& doc);
json to_json(const sim::SimConfig& cfg);
sim::SimConfig sim_config_from_json(const json& doc);
json to_json(const learner::LearnConfig& cfg);
learner::LearnConfig learn_config_from_json(const json& doc);
json to_json(const policy::SamplingConfig& cfg);
policy::SamplingConfig sampling_config_from_json(const json& doc);
json to_json(const policy::TrainHyper& h);
policy::TrainHyper train_hyper_from_json(const json& doc);

/// Leading "# key=value" lines carried by every CSV artifact.
struct Provenance {
    std::string config_hash;
    std::uint64_t seed = 0;
};

void write_trajectory_csv(std::ostream& os, const sim::Trajectory& traj, const Provenance& prov);

void write_dataset_csv(std::ostream& os, const std::vector<policy::PolicyRecord>& records, const Provenance& prov);
/// Throws std::runtime_error on a malformed header or row.
std::vector<policy::PolicyRecord> read_dataset_csv(std::istream& is);

void write_report_csv(std::ostream& os, const learner::LearningReport& report, const Provenance& prov);
/// Rows only; summary fields come from the JSON block.
std::vector<learner::IterationRow> read_report_csv(std::istream& is, double filterN);

/// Summary JSON of a learning run, including everything needed to replay it.
json report_summary(const learner::LearningReport& report, const json& plant_config,
                    const sim::ControllerParams& init, const learner::LearnConfig& cfg,
                    const std::string& model_hash, const Provenance& prov);
/// Rebuilds a report from its CSV rows and summary.
learner::LearningReport report_from_bundle(const std::vector<learner::IterationRow>& rows, const json& summary);

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct PlotSpec {
    std::string title;
    std::string xlabel;
    std::string ylabel;
    std::vector<Series> series;
};

/// Self-contained SVG line chart.
std::string svg_line_plot(const PlotSpec& spec);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace selftune::io
