#pragma once

#include "selftune/metrics.hpp"
#include "selftune/network.hpp"
#include "selftune/sim.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace selftune::policy {

using Increment = std::array<double, 3>;

/// One row of the policy dataset: indicators followed by the gain increment label.
struct PolicyRecord {
    metrics::PerfIndicators indicators;
    Increment dk{};

    std::array<double, 7> as_array() const;
    static PolicyRecord from_array(const std::array<double, 7>& v);
    bool operator==(const PolicyRecord&) const = default;
};

class DatasetError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

class TrainingError : public std::runtime_error {
   public:
    TrainingError(const std::string& what, int epoch) : std::runtime_error(what), epoch_(epoch) {}
    int epoch() const { return epoch_; }

   private:
    int epoch_;
};

/// FNV-1a digest of the records' bit patterns, as 16 hex digits.
std::string dataset_hash(const std::vector<PolicyRecord>& records);

/// Label for a sampled controller: K* - alpha * K^i.
Increment make_label(const sim::ControllerParams& kstar, const sim::ControllerParams& sampled,
                     double alpha);

/// Every field scaled by (1 + delta).
PolicyRecord augment_record(const PolicyRecord& rec, double delta);

struct SamplingConfig {
    std::size_t samples = 5000;
    /// Candidate gains are drawn log-uniformly from [K* * lower, K* * upper].
    Increment lower_factor{0.05, 0.05, 0.05};
    Increment upper_factor{5.0, 5.0, 5.0};
    double ystar = 1.0;
    sim::SimConfig sim;
    std::size_t min_valid = 100;
};

struct Augmentation {
    std::size_t copies = 0;  // noisy copies added per record
    double noise = 0.05;     // delta ~ U[-noise, +noise]
};

struct Dataset {
    std::vector<PolicyRecord> records;
    /// Gains behind the first `base_count` records (pre-augmentation).
    std::vector<sim::ControllerParams> sampled_gains;
    std::size_t base_count = 0;
    std::size_t diverged = 0;
    std::size_t no_rise = 0;
};

/// Samples gains around K*, runs a step test for each and labels the valid
/// ones. Simulations run concurrently; results are independent of thread count.
Dataset generate_dataset(const sim::ControllerParams& kstar, const sim::Plant& plant,
                         const SamplingConfig& sampling, double alpha, const Augmentation& aug,
                         std::uint64_t seed);

/// Per-column mean and scale over all seven record columns.
struct NormStats {
    std::array<double, 7> mean{};
    std::array<double, 7> scale{1, 1, 1, 1, 1, 1, 1};
};

NormStats fit_norm(const std::vector<PolicyRecord>& records);
std::vector<PolicyRecord> normalize(const std::vector<PolicyRecord>& records, const NormStats& stats);
std::vector<PolicyRecord> denormalize(const std::vector<PolicyRecord>& records, const NormStats& stats);

struct Architecture {
    std::vector<int> hidden{32, 32};
};

struct TrainHyper {
    int epochs = 300;
    int batch = 64;
    double learning_rate = 3e-3;
    double lr_decay = 0.99;  // per epoch
    double validation_fraction = 0.2;
};

struct ModelMeta {
    std::uint64_t seed = 0;
    double train_loss = 0.0;
    double validation_loss = 0.0;
    std::string dataset_hash;
    std::size_t records = 0;
    TrainHyper hyper;
    std::vector<double> loss_history;  // full-train MSE after each epoch
};

struct PolicyModel {
    static constexpr int kFormatVersion = 1;
    Mlp net;
    NormStats norm;
    ModelMeta meta;

    void validate() const;
};

inline constexpr std::size_t kMinTrainingRecords = 100;

/// Mean-squared error is measured on normalized labels.
PolicyModel train(const std::vector<PolicyRecord>& records, const Architecture& arch,
                  const TrainHyper& hyper, std::uint64_t seed);

/// Raw (unclamped) increment estimate for a set of indicators.
Increment predict(const PolicyModel& model, const metrics::PerfIndicators& ind);

/// Mean-squared error of a model over records, in normalized label units.
double evaluate_mse(const PolicyModel& model, const std::vector<PolicyRecord>& records);

struct ClampLimits {
    Increment max_increment{10.0, 10.0, 10.0};
    std::optional<Increment> min_gain;
    std::optional<Increment> max_gain;
    void validate() const;
};

struct ClampResult {
    Increment dk{};
    int clip_events = 0;
};

/// Saturates each increment to +-max_increment, then pulls the resulting
/// gain back into its [min, max] box.
ClampResult clamp_update(const Increment& raw, const ClampLimits& limits,
                         const sim::ControllerParams& current);

nlohmann::json to_json(const PolicyModel& model);
PolicyModel model_from_json(const nlohmann::json& doc);

}  // namespace selftune::policy
