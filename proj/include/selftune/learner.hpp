#pragma once

#include "selftune/metrics.hpp"
#include "selftune/policy.hpp"
#include "selftune/sim.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace selftune::learner {

/// Baseline the predicted increment is added to.
enum class UpdateMode {
    Incremental,  // K(i+1) = K(i) + dK
    FromInitial,  // K(i+1) = K(0) + dK
};

struct LearnConfig {
    int max_iterations = 100;
    double alpha = 0.1;
    metrics::PerfTargets targets;
    metrics::CostWeights weights;
    /// Multiply the predicted increments by the cost weights (a, b, c).
    bool weight_increments = true;
    policy::ClampLimits clamp;
    sim::SimConfig sim;
    double ystar = 1.0;
    std::uint64_t seed = 0;
    UpdateMode mode = UpdateMode::Incremental;
    bool keep_trajectories = false;

    void validate() const;
};

enum class RowStatus {
    Accepted,   // indicators available, update applied
    Converged,  // terminal condition met, no update
    Rejected,   // step test produced no usable indicators; rolled back
    Penalized,  // step test diverged; penalty cost and rollback
};
std::string to_string(RowStatus s);
RowStatus row_status_from_string(const std::string& s);

struct IterationRow {
    int iter = 0;
    sim::ControllerParams gains;
    metrics::PerfIndicators indicators;  // zeros unless status is Accepted/Converged
    double cost = 0.0;
    policy::Increment raw_dk{};
    policy::Increment dk{};
    int clip_events = 0;
    RowStatus status = RowStatus::Accepted;

    bool has_indicators() const { return status == RowStatus::Accepted || status == RowStatus::Converged; }
};

enum class Terminal { Converged, BudgetExhausted, Failed };
std::string to_string(Terminal t);
Terminal terminal_from_string(const std::string& s);

struct LearningReport {
    std::vector<IterationRow> rows;
    Terminal status = Terminal::BudgetExhausted;
    std::string message;
    sim::ControllerParams best_gains;
    double best_cost = 0.0;
    int best_row = -1;
    /// Row whose gains the run ends on: the converged row, or the best row.
    int terminal_row = -1;
    int penalties = 0;
    int rollbacks = 0;
    /// Step responses per row, only when LearnConfig::keep_trajectories.
    std::vector<sim::Trajectory> trajectories;

    const IterationRow& terminal() const { return rows.at(static_cast<std::size_t>(terminal_row)); }
    std::vector<double> best_so_far() const;
    double max_overshoot() const;
};

class LearningError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

/// Self-learning reconstruction loop: step test, cost, terminal check, policy
/// prediction and clamped gain update, at most max_iterations times.
LearningReport run_learning(const sim::Plant& plant, const sim::ControllerParams& init,
                            const policy::PolicyModel& model, const LearnConfig& cfg);

struct ReplayVerdict {
    bool pass = false;
    std::array<double, 4> indicator_diff{};
    double cost_diff = 0.0;
    std::string message;
};

/// Re-simulates the terminal gains and compares with the recorded row.
ReplayVerdict replay_report(const LearningReport& report, const sim::Plant& plant,
                            const LearnConfig& cfg, double tolerance = 1e-9);

}  // namespace selftune::learner
