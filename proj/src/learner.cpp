#include "selftune/learner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace selftune::learner {

namespace {

bool inside_box(const sim::ControllerParams& k, const policy::ClampLimits& limits) {
    const std::array<double, 3> g{k.theta1, k.theta2, k.theta3};
    for (int i = 0; i < 3; ++i) {
        if (limits.min_gain && g[i] < (*limits.min_gain)[i]) return false;
        if (limits.max_gain && g[i] > (*limits.max_gain)[i]) return false;
    }
    return true;
}

sim::ControllerParams shifted(const sim::ControllerParams& k, const policy::Increment& d) {
    return {k.theta1 + d[0], k.theta2 + d[1], k.theta3 + d[2], k.filterN};
}

sim::ControllerParams into_box(sim::ControllerParams k, const policy::ClampLimits& limits) {
    std::array<double*, 3> g{&k.theta1, &k.theta2, &k.theta3};
    for (int i = 0; i < 3; ++i) {
        if (limits.min_gain) *g[i] = std::max(*g[i], (*limits.min_gain)[i]);
        if (limits.max_gain) *g[i] = std::min(*g[i], (*limits.max_gain)[i]);
    }
    return k;
}

// Cost assigned to a diverged or unmeasurable trial.
double penalty_cost(double largest_finite) { return largest_finite > 0.0 ? 10.0 * largest_finite : 1e3; }

}  // namespace

void LearnConfig::validate() const {
    if (max_iterations < 1) throw std::invalid_argument("iteration budget n must be at least 1");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("learning rate alpha must lie in (0, 1]");
    targets.validate();
    weights.validate();
    clamp.validate();
    sim.validate();
    if (ystar == 0.0 || !std::isfinite(ystar)) throw std::invalid_argument("reference y* must be nonzero");
}

std::string to_string(RowStatus s) {
    switch (s) {
        case RowStatus::Accepted: return "accepted";
        case RowStatus::Converged: return "converged";
        case RowStatus::Rejected: return "rejected";
        case RowStatus::Penalized: return "penalized";
    }
    return "?";
}

RowStatus row_status_from_string(const std::string& s) {
    if (s == "accepted") return RowStatus::Accepted;
    if (s == "converged") return RowStatus::Converged;
    if (s == "rejected") return RowStatus::Rejected;
    if (s == "penalized") return RowStatus::Penalized;
    throw std::invalid_argument("unknown row status '" + s + "'");
}

std::string to_string(Terminal t) {
    switch (t) {
        case Terminal::Converged: return "converged";
        case Terminal::BudgetExhausted: return "iteration-budget-exhausted";
        case Terminal::Failed: return "failed";
    }
    return "?";
}

Terminal terminal_from_string(const std::string& s) {
    if (s == "converged") return Terminal::Converged;
    if (s == "iteration-budget-exhausted") return Terminal::BudgetExhausted;
    if (s == "failed") return Terminal::Failed;
    throw std::invalid_argument("unknown terminal status '" + s + "'");
}

std::vector<double> LearningReport::best_so_far() const {
    std::vector<double> out;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : rows) {
        if (!r.has_indicators()) continue;
        best = std::min(best, r.cost);
        out.push_back(best);
    }
    return out;
}

double LearningReport::max_overshoot() const {
    double worst = 0.0;
    for (const auto& r : rows)
        if (r.has_indicators()) worst = std::max(worst, r.indicators.overshoot);
    return worst;
}

LearningReport run_learning(const sim::Plant& plant, const sim::ControllerParams& init,
                            const policy::PolicyModel& model, const LearnConfig& cfg) {
    cfg.validate();
    model.validate();
    init.validate();
    if (!inside_box(init, cfg.clamp)) throw LearningError("initial gains lie outside the clamp box");

    LearningReport report;
    sim::ControllerParams gains = init;
    std::optional<sim::ControllerParams> baseline;  // last gains with a usable response
    policy::Increment last_step{};
    double largest_finite = 0.0;
    const std::array<double, 3> output_weights =
        cfg.weight_increments ? std::array<double, 3>{cfg.weights.a, cfg.weights.b, cfg.weights.c}
                              : std::array<double, 3>{1.0, 1.0, 1.0};

    for (int i = 0; i < cfg.max_iterations; ++i) {
        IterationRow row;
        row.iter = i;
        row.gains = gains;

        auto traj = sim::closed_loop_step(plant, gains, cfg.ystar, cfg.sim);
        std::optional<metrics::StepMetrics> measured;
        if (traj.diverged) {
            row.status = RowStatus::Penalized;
        } else {
            try {
                measured = metrics::compute_indicators(traj, cfg.ystar);
            } catch (const metrics::MetricsError&) {
                row.status = RowStatus::Rejected;
            }
        }
        if (cfg.keep_trajectories) report.trajectories.push_back(std::move(traj));

        if (!measured) {
            row.cost = penalty_cost(largest_finite);
            if (row.status == RowStatus::Penalized) ++report.penalties;
            // Roll back to the last good gains and retry with half the step.
            // Before any usable trial the zero controller is the baseline, so
            // the gains themselves are halved.
            if (!baseline && i == 0) last_step = {gains.theta1, gains.theta2, gains.theta3};
            for (double& s : last_step) s *= 0.5;
            const auto origin = baseline.value_or(sim::ControllerParams{0.0, 0.0, 0.0, gains.filterN});
            const auto next = into_box(shifted(origin, last_step), cfg.clamp);
            row.dk = {next.theta1 - gains.theta1, next.theta2 - gains.theta2, next.theta3 - gains.theta3};
            gains = next;
            ++report.rollbacks;
            report.rows.push_back(row);
            continue;
        }

        row.indicators = measured->indicators;
        row.cost = metrics::compute_cost(row.indicators, cfg.targets, cfg.weights);
        largest_finite = std::max(largest_finite, row.cost);
        if (report.best_row < 0 || row.cost < report.best_cost) {
            report.best_row = static_cast<int>(report.rows.size());
            report.best_cost = row.cost;
            report.best_gains = gains;
        }

        const bool gate = cfg.targets.overshoot_gate && row.indicators.overshoot < *cfg.targets.overshoot_gate;
        if (row.cost < cfg.targets.cost_threshold || gate) {
            row.status = RowStatus::Converged;
            report.rows.push_back(row);
            report.status = Terminal::Converged;
            report.terminal_row = static_cast<int>(report.rows.size()) - 1;
            break;
        }

        row.raw_dk = policy::predict(model, row.indicators);
        policy::Increment scaled{};
        for (int k = 0; k < 3; ++k) scaled[k] = cfg.alpha * output_weights[k] * row.raw_dk[k];
        const auto& base = cfg.mode == UpdateMode::Incremental ? gains : init;
        const auto clamped = policy::clamp_update(scaled, cfg.clamp, base);
        row.dk = clamped.dk;
        row.clip_events = clamped.clip_events;
        row.status = RowStatus::Accepted;
        report.rows.push_back(row);

        const auto next = shifted(base, clamped.dk);
        last_step = {next.theta1 - gains.theta1, next.theta2 - gains.theta2, next.theta3 - gains.theta3};
        baseline = gains;
        gains = next;
    }

    if (report.status != Terminal::Converged) {
        if (report.best_row < 0) {
            report.status = Terminal::Failed;
            report.message = "all " + std::to_string(report.rows.size()) + " iterations diverged or gave no usable response";
            report.terminal_row = static_cast<int>(report.rows.size()) - 1;
            report.best_cost = report.rows.back().cost;
            report.best_gains = report.rows.back().gains;
        } else {
            report.status = Terminal::BudgetExhausted;
            report.terminal_row = report.best_row;
        }
    }
    return report;
}

ReplayVerdict replay_report(const LearningReport& report, const sim::Plant& plant,
                            const LearnConfig& cfg, double tolerance) {
    if (report.rows.empty() || report.terminal_row < 0 ||
        report.terminal_row >= static_cast<int>(report.rows.size()))
        throw std::invalid_argument("malformed learning report: no terminal row");

    const auto& row = report.terminal();
    ReplayVerdict verdict;
    const auto traj = sim::closed_loop_step(plant, row.gains, cfg.ystar, cfg.sim);
    std::optional<metrics::PerfIndicators> replayed;
    if (!traj.diverged) {
        try {
            replayed = metrics::compute_indicators(traj, cfg.ystar).indicators;
        } catch (const metrics::MetricsError&) {
        }
    }

    if (!row.has_indicators()) {
        verdict.pass = !replayed.has_value();
        verdict.message = verdict.pass ? "terminal trial fails on replay as recorded"
                                       : "terminal trial was recorded as failed but replays cleanly";
        return verdict;
    }
    if (!replayed) {
        verdict.message = "terminal gains no longer produce a usable step response";
        return verdict;
    }

    const auto a = row.indicators.as_array();
    const auto b = replayed->as_array();
    double worst = 0.0;
    for (int i = 0; i < 4; ++i) {
        verdict.indicator_diff[i] = b[i] - a[i];
        worst = std::max(worst, std::abs(verdict.indicator_diff[i]));
    }
    verdict.cost_diff = metrics::compute_cost(*replayed, cfg.targets, cfg.weights) - row.cost;
    verdict.pass = worst <= tolerance && std::abs(verdict.cost_diff) <= tolerance;

    std::ostringstream os;
    os << (verdict.pass ? "replay matches" : "replay differs") << ": indicator diffs [" << verdict.indicator_diff[0]
       << ", " << verdict.indicator_diff[1] << ", " << verdict.indicator_diff[2] << ", "
       << verdict.indicator_diff[3] << "], cost diff " << verdict.cost_diff;
    verdict.message = os.str();
    return verdict;
}

}  // namespace selftune::learner
