#pragma once

#include "selftune/sim.hpp"

#include <array>
#include <optional>
#include <stdexcept>
#include <string>

namespace selftune::metrics {

/// Step-response indicator vector: overshoot, steady-state error, rise time
/// and settling time.
struct PerfIndicators {
    double overshoot = 0.0;  // fraction of y(inf)
    double sse = 0.0;        // y* - y(inf), output units
    double rise = 0.0;       // seconds
    double settle = 0.0;     // seconds

    std::array<double, 4> as_array() const { return {overshoot, sse, rise, settle}; }
    static PerfIndicators from_array(const std::array<double, 4>& v) { return {v[0], v[1], v[2], v[3]}; }
    bool operator==(const PerfIndicators&) const = default;
};

struct StepMetrics {
    PerfIndicators indicators;
    double steady_state = 0.0;       // y(inf) estimate
    bool horizon_too_short = false;  // horizon < 5 * settling time
    bool never_settled = false;      // settle reported as the horizon
};

class MetricsError : public std::runtime_error {
   public:
    enum class Kind { Diverged, NoRise, BadReference };
    MetricsError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

   private:
    Kind kind_;
};

/// Fraction of the horizon averaged to estimate y(inf).
inline constexpr double kSteadyStateWindow = 0.05;
/// Settling band half-width as a fraction of |y*|.
inline constexpr double kSettlingBand = 0.05;

/// Indicators of a step trajectory. Rise time is the 10-90 % crossing
/// interval of y(inf); settling is the last entry into the +-5 % band around
/// y*. Sample crossings are located by linear interpolation. Responses to a
/// negative y* are measured on -y.
StepMetrics compute_indicators(const sim::Trajectory& traj, double ystar);

struct CostWeights {
    double a = 0.6;
    double b = 0.3;
    double c = 0.2;
    double d = 0.3;
    void validate() const;
};

struct PerfTargets {
    PerfIndicators target{0.0055, 0.01, 0.034, 0.021};
    double cost_threshold = 0.02;                  // J*
    std::optional<double> overshoot_gate;          // d1*, disabled when unset
    void validate() const;
};

/// sqrt of the weighted squared deviation from the targets.
double compute_cost(const PerfIndicators& ind, const PerfTargets& targets, const CostWeights& w);

enum class PathNorm { Sum, Planar, Euclidean };

/// Length of a gain increment under one of the three path measures
/// (component magnitudes are used).
double path_norm(const std::array<double, 3>& delta, PathNorm variant = PathNorm::Euclidean);

}  // namespace selftune::metrics
