#include "selftune/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace selftune::metrics {

namespace {

// Time at which the oriented signal first reaches `level`, interpolated
// between samples. Returns nullopt when it never does.
std::optional<double> first_crossing(const sim::Trajectory& traj, double sign, double level) {
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const double v = sign * traj.y[k];
        if (v < level) continue;
        if (k == 0) return traj.t[0];
        const double prev = sign * traj.y[k - 1];
        const double frac = (level - prev) / (v - prev);
        return traj.t[k - 1] + frac * (traj.t[k] - traj.t[k - 1]);
    }
    return std::nullopt;
}

}  // namespace

StepMetrics compute_indicators(const sim::Trajectory& traj, double ystar) {
    if (traj.diverged) throw MetricsError(MetricsError::Kind::Diverged, "trajectory diverged");
    if (ystar == 0.0 || !std::isfinite(ystar))
        throw MetricsError(MetricsError::Kind::BadReference, "step indicators need a nonzero reference");
    if (traj.size() < 2) throw MetricsError(MetricsError::Kind::NoRise, "trajectory too short");

    const double sign = ystar > 0.0 ? 1.0 : -1.0;
    const double target = std::abs(ystar);
    const double horizon = traj.horizon();

    const double window_start = traj.t.front() + (1.0 - kSteadyStateWindow) * (horizon - traj.t.front());
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t k = 0; k < traj.size(); ++k) {
        if (traj.t[k] + 1e-12 * horizon < window_start) continue;
        sum += sign * traj.y[k];
        ++count;
    }
    const double steady = sum / static_cast<double>(count);
    if (!(steady > 0.0))
        throw MetricsError(MetricsError::Kind::NoRise, "response never moves toward the reference");

    StepMetrics out;
    out.steady_state = sign * steady;

    double peak = -INFINITY;
    for (double y : traj.y) peak = std::max(peak, sign * y);
    // A response still creeping up at the horizon ends above its window mean; that is not overshoot.
    const double final_value = std::max(steady, sign * traj.y.back());
    out.indicators.overshoot = std::max(0.0, (peak - final_value) / steady);
    out.indicators.sse = sign * (target - steady);

    const auto t10 = first_crossing(traj, sign, 0.1 * steady);
    const auto t90 = first_crossing(traj, sign, 0.9 * steady);
    if (!t10 || !t90)
        throw MetricsError(MetricsError::Kind::NoRise, "response never reaches 10% of its final value");
    out.indicators.rise = *t90 - *t10;

    const double band = kSettlingBand * target;
    std::size_t last_out = traj.size();
    for (std::size_t k = traj.size(); k-- > 0;) {
        if (std::abs(sign * traj.y[k] - target) > band) {
            last_out = k;
            break;
        }
    }
    if (last_out == traj.size()) {
        out.indicators.settle = 0.0;
    } else if (last_out + 1 == traj.size()) {
        out.indicators.settle = horizon;
        out.never_settled = true;
    } else {
        // Interpolate the band entry between the last outside sample and the next one.
        const double a = std::abs(sign * traj.y[last_out] - target);
        const double b = std::abs(sign * traj.y[last_out + 1] - target);
        const double frac = a > b ? (a - band) / (a - b) : 0.0;
        out.indicators.settle =
            traj.t[last_out] + std::clamp(frac, 0.0, 1.0) * (traj.t[last_out + 1] - traj.t[last_out]);
    }
    out.horizon_too_short = horizon < 5.0 * out.indicators.settle;
    return out;
}

void CostWeights::validate() const {
    if (!(a > 0 && b > 0 && c > 0 && d > 0))
        throw std::invalid_argument("cost weights must be strictly positive");
}

void PerfTargets::validate() const {
    if (!(cost_threshold > 0.0)) throw std::invalid_argument("cost threshold J* must be positive");
    if (overshoot_gate && !(*overshoot_gate > 0.0))
        throw std::invalid_argument("overshoot gate d1* must be positive when set");
}

double compute_cost(const PerfIndicators& ind, const PerfTargets& targets, const CostWeights& w) {
    w.validate();
    const auto& t = targets.target;
    const double h = w.a * std::pow(t.overshoot - ind.overshoot, 2) +
                     w.b * std::pow(t.sse - ind.sse, 2) + w.c * std::pow(t.rise - ind.rise, 2) +
                     w.d * std::pow(t.settle - ind.settle, 2);
    return std::sqrt(h);
}

double path_norm(const std::array<double, 3>& delta, PathNorm variant) {
    const double x = std::abs(delta[0]);
    const double y = std::abs(delta[1]);
    const double z = std::abs(delta[2]);
    switch (variant) {
        case PathNorm::Sum:
            return x + y + z;
        case PathNorm::Planar:
            return std::hypot(x, y) + z;
        case PathNorm::Euclidean:
            return std::sqrt(x * x + y * y + z * z);
    }
    return 0.0;
}

}  // namespace selftune::metrics
