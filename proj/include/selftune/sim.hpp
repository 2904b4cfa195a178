#pragma once

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace selftune::sim {

/// Raised when a plant, controller or configuration violates its invariants.
class InvalidModel : public std::invalid_argument {
   public:
    using std::invalid_argument::invalid_argument;
};

/// Rational transfer function, coefficients in descending powers of s.
struct TransferFunction {
    std::vector<double> numerator;
    std::vector<double> denominator;

    void validate() const;
    std::size_t order() const { return denominator.empty() ? 0 : denominator.size() - 1; }
};

/// Single-input single-output realization  x' = A x + B u,  y = C x + D u.
struct StateSpace {
    Eigen::MatrixXd A;
    Eigen::VectorXd B;
    Eigen::RowVectorXd C;
    double D = 0.0;

    std::size_t order() const { return static_cast<std::size_t>(A.rows()); }
    void validate() const;
};

/// Controllable canonical realization. Throws InvalidModel for improper or
/// malformed transfer functions.
StateSpace tf_to_state_space(const TransferFunction& tf);

/// PID gains (theta1, theta2, theta3) and the derivative filter coefficient N.
struct ControllerParams {
    double theta1 = 0.0;  // proportional
    double theta2 = 0.0;  // integral, 1/s
    double theta3 = 0.0;  // derivative, s
    double filterN = 100.0;

    void validate() const;
    bool operator==(const ControllerParams&) const = default;
};

/// Discrete PID state for the sample-by-sample controller.
struct PidState {
    double integral = 0.0;
    double filter = 0.0;  // low-passed error feeding the derivative
    double previous_error = 0.0;
    bool primed = false;
};

struct PidOutput {
    double u;
    PidState state;
};

/// One controller update at sample spacing h.
///
/// Integral advances by the trapezoidal rule. The derivative is N*s/(s+N)
/// applied to e, discretized exactly under a first-order hold (e varies
/// linearly between samples), so ramps are tracked without discretization
/// error. The first call on a fresh state only latches e.
PidOutput pid_control(const ControllerParams& gains, double e, const PidState& state, double h);

/// Second-order plant  x1' = x2,  x2' = f(x1, x2, t) + w u,  y = x1.
struct NonlinearPlant {
    std::string name;
    std::function<double(double, double, double)> f;
    double L1 = 0.0;  // declared bound on |df/dx1|
    double L2 = 0.0;  // declared bound on |df/dx2|
    double w = 1.0;

    double operator()(double x1, double x2, double t) const { return f(x1, x2, t); }
    void validate() const;
};

using Plant = std::variant<StateSpace, NonlinearPlant>;

enum class DerivativeMode {
    Filtered,  // N*s/(s+N) acting on e, realized as a controller state
    Exact,     // e' = -x2 (nonlinear plants only; step reference)
};

struct SimConfig {
    double step = 1e-3;     // h, seconds
    double horizon = 5.0;   // T, seconds
    double divergence_bound = 10.0;
    Eigen::VectorXd initial_state;  // plant states; empty means zero
    DerivativeMode derivative = DerivativeMode::Filtered;

    void validate() const;
    std::size_t steps() const;
};

struct Trajectory {
    std::vector<double> t;
    std::vector<double> y;
    std::vector<double> u;
    /// Per-sample augmented state: plant states followed by the controller
    /// integral of e and the derivative filter state.
    std::vector<Eigen::VectorXd> states;
    std::size_t plant_order = 0;
    double reference = 0.0;
    double step = 0.0;
    bool diverged = false;

    std::size_t size() const { return y.size(); }
    double horizon() const { return t.empty() ? 0.0 : t.back(); }
    double integral_of_error(std::size_t k) const { return states[k][plant_order]; }
};

/// Unit negative feedback step test under the PID law, fixed-step RK4.
/// Integration halts early, with `diverged` set, once |y| leaves
/// divergence_bound * max(|y*|, 1) or any sample becomes non-finite.
Trajectory closed_loop_step(const StateSpace& plant, const ControllerParams& gains, double ystar,
                            const SimConfig& cfg);
Trajectory closed_loop_step(const NonlinearPlant& plant, const ControllerParams& gains,
                            double ystar, const SimConfig& cfg);
Trajectory closed_loop_step(const Plant& plant, const ControllerParams& gains, double ystar,
                            const SimConfig& cfg);

/// closed_loop_step for a nonlinear plant started from x0 = (x1, x2).
Trajectory simulate_nonlinear(const NonlinearPlant& plant, const ControllerParams& gains,
                              double ystar, const Eigen::Vector2d& x0, SimConfig cfg);

/// Open-loop response of a realization to a step of the given amplitude.
Trajectory open_loop_step(const StateSpace& plant, double amplitude, const SimConfig& cfg);

/// Max-abs difference on y between a trajectory and its h/2 re-simulation,
/// compared on the coarse grid.
double half_step_discrepancy(const Trajectory& coarse, const Trajectory& fine);

// Bundled nonlinear families.
NonlinearPlant zero_plant(double L1 = 1.0, double L2 = 1.0, double w = 1.0);
/// f = a1*L1*sin(x1) + a2*L2*tanh(x2), |a1|, |a2| <= 1.
NonlinearPlant sin_tanh_plant(double L1, double L2, double a1 = 1.0, double a2 = 1.0,
                              double w = 1.0);
/// Pendulum with time-varying friction,
/// f = -L1*sin(x1) - L2*(0.75 + 0.25*cos(t))*x2, so f(y, 0, t) = f(y, 0, 0).
NonlinearPlant pendulum_plant(double L1, double L2, double w = 1.0);

/// Largest finite-difference partials of f over a grid of (x1, x2, t).
struct LipschitzProbe {
    double max_dfdx1 = 0.0;
    double max_dfdx2 = 0.0;
    bool within(double L1, double L2, double tol = 1e-6) const {
        return max_dfdx1 <= L1 + tol && max_dfdx2 <= L2 + tol;
    }
};
LipschitzProbe probe_lipschitz(const NonlinearPlant& plant, double x_range = 5.0, int n_x = 50,
                               int n_t = 5, double t_max = 50.0);

}  // namespace selftune::sim
