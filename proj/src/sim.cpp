#include "selftune/sim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace selftune::sim {

namespace {

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

std::string describe(const std::vector<double>& coeffs) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < coeffs.size(); ++i) os << (i ? ", " : "") << coeffs[i];
    os << ']';
    return os.str();
}

// Classical fixed-step RK4 over an augmented state. `derivative` returns z',
// `output` returns (y, u) at a state. Records every sample and stops early
// on divergence.
template <typename Derivative, typename Output>
Trajectory integrate(const Eigen::VectorXd& z0, std::size_t plant_order, double ystar,
                     const SimConfig& cfg, Derivative&& derivative, Output&& output) {
    const double h = cfg.step;
    const std::size_t n = cfg.steps();
    const double limit = cfg.divergence_bound * std::max(std::abs(ystar), 1.0);

    Trajectory traj;
    traj.plant_order = plant_order;
    traj.reference = ystar;
    traj.step = h;
    traj.t.reserve(n + 1);
    traj.y.reserve(n + 1);
    traj.u.reserve(n + 1);
    traj.states.reserve(n + 1);

    Eigen::VectorXd z = z0;
    auto record = [&](std::size_t k) {
        const auto [y, u] = output(static_cast<double>(k) * h, z);
        traj.t.push_back(static_cast<double>(k) * h);
        traj.y.push_back(y);
        traj.u.push_back(u);
        traj.states.push_back(z);
        return std::isfinite(y) && std::isfinite(u) && all_finite(z) && std::abs(y) <= limit;
    };

    if (!record(0)) {
        traj.diverged = true;
        return traj;
    }
    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) * h;
        const Eigen::VectorXd k1 = derivative(t, z);
        const Eigen::VectorXd k2 = derivative(t + 0.5 * h, z + 0.5 * h * k1);
        const Eigen::VectorXd k3 = derivative(t + 0.5 * h, z + 0.5 * h * k2);
        const Eigen::VectorXd k4 = derivative(t + h, z + h * k3);
        z += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!record(k + 1)) {
            traj.diverged = true;
            break;
        }
    }
    return traj;
}

}  // namespace

void TransferFunction::validate() const {
    if (denominator.empty()) throw InvalidModel("transfer function has no denominator coefficients");
    if (denominator.front() == 0.0)
        throw InvalidModel("denominator leading coefficient is zero: " + describe(denominator));
    if (numerator.empty()) throw InvalidModel("transfer function has no numerator coefficients");
    if (numerator.size() > denominator.size())
        throw InvalidModel("non-proper transfer function: numerator " + describe(numerator) +
                           " has higher degree than denominator " + describe(denominator));
    for (double c : numerator)
        if (!std::isfinite(c)) throw InvalidModel("non-finite numerator coefficient");
    for (double c : denominator)
        if (!std::isfinite(c)) throw InvalidModel("non-finite denominator coefficient");
}

void StateSpace::validate() const {
    const auto n = A.rows();
    if (A.cols() != n || B.size() != n || C.size() != n)
        throw InvalidModel("state-space dimensions are inconsistent");
    if (!A.allFinite() || !B.allFinite() || !C.allFinite() || !std::isfinite(D))
        throw InvalidModel("state-space matrices contain non-finite entries");
}

StateSpace tf_to_state_space(const TransferFunction& tf) {
    tf.validate();
    const std::size_t n = tf.order();
    const double lead = tf.denominator.front();

    // Monic denominator s^n + a1 s^(n-1) + ... + an and numerator padded to n+1.
    std::vector<double> a(n + 1), b(n + 1, 0.0);
    for (std::size_t i = 0; i <= n; ++i) a[i] = tf.denominator[i] / lead;
    const std::size_t pad = n + 1 - tf.numerator.size();
    for (std::size_t i = 0; i < tf.numerator.size(); ++i) b[pad + i] = tf.numerator[i] / lead;

    StateSpace ss;
    ss.D = b[0];
    ss.A = Eigen::MatrixXd::Zero(n, n);
    ss.B = Eigen::VectorXd::Zero(n);
    ss.C = Eigen::RowVectorXd::Zero(n);
    if (n == 0) return ss;

    for (std::size_t i = 0; i + 1 < n; ++i) ss.A(i, i + 1) = 1.0;
    // State x1 is the lowest derivative, so the last row holds -an ... -a1.
    for (std::size_t j = 0; j < n; ++j) {
        ss.A(n - 1, j) = -a[n - j];
        ss.C(j) = b[n - j] - a[n - j] * b[0];
    }
    ss.B(n - 1) = 1.0;
    return ss;
}

void ControllerParams::validate() const {
    if (!(filterN > 0.0) || !std::isfinite(filterN))
        throw InvalidModel("derivative filter coefficient N must be positive and finite");
    if (!std::isfinite(theta1) || !std::isfinite(theta2) || !std::isfinite(theta3))
        throw InvalidModel("controller gains must be finite");
}

PidOutput pid_control(const ControllerParams& gains, double e, const PidState& state, double h) {
    if (!(h > 0.0)) throw InvalidModel("controller step must be positive");
    PidState next = state;
    if (!state.primed) {
        next.primed = true;
    } else {
        next.integral += 0.5 * h * (e + state.previous_error);
        const double decay = std::exp(-gains.filterN * h);
        const double slope_gain = 1.0 - (1.0 - decay) / (gains.filterN * h);
        next.filter = decay * state.filter + (1.0 - decay) * state.previous_error +
                      (e - state.previous_error) * slope_gain;
    }
    next.previous_error = e;
    const double derivative = gains.filterN * (e - next.filter);
    const double u = gains.theta1 * e + gains.theta2 * next.integral + gains.theta3 * derivative;
    return {u, next};
}

void NonlinearPlant::validate() const {
    if (!f) throw InvalidModel("nonlinear plant '" + name + "' has no dynamics");
    if (!(w > 0.0)) throw InvalidModel("input gain w must be positive");
    if (!(L1 >= 0.0) || !(L2 >= 0.0)) throw InvalidModel("Lipschitz bounds must be non-negative");
    for (double t : {0.0, 1.0, 10.0})
        if (std::abs(f(0.0, 0.0, t)) > 1e-12)
            throw InvalidModel("nonlinear plant '" + name + "' violates f(0, 0, t) = 0");
}

void SimConfig::validate() const {
    if (!(step > 0.0)) throw InvalidModel("simulation step must be positive");
    if (!(horizon >= 10.0 * step)) throw InvalidModel("horizon must span at least 10 steps");
    if (!(divergence_bound > 1.0)) throw InvalidModel("divergence bound must exceed 1");
}

std::size_t SimConfig::steps() const {
    return static_cast<std::size_t>(std::llround(horizon / step));
}

Trajectory closed_loop_step(const StateSpace& plant, const ControllerParams& gains, double ystar,
                            const SimConfig& cfg) {
    plant.validate();
    gains.validate();
    cfg.validate();
    if (cfg.derivative != DerivativeMode::Filtered)
        throw InvalidModel("exact derivative mode needs a nonlinear plant");
    const auto n = static_cast<Eigen::Index>(plant.order());

    Eigen::VectorXd z = Eigen::VectorXd::Zero(n + 2);
    if (cfg.initial_state.size() != 0) {
        if (cfg.initial_state.size() != n) throw InvalidModel("initial state has wrong dimension");
        z.head(n) = cfg.initial_state;
    }

    const double N = gains.filterN;
    const double kp = gains.theta1 + gains.theta3 * N;  // direct feedthrough of e into u
    const double loop = 1.0 + kp * plant.D;
    if (std::abs(loop) < 1e-12) throw InvalidModel("algebraic loop is singular (1 + K D = 0)");

    auto control = [&](const Eigen::VectorXd& s) {
        const double cx = plant.C.dot(s.head(n));
        const double offset = gains.theta2 * s(n) - gains.theta3 * N * s(n + 1);
        const double u = (kp * (ystar - cx) + offset) / loop;
        const double y = cx + plant.D * u;
        return std::pair{y, u};
    };
    auto derivative = [&](double, const Eigen::VectorXd& s) {
        const auto [y, u] = control(s);
        const double e = ystar - y;
        Eigen::VectorXd ds(n + 2);
        ds.head(n) = plant.A * s.head(n) + plant.B * u;
        ds(n) = e;
        ds(n + 1) = N * (e - s(n + 1));
        return ds;
    };
    auto output = [&](double, const Eigen::VectorXd& s) { return control(s); };
    return integrate(z, static_cast<std::size_t>(n), ystar, cfg, derivative, output);
}

Trajectory closed_loop_step(const NonlinearPlant& plant, const ControllerParams& gains,
                            double ystar, const SimConfig& cfg) {
    plant.validate();
    gains.validate();
    cfg.validate();

    Eigen::VectorXd z = Eigen::VectorXd::Zero(4);
    if (cfg.initial_state.size() != 0) {
        if (cfg.initial_state.size() != 2) throw InvalidModel("initial state must be (x1, x2)");
        z.head(2) = cfg.initial_state;
    }
    const double N = gains.filterN;
    const bool exact = cfg.derivative == DerivativeMode::Exact;

    auto control = [&](const Eigen::VectorXd& s) {
        const double e = ystar - s(0);
        const double de = exact ? -s(1) : N * (e - s(3));
        return gains.theta1 * e + gains.theta2 * s(2) + gains.theta3 * de;
    };
    auto derivative = [&](double t, const Eigen::VectorXd& s) {
        const double e = ystar - s(0);
        Eigen::VectorXd ds(4);
        ds(0) = s(1);
        ds(1) = plant.f(s(0), s(1), t) + plant.w * control(s);
        ds(2) = e;
        ds(3) = N * (e - s(3));
        return ds;
    };
    auto output = [&](double, const Eigen::VectorXd& s) { return std::pair{s(0), control(s)}; };
    return integrate(z, 2, ystar, cfg, derivative, output);
}

Trajectory closed_loop_step(const Plant& plant, const ControllerParams& gains, double ystar,
                            const SimConfig& cfg) {
    return std::visit([&](const auto& p) { return closed_loop_step(p, gains, ystar, cfg); }, plant);
}

Trajectory simulate_nonlinear(const NonlinearPlant& plant, const ControllerParams& gains,
                              double ystar, const Eigen::Vector2d& x0, SimConfig cfg) {
    cfg.initial_state = x0;
    return closed_loop_step(plant, gains, ystar, cfg);
}

Trajectory open_loop_step(const StateSpace& plant, double amplitude, const SimConfig& cfg) {
    plant.validate();
    cfg.validate();
    const auto n = static_cast<Eigen::Index>(plant.order());
    Eigen::VectorXd z = Eigen::VectorXd::Zero(n + 2);
    if (cfg.initial_state.size() == n && n > 0) z.head(n) = cfg.initial_state;

    auto derivative = [&](double, const Eigen::VectorXd& s) {
        Eigen::VectorXd ds = Eigen::VectorXd::Zero(n + 2);
        ds.head(n) = plant.A * s.head(n) + plant.B * amplitude;
        return ds;
    };
    auto output = [&](double, const Eigen::VectorXd& s) {
        return std::pair{plant.C.dot(s.head(n)) + plant.D * amplitude, amplitude};
    };
    // Open-loop runs are judged against the input amplitude for divergence.
    return integrate(z, static_cast<std::size_t>(n), amplitude, cfg, derivative, output);
}

double half_step_discrepancy(const Trajectory& coarse, const Trajectory& fine) {
    double worst = 0.0;
    for (std::size_t k = 0; k < coarse.size() && 2 * k < fine.size(); ++k)
        worst = std::max(worst, std::abs(coarse.y[k] - fine.y[2 * k]));
    return worst;
}

NonlinearPlant zero_plant(double L1, double L2, double w) {
    return {"zero", [](double, double, double) { return 0.0; }, L1, L2, w};
}

NonlinearPlant sin_tanh_plant(double L1, double L2, double a1, double a2, double w) {
    if (std::abs(a1) > 1.0 || std::abs(a2) > 1.0)
        throw InvalidModel("sin-tanh coefficients must lie in [-1, 1]");
    return {"sin-tanh",
            [=](double x1, double x2, double) { return a1 * L1 * std::sin(x1) + a2 * L2 * std::tanh(x2); },
            L1, L2, w};
}

NonlinearPlant pendulum_plant(double L1, double L2, double w) {
    return {"pendulum",
            [=](double x1, double x2, double t) {
                return -L1 * std::sin(x1) - L2 * (0.75 + 0.25 * std::cos(t)) * x2;
            },
            L1, L2, w};
}

LipschitzProbe probe_lipschitz(const NonlinearPlant& plant, double x_range, int n_x, int n_t,
                               double t_max) {
    constexpr double d = 1e-6;
    LipschitzProbe probe;
    for (int i = 0; i < n_x; ++i) {
        const double x1 = -x_range + 2.0 * x_range * i / (n_x - 1);
        for (int j = 0; j < n_x; ++j) {
            const double x2 = -x_range + 2.0 * x_range * j / (n_x - 1);
            for (int k = 0; k < n_t; ++k) {
                const double t = n_t > 1 ? t_max * k / (n_t - 1) : 0.0;
                const double d1 = (plant.f(x1 + d, x2, t) - plant.f(x1 - d, x2, t)) / (2 * d);
                const double d2 = (plant.f(x1, x2 + d, t) - plant.f(x1, x2 - d, t)) / (2 * d);
                probe.max_dfdx1 = std::max(probe.max_dfdx1, std::abs(d1));
                probe.max_dfdx2 = std::max(probe.max_dfdx2, std::abs(d2));
            }
        }
    }
    return probe;
}

}  // namespace selftune::sim
