#include "selftune/certifier.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

namespace selftune::certifier {

void LipschitzBounds::validate() const {
    if (!(L1 > 0.0) || !(L2 > 0.0) || !std::isfinite(L1) || !std::isfinite(L2))
        throw std::invalid_argument("Lipschitz bounds L1 and L2 must be positive");
}

Membership manifold_membership(const sim::ControllerParams& theta, const LipschitzBounds& L) {
    L.validate();
    if (!(theta.theta2 > 0.0)) throw std::invalid_argument("manifold test requires theta2 > 0");
    Membership m;
    m.margins[0] = theta.theta1 - L.L1;
    m.margins[1] = theta.theta3 - L.L2;
    const double denom = std::sqrt(theta.theta2 * (theta.theta3 + L.L2));
    m.margins[2] = ((theta.theta1 - L.L1) * (theta.theta3 - L.L2) - theta.theta2) / denom - L.L2;
    m.member = true;
    for (int i = 0; i < 3; ++i) {
        if (!(m.margins[i] > 0.0)) {
            m.member = false;
            m.failing = i;
            break;
        }
    }
    return m;
}

Eigen::Matrix2d p_matrix(const sim::ControllerParams& theta, double Gamma, double varpi, double l,
                         double p) {
    const double delta = theta.theta3 - Gamma - l;
    const double gamma = Gamma * (theta.theta3 - varpi - l) / 2.0;
    Eigen::Matrix2d P;
    P << Gamma * p - theta.theta2, gamma, gamma, delta;
    return P;
}

double lambda_min_closed_form(double a, double g, double d) {
    const double sigma = std::sqrt((a - d) * (a - d) + 4.0 * g * g);
    return 0.5 * (a + d - sigma);
}

namespace {

std::string refusal_message(const Membership& m) {
    static const char* names[] = {"theta1 > L1", "theta3 > L2", "third manifold inequality"};
    std::ostringstream os;
    os << "gains are outside the stabilizing manifold: " << names[m.failing] << " fails with margin "
       << m.margins[m.failing];
    return os.str();
}

}  // namespace

ManifoldReport build_certificate(const sim::ControllerParams& theta, const LipschitzBounds& L,
                                 const SweepOptions& sweep) {
    ManifoldReport r;
    r.membership = manifold_membership(theta, L);
    if (!r.membership.member) throw CertificateRefused(refusal_message(r.membership));
    if (sweep.l_points < 2 || sweep.p_points < 2) throw std::invalid_argument("sweep needs at least 2 points per axis");

    const double t2 = theta.theta2;
    r.p0 = theta.theta1 - L.L1;
    r.varpi0 = theta.theta3 - L.L2;
    r.varpi1 = theta.theta3 + L.L2;
    r.varpi = 0.5 * (r.varpi0 + r.varpi1);
    r.Gamma = (r.varpi0 * r.p0 + t2) / (2.0 * r.p0 + L.L2 * L.L2 / 2.0);
    const double G = r.Gamma;

    r.b4[0] = r.varpi0 - G;
    r.b4[1] = G * r.p0 - t2;
    r.b4[2] = r.b4[1] * r.b4[0] - G * G * L.L2 * L.L2 / 4.0;
    r.b4_alt_third = 4.0 * (G * r.varpi0 - t2) * (r.varpi0 - G) - G * G * L.L2 * L.L2;
    r.b4_holds = r.b4[0] > 0.0 && r.b4[1] > 0.0 && r.b4[2] > 0.0;

    r.M << G * t2, t2, 0.0,
           t2, r.p0 + G * r.varpi, G,
           0.0, G, 1.0;
    r.M *= 0.5;
    r.M_minors[0] = r.M(0, 0);
    r.M_minors[1] = r.M.topLeftCorner<2, 2>().determinant();
    r.M_minors[2] = r.M.determinant();
    r.M_pd_minors = std::all_of(r.M_minors.begin(), r.M_minors.end(), [](double v) { return v > 0.0; });
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(r.M, Eigen::EigenvaluesOnly);
    for (int i = 0; i < 3; ++i) r.M_eigenvalues[i] = eig.eigenvalues()(i);
    r.M_pd_eigen = r.M_eigenvalues[0] > 0.0;

    r.p_range = sweep.p_range.value_or(std::array<double, 2>{r.p0, theta.theta1 + L.L1});
    r.min_lambda = std::numeric_limits<double>::infinity();
    for (int i = 0; i < sweep.l_points; ++i) {
        const double l = -L.L2 + 2.0 * L.L2 * i / (sweep.l_points - 1);
        for (int j = 0; j < sweep.p_points; ++j) {
            const double p = r.p_range[0] + (r.p_range[1] - r.p_range[0]) * j / (sweep.p_points - 1);
            const auto P = p_matrix(theta, G, r.varpi, l, p);
            const double closed = lambda_min_closed_form(P(0, 0), P(0, 1), P(1, 1));
            Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> pe(P, Eigen::EigenvaluesOnly);
            r.lambda_discrepancy = std::max(r.lambda_discrepancy, std::abs(closed - pe.eigenvalues()(0)));
            if (closed < r.min_lambda) {
                r.min_lambda = closed;
                r.min_lambda_l = l;
                r.min_lambda_p = p;
            }
            ++r.sweep_points;
        }
    }
    r.P_pd = r.min_lambda > 0.0;
    return r;
}

namespace {

double shifted_g(const sim::NonlinearPlant& plant, double ystar, double y, double z, double t) {
    return -plant(ystar - y, -z, t) + plant(ystar, 0.0, t);
}

constexpr double kFdStep = 1e-6;

}  // namespace

Decomposition decompose_g(const sim::NonlinearPlant& plant, double ystar, double y, double z, double t,
                          double tol) {
    Decomposition d;
    d.g = shifted_g(plant, ystar, y, z, t);
    if (y != 0.0) {
        d.h = shifted_g(plant, ystar, y, 0.0, t) / y;
    } else {
        d.h = (shifted_g(plant, ystar, kFdStep, 0.0, t) - shifted_g(plant, ystar, -kFdStep, 0.0, t)) / (2.0 * kFdStep);
    }
    if (z != 0.0) {
        d.l = (d.g - shifted_g(plant, ystar, y, 0.0, t)) / z;
    } else {
        d.l = (shifted_g(plant, ystar, y, kFdStep, t) - shifted_g(plant, ystar, y, -kFdStep, t)) / (2.0 * kFdStep);
    }
    d.h_within = std::abs(d.h) <= plant.L1 + tol;
    d.l_within = std::abs(d.l) <= plant.L2 + tol;
    return d;
}

std::array<double, 2> refined_p_range(const sim::NonlinearPlant& plant, double theta1, double ystar,
                                      double y_range, int points) {
    if (points < 2) throw std::invalid_argument("p refinement needs at least 2 points");
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (int i = 0; i < points; ++i) {
        const double y = -y_range + 2.0 * y_range * i / (points - 1);
        const double p = theta1 - decompose_g(plant, ystar, y, 0.0, 0.0).h;
        lo = std::min(lo, p);
        hi = std::max(hi, p);
    }
    return {lo, hi};
}

LyapunovVerdict lyapunov_decrease_check(const sim::Trajectory& traj, const sim::ControllerParams& theta,
                                        const sim::NonlinearPlant& plant, const LipschitzBounds& L,
                                        double ystar, const LyapunovOptions& opts) {
    const auto cert = build_certificate(theta, L, {2, 2, std::nullopt});
    if (traj.plant_order != 2 || traj.size() == 0)
        throw std::invalid_argument("Lyapunov check needs a second-order nonlinear trajectory");

    // (p(tau) - p0) tau = L1 tau - g(tau, 0, 0)
    auto integrand = [&](double tau) { return L.L1 * tau - shifted_g(plant, ystar, tau, 0.0, 0.0); };

    LyapunovVerdict v;
    v.V.reserve(traj.size());
    const double offset = plant(ystar, 0.0, 0.0) / theta.theta2;
    double F = 0.0;
    double y_prev = 0.0;
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const auto& s = traj.states[k];
        const double y = ystar - s(0);
        const double z = -s(1);
        const double x = s(2) + offset;
        if (k == 0) {
            constexpr int kSegments = 2000;
            const double hq = y / kSegments;
            for (int i = 0; i < kSegments; ++i) F += 0.5 * hq * (integrand(i * hq) + integrand((i + 1) * hq));
        } else {
            F += 0.5 * (integrand(y_prev) + integrand(y)) * (y - y_prev);
        }
        y_prev = y;
        const Eigen::Vector3d X(x, y, z);
        v.V.push_back(X.dot(cert.M * X) + F);
    }

    v.V0 = v.V.front();
    v.V_final = v.V.back();
    const double scale = v.V0 > 0.0 ? v.V0 : 1.0;
    for (std::size_t k = 1; k < v.V.size(); ++k)
        v.max_relative_rise = std::max(v.max_relative_rise, (v.V[k] - v.V[k - 1]) / scale);
    v.pass = v.max_relative_rise <= opts.rise_tolerance && v.V_final <= opts.final_ball;
    return v;
}

TheoremStats empirical_theorem1(const LipschitzBounds& L, const sim::ControllerParams& theta,
                                const TheoremTrialConfig& cfg) {
    if (cfg.trials < 1) throw std::invalid_argument("trial count must be at least 1");
    TheoremStats stats;
    stats.member = manifold_membership(theta, L).member;
    if (!stats.member && !cfg.falsification)
        throw CertificateRefused(refusal_message(manifold_membership(theta, L)));

    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    stats.details.resize(static_cast<std::size_t>(cfg.trials));
    for (auto& trial : stats.details) {
        if (cfg.family == PlantFamily::SinTanh) {
            trial.a1 = unit(rng);
            trial.a2 = unit(rng);
        }
        trial.x0 = {cfg.x0_range * unit(rng), cfg.x0_range * unit(rng)};
        trial.ystar = cfg.ystar_range * unit(rng);
    }

    sim::SimConfig sc;
    sc.step = cfg.step;
    sc.horizon = cfg.horizon;
    sc.divergence_bound = 1e6;
    sc.derivative = sim::DerivativeMode::Exact;
    const bool lyapunov = cfg.check_lyapunov && stats.member;

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < stats.details.size(); i = next++) {
            auto& trial = stats.details[i];
            const auto plant = cfg.family == PlantFamily::SinTanh ? sim::sin_tanh_plant(L.L1, L.L2, trial.a1, trial.a2)
                                                                  : sim::zero_plant(L.L1, L.L2);
            const auto traj = sim::simulate_nonlinear(plant, theta, trial.ystar, trial.x0, sc);
            trial.diverged = traj.diverged;
            const auto& last = traj.states.back();
            trial.x1_residual = trial.diverged ? std::numeric_limits<double>::infinity() : std::abs(last(0) - trial.ystar);
            trial.x2_residual = trial.diverged ? std::numeric_limits<double>::infinity() : std::abs(last(1));
            trial.converged = !trial.diverged && trial.x1_residual < cfg.tolerance && trial.x2_residual < cfg.tolerance;
            if (lyapunov && !trial.diverged) {
                const auto v = lyapunov_decrease_check(traj, theta, plant, L, trial.ystar);
                trial.lyapunov_checked = true;
                trial.lyapunov_pass = v.pass;
                trial.lyapunov_rise = v.max_relative_rise;
            }
        }
    };
    const unsigned n_threads = std::max(1u, std::min(std::thread::hardware_concurrency(), 8u));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    stats.trials = cfg.trials;
    for (const auto& trial : stats.details) {
        if (trial.converged) ++stats.converged;
        stats.worst_x1_residual = std::max(stats.worst_x1_residual, trial.x1_residual);
        stats.worst_x2_residual = std::max(stats.worst_x2_residual, trial.x2_residual);
        if (trial.lyapunov_pass) ++stats.lyapunov_passes;
        stats.worst_lyapunov_rise = std::max(stats.worst_lyapunov_rise, trial.lyapunov_rise);
    }
    stats.pass_fraction = static_cast<double>(stats.converged) / cfg.trials;
    return stats;
}

}  // namespace selftune::certifier
