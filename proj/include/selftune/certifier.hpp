#pragma once

#include "selftune/sim.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace selftune::certifier {

struct LipschitzBounds {
    double L1 = 1.0;  // bound on |df/dx1|
    double L2 = 1.0;  // bound on |df/dx2|
    void validate() const;
};

/// Raised when a certificate is requested for gains outside the manifold.
class CertificateRefused : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

struct Membership {
    bool member = false;
    /// theta1 - L1, theta3 - L2, and the third manifold expression minus L2.
    std::array<double, 3> margins{};
    /// Index of the first non-positive margin, -1 for members.
    int failing = -1;
};

/// Manifold test. Throws std::invalid_argument when theta2 <= 0.
Membership manifold_membership(const sim::ControllerParams& theta, const LipschitzBounds& L);

struct SweepOptions {
    int l_points = 101;
    int p_points = 101;
    /// Tighter p range from a concrete nonlinearity, replacing [p0, theta1 + L1].
    std::optional<std::array<double, 2>> p_range;
};

struct ManifoldReport {
    Membership membership;
    double Gamma = 0.0;
    double p0 = 0.0;
    double varpi0 = 0.0;
    double varpi1 = 0.0;
    double varpi = 0.0;

    Eigen::Matrix3d M = Eigen::Matrix3d::Zero();
    std::array<double, 3> M_minors{};
    std::array<double, 3> M_eigenvalues{};
    bool M_pd_minors = false;
    bool M_pd_eigen = false;

    /// varpi0 - Gamma, Gamma p0 - theta2, (Gamma p0 - theta2)(varpi0 - Gamma) - Gamma^2 L2^2 / 4.
    std::array<double, 3> b4{};
    /// The alternative third inequality 4(Gamma varpi0 - theta2)(varpi0 - Gamma) - Gamma^2 L2^2,
    /// reported but not asserted.
    double b4_alt_third = 0.0;
    bool b4_holds = false;

    bool P_pd = false;
    double min_lambda = 0.0;
    double min_lambda_l = 0.0;
    double min_lambda_p = 0.0;
    /// Largest |closed-form lambda_min - eigensolve| over the sweep.
    double lambda_discrepancy = 0.0;
    std::array<double, 2> p_range{};
    int sweep_points = 0;
};

/// P(l, p) of the Lyapunov derivative, with
/// delta = theta3 - Gamma - l and gamma = Gamma (theta3 - varpi - l) / 2.
Eigen::Matrix2d p_matrix(const sim::ControllerParams& theta, double Gamma, double varpi, double l,
                         double p);

/// Closed-form smallest eigenvalue of a symmetric 2x2 matrix [[a, g], [g, d]].
double lambda_min_closed_form(double a, double g, double d);

/// Full certificate. Throws CertificateRefused for non-members.
ManifoldReport build_certificate(const sim::ControllerParams& theta, const LipschitzBounds& L,
                                 const SweepOptions& sweep = {});

struct Decomposition {
    double g = 0.0;
    double h = 0.0;
    double l = 0.0;
    bool h_within = true;  // |h| <= L1 + tol
    bool l_within = true;  // |l| <= L2 + tol
};

/// Shifted nonlinearity g(y, z, t) = -f(y* - y, -z, t) + f(y*, 0, t) and its
/// output- and rate-proportional parts. Zero branches use central differences.
Decomposition decompose_g(const sim::NonlinearPlant& plant, double ystar, double y, double z,
                          double t, double tol = 1e-6);

/// p range [min, max] of theta1 - h(y) over y in [-y_range, y_range].
std::array<double, 2> refined_p_range(const sim::NonlinearPlant& plant, double theta1, double ystar,
                                      double y_range = 5.0, int points = 401);

struct LyapunovVerdict {
    bool pass = false;
    std::vector<double> V;
    double V0 = 0.0;
    double V_final = 0.0;
    /// Largest single-step increase of V, relative to V(0).
    double max_relative_rise = 0.0;
};

struct LyapunovOptions {
    double rise_tolerance = 1e-4;
    double final_ball = 1e-6;
};

/// Evaluates V along a closed-loop trajectory of a nonlinear plant (exact
/// derivative mode, step reference). Throws CertificateRefused for non-members.
LyapunovVerdict lyapunov_decrease_check(const sim::Trajectory& traj, const sim::ControllerParams& theta,
                                        const sim::NonlinearPlant& plant, const LipschitzBounds& L,
                                        double ystar, const LyapunovOptions& opts = {});

enum class PlantFamily {
    SinTanh,  // f = a1 L1 sin x1 + a2 L2 tanh x2, a ~ U[-1, 1]
    Zero,     // f = 0
};

struct TheoremTrialConfig {
    int trials = 50;
    PlantFamily family = PlantFamily::SinTanh;
    double x0_range = 2.0;
    double ystar_range = 1.0;
    double horizon = 50.0;
    double step = 1e-3;
    double tolerance = 1e-2;
    bool check_lyapunov = true;
    /// Report statistics for non-member gains instead of refusing them.
    bool falsification = false;
    std::uint64_t seed = 0;
};

struct TheoremTrial {
    double a1 = 0.0, a2 = 0.0;
    double ystar = 0.0;
    Eigen::Vector2d x0 = Eigen::Vector2d::Zero();
    double x1_residual = 0.0;
    double x2_residual = 0.0;
    bool converged = false;
    bool diverged = false;
    bool lyapunov_checked = false;
    bool lyapunov_pass = false;
    double lyapunov_rise = 0.0;
};

struct TheoremStats {
    bool member = false;
    int trials = 0;
    int converged = 0;
    double pass_fraction = 0.0;
    double worst_x1_residual = 0.0;
    double worst_x2_residual = 0.0;
    int lyapunov_passes = 0;
    double worst_lyapunov_rise = 0.0;
    std::vector<TheoremTrial> details;
};

/// Closed-loop convergence over random plants of the bundled family.
TheoremStats empirical_theorem1(const LipschitzBounds& L, const sim::ControllerParams& theta,
                                const TheoremTrialConfig& cfg);

}  // namespace selftune::certifier
