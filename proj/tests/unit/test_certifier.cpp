#include "selftune/certifier.hpp"
#include "selftune/sim.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace selftune;
using certifier::LipschitzBounds;
using selftune::testing::Gen;

namespace {

/// Uniform gains filtered by membership.
struct MemberDraw {
    LipschitzBounds L;
    sim::ControllerParams theta;
};

MemberDraw draw_member(Gen& gen) {
    for (;;) {
        const LipschitzBounds L{gen.uniform(0.1, 5.0), gen.uniform(0.1, 5.0)};
        const sim::ControllerParams theta{gen.uniform(0.0, 30.0), gen.uniform(0.01, 30.0), gen.uniform(0.0, 30.0), 100};
        if (certifier::manifold_membership(theta, L).member) return {L, theta};
    }
}

double det3(const Eigen::Matrix3d& m) {
    return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
           m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
}

sim::NonlinearPlant custom(const std::string& name, std::function<double(double, double, double)> f, double L1,
                           double L2) {
    sim::NonlinearPlant p;
    p.name = name;
    p.f = std::move(f);
    p.L1 = L1;
    p.L2 = L2;
    return p;
}

sim::Trajectory exact_run(const sim::NonlinearPlant& plant, const sim::ControllerParams& theta, double ystar,
                          Eigen::Vector2d x0, double T) {
    sim::SimConfig c;
    c.step = 1e-3;
    c.horizon = T;
    c.divergence_bound = 1e6;
    c.derivative = sim::DerivativeMode::Exact;
    return sim::simulate_nonlinear(plant, theta, ystar, x0, c);
}

}  // namespace

TEST_CASE("membership examples") {
    const LipschitzBounds L{1, 1};
    const auto a = certifier::manifold_membership({5, 1, 5, 100}, L);
    CHECK(a.member);
    CHECK(a.failing == -1);
    CHECK(a.margins[2] == doctest::Approx(15 / std::sqrt(6.0) - 1).epsilon(1e-12));
    CHECK(a.margins[2] == doctest::Approx(5.124).epsilon(1e-4));

    const auto b = certifier::manifold_membership({1, 1, 5, 100}, L);
    CHECK_FALSE(b.member);
    CHECK(b.failing == 0);

    const auto c = certifier::manifold_membership({2, 10, 2, 100}, L);
    CHECK_FALSE(c.member);
    CHECK(c.margins[2] + L.L2 == doctest::Approx(-9 / std::sqrt(30.0)).epsilon(1e-12));

    CHECK_THROWS_AS(certifier::manifold_membership({5, 0, 5, 100}, L), std::invalid_argument);
    CHECK_THROWS_AS(certifier::manifold_membership({5, 1, 5, 100}, {0, 1}), std::invalid_argument);
}

TEST_CASE("certificate for (5, 1, 5) with unit bounds") {
    const auto r = certifier::build_certificate({5, 1, 5, 100}, {1, 1});
    CHECK(r.Gamma == doctest::Approx(2.0));
    CHECK(r.p0 == doctest::Approx(4.0));
    CHECK(r.varpi0 == doctest::Approx(4.0));
    CHECK(r.varpi == doctest::Approx(5.0));
    // Leading minors of 1/2 [[2, 1, 0], [1, 14, 2], [0, 2, 1]] by hand.
    CHECK(r.M_minors[0] == doctest::Approx(1.0));
    CHECK(r.M_minors[1] == doctest::Approx(6.75));
    CHECK(r.M_minors[2] == doctest::Approx(2.375));
    CHECK(r.M_pd_minors);
    CHECK(r.M_pd_eigen);
    CHECK(r.b4_holds);
    CHECK(r.P_pd);

    const auto P = certifier::p_matrix({5, 1, 5, 100}, r.Gamma, r.varpi, 0.0, r.p0);
    CHECK(P(0, 0) == doctest::Approx(7.0));
    CHECK(P(1, 1) == doctest::Approx(3.0));
    CHECK(P(0, 1) == doctest::Approx(0.0));
    CHECK(certifier::lambda_min_closed_form(P(0, 0), P(0, 1), P(1, 1)) == doctest::Approx(3.0));
}

TEST_CASE("non-members are refused a certificate") {
    CHECK_THROWS_AS(certifier::build_certificate({1, 1, 5, 100}, {1, 1}), certifier::CertificateRefused);
    try {
        certifier::build_certificate({2, 10, 2, 100}, {1, 1});
    } catch (const certifier::CertificateRefused& e) {
        CHECK(std::string(e.what()).find("third") != std::string::npos);
    }
}

TEST_CASE("property: closed-form smallest eigenvalue") {
    Gen gen(61);
    for (int i = 0; i < 10000; ++i) {
        const double a = gen.uniform(-50, 50), g = gen.uniform(-50, 50), d = gen.uniform(-50, 50);
        Eigen::Matrix2d m;
        m << a, g, g, d;
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(m, Eigen::EigenvaluesOnly);
        CHECK(std::abs(certifier::lambda_min_closed_form(a, g, d) - es.eigenvalues()(0)) < 1e-10);
    }
}

TEST_CASE("property: members satisfy every certificate condition") {
    Gen gen(62);
    for (int i = 0; i < 300; ++i) {
        const auto m = draw_member(gen);
        const auto r = certifier::build_certificate(m.theta, m.L, {41, 41, std::nullopt});
        CHECK(r.b4_holds);
        CHECK(r.M_pd_minors);
        CHECK(r.M_pd_eigen);
        CHECK(r.M_pd_minors == r.M_pd_eigen);
        CHECK(r.P_pd);
        CHECK(r.lambda_discrepancy < 1e-10);
        CHECK(r.M_minors[2] == doctest::Approx(det3(r.M)).epsilon(1e-9));
    }
}

TEST_CASE("property: membership is stable under tiny perturbations") {
    Gen gen(63);
    for (int i = 0; i < 2000; ++i) {
        const auto m = draw_member(gen);
        const auto base = certifier::manifold_membership(m.theta, m.L);
        if (*std::min_element(base.margins.begin(), base.margins.end()) <= 1e-6) continue;
        auto k = m.theta;
        k.theta1 += gen.uniform(-1e-9, 1e-9);
        k.theta2 += gen.uniform(-1e-9, 1e-9);
        k.theta3 += gen.uniform(-1e-9, 1e-9);
        CHECK(certifier::manifold_membership(k, m.L).member);
    }
}

TEST_CASE("decomposition examples") {
    const auto zero = sim::zero_plant();
    for (double y : {-2.0, 0.0, 1.5}) {
        const auto d = certifier::decompose_g(zero, 0.7, y, 0.3, 1.0);
        CHECK(d.g == 0.0);
        CHECK(d.h == 0.0);
        CHECK(d.l == 0.0);
    }
    const auto sine = custom("sin", [](double x1, double, double) { return std::sin(x1); }, 1, 0);
    for (double y : {-2.0, -0.3, 0.5, 3.0}) {
        const auto d = certifier::decompose_g(sine, 0.0, y, 0.0, 0.0);
        CHECK(d.g == doctest::Approx(std::sin(y)));
        CHECK(d.h == doctest::Approx(std::sin(y) / y));
        CHECK(d.l == doctest::Approx(0.0));
    }
    CHECK(certifier::decompose_g(sine, 0.0, 0.0, 0.0, 0.0).h == doctest::Approx(1.0).epsilon(1e-8));
    const auto th = custom("tanh", [](double, double x2, double) { return std::tanh(x2); }, 0, 1);
    for (double y : {-1.0, 0.0, 2.0}) CHECK(certifier::decompose_g(th, 0.0, y, 1.0, 0.0).l == doctest::Approx(std::tanh(1.0)));
    CHECK(certifier::decompose_g(th, 0.0, 0.4, 1.0, 0.0).l == doctest::Approx(0.7616).epsilon(1e-4));
}

TEST_CASE("property: decomposition respects the bounds for bundled families") {
    Gen gen(64);
    for (int i = 0; i < 40; ++i) {
        const double L1 = gen.uniform(0.1, 5), L2 = gen.uniform(0.1, 5);
        const sim::NonlinearPlant plants[] = {sim::sin_tanh_plant(L1, L2, gen.uniform(-1, 1), gen.uniform(-1, 1)),
                                              sim::pendulum_plant(L1, L2), sim::zero_plant(L1, L2)};
        for (const auto& plant : plants) {
            const double ystar = gen.uniform(-2, 2), t = gen.uniform(0, 50);
            CHECK(std::abs(certifier::decompose_g(plant, ystar, 0.0, 0.0, t).g) < 1e-12);
            for (int k = 0; k < 20; ++k) {
                const auto d = certifier::decompose_g(plant, ystar, gen.uniform(-5, 5), gen.uniform(-5, 5), t);
                CHECK(d.h_within);
                CHECK(d.l_within);
                CHECK(std::abs(d.h) <= L1 + 1e-6);
                CHECK(std::abs(d.l) <= L2 + 1e-6);
            }
        }
    }
}

TEST_CASE("refined p range sits inside the worst-case range") {
    const auto plant = sim::sin_tanh_plant(1, 1);
    const auto r = certifier::refined_p_range(plant, 5.0, 1.0);
    CHECK(r[0] >= 5.0 - 1.0 - 1e-9);
    CHECK(r[1] <= 5.0 + 1.0 + 1e-9);
    CHECK(r[0] <= r[1]);
    const auto cert = certifier::build_certificate({5, 1, 5, 100}, {1, 1}, {51, 51, r});
    CHECK(cert.P_pd);
}

TEST_CASE("Lyapunov function decreases along certified trajectories") {
    const sim::ControllerParams theta{5, 1, 5, 100};
    {
        const auto plant = sim::zero_plant(1e-3, 1e-3);
        const auto v = certifier::lyapunov_decrease_check(exact_run(plant, theta, 1.0, {0, 0}, 50.0), theta, plant,
                                                          {1e-3, 1e-3}, 1.0);
        CHECK(v.pass);
        CHECK(v.V_final < 1e-6);
        for (std::size_t k = 1; k < v.V.size(); ++k) CHECK(v.V[k] <= v.V[k - 1] * (1 + 1e-12) + 1e-15);
    }
    {
        const auto plant = sim::zero_plant();
        const auto v = certifier::lyapunov_decrease_check(exact_run(plant, theta, 0.0, {0, 0}, 5.0), theta, plant,
                                                          {1, 1}, 0.0);
        CHECK(v.pass);
        for (double x : v.V) CHECK(x == 0.0);
    }
    {
        const auto plant = sim::sin_tanh_plant(1, 1);
        const auto v = certifier::lyapunov_decrease_check(exact_run(plant, theta, 1.0, {0, 0}, 50.0), theta, plant,
                                                          {1, 1}, 1.0);
        CHECK(v.pass);
        CHECK(v.max_relative_rise <= 1e-4);
    }
    CHECK_THROWS_AS(certifier::lyapunov_decrease_check(exact_run(sim::zero_plant(), {1, 1, 5, 100}, 1.0, {0, 0}, 1.0),
                                                       {1, 1, 5, 100}, sim::zero_plant(), {1, 1}, 1.0),
                    certifier::CertificateRefused);
}

TEST_CASE("empirical convergence trials") {
    certifier::TheoremTrialConfig cfg;
    cfg.trials = 10;
    cfg.seed = 5;
    const auto s = certifier::empirical_theorem1({1, 1}, {5, 1, 5, 100}, cfg);
    CHECK(s.member);
    CHECK(s.trials == 10);
    CHECK(s.pass_fraction == 1.0);
    CHECK(s.lyapunov_passes == 10);
    CHECK(s.worst_x1_residual < 1e-2);

    cfg.family = certifier::PlantFamily::Zero;
    CHECK(certifier::empirical_theorem1({1, 1}, {5, 1, 5, 100}, cfg).pass_fraction == 1.0);

    cfg.family = certifier::PlantFamily::SinTanh;
    CHECK_THROWS_AS(certifier::empirical_theorem1({1, 1}, {0.1, 1, 0.1, 100}, cfg), certifier::CertificateRefused);
    cfg.falsification = true;
    const auto f = certifier::empirical_theorem1({1, 1}, {0.1, 1, 0.1, 100}, cfg);
    CHECK_FALSE(f.member);
    CHECK(f.trials == 10);
    CHECK(f.pass_fraction >= 0.0);
    CHECK(f.pass_fraction <= 1.0);

    // Same seed, same draws.
    cfg.falsification = false;
    const auto a = certifier::empirical_theorem1({1, 1}, {5, 1, 5, 100}, cfg);
    const auto b = certifier::empirical_theorem1({1, 1}, {5, 1, 5, 100}, cfg);
    for (int i = 0; i < cfg.trials; ++i) {
        CHECK(a.details[i].a1 == b.details[i].a1);
        CHECK(a.details[i].x1_residual == b.details[i].x1_residual);
    }
}
