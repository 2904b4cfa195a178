#include "selftune/presets.hpp"
#include "selftune/io.hpp"
#include "selftune/sim.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace selftune;
using selftune::testing::Gen;

namespace {

sim::SimConfig cfg(double h, double T) {
    sim::SimConfig c;
    c.step = h;
    c.horizon = T;
    return c;
}

sim::StateSpace g1() { return sim::tf_to_state_space({{8.0}, {1.0, 0.878, 21.5}}); }

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace

TEST_CASE("first-order lag realization") {
    const auto ss = sim::tf_to_state_space({{1.0}, {1.0, 1.0}});
    REQUIRE(ss.order() == 1);
    CHECK(ss.A(0, 0) == doctest::Approx(-1.0));
    CHECK(ss.B(0) == doctest::Approx(1.0));
    CHECK(ss.C(0) == doctest::Approx(1.0));
    CHECK(ss.D == 0.0);
}

TEST_CASE("G1 companion form") {
    const auto ss = g1();
    REQUIRE(ss.order() == 2);
    CHECK(ss.A(1, 0) == doctest::Approx(-21.5));
    CHECK(ss.A(1, 1) == doctest::Approx(-0.878));
    CHECK(ss.A(0, 1) == doctest::Approx(1.0));
    CHECK(ss.C(0) == doctest::Approx(8.0));
    CHECK(ss.C(1) == doctest::Approx(0.0));
}

TEST_CASE("biproper cancellation has a constant unit step response") {
    const auto ss = sim::tf_to_state_space({{1.0, 1.0}, {1.0, 1.0}});
    CHECK(ss.D == doctest::Approx(1.0));
    const auto tr = sim::open_loop_step(ss, 1.0, cfg(1e-3, 2.0));
    for (double y : tr.y) CHECK(y == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("malformed transfer functions are rejected") {
    CHECK_THROWS_AS(sim::tf_to_state_space({{1.0, 0.0, 0.0}, {1.0, 1.0}}), sim::InvalidModel);
    CHECK_THROWS_AS(sim::tf_to_state_space({{1.0}, {0.0, 1.0}}), sim::InvalidModel);
    CHECK_THROWS_AS(sim::tf_to_state_space({{1.0}, {}}), sim::InvalidModel);
}

TEST_CASE("controller parameter and config validation") {
    CHECK_THROWS_AS((sim::ControllerParams{1, 1, 1, 0.0}.validate()), sim::InvalidModel);
    CHECK_THROWS_AS((sim::ControllerParams{NAN, 1, 1, 100.0}.validate()), sim::InvalidModel);
    CHECK_THROWS_AS(cfg(1e-3, 5e-3).validate(), sim::InvalidModel);
    auto c = cfg(1e-3, 1.0);
    c.divergence_bound = 1.0;
    CHECK_THROWS_AS(c.validate(), sim::InvalidModel);
}

TEST_CASE("pid: proportional, integral and filtered derivative") {
    const double h = 1e-3;
    {
        auto out = sim::pid_control({1, 0, 0, 100}, 0.5, {}, h);
        CHECK(out.u == doctest::Approx(0.5));
    }
    {
        sim::PidState s;
        double u = 0.0;
        for (int k = 0; k <= 1000; ++k) {
            auto out = sim::pid_control({0, 1, 0, 100}, 1.0, s, h);
            s = out.state;
            u = out.u;
        }
        CHECK(u == doctest::Approx(1.0).epsilon(1e-12));
    }
    {
        // N s / (s + N) acting on a ramp gives 1 - exp(-N t).
        const double N = 100.0;
        sim::PidState s;
        for (int k = 0; k <= 500; ++k) {
            const double t = k * h;
            auto out = sim::pid_control({0, 0, 1, N}, t, s, h);
            s = out.state;
            CHECK(out.u == doctest::Approx(1.0 - std::exp(-N * t)).epsilon(1e-9));
        }
    }
}

TEST_CASE("expert gains on G1 give a converging step response") {
    const auto p = presets::by_name("case-a");
    const auto tr = sim::closed_loop_step(g1(), p.kstar, 1.0, p.learn.sim);
    REQUIRE_FALSE(tr.diverged);
    CHECK(std::abs(tr.y.back() - 1.0) < 1e-3);
}

TEST_CASE("zero gains leave a strictly proper plant at rest") {
    const auto tr = sim::closed_loop_step(g1(), {0, 0, 0, 100}, 1.0, cfg(1e-3, 2.0));
    CHECK(max_abs(tr.y) == 0.0);
    CHECK(max_abs(tr.u) == 0.0);
}

TEST_CASE("Case A initial gains agree with the half-step re-simulation") {
    auto c = presets::by_name("case-a").learn.sim;
    const sim::ControllerParams k{90, 3, 1, 100};
    const auto coarse = sim::closed_loop_step(g1(), k, 1.0, c);
    c.step /= 2.0;
    const auto fine = sim::closed_loop_step(g1(), k, 1.0, c);
    REQUIRE_FALSE(coarse.diverged);
    CHECK(sim::half_step_discrepancy(coarse, fine) < 1e-3);
}

TEST_CASE("nonlinear plant with f = 0 converges to the reference") {
    const auto plant = sim::zero_plant();
    auto c = cfg(1e-3, 60.0);
    c.derivative = sim::DerivativeMode::Exact;
    const auto tr = sim::simulate_nonlinear(plant, {3, 1, 2, 100}, 1.0, {0.0, 0.0}, c);
    REQUIRE_FALSE(tr.diverged);
    CHECK(std::abs(tr.states.back()[0] - 1.0) < 1e-3);
    CHECK(std::abs(tr.states.back()[1]) < 1e-3);
}

TEST_CASE("equilibrium stays at rest") {
    const auto tr = sim::simulate_nonlinear(sim::zero_plant(), {3, 0, 2, 100}, 0.0, {0.0, 0.0}, cfg(1e-3, 5.0));
    CHECK(max_abs(tr.y) == 0.0);
}

TEST_CASE("sin-tanh plant under (5, 1, 5) reaches the reference") {
    auto c = cfg(1e-3, 50.0);
    c.derivative = sim::DerivativeMode::Exact;
    const auto tr = sim::simulate_nonlinear(sim::sin_tanh_plant(1, 1), {5, 1, 5, 100}, 1.0, {0.0, 0.0}, c);
    REQUIRE_FALSE(tr.diverged);
    CHECK(std::abs(tr.states.back()[0] - 1.0) < 1e-2);
}

TEST_CASE("divergent loops are flagged") {
    // Negative proportional gain makes the loop unstable.
    const auto tr = sim::closed_loop_step(g1(), {-50, 0, 0, 100}, 1.0, cfg(1e-3, 20.0));
    CHECK(tr.diverged);
    CHECK(tr.horizon() < 20.0);
}

TEST_CASE("realization fidelity against analytic step responses") {
    const auto lag = sim::open_loop_step(sim::tf_to_state_space({{1.0}, {1.0, 1.0}}), 1.0, cfg(1e-3, 5.0));
    for (std::size_t k = 0; k < lag.size(); ++k) CHECK(std::abs(lag.y[k] - (1.0 - std::exp(-lag.t[k]))) < 1e-4);

    Gen gen(11);
    for (int trial = 0; trial < 10; ++trial) {
        const double zeta = gen.uniform(0.1, 0.9), wn = gen.uniform(0.5, 10.0);
        const auto ss = sim::tf_to_state_space({{wn * wn}, {1.0, 2 * zeta * wn, wn * wn}});
        const auto tr = sim::open_loop_step(ss, 1.0, cfg(1e-3, 5.0));
        double err = 0.0;
        for (std::size_t k = 0; k < tr.size(); ++k)
            err = std::max(err, std::abs(tr.y[k] - selftune::testing::second_order_step(zeta, wn, tr.t[k])));
        CHECK(err < 1e-4);
    }
}

TEST_CASE("property: open-loop linearity in the step amplitude") {
    Gen gen(12);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = gen.integer(1, 4);
        // Stable denominator from real negative poles.
        std::vector<double> den{1.0};
        for (int i = 0; i < n; ++i) {
            const double p = gen.uniform(0.5, 5.0);
            std::vector<double> next(den.size() + 1, 0.0);
            for (std::size_t j = 0; j < den.size(); ++j) {
                next[j] += den[j];
                next[j + 1] += p * den[j];
            }
            den = next;
        }
        std::vector<double> num;
        for (int i = 0; i < gen.integer(1, n); ++i) num.push_back(gen.uniform(-2.0, 2.0));
        const auto ss = sim::tf_to_state_space({num, den});
        const auto a = sim::open_loop_step(ss, 1.0, cfg(1e-3, 3.0));
        const auto b = sim::open_loop_step(ss, 2.0, cfg(1e-3, 3.0));
        REQUIRE(a.size() == b.size());
        for (std::size_t k = 0; k < a.size(); ++k) CHECK(std::abs(b.y[k] - 2.0 * a.y[k]) < 1e-12 * (1 + std::abs(b.y[k])));
    }
}

TEST_CASE("property: half-step agreement, finite samples and uniform grid") {
    Gen gen(13);
    int checked = 0;
    for (int trial = 0; trial < 40; ++trial) {
        const double zeta = gen.uniform(0.1, 1.5), wn = gen.uniform(1.0, 10.0), gain = gen.uniform(0.5, 10.0);
        const sim::StateSpace plant = sim::tf_to_state_space({{gain}, {1.0, 2 * zeta * wn, wn * wn}});
        const sim::ControllerParams k{gen.log_uniform(0.1, 50.0), gen.log_uniform(0.01, 20.0),
                                      gen.log_uniform(0.001, 2.0), gen.log_uniform(10.0, 1000.0)};
        auto c = cfg(1e-3, 4.0);
        const auto coarse = sim::closed_loop_step(plant, k, 1.0, c);
        for (std::size_t i = 1; i < coarse.size(); ++i)
            CHECK(coarse.t[i] - coarse.t[i - 1] == doctest::Approx(c.step).epsilon(1e-9));
        if (coarse.diverged) continue;
        for (std::size_t i = 0; i < coarse.size(); ++i) CHECK(std::isfinite(coarse.y[i]));
        c.step /= 2.0;
        const auto fine = sim::closed_loop_step(plant, k, 1.0, c);
        if (fine.diverged) continue;
        CHECK(sim::half_step_discrepancy(coarse, fine) < 1e-3);
        ++checked;
    }
    CHECK(checked > 20);
}

TEST_CASE("bundled nonlinear families respect their declared bounds") {
    CHECK(sim::probe_lipschitz(sim::zero_plant()).within(1.0, 1.0));
    Gen gen(14);
    for (int trial = 0; trial < 5; ++trial) {
        const double L1 = gen.uniform(0.1, 5.0), L2 = gen.uniform(0.1, 5.0);
        const double a1 = gen.uniform(-1, 1), a2 = gen.uniform(-1, 1);
        CHECK(sim::probe_lipschitz(sim::sin_tanh_plant(L1, L2, a1, a2)).within(L1, L2));
        CHECK(sim::probe_lipschitz(sim::pendulum_plant(L1, L2)).within(L1, L2));
    }
}

TEST_CASE("plant config documents build the bundled plants") {
    const auto plant = io::plant_from_json(presets::g1_config());
    REQUIRE(std::holds_alternative<sim::StateSpace>(plant));
    CHECK(std::get<sim::StateSpace>(plant).A(1, 0) == doctest::Approx(-21.5));
    const auto nl = io::plant_from_json({{"type", "nonlinear"}, {"preset", "pendulum"}, {"L1", 1.0}, {"L2", 0.5}});
    REQUIRE(std::holds_alternative<sim::NonlinearPlant>(nl));
    CHECK(std::get<sim::NonlinearPlant>(nl).L2 == 0.5);
    CHECK_THROWS(io::plant_from_json({{"type", "tf"}, {"num", {1.0, 0.0, 0.0}}, {"den", {1.0, 1.0}}}));
}
