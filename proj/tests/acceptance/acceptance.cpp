// Acceptance gate: one PASS/FAIL line per criterion, tolerances pinned below.

#include "selftune/certifier.hpp"
#include "selftune/io.hpp"
#include "selftune/learner.hpp"
#include "selftune/metrics.hpp"
#include "selftune/network.hpp"
#include "selftune/pipeline.hpp"
#include "selftune/policy.hpp"
#include "selftune/presets.hpp"
#include "selftune/sim.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace selftune;

namespace {

constexpr std::uint64_t kSeed = 1;

// Criterion 1
constexpr double kOvershootFormulaTol = 0.01;
// Criterion 2
constexpr double kExpertOvershootTol = 0.005;
constexpr double kExpertSseTol = 0.01;
constexpr double kExpertTimeRelTol = 0.5;
// Criterion 3
constexpr double kCaseAOvershoot = 0.01;
constexpr double kCaseARise = 0.05;
constexpr double kCaseASettle = 0.2;
constexpr double kCaseAMaxLearningOvershoot = 0.15;
// Criterion 4
constexpr double kRandomInitOvershoot = 0.02;
// Criterion 5
constexpr double kG2BOvershoot = 0.05;
// Criterion 6
constexpr int kLemmaTuples = 1000;
constexpr double kLambdaTol = 1e-10;
// Criterion 7
constexpr int kTheoremTrials = 50;
constexpr double kTheoremResidual = 1e-2;
constexpr double kLyapunovRise = 1e-4;
// Criterion 8
constexpr double kHalfStepTol = 1e-3;
constexpr double kGradientRelTol = 1e-5;
constexpr double kRoundTripTol = 1e-12;

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void run(int id, const char* name, double limit_s, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < limit_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failures;
    std::printf("criterion %d: %s  %s | %s | %.2f s (limit %.0f s)%s\n", id, pass ? "PASS" : "FAIL", name,
                o.detail.c_str(), secs, limit_s, in_time ? "" : " over time limit");
    std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::string describe(const learner::LearningReport& r) {
    std::ostringstream os;
    os << learner::to_string(r.status) << " after " << r.rows.size() << " iterations";
    if (r.terminal_row >= 0 && r.terminal().has_indicators()) {
        const auto& i = r.terminal().indicators;
        os << ", overshoot " << fmt("%.3f%%", 100 * i.overshoot) << ", rise " << fmt("%.4f s", i.rise) << ", settle "
           << fmt("%.4f s", i.settle);
    }
    os << ", max learning overshoot " << fmt("%.2f%%", 100 * r.max_overshoot()) << ", penalties " << r.penalties
       << ", rollbacks " << r.rollbacks;
    return os.str();
}

bool best_cost_monotone(const learner::LearningReport& r) {
    const auto b = r.best_so_far();
    for (std::size_t i = 1; i < b.size(); ++i)
        if (b[i] > b[i - 1]) return false;
    return true;
}

// Shared between criteria 3, 4 and 8.
policy::PolicyModel case_a_model;
learner::LearningReport case_a_report, case_a_random_report, g2a_report, g2b_report;

}  // namespace

int main() {
    std::printf("acceptance run, seed %llu\n", static_cast<unsigned long long>(kSeed));

    run(1, "second-order overshoot matches exp(-pi zeta / sqrt(1 - zeta^2))", 1.0, [] {
        Outcome o{true, ""};
        for (double zeta : {0.2, 0.5, 0.7}) {
            const double wn = 2.0;
            sim::SimConfig c;
            c.step = 1e-3;
            c.horizon = 40.0;
            const auto tr = sim::open_loop_step(sim::tf_to_state_space({{wn * wn}, {1.0, 2 * zeta * wn, wn * wn}}), 1.0, c);
            const double got = metrics::compute_indicators(tr, 1.0).indicators.overshoot;
            const double want = std::exp(-M_PI * zeta / std::sqrt(1 - zeta * zeta));
            o.pass = o.pass && std::abs(got - want) <= kOvershootFormulaTol;
            o.detail += "zeta " + fmt("%.1f", zeta) + ": " + fmt("%.5f", got) + " vs " + fmt("%.5f", want) + "; ";
        }
        return o;
    });

    run(2, "expert gains on G1 reproduce (0.55%, 0.01, 0.034 s, 0.021 s)", 10.0, [] {
        const auto p = presets::by_name("case-a");
        const auto tr = sim::closed_loop_step(io::plant_from_json(p.plant_config), p.kstar, 1.0, p.learn.sim);
        const auto i = metrics::compute_indicators(tr, 1.0).indicators;
        const bool pass = !tr.diverged && std::abs(i.overshoot - 0.0055) <= kExpertOvershootTol &&
                          std::abs(i.sse - 0.01) <= kExpertSseTol &&
                          std::abs(i.rise - 0.034) <= kExpertTimeRelTol * 0.034 &&
                          std::abs(i.settle - 0.021) <= kExpertTimeRelTol * 0.021;
        return Outcome{pass, "overshoot " + fmt("%.4f%%", 100 * i.overshoot) + ", sse " + fmt("%.2e", i.sse) +
                                 ", rise " + fmt("%.4f s", i.rise) + ", settle " + fmt("%.4f s", i.settle)};
    });

    run(3, "Case A learning from (90, 3, 1)", 120.0, [] {
        const auto p = presets::by_name("case-a");
        const auto ds = pipeline::build_dataset(p, kSeed);
        case_a_model = pipeline::train_model(ds.records, p, kSeed);
        case_a_report = pipeline::learn(p, case_a_model);
        const auto& r = case_a_report;
        const auto& i = r.terminal().indicators;
        const bool pass = r.status == learner::Terminal::Converged && r.rows.size() <= 100 &&
                          i.overshoot <= kCaseAOvershoot && i.rise <= kCaseARise && i.settle <= kCaseASettle &&
                          r.max_overshoot() <= kCaseAMaxLearningOvershoot;
        return Outcome{pass, describe(r)};
    });

    run(4, "Case A learning from random init (10, 1, 1)", 120.0, [] {
        const auto p = presets::by_name("case-a-random");
        case_a_random_report = pipeline::learn(p, case_a_model);
        const auto& r = case_a_random_report;
        const bool monotone = best_cost_monotone(r);
        const bool pass = r.status == learner::Terminal::Converged && r.terminal().indicators.overshoot <= kRandomInitOvershoot &&
                          monotone;
        return Outcome{pass, describe(r) + (monotone ? ", best cost non-increasing" : ", best cost ROSE")};
    });

    run(5, "Case B: one policy, wingspans A and B", 300.0, [] {
        const auto pa = presets::by_name("case-b-g2a");
        const auto pb = presets::by_name("case-b-g2b");
        const auto ds = pipeline::build_dataset(pa, kSeed);
        const auto model = pipeline::train_model(ds.records, pa, kSeed);
        g2a_report = pipeline::learn(pa, model);
        g2b_report = pipeline::learn(pb, model);
        const bool a_ok = g2a_report.status == learner::Terminal::Converged && g2a_report.rows.size() <= 100;
        const bool b_ok = g2b_report.status == learner::Terminal::Converged && g2b_report.rows.size() <= 100 &&
                          g2b_report.terminal().indicators.overshoot <= kG2BOvershoot;
        const bool events = g2b_report.penalties + g2b_report.rollbacks >= 1;
        std::string detail = "G2A " + describe(g2a_report) + "; G2B " + describe(g2b_report);
        if (!events) detail += "; G2B run had no penalty/rollback event";
        return Outcome{a_ok && b_ok && events, detail};
    });

    run(6, "lemma suite over membership-filtered tuples", 30.0, [] {
        std::mt19937_64 rng(kSeed);
        std::uniform_real_distribution<double> Ld(0.1, 5.0), th(0.0, 30.0), th2(1e-3, 30.0), wide(-50, 50);
        int members = 0, b4 = 0, m_pd = 0, p_pd = 0, draws = 0;
        double worst_lambda = 0.0;
        while (members < kLemmaTuples) {
            ++draws;
            const certifier::LipschitzBounds L{Ld(rng), Ld(rng)};
            const sim::ControllerParams theta{th(rng), th2(rng), th(rng), 100};
            if (!certifier::manifold_membership(theta, L).member) continue;
            ++members;
            const auto r = certifier::build_certificate(theta, L);
            b4 += r.b4_holds;
            m_pd += r.M_pd_minors && r.M_pd_eigen;
            p_pd += r.P_pd;
            worst_lambda = std::max(worst_lambda, r.lambda_discrepancy);
        }
        // Closed form against the eigensolver on unstructured symmetric inputs as well.
        for (int i = 0; i < 100000; ++i) {
            const double a = wide(rng), g = wide(rng), d = wide(rng);
            Eigen::Matrix2d m;
            m << a, g, g, d;
            Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(m, Eigen::EigenvaluesOnly);
            worst_lambda = std::max(worst_lambda, std::abs(certifier::lambda_min_closed_form(a, g, d) - es.eigenvalues()(0)));
        }
        const bool pass = b4 == members && m_pd == members && p_pd == members && worst_lambda <= kLambdaTol;
        std::ostringstream os;
        os << members << " members of " << draws << " draws: B4 " << b4 << ", M pd " << m_pd << ", P pd " << p_pd
           << " (101x101 sweep), worst lambda discrepancy " << fmt("%.2e", worst_lambda);
        return Outcome{pass, os.str()};
    });

    run(7, "closed-loop convergence for (5, 1, 5), L = (1, 1)", 60.0, [] {
        certifier::TheoremTrialConfig cfg;
        cfg.trials = kTheoremTrials;
        cfg.seed = kSeed;
        cfg.tolerance = kTheoremResidual;
        const auto s = certifier::empirical_theorem1({1, 1}, {5, 1, 5, 100}, cfg);
        const bool pass = s.converged == kTheoremTrials && s.lyapunov_passes == kTheoremTrials &&
                          s.worst_lyapunov_rise <= kLyapunovRise;
        std::ostringstream os;
        os << s.converged << "/" << s.trials << " converged (worst |x1-y*| " << fmt("%.2e", s.worst_x1_residual)
           << ", |x2| " << fmt("%.2e", s.worst_x2_residual) << "), Lyapunov non-increasing on " << s.lyapunov_passes
           << ", worst relative rise " << fmt("%.2e", s.worst_lyapunov_rise);
        return Outcome{pass, os.str()};
    });

    run(8, "numerics: half-step agreement, gradients, normalization", 120.0, [] {
        // Every trial of the learning runs above against its h/2 re-simulation.
        struct Run {
            const char* preset;
            const learner::LearningReport* report;
        };
        const Run runs[] = {{"case-a", &case_a_report},
                            {"case-a-random", &case_a_random_report},
                            {"case-b-g2a", &g2a_report},
                            {"case-b-g2b", &g2b_report}};
        int checked = 0;
        double worst_half = 0.0;
        for (const auto& run : runs) {
            const auto p = presets::by_name(run.preset);
            const auto plant = io::plant_from_json(p.plant_config);
            auto fine_cfg = p.learn.sim;
            fine_cfg.step /= 2;
            for (const auto& row : run.report->rows) {
                const auto coarse = sim::closed_loop_step(plant, row.gains, p.learn.ystar, p.learn.sim);
                if (coarse.diverged) continue;
                const auto fine = sim::closed_loop_step(plant, row.gains, p.learn.ystar, fine_cfg);
                worst_half = std::max(worst_half, sim::half_step_discrepancy(coarse, fine));
                ++checked;
            }
        }

        std::mt19937_64 rng(kSeed);
        std::uniform_real_distribution<double> u(-2, 2);
        double worst_grad = 0.0;
        for (int trial = 0; trial < 20; ++trial) {
            policy::Mlp net({4, 6, 5, 3}, kSeed + trial);
            Eigen::MatrixXd x(4, 4), y(3, 4);
            for (int i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
            for (int i = 0; i < y.size(); ++i) y.data()[i] = u(rng);
            policy::Mlp::Gradient g;
            net.loss_and_gradient(x, y, g);
            const Eigen::VectorXd analytic = policy::Mlp::flatten(g);
            const Eigen::VectorXd theta = net.parameters();
            for (Eigen::Index i = 0; i < theta.size(); ++i) {
                Eigen::VectorXd q = theta;
                q[i] += 1e-6;
                net.set_parameters(q);
                const double up = net.loss(x, y);
                q[i] -= 2e-6;
                net.set_parameters(q);
                const double down = net.loss(x, y);
                const double numeric = (up - down) / 2e-6;
                worst_grad = std::max(worst_grad, std::abs(numeric - analytic[i]) /
                                                      std::max(1e-3, std::abs(numeric) + std::abs(analytic[i])));
            }
        }

        const auto p = presets::by_name("case-a");
        const auto ds = pipeline::build_dataset(p, kSeed + 1);
        const auto stats = policy::fit_norm(ds.records);
        const auto back = policy::denormalize(policy::normalize(ds.records, stats), stats);
        double worst_round = 0.0;
        for (std::size_t i = 0; i < back.size(); ++i)
            for (int j = 0; j < 7; ++j) {
                const double a = ds.records[i].as_array()[j];
                worst_round = std::max(worst_round, std::abs(back[i].as_array()[j] - a) / std::max(1.0, std::abs(a)));
            }

        const bool pass = checked > 0 && worst_half <= kHalfStepTol && worst_grad <= kGradientRelTol &&
                          worst_round <= kRoundTripTol;
        std::ostringstream os;
        os << checked << " trajectories, worst half-step gap " << fmt("%.2e", worst_half) << "; worst gradient error "
           << fmt("%.2e", worst_grad) << "; worst round-trip error " << fmt("%.2e", worst_round) << " over "
           << back.size() << " records";
        return Outcome{pass, os.str()};
    });

    std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
