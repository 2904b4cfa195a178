#include "selftune/certifier.hpp"
#include "selftune/io.hpp"
#include "selftune/learner.hpp"
#include "selftune/metrics.hpp"
#include "selftune/pipeline.hpp"
#include "selftune/presets.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using namespace selftune;
using nlohmann::json;

namespace {

constexpr int kExitFailed = 1;
constexpr int kExitPlantMissing = 2;
constexpr int kExitMissingStage = 3;

struct MissingStage : std::runtime_error {
    MissingStage(const std::string& stage, const fs::path& file)
        : std::runtime_error("missing prerequisite stage '" + stage + "': " + file.string() + " not found"), stage(stage) {}
    std::string stage;
};

struct RunFailed : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string default_out_dir() {
    if (const char* env = std::getenv("SELFTUNE_OUT"); env && *env) return env;
    return "selftune-out";
}

/// Options shared by the pipeline subcommands.
struct Common {
    std::string preset = "case-a";
    std::string plant_file;
    std::string config_file;
    std::string out = default_out_dir();
    std::uint64_t seed = 1;
    bool plots = true;
    std::vector<double> init, kstar;
    double filter_n = 0.0;
    int samples = 0;
    int epochs = 0;
    int iterations = 0;
    double alpha = 0.0;
    double jstar = 0.0;
};

void add_common(CLI::App* cmd, Common& c, bool with_plots) {
    cmd->add_option("--preset", c.preset, "bundled case: " + [] {
        std::string s;
        for (const auto& n : presets::names()) s += (s.empty() ? "" : ", ") + n;
        return s;
    }());
    cmd->add_option("--plant", c.plant_file, "plant config JSON file (overrides the preset plant)");
    cmd->add_option("--config", c.config_file, "run config JSON overriding preset fields");
    cmd->add_option("--out", c.out, "output directory (default $SELFTUNE_OUT or ./selftune-out)");
    cmd->add_option("--seed", c.seed, "random seed");
    if (with_plots) cmd->add_flag("!--no-plots", c.plots, "skip SVG plots");
}

sim::ControllerParams triple(const std::vector<double>& v, double N, const char* what) {
    if (v.size() != 3) throw std::invalid_argument(std::string(what) + " needs three comma-separated values");
    return {v[0], v[1], v[2], N};
}

presets::CasePreset resolve(const Common& c) {
    auto p = presets::by_name(c.preset);
    if (!c.config_file.empty()) {
        if (!fs::exists(c.config_file)) throw std::runtime_error("config file not found: " + c.config_file);
        const auto doc = io::load_json_file(c.config_file);
        if (doc.contains("preset")) p = presets::by_name(doc.at("preset").get<std::string>());
        if (doc.contains("plant")) {
            const auto& pl = doc.at("plant");
            p.plant_config = pl.is_string() ? io::load_plant_config(pl.get<std::string>()) : pl;
            p.dataset_plant_config = p.plant_config;
        }
        if (doc.contains("dataset_plant")) p.dataset_plant_config = doc.at("dataset_plant");
        if (doc.contains("init")) p.init = io::gains_from_json(doc.at("init"));
        if (doc.contains("kstar")) p.kstar = io::gains_from_json(doc.at("kstar"));
        // Partial blocks patch the preset's values.
        auto patched = [&](json base, const char* key) {
            base.merge_patch(doc.at(key));
            return base;
        };
        if (doc.contains("learn")) p.learn = io::learn_config_from_json(patched(io::to_json(p.learn), "learn"));
        if (doc.contains("sampling"))
            p.sampling = io::sampling_config_from_json(patched(io::to_json(p.sampling), "sampling"));
        if (doc.contains("train")) p.hyper = io::train_hyper_from_json(patched(io::to_json(p.hyper), "train"));
        if (doc.contains("hidden")) p.arch.hidden = doc.at("hidden").get<std::vector<int>>();
        if (doc.contains("alpha")) p.alpha = doc.at("alpha").get<double>();
        if (doc.contains("augmentation")) {
            p.augmentation.copies = doc.at("augmentation").value("copies", p.augmentation.copies);
            p.augmentation.noise = doc.at("augmentation").value("noise", p.augmentation.noise);
        }
    }
    if (!c.plant_file.empty()) {
        p.plant_config = io::load_plant_config(c.plant_file);
        p.dataset_plant_config = p.plant_config;
    }
    if (c.filter_n > 0.0) p.kstar.filterN = p.init.filterN = c.filter_n;
    if (!c.init.empty()) p.init = triple(c.init, p.init.filterN, "--init");
    if (!c.kstar.empty()) p.kstar = triple(c.kstar, p.kstar.filterN, "--kstar");
    if (c.samples > 0) p.sampling.samples = static_cast<std::size_t>(c.samples);
    if (c.epochs > 0) p.hyper.epochs = c.epochs;
    if (c.iterations > 0) p.learn.max_iterations = c.iterations;
    if (c.alpha > 0.0) p.alpha = p.learn.alpha = c.alpha;
    if (c.jstar > 0.0) p.learn.targets.cost_threshold = c.jstar;
    p.learn.seed = c.seed;
    p.learn.validate();
    return p;
}

io::Provenance provenance(const presets::CasePreset& p, std::uint64_t seed) {
    return {io::config_hash(pipeline::preset_document(p)), seed};
}

void print_indicators(const metrics::PerfIndicators& ind) {
    std::cout << std::setprecision(6) << "  overshoot " << ind.overshoot * 100.0 << " %\n"
              << "  steady-state error " << ind.sse << "\n"
              << "  rise time " << ind.rise << " s\n"
              << "  settling time " << ind.settle << " s\n";
}

void print_report(const std::string& label, const learner::LearningReport& r) {
    std::cout << label << ": " << learner::to_string(r.status) << " after " << r.rows.size() << " iterations";
    if (!r.message.empty()) std::cout << " (" << r.message << ")";
    std::cout << "\n";
    if (r.terminal_row < 0) return;
    const auto& t = r.terminal();
    std::cout << std::setprecision(6) << "  terminal gains (" << t.gains.theta1 << ", " << t.gains.theta2 << ", "
              << t.gains.theta3 << "), J = " << t.cost << "\n";
    if (t.has_indicators()) print_indicators(t.indicators);
    std::cout << "  max overshoot during learning " << r.max_overshoot() * 100.0 << " %, penalties " << r.penalties
              << ", rollbacks " << r.rollbacks << "\n";
}

// simulate ------------------------------------------------------------------

struct SimulateOpts {
    Common c;
    std::vector<double> gains;
    double ystar = 1.0;
    double horizon = 0.0;
    double step = 0.0;
};

int cmd_simulate(SimulateOpts& o) {
    const auto p = resolve(o.c);
    const auto plant = io::plant_from_json(p.plant_config);
    const double N = o.c.filter_n > 0.0 ? o.c.filter_n : p.kstar.filterN;
    const auto gains = o.gains.empty() ? sim::ControllerParams{p.kstar.theta1, p.kstar.theta2, p.kstar.theta3, N}
                                       : triple(o.gains, N, "--gains");
    auto sc = p.learn.sim;
    if (o.horizon > 0.0) sc.horizon = o.horizon;
    if (o.step > 0.0) sc.step = o.step;

    const auto traj = sim::closed_loop_step(plant, gains, o.ystar, sc);
    json doc = {{"preset", p.name}, {"plant", p.plant_config}, {"gains", io::to_json(gains)},
                {"ystar", o.ystar}, {"sim", io::to_json(sc)}};
    const io::Provenance prov{io::config_hash(doc), o.c.seed};
    doc["config_hash"] = prov.config_hash;
    doc["seed"] = prov.seed;
    doc["diverged"] = traj.diverged;

    const fs::path out(o.c.out);
    std::ostringstream csv;
    io::write_trajectory_csv(csv, traj, prov);
    io::write_text_file(out / "trajectory.csv", csv.str());

    int code = 0;
    std::cout << "simulated " << traj.size() << " samples over " << traj.horizon() << " s\n";
    if (traj.diverged) {
        std::cout << "response diverged at t = " << traj.horizon() << " s\n";
        code = kExitFailed;
    } else {
        try {
            const auto m = metrics::compute_indicators(traj, o.ystar);
            doc["indicators"] = m.indicators.as_array();
            doc["steady_state"] = m.steady_state;
            doc["horizon_too_short"] = m.horizon_too_short;
            doc["never_settled"] = m.never_settled;
            print_indicators(m.indicators);
            if (m.horizon_too_short) std::cout << "  note: horizon is shorter than five settling times\n";
        } catch (const metrics::MetricsError& e) {
            doc["indicators"] = nullptr;
            doc["metrics_error"] = e.what();
            std::cout << "no indicators: " << e.what() << "\n";
        }
    }
    io::write_text_file(out / "simulation.json", doc.dump(2) + "\n");
    if (o.c.plots) {
        io::PlotSpec spec{"Closed-loop step response", "t [s]", "y", {{"y", traj.t, traj.y}}};
        io::write_text_file(out / "trajectory.svg", io::svg_line_plot(spec));
    }
    std::cout << "wrote " << (out / "trajectory.csv").string() << "\n";
    return code;
}

// gen-dataset / train / learn ----------------------------------------------

int cmd_gen_dataset(Common& c) {
    const auto p = resolve(c);
    const auto ds = pipeline::build_dataset(p, c.seed);
    const auto prov = provenance(p, c.seed);
    pipeline::write_dataset_bundle(c.out, ds, p, prov);
    std::cout << "dataset: " << ds.records.size() << " records (" << ds.base_count << " simulated, " << ds.diverged
              << " diverged and " << ds.no_rise << " without rise discarded), hash "
              << policy::dataset_hash(ds.records) << "\n"
              << "wrote " << (fs::path(c.out) / "dataset.csv").string() << "\n";
    return 0;
}

struct TrainOpts {
    Common c;
    std::string dataset;
    std::vector<int> hidden;
};

int cmd_train(TrainOpts& o) {
    auto p = resolve(o.c);
    if (!o.hidden.empty()) p.arch.hidden = o.hidden;
    const fs::path path = o.dataset.empty() ? fs::path(o.c.out) / "dataset.csv" : fs::path(o.dataset);
    if (!fs::exists(path)) throw MissingStage("gen-dataset", path);
    std::ifstream in(path);
    const auto records = io::read_dataset_csv(in);
    const auto model = pipeline::train_model(records, p, o.c.seed);
    pipeline::write_model(fs::path(o.c.out) / "model.json", model, provenance(p, o.c.seed));
    std::cout << "trained " << records.size() << " records: train loss " << model.meta.train_loss
              << ", validation loss " << model.meta.validation_loss << "\n"
              << "wrote " << (fs::path(o.c.out) / "model.json").string() << "\n";
    return 0;
}

struct LearnOpts {
    Common c;
    std::string model;
};

policy::PolicyModel load_model_or_fail(const fs::path& path) {
    if (!fs::exists(path)) throw MissingStage("train", path);
    return pipeline::read_model(path);
}

/// Learns, writes the bundle and replays it; returns the exit code.
int learn_and_write(const presets::CasePreset& p, const policy::PolicyModel& model, const fs::path& dir,
                    std::uint64_t seed, bool plots, const std::string& label) {
    const auto report = pipeline::learn(p, model, plots);
    pipeline::write_learning_bundle(dir, report, p, pipeline::model_hash(model), provenance(p, seed), plots);
    print_report(label, report);
    const auto bundle = pipeline::read_learning_bundle(dir);
    const auto verdict = learner::replay_report(bundle.report, bundle.plant, bundle.cfg);
    std::cout << "  replay: " << verdict.message << "\n";
    if (!verdict.pass) return kExitFailed;
    return report.status == learner::Terminal::Failed ? kExitFailed : 0;
}

int cmd_learn(LearnOpts& o) {
    const auto p = resolve(o.c);
    const fs::path model_path = o.model.empty() ? fs::path(o.c.out) / "model.json" : fs::path(o.model);
    const auto model = load_model_or_fail(model_path);
    const int code = learn_and_write(p, model, o.c.out, o.c.seed, o.c.plots, p.name);
    std::cout << "wrote " << (fs::path(o.c.out) / "report.csv").string() << "\n";
    return code;
}

// certify ---------------------------------------------------------------------

struct CertifyOpts {
    std::vector<double> L, theta;
    std::string config;
    std::string out = default_out_dir();
    int sweep_points = 101;
    int trials = 0;
    bool falsify = false;
    std::uint64_t seed = 1;
};

json certificate_json(const certifier::ManifoldReport& r) {
    auto mat = [](const Eigen::Matrix3d& M) {
        json rows = json::array();
        for (int i = 0; i < 3; ++i) rows.push_back({M(i, 0), M(i, 1), M(i, 2)});
        return rows;
    };
    return {{"member", r.membership.member},
            {"margins", r.membership.margins},
            {"Gamma", r.Gamma},
            {"p0", r.p0},
            {"varpi0", r.varpi0},
            {"varpi1", r.varpi1},
            {"varpi", r.varpi},
            {"M", mat(r.M)},
            {"M_minors", r.M_minors},
            {"M_eigenvalues", r.M_eigenvalues},
            {"M_positive_definite_minors", r.M_pd_minors},
            {"M_positive_definite_eigen", r.M_pd_eigen},
            {"b4", r.b4},
            {"b4_alt_third", r.b4_alt_third},
            {"b4_holds", r.b4_holds},
            {"P_positive_definite", r.P_pd},
            {"min_lambda", r.min_lambda},
            {"min_lambda_at", {{"l", r.min_lambda_l}, {"p", r.min_lambda_p}}},
            {"lambda_closed_form_discrepancy", r.lambda_discrepancy},
            {"p_range", r.p_range},
            {"sweep_points", r.sweep_points}};
}

int cmd_certify(CertifyOpts& o) {
    certifier::LipschitzBounds L;
    sim::ControllerParams theta;
    if (!o.config.empty()) {
        if (!fs::exists(o.config)) throw std::runtime_error("config file not found: " + o.config);
        const auto doc = io::load_json_file(o.config);
        L = {doc.at("L1").get<double>(), doc.at("L2").get<double>()};
        theta = {doc.at("theta1").get<double>(), doc.at("theta2").get<double>(), doc.at("theta3").get<double>()};
    }
    if (!o.L.empty()) {
        if (o.L.size() != 2) throw std::invalid_argument("--L needs two comma-separated values");
        L = {o.L[0], o.L[1]};
    }
    if (!o.theta.empty()) theta = triple(o.theta, 100.0, "--theta");
    if (o.config.empty() && (o.L.empty() || o.theta.empty()))
        throw std::invalid_argument("certify needs --L and --theta, or --config");

    const auto m = certifier::manifold_membership(theta, L);
    std::cout << std::setprecision(6) << "gains (" << theta.theta1 << ", " << theta.theta2 << ", " << theta.theta3
              << "), L = (" << L.L1 << ", " << L.L2 << ")\n"
              << "manifold margins: theta1 - L1 = " << m.margins[0] << ", theta3 - L2 = " << m.margins[1]
              << ", third = " << m.margins[2] << "\n";
    json doc = {{"L", {L.L1, L.L2}}, {"theta", {theta.theta1, theta.theta2, theta.theta3}}};
    int code = 0;
    if (!m.member) {
        std::cout << "verdict: NOT a member, certificate refused\n";
        doc["member"] = false;
        doc["margins"] = m.margins;
        code = kExitFailed;
    } else {
        const auto r = certifier::build_certificate(theta, L, {o.sweep_points, o.sweep_points, std::nullopt});
        std::cout << "verdict: member\n"
                  << "Gamma = " << r.Gamma << ", p0 = " << r.p0 << ", varpi0 = " << r.varpi0 << ", varpi = " << r.varpi
                  << "\n"
                  << "M leading minors: " << r.M_minors[0] << ", " << r.M_minors[1] << ", " << r.M_minors[2]
                  << " (eigenvalues " << r.M_eigenvalues[0] << ", " << r.M_eigenvalues[1] << ", "
                  << r.M_eigenvalues[2] << ")\n"
                  << "B4 margins: " << r.b4[0] << ", " << r.b4[1] << ", " << r.b4[2] << " (alternative third form "
                  << r.b4_alt_third << ")\n"
                  << "P positive definite over " << r.sweep_points << " (l, p) points: " << (r.P_pd ? "yes" : "no")
                  << ", min lambda " << r.min_lambda << " at l = " << r.min_lambda_l << ", p = " << r.min_lambda_p
                  << "\n";
        doc.update(certificate_json(r));
        if (!(r.b4_holds && r.M_pd_minors && r.M_pd_eigen && r.P_pd)) code = kExitFailed;
    }
    if (o.trials > 0 && (m.member || o.falsify)) {
        certifier::TheoremTrialConfig tc;
        tc.trials = o.trials;
        tc.seed = o.seed;
        tc.falsification = o.falsify;
        const auto s = certifier::empirical_theorem1(L, theta, tc);
        std::cout << "convergence trials: " << s.converged << "/" << s.trials << " reached the reference, worst residuals "
                  << s.worst_x1_residual << " / " << s.worst_x2_residual << "\n";
        doc["trials"] = {{"count", s.trials},
                         {"converged", s.converged},
                         {"pass_fraction", s.pass_fraction},
                         {"worst_x1_residual", s.worst_x1_residual},
                         {"worst_x2_residual", s.worst_x2_residual},
                         {"lyapunov_passes", s.lyapunov_passes},
                         {"seed", o.seed}};
        if (m.member && (s.converged != s.trials || s.lyapunov_passes != s.trials)) code = kExitFailed;
    }
    doc["config_hash"] = io::config_hash(json{{"L", doc["L"]}, {"theta", doc["theta"]}});
    doc["seed"] = o.seed;
    io::write_text_file(fs::path(o.out) / "certificate.json", doc.dump(2) + "\n");
    std::cout << "--- json ---\n" << doc.dump(2) << "\n";
    return code;
}

// demo ------------------------------------------------------------------------

struct DemoOpts {
    std::string which;
    std::string out = default_out_dir();
    std::uint64_t seed = 1;
    bool plots = true;
};

int cmd_demo(DemoOpts& o) {
    const fs::path root = fs::path(o.out) / ("demo-" + o.which);
    std::vector<presets::CasePreset> runs;
    if (o.which == "case-a")
        runs = {presets::by_name("case-a")};
    else if (o.which == "case-b")
        runs = {presets::by_name("case-b-g2a"), presets::by_name("case-b-g2b")};
    else
        throw std::invalid_argument("demo expects case-a or case-b");
    for (auto& r : runs) r.learn.seed = o.seed;

    // Both case-b runs share the dataset and the model.
    const auto& first = runs.front();
    std::cout << "[1/3] generating dataset\n";
    const auto ds = pipeline::build_dataset(first, o.seed);
    pipeline::write_dataset_bundle(root, ds, first, provenance(first, o.seed));
    std::cout << "  " << ds.records.size() << " records, hash " << policy::dataset_hash(ds.records) << "\n";
    std::cout << "[2/3] training policy network\n";
    const auto model = pipeline::train_model(ds.records, first, o.seed);
    pipeline::write_model(root / "model.json", model, provenance(first, o.seed));
    std::cout << "  train loss " << model.meta.train_loss << ", validation loss " << model.meta.validation_loss << "\n";
    std::cout << "[3/3] self-learning\n";
    int code = 0;
    for (const auto& p : runs) {
        const auto dir = runs.size() == 1 ? root : root / p.name;
        const int c = learn_and_write(p, model, dir, o.seed, o.plots, p.name);
        if (c != 0) code = c;
    }
    std::cout << "wrote " << root.string() << "\n";
    return code;
}

// sweep -----------------------------------------------------------------------

struct SweepOpts {
    Common c;
    std::string model;
    int runs = 20;
    double spread = 3.0;
};

int cmd_sweep(SweepOpts& o) {
    const auto p = resolve(o.c);
    const fs::path model_path = o.model.empty() ? fs::path(o.c.out) / "model.json" : fs::path(o.model);
    const auto model = load_model_or_fail(model_path);
    if (o.runs < 1 || !(o.spread >= 1.0)) throw std::invalid_argument("sweep needs --runs >= 1 and --spread >= 1");

    // Initial gains log-uniform within [init / spread, init * spread], kept inside the clamp box.
    std::mt19937_64 rng(o.c.seed);
    std::uniform_real_distribution<double> u(-std::log(o.spread), std::log(o.spread));
    std::vector<sim::ControllerParams> inits;
    for (int i = 0; i < o.runs; ++i) {
        auto k = p.init;
        double* g[] = {&k.theta1, &k.theta2, &k.theta3};
        for (int j = 0; j < 3; ++j) {
            *g[j] *= std::exp(u(rng));
            if (p.learn.clamp.min_gain) *g[j] = std::max(*g[j], (*p.learn.clamp.min_gain)[j]);
            if (p.learn.clamp.max_gain) *g[j] = std::min(*g[j], (*p.learn.clamp.max_gain)[j]);
        }
        inits.push_back(k);
    }

    std::vector<learner::LearningReport> reports(inits.size());
    const auto plant = io::plant_from_json(p.plant_config);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < inits.size(); i = next++) reports[i] = learner::run_learning(plant, inits[i], model, p.learn);
    };
    std::vector<std::thread> pool;
    const unsigned n = std::max(1u, std::min(std::thread::hardware_concurrency(), 8u));
    for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    const auto prov = provenance(p, o.c.seed);
    std::ostringstream csv;
    csv << "# config_hash=" << prov.config_hash << "\n# seed=" << prov.seed << "\n";
    csv << "run,init1,init2,init3,status,iterations,k1,k2,k3,phi_sigma,phi_e,phi_tr,phi_ts,J,max_overshoot,penalties\n";
    int converged = 0;
    for (std::size_t i = 0; i < inits.size(); ++i) {
        const auto& r = reports[i];
        const auto& t = r.terminal();
        if (r.status == learner::Terminal::Converged) ++converged;
        csv << std::setprecision(17) << i << ',' << inits[i].theta1 << ',' << inits[i].theta2 << ',' << inits[i].theta3
            << ',' << learner::to_string(r.status) << ',' << r.rows.size() << ',' << t.gains.theta1 << ','
            << t.gains.theta2 << ',' << t.gains.theta3;
        for (double v : t.indicators.as_array()) csv << ',' << v;
        csv << ',' << t.cost << ',' << r.max_overshoot() << ',' << r.penalties << "\n";
    }
    io::write_text_file(fs::path(o.c.out) / "sweep.csv", csv.str());
    std::cout << converged << "/" << inits.size() << " runs converged\n"
              << "wrote " << (fs::path(o.c.out) / "sweep.csv").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Self-learning PID reconstruction: simulation, policy learning and stability certificates"};
    app.require_subcommand(1);

    SimulateOpts sim_o;
    auto* simulate = app.add_subcommand("simulate", "closed-loop step test, writes trajectory.csv");
    add_common(simulate, sim_o.c, true);
    simulate->add_option("--gains", sim_o.gains, "theta1,theta2,theta3 (default: preset expert gains)")->delimiter(',');
    simulate->add_option("--filter-n", sim_o.c.filter_n, "derivative filter coefficient N");
    simulate->add_option("--ystar", sim_o.ystar, "step amplitude");
    simulate->add_option("--horizon", sim_o.horizon, "simulated time [s]");
    simulate->add_option("--step", sim_o.step, "integration step [s]");

    Common gen_o;
    auto* gen = app.add_subcommand("gen-dataset", "simulate sampled gains and write the policy dataset");
    add_common(gen, gen_o, false);
    gen->add_option("--samples", gen_o.samples, "candidate gain samples");
    gen->add_option("--kstar", gen_o.kstar, "expert gains theta1,theta2,theta3")->delimiter(',');
    gen->add_option("--filter-n", gen_o.filter_n, "derivative filter coefficient N");
    gen->add_option("--alpha", gen_o.alpha, "learning rate used in the labels");

    TrainOpts train_o;
    auto* train = app.add_subcommand("train", "train the policy network on dataset.csv");
    add_common(train, train_o.c, false);
    train->add_option("--dataset", train_o.dataset, "dataset CSV (default <out>/dataset.csv)");
    train->add_option("--epochs", train_o.c.epochs, "training epochs");
    train->add_option("--hidden", train_o.hidden, "hidden layer widths, e.g. 32,32")->delimiter(',');

    LearnOpts learn_o;
    auto* learn = app.add_subcommand("learn", "run the self-learning loop with a trained model");
    add_common(learn, learn_o.c, true);
    learn->add_option("--model", learn_o.model, "model JSON (default <out>/model.json)");
    learn->add_option("--init", learn_o.c.init, "initial gains theta1,theta2,theta3")->delimiter(',');
    learn->add_option("--filter-n", learn_o.c.filter_n, "derivative filter coefficient N");
    learn->add_option("--iterations", learn_o.c.iterations, "iteration budget n");
    learn->add_option("--alpha", learn_o.c.alpha, "learning rate");
    learn->add_option("--jstar", learn_o.c.jstar, "cost threshold J*");

    CertifyOpts cert_o;
    auto* certify = app.add_subcommand("certify", "stability manifold test and Lyapunov certificate");
    certify->add_option("--L", cert_o.L, "Lipschitz bounds L1,L2")->delimiter(',');
    certify->add_option("--theta", cert_o.theta, "gains theta1,theta2,theta3")->delimiter(',');
    certify->add_option("--config", cert_o.config, "JSON with L1, L2, theta1, theta2, theta3");
    certify->add_option("--sweep-points", cert_o.sweep_points, "grid points per (l, p) axis");
    certify->add_option("--trials", cert_o.trials, "random nonlinear plants to simulate (0 = none)");
    certify->add_flag("--falsify", cert_o.falsify, "run trials even for non-members, reporting only");
    certify->add_option("--out", cert_o.out, "output directory (default $SELFTUNE_OUT or ./selftune-out)");
    certify->add_option("--seed", cert_o.seed, "random seed");

    DemoOpts demo_o;
    auto* demo = app.add_subcommand("demo", "full pipeline on a bundled case");
    demo->add_option("case", demo_o.which, "case-a or case-b")->required();
    demo->add_option("--out", demo_o.out, "output directory (default $SELFTUNE_OUT or ./selftune-out)");
    demo->add_option("--seed", demo_o.seed, "random seed");
    demo->add_flag("!--no-plots", demo_o.plots, "skip SVG plots");

    SweepOpts sweep_o;
    auto* sweep = app.add_subcommand("sweep", "independent learning runs from randomized initial gains");
    add_common(sweep, sweep_o.c, false);
    sweep->add_option("--model", sweep_o.model, "model JSON (default <out>/model.json)");
    sweep->add_option("--runs", sweep_o.runs, "number of runs");
    sweep->add_option("--spread", sweep_o.spread, "initial gains drawn within [init/spread, init*spread]");

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed()) return cmd_simulate(sim_o);
        if (gen->parsed()) return cmd_gen_dataset(gen_o);
        if (train->parsed()) return cmd_train(train_o);
        if (learn->parsed()) return cmd_learn(learn_o);
        if (certify->parsed()) return cmd_certify(cert_o);
        if (demo->parsed()) return cmd_demo(demo_o);
        if (sweep->parsed()) return cmd_sweep(sweep_o);
    } catch (const io::PlantFileNotFound& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitPlantMissing;
    } catch (const MissingStage& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitMissingStage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailed;
    }
    return kExitFailed;
}
