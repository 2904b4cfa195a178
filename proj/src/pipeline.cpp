#include "selftune/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace selftune::pipeline {

using nlohmann::json;

json preset_document(const presets::CasePreset& p) {
    return {{"preset", p.name},
            {"plant", p.plant_config},
            {"dataset_plant", p.dataset_plant_config},
            {"kstar", io::to_json(p.kstar)},
            {"init", io::to_json(p.init)},
            {"sampling", io::to_json(p.sampling)},
            {"alpha", p.alpha},
            {"augmentation", {{"copies", p.augmentation.copies}, {"noise", p.augmentation.noise}}},
            {"hidden", p.arch.hidden},
            {"train", io::to_json(p.hyper)},
            {"learn", io::to_json(p.learn)}};
}

policy::Dataset build_dataset(const presets::CasePreset& p, std::uint64_t seed) {
    const auto plant = io::plant_from_json(p.dataset_plant_config);
    return policy::generate_dataset(p.kstar, plant, p.sampling, p.alpha, p.augmentation, seed);
}

policy::PolicyModel train_model(const std::vector<policy::PolicyRecord>& records, const presets::CasePreset& p,
                                std::uint64_t seed) {
    return policy::train(records, p.arch, p.hyper, seed);
}

std::string model_hash(const policy::PolicyModel& model) { return io::config_hash(policy::to_json(model)); }

learner::LearningReport learn(const presets::CasePreset& p, const policy::PolicyModel& model, bool keep_trajectories) {
    auto cfg = p.learn;
    cfg.keep_trajectories = keep_trajectories;
    return learner::run_learning(io::plant_from_json(p.plant_config), p.init, model, cfg);
}

void write_dataset_bundle(const std::filesystem::path& dir, const policy::Dataset& ds,
                          const presets::CasePreset& p, const io::Provenance& prov) {
    std::ostringstream csv;
    io::write_dataset_csv(csv, ds.records, prov);
    io::write_text_file(dir / "dataset.csv", csv.str());
    const json meta = {{"config_hash", prov.config_hash},
                       {"seed", prov.seed},
                       {"dataset_hash", policy::dataset_hash(ds.records)},
                       {"records", ds.records.size()},
                       {"base_records", ds.base_count},
                       {"discarded_diverged", ds.diverged},
                       {"discarded_no_rise", ds.no_rise},
                       {"kstar", io::to_json(p.kstar)},
                       {"alpha", p.alpha},
                       {"plant", p.dataset_plant_config},
                       {"sampling", io::to_json(p.sampling)}};
    io::write_text_file(dir / "dataset.json", meta.dump(2) + "\n");
}

void write_model(const std::filesystem::path& path, const policy::PolicyModel& model, const io::Provenance& prov) {
    auto doc = policy::to_json(model);
    doc["metadata"]["config_hash"] = prov.config_hash;
    doc["metadata"]["run_seed"] = prov.seed;
    io::write_text_file(path, doc.dump(2) + "\n");
}

policy::PolicyModel read_model(const std::filesystem::path& path) {
    return policy::model_from_json(io::load_json_file(path));
}

namespace {

std::string svg_with_provenance(const io::PlotSpec& spec, const io::Provenance& prov) {
    auto svg = io::svg_line_plot(spec);
    const auto at = svg.find('\n');
    return svg.substr(0, at + 1) + "<!-- config_hash=" + prov.config_hash + " seed=" + std::to_string(prov.seed) +
           " -->\n" + svg.substr(at + 1);
}

void write_plots(const std::filesystem::path& dir, const learner::LearningReport& report, const io::Provenance& prov) {
    const auto& rows = report.rows;
    std::vector<double> iters;
    for (const auto& r : rows) iters.push_back(r.iter);

    if (!report.trajectories.empty()) {
        io::PlotSpec resp{"Step responses during learning", "t [s]", "y", {}};
        const std::size_t n = report.trajectories.size();
        std::vector<std::size_t> pick;
        const std::size_t shown = std::min<std::size_t>(n, 8);
        for (std::size_t i = 0; i < shown; ++i) pick.push_back(shown == 1 ? 0 : i * (n - 1) / (shown - 1));
        pick.erase(std::unique(pick.begin(), pick.end()), pick.end());
        for (auto i : pick) {
            const auto& tr = report.trajectories[i];
            resp.series.push_back({"iter " + std::to_string(rows[i].iter), tr.t, tr.y});
        }
        io::write_text_file(dir / "responses.svg", svg_with_provenance(resp, prov));
    }

    io::PlotSpec cost{"Performance cost", "iteration", "J", {}};
    std::vector<double> ci, cj, best;
    double b = INFINITY;
    for (const auto& r : rows) {
        if (!r.has_indicators()) continue;
        ci.push_back(r.iter);
        cj.push_back(r.cost);
        b = std::min(b, r.cost);
        best.push_back(b);
    }
    cost.series.push_back({"J", ci, cj});
    cost.series.push_back({"best so far", ci, best});
    io::write_text_file(dir / "cost.svg", svg_with_provenance(cost, prov));

    io::PlotSpec inc{"Applied gain increments", "iteration", "dK", {}};
    io::PlotSpec gains{"Controller gains", "iteration", "gain", {}};
    for (int k = 0; k < 3; ++k) {
        std::vector<double> d, g;
        for (const auto& r : rows) {
            d.push_back(r.dk[k]);
            g.push_back(k == 0 ? r.gains.theta1 : k == 1 ? r.gains.theta2 : r.gains.theta3);
        }
        inc.series.push_back({"dK" + std::to_string(k + 1), iters, d});
        gains.series.push_back({"theta" + std::to_string(k + 1), iters, g});
    }
    io::write_text_file(dir / "increments.svg", svg_with_provenance(inc, prov));
    io::write_text_file(dir / "gains.svg", svg_with_provenance(gains, prov));
}

}  // namespace

void write_learning_bundle(const std::filesystem::path& dir, const learner::LearningReport& report,
                           const presets::CasePreset& p, const std::string& model_hash,
                           const io::Provenance& prov, bool plots) {
    std::ostringstream csv;
    io::write_report_csv(csv, report, prov);
    io::write_text_file(dir / "report.csv", csv.str());
    auto summary = io::report_summary(report, p.plant_config, p.init, p.learn, model_hash, prov);
    summary["preset"] = p.name;
    io::write_text_file(dir / "summary.json", summary.dump(2) + "\n");
    if (plots) write_plots(dir, report, prov);
}

Bundle read_learning_bundle(const std::filesystem::path& dir) {
    const auto summary = io::load_json_file(dir / "summary.json");
    const auto cfg = io::learn_config_from_json(summary.at("learn"));
    const double filterN = summary.at("init").value("N", 100.0);
    std::ifstream in(dir / "report.csv");
    if (!in) throw std::runtime_error("cannot open " + (dir / "report.csv").string());
    auto rows = io::read_report_csv(in, filterN);
    auto report = io::report_from_bundle(rows, summary);
    return {std::move(report), summary, io::plant_from_json(summary.at("plant")), cfg};
}

}  // namespace selftune::pipeline
