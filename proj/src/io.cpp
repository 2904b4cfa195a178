#include "selftune/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace selftune::io {

std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string config_hash(const json& doc) { return fnv1a_hex(doc.dump()); }

namespace {

template <typename T>
T required(const json& doc, const char* key) {
    if (!doc.contains(key)) throw std::invalid_argument(std::string("missing config key '") + key + "'");
    return doc.at(key).get<T>();
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& s, std::size_t line_no) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("line " + std::to_string(line_no) + ": '" + s + "' is not a number");
    }
}

void write_provenance(std::ostream& os, const Provenance& prov) {
    os << "# config_hash=" << prov.config_hash << "\n# seed=" << prov.seed << "\n";
}

/// Next non-comment line; false at end of stream.
bool next_data_line(std::istream& is, std::string& line, std::size_t& line_no) {
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        return true;
    }
    return false;
}

const char* kDatasetHeader = "phi_sigma,phi_e,phi_tr,phi_ts,dk1,dk2,dk3";
const char* kReportHeader = "iter,k1,k2,k3,phi_sigma,phi_e,phi_tr,phi_ts,J,dk1,dk2,dk3,status";

json increment_json(const std::optional<policy::Increment>& v) { return v ? json(*v) : json(nullptr); }

std::optional<policy::Increment> increment_from(const json& doc, const char* key) {
    if (!doc.contains(key) || doc.at(key).is_null()) return std::nullopt;
    return doc.at(key).get<policy::Increment>();
}

}  // namespace

sim::Plant plant_from_json(const json& doc) {
    const auto type = doc.value("type", std::string{});
    if (type == "tf") {
        sim::TransferFunction tf{required<std::vector<double>>(doc, "num"), required<std::vector<double>>(doc, "den")};
        return sim::tf_to_state_space(tf);
    }
    if (type == "nonlinear") {
        const auto preset = required<std::string>(doc, "preset");
        const double L1 = doc.value("L1", 1.0);
        const double L2 = doc.value("L2", 1.0);
        const double w = doc.value("w", 1.0);
        sim::NonlinearPlant p;
        if (preset == "sin-tanh")
            p = sim::sin_tanh_plant(L1, L2, doc.value("a1", 1.0), doc.value("a2", 1.0), w);
        else if (preset == "pendulum")
            p = sim::pendulum_plant(L1, L2, w);
        else if (preset == "zero")
            p = sim::zero_plant(L1, L2, w);
        else
            throw std::invalid_argument("unknown nonlinear preset '" + preset + "'");
        p.validate();
        return p;
    }
    throw std::invalid_argument("plant config needs \"type\": \"tf\" or \"nonlinear\"");
}

json load_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

json load_plant_config(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw PlantFileNotFound(path.string());
    return load_json_file(path);
}

json to_json(const sim::ControllerParams& k) {
    return {{"theta1", k.theta1}, {"theta2", k.theta2}, {"theta3", k.theta3}, {"N", k.filterN}};
}

sim::ControllerParams gains_from_json(const json& doc) {
    return {required<double>(doc, "theta1"), required<double>(doc, "theta2"), required<double>(doc, "theta3"),
            doc.value("N", 100.0)};
}

json to_json(const sim::SimConfig& cfg) {
    std::vector<double> x0(cfg.initial_state.data(), cfg.initial_state.data() + cfg.initial_state.size());
    return {{"step", cfg.step},
            {"horizon", cfg.horizon},
            {"divergence_bound", cfg.divergence_bound},
            {"initial_state", x0},
            {"derivative", cfg.derivative == sim::DerivativeMode::Exact ? "exact" : "filtered"}};
}

sim::SimConfig sim_config_from_json(const json& doc) {
    sim::SimConfig cfg;
    cfg.step = doc.value("step", cfg.step);
    cfg.horizon = doc.value("horizon", cfg.horizon);
    cfg.divergence_bound = doc.value("divergence_bound", cfg.divergence_bound);
    const auto x0 = doc.value("initial_state", std::vector<double>{});
    cfg.initial_state = Eigen::Map<const Eigen::VectorXd>(x0.data(), static_cast<Eigen::Index>(x0.size()));
    const auto mode = doc.value("derivative", std::string("filtered"));
    if (mode != "filtered" && mode != "exact") throw std::invalid_argument("unknown derivative mode '" + mode + "'");
    cfg.derivative = mode == "exact" ? sim::DerivativeMode::Exact : sim::DerivativeMode::Filtered;
    cfg.validate();
    return cfg;
}

json to_json(const learner::LearnConfig& cfg) {
    const auto& t = cfg.targets;
    return {{"max_iterations", cfg.max_iterations},
            {"alpha", cfg.alpha},
            {"targets", t.target.as_array()},
            {"cost_threshold", t.cost_threshold},
            {"overshoot_gate", t.overshoot_gate ? json(*t.overshoot_gate) : json(nullptr)},
            {"weights", {cfg.weights.a, cfg.weights.b, cfg.weights.c, cfg.weights.d}},
            {"weight_increments", cfg.weight_increments},
            {"max_increment", cfg.clamp.max_increment},
            {"min_gain", increment_json(cfg.clamp.min_gain)},
            {"max_gain", increment_json(cfg.clamp.max_gain)},
            {"sim", to_json(cfg.sim)},
            {"ystar", cfg.ystar},
            {"seed", cfg.seed},
            {"mode", cfg.mode == learner::UpdateMode::Incremental ? "incremental" : "from-initial"}};
}

learner::LearnConfig learn_config_from_json(const json& doc) {
    learner::LearnConfig cfg;
    cfg.max_iterations = doc.value("max_iterations", cfg.max_iterations);
    cfg.alpha = doc.value("alpha", cfg.alpha);
    if (doc.contains("targets"))
        cfg.targets.target = metrics::PerfIndicators::from_array(doc.at("targets").get<std::array<double, 4>>());
    cfg.targets.cost_threshold = doc.value("cost_threshold", cfg.targets.cost_threshold);
    if (doc.contains("overshoot_gate") && !doc.at("overshoot_gate").is_null())
        cfg.targets.overshoot_gate = doc.at("overshoot_gate").get<double>();
    if (doc.contains("weights")) {
        const auto w = doc.at("weights").get<std::array<double, 4>>();
        cfg.weights = {w[0], w[1], w[2], w[3]};
    }
    cfg.weight_increments = doc.value("weight_increments", cfg.weight_increments);
    if (doc.contains("max_increment")) cfg.clamp.max_increment = doc.at("max_increment").get<policy::Increment>();
    cfg.clamp.min_gain = increment_from(doc, "min_gain");
    cfg.clamp.max_gain = increment_from(doc, "max_gain");
    if (doc.contains("sim")) cfg.sim = sim_config_from_json(doc.at("sim"));
    cfg.ystar = doc.value("ystar", cfg.ystar);
    cfg.seed = doc.value("seed", cfg.seed);
    const auto mode = doc.value("mode", std::string("incremental"));
    if (mode != "incremental" && mode != "from-initial") throw std::invalid_argument("unknown update mode '" + mode + "'");
    cfg.mode = mode == "incremental" ? learner::UpdateMode::Incremental : learner::UpdateMode::FromInitial;
    cfg.validate();
    return cfg;
}

json to_json(const policy::SamplingConfig& cfg) {
    return {{"samples", cfg.samples},
            {"lower_factor", cfg.lower_factor},
            {"upper_factor", cfg.upper_factor},
            {"ystar", cfg.ystar},
            {"sim", to_json(cfg.sim)},
            {"min_valid", cfg.min_valid}};
}

policy::SamplingConfig sampling_config_from_json(const json& doc) {
    policy::SamplingConfig cfg;
    cfg.samples = doc.value("samples", cfg.samples);
    if (doc.contains("lower_factor")) cfg.lower_factor = doc.at("lower_factor").get<policy::Increment>();
    if (doc.contains("upper_factor")) cfg.upper_factor = doc.at("upper_factor").get<policy::Increment>();
    cfg.ystar = doc.value("ystar", cfg.ystar);
    if (doc.contains("sim")) cfg.sim = sim_config_from_json(doc.at("sim"));
    cfg.min_valid = doc.value("min_valid", cfg.min_valid);
    return cfg;
}

json to_json(const policy::TrainHyper& h) {
    return {{"epochs", h.epochs},
            {"batch", h.batch},
            {"learning_rate", h.learning_rate},
            {"lr_decay", h.lr_decay},
            {"validation_fraction", h.validation_fraction}};
}

policy::TrainHyper train_hyper_from_json(const json& doc) {
    policy::TrainHyper h;
    h.epochs = doc.value("epochs", h.epochs);
    h.batch = doc.value("batch", h.batch);
    h.learning_rate = doc.value("learning_rate", h.learning_rate);
    h.lr_decay = doc.value("lr_decay", h.lr_decay);
    h.validation_fraction = doc.value("validation_fraction", h.validation_fraction);
    return h;
}

void write_trajectory_csv(std::ostream& os, const sim::Trajectory& traj, const Provenance& prov) {
    write_provenance(os, prov);
    os << "t,y,u";
    for (std::size_t i = 0; i < traj.plant_order; ++i) os << ",x" << i + 1;
    os << "\n";
    for (std::size_t k = 0; k < traj.size(); ++k) {
        os << fmt(traj.t[k]) << ',' << fmt(traj.y[k]) << ',' << fmt(traj.u[k]);
        for (std::size_t i = 0; i < traj.plant_order; ++i) os << ',' << fmt(traj.states[k](static_cast<Eigen::Index>(i)));
        os << "\n";
    }
}

void write_dataset_csv(std::ostream& os, const std::vector<policy::PolicyRecord>& records, const Provenance& prov) {
    write_provenance(os, prov);
    os << kDatasetHeader << "\n";
    for (const auto& r : records) {
        const auto v = r.as_array();
        for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << fmt(v[i]);
        os << "\n";
    }
}

std::vector<policy::PolicyRecord> read_dataset_csv(std::istream& is) {
    std::string line;
    std::size_t line_no = 0;
    if (!next_data_line(is, line, line_no) || line != kDatasetHeader)
        throw std::runtime_error("dataset CSV must start with header " + std::string(kDatasetHeader));
    std::vector<policy::PolicyRecord> out;
    while (next_data_line(is, line, line_no)) {
        const auto cells = split(line);
        if (cells.size() != 7) throw std::runtime_error("line " + std::to_string(line_no) + ": expected 7 fields");
        std::array<double, 7> v{};
        for (std::size_t i = 0; i < 7; ++i) v[i] = parse_double(cells[i], line_no);
        if (!std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); }))
            throw std::runtime_error("line " + std::to_string(line_no) + ": non-finite value");
        out.push_back(policy::PolicyRecord::from_array(v));
    }
    return out;
}

void write_report_csv(std::ostream& os, const learner::LearningReport& report, const Provenance& prov) {
    write_provenance(os, prov);
    os << kReportHeader << "\n";
    for (const auto& r : report.rows) {
        os << r.iter << ',' << fmt(r.gains.theta1) << ',' << fmt(r.gains.theta2) << ',' << fmt(r.gains.theta3);
        for (double v : r.indicators.as_array()) os << ',' << fmt(v);
        os << ',' << fmt(r.cost);
        for (double v : r.dk) os << ',' << fmt(v);
        os << ',' << learner::to_string(r.status) << "\n";
    }
}

std::vector<learner::IterationRow> read_report_csv(std::istream& is, double filterN) {
    std::string line;
    std::size_t line_no = 0;
    if (!next_data_line(is, line, line_no) || line != kReportHeader)
        throw std::runtime_error("report CSV must start with header " + std::string(kReportHeader));
    std::vector<learner::IterationRow> rows;
    while (next_data_line(is, line, line_no)) {
        const auto cells = split(line);
        if (cells.size() != 13) throw std::runtime_error("line " + std::to_string(line_no) + ": expected 13 fields");
        learner::IterationRow r;
        r.iter = static_cast<int>(parse_double(cells[0], line_no));
        r.gains = {parse_double(cells[1], line_no), parse_double(cells[2], line_no), parse_double(cells[3], line_no),
                   filterN};
        std::array<double, 4> ind{};
        for (int i = 0; i < 4; ++i) ind[i] = parse_double(cells[4 + i], line_no);
        r.indicators = metrics::PerfIndicators::from_array(ind);
        r.cost = parse_double(cells[8], line_no);
        for (int i = 0; i < 3; ++i) r.dk[i] = parse_double(cells[9 + i], line_no);
        r.status = learner::row_status_from_string(cells[12]);
        rows.push_back(r);
    }
    return rows;
}

json report_summary(const learner::LearningReport& report, const json& plant_config,
                    const sim::ControllerParams& init, const learner::LearnConfig& cfg,
                    const std::string& model_hash, const Provenance& prov) {
    json terminal = nullptr;
    if (report.terminal_row >= 0) {
        const auto& t = report.terminal();
        terminal = {{"iter", t.iter},
                    {"gains", to_json(t.gains)},
                    {"indicators", t.indicators.as_array()},
                    {"cost", t.cost},
                    {"status", learner::to_string(t.status)}};
    }
    return {{"format", "selftune-learning-report"},
            {"format_version", 1},
            {"config_hash", prov.config_hash},
            {"seed", prov.seed},
            {"model_hash", model_hash},
            {"status", learner::to_string(report.status)},
            {"message", report.message},
            {"iterations", report.rows.size()},
            {"terminal_row", report.terminal_row},
            {"terminal", terminal},
            {"best_row", report.best_row},
            {"best_gains", to_json(report.best_gains)},
            {"best_cost", report.best_cost},
            {"max_overshoot", report.max_overshoot()},
            {"penalties", report.penalties},
            {"rollbacks", report.rollbacks},
            {"plant", plant_config},
            {"init", to_json(init)},
            {"learn", to_json(cfg)}};
}

learner::LearningReport report_from_bundle(const std::vector<learner::IterationRow>& rows, const json& summary) {
    if (summary.value("format", std::string{}) != "selftune-learning-report")
        throw std::invalid_argument("not a learning report summary");
    learner::LearningReport r;
    r.rows = rows;
    r.status = learner::terminal_from_string(required<std::string>(summary, "status"));
    r.message = summary.value("message", std::string{});
    r.terminal_row = required<int>(summary, "terminal_row");
    r.best_row = required<int>(summary, "best_row");
    r.best_gains = gains_from_json(summary.at("best_gains"));
    r.best_cost = required<double>(summary, "best_cost");
    r.penalties = required<int>(summary, "penalties");
    r.rollbacks = required<int>(summary, "rollbacks");
    if (r.terminal_row < 0 || r.terminal_row >= static_cast<int>(rows.size()))
        throw std::invalid_argument("summary terminal row does not match the report rows");
    return r;
}

namespace {

std::string escape_xml(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

}  // namespace

std::string svg_line_plot(const PlotSpec& spec) {
    constexpr double W = 720, H = 440, left = 70, right = 170, top = 40, bottom = 50;
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
    for (const auto& s : spec.series) {
        for (double v : s.x) if (std::isfinite(v)) xmin = std::min(xmin, v), xmax = std::max(xmax, v);
        for (double v : s.y) if (std::isfinite(v)) ymin = std::min(ymin, v), ymax = std::max(ymax, v);
    }
    if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymin -= 0.5, ymax += 0.5;
    const double pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;
    const double pw = W - left - right, ph = H - top - bottom;
    auto sx = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
    auto sy = [&](double y) { return top + (ymax - y) / (ymax - ymin) * ph; };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape_xml(spec.title)
       << "</text>\n";
    os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = xmin + (xmax - xmin) * i / 4, yv = ymin + (ymax - ymin) * i / 4;
        os << "<text x=\"" << sx(xv) << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\">" << num(xv)
           << "</text>\n";
        os << "<text x=\"" << left - 6 << "\" y=\"" << sy(yv) + 4 << "\" text-anchor=\"end\">" << num(yv) << "</text>\n";
        os << "<line x1=\"" << left << "\" x2=\"" << left + pw << "\" y1=\"" << sy(yv) << "\" y2=\"" << sy(yv)
           << "\" stroke=\"#ddd\"/>\n";
    }
    os << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">"
       << escape_xml(spec.xlabel) << "</text>\n";
    os << "<text transform=\"translate(16," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
       << escape_xml(spec.ylabel) << "</text>\n";

    for (std::size_t s = 0; s < spec.series.size(); ++s) {
        const auto& ser = spec.series[s];
        const char* colour = palette[s % 10];
        os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
        const std::size_t n = std::min(ser.x.size(), ser.y.size());
        // Long series are thinned to about 2000 points.
        const std::size_t stride = std::max<std::size_t>(1, n / 2000);
        for (std::size_t k = 0; k < n; k += stride)
            if (std::isfinite(ser.x[k]) && std::isfinite(ser.y[k])) os << num(sx(ser.x[k])) << ',' << num(sy(ser.y[k])) << ' ';
        if (n > 0 && (n - 1) % stride) os << num(sx(ser.x[n - 1])) << ',' << num(sy(ser.y[n - 1]));
        os << "\"/>\n";
        if (spec.series.size() <= 12) {
            const double ly = top + 14 + 16 * static_cast<double>(s);
            os << "<line x1=\"" << left + pw + 10 << "\" x2=\"" << left + pw + 30 << "\" y1=\"" << ly << "\" y2=\"" << ly
               << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n";
            os << "<text x=\"" << left + pw + 35 << "\" y=\"" << ly + 4 << "\">" << escape_xml(ser.label) << "</text>\n";
        }
    }
    os << "</svg>\n";
    return os.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace selftune::io
