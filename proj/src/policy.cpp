#include "selftune/policy.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <thread>

namespace selftune::policy {

namespace {

Eigen::MatrixXd input_matrix(const std::vector<PolicyRecord>& recs, const std::vector<std::size_t>& idx) {
    Eigen::MatrixXd x(4, static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) {
        const auto v = recs[idx[j]].indicators.as_array();
        for (int i = 0; i < 4; ++i) x(i, static_cast<Eigen::Index>(j)) = v[i];
    }
    return x;
}

Eigen::MatrixXd label_matrix(const std::vector<PolicyRecord>& recs, const std::vector<std::size_t>& idx) {
    Eigen::MatrixXd y(3, static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j)
        for (int i = 0; i < 3; ++i) y(i, static_cast<Eigen::Index>(j)) = recs[idx[j]].dk[i];
    return y;
}

}  // namespace

std::string dataset_hash(const std::vector<PolicyRecord>& records) {
    // FNV-1a over the IEEE bit patterns, row by row.
    std::uint64_t h = 14695981039346656037ull;
    for (const auto& r : records) {
        for (double v : r.as_array()) {
            auto bits = std::bit_cast<std::uint64_t>(v);
            for (int b = 0; b < 8; ++b) {
                h ^= (bits >> (8 * b)) & 0xffu;
                h *= 1099511628211ull;
            }
        }
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::array<double, 7> PolicyRecord::as_array() const {
    return {indicators.overshoot, indicators.sse, indicators.rise, indicators.settle, dk[0], dk[1], dk[2]};
}

PolicyRecord PolicyRecord::from_array(const std::array<double, 7>& v) {
    return {{v[0], v[1], v[2], v[3]}, {v[4], v[5], v[6]}};
}

Increment make_label(const sim::ControllerParams& kstar, const sim::ControllerParams& sampled,
                     double alpha) {
    return {kstar.theta1 - alpha * sampled.theta1, kstar.theta2 - alpha * sampled.theta2,
            kstar.theta3 - alpha * sampled.theta3};
}

PolicyRecord augment_record(const PolicyRecord& rec, double delta) {
    auto v = rec.as_array();
    for (double& x : v) x *= (1.0 + delta);
    return PolicyRecord::from_array(v);
}

Dataset generate_dataset(const sim::ControllerParams& kstar, const sim::Plant& plant,
                         const SamplingConfig& sampling, double alpha, const Augmentation& aug,
                         std::uint64_t seed) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw DatasetError("learning rate alpha must lie in (0, 1]");
    kstar.validate();
    sampling.sim.validate();
    const std::array<double, 3> centre{kstar.theta1, kstar.theta2, kstar.theta3};
    for (int i = 0; i < 3; ++i)
        if (!(centre[i] > 0.0) || !(sampling.lower_factor[i] > 0.0) ||
            !(sampling.upper_factor[i] >= sampling.lower_factor[i]))
            throw DatasetError("log-uniform sampling needs positive K* and an ordered box");

    {
        const auto expert = sim::closed_loop_step(plant, kstar, sampling.ystar, sampling.sim);
        if (expert.diverged) throw DatasetError("expert gains K* diverge on this plant");
    }

    // Draw every candidate up front so the result does not depend on scheduling.
    std::mt19937_64 rng(seed);
    std::vector<sim::ControllerParams> candidates(sampling.samples);
    for (auto& k : candidates) {
        std::array<double, 3> g{};
        for (int i = 0; i < 3; ++i) {
            std::uniform_real_distribution<double> d(std::log(centre[i] * sampling.lower_factor[i]),
                                                     std::log(centre[i] * sampling.upper_factor[i]));
            g[i] = std::exp(d(rng));
        }
        k = {g[0], g[1], g[2], kstar.filterN};
    }

    enum class Outcome { Valid, Diverged, NoRise };
    std::vector<Outcome> outcome(candidates.size(), Outcome::NoRise);
    std::vector<metrics::PerfIndicators> indicators(candidates.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < candidates.size(); i = next++) {
            const auto traj = sim::closed_loop_step(plant, candidates[i], sampling.ystar, sampling.sim);
            if (traj.diverged) {
                outcome[i] = Outcome::Diverged;
                continue;
            }
            try {
                indicators[i] = metrics::compute_indicators(traj, sampling.ystar).indicators;
                outcome[i] = Outcome::Valid;
            } catch (const metrics::MetricsError&) {
                outcome[i] = Outcome::NoRise;
            }
        }
    };
    const unsigned threads = std::max(1u, std::min(8u, std::thread::hardware_concurrency()));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    Dataset ds;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        switch (outcome[i]) {
            case Outcome::Diverged:
                ++ds.diverged;
                break;
            case Outcome::NoRise:
                ++ds.no_rise;
                break;
            case Outcome::Valid:
                ds.records.push_back({indicators[i], make_label(kstar, candidates[i], alpha)});
                ds.sampled_gains.push_back(candidates[i]);
                break;
        }
    }
    ds.base_count = ds.records.size();
    if (ds.base_count < sampling.min_valid) {
        throw DatasetError("dataset generation produced " + std::to_string(ds.base_count) +
                           " valid records out of " + std::to_string(sampling.samples) + " (" +
                           std::to_string(ds.diverged) + " diverged, " + std::to_string(ds.no_rise) +
                           " without rise); need at least " + std::to_string(sampling.min_valid));
    }

    std::uniform_real_distribution<double> noise(-aug.noise, aug.noise);
    for (std::size_t i = 0; i < ds.base_count; ++i)
        for (std::size_t c = 0; c < aug.copies; ++c) ds.records.push_back(augment_record(ds.records[i], noise(rng)));
    return ds;
}

NormStats fit_norm(const std::vector<PolicyRecord>& records) {
    if (records.empty()) throw DatasetError("cannot fit normalization on an empty dataset");
    NormStats stats;
    const double n = static_cast<double>(records.size());
    for (const auto& r : records) {
        const auto v = r.as_array();
        for (int i = 0; i < 7; ++i) stats.mean[i] += v[i] / n;
    }
    std::array<double, 7> var{};
    for (const auto& r : records) {
        const auto v = r.as_array();
        for (int i = 0; i < 7; ++i) var[i] += (v[i] - stats.mean[i]) * (v[i] - stats.mean[i]) / n;
    }
    for (int i = 0; i < 7; ++i) {
        const double sd = std::sqrt(var[i]);
        stats.scale[i] = sd > 1e-12 * std::max(1.0, std::abs(stats.mean[i])) ? sd : 1.0;
    }
    return stats;
}

std::vector<PolicyRecord> normalize(const std::vector<PolicyRecord>& records, const NormStats& stats) {
    if (records.empty()) throw DatasetError("cannot normalize an empty dataset");
    std::vector<PolicyRecord> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        auto v = r.as_array();
        for (int i = 0; i < 7; ++i) v[i] = (v[i] - stats.mean[i]) / stats.scale[i];
        out.push_back(PolicyRecord::from_array(v));
    }
    return out;
}

std::vector<PolicyRecord> denormalize(const std::vector<PolicyRecord>& records, const NormStats& stats) {
    std::vector<PolicyRecord> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        auto v = r.as_array();
        for (int i = 0; i < 7; ++i) v[i] = v[i] * stats.scale[i] + stats.mean[i];
        out.push_back(PolicyRecord::from_array(v));
    }
    return out;
}

void PolicyModel::validate() const {
    const auto& sizes = net.layer_sizes();
    if (sizes.size() < 2 || sizes.front() != 4 || sizes.back() != 3)
        throw std::invalid_argument("policy network must map 4 indicators to 3 increments");
    if (net.weights().size() + 1 != sizes.size()) throw std::invalid_argument("layer count mismatch");
    for (std::size_t l = 0; l < net.weights().size(); ++l) {
        if (net.weights()[l].rows() != sizes[l + 1] || net.weights()[l].cols() != sizes[l] ||
            net.biases()[l].size() != sizes[l + 1])
            throw std::invalid_argument("layer " + std::to_string(l) + " dimensions do not chain");
    }
    if (!net.all_finite()) throw std::invalid_argument("policy network has non-finite weights");
    for (double s : norm.scale)
        if (!(s > 0.0)) throw std::invalid_argument("normalization scales must be positive");
}

PolicyModel train(const std::vector<PolicyRecord>& records, const Architecture& arch,
                  const TrainHyper& hyper, std::uint64_t seed) {
    if (records.size() < kMinTrainingRecords)
        throw DatasetError("training needs at least " + std::to_string(kMinTrainingRecords) +
                           " records, got " + std::to_string(records.size()));
    if (hyper.epochs < 1 || hyper.batch < 1 || !(hyper.learning_rate > 0.0))
        throw std::invalid_argument("invalid training hyperparameters");

    std::mt19937_64 rng(seed);
    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_val = static_cast<std::size_t>(std::floor(hyper.validation_fraction * records.size()));
    std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<long>(n_val));
    std::vector<std::size_t> train_idx(order.begin() + static_cast<long>(n_val), order.end());

    std::vector<PolicyRecord> train_set;
    for (auto i : train_idx) train_set.push_back(records[i]);

    PolicyModel model;
    model.norm = fit_norm(train_set);
    const auto normed = normalize(records, model.norm);

    std::vector<int> sizes{4};
    sizes.insert(sizes.end(), arch.hidden.begin(), arch.hidden.end());
    sizes.push_back(3);
    model.net = Mlp(sizes, seed);
    AdamOptimizer adam(model.net);

    const Eigen::MatrixXd x_train = input_matrix(normed, train_idx);
    const Eigen::MatrixXd y_train = label_matrix(normed, train_idx);

    std::vector<std::size_t> perm(train_idx.size());
    std::iota(perm.begin(), perm.end(), 0);
    Mlp::Gradient grad;
    double lr = hyper.learning_rate;
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        std::shuffle(perm.begin(), perm.end(), rng);
        for (std::size_t start = 0; start < perm.size(); start += static_cast<std::size_t>(hyper.batch)) {
            const std::size_t stop = std::min(perm.size(), start + static_cast<std::size_t>(hyper.batch));
            const auto cols = static_cast<Eigen::Index>(stop - start);
            Eigen::MatrixXd xb(4, cols), yb(3, cols);
            for (std::size_t j = start; j < stop; ++j) {
                xb.col(static_cast<Eigen::Index>(j - start)) = x_train.col(static_cast<Eigen::Index>(perm[j]));
                yb.col(static_cast<Eigen::Index>(j - start)) = y_train.col(static_cast<Eigen::Index>(perm[j]));
            }
            const double batch_loss = model.net.loss_and_gradient(xb, yb, grad);
            if (!std::isfinite(batch_loss))
                throw TrainingError("non-finite loss at epoch " + std::to_string(epoch), epoch);
            adam.step(model.net, grad, lr);
        }
        const double epoch_loss = model.net.loss(x_train, y_train);
        if (!std::isfinite(epoch_loss))
            throw TrainingError("non-finite loss at epoch " + std::to_string(epoch), epoch);
        model.meta.loss_history.push_back(epoch_loss);
        lr *= hyper.lr_decay;
    }

    model.meta.seed = seed;
    model.meta.hyper = hyper;
    model.meta.records = records.size();
    model.meta.dataset_hash = dataset_hash(records);
    model.meta.train_loss = model.meta.loss_history.back();
    model.meta.validation_loss =
        val_idx.empty() ? model.meta.train_loss
                        : model.net.loss(input_matrix(normed, val_idx), label_matrix(normed, val_idx));
    return model;
}

Increment predict(const PolicyModel& model, const metrics::PerfIndicators& ind) {
    const auto v = ind.as_array();
    Eigen::MatrixXd x(4, 1);
    for (int i = 0; i < 4; ++i) {
        if (!std::isfinite(v[i])) throw std::invalid_argument("indicators must be finite for prediction");
        x(i, 0) = (v[i] - model.norm.mean[i]) / model.norm.scale[i];
    }
    const Eigen::MatrixXd out = model.net.forward(x);
    Increment dk{};
    for (int i = 0; i < 3; ++i) dk[i] = out(i, 0) * model.norm.scale[4 + i] + model.norm.mean[4 + i];
    return dk;
}

double evaluate_mse(const PolicyModel& model, const std::vector<PolicyRecord>& records) {
    std::vector<std::size_t> idx(records.size());
    std::iota(idx.begin(), idx.end(), 0);
    const auto normed = normalize(records, model.norm);
    return model.net.loss(input_matrix(normed, idx), label_matrix(normed, idx));
}

void ClampLimits::validate() const {
    for (double m : max_increment)
        if (!(m > 0.0)) throw std::invalid_argument("clamp maxima must be strictly positive");
    if (min_gain && max_gain)
        for (int i = 0; i < 3; ++i)
            if ((*min_gain)[i] > (*max_gain)[i]) throw std::invalid_argument("gain box is empty");
}

ClampResult clamp_update(const Increment& raw, const ClampLimits& limits,
                         const sim::ControllerParams& current) {
    limits.validate();
    const std::array<double, 3> gains{current.theta1, current.theta2, current.theta3};
    ClampResult out;
    for (int i = 0; i < 3; ++i) {
        double dk = std::clamp(raw[i], -limits.max_increment[i], limits.max_increment[i]);
        if (dk != raw[i]) ++out.clip_events;
        const double proposed = gains[i] + dk;
        double bounded = proposed;
        if (limits.min_gain) bounded = std::max(bounded, (*limits.min_gain)[i]);
        if (limits.max_gain) bounded = std::min(bounded, (*limits.max_gain)[i]);
        if (bounded != proposed) {
            ++out.clip_events;
            dk = bounded - gains[i];
            // Rounding in the subtraction can land a ulp outside the box.
            if (limits.min_gain)
                while (gains[i] + dk < (*limits.min_gain)[i]) dk = std::nextafter(dk, INFINITY);
            if (limits.max_gain)
                while (gains[i] + dk > (*limits.max_gain)[i]) dk = std::nextafter(dk, -INFINITY);
        }
        out.dk[i] = dk;
    }
    return out;
}

nlohmann::json to_json(const PolicyModel& model) {
    using nlohmann::json;
    json layers = json::array();
    for (std::size_t l = 0; l < model.net.weights().size(); ++l) {
        const auto& w = model.net.weights()[l];
        std::vector<double> row_major;
        row_major.reserve(static_cast<std::size_t>(w.size()));
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) row_major.push_back(w(r, c));
        const auto& b = model.net.biases()[l];
        layers.push_back({{"rows", w.rows()},
                          {"cols", w.cols()},
                          {"weights", row_major},
                          {"bias", std::vector<double>(b.data(), b.data() + b.size())}});
    }
    const auto& m = model.meta;
    return {{"format_version", PolicyModel::kFormatVersion},
            {"layer_sizes", model.net.layer_sizes()},
            {"activation", "tanh"},
            {"output_activation", "linear"},
            {"layers", layers},
            {"norm", {{"mean", model.norm.mean}, {"scale", model.norm.scale}}},
            {"metadata",
             {{"seed", m.seed},
              {"train_loss", m.train_loss},
              {"validation_loss", m.validation_loss},
              {"dataset_hash", m.dataset_hash},
              {"records", m.records},
              {"epochs", m.hyper.epochs},
              {"batch", m.hyper.batch},
              {"learning_rate", m.hyper.learning_rate},
              {"lr_decay", m.hyper.lr_decay},
              {"validation_fraction", m.hyper.validation_fraction},
              {"loss_history", m.loss_history}}}};
}

PolicyModel model_from_json(const nlohmann::json& doc) {
    if (doc.value("format_version", -1) != PolicyModel::kFormatVersion)
        throw std::invalid_argument("unsupported policy model format version");
    if (doc.value("activation", "") != "tanh")
        throw std::invalid_argument("unsupported activation '" + doc.value("activation", "") + "'");

    PolicyModel model;
    const auto sizes = doc.at("layer_sizes").get<std::vector<int>>();
    model.net = Mlp(sizes, 0);
    const auto& layers = doc.at("layers");
    if (layers.size() + 1 != sizes.size()) throw std::invalid_argument("layer count mismatch in model file");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto rows = layers[l].at("rows").get<Eigen::Index>();
        const auto cols = layers[l].at("cols").get<Eigen::Index>();
        const auto w = layers[l].at("weights").get<std::vector<double>>();
        const auto b = layers[l].at("bias").get<std::vector<double>>();
        if (rows != sizes[l + 1] || cols != sizes[l] || static_cast<Eigen::Index>(w.size()) != rows * cols ||
            static_cast<Eigen::Index>(b.size()) != rows)
            throw std::invalid_argument("layer " + std::to_string(l) + " has inconsistent dimensions");
        auto& W = model.net.weights()[l];
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) W(r, c) = w[static_cast<std::size_t>(r * cols + c)];
        model.net.biases()[l] = Eigen::Map<const Eigen::VectorXd>(b.data(), rows);
    }
    model.norm.mean = doc.at("norm").at("mean").get<std::array<double, 7>>();
    model.norm.scale = doc.at("norm").at("scale").get<std::array<double, 7>>();

    const auto& meta = doc.at("metadata");
    model.meta.seed = meta.at("seed").get<std::uint64_t>();
    model.meta.train_loss = meta.at("train_loss").get<double>();
    model.meta.validation_loss = meta.at("validation_loss").get<double>();
    model.meta.dataset_hash = meta.at("dataset_hash").get<std::string>();
    model.meta.records = meta.at("records").get<std::size_t>();
    model.meta.hyper.epochs = meta.at("epochs").get<int>();
    model.meta.hyper.batch = meta.at("batch").get<int>();
    model.meta.hyper.learning_rate = meta.at("learning_rate").get<double>();
    model.meta.hyper.lr_decay = meta.at("lr_decay").get<double>();
    model.meta.hyper.validation_fraction = meta.at("validation_fraction").get<double>();
    model.meta.loss_history = meta.value("loss_history", std::vector<double>{});
    model.validate();
    return model;
}

}  // namespace selftune::policy
