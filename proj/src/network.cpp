#include "selftune/network.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace selftune::policy {

Mlp::Mlp(std::vector<int> layer_sizes, std::uint64_t seed) : sizes_(std::move(layer_sizes)) {
    if (sizes_.size() < 2) throw std::invalid_argument("network needs at least input and output layers");
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        const int in = sizes_[l];
        const int out = sizes_[l + 1];
        if (in <= 0 || out <= 0) throw std::invalid_argument("layer sizes must be positive");
        // Glorot uniform
        const double limit = std::sqrt(6.0 / (in + out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        Eigen::MatrixXd w(out, in);
        for (int r = 0; r < out; ++r)
            for (int c = 0; c < in; ++c) w(r, c) = dist(rng);
        weights_.push_back(std::move(w));
        biases_.push_back(Eigen::VectorXd::Zero(out));
    }
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd a = x;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        Eigen::MatrixXd z = weights_[l] * a;
        z.colwise() += biases_[l];
        a = (l + 1 < weights_.size()) ? Eigen::MatrixXd(z.array().tanh()) : z;
    }
    return a;
}

double Mlp::loss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) const {
    return (forward(x) - y).squaredNorm() / static_cast<double>(y.size());
}

double Mlp::loss_and_gradient(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, Gradient& grad) const {
    const std::size_t layers = weights_.size();
    std::vector<Eigen::MatrixXd> acts;
    acts.reserve(layers + 1);
    acts.push_back(x);
    for (std::size_t l = 0; l < layers; ++l) {
        Eigen::MatrixXd z = weights_[l] * acts.back();
        z.colwise() += biases_[l];
        acts.push_back(l + 1 < layers ? Eigen::MatrixXd(z.array().tanh()) : z);
    }

    const double n = static_cast<double>(y.size());
    Eigen::MatrixXd delta = acts.back() - y;
    const double value = delta.squaredNorm() / n;
    delta *= 2.0 / n;

    grad.weights.resize(layers);
    grad.biases.resize(layers);
    for (std::size_t l = layers; l-- > 0;) {
        grad.weights[l] = delta * acts[l].transpose();
        grad.biases[l] = delta.rowwise().sum();
        if (l > 0) {
            // tanh'(z) = 1 - a^2
            delta = (weights_[l].transpose() * delta).array() * (1.0 - acts[l].array().square());
        }
    }
    return value;
}

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) n += weights_[l].size() + biases_[l].size();
    return n;
}

Eigen::VectorXd Mlp::parameters() const {
    Eigen::VectorXd flat(parameter_count());
    Eigen::Index at = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        flat.segment(at, weights_[l].size()) = weights_[l].reshaped();
        at += weights_[l].size();
        flat.segment(at, biases_[l].size()) = biases_[l];
        at += biases_[l].size();
    }
    return flat;
}

void Mlp::set_parameters(const Eigen::VectorXd& flat) {
    if (static_cast<std::size_t>(flat.size()) != parameter_count())
        throw std::invalid_argument("parameter vector has wrong length");
    Eigen::Index at = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        weights_[l].reshaped() = flat.segment(at, weights_[l].size());
        at += weights_[l].size();
        biases_[l] = flat.segment(at, biases_[l].size());
        at += biases_[l].size();
    }
}

Eigen::VectorXd Mlp::flatten(const Gradient& g) {
    Eigen::Index n = 0;
    for (std::size_t l = 0; l < g.weights.size(); ++l) n += g.weights[l].size() + g.biases[l].size();
    Eigen::VectorXd flat(n);
    Eigen::Index at = 0;
    for (std::size_t l = 0; l < g.weights.size(); ++l) {
        flat.segment(at, g.weights[l].size()) = g.weights[l].reshaped();
        at += g.weights[l].size();
        flat.segment(at, g.biases[l].size()) = g.biases[l];
        at += g.biases[l].size();
    }
    return flat;
}

bool Mlp::all_finite() const {
    for (std::size_t l = 0; l < weights_.size(); ++l)
        if (!weights_[l].allFinite() || !biases_[l].allFinite()) return false;
    return true;
}

AdamOptimizer::AdamOptimizer(const Mlp& net, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (std::size_t l = 0; l < net.weights().size(); ++l) {
        m_.weights.push_back(Eigen::MatrixXd::Zero(net.weights()[l].rows(), net.weights()[l].cols()));
        v_.weights.push_back(m_.weights.back());
        m_.biases.push_back(Eigen::VectorXd::Zero(net.biases()[l].size()));
        v_.biases.push_back(m_.biases.back());
    }
}

void AdamOptimizer::step(Mlp& net, const Mlp::Gradient& grad, double learning_rate) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
        m = beta1_ * m + (1.0 - beta1_) * g;
        v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
        param.array() -= learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
    };
    for (std::size_t l = 0; l < net.weights().size(); ++l) {
        update(net.weights()[l], grad.weights[l], m_.weights[l], v_.weights[l]);
        update(net.biases()[l], grad.biases[l], m_.biases[l], v_.biases[l]);
    }
}

}  // namespace selftune::policy
