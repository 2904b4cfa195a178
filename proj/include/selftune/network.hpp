#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace selftune::policy {

/// Fully connected network: tanh on hidden layers, identity on the output.
/// Inputs and outputs are column-major batches (features x samples).
class Mlp {
   public:
    Mlp() = default;
    Mlp(std::vector<int> layer_sizes, std::uint64_t seed);

    const std::vector<int>& layer_sizes() const { return sizes_; }
    std::vector<Eigen::MatrixXd>& weights() { return weights_; }
    const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }
    std::vector<Eigen::VectorXd>& biases() { return biases_; }
    const std::vector<Eigen::VectorXd>& biases() const { return biases_; }

    Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;

    struct Gradient {
        std::vector<Eigen::MatrixXd> weights;
        std::vector<Eigen::VectorXd> biases;
    };
    /// Mean over all entries of (forward(x) - y)^2 and its gradient.
    double loss_and_gradient(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, Gradient& grad) const;
    double loss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) const;

    std::size_t parameter_count() const;
    Eigen::VectorXd parameters() const;
    void set_parameters(const Eigen::VectorXd& flat);
    static Eigen::VectorXd flatten(const Gradient& g);

    bool all_finite() const;

   private:
    std::vector<int> sizes_;
    std::vector<Eigen::MatrixXd> weights_;  // out x in
    std::vector<Eigen::VectorXd> biases_;
};

/// Adam step sizes per parameter.
class AdamOptimizer {
   public:
    AdamOptimizer(const Mlp& net, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    void step(Mlp& net, const Mlp::Gradient& grad, double learning_rate);

   private:
    double beta1_, beta2_, eps_;
    long t_ = 0;
    Mlp::Gradient m_, v_;
};

}  // namespace selftune::policy
