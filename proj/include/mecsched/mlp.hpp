#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mecsched/random.hpp"

namespace mecsched {

enum class Activation { relu, tanh };

Activation parse_activation(const std::string& name);
std::string to_string(Activation activation);

struct DenseLayer {
    Eigen::MatrixXd weight;  ///< out x in
    Eigen::VectorXd bias;    ///< out
};

/// Feed-forward network with a linear output layer.
class Mlp {
public:
    /// Zero-initialised network with the given layer sizes (input first).
    Mlp(std::vector<int> layer_sizes, Activation activation);

    /// Fan-in scaled uniform initialisation: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    static Mlp random(std::vector<int> layer_sizes, Activation activation, Rng& rng);

    int input_size() const { return sizes_.front(); }
    int output_size() const { return sizes_.back(); }
    const std::vector<int>& layer_sizes() const { return sizes_; }
    Activation activation() const { return activation_; }

    std::vector<DenseLayer>& layers() { return layers_; }
    const std::vector<DenseLayer>& layers() const { return layers_; }

    /// Throws std::invalid_argument on an input of the wrong dimension.
    Eigen::VectorXd forward(std::span<const double> input) const;

    /// Column-per-sample batch forward pass.
    Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& inputs) const;

    std::size_t parameter_count() const;
    bool all_finite() const;
    bool same_architecture(const Mlp& other) const;

    /// FNV-1a over the raw parameter bytes; equal iff parameters are bit-identical.
    std::uint64_t checksum() const;

    /// Flat little-endian float64 parameter file with a layer-size header.
    void save(const std::filesystem::path& path) const;
    static Mlp load(const std::filesystem::path& path);

private:
    friend struct MlpGradients;
    std::vector<int> sizes_;
    Activation activation_;
    std::vector<DenseLayer> layers_;
};

/// Gradient storage shaped like the network.
struct MlpGradients {
    std::vector<DenseLayer> layers;

    explicit MlpGradients(const Mlp& net);
};

/// One regression batch on the Q-value of the selected action.
struct QBatch {
    Eigen::MatrixXd inputs;        ///< input_size x n
    std::vector<int> actions;      ///< n
    std::vector<double> targets;   ///< n
    std::vector<double> weights;   ///< n, non-negative

    std::size_t size() const { return actions.size(); }
};

/// Weighted squared error sum_i w_i (Q(x_i)[a_i] - y_i)^2 / sum_i w_i.
double batch_loss(const Mlp& net, const QBatch& batch);

/// Loss and its gradient with respect to every parameter.
double loss_and_gradients(const Mlp& net, const QBatch& batch, MlpGradients& grads);

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

class Adam {
public:
    Adam(const Mlp& net, AdamConfig config);

    void step(Mlp& net, const MlpGradients& grads);

    long steps() const { return steps_; }
    const AdamConfig& config() const { return config_; }

private:
    AdamConfig config_;
    std::vector<DenseLayer> first_moment_;
    std::vector<DenseLayer> second_moment_;
    long steps_ = 0;
};

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Computes the loss, applies one Adam step and returns the pre-step loss.
/// Throws NumericalError (without touching the parameters) on a non-finite loss.
double backward_and_step(Mlp& net, Adam& adam, const QBatch& batch);

/// Same, reusing caller-owned gradient storage shaped like `net`.
double backward_and_step(Mlp& net, Adam& adam, const QBatch& batch, MlpGradients& workspace);

/// target <- tau * policy + (1 - tau) * target, parameter-wise.
void soft_update(Mlp& target, const Mlp& policy, double tau);

}  // namespace mecsched
