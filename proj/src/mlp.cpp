#include "mecsched/mlp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

namespace mecsched {

Activation parse_activation(const std::string& name) {
    if (name == "relu") return Activation::relu;
    if (name == "tanh") return Activation::tanh;
    throw std::invalid_argument("unknown activation '" + name + "'");
}

std::string to_string(Activation activation) {
    return activation == Activation::relu ? "relu" : "tanh";
}

namespace {

void apply_activation(Activation activation, Eigen::MatrixXd& values) {
    if (activation == Activation::relu) {
        values = values.cwiseMax(0.0);
    } else {
        values = values.array().tanh().matrix();
    }
}

// Derivative expressed through the pre-activation z and activation h.
Eigen::MatrixXd activation_derivative(Activation activation, const Eigen::MatrixXd& pre,
                                      const Eigen::MatrixXd& post) {
    if (activation == Activation::relu) {
        return (pre.array() > 0.0).cast<double>().matrix();
    }
    return (1.0 - post.array().square()).matrix();
}

void check_sizes(const std::vector<int>& sizes) {
    if (sizes.size() < 2) throw std::invalid_argument("an MLP needs at least input and output sizes");
    for (int size : sizes) {
        if (size < 1) throw std::invalid_argument("layer sizes must be positive");
    }
}

}  // namespace

Mlp::Mlp(std::vector<int> layer_sizes, Activation activation)
    : sizes_(std::move(layer_sizes)), activation_(activation) {
    check_sizes(sizes_);
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        layers_.push_back({Eigen::MatrixXd::Zero(sizes_[l + 1], sizes_[l]),
                           Eigen::VectorXd::Zero(sizes_[l + 1])});
    }
}

Mlp Mlp::random(std::vector<int> layer_sizes, Activation activation, Rng& rng) {
    Mlp net(std::move(layer_sizes), activation);
    for (auto& layer : net.layers_) {
        const double limit = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
        // column-major fill order is part of the seeded contract
        for (Eigen::Index i = 0; i < layer.weight.size(); ++i) {
            layer.weight.data()[i] = rng.uniform_symmetric(limit);
        }
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i) {
            layer.bias[i] = rng.uniform_symmetric(limit);
        }
    }
    return net;
}

Eigen::VectorXd Mlp::forward(std::span<const double> input) const {
    if (static_cast<int>(input.size()) != input_size()) {
        throw std::invalid_argument("input has dimension " + std::to_string(input.size()) +
                                    ", network expects " + std::to_string(input_size()));
    }
    Eigen::VectorXd h = Eigen::Map<const Eigen::VectorXd>(input.data(), input_size());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        Eigen::VectorXd z = layers_[l].weight * h + layers_[l].bias;
        if (l + 1 < layers_.size()) {
            if (activation_ == Activation::relu) {
                h = z.cwiseMax(0.0);
            } else {
                h = z.array().tanh().matrix();
            }
        } else {
            h = std::move(z);
        }
    }
    return h;
}

Eigen::MatrixXd Mlp::forward_batch(const Eigen::MatrixXd& inputs) const {
    if (inputs.rows() != input_size()) {
        throw std::invalid_argument("batch rows do not match the network input size");
    }
    Eigen::MatrixXd h = inputs;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        Eigen::MatrixXd z = layers_[l].weight * h;
        z.colwise() += layers_[l].bias;
        if (l + 1 < layers_.size()) apply_activation(activation_, z);
        h = std::move(z);
    }
    return h;
}

std::size_t Mlp::parameter_count() const {
    std::size_t count = 0;
    for (const auto& layer : layers_) {
        count += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
    }
    return count;
}

bool Mlp::all_finite() const {
    for (const auto& layer : layers_) {
        if (!layer.weight.allFinite() || !layer.bias.allFinite()) return false;
    }
    return true;
}

bool Mlp::same_architecture(const Mlp& other) const {
    return sizes_ == other.sizes_ && activation_ == other.activation_;
}

std::uint64_t Mlp::checksum() const {
    std::uint64_t hash = 1469598103934665603ULL;
    auto mix = [&hash](const double* data, Eigen::Index count) {
        const auto* bytes = reinterpret_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < static_cast<std::size_t>(count) * sizeof(double); ++i) {
            hash ^= bytes[i];
            hash *= 1099511628211ULL;
        }
    };
    for (const auto& layer : layers_) {
        mix(layer.weight.data(), layer.weight.size());
        mix(layer.bias.data(), layer.bias.size());
    }
    return hash;
}

namespace {

constexpr std::uint32_t kWeightsMagic = 0x4d4c5057;  // "WPLM" little-endian
constexpr std::uint32_t kWeightsVersion = 1;

template <typename T>
void write_le(std::ostream& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
    unsigned char bytes[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
        throw std::runtime_error("weights file truncated");
    }
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

}  // namespace

// Layout: magic u32, version u32, activation u32, layer count u32, sizes u32[],
// then per layer the weights row-major followed by the biases, all float64.
void Mlp::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    write_le<std::uint32_t>(out, kWeightsMagic);
    write_le<std::uint32_t>(out, kWeightsVersion);
    write_le<std::uint32_t>(out, activation_ == Activation::relu ? 0u : 1u);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(sizes_.size()));
    for (int size : sizes_) write_le<std::uint32_t>(out, static_cast<std::uint32_t>(size));
    for (const auto& layer : layers_) {
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) write_le<double>(out, layer.weight(r, c));
        }
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r) write_le<double>(out, layer.bias[r]);
    }
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

Mlp Mlp::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open weights file " + path.string());
    if (read_le<std::uint32_t>(in) != kWeightsMagic) {
        throw std::runtime_error(path.string() + " is not a weights file");
    }
    if (const auto version = read_le<std::uint32_t>(in); version != kWeightsVersion) {
        throw std::runtime_error("unsupported weights version " + std::to_string(version));
    }
    const auto activation = read_le<std::uint32_t>(in) == 0u ? Activation::relu : Activation::tanh;
    const auto count = read_le<std::uint32_t>(in);
    if (count < 2 || count > 64) throw std::runtime_error("corrupt layer count in " + path.string());
    std::vector<int> sizes;
    for (std::uint32_t i = 0; i < count; ++i) sizes.push_back(static_cast<int>(read_le<std::uint32_t>(in)));
    Mlp net(sizes, activation);
    for (auto& layer : net.layers_) {
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = read_le<double>(in);
        }
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias[r] = read_le<double>(in);
    }
    return net;
}

MlpGradients::MlpGradients(const Mlp& net) {
    for (const auto& layer : net.layers()) {
        layers.push_back({Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()),
                          Eigen::VectorXd::Zero(layer.bias.size())});
    }
}

namespace {

void check_batch(const Mlp& net, const QBatch& batch) {
    const auto n = batch.size();
    if (n == 0) throw std::invalid_argument("empty training batch");
    if (batch.targets.size() != n || batch.weights.size() != n ||
        static_cast<std::size_t>(batch.inputs.cols()) != n) {
        throw std::invalid_argument("inconsistent batch field sizes");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (batch.actions[i] < 0 || batch.actions[i] >= net.output_size()) {
            throw std::invalid_argument("batch action out of range");
        }
        if (batch.weights[i] < 0.0) throw std::invalid_argument("negative sample weight");
    }
}

double weight_total(const QBatch& batch) {
    const double total = std::accumulate(batch.weights.begin(), batch.weights.end(), 0.0);
    if (!(total > 0.0)) throw std::invalid_argument("sample weights sum to zero");
    return total;
}

}  // namespace

double batch_loss(const Mlp& net, const QBatch& batch) {
    check_batch(net, batch);
    const double total = weight_total(batch);
    const Eigen::MatrixXd q = net.forward_batch(batch.inputs);
    double loss = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const double diff = q(batch.actions[i], static_cast<Eigen::Index>(i)) - batch.targets[i];
        loss += batch.weights[i] * diff * diff;
    }
    return loss / total;
}

double loss_and_gradients(const Mlp& net, const QBatch& batch, MlpGradients& grads) {
    check_batch(net, batch);
    const double total = weight_total(batch);
    const auto& layers = net.layers();
    const std::size_t depth = layers.size();
    const auto n = static_cast<Eigen::Index>(batch.size());

    // activations[0] is the input; pre[l] is the pre-activation of layer l
    std::vector<Eigen::MatrixXd> activations(depth + 1);
    std::vector<Eigen::MatrixXd> pre(depth);
    activations[0] = batch.inputs;
    for (std::size_t l = 0; l < depth; ++l) {
        pre[l] = layers[l].weight * activations[l];
        pre[l].colwise() += layers[l].bias;
        activations[l + 1] = pre[l];
        if (l + 1 < depth) apply_activation(net.activation(), activations[l + 1]);
    }

    const Eigen::MatrixXd& q = activations[depth];
    Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(q.rows(), n);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        const double diff = q(batch.actions[idx], i) - batch.targets[idx];
        loss += batch.weights[idx] * diff * diff;
        delta(batch.actions[idx], i) = 2.0 * batch.weights[idx] * diff / total;
    }
    loss /= total;

    for (std::size_t l = depth; l-- > 0;) {
        grads.layers[l].weight.noalias() = delta * activations[l].transpose();
        grads.layers[l].bias = delta.rowwise().sum();
        if (l > 0) {
            Eigen::MatrixXd back = layers[l].weight.transpose() * delta;
            delta = back.cwiseProduct(
                activation_derivative(net.activation(), pre[l - 1], activations[l]));
        }
    }
    return loss;
}

Adam::Adam(const Mlp& net, AdamConfig config) : config_(config) {
    MlpGradients zeros(net);
    first_moment_ = zeros.layers;
    second_moment_ = zeros.layers;
}

void Adam::step(Mlp& net, const MlpGradients& grads) {
    ++steps_;
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double correction1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
    const double correction2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
    const double lr = config_.learning_rate;
    const double eps = config_.epsilon;

    auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
        m = b1 * m + (1.0 - b1) * grad;
        v = b2 * v + (1.0 - b2) * grad.cwiseProduct(grad);
        param.array() -= lr * (m.array() / correction1) /
                         ((v.array() / correction2).sqrt() + eps);
    };
    auto& layers = net.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        update(layers[l].weight, grads.layers[l].weight, first_moment_[l].weight,
               second_moment_[l].weight);
        update(layers[l].bias, grads.layers[l].bias, first_moment_[l].bias, second_moment_[l].bias);
    }
}

double backward_and_step(Mlp& net, Adam& adam, const QBatch& batch) {
    MlpGradients grads(net);
    return backward_and_step(net, adam, batch, grads);
}

double backward_and_step(Mlp& net, Adam& adam, const QBatch& batch, MlpGradients& grads) {
    const double loss = loss_and_gradients(net, batch, grads);
    if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "non-finite loss " << loss << " on a batch of " << batch.size()
            << " samples after " << adam.steps() << " Adam steps; parameters finite: "
            << (net.all_finite() ? "yes" : "no");
        throw NumericalError(msg.str());
    }
    adam.step(net, grads);
    return loss;
}

void soft_update(Mlp& target, const Mlp& policy, double tau) {
    if (!target.same_architecture(policy)) {
        throw std::invalid_argument("soft_update between networks of different architecture");
    }
    auto& dst = target.layers();
    const auto& src = policy.layers();
    for (std::size_t l = 0; l < dst.size(); ++l) {
        dst[l].weight = tau * src[l].weight + (1.0 - tau) * dst[l].weight;
        dst[l].bias = tau * src[l].bias + (1.0 - tau) * dst[l].bias;
    }
}

}  // namespace mecsched
