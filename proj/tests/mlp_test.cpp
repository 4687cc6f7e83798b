#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "mecsched/mlp.hpp"

using namespace mecsched;

namespace {

// Straightforward per-sample forward pass used as an oracle for Mlp::forward.
Eigen::VectorXd reference_forward(const Mlp& net, const Eigen::VectorXd& x) {
    Eigen::VectorXd h = x;
    const auto& layers = net.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        Eigen::VectorXd z(layers[l].weight.rows());
        for (Eigen::Index r = 0; r < z.size(); ++r) {
            double acc = layers[l].bias[r];
            for (Eigen::Index c = 0; c < h.size(); ++c) acc += layers[l].weight(r, c) * h[c];
            z[r] = acc;
        }
        if (l + 1 < layers.size()) {
            for (Eigen::Index r = 0; r < z.size(); ++r) {
                z[r] = net.activation() == Activation::relu ? std::max(z[r], 0.0) : std::tanh(z[r]);
            }
        }
        h = z;
    }
    return h;
}

double& parameter(Mlp& net, std::size_t layer, bool bias, Eigen::Index r, Eigen::Index c) {
    auto& L = net.layers()[layer];
    return bias ? L.bias[r] : L.weight(r, c);
}

QBatch random_batch(const Mlp& net, Rng& rng, int n) {
    QBatch batch;
    batch.inputs.resize(net.input_size(), n);
    for (Eigen::Index i = 0; i < batch.inputs.size(); ++i) batch.inputs.data()[i] = rng.uniform_symmetric(1.0);
    for (int i = 0; i < n; ++i) {
        batch.actions.push_back(static_cast<int>(rng.uniform_int(0, net.output_size() - 1)));
        batch.targets.push_back(rng.uniform_symmetric(1.0));
        batch.weights.push_back(0.5 + rng.uniform());
    }
    return batch;
}

// Smallest |pre-activation| of any hidden unit over the batch; finite
// differences across a ReLU kink are meaningless.
double min_hidden_preactivation(const Mlp& net, const QBatch& batch) {
    double smallest = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < batch.inputs.cols(); ++i) {
        Eigen::VectorXd h = batch.inputs.col(i);
        for (std::size_t l = 0; l + 1 < net.layers().size(); ++l) {
            Eigen::VectorXd z = net.layers()[l].weight * h + net.layers()[l].bias;
            smallest = std::min(smallest, z.cwiseAbs().minCoeff());
            h = net.activation() == Activation::relu ? Eigen::VectorXd(z.cwiseMax(0.0))
                                                     : Eigen::VectorXd(z.array().tanh());
        }
    }
    return smallest;
}

}  // namespace

TEST_CASE("zero network outputs zeros") {
    Mlp net({4, 8, 3}, Activation::relu);
    const std::vector<double> x{1.0, -2.0, 3.0, 0.5};
    CHECK(net.forward(x).isZero());
    CHECK(net.parameter_count() == 4 * 8 + 8 + 8 * 3 + 3);
}

TEST_CASE("identity layer passes inputs through") {
    Mlp net({3, 3}, Activation::relu);
    net.layers()[0].weight.setIdentity();
    net.layers()[0].bias << 1.0, 0.0, -1.0;
    const std::vector<double> x{0.5, -0.25, 2.0};
    const Eigen::VectorXd y = net.forward(x);
    CHECK(y[0] == 1.5);
    CHECK(y[1] == -0.25);  // linear output layer, no clipping
    CHECK(y[2] == 1.0);
}

TEST_CASE("hand-computed two-layer forward") {
    Mlp net({2, 2, 1}, Activation::relu);
    net.layers()[0].weight << 1.0, -1.0, 2.0, 1.0;
    net.layers()[0].bias << 0.0, -5.0;
    net.layers()[1].weight << 3.0, 7.0;
    net.layers()[1].bias << 0.5;
    const std::vector<double> x{3.0, 1.0};
    // hidden = relu([2, 2]) ; out = 3*2 + 7*2 + 0.5
    CHECK(net.forward(x)[0] == doctest::Approx(20.5));
}

TEST_CASE("forward matches reference and batch forward") {
    for (Activation act : {Activation::relu, Activation::tanh}) {
        Rng rng(21);
        const Mlp net = Mlp::random({6, 16, 16, 4}, act, rng);
        Eigen::MatrixXd inputs(6, 9);
        for (Eigen::Index i = 0; i < inputs.size(); ++i) inputs.data()[i] = rng.uniform_symmetric(1.0);
        const Eigen::MatrixXd batch = net.forward_batch(inputs);
        for (Eigen::Index c = 0; c < inputs.cols(); ++c) {
            const Eigen::VectorXd x = inputs.col(c);
            const Eigen::VectorXd single = net.forward({x.data(), static_cast<std::size_t>(x.size())});
            const Eigen::VectorXd ref = reference_forward(net, x);
            for (Eigen::Index r = 0; r < 4; ++r) {
                CHECK(single[r] == doctest::Approx(ref[r]).epsilon(1e-12));
                CHECK(batch(r, c) == doctest::Approx(ref[r]).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("forward rejects wrong input size") {
    Mlp net({3, 2}, Activation::relu);
    const std::vector<double> x{1.0, 2.0};
    CHECK_THROWS_AS(net.forward(x), std::invalid_argument);
}

TEST_CASE("random init is bounded by fan-in and seeded") {
    Rng a(5);
    Rng b(5);
    const Mlp n1 = Mlp::random({60, 128, 11}, Activation::relu, a);
    const Mlp n2 = Mlp::random({60, 128, 11}, Activation::relu, b);
    CHECK(n1.checksum() == n2.checksum());
    CHECK(n1.layers()[0].weight.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(60.0));
    CHECK(n1.layers()[1].weight.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(128.0));
}

TEST_CASE("batch loss is the weighted mean squared error") {
    Mlp net({1, 2}, Activation::relu);
    net.layers()[0].weight << 1.0, 2.0;
    QBatch batch;
    batch.inputs.resize(1, 2);
    batch.inputs << 1.0, 3.0;
    batch.actions = {0, 1};
    batch.targets = {0.0, 4.0};
    batch.weights = {1.0, 3.0};
    // errors: 1 - 0 = 1 and 6 - 4 = 2 -> (1*1 + 3*4) / 4
    CHECK(batch_loss(net, batch) == doctest::Approx(13.0 / 4.0));
}

TEST_CASE("analytic gradients match central finite differences") {
    for (Activation act : {Activation::relu, Activation::tanh}) {
        CAPTURE(to_string(act));
        Rng rng(act == Activation::relu ? 101 : 202);
        int checked = 0;
        int attempts = 0;
        while (checked < 120 && attempts < 2000) {
            ++attempts;
            Mlp net = Mlp::random({5, 7, 6, 3}, act, rng);
            const QBatch batch = random_batch(net, rng, 4);
            if (act == Activation::relu && min_hidden_preactivation(net, batch) < 1e-3) continue;
            MlpGradients grads(net);
            loss_and_gradients(net, batch, grads);

            const auto layer = static_cast<std::size_t>(rng.uniform_int(0, 2));
            const bool bias = rng.bernoulli(0.3);
            const auto& L = net.layers()[layer];
            const auto r = static_cast<Eigen::Index>(rng.uniform_int(0, L.weight.rows() - 1));
            const auto c = static_cast<Eigen::Index>(rng.uniform_int(0, L.weight.cols() - 1));
            const double analytic = bias ? grads.layers[layer].bias[r] : grads.layers[layer].weight(r, c);

            const double h = 1e-6;
            double& p = parameter(net, layer, bias, r, c);
            const double saved = p;
            p = saved + h;
            const double up = batch_loss(net, batch);
            p = saved - h;
            const double down = batch_loss(net, batch);
            p = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double rel = std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
            CHECK(rel < 1e-4);
            ++checked;
        }
        CHECK(checked >= 100);
    }
}

TEST_CASE("first Adam step moves each parameter by lr against the gradient sign") {
    Rng rng(8);
    Mlp net = Mlp::random({3, 4, 2}, Activation::tanh, rng);
    const Mlp before = net;
    const QBatch batch = random_batch(net, rng, 5);
    MlpGradients grads(net);
    loss_and_gradients(net, batch, grads);

    Adam adam(net, AdamConfig{1e-3});
    adam.step(net, grads);
    CHECK(adam.steps() == 1);
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        const auto& g = grads.layers[l].weight;
        const auto& w0 = before.layers()[l].weight;
        const auto& w1 = net.layers()[l].weight;
        for (Eigen::Index i = 0; i < g.size(); ++i) {
            // m_hat = g, v_hat = g^2  ->  step = lr * g / (|g| + eps)
            const double gi = g.data()[i];
            const double expected = w0.data()[i] - 1e-3 * gi / (std::abs(gi) + 1e-8);
            CHECK(w1.data()[i] == doctest::Approx(expected).epsilon(1e-12));
        }
    }
}

TEST_CASE("second Adam step follows the bias-corrected moments") {
    Mlp net({1, 1}, Activation::relu);
    MlpGradients g1(net);
    MlpGradients g2(net);
    g1.layers[0].weight(0, 0) = 2.0;
    g2.layers[0].weight(0, 0) = -1.0;
    Adam adam(net, AdamConfig{0.1});
    adam.step(net, g1);
    const double after_first = net.layers()[0].weight(0, 0);
    adam.step(net, g2);
    const double m = (0.9 * 0.1 * 2.0 + 0.1 * -1.0) / (1.0 - 0.9 * 0.9);
    const double v = (0.999 * 0.001 * 4.0 + 0.001 * 1.0) / (1.0 - 0.999 * 0.999);
    CHECK(after_first == doctest::Approx(-0.1).epsilon(1e-9));
    CHECK(net.layers()[0].weight(0, 0) == doctest::Approx(after_first - 0.1 * m / (std::sqrt(v) + 1e-8)));
}

TEST_CASE("training reduces loss on a fixed batch") {
    Rng rng(17);
    Mlp net = Mlp::random({4, 16, 2}, Activation::relu, rng);
    const QBatch batch = random_batch(net, rng, 8);
    Adam adam(net, AdamConfig{1e-2});
    const double first = batch_loss(net, batch);
    for (int i = 0; i < 300; ++i) backward_and_step(net, adam, batch);
    CHECK(batch_loss(net, batch) < 0.1 * first);
}

TEST_CASE("soft update") {
    Rng rng(3);
    const Mlp policy = Mlp::random({3, 5, 2}, Activation::relu, rng);
    const Mlp original = Mlp::random({3, 5, 2}, Activation::relu, rng);

    Mlp target = original;
    soft_update(target, policy, 0.0);
    CHECK(target.checksum() == original.checksum());

    soft_update(target, policy, 1.0);
    CHECK(target.checksum() == policy.checksum());

    target = original;
    soft_update(target, policy, 0.005);
    for (std::size_t l = 0; l < target.layers().size(); ++l) {
        const Eigen::MatrixXd expected =
            0.005 * policy.layers()[l].weight + 0.995 * original.layers()[l].weight;
        CHECK((target.layers()[l].weight - expected).cwiseAbs().maxCoeff() < 1e-15);
    }

    Mlp other({3, 4, 2}, Activation::relu);
    CHECK_THROWS_AS(soft_update(other, policy, 0.5), std::invalid_argument);
}

TEST_CASE("weights round-trip through a file bit-exactly") {
    Rng rng(12);
    const Mlp net = Mlp::random({60, 128, 128, 11}, Activation::relu, rng);
    const auto path = std::filesystem::temp_directory_path() / "mecsched_mlp_roundtrip.bin";
    net.save(path);
    const Mlp loaded = Mlp::load(path);
    std::filesystem::remove(path);
    CHECK(loaded.same_architecture(net));
    CHECK(loaded.checksum() == net.checksum());
    CHECK(loaded.activation() == Activation::relu);
}

TEST_CASE("loading a missing or corrupt file throws") {
    const auto dir = std::filesystem::temp_directory_path();
    CHECK_THROWS(Mlp::load(dir / "mecsched_does_not_exist.bin"));
    const auto path = dir / "mecsched_corrupt.bin";
    {
        std::ofstream out(path, std::ios::binary);
        out << "not a weights file";
    }
    CHECK_THROWS(Mlp::load(path));
    std::filesystem::remove(path);
}

TEST_CASE("non-finite loss raises before any parameter changes") {
    Rng rng(2);
    Mlp net = Mlp::random({2, 3, 2}, Activation::relu, rng);
    Adam adam(net, AdamConfig{});
    QBatch batch;
    batch.inputs = Eigen::MatrixXd::Ones(2, 1);
    batch.actions = {0};
    batch.targets = {std::numeric_limits<double>::quiet_NaN()};
    batch.weights = {1.0};
    const auto before = net.checksum();
    CHECK_THROWS_AS(backward_and_step(net, adam, batch), NumericalError);
    CHECK(net.checksum() == before);
    CHECK(adam.steps() == 0);
}
