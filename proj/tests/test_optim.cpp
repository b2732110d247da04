#include <doctest.h>

#include <cmath>

#include "dreamkit/nn.hpp"
#include "dreamkit/optim.hpp"
#include "dreamkit/rng.hpp"
#include "oracles.hpp"

using namespace dreamkit;

TEST_SUITE_BEGIN("optim");

namespace {

// one scalar weight, bias removed from play by zero grads
nn::Network scalar_net(double w0) {
    Rng rng(0);
    auto net = nn::Network::build({nn::LayerSpec::dense(1, 1)}, {1},
                                  nn::InitSpec::kaiming(), rng);
    net.params().layers[0].find("w").value.data[0] = w0;
    net.params().layers[0].find("b").value.data[0] = 0.0;
    return net;
}

void set_grad(nn::Network& net, double g) {
    net.params().zero_grad();
    net.params().layers[0].find("w").grad.data[0] = g;
}

double weight(const nn::Network& net) {
    return net.params().layers[0].find("w").value.data[0];
}

}  // namespace

TEST_CASE("sgd zero gradient is a no-op") {
    auto net = scalar_net(1.5);
    auto opt = nn::OptimizerState::make(nn::OptKind::SGD, 0.1, net.params());
    set_grad(net, 0.0);
    nn::optimizer_step(opt, net.params());
    CHECK(weight(net) == 1.5);
    CHECK(opt.step == 1);
}

TEST_CASE("sgd analytic step") {
    auto net = scalar_net(1.0);
    auto opt = nn::OptimizerState::make(nn::OptKind::SGD, 0.1, net.params());
    set_grad(net, 2.0);
    nn::optimizer_step(opt, net.params());
    CHECK(weight(net) == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("adam first step matches the closed form") {
    auto net = scalar_net(0.0);
    auto opt = nn::OptimizerState::make(nn::OptKind::Adam, 0.1, net.params());
    set_grad(net, 1.0);
    nn::optimizer_step(opt, net.params());
    const double expected = -0.1 * 1.0 / (1.0 + 1e-8);
    CHECK(std::abs(weight(net) - expected) < 1e-12);
}

TEST_CASE("three optimizer steps match closed-form trajectories to 1e-12") {
    const std::vector<double> grads = {1.0, -0.5, 0.25};

    SUBCASE("sgd") {
        auto net = scalar_net(0.7);
        auto opt = nn::OptimizerState::make(nn::OptKind::SGD, 0.05, net.params());
        auto expect = oracles::sgd_trajectory(0.7, 0.05, grads);
        for (std::size_t t = 0; t < grads.size(); ++t) {
            set_grad(net, grads[t]);
            nn::optimizer_step(opt, net.params());
            CHECK(std::abs(weight(net) - expect[t]) < 1e-12);
        }
    }
    SUBCASE("adam") {
        auto net = scalar_net(0.7);
        auto opt = nn::OptimizerState::make(nn::OptKind::Adam, 0.1, net.params());
        auto expect = oracles::adam_trajectory(0.7, 0.1, 0.9, 0.999, 1e-8, grads);
        for (std::size_t t = 0; t < grads.size(); ++t) {
            set_grad(net, grads[t]);
            nn::optimizer_step(opt, net.params());
            CHECK(std::abs(weight(net) - expect[t]) < 1e-12);
        }
    }
    SUBCASE("rmsprop") {
        auto net = scalar_net(0.7);
        auto opt = nn::OptimizerState::make(nn::OptKind::RMSprop, 0.01, net.params());
        auto expect = oracles::rmsprop_trajectory(0.7, 0.01, 0.99, 1e-8, grads);
        for (std::size_t t = 0; t < grads.size(); ++t) {
            set_grad(net, grads[t]);
            nn::optimizer_step(opt, net.params());
            CHECK(std::abs(weight(net) - expect[t]) < 1e-12);
        }
    }
}

TEST_CASE("lr zero leaves parameters bit-identical") {
    for (auto kind : {nn::OptKind::SGD, nn::OptKind::Adam, nn::OptKind::RMSprop}) {
        Rng rng(33);
        auto net = nn::Network::build(
            {nn::LayerSpec::dense(4, 4), nn::LayerSpec::activation(nn::Activation::Tanh),
             nn::LayerSpec::dense(4, 2)},
            {4}, nn::InitSpec::kaiming(), rng);
        nn::Parameters before = net.params();
        auto opt = nn::OptimizerState::make(kind, 0.0, net.params());
        net.params().zero_grad();
        net.params().for_each_trainable([&](nn::ParamTensor& pt) {
            for (auto& g : pt.grad.data) g = rng.normal();
        });
        for (int t = 0; t < 5; ++t) nn::optimizer_step(opt, net.params());
        CHECK(net.params().bit_equal(before));
    }
}

TEST_CASE("negative lr and non-finite gradients are rejected") {
    auto net = scalar_net(0.0);
    CHECK_THROWS_AS(nn::OptimizerState::make(nn::OptKind::SGD, -0.1, net.params()),
                    ValidationError);
    auto opt = nn::OptimizerState::make(nn::OptKind::SGD, 0.1, net.params());
    set_grad(net, std::numeric_limits<double>::quiet_NaN());
    CHECK_THROWS_AS(nn::optimizer_step(opt, net.params()), NumericalError);
}

TEST_CASE("identical seeds give bit-identical training runs") {
    auto run = [](std::uint64_t seed) {
        Rng rng(seed);
        auto net = nn::Network::build(
            {nn::LayerSpec::dense(6, 8), nn::LayerSpec::activation(nn::Activation::ReLU),
             nn::LayerSpec::dropout(0.2), nn::LayerSpec::dense(8, 3)},
            {6}, nn::InitSpec::kaiming(), rng);
        auto opt = nn::OptimizerState::make(nn::OptKind::Adam, 1e-2, net.params());
        for (int step = 0; step < 20; ++step) {
            Tensor x = Tensor::zeros({4, 6});
            for (auto& v : x.data) v = rng.normal();
            Tensor y = Tensor::zeros({4, 3});
            for (int r = 0; r < 4; ++r) y.data[r * 3 + rng.below(3)] = 1.0;
            nn::ForwardCache cache;
            Tensor logits = net.forward(x, nn::Mode::Train, &cache, &rng);
            auto ce = nn::softmax_cross_entropy(logits, y);
            net.params().zero_grad();
            net.backward(cache, ce.grad);
            nn::optimizer_step(opt, net.params());
        }
        return net.params();
    };
    auto a = run(99);
    auto b = run(99);
    CHECK(a.bit_equal(b));
    auto c = run(100);
    CHECK(!a.bit_equal(c));
}

TEST_SUITE_END();
