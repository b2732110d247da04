#pragma once

// Shared by the unit suite and the acceptance binary: finite-difference
// checks for every layer kind, every loss, and the discriminator-through-
// generator composition.

#include <functional>
#include <string>
#include <vector>

#include "dreamkit/dream.hpp"
#include "dreamkit/mmd.hpp"
#include "dreamkit/nn.hpp"
#include "dreamkit/rng.hpp"
#include "oracles.hpp"

namespace gradcheck {

using dreamkit::Rng;
using dreamkit::Tensor;
namespace nn = dreamkit::nn;
namespace dream = dreamkit::dream;

struct CheckOutcome {
    std::string name;
    double max_rel_err = 0.0;
    std::size_t coords = 0;
};

inline std::vector<std::pair<Tensor*, const Tensor*>> trainable_pairs(nn::Network& net) {
    std::vector<std::pair<Tensor*, const Tensor*>> out;
    for (auto& layer : net.params().layers)
        for (auto& pt : layer.tensors)
            if (pt.trainable) out.emplace_back(&pt.value, &pt.grad);
    return out;
}

// Weighted-sum loss through one small network; checks parameter and input
// gradients in train mode with a fixed dropout stream.
inline CheckOutcome check_network(const std::string& name,
                                  std::vector<nn::LayerSpec> specs,
                                  std::vector<std::size_t> in_shape, std::size_t batch,
                                  std::uint64_t seed) {
    Rng rng(seed);
    auto net = nn::Network::build(std::move(specs), in_shape, nn::InitSpec::kaiming(),
                                  rng);
    // random weights break symmetric initializations
    net.params().for_each_trainable([&](nn::ParamTensor& pt) {
        if (pt.name == "w" || pt.name == "b")
            for (auto& v : pt.value.data) v = rng.uniform(-0.8, 0.8);
    });
    std::vector<std::size_t> xshape = {batch};
    xshape.insert(xshape.end(), in_shape.begin(), in_shape.end());
    Tensor x = Tensor::zeros(xshape);
    for (auto& v : x.data) v = rng.normal(0.0, 1.0);

    std::vector<std::size_t> yshape = {batch};
    const auto& out_shape = net.output_sample_shape();
    yshape.insert(yshape.end(), out_shape.begin(), out_shape.end());
    Tensor weights = Tensor::zeros(yshape);
    for (auto& v : weights.data) v = rng.uniform(-1.0, 1.0);

    const std::uint64_t drop_seed = rng.next_u64();
    auto eval = [&]() {
        Rng drop(drop_seed);
        Tensor y = net.forward(x, nn::Mode::Train, nullptr, &drop);
        double loss = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) loss += weights.data[i] * y.data[i];
        return loss;
    };

    nn::ForwardCache cache;
    Rng drop(drop_seed);
    net.forward(x, nn::Mode::Train, &cache, &drop);
    net.params().zero_grad();
    Tensor input_grad = net.backward(cache, weights);

    auto pairs = trainable_pairs(net);
    pairs.emplace_back(&x, &input_grad);
    auto res = oracles::check_gradients(eval, pairs);
    return {name, res.max_rel_err, res.coords};
}

inline CheckOutcome check_cross_entropy(std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t k = 3 + rng.below(4);
    Tensor p = Tensor::zeros({2, k});
    for (auto& v : p.data) v = rng.uniform(0.05, 1.0);
    Tensor y = Tensor::zeros({2, k});
    y.data[rng.below(k)] = 1.0;
    y.data[k + rng.below(k)] = 1.0;
    auto eval = [&]() { return nn::cross_entropy(p, y).loss; };
    auto res0 = nn::cross_entropy(p, y);
    auto res = oracles::check_gradients(
        eval, {{&p, &res0.grad}});
    return {"cross_entropy", res.max_rel_err, res.coords};
}

inline CheckOutcome check_softmax_ce(std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t k = 3 + rng.below(4);
    Tensor z = Tensor::zeros({2, k});
    for (auto& v : z.data) v = rng.uniform(-3.0, 3.0);
    Tensor y = Tensor::zeros({2, k});
    y.data[rng.below(k)] = 1.0;
    y.data[k + rng.below(k)] = 1.0;
    auto eval = [&]() { return nn::softmax_cross_entropy(z, y).loss; };
    auto res0 = nn::softmax_cross_entropy(z, y);
    auto res = oracles::check_gradients(eval, {{&z, &res0.grad}});
    return {"softmax_cross_entropy", res.max_rel_err, res.coords};
}

inline CheckOutcome check_discriminator_loss(std::uint64_t seed) {
    Rng rng(seed);
    dream::DreamDims dims;
    dims.embed_dim = 6;
    dims.disc_hidden1 = 8;
    dims.disc_hidden2 = 5;
    std::vector<nn::LayerSpec> specs = {
        nn::LayerSpec::dense(dims.embed_dim, dims.disc_hidden1),
        nn::LayerSpec::activation(nn::Activation::ReLU),
        nn::LayerSpec::dense(dims.disc_hidden1, dims.disc_hidden2),
        nn::LayerSpec::activation(nn::Activation::ReLU),
        nn::LayerSpec::dense(dims.disc_hidden2, 1),
        nn::LayerSpec::sigmoid(),
    };
    auto disc = nn::Network::build(specs, {dims.embed_dim}, nn::InitSpec::normal(0.3),
                                   rng);
    Tensor zt = Tensor::zeros({3, dims.embed_dim});
    Tensor zf = Tensor::zeros({4, dims.embed_dim});
    for (auto& v : zt.data) v = rng.normal();
    for (auto& v : zf.data) v = rng.normal();

    auto eval = [&]() { return dream::discriminator_loss(disc, zt, zf); };
    disc.params().zero_grad();
    dream::discriminator_loss_backward(disc, zt, zf);
    auto res = oracles::check_gradients(eval, trainable_pairs(disc));
    return {"discriminator_loss", res.max_rel_err, res.coords};
}

// Adversarial generator loss through D(G(x)): gradients with respect to the
// generator parameters.
inline CheckOutcome check_generator_through_disc(std::uint64_t seed,
                                                 bool non_saturating = false) {
    Rng rng(seed);
    const std::size_t in_dim = 7, hidden = 9, embed = 5;
    auto gen = nn::Network::build(
        {nn::LayerSpec::dense(in_dim, hidden),
         nn::LayerSpec::activation(nn::Activation::ReLU),
         nn::LayerSpec::dense(hidden, embed)},
        {in_dim}, nn::InitSpec::normal(0.4), rng);
    std::vector<nn::Network> discs;
    for (int i = 0; i < 2; ++i)
        discs.push_back(nn::Network::build(
            {nn::LayerSpec::dense(embed, 6), nn::LayerSpec::activation(nn::Activation::ReLU),
             nn::LayerSpec::dense(6, 1), nn::LayerSpec::sigmoid()},
            {embed}, nn::InitSpec::normal(0.4), rng));
    Tensor x0 = Tensor::zeros({3, in_dim});
    Tensor x1 = Tensor::zeros({2, in_dim});
    for (auto& v : x0.data) v = rng.normal();
    for (auto& v : x1.data) v = rng.normal();

    auto eval = [&]() {
        std::vector<Tensor> fakes = {gen.forward(x0, nn::Mode::Eval),
                                     gen.forward(x1, nn::Mode::Eval)};
        return dream::generator_adversarial_loss(discs, fakes, non_saturating);
    };

    // analytic: backprop each discriminator's embedding gradient into G
    nn::ForwardCache c0, c1;
    std::vector<Tensor> fakes = {gen.forward(x0, nn::Mode::Train, &c0),
                                 gen.forward(x1, nn::Mode::Train, &c1)};
    std::vector<Tensor> embed_grads;
    dream::generator_adversarial_loss_backward(discs, fakes, non_saturating,
                                               embed_grads);
    gen.params().zero_grad();
    gen.backward(c0, embed_grads[0]);
    gen.backward(c1, embed_grads[1]);
    auto res = oracles::check_gradients(eval, trainable_pairs(gen));
    return {non_saturating ? "generator_adv_nonsat" : "generator_adv", res.max_rel_err,
            res.coords};
}

inline CheckOutcome check_classifier_loss(std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t embed = 6, trunk_h = 8;
    dream::DreamDims dims;
    dims.trunk_hidden = trunk_h;
    auto trunk = nn::Network::build(
        {nn::LayerSpec::dense(embed, trunk_h),
         nn::LayerSpec::activation(nn::Activation::ReLU)},
        {embed}, nn::InitSpec::normal(0.4), rng);
    std::vector<nn::Network> heads;
    for (std::size_t a = 0; a < dreamkit::zoo::kAttributeCount; ++a)
        heads.push_back(nn::Network::build(
            {nn::LayerSpec::dense(trunk_h, dreamkit::zoo::kAttributeCardinality[a])},
            {trunk_h}, nn::InitSpec::normal(0.4), rng));
    const std::size_t rows = 4;
    Tensor z = Tensor::zeros({rows, embed});
    for (auto& v : z.data) v = rng.normal();
    std::vector<std::array<std::size_t, dreamkit::zoo::kAttributeCount>> labels(rows);
    for (auto& lab : labels)
        for (std::size_t a = 0; a < dreamkit::zoo::kAttributeCount; ++a)
            lab[a] = rng.below(dreamkit::zoo::kAttributeCardinality[a]);

    auto eval = [&]() { return dream::classifier_loss(trunk, heads, z, labels); };

    // analytic gradients of the per-sample mean
    nn::ForwardCache ct;
    Tensor t = trunk.forward(z, nn::Mode::Train, &ct);
    trunk.params().zero_grad();
    for (auto& h : heads) h.params().zero_grad();
    Tensor dt = Tensor::zeros(t.shape);
    for (std::size_t h = 0; h < heads.size(); ++h) {
        nn::ForwardCache ch;
        Tensor logits = heads[h].forward(t, nn::Mode::Train, &ch);
        Tensor y = Tensor::zeros(logits.shape);
        for (std::size_t r = 0; r < rows; ++r)
            y.data[r * logits.shape[1] + labels[r][h]] = 1.0;
        auto ce = nn::softmax_cross_entropy(logits, y);
        for (auto& v : ce.grad.data) v /= static_cast<double>(rows);
        Tensor d = heads[h].backward(ch, ce.grad);
        for (std::size_t i = 0; i < dt.size(); ++i) dt.data[i] += d.data[i];
    }
    trunk.backward(ct, dt);

    std::vector<std::pair<Tensor*, const Tensor*>> pairs = trainable_pairs(trunk);
    for (auto& h : heads)
        for (auto& p : trainable_pairs(h)) pairs.push_back(p);
    auto res = oracles::check_gradients(eval, pairs);
    return {"classifier_loss", res.max_rel_err, res.coords};
}

inline CheckOutcome check_mmd(std::uint64_t seed) {
    namespace bl = dreamkit::baselines;
    Rng rng(seed);
    const std::size_t dim = 4;
    std::vector<Tensor> batches;
    for (int d = 0; d < 3; ++d) {
        Tensor b = Tensor::zeros({3 + rng.below(3), dim});
        for (auto& v : b.data) v = rng.normal(static_cast<double>(d), 1.0);
        batches.push_back(std::move(b));
    }
    const double sigma = 1.3;
    auto eval = [&]() { return bl::mmd_value(batches, sigma); };
    auto penalty = bl::mmd_penalty(batches, sigma);
    std::vector<std::pair<Tensor*, const Tensor*>> pairs;
    for (std::size_t i = 0; i < batches.size(); ++i)
        pairs.emplace_back(&batches[i], &penalty.grads[i]);
    auto res = oracles::check_gradients(eval, pairs);
    return {"mmd_penalty", res.max_rel_err, res.coords};
}

// The full battery: `instances` random cases per item.
inline std::vector<CheckOutcome> run_battery(int instances) {
    std::vector<CheckOutcome> all;
    auto merge = [&all](const std::string& name, CheckOutcome one) {
        for (auto& o : all) {
            if (o.name == name) {
                o.max_rel_err = std::max(o.max_rel_err, one.max_rel_err);
                o.coords += one.coords;
                return;
            }
        }
        one.name = name;
        all.push_back(std::move(one));
    };

    using nn::Activation;
    using nn::LayerSpec;
    for (int i = 0; i < instances; ++i) {
        const std::uint64_t seed = 1000 + static_cast<std::uint64_t>(i);
        merge("dense", check_network("dense", {LayerSpec::dense(5, 4)}, {5}, 3, seed));
        merge("conv2d_k3",
              check_network("conv2d_k3", {LayerSpec::conv2d(2, 2, 3)}, {2, 5, 5}, 2,
                            seed));
        merge("conv2d_k5",
              check_network("conv2d_k5", {LayerSpec::conv2d(1, 2, 5)}, {1, 6, 6}, 2,
                            seed));
        merge("relu",
              check_network("relu",
                            {LayerSpec::dense(4, 4), LayerSpec::activation(Activation::ReLU)},
                            {4}, 3, seed));
        merge("prelu",
              check_network("prelu",
                            {LayerSpec::dense(4, 4), LayerSpec::activation(Activation::PReLU)},
                            {4}, 3, seed));
        merge("elu",
              check_network("elu",
                            {LayerSpec::dense(4, 4), LayerSpec::activation(Activation::ELU)},
                            {4}, 3, seed));
        merge("tanh",
              check_network("tanh",
                            {LayerSpec::dense(4, 4), LayerSpec::activation(Activation::Tanh)},
                            {4}, 3, seed));
        merge("dropout",
              check_network("dropout",
                            {LayerSpec::dense(5, 5), LayerSpec::dropout(0.3)}, {5}, 3,
                            seed));
        merge("batchnorm_dense",
              check_network("batchnorm_dense",
                            {LayerSpec::dense(4, 4), LayerSpec::batchnorm()}, {4}, 5,
                            seed));
        merge("batchnorm_conv",
              check_network("batchnorm_conv",
                            {LayerSpec::conv2d(1, 2, 3), LayerSpec::batchnorm()},
                            {1, 4, 4}, 3, seed));
        merge("maxpool",
              check_network("maxpool",
                            {LayerSpec::conv2d(1, 2, 3), LayerSpec::maxpool()},
                            {1, 4, 4}, 2, seed));
        merge("softmax_head",
              check_network("softmax_head",
                            {LayerSpec::dense(4, 4), LayerSpec::softmax_head()}, {4}, 3,
                            seed));
        merge("sigmoid",
              check_network("sigmoid",
                            {LayerSpec::dense(4, 3), LayerSpec::sigmoid()}, {4}, 3,
                            seed));
        merge("scheme_stack",
              check_network("scheme_stack",
                            {LayerSpec::conv2d(1, 2, 3), LayerSpec::batchnorm(),
                             LayerSpec::maxpool(), LayerSpec::activation(Activation::ELU),
                             LayerSpec::dense(2 * 3 * 3, 6),
                             LayerSpec::activation(Activation::PReLU),
                             LayerSpec::dropout(0.2), LayerSpec::dense(6, 4)},
                            {1, 6, 6}, 4, seed));
        merge("cross_entropy", check_cross_entropy(seed));
        merge("softmax_cross_entropy", check_softmax_ce(seed));
        merge("discriminator_loss", check_discriminator_loss(seed));
        merge("generator_adv", check_generator_through_disc(seed, false));
        merge("generator_adv_nonsat", check_generator_through_disc(seed, true));
        merge("classifier_loss", check_classifier_loss(seed));
        merge("mmd_penalty", check_mmd(seed));
    }
    return all;
}

}  // namespace gradcheck
