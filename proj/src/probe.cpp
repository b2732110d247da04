#include "dreamkit/probe.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "dreamkit/errors.hpp"
#include "dreamkit/nn.hpp"
#include "dreamkit/optim.hpp"
#include "dreamkit/rng.hpp"

namespace dreamkit::harness {

namespace {

std::vector<int> remap_domains(const std::vector<int>& a, const std::vector<int>& b,
                               std::vector<int>& out_a, std::vector<int>& out_b) {
    std::set<int> ids(a.begin(), a.end());
    ids.insert(b.begin(), b.end());
    std::vector<int> order(ids.begin(), ids.end());
    auto index = [&](int v) {
        return static_cast<int>(std::find(order.begin(), order.end(), v) - order.begin());
    };
    out_a.reserve(a.size());
    out_b.reserve(b.size());
    for (int v : a) out_a.push_back(index(v));
    for (int v : b) out_b.push_back(index(v));
    return order;
}

}  // namespace

double domain_probe_split(const Tensor& train_features,
                          const std::vector<int>& train_domains,
                          const Tensor& test_features,
                          const std::vector<int>& test_domains, std::uint64_t seed,
                          const ProbeConfig& cfg) {
    if (train_features.ndim() != 2 || test_features.ndim() != 2)
        throw ValidationError("probe expects [rows, features] matrices");
    if (train_features.shape[0] != train_domains.size() ||
        test_features.shape[0] != test_domains.size())
        throw ValidationError("probe feature/label row mismatch");
    if (train_domains.empty() || test_domains.empty())
        throw ValidationError("probe needs non-empty train and test rows");

    std::vector<int> ytr, yte;
    const auto order = remap_domains(train_domains, test_domains, ytr, yte);
    const int m = static_cast<int>(order.size());
    if (m < 2) throw ValidationError("probe needs at least 2 domains");

    const std::size_t dim = train_features.shape[1];
    if (test_features.shape[1] != dim)
        throw ValidationError("probe train/test feature dims differ");

    // standardize with training statistics
    std::vector<double> mean(dim, 0.0), inv_std(dim, 0.0);
    const std::size_t ntr = train_features.shape[0];
    for (std::size_t r = 0; r < ntr; ++r)
        for (std::size_t q = 0; q < dim; ++q) mean[q] += train_features.data[r * dim + q];
    for (auto& v : mean) v /= static_cast<double>(ntr);
    for (std::size_t r = 0; r < ntr; ++r)
        for (std::size_t q = 0; q < dim; ++q) {
            const double d = train_features.data[r * dim + q] - mean[q];
            inv_std[q] += d * d;
        }
    for (auto& v : inv_std) v = 1.0 / std::sqrt(v / static_cast<double>(ntr) + 1e-8);

    auto standardize = [&](const Tensor& t) {
        Tensor out = t;
        for (std::size_t r = 0; r < t.shape[0]; ++r)
            for (std::size_t q = 0; q < dim; ++q)
                out.data[r * dim + q] = (t.data[r * dim + q] - mean[q]) * inv_std[q];
        return out;
    };
    Tensor xtr = standardize(train_features);
    Tensor xte = standardize(test_features);

    Rng rng(mix_seed(seed, 0x50524f42));
    nn::Network probe = nn::Network::build(
        {nn::LayerSpec::dense(dim, static_cast<std::size_t>(m))}, {dim},
        nn::InitSpec::normal(0.01), rng);
    auto opt = nn::OptimizerState::make(nn::OptKind::Adam, cfg.lr, probe.params());

    Tensor onehot = Tensor::zeros({ntr, static_cast<std::size_t>(m)});
    for (std::size_t r = 0; r < ntr; ++r)
        onehot.data[r * m + static_cast<std::size_t>(ytr[r])] = 1.0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        nn::ForwardCache cache;
        Tensor logits = probe.forward(xtr, nn::Mode::Train, &cache);
        auto ce = nn::softmax_cross_entropy(logits, onehot);
        const double inv = 1.0 / static_cast<double>(ntr);
        for (double& g : ce.grad.data) g *= inv;
        probe.params().zero_grad();
        probe.backward(cache, ce.grad);
        if (cfg.l2 > 0.0) {
            auto& w = probe.params().layers[0].find("w");
            for (std::size_t q = 0; q < w.value.size(); ++q)
                w.grad.data[q] += cfg.l2 * w.value.data[q];
        }
        nn::optimizer_step(opt, probe.params());
    }

    Tensor logits = probe.forward(xte, nn::Mode::Eval);
    std::size_t correct = 0;
    for (std::size_t r = 0; r < yte.size(); ++r) {
        const double* row = logits.ptr() + r * m;
        int best = 0;
        for (int j = 1; j < m; ++j)
            if (row[j] > row[best]) best = j;
        if (best == yte[r]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(yte.size());
}

double domain_probe(const Tensor& features, const std::vector<int>& domains,
                    std::uint64_t seed, const ProbeConfig& cfg) {
    if (features.ndim() != 2 || features.shape[0] != domains.size())
        throw ValidationError("probe expects [rows, features] plus one domain per row");
    const std::size_t n = domains.size();
    if (n < 4) throw ValidationError("too few rows for an internal probe split");
    Rng rng(mix_seed(seed, 0x53504c49));
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    rng.shuffle(idx);
    const std::size_t ntr =
        std::max<std::size_t>(2, static_cast<std::size_t>(
                                     cfg.train_fraction * static_cast<double>(n)));
    const std::size_t dim = features.shape[1];
    auto take = [&](std::size_t begin, std::size_t end, Tensor& x, std::vector<int>& y) {
        x = Tensor::zeros({end - begin, dim});
        y.clear();
        for (std::size_t r = begin; r < end; ++r) {
            std::copy_n(features.ptr() + idx[r] * dim, dim, x.ptr() + (r - begin) * dim);
            y.push_back(domains[idx[r]]);
        }
    };
    Tensor xtr, xte;
    std::vector<int> ytr, yte;
    take(0, ntr, xtr, ytr);
    take(ntr, n, xte, yte);
    return domain_probe_split(xtr, ytr, xte, yte, seed, cfg);
}

}  // namespace dreamkit::harness
