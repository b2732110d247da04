#include "dreamkit/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "dreamkit/checkpoint.hpp"
#include "dreamkit/errors.hpp"
#include "dreamkit/rng.hpp"

namespace dreamkit::baselines {

double median_heuristic_sigma(const std::vector<Tensor>& batches) {
    std::vector<const Tensor*> nonempty;
    for (const auto& b : batches)
        if (b.shape.size() == 2 && b.shape[0] > 0) nonempty.push_back(&b);
    if (nonempty.empty()) throw ValidationError("no rows for bandwidth estimation");
    const std::size_t dim = nonempty.front()->shape[1];
    std::vector<const double*> rows;
    for (const auto* b : nonempty)
        for (std::size_t r = 0; r < b->shape[0]; ++r) rows.push_back(b->ptr() + r * dim);
    std::vector<double> d2;
    d2.reserve(rows.size() * (rows.size() - 1) / 2);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = i + 1; j < rows.size(); ++j) {
            double s = 0.0;
            for (std::size_t q = 0; q < dim; ++q) {
                const double d = rows[i][q] - rows[j][q];
                s += d * d;
            }
            d2.push_back(s);
        }
    }
    if (d2.empty()) throw ValidationError("bandwidth estimation needs >= 2 rows");
    std::nth_element(d2.begin(), d2.begin() + d2.size() / 2, d2.end());
    const double median = d2[d2.size() / 2];
    if (median <= 0.0)
        throw ValidationError("degenerate bandwidth: median pairwise distance is zero");
    return std::sqrt(median / 2.0);
}

namespace {

// adds the pair's value and gradient contributions, scaled by `weight`
double mmd_pair(const Tensor& xs, const Tensor& ys, double sigma, double weight,
                Tensor* gx, Tensor* gy) {
    const std::size_t nx = xs.shape[0], ny = ys.shape[0], dim = xs.shape[1];
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    const double invs2 = 1.0 / (sigma * sigma);
    double term_xx = 0.0, term_yy = 0.0, term_xy = 0.0;

    auto kernel_block = [&](const Tensor& a, const Tensor& b, double coeff, Tensor* ga,
                            Tensor* gb) {
        const std::size_t na = a.shape[0], nb = b.shape[0];
        const double scale = coeff / static_cast<double>(na * nb);
        double total = 0.0;
        for (std::size_t i = 0; i < na; ++i) {
            const double* ai = a.ptr() + i * dim;
            for (std::size_t j = 0; j < nb; ++j) {
                const double* bj = b.ptr() + j * dim;
                double d2 = 0.0;
                for (std::size_t q = 0; q < dim; ++q) {
                    const double d = ai[q] - bj[q];
                    d2 += d * d;
                }
                const double k = std::exp(-d2 * inv2s2);
                total += k;
                if (ga || gb) {
                    const double gk = weight * scale * k * invs2;
                    for (std::size_t q = 0; q < dim; ++q) {
                        const double diff = ai[q] - bj[q];
                        if (ga) ga->data[i * dim + q] += gk * (-diff);
                        if (gb) gb->data[j * dim + q] += gk * diff;
                    }
                }
            }
        }
        return total * scale / coeff;  // plain mean of the block
    };

    // d/dx of mean k(x,x') double-counts symmetric pairs, handled by passing
    // the same gradient buffer for both sides.
    term_xx = kernel_block(xs, xs, 1.0, gx, gx);
    term_yy = kernel_block(ys, ys, 1.0, gy, gy);
    term_xy = kernel_block(xs, ys, -2.0, gx, gy);
    return weight * (term_xx + term_yy - 2.0 * term_xy);
}

}  // namespace

MmdResult mmd_penalty(const std::vector<Tensor>& batches, double sigma) {
    if (batches.size() < 2)
        throw ValidationError("MMD penalty needs at least 2 domains");
    if (sigma <= 0.0) throw ValidationError("degenerate bandwidth");
    for (const auto& b : batches)
        if (b.shape.size() != 2 || b.shape[0] < 2)
            throw ValidationError("MMD penalty needs >= 2 samples per domain");

    MmdResult res;
    res.grads.reserve(batches.size());
    for (const auto& b : batches) res.grads.push_back(Tensor::zeros(b.shape));

    const std::size_t pairs = batches.size() * (batches.size() - 1) / 2;
    const double weight = 1.0 / static_cast<double>(pairs);
    for (std::size_t i = 0; i < batches.size(); ++i)
        for (std::size_t j = i + 1; j < batches.size(); ++j)
            res.value += mmd_pair(batches[i], batches[j], sigma, weight, &res.grads[i],
                                  &res.grads[j]);
    return res;
}

double mmd_value(const std::vector<Tensor>& batches, double sigma) {
    if (batches.size() < 2)
        throw ValidationError("MMD penalty needs at least 2 domains");
    if (sigma <= 0.0) throw ValidationError("degenerate bandwidth");
    const std::size_t pairs = batches.size() * (batches.size() - 1) / 2;
    const double weight = 1.0 / static_cast<double>(pairs);
    double value = 0.0;
    for (std::size_t i = 0; i < batches.size(); ++i)
        for (std::size_t j = i + 1; j < batches.size(); ++j)
            value += mmd_pair(batches[i], batches[j], sigma, weight, nullptr, nullptr);
    return value;
}

dream::TrainResult train_kennen(const fp::FingerprintSet& train_rows,
                                const BaselineConfig& cfg) {
    if (train_rows.rows.empty()) throw ValidationError("empty training set");
    dream::DreamConfig dc;
    dc.use_gan = false;
    dc.lambda = 0.0;
    dc.beta = cfg.lr;
    dc.alpha = 0.0;
    dc.batch = cfg.batch;
    dc.epochs = cfg.epochs;
    dc.seed = cfg.seed;
    dc.mmd_gamma = 0.0;
    return dream::train_reverse(train_rows, dc);
}

dream::TrainResult train_mmd(const fp::FingerprintSet& train_rows,
                             const BaselineConfig& cfg) {
    if (train_rows.domains().size() < 2)
        throw ValidationError("MMD baseline needs at least 2 source domains");
    dream::DreamConfig dc;
    dc.use_gan = false;
    dc.lambda = 0.0;
    dc.beta = cfg.lr;
    dc.alpha = 0.0;
    dc.batch = cfg.batch;
    dc.epochs = cfg.epochs;
    dc.seed = cfg.seed;
    dc.mmd_gamma = cfg.mmd_gamma;
    dc.mmd_sigma = cfg.mmd_sigma;
    return dream::train_reverse(train_rows, dc);
}

double hinge(double signed_margin) { return std::max(0.0, 1.0 - signed_margin); }

LinearSvm train_linear_svm(const fp::FingerprintSet& train_rows,
                           const BaselineConfig& cfg) {
    if (train_rows.rows.empty()) throw ValidationError("empty training set");
    for (const auto& row : train_rows.rows)
        if (!row.labeled) throw ValidationError("SVM training rows must carry labels");
    const std::size_t n = train_rows.rows.size();
    const std::size_t dim =
        static_cast<std::size_t>(train_rows.class_count) * train_rows.n_queries;

    LinearSvm svm;
    svm.input_dim = dim;
    svm.weights.resize(zoo::kAttributeCount);
    svm.biases.resize(zoo::kAttributeCount);

    std::vector<std::array<std::size_t, zoo::kAttributeCount>> labels(n);
    for (std::size_t r = 0; r < n; ++r) labels[r] = train_rows.rows[r].attrs.label_indices();

    Rng rng(cfg.seed);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    for (std::size_t attr = 0; attr < zoo::kAttributeCount; ++attr) {
        const std::size_t k = zoo::kAttributeCardinality[attr];
        // single-class data cannot fit one-vs-rest margins
        std::size_t seen_mask = 0;
        for (std::size_t r = 0; r < n; ++r) seen_mask |= 1ull << labels[r][attr];
        if ((seen_mask & (seen_mask - 1)) == 0)
            throw ValidationError("attribute " + std::string(zoo::kAttributeNames[attr]) +
                                  " has a single class in the training data");
        svm.weights[attr].assign(k, std::vector<double>(dim, 0.0));
        svm.biases[attr].assign(k, 0.0);

        for (int epoch = 0; epoch < cfg.svm_epochs; ++epoch) {
            rng.shuffle(order);
            for (std::size_t r : order) {
                const double* x = train_rows.rows[r].values.data();
                for (std::size_t c = 0; c < k; ++c) {
                    double* w = svm.weights[attr][c].data();
                    const double s = labels[r][attr] == c ? 1.0 : -1.0;
                    double margin = svm.biases[attr][c];
                    for (std::size_t q = 0; q < dim; ++q) margin += w[q] * x[q];
                    // L2 shrink plus hinge subgradient
                    const double shrink = 1.0 - cfg.svm_lr * cfg.svm_reg;
                    for (std::size_t q = 0; q < dim; ++q) w[q] *= shrink;
                    if (s * margin < 1.0) {
                        for (std::size_t q = 0; q < dim; ++q)
                            w[q] += cfg.svm_lr * s * x[q];
                        svm.biases[attr][c] += cfg.svm_lr * s;
                    }
                }
            }
        }
    }
    return svm;
}

std::array<std::size_t, zoo::kAttributeCount> LinearSvm::predict(
    const std::vector<double>& values) const {
    if (values.size() != input_dim)
        throw IncompatibilityError("fingerprint length " + std::to_string(values.size()) +
                                   " incompatible with SVM input dim " +
                                   std::to_string(input_dim));
    std::array<std::size_t, zoo::kAttributeCount> out{};
    for (std::size_t attr = 0; attr < zoo::kAttributeCount; ++attr) {
        double best = -1e300;
        std::size_t arg = 0;
        for (std::size_t c = 0; c < weights[attr].size(); ++c) {
            double margin = biases[attr][c];
            const double* w = weights[attr][c].data();
            for (std::size_t q = 0; q < input_dim; ++q) margin += w[q] * values[q];
            if (margin > best) {
                best = margin;
                arg = c;
            }
        }
        out[attr] = arg;
    }
    return out;
}

namespace {
constexpr char kSvmMagic[8] = {'D', 'K', 'S', 'V', 'M', '0', '0', '1'};
}

void save_svm(const LinearSvm& svm, int class_count, int n_queries,
              std::uint64_t grid_hash_value, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ValidationError("cannot open " + path + " for writing");
    os.write(kSvmMagic, 8);
    nn::write_u32(os, static_cast<std::uint32_t>(class_count));
    nn::write_u32(os, static_cast<std::uint32_t>(n_queries));
    nn::write_u64(os, grid_hash_value);
    nn::write_u64(os, svm.input_dim);
    for (std::size_t attr = 0; attr < zoo::kAttributeCount; ++attr) {
        nn::write_u32(os, static_cast<std::uint32_t>(svm.weights[attr].size()));
        for (std::size_t c = 0; c < svm.weights[attr].size(); ++c) {
            for (double w : svm.weights[attr][c]) nn::write_f64(os, w);
            nn::write_f64(os, svm.biases[attr][c]);
        }
    }
    if (!os) throw ValidationError("write failed: " + path);
}

SvmBundle load_svm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ValidationError("cannot open SVM checkpoint " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kSvmMagic, 8) != 0)
        throw ValidationError("bad SVM checkpoint magic in " + path);
    SvmBundle bundle;
    bundle.class_count = static_cast<int>(nn::read_u32(is));
    bundle.n_queries = static_cast<int>(nn::read_u32(is));
    bundle.grid_hash_value = nn::read_u64(is);
    bundle.svm.input_dim = static_cast<std::size_t>(nn::read_u64(is));
    bundle.svm.weights.resize(zoo::kAttributeCount);
    bundle.svm.biases.resize(zoo::kAttributeCount);
    for (std::size_t attr = 0; attr < zoo::kAttributeCount; ++attr) {
        const std::uint32_t k = nn::read_u32(is);
        if (k != zoo::kAttributeCardinality[attr])
            throw ValidationError("SVM checkpoint head size mismatch");
        bundle.svm.weights[attr].assign(k, std::vector<double>(bundle.svm.input_dim));
        bundle.svm.biases[attr].assign(k, 0.0);
        for (std::uint32_t c = 0; c < k; ++c) {
            for (auto& w : bundle.svm.weights[attr][c]) w = nn::read_f64(is);
            bundle.svm.biases[attr][c] = nn::read_f64(is);
        }
    }
    return bundle;
}

double svm_mean_attribute_accuracy(const LinearSvm& svm, const fp::FingerprintSet& set) {
    std::size_t count = 0;
    double acc = 0.0;
    for (const auto& row : set.rows) {
        if (!row.labeled) continue;
        const auto pred = svm.predict(row.values);
        const auto truth = row.attrs.label_indices();
        std::size_t hits = 0;
        for (std::size_t h = 0; h < zoo::kAttributeCount; ++h)
            if (pred[h] == truth[h]) ++hits;
        acc += static_cast<double>(hits) / zoo::kAttributeCount;
        ++count;
    }
    if (!count) throw ValidationError("no labeled rows to score");
    return acc / static_cast<double>(count);
}

}  // namespace dreamkit::baselines
