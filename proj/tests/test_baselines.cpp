#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <unistd.h>

#include "dreamkit/baselines.hpp"
#include "dreamkit/rng.hpp"

using namespace dreamkit;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("baselines");

namespace {

// blob fingerprints with two informative attributes
fp::FingerprintSet blob_set(int rows_per_label, std::uint64_t seed, int domains = 2) {
    Rng rng(seed);
    fp::FingerprintSet set;
    const int C = 4, N = 5;
    int id = 0;
    for (int domain = 0; domain < domains; ++domain) {
        for (int label = 0; label < 2; ++label) {
            for (int k = 0; k < rows_per_label; ++k) {
                fp::Fingerprint fpr;
                fpr.model_id = "b" + std::to_string(id++);
                fpr.domain = std::to_string(domain);
                fpr.labeled = true;
                fpr.attrs = zoo::AttributeVector{};
                fpr.attrs.batchnorm = label == 0;
                fpr.attrs.optimizer = label == 0 ? nn::OptKind::SGD : nn::OptKind::Adam;
                fpr.class_count = C;
                fpr.n_queries = N;
                for (int q = 0; q < N; ++q) {
                    double block[4];
                    double sum = 0.0;
                    for (int c = 0; c < C; ++c) {
                        double v = rng.uniform(0.05, 0.3);
                        if (c == label) v += 0.8;
                        if (c == 2) v += 0.1 * domain;
                        block[c] = v;
                        sum += v;
                    }
                    for (int c = 0; c < C; ++c) fpr.values.push_back(block[c] / sum);
                }
                set.add(std::move(fpr));
            }
        }
    }
    return set;
}

}  // namespace

TEST_CASE("hinge definition") {
    CHECK(baselines::hinge(1.5) == 0.0);   // margin beyond 1 costs nothing
    CHECK(baselines::hinge(1.0) == 0.0);
    CHECK(baselines::hinge(0.0) == 1.0);
    CHECK(baselines::hinge(-1.0) == 2.0);
}

TEST_CASE("svm separates a 2-point toy problem perfectly") {
    fp::FingerprintSet set;
    for (int label = 0; label < 2; ++label) {
        for (int rep = 0; rep < 2; ++rep) {
            fp::Fingerprint fpr;
            fpr.model_id = std::to_string(label * 2 + rep);
            fpr.domain = "0";
            fpr.labeled = true;
            fpr.attrs = zoo::AttributeVector{};
            fpr.attrs.kernel_size = label == 0 ? 3 : 5;
            fpr.class_count = 2;
            fpr.n_queries = 2;
            const double p = label == 0 ? 0.9 : 0.1;
            fpr.values = {p, 1 - p, p, 1 - p};
            set.add(std::move(fpr));
        }
    }
    baselines::BaselineConfig cfg;
    cfg.svm_epochs = 50;
    auto svm = baselines::train_linear_svm(set, cfg);
    for (const auto& row : set.rows) {
        auto pred = svm.predict(row.values);
        CHECK(pred[4] == row.attrs.label_indices()[4]);  // kernel-size head
    }
}

TEST_CASE("svm accuracy on the 200-sample blob problem matches the frozen reference") {
    auto train = blob_set(50, 41);  // 200 rows
    auto test = blob_set(25, 42);
    baselines::BaselineConfig cfg;
    cfg.seed = 7;
    auto svm = baselines::train_linear_svm(train, cfg);
    const double acc = baselines::svm_mean_attribute_accuracy(svm, test);
    // frozen from an exhaustive-grid reference run over (svm_lr, svm_reg,
    // svm_epochs); the informative heads are learnable, the rest sit at the
    // majority level
    const double reference = 0.8556;
    INFO("svm blob accuracy ", acc);
    CHECK(acc > reference - 0.02);
    CHECK(acc < reference + 0.02);
}

TEST_CASE("svm rejects single-class heads and wrong dims") {
    auto set = blob_set(4, 3);
    for (auto& row : set.rows) row.attrs.kernel_size = 3;  // one head single-class
    baselines::BaselineConfig cfg;
    CHECK_THROWS_AS(baselines::train_linear_svm(set, cfg), ValidationError);

    auto ok = blob_set(4, 3);
    auto svm = baselines::train_linear_svm(ok, cfg);
    std::vector<double> short_vec(ok.rows[0].values);
    short_vec.pop_back();
    CHECK_THROWS_AS(svm.predict(short_vec), IncompatibilityError);
}

TEST_CASE("mmd penalty is zero on identical sets and symmetric") {
    Rng rng(4);
    Tensor a = Tensor::zeros({5, 3});
    for (auto& v : a.data) v = rng.normal();
    Tensor b = a;
    CHECK(std::abs(baselines::mmd_value({a, b}, 1.0)) < 1e-12);

    Tensor c = Tensor::zeros({4, 3});
    for (auto& v : c.data) v = rng.normal(2.0, 1.0);
    const double ab = baselines::mmd_value({a, c}, 1.3);
    const double ba = baselines::mmd_value({c, a}, 1.3);
    CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
    CHECK(ab > 0.0);
}

TEST_CASE("far-separated clusters reduce MMD to the within-set kernel means") {
    Rng rng(9);
    const double sigma = 0.7;
    Tensor a = Tensor::zeros({6, 2});
    Tensor b = Tensor::zeros({5, 2});
    for (auto& v : a.data) v = rng.normal(0.0, 0.3);
    for (auto& v : b.data) v = rng.normal(100.0, 0.3);  // distance >> sigma
    auto mean_kernel = [&](const Tensor& x) {
        double total = 0.0;
        const std::size_t n = x.shape[0];
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double d2 = 0.0;
                for (std::size_t q = 0; q < 2; ++q) {
                    const double d = x.data[i * 2 + q] - x.data[j * 2 + q];
                    d2 += d * d;
                }
                total += std::exp(-d2 / (2.0 * sigma * sigma));
            }
        return total / static_cast<double>(n * n);
    };
    const double expected = mean_kernel(a) + mean_kernel(b);  // cross term ~ 0
    CHECK(baselines::mmd_value({a, b}, sigma) ==
          doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("mmd penalty guards degenerate inputs") {
    Tensor a = Tensor::zeros({3, 2});
    Tensor b = Tensor::full({3, 2}, 1.0);
    CHECK_THROWS_AS(baselines::mmd_penalty({a, b}, 0.0), ValidationError);
    CHECK_THROWS_AS(baselines::mmd_penalty({a}, 1.0), ValidationError);
    Tensor one_row = Tensor::zeros({1, 2});
    CHECK_THROWS_AS(baselines::mmd_penalty({a, one_row}, 1.0), ValidationError);
    // identical rows give a zero median distance
    Tensor flat = Tensor::zeros({4, 2});
    CHECK_THROWS_AS(baselines::median_heuristic_sigma({flat, flat}), ValidationError);
}

TEST_CASE("gamma zero reduces the MMD baseline bit-exactly to kennen") {
    auto train = blob_set(8, 21);
    baselines::BaselineConfig cfg;
    cfg.lr = 5e-3;
    cfg.epochs = 8;
    cfg.batch = 8;
    cfg.seed = 3;
    cfg.mmd_gamma = 0.0;
    auto via_mmd = baselines::train_mmd(train, cfg);
    auto via_kennen = baselines::train_kennen(train, cfg);
    CHECK(via_mmd.pipeline.trunk.params().bit_equal(via_kennen.pipeline.trunk.params()));
    for (std::size_t h = 0; h < via_mmd.pipeline.heads.size(); ++h)
        CHECK(via_mmd.pipeline.heads[h].params().bit_equal(
            via_kennen.pipeline.heads[h].params()));
    CHECK(via_mmd.pipeline.kind == "kennen");  // gamma 0 is the kennen trainer
}

TEST_CASE("large gamma pulls per-domain trunk features together") {
    auto train = blob_set(12, 22, 2);
    baselines::BaselineConfig cfg;
    cfg.lr = 2e-3;
    cfg.epochs = 60;
    cfg.batch = 12;
    cfg.seed = 5;

    auto feature_gap = [&](dream::ReversePipeline& pipe) {
        Tensor x = train.features();
        Tensor t = pipe.trunk.forward(x, nn::Mode::Eval);
        const std::size_t dim = t.shape[1];
        std::vector<double> mean0(dim, 0.0), mean1(dim, 0.0);
        std::size_t n0 = 0, n1 = 0;
        for (std::size_t r = 0; r < train.rows.size(); ++r) {
            auto& dst = train.rows[r].domain == "0" ? mean0 : mean1;
            (train.rows[r].domain == "0" ? n0 : n1)++;
            for (std::size_t q = 0; q < dim; ++q) dst[q] += t.data[r * dim + q];
        }
        double gap = 0.0;
        for (std::size_t q = 0; q < dim; ++q) {
            const double d = mean0[q] / static_cast<double>(n0) -
                             mean1[q] / static_cast<double>(n1);
            gap += d * d;
        }
        return gap;
    };

    cfg.mmd_gamma = 0.0;
    auto plain = baselines::train_kennen(train, cfg);
    cfg.mmd_gamma = 1000.0;
    auto aligned = baselines::train_mmd(train, cfg);
    const double gap_plain = feature_gap(plain.pipeline);
    const double gap_aligned = feature_gap(aligned.pipeline);
    INFO("between-domain feature gap ", gap_plain, " -> ", gap_aligned);
    CHECK(gap_aligned < gap_plain);
    CHECK(aligned.pipeline.kind == "mmd");

    // deterministic under a fixed seed
    auto again = baselines::train_mmd(train, cfg);
    CHECK(again.pipeline.trunk.params().bit_equal(aligned.pipeline.trunk.params()));
}

TEST_CASE("mmd baseline needs two domains") {
    auto train = blob_set(6, 23, 1);
    baselines::BaselineConfig cfg;
    cfg.mmd_gamma = 1.0;
    CHECK_THROWS_AS(baselines::train_mmd(train, cfg), ValidationError);
}

TEST_CASE("svm checkpoints round-trip") {
    auto train = blob_set(6, 24);
    baselines::BaselineConfig cfg;
    cfg.svm_epochs = 5;
    auto svm = baselines::train_linear_svm(train, cfg);
    const auto path = (fs::temp_directory_path() /
                       ("dreamkit_svm_" + std::to_string(::getpid()) + ".ckpt"))
                          .string();
    baselines::save_svm(svm, train.class_count, train.n_queries, zoo::grid_hash(), path);
    auto bundle = baselines::load_svm(path);
    CHECK(bundle.class_count == train.class_count);
    CHECK(bundle.grid_hash_value == zoo::grid_hash());
    for (const auto& row : train.rows)
        CHECK(bundle.svm.predict(row.values) == svm.predict(row.values));
    CHECK(bundle.svm.weights == svm.weights);
    CHECK(bundle.svm.biases == svm.biases);
    fs::remove(path);
}

TEST_SUITE_END();
